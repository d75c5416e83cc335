import json
import random

import pytest

from sdatlas.graph import (
    NEGATIVE,
    POSITIVE,
    UNKNOWN,
    CausalGraph,
    CausalLink,
    FeedbackLoop,
    enumerate_loops,
)
from sdatlas.structured import (
    DanglingReference,
    DiagramLink,
    DiagramLoop,
    DiagramVariable,
    DuplicateLink,
    InconsistentLoops,
    StructuredDiagram,
    from_structured,
    to_structured,
)


def random_graph(rng, n_max=10):
    n = rng.randint(1, n_max)
    nodes = [f"v{i}" for i in range(n)]
    links = []
    for s in nodes:
        for t in nodes:
            if rng.random() < 0.3:
                links.append(CausalLink(s, t, rng.choice([POSITIVE, NEGATIVE, UNKNOWN])))
    return CausalGraph.build(nodes, links)


class TestToStructured:
    def test_population_projection(self, population_graph, population_loops):
        d = to_structured(population_graph, population_loops)
        assert len(d.variables) == 5
        assert len(d.links) == 6
        assert [(lp.id, lp.variables, lp.type) for lp in d.loops] == [
            ("R1", ("births", "population"), "reinforcing"),
            ("B1", ("deaths", "population"), "balancing"),
        ]

    def test_empty_graph(self):
        d = to_structured(CausalGraph.build([], []), [])
        assert d == StructuredDiagram((), (), ())

    def test_two_node_projection(self):
        g = CausalGraph.build(["a", "b"], [CausalLink("a", "b", POSITIVE)])
        d = to_structured(g, [])
        assert len(d.variables) == 2 and len(d.links) == 1 and d.loops == ()

    def test_inconsistent_loops_rejected(self, population_graph):
        bogus = FeedbackLoop(
            cycle=("births", "population"),
            links=(CausalLink("births", "population", POSITIVE), CausalLink("population", "lifetime", POSITIVE)),
            loop_type="reinforcing",
        )
        with pytest.raises(InconsistentLoops):
            to_structured(population_graph, [bogus])

    def test_wire_format(self, population_graph, population_loops):
        data = json.loads(to_structured(population_graph, population_loops).to_json())
        assert list(data) == ["variables", "links", "loops"]
        assert data["links"][0] == {"from": "birth_rate", "to": "births", "polarity": "+"}
        assert {l["polarity"] for l in data["links"]} == {"+", "-"}
        assert data["loops"][0]["type"] == "reinforcing"


class TestFromStructured:
    def test_round_trip_population(self, population_graph, population_loops):
        d = to_structured(population_graph, population_loops)
        assert from_structured(d).same_structure(population_graph)

    def test_round_trip_random_graphs(self):
        rng = random.Random(11)
        for _ in range(100):
            g = random_graph(rng)
            d = to_structured(g, enumerate_loops(g))
            assert from_structured(d).same_structure(g)

    def test_loop_mismatch_warning(self):
        d = StructuredDiagram(
            variables=(DiagramVariable("a", "A"), DiagramVariable("b", "B")),
            links=(DiagramLink("a", "b", POSITIVE), DiagramLink("b", "a", NEGATIVE)),
            loops=(DiagramLoop("R1", ("a", "b"), "reinforcing"),),
        )
        diagnostics = []
        g = from_structured(d, diagnostics=diagnostics)
        assert g.same_structure(
            CausalGraph.build(["a", "b"], [CausalLink("a", "b", POSITIVE), CausalLink("b", "a", NEGATIVE)])
        )
        assert [x.code for x in diagnostics] == ["loop_mismatch"]

    def test_dangling_reference(self):
        d = StructuredDiagram(
            variables=(DiagramVariable("a", "A"),),
            links=(DiagramLink("a", "z", POSITIVE),),
            loops=(),
        )
        with pytest.raises(DanglingReference):
            from_structured(d)

    def test_duplicate_link(self):
        d = StructuredDiagram(
            variables=(DiagramVariable("a", "A"), DiagramVariable("b", "B")),
            links=(DiagramLink("a", "b", POSITIVE), DiagramLink("a", "b", NEGATIVE)),
            loops=(),
        )
        with pytest.raises(DuplicateLink):
            from_structured(d)

    def test_json_round_trip(self, population_graph, population_loops):
        d = to_structured(population_graph, population_loops)
        assert StructuredDiagram.from_json(d.to_json()) == d
