import pytest

from sdatlas.graph import NEGATIVE, POSITIVE, UNKNOWN, CausalGraph, CausalLink, enumerate_loops
from sdatlas.narrative import (
    AdapterUnavailable,
    AddLink,
    AddVariable,
    DeterministicCopilot,
    EditConflict,
    NoEditsParsed,
    RemoveLink,
    RemoveVariable,
    RenameVariable,
    apply_edits,
    copilot_respond,
    describe,
    parse_controlled_nl,
)
from sdatlas.structured import to_structured


@pytest.fixture
def population_names(population_model):
    return {v.name: v.display_name for v in population_model.variables}


@pytest.fixture
def population_diagram(population_graph, population_loops, population_names):
    return to_structured(population_graph, population_loops, population_names)


class TestDescribe:
    def test_population_link_sentence(self, population_graph, population_loops, population_names):
        n = describe(population_graph, population_loops, population_names)
        assert "An increase in Population causes Births to increase." in n.links

    def test_empty_graph_overview(self):
        n = describe(CausalGraph.build([], []), [])
        assert n.overview == (
            "This model has 0 variables, 0 causal links, and 0 feedback loops "
            "(0 reinforcing, 0 balancing)."
        )

    def test_balancing_loop_sentence(self, population_graph, population_loops, population_names):
        n = describe(population_graph, population_loops, population_names)
        assert "B1 is a balancing loop through Deaths → Population → Deaths." in n.loops

    def test_deterministic(self, population_graph, population_loops):
        assert describe(population_graph, population_loops).text == describe(
            population_graph, population_loops
        ).text

    def test_unknown_polarity_sentence(self):
        g = CausalGraph.build(["a", "b"], [CausalLink("a", "b", UNKNOWN)])
        n = describe(g, [])
        assert n.links == ("A influences B (direction unclear).",)


class TestParseControlledNl:
    def test_increase_decrease(self):
        parsed = parse_controlled_nl("Population increases Births. Deaths decreases Population.")
        assert parsed.edits == [
            AddLink("population", "births", POSITIVE),
            AddLink("deaths", "population", NEGATIVE),
        ]
        assert parsed.unparsed == []

    def test_no_match_raises(self):
        with pytest.raises(NoEditsParsed):
            parse_controlled_nl("Hello there.")

    def test_other_forms(self):
        parsed = parse_controlled_nl(
            "Add variable Inventory. Remove variable Old Stock. "
            "Rename Inventory to Warehouse Stock. Remove the link from a to b. "
            "Price influences Demand."
        )
        assert parsed.edits == [
            AddVariable("inventory"),
            RemoveVariable("old_stock"),
            RenameVariable("inventory", "warehouse_stock"),
            RemoveLink("a", "b"),
            AddLink("price", "demand", UNKNOWN),
        ]

    def test_unparsed_reported(self):
        parsed = parse_controlled_nl("a increases b. gibberish sentence here!")
        assert len(parsed.edits) == 1
        assert parsed.unparsed == ["gibberish sentence here"]

    def test_describe_reparse_round_trip(self, population_graph, population_loops):
        n = describe(population_graph, population_loops)
        parsed = parse_controlled_nl(n.links_section)
        rebuilt = apply_edits(CausalGraph.build([], []), parsed.edits)
        assert {(l.source, l.target, l.polarity) for l in rebuilt.links} == {
            (l.source, l.target, l.polarity) for l in population_graph.links
        }


class TestApplyEdits:
    def test_build_from_empty(self):
        g = apply_edits(
            CausalGraph.build([], []),
            [AddLink("population", "births", POSITIVE), AddLink("deaths", "population", NEGATIVE)],
        )
        assert g.nodes == ("births", "deaths", "population")
        assert len(g.links) == 2

    def test_remove_variable_cascades(self):
        g = CausalGraph.build(["a", "b"], [CausalLink("a", "b", POSITIVE)])
        g2 = apply_edits(g, [RemoveVariable("a")])
        assert g2.nodes == ("b",)
        assert g2.links == ()

    def test_conflict_aborts(self):
        g = CausalGraph.build(["a", "b"], [CausalLink("a", "b", POSITIVE)])
        with pytest.raises(EditConflict):
            apply_edits(g, [RemoveLink("b", "a")])
        assert g.link("a", "b") is not None  # original untouched

    def test_rename(self):
        g = CausalGraph.build(["a", "b"], [CausalLink("a", "b", POSITIVE)])
        g2 = apply_edits(g, [RenameVariable("a", "alpha")])
        assert g2.nodes == ("alpha", "b")
        assert g2.link("alpha", "b").polarity == POSITIVE

    def test_rename_missing_conflicts(self):
        g = CausalGraph.build(["a"], [])
        with pytest.raises(EditConflict):
            apply_edits(g, [RenameVariable("z", "y")])


class TestCopilot:
    def test_loop_count(self, population_diagram):
        reply = copilot_respond("How many feedback loops are there?", population_diagram)
        assert "2" in reply.text
        assert "1 reinforcing" in reply.text
        assert "1 balancing" in reply.text
        assert reply.intent == "loop_count"
        assert set(reply.facts_used) == {"R1", "B1"}

    def test_downstream_effects(self, population_diagram):
        reply = copilot_respond("What happens if Population increases?", population_diagram)
        assert "Births increases" in reply.text
        assert "Deaths increases" in reply.text
        assert reply.intent == "downstream_effects"

    def test_fallback(self, population_diagram):
        reply = copilot_respond("Tell me a joke", population_diagram)
        assert reply.intent == "fallback"
        assert "5 variables" in reply.text

    def test_list_variables(self, population_diagram):
        reply = copilot_respond("Please list variables", population_diagram)
        assert reply.intent == "list_variables"
        assert "Population" in reply.text

    def test_explain_loop(self, population_diagram):
        reply = copilot_respond("Can you explain B1?", population_diagram)
        assert reply.intent == "explain_loop"
        assert "balancing" in reply.text

    def test_facts_resolve_against_diagram(self, population_diagram):
        known = {v.name for v in population_diagram.variables} | {
            lp.id for lp in population_diagram.loops
        } | {f"{l.source}->{l.target}" for l in population_diagram.links}
        for q in (
            "How many loops?",
            "list variables",
            "explain R1",
            "what happens if population increases?",
            "nonsense",
        ):
            reply = copilot_respond(q, population_diagram)
            assert all(fact in known for fact in reply.facts_used), q

    def test_broken_adapter_surfaces_structured_error(self, population_diagram):
        class Broken:
            def respond(self, question, diagram):
                raise RuntimeError("boom")

        with pytest.raises(AdapterUnavailable):
            copilot_respond("anything", population_diagram, Broken())
