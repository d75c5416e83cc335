import json
import shutil

import pytest
from click.testing import CliRunner

from sdatlas.catalog import Catalog, SearchQuery
from sdatlas.cli import main
from sdatlas.structured import StructuredDiagram


@pytest.fixture
def runner():
    return CliRunner()


class TestIngest:
    def test_golden_corpus(self, runner, golden_dir, tmp_path):
        out = tmp_path / "snap"
        result = runner.invoke(main, ["ingest", str(golden_dir), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "indexed 13 of 13 files" in result.output
        catalog = Catalog.load_snapshot(out)
        assert len(catalog) == 13

    def test_sidecar_metadata_applied(self, runner, golden_dir, tmp_path):
        out = tmp_path / "snap"
        runner.invoke(main, ["ingest", str(golden_dir), "--out", str(out)])
        catalog = Catalog.load_snapshot(out)
        results = catalog.search(SearchQuery(text="malaria transmission"))
        top = catalog.get(results[0].id)
        assert top.title == "Malaria transmission dynamics"
        assert top.year == 2022
        assert any(l.goal == 3 for l in top.sdg_labels)

    def test_report_lines(self, runner, golden_dir, tmp_path):
        result = runner.invoke(main, ["ingest", str(golden_dir), "--out", str(tmp_path / "s")])
        pop_lines = [l for l in result.output.splitlines() if "population.xmile" in l]
        assert len(pop_lines) == 1
        path, status, stats = pop_lines[0].split("\t")
        assert status == "ok"
        assert stats == "vars=5 links=6 loops=2 errors=0 warnings=0"

    def test_corrupt_files_skipped_not_fatal(self, runner, golden_dir, tmp_path):
        src = tmp_path / "models"
        src.mkdir()
        shutil.copy(golden_dir / "population.xmile", src / "population.xmile")
        (src / "broken.xmile").write_text("<xmile><unclosed")
        out = tmp_path / "snap"
        result = runner.invoke(main, ["ingest", str(src), "--out", str(out)])
        assert result.exit_code == 0
        assert "skipped: malformed_xml" in result.output
        assert len(Catalog.load_snapshot(out)) == 1

    def test_nothing_indexable_exits_2(self, runner, tmp_path):
        src = tmp_path / "models"
        src.mkdir()
        (src / "a.xmile").write_text("not xml at all <")
        (src / "b.xml").write_text('<xmile version="1.0" xmlns="urn:wrong"><model/></xmile>')
        result = runner.invoke(main, ["ingest", str(src), "--out", str(tmp_path / "snap")])
        assert result.exit_code == 2
        assert "indexed 0 of 2 files" in result.output

    def test_missing_directory_fails(self, runner, tmp_path):
        result = runner.invoke(main, ["ingest", str(tmp_path / "missing"), "--out", str(tmp_path / "s")])
        assert result.exit_code != 0

    def test_deterministic_across_runs(self, runner, golden_dir, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        runner.invoke(main, ["ingest", str(golden_dir), "--out", str(a)])
        runner.invoke(main, ["ingest", str(golden_dir), "--out", str(b)])
        for name in ("manifest.json", "documents.jsonl", "docids.txt", "vectors.bin"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name


class TestAnalyze:
    def test_clean_model(self, runner, golden_dir):
        result = runner.invoke(main, ["analyze", str(golden_dir / "population.xmile")])
        assert result.exit_code == 0
        assert "error:" not in result.output

    def test_loops_table(self, runner, golden_dir):
        result = runner.invoke(
            main, ["analyze", str(golden_dir / "population.xmile"), "--loops"]
        )
        assert result.exit_code == 0
        lines = result.output.splitlines()
        assert "id\ttype\tcycle" in lines
        assert "R1\treinforcing\tbirths -> population" in lines
        assert "B1\tbalancing\tdeaths -> population" in lines

    def test_narrative(self, runner, golden_dir):
        result = runner.invoke(
            main, ["analyze", str(golden_dir / "population.xmile"), "--narrative"]
        )
        assert "Overview" in result.output
        assert "An increase in Population causes Births to increase." in result.output

    def test_structured_json_round_trips(self, runner, golden_dir):
        result = runner.invoke(
            main, ["analyze", str(golden_dir / "population.xmile"), "--structured"]
        )
        payload = result.output[result.output.index("{"):]
        diagram = StructuredDiagram.from_json(payload)
        assert len(diagram.variables) == 5
        assert len(diagram.links) == 6
        assert [lp.id for lp in diagram.loops] == ["R1", "B1"]

    def test_error_diagnostics_exit_3(self, runner, tmp_path):
        bad = tmp_path / "dup.xmile"
        bad.write_text(
            '<xmile version="1.0" xmlns="http://docs.oasis-open.org/xmile/ns/XMILE/v1.0">'
            "<model><variables>"
            '<aux name="Rate"><eqn>1</eqn></aux><aux name="rate"><eqn>2</eqn></aux>'
            "</variables></model></xmile>"
        )
        result = runner.invoke(main, ["analyze", str(bad)])
        assert result.exit_code == 3
        assert "error: duplicate_name" in result.output

    def test_unparseable_file_exit_1(self, runner, tmp_path):
        bad = tmp_path / "junk.xmile"
        bad.write_text("garbage")
        result = runner.invoke(main, ["analyze", str(bad)])
        assert result.exit_code == 1

    def test_warnings_do_not_fail(self, runner, tmp_path):
        warn = tmp_path / "warn.xmile"
        warn.write_text(
            '<xmile version="1.0" xmlns="http://docs.oasis-open.org/xmile/ns/XMILE/v1.0">'
            "<model><variables>"
            '<flow name="orphan"><eqn>1</eqn></flow>'
            "</variables></model></xmile>"
        )
        result = runner.invoke(main, ["analyze", str(warn)])
        assert result.exit_code == 0
        assert "warning: orphan_flow" in result.output
