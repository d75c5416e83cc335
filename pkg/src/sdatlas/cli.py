"""Ingestion pipeline and operator commands.

`ingest` turns a directory of XMILE files (plus optional <name>.meta.json
sidecars) into a catalog snapshot; `analyze` inspects a single file;
`serve` runs the HTTP API over a snapshot.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import click

from .catalog import Catalog, CatalogDocument, CorruptSnapshot, SdgLabel, VersionMismatch, classify_sdg
from .graph import LoopBudgetExceeded, derive_causal_graph, enumerate_loops
from .narrative import describe
from .structured import assign_loop_ids, to_structured
from .xmile import EmptyModel, MalformedXml, UnsupportedFormat, parse_xmile, validate_model

MODEL_EXTENSIONS = (".xmile", ".stmx", ".xml")

log = logging.getLogger("sdatlas")


@click.group()
def main():
    """System-dynamics model repository tooling."""


def _doc_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def _read_sidecar(path: Path) -> dict:
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    alt = path.with_name(path.stem + ".meta.json")
    for candidate in (alt, sidecar):
        if candidate.is_file():
            return json.loads(candidate.read_text(encoding="utf-8"))
    return {}


def _build_document(path: Path, data: bytes) -> tuple[CatalogDocument, str]:
    """Parse + analyze one model file; returns (document, report line)."""
    model = parse_xmile(data)
    diagnostics = validate_model(model)
    errors = [d for d in diagnostics if d.severity == "error"]
    warnings = [d for d in diagnostics if d.severity == "warning"]

    diagram = None
    loop_count = 0
    if not errors:
        graph = derive_causal_graph(model)
        loops = enumerate_loops(graph)
        diagram = to_structured(
            graph,
            loops,
            display_names={v.name: v.display_name for v in model.variables},
            kinds={v.name: v.kind for v in model.variables},
        )
        loop_count = len(loops)

    meta = _read_sidecar(path)
    title = meta.get("title") or model.name or path.stem
    abstract = meta.get("abstract", "")
    if "sdg" in meta:
        sdg_labels = tuple(
            SdgLabel(goal=g) if isinstance(g, int) else SdgLabel(**g) for g in meta["sdg"]
        )
    else:
        sdg_labels = tuple(classify_sdg(f"{title} {abstract}"))

    doc = CatalogDocument(
        id=_doc_id(data),
        title=title,
        abstract=abstract,
        authors=tuple(meta.get("authors", [])),
        year=meta.get("year"),
        doi=meta.get("doi"),
        model=model,
        diagram=diagram,
        sdg_labels=sdg_labels,
        topics=tuple(meta.get("topics", [])),
        has_cld=diagram is not None,
        has_sfd=bool(model.stocks()),
        loop_count=loop_count,
    )
    status = "ok" if not errors else "ok_with_errors"
    line = (
        f"{path}\t{status}\tvars={len(model.variables)} links="
        f"{len(diagram.links) if diagram else 0} loops={loop_count} "
        f"errors={len(errors)} warnings={len(warnings)}"
    )
    return doc, line


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", "out", required=True, type=click.Path(path_type=Path), help="Snapshot output directory.")
def ingest(directory: Path, out: Path):
    """Convert a directory of XMILE files into a catalog snapshot."""
    catalog = Catalog()
    indexed = 0
    report: list[str] = []
    files = sorted(p for p in directory.rglob("*") if p.suffix.lower() in MODEL_EXTENSIONS)
    for path in files:
        try:
            data = path.read_bytes()
        except OSError as e:
            click.echo(f"fatal: cannot read {path}: {e}", err=True)
            sys.exit(1)
        try:
            doc, line = _build_document(path, data)
        except MalformedXml:
            report.append(f"{path}\tskipped: malformed_xml\t-")
            continue
        except UnsupportedFormat:
            report.append(f"{path}\tskipped: unsupported_format\t-")
            continue
        except EmptyModel:
            report.append(f"{path}\tskipped: empty_model\t-")
            continue
        except LoopBudgetExceeded:
            report.append(f"{path}\tskipped: loop_budget_exceeded\t-")
            continue
        catalog.index_document(doc)
        indexed += 1
        report.append(line)
    try:
        catalog.save_snapshot(out)
    except OSError as e:
        click.echo(f"fatal: cannot write snapshot {out}: {e}", err=True)
        sys.exit(1)
    for line in report:
        click.echo(line)
    click.echo(f"indexed {indexed} of {len(files)} files into {out}")
    sys.exit(0 if indexed >= 1 else 2)


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--loops", "show_loops", is_flag=True, help="Print the feedback-loop table.")
@click.option("--narrative", "show_narrative", is_flag=True, help="Print the narrative text.")
@click.option("--structured", "show_structured", is_flag=True, help="Print the structured diagram JSON.")
def analyze(file: Path, show_loops: bool, show_narrative: bool, show_structured: bool):
    """Validate one model file and optionally print its analysis."""
    try:
        data = file.read_bytes()
        model = parse_xmile(data)
    except OSError as e:
        click.echo(f"error: cannot read {file}: {e}", err=True)
        sys.exit(1)
    except (MalformedXml, UnsupportedFormat, EmptyModel) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)

    diagnostics = validate_model(model)
    for d in diagnostics:
        loc = f" [{d.location}]" if d.location else ""
        click.echo(f"{d.severity}: {d.code}{loc}: {d.message}")
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        sys.exit(3)

    if show_loops or show_narrative or show_structured:
        graph = derive_causal_graph(model)
        loops = enumerate_loops(graph)
        names = {v.name: v.display_name for v in model.variables}
        kinds = {v.name: v.kind for v in model.variables}
        if show_loops:
            click.echo("id\ttype\tcycle")
            for loop_id, lp in assign_loop_ids(loops):
                click.echo(f"{loop_id}\t{lp.loop_type}\t{' -> '.join(lp.cycle)}")
        if show_narrative:
            click.echo(describe(graph, loops, names).text)
        if show_structured:
            click.echo(to_structured(graph, loops, names, kinds).to_json())
    sys.exit(0)


@main.command()
@click.option("--snapshot", required=True, type=click.Path(path_type=Path), help="Snapshot directory to serve.")
@click.option("--port", default=None, type=int, help="Listen port (default $SDATLAS_PORT or 8080).")
@click.option("--host", default="127.0.0.1", help="Bind address.")
def serve(snapshot: Path, port: int | None, host: str):
    """Run the HTTP API over a snapshot until interrupted."""
    import os

    import uvicorn

    from .service import HttpCopilotAdapter, create_app

    if port is None:
        port = int(os.environ.get("SDATLAS_PORT", "8080"))
    try:
        catalog = Catalog.load_snapshot(snapshot)
    except (CorruptSnapshot, VersionMismatch, OSError) as e:
        click.echo(f"error: cannot load snapshot {snapshot}: {e}", err=True)
        sys.exit(1)

    copilot_url = os.environ.get("SDATLAS_COPILOT_URL")
    adapter = HttpCopilotAdapter(copilot_url) if copilot_url else None
    app = create_app(catalog, adapter=adapter, cors_origin=os.environ.get("SDATLAS_CORS_ORIGIN"))

    logging.basicConfig(level=logging.INFO, format="%(message)s")

    @app.middleware("http")
    async def _access_log(request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        log.info("%s %s %d %.1fms", request.method, request.url.path, response.status_code, elapsed_ms)
        return response

    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except SystemExit:
        raise
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
