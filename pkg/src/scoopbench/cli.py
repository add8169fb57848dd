"""Command-line front end: explore, compare, export.

Programs are given as file paths; bare names (with or without the .mini
extension) are resolved against the embedded benchmark corpus, which the
WORKBENCH_CORPUS_DIR environment variable can override.

Exit codes: 0 clean, 1 errors or discrepancies found, 2 invalid input,
3 bounds exhausted before completion.
"""

from __future__ import annotations

import json
import os
import sys
from importlib import resources
from pathlib import Path

import click

from scoopbench import explorer, lang, properties
from scoopbench.cfg import build_cfg, export_cfg_dot
from scoopbench.explorer import DEFAULT_MAX_STATES, explore, extract_trace
from scoopbench.runtime import dump_configuration_dot, initial_configuration
from scoopbench.scheduler import local_fixpoint

EXIT_CLEAN = 0
EXIT_ERRORS = 1
EXIT_INVALID = 2
EXIT_BOUNDS = 3

MODELS = ("rq", "qoq")


def resolve_program(spec: str) -> str:
    """Return program source text for a path or corpus name."""
    p = Path(spec)
    for candidate in (p, p.with_suffix(".mini") if p.suffix != ".mini" else p):
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    name = p.name if p.name.endswith(".mini") else p.name + ".mini"
    override = os.environ.get("WORKBENCH_CORPUS_DIR")
    if override:
        candidate = Path(override) / name
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    else:
        embedded = resources.files("scoopbench") / "corpus" / name
        if embedded.is_file():
            return embedded.read_text(encoding="utf-8")
    raise FileNotFoundError(f"no such program file or corpus entry: {spec}")


def corpus_names() -> list:
    override = os.environ.get("WORKBENCH_CORPUS_DIR")
    if override:
        entries = sorted(f.name for f in Path(override).glob("*.mini"))
    else:
        corpus = resources.files("scoopbench") / "corpus"
        entries = sorted(f.name for f in corpus.iterdir() if f.name.endswith(".mini"))
    return [e[: -len(".mini")] for e in entries]


def load_program(spec: str):
    source = resolve_program(spec)
    return build_cfg(lang.validate(lang.parse(source)))


def program_name(spec: str) -> str:
    name = Path(spec).name
    return name[: -len(".mini")] if name.endswith(".mini") else name


def build_report(name: str, result: explorer.ExplorationResult) -> dict:
    """The stable JSON report; field set is fixed, unknown fields forbidden."""
    errors = []
    for w in result.errors:
        trace = extract_trace(result, w)
        errors.append(
            {
                "kind": w.kind,
                "depth": w.depth,
                "trace": list(trace.actions),
                "evidence": w.summary(),
            }
        )
    return {
        "program": name,
        "model": result.model,
        "configurations": result.configurations,
        "transitions": result.transitions,
        "microsteps": result.microsteps,
        "duration_ms": int(result.duration_ms),
        "bound_exhausted": result.bound_exhausted,
        "errors": errors,
    }


def build_comparison(name: str, reports: dict) -> dict:
    present = {
        model: {e["kind"] for e in rep["errors"]} for model, rep in reports.items()
    }
    discrepancies = []
    for detector in properties.DETECTOR_NAMES + ("runtime-error",):
        kind = properties.KIND_OF_DETECTOR.get(detector, properties.RUNTIME_ERROR)
        present_in = sorted(m for m in reports if kind in present[m])
        if present_in and len(present_in) != len(reports):
            discrepancies.append({"detector": detector, "present_in": present_in})
    return {"program": name, "reports": reports, "discrepancies": discrepancies}


def _parse_detectors(text: str) -> tuple:
    names = tuple(d.strip() for d in text.split(",") if d.strip())
    for d in names:
        if d not in properties.DETECTOR_NAMES:
            raise click.BadParameter(
                f"unknown detector {d!r}; choose from {', '.join(properties.DETECTOR_NAMES)}"
            )
    return names


def _write_traces(result, report, trace_dir, name):
    out = Path(trace_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, entry in enumerate(report["errors"]):
        path = out / f"{name}_{report['model']}_{entry['kind'].lower()}_{i}.json"
        path.write_text(json.dumps(entry, indent=2) + "\n", encoding="utf-8")


@click.group()
def main():
    """Semantics workbench for a mini SCOOP-style concurrent language."""


@main.command("explore")
@click.argument("program")
@click.option("--model", type=click.Choice(MODELS), default="rq", show_default=True)
@click.option(
    "--detectors",
    default=",".join(properties.DEFAULT_DETECTORS),
    show_default=True,
    help="comma-separated detector names: " + ", ".join(properties.DETECTOR_NAMES),
)
@click.option("--max-states", type=int, default=DEFAULT_MAX_STATES, show_default=True)
@click.option("--max-depth", type=int, default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--json", "json_path", type=click.Path(), default=None, help="write the report as JSON")
@click.option("--trace-dir", type=click.Path(), default=None, help="write one trace file per error")
def cmd_explore(program, model, detectors, max_states, max_depth, workers, json_path, trace_dir):
    """Explore PROGRAM's state space under one execution model."""
    try:
        dets = _parse_detectors(detectors)
        m = load_program(program)
    except (FileNotFoundError, lang.ParseError, lang.ValidationError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INVALID)
    result = explore(m, model, max_states=max_states, max_depth=max_depth, detectors=dets, workers=workers)
    name = program_name(program)
    report = build_report(name, result)
    if json_path:
        Path(json_path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if trace_dir:
        _write_traces(result, report, trace_dir, name)
    click.echo(
        f"{name} [{model}]: {report['configurations']} configurations, "
        f"{report['transitions']} transitions, {len(report['errors'])} error(s), "
        f"{report['duration_ms']} ms"
        + (" (bounds exhausted)" if report["bound_exhausted"] else "")
    )
    for e in report["errors"]:
        click.echo(f"  {e['kind']} at depth {e['depth']}: {e['evidence']}")
    if not json_path:
        click.echo(json.dumps(report, indent=2))
    if report["errors"]:
        sys.exit(EXIT_ERRORS)
    if report["bound_exhausted"]:
        sys.exit(EXIT_BOUNDS)
    sys.exit(EXIT_CLEAN)


@main.command("compare")
@click.argument("program")
@click.option("--models", default="rq,qoq", show_default=True)
@click.option(
    "--detectors",
    default=",".join(properties.DEFAULT_DETECTORS),
    show_default=True,
)
@click.option("--max-states", type=int, default=DEFAULT_MAX_STATES, show_default=True)
@click.option("--max-depth", type=int, default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--json", "json_path", type=click.Path(), default=None)
def cmd_compare(program, models, detectors, max_states, max_depth, workers, json_path):
    """Explore PROGRAM under several models and report discrepancies."""
    model_list = tuple(m.strip() for m in models.split(",") if m.strip())
    try:
        for m in model_list:
            if m not in MODELS:
                raise click.BadParameter(f"unknown model {m!r}")
        dets = _parse_detectors(detectors)
        cfg_model = load_program(program)
    except (FileNotFoundError, lang.ParseError, lang.ValidationError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INVALID)
    name = program_name(program)
    reports = {}
    exhausted = False
    for m in model_list:
        result = explore(
            cfg_model, m, max_states=max_states, max_depth=max_depth, detectors=dets, workers=workers
        )
        reports[m] = build_report(name, result)
        exhausted = exhausted or result.bound_exhausted
    comparison = build_comparison(name, reports)
    if json_path:
        Path(json_path).write_text(json.dumps(comparison, indent=2) + "\n", encoding="utf-8")
    for m in model_list:
        rep = reports[m]
        kinds = sorted({e["kind"] for e in rep["errors"]})
        click.echo(
            f"{name} [{m}]: {rep['configurations']} configurations, "
            f"errors: {', '.join(kinds) if kinds else 'none'}"
        )
    if comparison["discrepancies"]:
        for d in comparison["discrepancies"]:
            click.echo(f"discrepancy: {d['detector']} only under {', '.join(d['present_in'])}")
    else:
        click.echo("no discrepancies between models")
    if not json_path:
        click.echo(json.dumps(comparison, indent=2))
    if comparison["discrepancies"]:
        sys.exit(EXIT_ERRORS)
    if exhausted:
        sys.exit(EXIT_BOUNDS)
    sys.exit(EXIT_CLEAN)


@main.command("export")
@click.argument("program")
@click.option("--what", type=click.Choice(("cfg", "state")), default="cfg", show_default=True)
@click.option("--model", type=click.Choice(MODELS), default="rq", show_default=True)
@click.option("--dot", "dot_path", type=click.Path(), default=None, help="output file (default stdout)")
def cmd_export(program, what, model, dot_path):
    """Export PROGRAM's control-flow graph or initial configuration as DOT."""
    try:
        m = load_program(program)
    except (FileNotFoundError, lang.ParseError, lang.ValidationError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INVALID)
    if what == "cfg":
        text = export_cfg_dot(m)
    else:
        text = dump_configuration_dot(local_fixpoint(initial_configuration(m, model)))
    if dot_path:
        Path(dot_path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    sys.exit(EXIT_CLEAN)


@main.command("corpus")
def cmd_corpus():
    """List the embedded benchmark corpus."""
    for name in corpus_names():
        click.echo(name)
    sys.exit(EXIT_CLEAN)


if __name__ == "__main__":
    main()
