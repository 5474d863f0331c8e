"""Command-line entry point: run, validate, sweep, audit-defaults.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from weavesim.orchestrator.emit import IoError, emit, output_dir, sweep_csv, write_text
from weavesim.orchestrator.experiments import RunError, UnknownParameter, run, sweep
from weavesim.orchestrator.scenario import ScenarioError, format_default, iter_defaults, load_scenario

OK, CONFIG_ERROR, RUNTIME_ERROR = 0, 2, 3

REFERENCE_DOC = Path(__file__).resolve().parents[3] / "docs" / "scenario_reference.md"


def render_reference() -> str:
    """Markdown defaults table, one row per scenario key."""
    lines = [
        "| key | default | unit | source | meaning |",
        "|---|---|---|---|---|",
    ]
    for path, default, unit, source, doc in iter_defaults():
        lines.append(f"| `{path}` | `{format_default(default)}` | {unit} | {source} | {doc} |")
    return "\n".join(lines) + "\n"


def audit_reference(text: str) -> list[str]:
    """Differences between a documented defaults table and the parser's defaults."""
    documented = {}
    for line in text.splitlines():
        cells = [c.strip() for c in line.strip().strip("|").split("|")]
        if len(cells) >= 4 and cells[0].startswith("`") and cells[0].endswith("`"):
            documented[cells[0].strip("`")] = (cells[1].strip("`"), cells[3])
    problems = []
    actual = {path: (format_default(d), src) for path, d, _, src, _ in iter_defaults()}
    for path, (default, src) in actual.items():
        if path not in documented:
            problems.append(f"{path}: not documented")
            continue
        doc_default, doc_src = documented[path]
        if doc_default != default:
            problems.append(f"{path}: documented default {doc_default} but parser uses {default}")
        if doc_src != src:
            problems.append(f"{path}: documented source {doc_src} but parser tags {src}")
    problems += [f"{path}: documented but unknown to the parser" for path in documented if path not in actual]
    return problems


def _parse_values(text: str) -> list[float]:
    out = []
    for v in text.split(","):
        v = v.strip()
        if not v:
            continue
        try:
            out.append(int(v) if v.lstrip("+-").isdigit() else float(v))
        except ValueError:
            raise ScenarioError("--values", f"not a number: {v!r}") from None
    return out


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    seeds = [args.seed] if args.seed is not None else sc.seeds
    reports = [run(sc, s) for s in seeds]
    path = emit(reports, args.format, output_dir(args.out))
    for rep in reports:
        print(f"{rep.run_id} {rep.experiment} seed={rep.seed} records={len(rep.records)} trace={rep.trace_hash[:16]}")
    print(f"wrote {path}")
    return OK


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    print(f"ok {args.scenario} kind={sc.kind} seeds={sc.seeds} hash={sc.hash[:12]}")
    return OK


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    points = sweep(sc, args.param, _parse_values(args.values))
    path = write_text(output_dir(args.out) / "sweep.csv", sweep_csv(points))
    print(f"{len(points)} runs, wrote {path}")
    return OK


def cmd_audit(args) -> int:
    doc = Path(args.doc)
    try:
        text = doc.read_text(encoding="utf-8")
    except OSError as e:
        print(f"cannot read {doc}: {e.strerror}", file=sys.stderr)
        return RUNTIME_ERROR
    problems = audit_reference(text)
    for p in problems:
        print(p)
    n = sum(1 for _ in iter_defaults())
    print(f"{n} defaults checked, {len(problems)} mismatches")
    return OK if not problems else RUNTIME_ERROR


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weavesim", description="Tile-facility simulator experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write its metrics")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default $WEAVESIM_OUT or ./out)")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="parse and check a scenario")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="run one numeric parameter over several values")
    p.add_argument("--scenario", required=True)
    p.add_argument("--param", required=True, help="section.key, e.g. sync.ts_jitter_ns")
    p.add_argument("--values", required=True, help="comma-separated numbers")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("audit-defaults", help="compare the reference page with the parser defaults")
    p.add_argument("--doc", default=str(REFERENCE_DOC))
    p.add_argument("--print", action="store_true", help="print the table the page should contain")
    p.set_defaults(func=cmd_audit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "audit-defaults" and args.print:
        sys.stdout.write(render_reference())
        return OK
    try:
        return args.func(args)
    except (ScenarioError, UnknownParameter) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return CONFIG_ERROR
    except FileNotFoundError as e:
        print(f"configuration error: {e.filename}: no such file", file=sys.stderr)
        return CONFIG_ERROR
    except (RunError, IoError) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
