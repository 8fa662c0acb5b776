"""Command line front end.

    txsmc check prog.tpl --model ccv [--oracle] [--emit dot|json --out DIR]
    txsmc corpus benchmarks --expect benchmarks/expected.txt
    txsmc validate trace.json [--model cc]

Exit codes: 0 safe (or all expectations met), 1 unsafe (or a mismatch),
2 usage, parse or oracle errors, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .cc import is_cc_consistent
from .ccv import is_ccv_consistent
from .dpor import BudgetExceeded, ExplorationReport, ExploreConfig, explore
from .models import Model
from .oracle import GuardExceeded, enumerate_weak_traces
from .prog import DEFAULT_UNROLL, ParseError, parse_file
from .trace import WeakTrace, to_dot

EXIT_SAFE, EXIT_UNSAFE, EXIT_ERROR, EXIT_BUDGET = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    model: Model = Model.CCV
    unroll: int = DEFAULT_UNROLL
    max_traces: int | None = None
    max_nodes: int | None = None
    stop_at_first: bool = False
    oracle: bool = False
    emit: str | None = None  # "dot" | "json"

    def __post_init__(self):
        if self.unroll < 1:
            raise ValueError("unroll bound must be positive")
        for name in ("max_traces", "max_nodes"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be positive")
        if self.emit not in (None, "dot", "json"):
            raise ValueError(f"unknown emit format {self.emit!r}")

    def explore_config(self) -> ExploreConfig:
        return ExploreConfig(max_nodes=self.max_nodes, max_traces=self.max_traces, stop_at_first=self.stop_at_first)


class CliError(Exception):
    pass


def report_json(report: ExplorationReport) -> dict:
    """The machine-readable report.  Everything except ``stats.millis`` is
    a function of the program and configuration."""
    variables = report.program.shared_vars
    violations = []
    for v in report.violations:
        violations.append(
            {
                "assert_site": v.assert_site,
                "observation_sequence": [e.show(variables) for e in v.sequence],
                "rf_edges": [[v.trace.name(s), v.trace.name(d), x] for s, d, x in v.trace.rf],
            }
        )
    return {
        "program": report.program.name,
        "model": str(report.model),
        "verdict": report.verdict,
        "traces": len(report.traces),
        "duplicates": report.duplicates,
        "violations": violations,
        "stats": {"nodes": report.stats.nodes, "millis": round(report.stats.millis, 3)},
    }


def emit_traces(traces, fmt: str, out: Path) -> list[Path]:
    """One file per weak trace, named by its digest."""
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(f"cannot create output directory {out}: {e}") from e
    paths = []
    for wt in sorted(traces):
        path = out / f"{wt.digest()}.{fmt}"
        text = wt.to_json() + "\n" if fmt == "json" else to_dot(wt)
        try:
            path.write_text(text)
        except OSError as e:
            raise CliError(f"cannot write {path}: {e}") from e
        paths.append(path)
    return paths


def run(path: Path, cfg: RunConfig) -> tuple[ExplorationReport, dict]:
    prog = parse_file(path, cfg.unroll)
    report = explore(prog, cfg.model, cfg.explore_config())
    doc = report_json(report)
    if cfg.oracle:
        expected = enumerate_weak_traces(prog, cfg.model)
        agree = expected == report.traces
        doc["oracle"] = {
            "agree": agree,
            "traces": len(expected),
            "missing": len(expected - report.traces),
            "extra": len(report.traces - expected),
        }
    return report, doc


def _cmd_check(args) -> int:
    cfg = RunConfig(
        model=Model(args.model),
        unroll=args.unroll,
        max_traces=args.max_traces,
        max_nodes=args.max_nodes,
        stop_at_first=args.first,
        oracle=args.oracle,
        emit=args.emit,
    )
    report, doc = run(Path(args.file), cfg)
    if cfg.emit:
        if args.out is None:
            raise CliError("--emit needs --out DIR")
        emit_traces(report.traces, cfg.emit, Path(args.out))
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text + "\n")
    if args.json:
        print(text)
    else:
        print(f"{doc['program']}: {doc['verdict']} under {doc['model']}  "
              f"traces={doc['traces']} nodes={doc['stats']['nodes']} ms={doc['stats']['millis']:.1f}")
        for v in doc["violations"]:
            print(f"  assertion failed at {v['assert_site']}")
            print("    " + " ".join(v["observation_sequence"]))
        if "oracle" in doc:
            o = doc["oracle"]
            print(f"  oracle: {'agree' if o['agree'] else 'DISAGREE'} ({o['traces']} traces, "
                  f"{o['missing']} missing, {o['extra']} extra)")
    if "oracle" in doc and not doc["oracle"]["agree"]:
        return EXIT_ERROR
    return EXIT_UNSAFE if report.violations else EXIT_SAFE


def read_expectations(path: Path) -> list[tuple[str, str, str]]:
    rows = []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or any(p not in ("SAFE", "UNSAFE") for p in parts[1:]):
            raise CliError(f"{path}:{n}: expected 'name CCV_VERDICT CC_VERDICT'")
        rows.append((parts[0], parts[1], parts[2]))
    return rows


def _corpus_job(job: tuple[str, str, int]) -> tuple[str, str, float]:
    path, model, unroll = job
    t0 = time.perf_counter()
    report = explore(parse_file(path, unroll), model)
    return path, report.verdict, (time.perf_counter() - t0) * 1000


def run_corpus(directory: Path, expectations: Path, unroll: int = DEFAULT_UNROLL, jobs: int = 1):
    """Rows of (name, expected pair, observed pair, millis) for each program."""
    rows = read_expectations(expectations)
    files = {}
    for name, _, _ in rows:
        p = directory / name if name.endswith(".tpl") else directory / f"{name}.tpl"
        if not p.is_file():
            raise CliError(f"missing program listed in {expectations}: {p}")
        files[name] = p
    work = [(str(files[n]), m, unroll) for n, _, _ in rows for m in ("ccv", "cc")]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_corpus_job, work))
    else:
        results = [_corpus_job(w) for w in work]
    got = {(path, i % 2): (verdict, ms) for i, (path, verdict, ms) in enumerate(results)}
    out = []
    for name, ccv_exp, cc_exp in rows:
        a, ta = got[(str(files[name]), 0)]
        b, tb = got[(str(files[name]), 1)]
        out.append((name, (ccv_exp, cc_exp), (a, b), ta + tb))
    return out


def _cmd_corpus(args) -> int:
    t0 = time.perf_counter()
    rows = run_corpus(Path(args.dir), Path(args.expect), args.unroll, args.jobs)
    failed = 0
    width = max((len(r[0]) for r in rows), default=4)
    for name, exp, obs, ms in rows:
        ok = exp == obs
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  ccv={obs[0]:<6} cc={obs[1]:<6}"
              f"  expected ccv={exp[0]:<6} cc={exp[1]:<6} {ms:8.1f} ms")
    total = (time.perf_counter() - t0) * 1000
    print(f"{len(rows) - failed}/{len(rows)} programs match, {total:.0f} ms total")
    return EXIT_UNSAFE if failed else EXIT_SAFE


def _cmd_validate(args) -> int:
    path = Path(args.trace)
    try:
        wt = WeakTrace.from_json(path.read_text())
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise CliError(f"{path}: not a valid trace: {e}") from e
    tr = wt.to_trace()
    models = [Model(args.model)] if args.model else [Model.CCV, Model.CC]
    status = EXIT_SAFE
    for m in models:
        ok = is_ccv_consistent(tr) if m is Model.CCV else is_cc_consistent(tr)
        print(f"{path.name}: {'consistent' if ok else 'inconsistent'} under {m} (digest {wt.digest()})")
        if not ok:
            status = EXIT_UNSAFE
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="txsmc", description="Model checking of transactional programs under causal consistency.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", help="explore one program")
    c.add_argument("file")
    c.add_argument("--model", choices=[m.value for m in Model], default="ccv")
    c.add_argument("--unroll", type=int, default=DEFAULT_UNROLL)
    c.add_argument("--oracle", action="store_true", help="compare against the exhaustive enumerator")
    c.add_argument("--emit", choices=["dot", "json"])
    c.add_argument("--out", help="directory for emitted traces")
    c.add_argument("--max-traces", type=int)
    c.add_argument("--max-nodes", type=int)
    c.add_argument("--first", action="store_true", help="stop at the first violation")
    c.add_argument("--json", action="store_true", help="print the JSON report")
    c.add_argument("--report", help="also write the JSON report here")
    c.set_defaults(func=_cmd_check)

    k = sub.add_parser("corpus", help="check a directory against an expectations file")
    k.add_argument("dir")
    k.add_argument("--expect", required=True)
    k.add_argument("--unroll", type=int, default=DEFAULT_UNROLL)
    k.add_argument("--jobs", type=int, default=1)
    k.set_defaults(func=_cmd_corpus)

    v = sub.add_parser("validate", help="check a JSON weak trace for consistency")
    v.add_argument("trace")
    v.add_argument("--model", choices=[m.value for m in Model])
    v.set_defaults(func=_cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (ParseError, GuardExceeded, CliError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
