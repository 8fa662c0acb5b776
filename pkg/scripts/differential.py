"""Differential run: explorer vs. exhaustive enumerator vs. operational
interpreter on random programs.  Prints the first disagreement, if any.

    python scripts/differential.py --count 500 --seed 1 --procs 3 --txns 2
"""

import argparse
import sys
import time

from txsmc import explore
from txsmc.dpor import ExploreConfig
from txsmc.gen import GenConfig, random_programs
from txsmc.oracle import enumerate_weak_traces
from txsmc.oracle.operational import enumerate_operational
from txsmc.prog import format_program


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--procs", type=int, default=3)
    ap.add_argument("--txns", type=int, default=2)
    ap.add_argument("--instrs", type=int, default=3)
    ap.add_argument("--vars", type=int, default=2)
    ap.add_argument("--no-operational", action="store_true")
    args = ap.parse_args(argv)

    cfg = GenConfig(max_procs=args.procs, max_txns=args.txns, max_instrs=args.instrs, n_vars=args.vars)
    t0 = time.perf_counter()
    traces = 0
    for i, prog in enumerate(random_programs(args.seed, args.count, cfg)):
        for model in ("ccv", "cc"):
            r = explore(prog, model, ExploreConfig(paranoid=True))
            expected = enumerate_weak_traces(prog, model)
            ops = expected if args.no_operational else enumerate_operational(prog, model)
            traces += len(r.traces)
            if r.traces != expected or ops != expected or r.duplicates:
                print(f"program {i} under {model}: explorer {len(r.traces)} (dup {r.duplicates}), "
                      f"enumerator {len(expected)}, operational {len(ops)}")
                print(format_program(prog))
                return 1
    print(f"{args.count} programs, {traces} traces, all agree ({time.perf_counter() - t0:.1f} s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
