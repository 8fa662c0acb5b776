"""Shared builders for the test suite."""

import random

from hypothesis import strategies as st

from txsmc.ccv import ReadContext, apply_read
from txsmc.gen import GenConfig, random_program
from txsmc.oracle.operational import Disabled, initial_configuration, step
from txsmc.trace import Tid, Trace

SMALL = GenConfig(max_procs=3, max_txns=2, max_instrs=3, n_vars=2)


def programs(cfg: GenConfig = SMALL):
    return st.integers(0, 2**32 - 1).map(lambda seed: random_program(random.Random(seed), cfg))


def readable_fixture():
    """Reader t7 with pending read of y; t2 and t4 already feed it."""
    tr = Trace(("x", "y", "z", "w"))
    layout = {"t1": (0, 0), "t2": (0, 1), "t3": (1, 0), "t4": (1, 1), "t5": (2, 0),
              "t6": (3, 0), "t7": (3, 1), "t8": (4, 0), "t9": (5, 0)}
    t = {k: Tid(*v) for k, v in layout.items()}
    for tid in t.values():
        tr.add_transaction(tid)
    tr.add_write(t["t1"], "w", 1)
    for k in ("t2", "t3", "t4", "t5", "t8", "t9"):
        tr.add_write(t[k], "y", int(k[1]))
    tr.add_write(t["t2"], "x", 2)
    tr.add_write(t["t9"], "x", 9)
    tr.add_write(t["t4"], "z", 4)
    tr.add_write(t["t6"], "w", 6)
    tr = apply_read(ReadContext(tr, t["t7"], "x"), t["t2"])
    tr = apply_read(ReadContext(tr, t["t7"], "z"), t["t4"])
    return ReadContext(tr, t["t7"], "y"), t


def cond_counterexample():
    """A pending read of x whose candidate s passes cond1..cond4 but would
    close the cycle b -co-> t4 -po-> a -co-> t5 -po-> b."""
    tr = Trace(("x", "y", "w", "u", "v"))
    t4, a, t5, b, s, t = Tid(0, 0), Tid(0, 1), Tid(1, 0), Tid(1, 1), Tid(2, 0), Tid(3, 0)
    for tid in (t4, a, t5, b, s, t):
        tr.add_transaction(tid)
    tr.add_write(t4, "y", 1)
    tr.add_write(a, "w", 1)
    tr.add_write(a, "u", 1)
    tr.add_write(t5, "w", 2)
    tr.add_write(b, "y", 2)
    tr.add_write(b, "v", 1)
    tr = apply_read(ReadContext(tr, s, "u"), a)
    tr = apply_read(ReadContext(tr, s, "v"), b)
    tr.add_write(s, "x", 1)
    tr = apply_read(ReadContext(tr, t, "y"), t4)
    tr = apply_read(ReadContext(tr, t, "w"), t5)
    return ReadContext(tr, t, "x"), s


def random_run(prog, model, rng: random.Random, max_steps: int = 500):
    """Drive the step interpreter with random enabled labels to the end."""
    from txsmc.oracle.operational import maximal_entries

    cfg = initial_configuration(prog, model)
    fresh = 0
    for _ in range(max_steps):
        labels = []
        for p, ls in enumerate(cfg.ls):
            if ls.tid is None:
                if ls.next_txn < len(prog.processes[p].transactions):
                    if model == "ccv":
                        fresh += 1
                        labels.append(("begin", p, fresh))
                    else:
                        choice = {}
                        for v in prog.shared_vars:
                            maxima = maximal_entries(ls.store.get(v, {}))
                            if maxima:
                                choice[v] = rng.choice(maxima)
                        labels.append(("begin", p, choice))
                for t in cfg.msgs:
                    if t not in ls.delivered:
                        labels.append(("del", p, t))
            else:
                labels.append(("exec", p))
                labels.append(("end", p))
        if not labels:
            return cfg
        rng.shuffle(labels)
        for lab in labels:
            try:
                cfg = step(cfg, lab)
                break
            except Disabled:
                continue
        else:
            return cfg
    raise AssertionError("run did not terminate")
