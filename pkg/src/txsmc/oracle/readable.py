"""Readable sets by brute force.

A writer is readable when inserting the rf edge (and, under CCv, saturating
coherence) leaves a consistent partial trace.  No pattern reasoning is used,
so this serves as a reference for `ccv.readable_set` and `cc.readable_set_cc`.
"""

from __future__ import annotations

import random

from ..cc import is_partially_good_cc
from ..ccv import ReadContext, fulfill
from ..models import Model
from ..trace import Tid, Trace, is_partially_good_ccv


def _with_read(tr: Trace, source: Tid, reader: Tid, var: str, model: Model) -> Trace:
    out = tr.copy()
    out.add_rf(source, reader, var)
    return fulfill(out) if model is Model.CCV else out


def readable_by_insertion(ctx: ReadContext, model: Model | str = Model.CCV) -> set[Tid]:
    model = Model(model)
    tr = ctx.trace
    good = is_partially_good_ccv if model is Model.CCV else is_partially_good_cc
    out = set()
    for s in tr.writers(ctx.var):
        if s == ctx.reader:
            continue
        if good(_with_read(tr, s, ctx.reader, ctx.var, model)):
            out.add(s)
    return out


def random_read_context(
    rng: random.Random,
    model: Model | str = Model.CCV,
    max_procs: int = 5,
    max_txns: int = 14,
    n_vars: int = 3,
) -> ReadContext:
    """A consistent partial trace grown one transaction at a time, with a
    pending read on its last transaction.  Read sources are drawn from the
    brute-force readable set, so the trace never depends on the code under
    test."""
    model = Model(model)
    while True:
        variables = tuple("xyzwuv"[: rng.randint(1, n_vars)])
        tr = Trace(variables)
        nproc = rng.randint(2, max_procs)
        pos = [0] * nproc
        t = None
        for _ in range(rng.randint(2, max_txns)):
            p = rng.randrange(nproc)
            t = Tid(p, pos[p])
            pos[p] += 1
            tr.add_transaction(t)
            touched = set()
            for _ in range(rng.randint(0, 3)):
                v = rng.choice(variables)
                if v in touched:
                    continue
                touched.add(v)
                if rng.random() < 0.5:
                    tr.add_write(t, v, 1)
                else:
                    cands = sorted(readable_by_insertion(ReadContext(tr, t, v), model))
                    if cands:
                        tr = _with_read(tr, rng.choice(cands), t, v, model)
        free = [v for v in variables if not tr.writes_var(t, v) and (tr.index[t], v) not in tr.rf]
        if free:
            return ReadContext(tr, t, rng.choice(free))
