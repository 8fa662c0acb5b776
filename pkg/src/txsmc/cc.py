"""Weak causal consistency (CC) on partial traces.

CC traces never carry coherence edges.  A read of x by t from t' is allowed
when no x-writer sits strictly between t' and t in [po u rf]+ (cond1), and
when t' does not bring a newer version of some y into t's past while t
already read an older y (cond2).  Unlike CCv these two checks are exact:
without co there is nothing that can chain two new constraints together.
"""

from __future__ import annotations

from .ccv import ContractError, ReadContext, _check_reader
from .trace import Tid, Trace, bits, transpose

CcTrace = Trace


def _frame(ctx: ReadContext):
    tr = ctx.trace
    if ctx.reader not in tr:
        raise ContractError(f"reader {ctx.reader} not in trace")
    t = tr.index[ctx.reader]
    porf = tr.porf_reach()
    pred = transpose(porf)
    rf_in = {v: s for (d, v), s in tr.rf.items() if d == t}
    if ctx.var in rf_in:
        raise ContractError(f"{ctx.reader} already reads {ctx.var} externally")
    return tr, t, porf, pred, rf_in


def readable_set_cc(ctx: ReadContext) -> set[Tid]:
    _check_reader(ctx)
    tr, t, porf, pred, rf_in = _frame(ctx)
    wx = tr.writer_mask(ctx.var) & ~(1 << t)
    wmask = {v: tr.writer_mask(v) for v in rf_in}
    out = set()
    for s in bits(wx):
        if porf[s] & wx & pred[t]:
            continue  # cond1
        upto_s = pred[s] | (1 << s)
        if any(porf[t4] & wmask[y] & upto_s for y, t4 in rf_in.items()):
            continue  # cond2
        out.add(tr.ids[s])
    return out


def visible_set_cc(ctx: ReadContext) -> set[Tid]:
    tr = ctx.trace
    r = tr.index[ctx.reader]
    porf = tr.porf_reach()
    return {w for w in readable_set_cc(ctx) if porf[tr.index[w]] >> r & 1}


def apply_read_cc(ctx: ReadContext, source: Tid, check: bool = True) -> Trace:
    if check and source not in readable_set_cc(ctx):
        raise ContractError(f"{source} is not readable for {ctx.reader} on {ctx.var}")
    out = ctx.trace.copy()
    out.add_rf(source, ctx.reader, ctx.var)
    return out


def is_partially_good_cc(tr: Trace) -> bool:
    """(i) every x-writer reaching a reader is concurrent with, or before,
    the reader's source; (ii) [po u rf]+ is acyclic."""
    porf = tr.porf_reach()
    if any(r >> i & 1 for i, r in enumerate(porf)):
        return False
    for (d, v), s in tr.rf.items():
        for a in bits(tr.writer_mask(v)):
            if a != s and porf[a] >> d & 1 and porf[s] >> a & 1:
                return False
    return True


def is_fulfilled_cc(tr: Trace) -> bool:
    """Same shape as (i) of `is_partially_good_cc`, without the cycle test."""
    porf = tr.porf_reach()
    for (d, v), s in tr.rf.items():
        for a in bits(tr.writer_mask(v)):
            if a == s or not porf[a] >> d & 1:
                continue
            concurrent = not porf[a] >> s & 1 and not porf[s] >> a & 1
            if not (concurrent or porf[a] >> s & 1):
                return False
    return True


def is_cc_consistent(tr: Trace) -> bool:
    return is_partially_good_cc(tr)
