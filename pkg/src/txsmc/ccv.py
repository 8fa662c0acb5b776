"""Causal convergence (CCv) on partial traces.

A read of x by the open transaction t may take its value from a writer t'
exactly when adding ``t' -rf-> t`` together with the coherence edges that
the new edge forces still leaves [po u rf u co]+ acyclic.  `readable_set`
decides this with the four structural pattern checks cond1..cond4 and then a
last check on the tentative graph, which catches cycles that run through two
or more newly forced coherence edges (the pattern checks only see one or two
of them at a time).

Forced edges.  Whenever ``b -rf_z-> t`` and a z-writer ``a != b`` reaches t
by [po u rf]+, a total coherence order must put a before b.  `apply_read`
materializes every such edge for the reader, so traces built by it satisfy
`is_fulfilled_ccv` literally.
"""

from __future__ import annotations

from dataclasses import dataclass

from .trace import Tid, Trace, _closure, bits, is_partially_good_ccv, transpose


class ContractError(RuntimeError):
    """A precondition of a trace transition does not hold."""


@dataclass(frozen=True)
class ReadContext:
    trace: Trace
    reader: Tid
    var: str


class _Frame:
    """Closures and masks shared by all candidate checks of one read."""

    def __init__(self, ctx: ReadContext):
        tr = ctx.trace
        if ctx.reader not in tr:
            raise ContractError(f"reader {ctx.reader} not in trace")
        self.tr = tr
        self.t = tr.index[ctx.reader]
        self.x = ctx.var
        self.porf = tr.porf_reach()
        self.hb = tr.hb_reach()
        self.porf_pred = transpose(self.porf)
        self.wx = tr.writer_mask(ctx.var) & ~(1 << self.t)
        self.pred_t = self.porf_pred[self.t]
        # reads already made by the reader: var -> source index
        self.rf_in = {v: s for (d, v), s in tr.rf.items() if d == self.t}
        if ctx.var in self.rf_in:
            raise ContractError(f"{ctx.reader} already reads {ctx.var} externally")
        self.wmask = {v: tr.writer_mask(v) for v in tr.variables}

    def writes(self, i: int, v: str) -> bool:
        return bool(self.wmask[v] >> i & 1)

    def cond1(self, s: int) -> bool:
        # s is hidden behind a later x-writer that already reaches t
        return bool(self.hb[s] & self.wx & self.pred_t)

    def cond2(self, s: int) -> bool:
        # t read y from t4; s and t4 both write x and y
        for y, t4 in self.rf_in.items():
            if t4 != s and self.writes(s, y) and self.writes(t4, self.x):
                return True
        return False

    def cond3(self, s: int) -> bool:
        # t read y from t4 and a y-writer hb-after t4 reaches s (or is s)
        upto_s = self.porf_pred[s] | (1 << s)
        for y, t4 in self.rf_in.items():
            if self.hb[t4] & self.wmask[y] & upto_s:
                return True
        return False

    def cond4(self, s: int) -> bool:
        # s writes y read by t from t4, and the last x-writer t3 on an hb
        # path from t4 to t already reaches t
        for y, t4 in self.rf_in.items():
            if not self.writes(s, y):
                continue
            cands = self.hb[t4] & self.wx & self.pred_t
            for t3 in bits(cands):
                if not self.hb[t3] & self.wx & self.pred_t:
                    return True
        return False

    def forced_edges(self, s: int) -> set[tuple[int, int, str]]:
        """Coherence edges required once t reads x from s."""
        pred = self.pred_t | self.porf_pred[s] | (1 << s)
        nv = len(self.tr.variables)
        out = set()
        sources = dict(self.rf_in)
        sources[self.x] = s
        for v, b in sources.items():
            for a in bits(self.wmask[v] & pred):
                if a != b and a >= nv and a != self.t:
                    out.add((a, b, v))
        return out

    def closes_cycle(self, s: int) -> bool:
        # hb is closed and acyclic, so a new cycle alternates new edges with
        # hb paths; search for one on the small graph whose nodes are the edges
        edges = [(a, b) for a, b, _ in self.forced_edges(s)]
        edges.append((s, self.t))
        succ = []
        for _, b in edges:
            reach = self.hb[b] | (1 << b)
            succ.append(sum(1 << j for j, (a2, _) in enumerate(edges) if reach >> a2 & 1))
        return any(r >> i & 1 for i, r in enumerate(_closure(succ)))


def _check_reader(ctx: ReadContext) -> None:
    tr = ctx.trace
    if ctx.var not in tr.variables:
        raise ContractError(f"unknown variable {ctx.var!r}")
    if ctx.reader in tr and tr.writes_var(ctx.reader, ctx.var):
        raise ContractError(f"{ctx.reader} already wrote {ctx.var}; the read is internal")


def readable_four(ctx: ReadContext) -> set[Tid]:
    """Candidates passing the four structural checks only."""
    _check_reader(ctx)
    f = _Frame(ctx)
    out = set()
    for s in bits(f.wx):
        if not (f.cond1(s) or f.cond2(s) or f.cond3(s) or f.cond4(s)):
            out.add(f.tr.ids[s])
    return out


def readable_set(ctx: ReadContext) -> set[Tid]:
    """rbl(trace, reader, var): writers of var the reader may read from."""
    _check_reader(ctx)
    f = _Frame(ctx)
    out = set()
    for s in bits(f.wx):
        if f.cond1(s) or f.cond2(s) or f.cond3(s) or f.cond4(s):
            continue
        if f.closes_cycle(s):
            continue
        out.add(f.tr.ids[s])
    return out


def visible_set(ctx: ReadContext) -> set[Tid]:
    """Readable writers that already reach the reader by [po u rf]+."""
    tr = ctx.trace
    r = tr.index[ctx.reader]
    porf = tr.porf_reach()
    return {w for w in readable_set(ctx) if porf[tr.index[w]] >> r & 1}


def apply_read(ctx: ReadContext, source: Tid, check: bool = True) -> Trace:
    """Add ``source -rf-> reader`` on var plus all coherence edges it forces."""
    if check and source not in readable_set(ctx):
        raise ContractError(f"{source} is not readable for {ctx.reader} on {ctx.var}")
    f = _Frame(ctx)
    s = f.tr.index[source]
    edges = f.forced_edges(s)
    out = ctx.trace.copy()
    out.add_rf(source, ctx.reader, ctx.var)
    for a, b, v in edges:
        out._add_co_idx(a, b, v)
    return out


def forced_co(tr: Trace) -> set[tuple[int, int, str]]:
    """Every coherence edge implied by po and rf (index form)."""
    porf = tr.porf_reach()
    nv = len(tr.variables)
    out = set()
    for (d, v), s in tr.rf.items():
        for a in bits(tr.writer_mask(v)):
            if a != s and a >= nv and porf[a] >> d & 1:
                out.add((a, s, v))
    return out


def is_fulfilled_ccv(tr: Trace) -> bool:
    """Every writer that reaches a reader is co-before the reader's source."""
    porf = tr.porf_reach()
    cache: dict[str, list[int]] = {}
    for (d, v), s in tr.rf.items():
        for a in bits(tr.writer_mask(v)):
            if a == s or not porf[a] >> d & 1:
                continue
            if v not in cache:
                cache[v] = tr.co_reach(v)
            if not cache[v][a] >> s & 1:
                return False
    return True


def fulfill(tr: Trace) -> Trace:
    """Least extension of co that makes the trace fulfilled.

    The forced edges depend only on po and rf, so one pass reaches the
    fixpoint.
    """
    out = tr.copy()
    for a, b, v in forced_co(tr):
        out._add_co_idx(a, b, v)
    return out


def is_ccv_consistent(tr: Trace) -> bool:
    return is_partially_good_ccv(fulfill(tr))
