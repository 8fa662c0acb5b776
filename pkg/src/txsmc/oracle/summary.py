"""Execution summaries: issue/deliver sequences that abstract a run.

A summary is a total order over ``isu(p, t)`` and ``del(p, t)`` events.  It
is legal for a model when every external read takes the value a replica
would hold at issue time, deliveries respect causality, and nothing is
delivered before it is issued.  `summarize` builds a legal summary for a
consistent trace; `check_legal_summary` decides legality together with
agreement with a given trace.

Transaction ids are implicit.  Under CCv the id order is the issue order,
which is always a valid choice since a fresh id only has to exceed ids the
issuing replica has already seen.  Under CC the id of t dominates exactly
the transactions in the causal past of t at issue time.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from ..ccv import forced_co
from ..models import Model
from ..trace import Tid, Trace

ISSUE = "isu"
DELIVER = "del"


class SummaryEvent(NamedTuple):
    kind: str
    proc: int
    tid: Tid

    def show(self, names: dict[Tid, str] | None = None) -> str:
        name = names.get(self.tid, str(self.tid)) if names else str(self.tid)
        return f"{self.kind}(p{self.proc},{name})"


@dataclass(frozen=True)
class ExecutionSummary:
    events: tuple[SummaryEvent, ...]

    @classmethod
    def of(cls, events: Iterable[tuple[str, int, Tid]]) -> "ExecutionSummary":
        return cls(tuple(SummaryEvent(*e) for e in events))

    def show(self, names: dict[Tid, str] | None = None) -> str:
        return " . ".join(e.show(names) for e in self.events)


class _Timeline:
    """Positions of the events of a summary, or None if it is malformed."""

    def __init__(self, s: ExecutionSummary, tr: Trace):
        self.ok = True
        self.isu: dict[Tid, int] = {}
        self.dels: dict[tuple[int, Tid], int] = {}
        for i, (kind, p, t) in enumerate(s.events):
            if t not in tr or t.is_init:
                self.ok = False
            elif kind == ISSUE and t not in self.isu and p == t.proc:
                self.isu[t] = i
            elif kind == DELIVER and (p, t) not in self.dels:
                self.dels[(p, t)] = i
            else:
                self.ok = False
        if set(self.isu) != set(tr.transactions):
            self.ok = False

    def avail(self, p: int, t: Tid) -> int | None:
        """When the effects of t become visible at replica p."""
        if t.proc == p:
            return self.isu.get(t)
        return self.dels.get((p, t))


def _seen(tl: _Timeline, tr: Trace) -> dict[Tid, set[Tid]]:
    """Writers visible at the issuing replica when each transaction starts."""
    writers = [t for t in tr.transactions if tr.written_vars(t)]
    out = {}
    for t in tr.transactions:
        at = tl.isu[t]
        out[t] = {w for w in writers if w != t and (a := tl.avail(t.proc, w)) is not None and a < at}
    return out


def _cc_past(tl: _Timeline, seen: dict[Tid, set[Tid]]) -> dict[Tid, set[Tid]]:
    past: dict[Tid, set[Tid]] = {}
    for t in sorted(tl.isu, key=tl.isu.__getitem__):
        acc = set(seen[t])
        for w in seen[t]:
            acc |= past.get(w, set())
        past[t] = acc
    return past


def summary_sources(s: ExecutionSummary, tr: Trace, model: Model | str) -> dict[tuple[Tid, str], set[Tid]]:
    """For each external read (reader, var) of ``tr``, the writers a replica
    could return under the summary.  A singleton under CCv."""
    model = Model(model)
    tl = _Timeline(s, tr)
    if not tl.ok:
        raise ValueError("summary does not issue each transaction exactly once")
    seen = _seen(tl, tr)
    past = _cc_past(tl, seen) if model is Model.CC else {}
    out = {}
    for (d, x), _ in tr.rf.items():
        t = tr.ids[d]
        cands = [w for w in seen[t] if tr.writes_var(w, x)]
        if not cands:
            out[(t, x)] = {tr.init(x)}
        elif model is Model.CCV:
            out[(t, x)] = {max(cands, key=tl.isu.__getitem__)}
        else:
            out[(t, x)] = {w for w in cands if not any(w in past[u] for u in cands)}
    return out


def check_legal_summary(s: ExecutionSummary, tr: Trace, model: Model | str) -> bool:
    """True iff ``s`` is legal under the model and consistent with ``tr``."""
    model = Model(model)
    tl = _Timeline(s, tr)
    if not tl.ok:
        return False
    # deliveries follow the issue
    for (p, t), i in tl.dels.items():
        if i < tl.isu[t]:
            return False
    for a, b in tr.po_edges():
        if tl.isu[a] >= tl.isu[b]:
            return False
    if model is Model.CCV:
        for a, b, _ in tr.co_edges():
            if tl.isu[a] >= tl.isu[b]:
                return False
    # causal delivery: whatever t' saw at issue reaches every replica before t'
    procs = {t.proc for t in tr.transactions} | {p for p, _ in tl.dels}
    seen = _seen(tl, tr)
    for t2, before in seen.items():
        for p in procs:
            a2 = tl.avail(p, t2)
            if a2 is None:
                continue
            for t in before:
                a = tl.avail(p, t)
                if a is None or a > a2:
                    return False
    srcs = summary_sources(s, tr, model)
    return all(tr.ids[src] in srcs[(tr.ids[d], x)] for (d, x), src in tr.rf.items())


def summarize(tr: Trace, model: Model | str) -> ExecutionSummary:
    """A legal summary consistent with a consistent trace.

    Replica i orders the transactions it issues and the writers delivered to
    it by [po u rf]+, putting its own transactions first where that order is
    silent.  Issues precede deliveries, and under CCv issues of writers
    follow the forced coherence edges.  Ties are broken by transaction id,
    and each writer is delivered to its own replica right after issue.
    """
    model = Model(model)
    porf = tr.porf_reach()
    txns = tr.transactions
    writers = [t for t in txns if tr.written_vars(t)]
    procs = sorted({t.proc for t in txns})

    def hb(a: Tid, b: Tid) -> bool:
        return bool(porf[tr.index[a]] >> tr.index[b] & 1)

    nodes: list[SummaryEvent] = []
    local: dict[int, list[SummaryEvent]] = {}
    for p in procs:
        own = [SummaryEvent(ISSUE, p, t) for t in txns if t.proc == p]
        recv = [SummaryEvent(DELIVER, p, w) for w in writers if w.proc != p]
        local[p] = own + recv
        nodes += local[p]

    preds: dict[SummaryEvent, set[SummaryEvent]] = {e: set() for e in nodes}
    for p, evs in local.items():
        for e in evs:
            for f in evs:
                if e is f:
                    continue
                before = hb(e.tid, f.tid)
                if e.kind == ISSUE and f.kind == DELIVER and not hb(f.tid, e.tid):
                    before = True
                if before:
                    preds[f].add(e)
    issue = {e.tid: e for e in nodes if e.kind == ISSUE}
    for e in nodes:
        if e.kind == DELIVER:
            preds[e].add(issue[e.tid])
    if model is Model.CCV:
        co = {(tr.ids[a], tr.ids[b]) for a, b, _ in tr.co} | {(tr.ids[a], tr.ids[b]) for a, b, _ in forced_co(tr)}
        for a, b in co:
            if not a.is_init:
                preds[issue[b]].add(issue[a])

    order = _linearize(preds)
    out: list[SummaryEvent] = []
    for e in order:
        out.append(e)
        if e.kind == ISSUE and e.tid in writers:
            out.append(SummaryEvent(DELIVER, e.proc, e.tid))
    return ExecutionSummary(tuple(out))


def _linearize(preds: dict[SummaryEvent, set[SummaryEvent]]) -> list[SummaryEvent]:
    def key(e: SummaryEvent):
        return (e.tid, e.kind != ISSUE, e.proc)

    waiting = {e: len(ps) for e, ps in preds.items()}
    succs: dict[SummaryEvent, list[SummaryEvent]] = {e: [] for e in preds}
    for e, ps in preds.items():
        for p in ps:
            succs[p].append(e)
    heap = [(key(e), e) for e, n in waiting.items() if n == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, e = heapq.heappop(heap)
        out.append(e)
        for f in succs[e]:
            waiting[f] -= 1
            if waiting[f] == 0:
                heapq.heappush(heap, (key(f), f))
    if len(out) != len(preds):
        raise ValueError("trace is not consistent: issue/delivery constraints are cyclic")
    return out
