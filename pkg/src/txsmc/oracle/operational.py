"""Operational semantics of CCv and CC, as two independent interpreters.

`step` executes one labelled step on a `Configuration`: begin, a single
instruction, end, or the delivery of a committed log to a process.  Its
enabling checks enforce causal delivery and transaction isolation.

`enumerate_operational` explores whole executions at the granularity of
execution summaries: a transaction runs atomically when it is issued, and
deliveries to a process are batched right before that process issues its
next transaction.  Deliveries commute with everything that does not read
the receiving store, so this loses no behaviour.

CCv ids are positions in a global total order that grows by insertion; only
writers need an id, because read-only transactions never reach a store.
CC ids are causal-past sets: t1 < t2 iff t1 is in t2's past.
"""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field
from typing import Iterator

from ..models import Model
from ..prog import Program, compile_body, eval_expr
from ..trace import Tid, Trace, WeakTrace
from .axiomatic import GuardExceeded


class Disabled(RuntimeError):
    """The requested step is not enabled in the configuration."""


# ---------------------------------------------------------------------------
# step-level interpreter


@dataclass
class LocalState:
    next_txn: int = 0
    # open transaction, if any
    tid: Tid | None = None
    pc: int = 0
    log: dict = field(default_factory=dict)
    tid_id: object = None
    # CCv: var -> (value, writer, id);  CC: var -> {writer: (value, past)}
    store: dict = field(default_factory=dict)
    # CCv: var -> id of the applied writer;  CC: causal past of the process
    ts: object = None
    snapshot: dict = field(default_factory=dict)
    regs: dict = field(default_factory=dict)
    delivered: set = field(default_factory=set)
    # rf of the open transaction: var -> writer (None for the initializer)
    reads: dict = field(default_factory=dict)
    # what had reached this process when the open transaction began
    deps: frozenset = frozenset()


@dataclass(frozen=True)
class Message:
    tid: Tid
    id: object
    log: tuple  # ((var, value), ...) last write per variable
    deps: frozenset  # transactions delivered to or ended at the sender before begin


@dataclass
class Configuration:
    model: Model
    prog: Program
    ls: list[LocalState]
    msgs: dict[Tid, Message] = field(default_factory=dict)
    rf: set = field(default_factory=set)  # (writer or None, reader, var)
    issued: list[Tid] = field(default_factory=list)
    blocked: bool = False
    failed: bool = False


def initial_configuration(prog: Program, model: Model | str) -> Configuration:
    model = Model(model)
    ls = []
    for _ in prog.processes:
        if model is Model.CCV:
            ls.append(LocalState(ts={v: 0 for v in prog.shared_vars}))
        else:
            ls.append(LocalState(ts=frozenset()))
    return Configuration(model, prog, ls)


def maximal_entries(entries: dict) -> list[Tid]:
    """Writers in a CC store entry set not dominated by another entry."""
    return sorted(w for w, (_, past) in entries.items() if not any(w in p2 for w2, (_, p2) in entries.items() if w2 != w))


def step(cfg: Configuration, label: tuple) -> Configuration:
    """Apply one labelled step and return the new configuration.

    Labels: ("begin", p, arg), ("exec", p), ("end", p), ("del", p, tid).
    For CCv the begin argument is the new transaction id (any value
    comparable with earlier ids); for CC it is the snapshot choice
    var -> writer (None for the initial value), missing entries meaning the
    single maximal entry.
    """
    cfg = copy.deepcopy(cfg)
    kind, p = label[0], label[1]
    st = cfg.ls[p]
    prog = cfg.prog
    if kind == "begin":
        if st.tid is not None or st.next_txn >= len(prog.processes[p].transactions):
            raise Disabled(label)
        t = Tid(p, st.next_txn)
        if cfg.model is Model.CCV:
            new_id = label[2]
            if any(not (ts < new_id) for ts in st.ts.values()):
                raise Disabled(f"id {new_id} not above local timestamps")
            st.tid_id = new_id
        else:
            choice = label[2] if len(label) > 2 and label[2] else {}
            snap = {}
            for v in prog.shared_vars:
                entries = st.store.get(v, {})
                maxima = maximal_entries(entries)
                if v in choice:
                    pick = choice[v]
                elif len(maxima) > 1:
                    raise Disabled(f"snapshot choice for {v} required")
                else:
                    pick = maxima[0] if maxima else None
                if pick is None:
                    if maxima:
                        raise Disabled(f"initial value of {v} is dominated")
                    snap[v] = (0, None)
                else:
                    if pick not in maxima:
                        raise Disabled(f"{pick} is not maximal for {v}")
                    snap[v] = (entries[pick][0], pick)
            st.snapshot = snap
            st.tid_id = st.ts | {t}
        st.tid, st.pc, st.log, st.reads = t, 0, {}, {}
        st.next_txn += 1
        st.deps = frozenset(st.delivered)
        return cfg

    if kind == "exec":
        if st.tid is None:
            raise Disabled(label)
        code = compile_body(prog.transaction(*st.tid).body)
        if st.pc >= len(code):
            raise Disabled("transaction finished; end it")
        op = code[st.pc]
        k = op[0]
        st.pc += 1
        if k == "assign":
            st.regs[op[1]] = eval_expr(op[2], st.regs)
        elif k == "assert":
            cfg.failed = cfg.failed or not eval_expr(op[1], st.regs)
        elif k == "assume":
            cfg.blocked = cfg.blocked or not eval_expr(op[1], st.regs)
        elif k == "jz":
            if eval_expr(op[1], st.regs) == 0:
                st.pc = op[2]
        elif k == "jmp":
            st.pc = op[1]
        elif k == "write":
            st.log[op[1]] = eval_expr(op[2], st.regs)
        elif k == "read":
            reg, x = op[1], op[2]
            if x in st.log:
                st.regs[reg] = st.log[x]
            else:
                if cfg.model is Model.CCV:
                    value, writer, _ = st.store.get(x, (0, None, 0))
                else:
                    value, writer = st.snapshot[x]
                st.regs[reg] = value
                st.reads.setdefault(x, writer)
        return cfg

    if kind == "end":
        if st.tid is None:
            raise Disabled(label)
        code = compile_body(prog.transaction(*st.tid).body)
        if st.pc < len(code):
            raise Disabled("transaction still running")
        t = st.tid
        for x, w in st.reads.items():
            cfg.rf.add((w, t, x))
        cfg.issued.append(t)
        msg = Message(t, st.tid_id, tuple(sorted(st.log.items())), st.deps)
        cfg.msgs[t] = msg
        _apply(cfg, st, msg)
        st.delivered.add(t)
        st.tid = None
        return cfg

    if kind == "del":
        t = label[2]
        if st.tid is not None:
            raise Disabled("no delivery during a transaction")
        if t not in cfg.msgs or t in st.delivered:
            raise Disabled(label)
        msg = cfg.msgs[t]
        if not msg.deps <= st.delivered:
            raise Disabled(f"causal delivery: {t} depends on undelivered transactions")
        _apply(cfg, st, msg)
        st.delivered.add(t)
        return cfg

    raise ValueError(f"unknown label {label!r}")


def _apply(cfg: Configuration, st: LocalState, msg: Message) -> None:
    if cfg.model is Model.CCV:
        for x, v in msg.log:
            if st.ts[x] < msg.id:
                st.store[x] = (v, msg.tid, msg.id)
                st.ts[x] = msg.id
    else:
        past = msg.id
        st.ts = st.ts | past
        for x, v in msg.log:
            entries = st.store.setdefault(x, {})
            if any(msg.tid in p2 for _, p2 in entries.values()):
                continue  # already dominated
            for w in [w for w, (_, p2) in entries.items() if w in past]:
                del entries[w]
            entries[msg.tid] = (v, past)


def configuration_trace(cfg: Configuration) -> WeakTrace:
    """Weak trace of a finished run: po plus reads-from by store provenance."""
    prog = cfg.prog
    tr = Trace(prog.shared_vars)
    for t in sorted(cfg.issued):
        tr.add_transaction(t)
    for t in cfg.issued:
        for x, _ in cfg.msgs[t].log:
            tr.add_write(t, x, 0)
    for w, t, x in cfg.rf:
        tr.add_rf(w if w is not None else tr.init(x), t, x)
    return tr.weaken()


# ---------------------------------------------------------------------------
# summary-level enumeration


def _subsets(items: list) -> Iterator[tuple]:
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def _run(code: tuple, t: Tid, regs: dict, read_choices) -> Iterator[tuple[dict, dict, dict, bool]]:
    """Run a transaction atomically.  read_choices(x) lists the possible
    (value, writer) pairs for the first external read of x.
    Yields (regs, log, reads, blocked)."""

    def go(pc, regs, log, reads, blocked):
        while pc < len(code):
            op = code[pc]
            k = op[0]
            if k == "assign":
                regs = {**regs, op[1]: eval_expr(op[2], regs)}
            elif k == "assume":
                blocked = blocked or not eval_expr(op[1], regs)
            elif k == "jz":
                pc = op[2] if eval_expr(op[1], regs) == 0 else pc + 1
                continue
            elif k == "jmp":
                pc = op[1]
                continue
            elif k == "write":
                log = {**log, op[1]: eval_expr(op[2], regs)}
            elif k == "read":
                reg, x = op[1], op[2]
                if x in log:
                    regs = {**regs, reg: log[x]}
                elif x in reads:
                    regs = {**regs, reg: reads[x][0]}
                else:
                    for value, w in read_choices(x):
                        yield from go(pc + 1, {**regs, reg: value}, log, {**reads, x: (value, w)}, blocked)
                    return
            pc += 1
        yield regs, log, reads, blocked

    yield from go(0, regs, {}, {}, False)


def enumerate_operational(prog: Program, model: Model | str, guard: int = 8) -> set[WeakTrace]:
    model = Model(model)
    if prog.n_transactions > guard:
        raise GuardExceeded(f"{prog.n_transactions} transactions exceed the operational guard of {guard}")
    code = [[compile_body(t.body) for t in p.transactions] for p in prog.processes]
    n = len(prog.processes)
    results: set[WeakTrace] = set()
    seen: set = set()

    # issued info: tid -> (log tuple, deps frozenset, past frozenset | None)
    def dfs(pos, regs, delivered, issued, order, rf, blocked):
        key = (pos, tuple(tuple(sorted(r.items())) for r in regs), delivered, frozenset(issued.items()), order, rf, blocked)
        if key in seen:
            return
        seen.add(key)
        if all(pos[p] >= len(code[p]) for p in range(n)):
            if not blocked:
                results.add(_weak(prog, issued, rf))
            return
        for p in range(n):
            if pos[p] >= len(code[p]):
                continue
            t = Tid(p, pos[p])
            avail = sorted(w for w in issued if w not in delivered[p])
            for extra in _subsets(avail):
                dl = delivered[p] | frozenset(extra)
                if any(not issued[w][1] <= dl for w in extra):
                    continue  # causal delivery
                for step in _issue(model, code[p][pos[p]], t, regs[p], dl, issued, order):
                    r2, log, reads, b, new_order, past = step
                    npos = pos[:p] + (pos[p] + 1,) + pos[p + 1 :]
                    nregs = regs[:p] + (r2,) + regs[p + 1 :]
                    nissued = dict(issued)
                    ndel = list(delivered)
                    ndel[p] = dl
                    if log:
                        nissued[t] = (tuple(sorted(log.items())), dl, past)
                        ndel[p] = dl | {t}
                    nrf = rf | frozenset((w, t, x) for x, (_, w) in reads.items())
                    dfs(npos, nregs, tuple(ndel), nissued, new_order, nrf, blocked or b)

    dfs((0,) * n, tuple({} for _ in range(n)), (frozenset(),) * n, {}, (), frozenset(), False)
    return results


def _issue(model: Model, code, t: Tid, regs: dict, dl: frozenset, issued: dict, order: tuple):
    """All outcomes of issuing t at a process whose delivered set is dl."""
    if model is Model.CCV:
        rank = {w: i for i, w in enumerate(order)}

        def choices(x):
            best = None
            for w in dl:
                if any(v == x for v, _ in issued[w][0]) and (best is None or rank[w] > rank[best]):
                    best = w
            if best is None:
                return [(0, None)]
            return [(dict(issued[best][0])[x], best)]

        low = max((rank[w] + 1 for w in dl), default=0)
        for r2, log, reads, b in _run(code, t, regs, choices):
            if not log:
                yield r2, log, reads, b, order, None
                continue
            for at in range(low, len(order) + 1):
                yield r2, log, reads, b, order[:at] + (t,) + order[at:], None
    else:
        past = frozenset({t}).union(*(issued[w][2] for w in dl)) if dl else frozenset({t})

        def choices(x):
            writers = [w for w in dl if any(v == x for v, _ in issued[w][0])]
            maxima = [w for w in writers if not any(w in issued[w2][2] for w2 in writers if w2 != w)]
            if not maxima:
                return [(0, None)]
            return [(dict(issued[w][0])[x], w) for w in sorted(maxima)]

        for r2, log, reads, b in _run(code, t, regs, choices):
            yield r2, log, reads, b, order, past


def _weak(prog: Program, issued: dict, rf: frozenset) -> WeakTrace:
    tr = Trace(prog.shared_vars)
    for p, proc in enumerate(prog.processes):
        for i in range(len(proc.transactions)):
            tr.add_transaction(Tid(p, i))
    for t, (log, _, _) in issued.items():
        for x, v in log:
            tr.add_write(t, x, v)
    for w, t, x in rf:
        tr.add_rf(w if w is not None else tr.init(x), t, x)
    return tr.weaken()
