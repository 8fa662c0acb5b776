"""Optimal DPOR over weak traces of transactional programs.

The explorer runs one transaction at a time, always picking the
lowest-numbered process that still has work.  A fresh external read
branches over every readable source.  When a transaction t2 ends, earlier
reads that could have read from t2 get a *schedule*: the events needed to
rebuild a prefix in which t2 and its causal past come first and the read
takes its value from t2.  Schedules are replayed once the read's own
branches are exhausted.

Reads replayed from a schedule are never swapped again, and a schedule is
stored only once per read (same events, same sources).
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field, replace
from typing import Iterable

from .ccv import ContractError, ReadContext
from .models import Engine, Model, engine_for
from .prog import Program, compile_body, eval_expr
from .trace import Tid, Trace, WeakTrace, tid_name


@dataclass(frozen=True)
class Event:
    kind: str  # "begin" | "end" | "write" | "read"
    tid: Tid
    var: str | None = None
    src: Tid | None = None

    def show(self, variables: tuple[str, ...]) -> str:
        t = tid_name(self.tid, variables)
        if self.kind == "read":
            return f"(read,{t},{self.var},{tid_name(self.src, variables)})"
        if self.kind == "write":
            return f"(write,{t},{self.var})"
        return f"({self.kind},{t})"


Schedule = tuple[Event, ...]


@dataclass
class ReadMeta:
    swappable: bool
    localread: bool
    schedules: list[Schedule] = field(default_factory=list)
    keys: set = field(default_factory=set)


def schedule_key(beta: Schedule) -> tuple[frozenset, frozenset]:
    """Schedules that differ only in the interleaving of independent
    transactions rebuild the same trace, so the key is order-free."""
    return (
        frozenset(ev.tid for ev in beta if ev.kind == "begin"),
        frozenset((ev.tid, ev.var, ev.src) for ev in beta if ev.kind == "read"),
    )


def schedule_dedup(existing: Iterable[Schedule], candidate: Schedule) -> bool:
    """True when candidate is new: no stored schedule has the same
    transactions with the same read sources."""
    key = schedule_key(candidate)
    return all(schedule_key(s) != key for s in existing)


@dataclass(frozen=True)
class Open:
    tid: Tid
    code: tuple
    pc: int
    log: dict  # var -> value written by this transaction so far
    currentreads: dict  # var -> source of the first external read
    begin_state: "State"
    begin_index: int


@dataclass(frozen=True)
class State:
    trace: Trace
    next_pos: tuple[int, ...]
    regs: tuple[dict, ...]
    open: Open | None = None
    blocked: bool = False
    failures: tuple = ()


@dataclass(frozen=True)
class Violation:
    assert_site: str
    sequence: tuple[Event, ...]
    trace: WeakTrace


@dataclass
class ExploreConfig:
    max_nodes: int | None = None
    max_traces: int | None = None
    stop_at_first: bool = False
    # recheck the model predicates on every registered trace
    paranoid: bool = False


@dataclass
class Stats:
    nodes: int = 0
    schedules: int = 0
    replays: int = 0
    infeasible: int = 0
    blocked: int = 0
    violating_traces: int = 0
    millis: float = 0.0


@dataclass
class ExplorationReport:
    program: Program
    model: Model
    traces: set[WeakTrace]
    trace_count: int
    duplicates: int
    violations: list[Violation]
    stats: Stats
    complete: bool = True

    @property
    def verdict(self) -> str:
        return "UNSAFE" if self.violations else "SAFE"


class BudgetExceeded(RuntimeError):
    pass


class _Stop(Exception):
    pass


class Explorer:
    def __init__(self, prog: Program, model: Model | str = Model.CCV, config: ExploreConfig | None = None):
        self.prog = prog
        self.engine: Engine = engine_for(model)
        self.config = config or ExploreConfig()
        self.code = [[compile_body(t.body) for t in p.transactions] for p in prog.processes]
        self.pi: list[Event] = []
        self.meta: list[ReadMeta | None] = []
        self.traces: set[WeakTrace] = set()
        self.trace_count = 0
        self.duplicates = 0
        self.violations: dict[str, Violation] = {}
        self.stats = Stats()

    # -- driver -----------------------------------------------------------

    def run(self) -> ExplorationReport:
        t0 = time.perf_counter()
        n = len(self.prog.processes)
        st = State(Trace(self.prog.shared_vars), (0,) * n, tuple({} for _ in range(n)))
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, 20000))
        complete = True
        try:
            self._explore(st)
        except _Stop:
            complete = False
        finally:
            sys.setrecursionlimit(old)
            self.stats.millis = (time.perf_counter() - t0) * 1000
        return ExplorationReport(
            self.prog,
            self.engine.model,
            self.traces,
            self.trace_count,
            self.duplicates,
            sorted(self.violations.values(), key=lambda v: v.assert_site),
            self.stats,
            complete,
        )

    # -- small state transitions -----------------------------------------

    def _push(self, ev: Event, meta: ReadMeta | None = None) -> None:
        self.pi.append(ev)
        self.meta.append(meta)

    def _pop(self) -> None:
        self.pi.pop()
        self.meta.pop()

    def _next_process(self, st: State) -> int | None:
        for p, proc in enumerate(self.prog.processes):
            if st.next_pos[p] < len(proc.transactions):
                return p
        return None

    def _begin(self, st: State, t: Tid) -> State:
        tr = st.trace.copy()
        tr.add_transaction(t)
        pos = list(st.next_pos)
        pos[t.proc] += 1
        o = Open(t, self.code[t.proc][t.pos], 0, {}, {}, st, len(self.pi))
        return replace(st, trace=tr, next_pos=tuple(pos), open=o)

    def _run_local(self, st: State) -> State:
        o = st.open
        p = o.tid.proc
        regs = st.regs[p]
        pc, code = o.pc, o.code
        blocked, failures = st.blocked, st.failures
        touched = False
        while pc < len(code):
            op = code[pc]
            k = op[0]
            if k == "assign":
                if not touched:
                    regs, touched = dict(regs), True
                regs[op[1]] = eval_expr(op[2], regs)
                pc += 1
            elif k == "assert":
                if not eval_expr(op[1], regs):
                    site = f"line {op[2]} ({self.prog.processes[p].name}/{self.prog.label(*o.tid)})"
                    failures = failures + (site,)
                pc += 1
            elif k == "assume":
                if not eval_expr(op[1], regs):
                    blocked = True
                pc += 1
            elif k == "jz":
                pc = op[2] if eval_expr(op[1], regs) == 0 else pc + 1
            elif k == "jmp":
                pc = op[1]
            else:
                break
        if pc == o.pc:
            return st
        all_regs = st.regs if not touched else st.regs[:p] + (regs,) + st.regs[p + 1 :]
        return replace(st, regs=all_regs, open=replace(o, pc=pc), blocked=blocked, failures=failures)

    def _end(self, st: State) -> State:
        return replace(st, open=None)

    def _write(self, st: State) -> tuple[State, Event]:
        o = st.open
        _, var, expr = o.code[o.pc]
        value = eval_expr(expr, st.regs[o.tid.proc])
        tr = st.trace.copy()
        tr.add_write(o.tid, var, value)
        log = dict(o.log)
        log[var] = value
        return replace(st, trace=tr, open=replace(o, pc=o.pc + 1, log=log)), Event("write", o.tid, var)

    def _set_reg(self, st: State, reg: str, value: int, **changes) -> State:
        o = st.open
        p = o.tid.proc
        regs = dict(st.regs[p])
        regs[reg] = value
        return replace(st, regs=st.regs[:p] + (regs,) + st.regs[p + 1 :], **changes)

    # -- exploration --------------------------------------------------------

    def _tick(self) -> None:
        self.stats.nodes += 1
        if self.config.max_nodes is not None and self.stats.nodes > self.config.max_nodes:
            raise BudgetExceeded(f"node budget of {self.config.max_nodes} exceeded")

    def _explore(self, st: State) -> None:
        self._tick()
        if st.open is None:
            p = self._next_process(st)
            if p is None:
                self._leaf(st)
                return
            t = Tid(p, st.next_pos[p])
            st2 = self._begin(st, t)
            self._push(Event("begin", t))
            self._explore(st2)
            self._pop()
            return

        st = self._run_local(st)
        o = st.open
        t = o.tid
        if o.pc >= len(o.code):
            self._push(Event("end", t))
            st2 = self._end(st)
            self._explore(st2)
            if o.log:
                self._create_schedules(st2.trace, t)
            self._pop()
            return

        op = o.code[o.pc]
        if op[0] == "write":
            st2, ev = self._write(st)
            self._push(ev)
            self._explore(st2)
            self._pop()
            return

        _, reg, x = op
        nxt = replace(o, pc=o.pc + 1)
        if x in o.log:
            st2 = self._set_reg(st, reg, o.log[x], open=nxt)
            self._push(Event("read", t, x, t), ReadMeta(False, True))
            self._explore(st2)
            self._pop()
            return
        if x in o.currentreads:
            src = o.currentreads[x]
            st2 = self._set_reg(st, reg, st.trace.value(src, x), open=nxt)
            self._push(Event("read", t, x, src), ReadMeta(False, False))
            self._explore(st2)
            self._pop()
            return

        meta = ReadMeta(True, False)
        ctx = ReadContext(st.trace, t, x)
        for src in sorted(self.engine.readable(ctx)):
            tr = self.engine.apply_read(ctx, src, check=False)
            cur = dict(o.currentreads)
            cur[x] = src
            st2 = self._set_reg(st, reg, tr.value(src, x), trace=tr, open=replace(nxt, currentreads=cur))
            self._push(Event("read", t, x, src), meta)
            self._explore(st2)
            self._pop()
        # schedules may be appended while earlier ones run
        i = 0
        while i < len(meta.schedules):
            self._run_schedule(o.begin_state, o.begin_index, meta.schedules[i])
            i += 1

    def _leaf(self, st: State) -> None:
        if st.blocked:
            self.stats.blocked += 1
            return
        wt = st.trace.weaken()
        self.trace_count += 1
        if wt in self.traces:
            self.duplicates += 1
        else:
            self.traces.add(wt)
        if self.config.paranoid:
            tr = st.trace
            if not (self.engine.fulfilled(tr) and self.engine.partially_good(tr)):
                raise ContractError(f"explored trace violates the model: {tr!r}")
        if st.failures:
            self.stats.violating_traces += 1
            for site in st.failures:
                if site not in self.violations:
                    self.violations[site] = Violation(site, tuple(self.pi), wt)
            if self.config.stop_at_first:
                raise _Stop
        if self.config.max_traces is not None and len(self.traces) > self.config.max_traces:
            raise BudgetExceeded(f"trace budget of {self.config.max_traces} exceeded")

    # -- schedules ------------------------------------------------------------

    def _reads_before(self, t1: Tid, start: int, stop: int) -> dict[str, Tid]:
        out = {}
        for ev in self.pi[start:stop]:
            if ev.kind == "read" and ev.tid == t1 and ev.src != t1:
                out.setdefault(ev.var, ev.src)
        return out

    def _overwrites(self, tr: Trace, writer: Tid, reads: dict[str, Tid]) -> bool:
        """writer rewrites some y that t1 read from a [po u rf]-predecessor of writer."""
        for y, src in reads.items():
            if tr.writes_var(writer, y) and tr.reach_porf(src, writer):
                return True
        return False

    def _create_schedules(self, tr: Trace, t2: Tid) -> None:
        pi = self.pi
        k = len(pi) - 1
        while not (pi[k].kind == "begin" and pi[k].tid == t2):
            k -= 1
        w2 = tr.written_vars(t2)
        begins = {ev.tid: i for i, ev in enumerate(pi) if ev.kind == "begin"}
        for i in range(k - 1, -1, -1):
            e = pi[i]
            m = self.meta[i]
            if e.kind != "read" or not m.swappable or m.localread or e.var not in w2:
                continue
            t1 = e.tid
            if tr.reach_porf(t1, t2):
                continue
            b1 = begins[t1]
            reads = self._reads_before(t1, b1, i)
            if self.engine.has_co and any(
                tr.writes_var(t2, y) and tr.writes_var(src, e.var) for y, src in reads.items()
            ):
                continue
            if self._overwrites(tr, t2, reads):
                continue
            j = i
            while not (pi[j].kind == "end" and pi[j].tid == t1):
                j += 1
            kept: list[Tid] = []
            ok = True
            for ev in pi[j + 1 : k]:
                if ev.kind != "begin" or not tr.reach_porf(ev.tid, t2):
                    continue
                if tr.reach_porf(t1, ev.tid) or self._overwrites(tr, ev.tid, reads):
                    ok = False
                    break
                kept.append(ev.tid)
            if not ok:
                continue
            keep = set(kept) | {t2}
            beta = [ev for ev in pi[j + 1 : len(pi)] if ev.tid in keep]
            beta += pi[b1:i]
            beta.append(Event("read", t1, e.var, t2))
            beta = tuple(beta)
            key = schedule_key(beta)
            if key not in m.keys:
                m.keys.add(key)
                m.schedules.append(beta)
                self.stats.schedules += 1

    def _run_schedule(self, st: State, begin_index: int, beta: Schedule) -> None:
        self.stats.replays += 1
        saved_pi, saved_meta = self.pi[begin_index:], self.meta[begin_index:]
        del self.pi[begin_index:]
        del self.meta[begin_index:]
        try:
            st = self._replay(st, beta)
            if st is None:
                self.stats.infeasible += 1
            else:
                self._explore(st)
        finally:
            del self.pi[begin_index:]
            del self.meta[begin_index:]
            self.pi.extend(saved_pi)
            self.meta.extend(saved_meta)

    def _replay(self, st: State, beta: Schedule) -> State | None:
        for ev in beta:
            if ev.kind == "begin":
                if st.open is not None or st.next_pos[ev.tid.proc] != ev.tid.pos:
                    raise ContractError(f"replay divergence at {ev}")
                st = self._begin(st, ev.tid)
                self._push(ev)
                continue
            if st.open is None or st.open.tid != ev.tid:
                raise ContractError(f"replay divergence at {ev}")
            st = self._run_local(st)
            o = st.open
            if ev.kind == "end":
                if o.pc < len(o.code):
                    raise ContractError(f"replay divergence at {ev}")
                st = self._end(st)
                self._push(ev)
                continue
            op = o.code[o.pc] if o.pc < len(o.code) else ("end",)
            if op[0] != ev.kind or (ev.kind == "write" and op[1] != ev.var) or (ev.kind == "read" and op[2] != ev.var):
                raise ContractError(f"replay divergence at {ev}")
            if ev.kind == "write":
                st, _ = self._write(st)
                self._push(ev)
                continue
            _, reg, x = op
            nxt = replace(o, pc=o.pc + 1)
            if x in o.log:
                if ev.src != ev.tid:
                    raise ContractError(f"replay divergence at {ev}")
                st = self._set_reg(st, reg, o.log[x], open=nxt)
                self._push(ev, ReadMeta(False, True))
            elif x in o.currentreads:
                if o.currentreads[x] != ev.src:
                    raise ContractError(f"replay divergence at {ev}")
                st = self._set_reg(st, reg, st.trace.value(ev.src, x), open=nxt)
                self._push(ev, ReadMeta(False, False))
            else:
                ctx = ReadContext(st.trace, o.tid, x)
                if ev.src not in st.trace or ev.src not in self.engine.readable(ctx):
                    return None
                tr = self.engine.apply_read(ctx, ev.src, check=False)
                cur = dict(o.currentreads)
                cur[x] = ev.src
                st = self._set_reg(st, reg, tr.value(ev.src, x), trace=tr, open=replace(nxt, currentreads=cur))
                self._push(ev, ReadMeta(False, False))
        return st


def explore(prog: Program, model: Model | str = Model.CCV, config: ExploreConfig | None = None) -> ExplorationReport:
    """All model-consistent weak traces of prog, each visited once."""
    return Explorer(prog, model, config).run()
