"""Brute-force enumeration of consistent weak traces.

Transactions are executed atomically in every order compatible with program
order.  Each external read branches over every writer of the variable that
has already run (or the initializer).  A finished assignment of read
sources is kept when the model's consistency predicate accepts it.

Since reads-from is contained in happens-before, any consistent trace has a
linearization in which sources run before their readers, so this is
complete.  Memoizing on (positions, registers, rf) keeps the permutation
blow-up in check.
"""

from __future__ import annotations

from typing import Iterator

from ..models import Model, engine_for
from ..prog import Program, compile_body, eval_expr
from ..trace import Tid, Trace, WeakTrace


class GuardExceeded(RuntimeError):
    pass


def run_transaction(code: tuple, t: Tid, regs: dict, trace: Trace) -> Iterator[tuple[dict, Trace, bool, tuple]]:
    """Every way transaction t can run to completion on top of trace.

    Yields (registers, trace with t added, assume-failed flag, failed assert
    lines).  Reads from writers already in the trace; the trace passed in is
    not modified.
    """
    tr = trace.copy()
    tr.add_transaction(t)
    writers = {v: [w for w in trace.writers(v)] for v in trace.variables}

    def go(pc: int, regs: dict, tr: Trace, log: dict, pinned: dict, blocked: bool, fails: tuple):
        while pc < len(code):
            op = code[pc]
            k = op[0]
            if k == "assign":
                regs = {**regs, op[1]: eval_expr(op[2], regs)}
            elif k == "assert":
                if not eval_expr(op[1], regs):
                    fails = fails + (op[2],)
            elif k == "assume":
                blocked = blocked or not eval_expr(op[1], regs)
            elif k == "jz":
                pc = op[2] if eval_expr(op[1], regs) == 0 else pc + 1
                continue
            elif k == "jmp":
                pc = op[1]
                continue
            elif k == "write":
                value = eval_expr(op[2], regs)
                log = {**log, op[1]: value}
                tr = tr.copy()
                tr.add_write(t, op[1], value)
            elif k == "read":
                reg, x = op[1], op[2]
                if x in log:
                    regs = {**regs, reg: log[x]}
                elif x in pinned:
                    regs = {**regs, reg: tr.value(pinned[x], x)}
                else:
                    for w in writers[x]:
                        tr2 = tr.copy()
                        tr2.add_rf(w, t, x)
                        yield from go(
                            pc + 1, {**regs, reg: tr2.value(w, x)}, tr2, log, {**pinned, x: w}, blocked, fails
                        )
                    return
            pc += 1
        yield regs, tr, blocked, fails

    yield from go(0, regs, tr, {}, {}, False, ())


def enumerate_weak_traces(prog: Program, model: Model | str, guard: int = 12) -> set[WeakTrace]:
    return enumerate_executions(prog, model, guard)[0]


def enumerate_executions(
    prog: Program, model: Model | str, guard: int = 12
) -> tuple[set[WeakTrace], set[WeakTrace]]:
    """(all consistent weak traces, those whose execution failed an assert)."""
    if prog.n_transactions > guard:
        raise GuardExceeded(f"{prog.n_transactions} transactions exceed the oracle guard of {guard}")
    engine = engine_for(model)
    code = [[compile_body(t.body) for t in p.transactions] for p in prog.processes]
    n = len(prog.processes)
    results: set[WeakTrace] = set()
    failing: set[WeakTrace] = set()
    seen: set = set()

    def dfs(pos: tuple, regs: tuple, tr: Trace, blocked: bool, failed: bool) -> None:
        key = (pos, tuple(tuple(sorted(r.items())) for r in regs), frozenset(tr.rf_edges()), blocked, failed)
        if key in seen:
            return
        seen.add(key)
        done = True
        for p in range(n):
            if pos[p] >= len(code[p]):
                continue
            done = False
            t = Tid(p, pos[p])
            for r2, tr2, b, fails in run_transaction(code[p][pos[p]], t, regs[p], tr):
                if not engine.consistent(tr2):
                    continue
                npos = pos[:p] + (pos[p] + 1,) + pos[p + 1 :]
                nregs = regs[:p] + (r2,) + regs[p + 1 :]
                dfs(npos, nregs, tr2, blocked or b, failed or bool(fails))
        if done and not blocked:
            wt = tr.weaken()
            results.add(wt)
            if failed:
                failing.add(wt)

    dfs((0,) * n, tuple({} for _ in range(n)), Trace(prog.shared_vars), False, False)
    return results, failing
