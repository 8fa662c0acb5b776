"""Random small programs for differential testing."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .prog import Assert, BinOp, Const, If, Process, Program, Reg, SharedRead, SharedWrite, Transaction


@dataclass(frozen=True)
class GenConfig:
    max_procs: int = 3
    max_txns: int = 2
    max_instrs: int = 3
    n_vars: int = 2
    # chance that an instruction slot becomes an if over a register
    p_branch: float = 0.1
    p_assert: float = 0.1


def random_program(rng: random.Random, cfg: GenConfig = GenConfig()) -> Program:
    variables = tuple("xyzwuv"[: cfg.n_vars])
    procs = []
    counter = 0
    for p in range(rng.randint(1, cfg.max_procs)):
        regs: list[str] = []
        txns = []
        for _ in range(rng.randint(1, cfg.max_txns)):
            body = []
            for _ in range(rng.randint(0, cfg.max_instrs)):
                counter += 1
                roll = rng.random()
                if regs and roll < cfg.p_branch:
                    cond = BinOp("==", Reg(rng.choice(regs)), Const(rng.randint(0, 2)))
                    body.append(If(cond, (SharedWrite(rng.choice(variables), Const(counter)),)))
                elif regs and roll < cfg.p_branch + cfg.p_assert:
                    body.append(Assert(BinOp("!=", Reg(rng.choice(regs)), Const(rng.randint(1, counter))), counter))
                elif rng.random() < 0.5:
                    r = f"r{p}_{len(regs)}"
                    regs.append(r)
                    body.append(SharedRead(r, rng.choice(variables)))
                elif regs and rng.random() < 0.3:
                    body.append(SharedWrite(rng.choice(variables), BinOp("+", Reg(rng.choice(regs)), Const(1))))
                else:
                    body.append(SharedWrite(rng.choice(variables), Const(counter)))
            txns.append(Transaction(tuple(body)))
        procs.append(Process(f"p{p}", tuple(txns)))
    return Program(variables, tuple(procs))


def random_programs(seed: int, count: int, cfg: GenConfig = GenConfig()) -> list[Program]:
    rng = random.Random(seed)
    return [random_program(rng, cfg) for _ in range(count)]

