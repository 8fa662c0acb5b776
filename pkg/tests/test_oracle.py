import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import programs, random_run
from txsmc.oracle import GuardExceeded, enumerate_executions, enumerate_weak_traces
from txsmc.oracle.operational import (
    Disabled, configuration_trace, enumerate_operational, initial_configuration, maximal_entries, step,
)
from txsmc.prog import parse_file, parse_program
from txsmc.trace import Tid

TWO = """
var x; var y;
process p1 { transaction t1 { x := 1; y := 1; } }
process p2 { transaction t3 { y := 2; r := x; } transaction t4 { s := y; } }
"""


def run(cfg, *labels):
    for lab in labels:
        cfg = step(cfg, lab)
    return cfg


def test_ccv_delivery_uses_ids():
    prog = parse_program(TWO)
    t1, t3 = Tid(0, 0), Tid(1, 0)
    cfg = run(
        initial_configuration(prog, "ccv"),
        ("begin", 0, 1), ("exec", 0), ("exec", 0), ("end", 0),
        ("begin", 1, 3), ("exec", 1), ("exec", 1), ("end", 1),
    )
    assert cfg.ls[1].regs["r"] == 0
    cfg = step(cfg, ("del", 1, t1))
    store = cfg.ls[1].store
    # t1 carries the smaller id: x is new at p2 but y keeps t3's value
    assert store["x"][:2] == (1, t1)
    assert store["y"][:2] == (2, t3)
    cfg = step(cfg, ("del", 0, t3))
    # p1 converges to the same store
    assert cfg.ls[0].store["y"][:2] == (2, t3)


def test_cc_store_keeps_concurrent_writes():
    prog = parse_program(TWO)
    t1, t3 = Tid(0, 0), Tid(1, 0)
    cfg = run(
        initial_configuration(prog, "cc"),
        ("begin", 0, {}), ("exec", 0), ("exec", 0), ("end", 0),
        ("begin", 1, {}), ("exec", 1), ("exec", 1), ("end", 1),
        ("del", 1, t1),
    )
    assert maximal_entries(cfg.ls[1].store["y"]) == [t1, t3]
    with pytest.raises(Disabled):
        step(cfg, ("begin", 1, {}))
    for pick, value in ((t1, 1), (t3, 2)):
        done = run(cfg, ("begin", 1, {"y": pick}), ("exec", 1), ("end", 1))
        assert done.ls[1].regs["s"] == value


def test_disabled_steps():
    prog = parse_program(TWO)
    cfg = initial_configuration(prog, "ccv")
    with pytest.raises(Disabled):
        step(cfg, ("exec", 0))
    with pytest.raises(Disabled):
        step(cfg, ("end", 0))
    with pytest.raises(Disabled):
        step(cfg, ("del", 1, Tid(0, 0)))
    cfg = run(cfg, ("begin", 0, 1))
    with pytest.raises(Disabled):
        step(cfg, ("end", 0))
    cfg = run(cfg, ("exec", 0), ("exec", 0), ("end", 0), ("begin", 1, 3))
    # no delivery while p2 is inside a transaction
    with pytest.raises(Disabled):
        step(cfg, ("del", 1, Tid(0, 0)))
    with pytest.raises(Disabled):
        step(cfg, ("begin", 0, 2))
    with pytest.raises(ValueError):
        step(cfg, ("jump", 0))


def test_ccv_id_must_exceed_timestamps():
    prog = parse_program(TWO)
    cfg = run(
        initial_configuration(prog, "ccv"),
        ("begin", 0, 5), ("exec", 0), ("exec", 0), ("end", 0),
        ("del", 1, Tid(0, 0)),
    )
    with pytest.raises(Disabled):
        step(cfg, ("begin", 1, 4))
    step(cfg, ("begin", 1, 6))


def test_causal_delivery_is_enforced():
    prog = parse_program("""
    var x; var y;
    process a { transaction { x := 1; } }
    process b { transaction { r := x; y := 1; } }
    process c { transaction { s := y; } }
    """)
    a, b = Tid(0, 0), Tid(1, 0)
    cfg = run(
        initial_configuration(prog, "ccv"),
        ("begin", 0, 1), ("exec", 0), ("end", 0),
        ("del", 1, a),
        ("begin", 1, 2), ("exec", 1), ("exec", 1), ("end", 1),
    )
    with pytest.raises(Disabled):
        step(cfg, ("del", 2, b))
    cfg = run(cfg, ("del", 2, a), ("del", 2, b))
    assert cfg.ls[2].store["y"][0] == 1


@pytest.mark.parametrize("model", ["ccv", "cc"])
@pytest.mark.parametrize("name", ["lost_update", "long_fork", "write_skew", "causality_violation", "repeated_read_2"])
def test_operational_equals_axiomatic_on_corpus(bench, name, model):
    prog = parse_file(bench / f"{name}.tpl")
    assert enumerate_operational(prog, model) == enumerate_weak_traces(prog, model)


@settings(max_examples=30)
@given(programs())
def test_operational_equals_axiomatic(prog):
    for model in ("ccv", "cc"):
        assert enumerate_operational(prog, model) == enumerate_weak_traces(prog, model)


@settings(max_examples=30)
@given(programs(), st.integers(0, 2**32 - 1))
def test_random_runs_are_enumerated(prog, seed):
    rng = random.Random(seed)
    for model in ("ccv", "cc"):
        cfg = random_run(prog, model, rng)
        if cfg.blocked:
            continue
        assert configuration_trace(cfg) in enumerate_weak_traces(prog, model)


@settings(max_examples=30)
@given(programs())
def test_cc_allows_more_than_ccv(prog):
    assert enumerate_weak_traces(prog, "ccv") <= enumerate_weak_traces(prog, "cc")


def test_guards():
    big = parse_program("var x; " + " ".join(
        f"process p{i} {{ transaction {{ x := {i}; }} }}" for i in range(14)))
    with pytest.raises(GuardExceeded):
        enumerate_weak_traces(big, "ccv")
    with pytest.raises(GuardExceeded):
        enumerate_operational(big, "ccv")


def test_enumerate_executions_reports_failures(bench):
    prog = parse_file(bench / "lost_update.tpl")
    traces, failing = enumerate_executions(prog, "ccv")
    assert failing and failing <= traces
