import pytest
from hypothesis import given, settings

from helpers import programs
from txsmc.dpor import BudgetExceeded, Event, ExploreConfig, explore, schedule_dedup, schedule_key
from txsmc.oracle import enumerate_weak_traces
from txsmc.prog import parse_file, parse_program
from txsmc.trace import Tid


def dpor_example(bench):
    return parse_file(bench / "worked" / "dpor_example.tpl")


def test_dpor_example_trace_count(bench):
    r = explore(dpor_example(bench), "ccv")
    assert len(r.traces) == 13
    assert r.duplicates == 0
    assert r.trace_count == 13
    assert r.complete and r.verdict == "SAFE"


def test_dpor_example_cc_matches_oracle(bench):
    prog = dpor_example(bench)
    r = explore(prog, "cc")
    assert r.traces == enumerate_weak_traces(prog, "cc")
    assert r.duplicates == 0


def test_single_transaction():
    r = explore(parse_program("var x; process p { transaction { x := 1; r := x; } }"))
    assert len(r.traces) == 1 and r.verdict == "SAFE"


def test_empty_transaction_body():
    r = explore(parse_program("var x; process p { transaction { } }"))
    assert len(r.traces) == 1 and r.verdict == "SAFE"


def test_internal_read_takes_own_write():
    r = explore(parse_program("var x; process p { transaction { x := 3; r := x; assert(r == 3); } }"))
    assert r.verdict == "SAFE"


def test_assert_failure_is_reported():
    prog = parse_program(
        "var x; process a { transaction { x := 1; } } process b { transaction { r := x; assert(r == 0); } }"
    )
    r = explore(prog)
    assert r.verdict == "UNSAFE"
    assert len(r.violations) == 1
    v = r.violations[0]
    assert any(e.kind == "read" and e.src == Tid(0, 0) for e in v.sequence)


def test_assume_prunes_executions():
    prog = parse_program(
        "var x; process a { transaction { x := 1; } } "
        "process b { transaction { r := x; assume(r == 0); assert(r == 0); } }"
    )
    r = explore(prog)
    assert r.verdict == "SAFE"
    assert r.stats.blocked >= 1


def test_stop_at_first_marks_incomplete(bench):
    prog = parse_file(bench / "lost_update.tpl")
    full = explore(prog, "ccv")
    first = explore(prog, "ccv", ExploreConfig(stop_at_first=True))
    assert full.verdict == first.verdict == "UNSAFE"
    assert not first.complete
    assert len(first.traces) <= len(full.traces)


def test_trace_budget(bench):
    with pytest.raises(BudgetExceeded):
        explore(dpor_example(bench), "ccv", ExploreConfig(max_traces=5))


def test_node_budget(bench):
    with pytest.raises(BudgetExceeded):
        explore(dpor_example(bench), "ccv", ExploreConfig(max_nodes=10))


def test_budget_not_hit_when_large(bench):
    r = explore(dpor_example(bench), "ccv", ExploreConfig(max_traces=13, max_nodes=10_000))
    assert len(r.traces) == 13


def test_schedule_key_ignores_interleaving():
    a, b = Tid(0, 0), Tid(1, 0)
    s1 = (Event("begin", a), Event("end", a), Event("begin", b), Event("read", b, "x", a), Event("end", b))
    s2 = (Event("begin", b), Event("begin", a), Event("end", a), Event("read", b, "x", a), Event("end", b))
    s3 = (Event("begin", b), Event("read", b, "x", Tid(-1, 0)), Event("end", b))
    assert schedule_key(s1) == schedule_key(s2)
    assert not schedule_dedup([s1], s2)
    assert schedule_dedup([s1], s3)


def test_event_rendering():
    variables = ("x",)
    assert Event("read", Tid(0, 0), "x", Tid(-1, 0)).show(variables) == "(read,p0.t0,x,init_x)"


@settings(max_examples=40)
@given(programs())
def test_explorer_equals_oracle_ccv(prog):
    r = explore(prog, "ccv", ExploreConfig(paranoid=True))
    assert r.traces == enumerate_weak_traces(prog, "ccv")
    assert r.duplicates == 0


@settings(max_examples=40)
@given(programs())
def test_explorer_equals_oracle_cc(prog):
    r = explore(prog, "cc", ExploreConfig(paranoid=True))
    assert r.traces == enumerate_weak_traces(prog, "cc")
    assert r.duplicates == 0


@settings(max_examples=30)
@given(programs())
def test_ccv_traces_are_cc_traces(prog):
    assert explore(prog, "ccv").traces <= explore(prog, "cc").traces


@settings(max_examples=30)
@given(programs())
def test_exploration_is_deterministic(prog):
    a, b = explore(prog, "ccv"), explore(prog, "ccv")
    assert a.traces == b.traces
    assert [v.sequence for v in a.violations] == [v.sequence for v in b.violations]


def test_stale_read_after_indirect_coherence():
    # t2 reads x from t1 after t3 already reached it through u, so t3 is
    # co-before t1; t5 must then not read x from t3
    prog = parse_program("""
    var x; var y;
    process a { transaction t1 { x := 1; } }
    process b { transaction t2 { r1 := x; r2 := y; } transaction t5 { r3 := x; } }
    process c { transaction t3 { x := 2; } transaction u { y := 1; } }
    """)
    t1, t2, t5, t3, u = Tid(0, 0), Tid(1, 0), Tid(1, 1), Tid(2, 0), Tid(2, 1)
    stale = {(t1, t2, "x"), (u, t2, "y"), (t3, t5, "x")}
    r = explore(prog, "ccv", ExploreConfig(paranoid=True))
    assert r.traces == enumerate_weak_traces(prog, "ccv")
    assert not any(stale <= set(wt.rf) for wt in r.traces)
    assert any(stale <= set(wt.rf) for wt in explore(prog, "cc").traces)
