import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from txsmc import explore, parse_file
from txsmc.cc import is_cc_consistent
from txsmc.ccv import fulfill, is_ccv_consistent
from txsmc.oracle.summary import ExecutionSummary, check_legal_summary, summarize, summary_sources
from txsmc.trace import Tid, Trace

P1, P2 = 0, 1
T1, T2, T3, T4 = Tid(0, 0), Tid(0, 1), Tid(1, 0), Tid(1, 1)


def example_trace(t3_source_of_x):
    """t1{x:=1;y:=1} t2{z:=1; r1:=x} | t3{y:=2; r2:=x} t4{r3:=z; r4:=y}"""
    tr = Trace(("x", "y", "z"))
    for t in (T1, T2, T3, T4):
        tr.add_transaction(t)
    tr.add_write(T1, "x", 1)
    tr.add_write(T1, "y", 1)
    tr.add_write(T2, "z", 1)
    tr.add_write(T3, "y", 2)
    tr.add_rf(T1, T2, "x")
    tr.add_rf(t3_source_of_x(tr), T3, "x")
    tr.add_rf(T2, T4, "z")
    tr.add_rf(T3, T4, "y")
    return fulfill(tr)


def late_delivery():
    return ExecutionSummary.of([
        ("isu", P1, T1), ("del", P1, T1), ("isu", P1, T2), ("del", P1, T2),
        ("isu", P2, T3), ("del", P2, T3), ("del", P2, T1), ("del", P2, T2), ("isu", P2, T4),
    ])


def early_delivery():
    return ExecutionSummary.of([
        ("isu", P1, T1), ("del", P1, T1), ("isu", P1, T2), ("del", P1, T2),
        ("del", P2, T1), ("del", P2, T2), ("isu", P2, T3), ("del", P2, T3), ("isu", P2, T4),
    ])


def test_first_summary_is_legal():
    tr = example_trace(lambda tr: tr.init("x"))
    assert is_ccv_consistent(tr)
    assert check_legal_summary(late_delivery(), tr, "ccv")
    srcs = summary_sources(late_delivery(), tr, "ccv")
    # t3's id exceeds t1's, so p2 keeps y = 2
    assert srcs[(T4, "y")] == {T3}
    assert srcs[(T3, "x")] == {tr.init("x")}


def test_early_delivery_changes_what_t3_reads():
    tr = example_trace(lambda tr: tr.init("x"))
    assert not check_legal_summary(early_delivery(), tr, "ccv")
    variant = example_trace(lambda tr: T1)
    assert is_ccv_consistent(variant)
    assert check_legal_summary(early_delivery(), variant, "ccv")
    assert not check_legal_summary(late_delivery(), variant, "ccv")


def test_delivery_before_issue_is_illegal():
    tr = example_trace(lambda tr: tr.init("x"))
    ev = list(late_delivery().events)
    ev.remove(("del", P2, T1))
    ev.insert(0, ("del", P2, T1))
    assert not check_legal_summary(ExecutionSummary.of(ev), tr, "ccv")


def test_issue_out_of_program_order_is_illegal():
    tr = example_trace(lambda tr: tr.init("x"))
    ev = list(late_delivery().events)
    i, j = ev.index(("isu", P2, T3)), ev.index(("isu", P2, T4))
    ev[i], ev[j] = ev[j], ev[i]
    assert not check_legal_summary(ExecutionSummary.of(ev), tr, "ccv")


def test_malformed_summaries():
    tr = example_trace(lambda tr: tr.init("x"))
    ev = list(late_delivery().events)
    assert not check_legal_summary(ExecutionSummary.of(ev[:-1]), tr, "ccv")
    assert not check_legal_summary(ExecutionSummary.of(ev + [ev[0]]), tr, "ccv")
    wrong_proc = [("isu", P2, T1) if e == ("isu", P1, T1) else e for e in ev]
    assert not check_legal_summary(ExecutionSummary.of(wrong_proc), tr, "ccv")
    with pytest.raises(ValueError):
        summary_sources(ExecutionSummary.of(ev[:-1]), tr, "ccv")


def test_single_transaction():
    tr = Trace(("x",))
    tr.add_transaction(T1)
    tr.add_write(T1, "x", 1)
    s = summarize(tr, "ccv")
    assert [e.kind for e in s.events] == ["isu", "del"]
    assert check_legal_summary(s, tr, "ccv") and check_legal_summary(s, tr, "cc")


def test_summary_rendering():
    assert late_delivery().show().startswith("isu(p0,")


@pytest.mark.parametrize("model", ["ccv", "cc"])
def test_summaries_of_explored_traces(bench, model):
    for name in ("worked/dpor_example", "long_fork", "causality_violation", "write_skew"):
        for wt in explore(parse_file(bench / f"{name}.tpl"), model).traces:
            tr = wt.to_trace()
            if model == "ccv":
                tr = fulfill(tr)
            s = summarize(tr, model)
            assert check_legal_summary(s, tr, model)
            srcs = summary_sources(s, tr, model)
            for (d, x), src in tr.rf.items():
                assert tr.ids[src] in srcs[(tr.ids[d], x)]
                if model == "ccv":
                    assert srcs[(tr.ids[d], x)] == {tr.ids[src]}


def tiny_trace(rng: random.Random) -> Trace:
    variables = ("x", "y")
    tr = Trace(variables)
    pos = [0, 0]
    tids = []
    for _ in range(rng.randint(2, 3)):
        p = rng.randrange(2)
        t = Tid(p, pos[p])
        pos[p] += 1
        tr.add_transaction(t)
        tids.append(t)
    for t in tids:
        for v in variables:
            if rng.random() < 0.4:
                tr.add_write(t, v, 1)
    for t in tids:
        for v in variables:
            if tr.writes_var(t, v) or rng.random() < 0.4:
                continue
            src = rng.choice([tr.init(v)] + [w for w in tr.writers(v) if w != t and not w.is_init])
            tr.add_rf(src, t, v)
    return tr


def all_summaries(tr: Trace):
    txns = tr.transactions
    events = [("isu", t.proc, t) for t in txns]
    events += [("del", p, t) for t in txns if tr.written_vars(t) for p in (0, 1) if p != t.proc]
    for perm in itertools.permutations(events):
        yield ExecutionSummary.of(perm)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_legal_summary_exists_iff_consistent(seed):
    tr = tiny_trace(random.Random(seed))
    for model, consistent in (("ccv", is_ccv_consistent(fulfill(tr))), ("cc", is_cc_consistent(tr))):
        exists = any(check_legal_summary(s, tr, model) for s in all_summaries(tr))
        assert exists == consistent, model
        if consistent:
            base = fulfill(tr) if model == "ccv" else tr
            assert check_legal_summary(summarize(base, model), base, model)
