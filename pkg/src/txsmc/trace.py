"""Traces: transactions linked by program order, reads-from and coherence.

Nodes are transaction ids.  Every shared variable x has its own
initializer node ``init_x`` that writes 0 to x.  Initializers are treated as
causally before every program transaction: they precede all other nodes in
both the [po u rf]+ and the [po u rf u co]+ closures, and ``init_x`` is the
co-minimal writer of x.  These implicit edges are never stored.

Reachability is computed with bitset transitive closures that are cached
and dropped on every mutation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

INIT = -1


class Tid(NamedTuple):
    """Transaction id: (process index, position in process).

    Initializers use proc == INIT and pos == variable index.  Tuple order
    puts initializers first, then lexicographic (process, position).
    """

    proc: int
    pos: int

    @property
    def is_init(self) -> bool:
        return self.proc == INIT

    def __str__(self) -> str:
        return f"init#{self.pos}" if self.is_init else f"p{self.proc}.t{self.pos}"


def tid_name(t: Tid, variables: tuple[str, ...]) -> str:
    return f"init_{variables[t.pos]}" if t.is_init else f"p{t.proc}.t{t.pos}"


def parse_tid(name: str, variables: tuple[str, ...]) -> Tid:
    if name.startswith("init_"):
        return Tid(INIT, variables.index(name[5:]))
    p, t = name.split(".")
    if not (p.startswith("p") and t.startswith("t")):
        raise ValueError(f"bad transaction name {name!r}")
    return Tid(int(p[1:]), int(t[1:]))


def _closure(succ: list[int]) -> list[int]:
    """Transitive closure (irreflexive unless on a cycle) on bit rows."""
    reach = list(succ)
    n = len(reach)
    for k in range(n):
        bk = 1 << k
        rk = reach[k]
        if not rk:
            continue
        for i in range(n):
            if reach[i] & bk:
                reach[i] |= rk
    return reach


def transpose(reach: list[int]) -> list[int]:
    n = len(reach)
    pred = [0] * n
    for i in range(n):
        r = reach[i]
        while r:
            low = r & -r
            pred[low.bit_length() - 1] |= 1 << i
            r ^= low
    return pred


def bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class Trace:
    """A partial trace (T, po, rf, co) over a fixed set of shared variables.

    Internally nodes are numbered; initializers take indices 0..|V|-1.
    """

    __slots__ = ("variables", "ids", "index", "writes", "po_prev", "rf", "co", "_porf", "_hb", "_init_mask")

    def __init__(self, variables: Iterable[str]):
        self.variables: tuple[str, ...] = tuple(variables)
        self.ids: list[Tid] = [Tid(INIT, i) for i in range(len(self.variables))]
        self.index: dict[Tid, int] = {t: i for i, t in enumerate(self.ids)}
        # per node: var -> last value written
        self.writes: list[dict[str, int]] = [{v: 0} for v in self.variables]
        self.po_prev: list[int] = [-1] * len(self.variables)
        # (reader index, var) -> source index
        self.rf: dict[tuple[int, str], int] = {}
        self.co: set[tuple[int, int, str]] = set()
        self._porf: list[int] | None = None
        self._hb: list[int] | None = None
        self._init_mask = (1 << len(self.variables)) - 1

    # -- construction -----------------------------------------------------

    def copy(self) -> "Trace":
        tr = Trace.__new__(Trace)
        tr.variables = self.variables
        tr.ids = list(self.ids)
        tr.index = dict(self.index)
        tr.writes = [dict(w) for w in self.writes]
        tr.po_prev = list(self.po_prev)
        tr.rf = dict(self.rf)
        tr.co = set(self.co)
        tr._porf = self._porf
        tr._hb = self._hb
        tr._init_mask = self._init_mask
        return tr

    def _dirty(self) -> None:
        self._porf = None
        self._hb = None

    def add_transaction(self, t: Tid) -> None:
        if t in self.index:
            raise ValueError(f"transaction {t} already present")
        if t.is_init:
            raise ValueError("initializers are implicit")
        prev = -1
        # po edge from the latest earlier transaction of the same process
        for i, u in enumerate(self.ids):
            if u.proc == t.proc and u.pos < t.pos and (prev < 0 or self.ids[prev].pos < u.pos):
                prev = i
        self.index[t] = len(self.ids)
        self.ids.append(t)
        self.writes.append({})
        self.po_prev.append(prev)
        self._dirty()

    def add_write(self, t: Tid, var: str, value: int) -> None:
        # writes do not change any closure
        self.writes[self.index[t]][var] = value

    def add_rf(self, src: Tid, dst: Tid, var: str) -> None:
        s, d = self.index[src], self.index[dst]
        if var not in self.writes[s]:
            raise ValueError(f"{src} does not write {var}")
        self.rf[(d, var)] = s
        self._dirty()

    def add_co(self, a: Tid, b: Tid, var: str) -> None:
        self._add_co_idx(self.index[a], self.index[b], var)

    def _add_co_idx(self, a: int, b: int, var: str) -> None:
        if a != b and a >= len(self.variables):
            self.co.add((a, b, var))
            self._dirty()

    # -- queries ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, t: Tid) -> bool:
        return t in self.index

    @property
    def transactions(self) -> list[Tid]:
        """Program transactions (initializers excluded)."""
        return self.ids[len(self.variables) :]

    def init(self, var: str) -> Tid:
        return Tid(INIT, self.variables.index(var))

    def writes_var(self, t: Tid, var: str) -> bool:
        return var in self.writes[self.index[t]]

    def value(self, t: Tid, var: str) -> int:
        return self.writes[self.index[t]][var]

    def written_vars(self, t: Tid) -> frozenset[str]:
        return frozenset(self.writes[self.index[t]])

    def writers(self, var: str) -> list[Tid]:
        return [t for i, t in enumerate(self.ids) if var in self.writes[i]]

    def writer_mask(self, var: str) -> int:
        m = 0
        for i, w in enumerate(self.writes):
            if var in w:
                m |= 1 << i
        return m

    def reads_of(self, t: Tid) -> dict[str, Tid]:
        d = self.index[t]
        return {v: self.ids[s] for (r, v), s in self.rf.items() if r == d}

    def rf_edges(self) -> list[tuple[Tid, Tid, str]]:
        return sorted((self.ids[s], self.ids[d], v) for (d, v), s in self.rf.items())

    def co_edges(self) -> list[tuple[Tid, Tid, str]]:
        return sorted((self.ids[a], self.ids[b], v) for a, b, v in self.co)

    def po_edges(self) -> list[tuple[Tid, Tid]]:
        return sorted((self.ids[p], self.ids[i]) for i, p in enumerate(self.po_prev) if p >= 0)

    def has_outgoing(self, t: Tid) -> bool:
        i = self.index[t]
        return (
            any(p == i for p in self.po_prev)
            or any(s == i for s in self.rf.values())
            or any(a == i for a, _, _ in self.co)
        )

    # -- closures -------------------------------------------------------------

    def _base_succ(self) -> list[int]:
        n = len(self.ids)
        nv = len(self.variables)
        everything = ((1 << n) - 1) & ~self._init_mask
        succ = [everything] * nv + [0] * (n - nv)
        for i, p in enumerate(self.po_prev):
            if p >= 0:
                succ[p] |= 1 << i
        for (d, _), s in self.rf.items():
            succ[s] |= 1 << d
        return succ

    def porf_reach(self) -> list[int]:
        """Row i: bitmask of nodes j with i [po u rf]+ j."""
        if self._porf is None:
            self._porf = _closure(self._base_succ())
        return self._porf

    def hb_reach(self) -> list[int]:
        """Row i: bitmask of nodes j with i [po u rf u co]+ j."""
        if self._hb is None:
            succ = self._base_succ()
            for a, b, _ in self.co:
                succ[a] |= 1 << b
            self._hb = _closure(succ)
        return self._hb

    def co_reach(self, var: str) -> list[int]:
        """Closure of co restricted to var, with init_var below every writer."""
        n = len(self.ids)
        succ = [0] * n
        succ[self.variables.index(var)] = self.writer_mask(var) & ~self._init_mask
        for a, b, v in self.co:
            if v == var:
                succ[a] |= 1 << b
        return _closure(succ)

    def reach_porf(self, a: Tid, b: Tid) -> bool:
        return bool(self.porf_reach()[self.index[a]] >> self.index[b] & 1)

    def reach_hb(self, a: Tid, b: Tid) -> bool:
        return bool(self.hb_reach()[self.index[a]] >> self.index[b] & 1)

    def concurrent(self, a: Tid, b: Tid) -> bool:
        return a != b and not self.reach_porf(a, b) and not self.reach_porf(b, a)

    def is_acyclic(self) -> bool:
        return not any(r >> i & 1 for i, r in enumerate(self.hb_reach()))

    def weaken(self) -> "WeakTrace":
        return WeakTrace(
            self.variables,
            tuple(sorted(self.transactions)),
            tuple(self.po_edges()),
            tuple(self.rf_edges()),
            tuple(sorted((t, tuple(sorted(self.writes[self.index[t]]))) for t in self.transactions)),
        )

    def __repr__(self) -> str:
        name = lambda t: tid_name(t, self.variables)  # noqa: E731
        rf = ", ".join(f"{name(s)}-{v}->{name(d)}" for s, d, v in self.rf_edges())
        co = ", ".join(f"{name(a)}-{v}->{name(b)}" for a, b, v in self.co_edges())
        return f"Trace(T={[name(t) for t in self.transactions]}, rf=[{rf}], co=[{co}])"


# ---------------------------------------------------------------------------
# functional wrappers


def add_transaction(tr: Trace, t: Tid) -> Trace:
    out = tr.copy()
    out.add_transaction(t)
    return out


def reach_hb(tr: Trace, a: Tid, b: Tid) -> bool:
    return tr.reach_hb(a, b)


def reach_porf(tr: Trace, a: Tid, b: Tid) -> bool:
    return tr.reach_porf(a, b)


def concurrent(tr: Trace, a: Tid, b: Tid) -> bool:
    return tr.concurrent(a, b)


def is_acyclic(tr: Trace) -> bool:
    return tr.is_acyclic()


def weaken(tr: Trace) -> "WeakTrace":
    return tr.weaken()


def is_partially_good_ccv(tr: Trace) -> bool:
    """(i) a reader's source is co-after every x-writer that reaches the reader;
    (ii) [po u rf u co]+ is acyclic."""
    if not tr.is_acyclic():
        return False
    porf = tr.porf_reach()
    co_cache: dict[str, list[int]] = {}
    for (d, var), s in tr.rf.items():
        wm = tr.writer_mask(var)
        for w in bits(wm):
            if w == s or not porf[w] >> d & 1:
                continue
            if var not in co_cache:
                co_cache[var] = tr.co_reach(var)
            if not co_cache[var][w] >> s & 1:
                return False
    return True


# ---------------------------------------------------------------------------
# weak traces


@dataclass(frozen=True, order=True)
class WeakTrace:
    """A trace with co erased, in canonical (sorted) form.

    Equality and hashing use (transactions, po, rf) only; the per-transaction
    write sets ride along so the trace can be re-checked on its own.
    """

    variables: tuple[str, ...] = field(compare=False)
    transactions: tuple[Tid, ...]
    po: tuple[tuple[Tid, Tid], ...]
    rf: tuple[tuple[Tid, Tid, str], ...]
    writes: tuple[tuple[Tid, tuple[str, ...]], ...] = field(default=(), compare=False)

    def name(self, t: Tid) -> str:
        return tid_name(t, self.variables)

    def to_trace(self) -> Trace:
        """Rebuild a Trace with empty co.  Written values are not kept, so
        every write is recorded with value 0."""
        tr = Trace(self.variables)
        for t in sorted(self.transactions):
            tr.add_transaction(t)
        for t, vs in self.writes:
            for v in vs:
                tr.add_write(t, v, 0)
        for s, d, v in self.rf:
            tr.add_rf(s, d, v)
        return tr

    def to_json_obj(self) -> dict:
        n = self.name
        return {
            "variables": list(self.variables),
            "transactions": [n(t) for t in self.transactions],
            "po": [[n(a), n(b)] for a, b in self.po],
            "rf": [[n(s), n(d), v] for s, d, v in self.rf],
            "writes": {n(t): list(vs) for t, vs in self.writes},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=1)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "WeakTrace":
        variables = tuple(obj["variables"])
        p = lambda s: parse_tid(s, variables)  # noqa: E731
        transactions = tuple(sorted(p(t) for t in obj["transactions"]))
        po = tuple(sorted((p(a), p(b)) for a, b in obj["po"]))
        rf = tuple(sorted((p(s), p(d), v) for s, d, v in obj["rf"]))
        writes = tuple(sorted((p(t), tuple(sorted(vs))) for t, vs in obj.get("writes", {}).items()))
        for s, d, v in rf:
            if v not in variables:
                raise ValueError(f"unknown variable {v!r} in rf edge")
            if d not in transactions or (not s.is_init and s not in transactions):
                raise ValueError(f"rf edge {s}->{d} mentions an unknown transaction")
            if s.is_init and variables[s.pos] != v:
                raise ValueError(f"rf edge from init_{variables[s.pos]} labelled {v!r}")
        for a, b in po:
            if a.proc != b.proc or a.pos >= b.pos:
                raise ValueError(f"po edge {a}->{b} is not program order")
        return cls(variables, transactions, po, rf, writes)

    @classmethod
    def from_json(cls, text: str) -> "WeakTrace":
        return cls.from_json_obj(json.loads(text))

    def digest(self) -> str:

        key = json.dumps(
            [[self.name(t) for t in self.transactions], [[self.name(a), self.name(b)] for a, b in self.po],
             [[self.name(s), self.name(d), v] for s, d, v in self.rf]],
            separators=(",", ":"),
        )
        return hashlib.sha256(key.encode()).hexdigest()[:16]


def to_dot(tr: Trace | WeakTrace, labels: dict[Tid, str] | None = None) -> str:
    """Graphviz rendering: po solid, rf dashed, co dotted (rf/co labelled)."""
    if isinstance(tr, WeakTrace):
        variables = tr.variables
        nodes = list(tr.transactions)
        po, rf, co = list(tr.po), list(tr.rf), []
    else:
        variables = tr.variables
        nodes = tr.transactions
        po, rf, co = tr.po_edges(), tr.rf_edges(), tr.co_edges()
    name = lambda t: tid_name(t, variables)  # noqa: E731
    used_inits = sorted({s for s, _, _ in rf if s.is_init} | {a for a, _, _ in co if a.is_init})
    lines = ["digraph trace {", "  node [shape=box];"]
    for t in used_inits + nodes:
        extra = f' xlabel="{labels[t]}"' if labels and t in labels else ""
        lines.append(f'  "{name(t)}" [label="{name(t)}"{extra}];')
    for a, b in po:
        lines.append(f'  "{name(a)}" -> "{name(b)}" [style=solid];')
    for s, d, v in rf:
        lines.append(f'  "{name(s)}" -> "{name(d)}" [style=dashed, label="{v}"];')
    for a, b, v in co:
        lines.append(f'  "{name(a)}" -> "{name(b)}" [style=dotted, label="{v}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
