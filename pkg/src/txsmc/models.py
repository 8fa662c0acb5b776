"""Consistency engines: the per-model operations the explorer needs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from . import cc, ccv
from .trace import Trace


class Model(str, Enum):
    CCV = "ccv"
    CC = "cc"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Engine:
    model: Model
    readable: Callable[[ccv.ReadContext], set]
    apply_read: Callable[..., Trace]
    consistent: Callable[[Trace], bool]
    # predicates every explored trace has to satisfy
    fulfilled: Callable[[Trace], bool]
    partially_good: Callable[[Trace], bool]
    # CreateSchedule rejects swaps that would close a coherence cycle
    has_co: bool


CCV_ENGINE = Engine(
    Model.CCV,
    ccv.readable_set,
    ccv.apply_read,
    ccv.is_ccv_consistent,
    ccv.is_fulfilled_ccv,
    ccv.is_partially_good_ccv,
    True,
)

CC_ENGINE = Engine(
    Model.CC,
    cc.readable_set_cc,
    cc.apply_read_cc,
    cc.is_cc_consistent,
    cc.is_fulfilled_cc,
    cc.is_partially_good_cc,
    False,
)


def engine_for(model: Model | str) -> Engine:
    return CCV_ENGINE if Model(model) is Model.CCV else CC_ENGINE
