"""Round-based broadcast implementation of the step-up rule, with message accounting.

Every sensor holds its (already transformed) p-value.  In round ``t`` the
common threshold is ``l(i_t) = i_t * gamma / m``; each sensor that falls below
it and has not spoken yet broadcasts once.  The network tracks the running
count and remembers the latest round where ``count_t >= i_t``.  The run stops
after round ``m``, at the first silent round past the ``k_preset`` forced
rounds, or when the message budget runs out.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .pvalues import PValueVector


class Termination(str, enum.Enum):
    REACHED_M = "reached_m"
    SILENT_ROUND = "silent_round"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class ProtocolConfig:
    gamma: float
    k_preset: int = 0
    budget: int | None = None
    dynamic: bool = False

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.k_preset < 0:
            raise ValueError("k_preset must be non-negative")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be non-negative")


@dataclass(frozen=True)
class Round:
    round: int
    i_t: int
    threshold: float
    new_declarations: int
    count: int
    messages: int
    t_max_flag: bool


@dataclass
class ProtocolTrace:
    rounds: list[Round] = field(default_factory=list)
    t_max: int = 0
    terminated_reason: Termination | None = None

    @property
    def messages(self) -> int:
        return self.rounds[-1].messages if self.rounds else 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", "i_t", "threshold", "new_declarations", "count", "t_max_flag"])
            for r in self.rounds:
                w.writerow([r.round, r.i_t, repr(r.threshold), r.new_declarations, r.count, int(r.t_max_flag)])


def _run(pvals, config: ProtocolConfig, dynamic: bool):
    vec = pvals if isinstance(pvals, PValueVector) else PValueVector.from_values(pvals)
    p = vec.values
    m = p.size
    trace = ProtocolTrace()
    if m == 0:
        trace.terminated_reason = Termination.REACHED_M
        return vec.sensor_ids[:0], trace
    if config.k_preset > m:
        raise ValueError("k_preset cannot exceed the number of sensors")

    # ascending p, ties broken by sensor id, so budget truncation is deterministic
    order = np.lexsort((vec.sensor_ids, p))
    ps = p[order]
    declared_round = np.zeros(m, dtype=np.int64)  # 0 = never declared; indexed by sorted position
    budget = config.budget
    count = 0
    t = 0
    while True:
        t += 1
        i_t = t
        m0_hat = m - count if dynamic else m
        threshold = min(i_t * config.gamma / max(m0_hat, 1), 1.0)
        if dynamic and m0_hat <= 0:
            threshold = 1.0
        candidates = int(np.searchsorted(ps, threshold, side="right")) - count
        allowed = candidates if budget is None else max(0, min(candidates, budget - count))
        declared_round[count : count + allowed] = t
        count += allowed
        hit = count >= i_t
        if hit:
            trace.t_max = t
        trace.rounds.append(Round(t, i_t, float(threshold), allowed, count, count, hit))
        if allowed < candidates:
            trace.terminated_reason = Termination.BUDGET_EXHAUSTED
            break
        if i_t >= m:
            trace.terminated_reason = Termination.REACHED_M
            break
        if allowed == 0 and t > config.k_preset:
            trace.terminated_reason = Termination.SILENT_ROUND
            break

    chosen = (declared_round > 0) & (declared_round <= trace.t_max)
    selected = np.sort(vec.sensor_ids[order[chosen]])
    return selected, trace


def run_distributed(pvals, config: ProtocolConfig):
    """Simulate the broadcast rounds; returns ``(selected sensor ids, trace)``."""
    return _run(pvals, config, dynamic=config.dynamic)


def run_dynamic(pvals, config: ProtocolConfig):
    """Variant whose threshold uses the running null-count estimate ``m - count_{t-1}``."""
    return _run(pvals, config, dynamic=True)
