"""Simplified MemGuard baseline: static per-core reservations plus reclaiming.

The predictor and pool arbitration are a reconstruction: an EWMA of each
core's per-period usage sets its assignment, unused reservation goes to a
shared pool, and a core that exhausts its assignment first takes back its own
donation, then draws reserve-sized chunks from the pool (lowest core id first,
because overflows are handled in core order).
"""

import math
from dataclasses import dataclass, field

from .regulator import lines_per_period


@dataclass(frozen=True)
class MemGuardConfig:
    reserve_MBps: tuple = (450.0, 450.0, 100.0, 100.0)
    reclaim: bool = True
    ewma_alpha: float = 0.5
    guaranteed_MBps: float = 1200.0

    def __post_init__(self):
        object.__setattr__(self, "reserve_MBps", tuple(float(r) for r in self.reserve_MBps))
        if not 0.0 < self.ewma_alpha <= 1.0:
            raise ValueError("ewma_alpha must be in (0, 1]")
        if any(r < 0 for r in self.reserve_MBps):
            raise ValueError("reservations must be >= 0")
        if sum(self.reserve_MBps) > self.guaranteed_MBps:
            raise ValueError(
                f"reservations sum to {sum(self.reserve_MBps)} MB/s, above the "
                f"guaranteed bandwidth {self.guaranteed_MBps} MB/s")


def predict_usage(history, ewma_alpha, initial=0.0):
    """EWMA of per-period consumed lines; an empty history predicts ``initial``."""
    p = float(initial)
    for u in history:
        p = ewma_alpha * u + (1.0 - ewma_alpha) * p
    return p


@dataclass
class MemGuardState:
    reserve: list
    prediction: list
    assigned: list = field(default_factory=list)
    own_back: list = field(default_factory=list)
    pool: int = 0


class MemGuard:
    def __init__(self, cfg, n_cores, period):
        if len(cfg.reserve_MBps) != n_cores:
            raise ValueError(f"need {n_cores} reservations, got {len(cfg.reserve_MBps)}")
        self.cfg = cfg
        reserve = [lines_per_period(r, period) for r in cfg.reserve_MBps]
        self.state = MemGuardState(reserve=reserve, prediction=[0.0] * n_cores)
        self._started = False

    def period_boundary(self, usage):
        """Assign this period's budgets from last period's per-core usage."""
        st = self.state
        a = self.cfg.ewma_alpha
        if self._started:
            st.prediction = [a * u + (1.0 - a) * p for u, p in zip(usage, st.prediction)]
        self._started = True
        if self.cfg.reclaim:
            st.assigned = [min(int(math.floor(p)), r) for p, r in zip(st.prediction, st.reserve)]
        else:
            st.assigned = list(st.reserve)
        st.own_back = [r - x for r, x in zip(st.reserve, st.assigned)]
        st.pool = sum(st.own_back)
        return list(st.assigned)

    def on_overflow(self, core):
        """Extra lines granted to an exhausted core; 0 means throttle it."""
        if not self.cfg.reclaim:
            return 0
        st = self.state
        back = st.own_back[core]
        if back > 0:
            st.own_back[core] = 0
            st.pool -= min(st.pool, back)
            return back
        if st.pool > 0:
            amt = min(st.pool, max(st.reserve[core], 1))
            st.pool -= amt
            return amt
        return 0
