"""Per-period budget assignment and overflow throttling.

In BwLock mode each boundary re-activates throttled cores, counts the cores
whose running task holds a bandwidth lock, and gives lock holders an
unlimited budget while everyone else gets the ``minperf`` budget.  A core
whose budget runs out is throttled until the next boundary.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from .bwlock import effective_lock
from .kernel import UNLIMITED
from .memory import LINE_BYTES

UNREGULATED, BWLOCK, MEMGUARD = "unregulated", "bwlock", "memguard"
MODES = (UNREGULATED, BWLOCK, MEMGUARD)
MAXPERF = None  # unlimited budget


@dataclass(frozen=True)
class RegulatorConfig:
    period: int = 1_000_000  # ns
    minperf_MBps: float = 100.0
    mode: str = BWLOCK

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown regulator mode {self.mode!r}")
        if self.period <= 0:
            raise ValueError("period must be positive")
        if not self.minperf_MBps > 0:
            raise ValueError("minperf_MBps must be > 0")


def lines_per_period(MBps, period):
    """Whole 64-byte lines per ``period`` ns at ``MBps`` (10**6 bytes/s)."""
    if MBps < 0:
        raise ValueError("bandwidth must be >= 0")
    exact = Fraction(MBps) * 10**6 * period / (LINE_BYTES * 10**9)
    return math.floor(exact)


@dataclass
class BudgetState:
    assigned: list  # lines per core, MAXPERF for unlimited
    holders: list

    @property
    def remaining(self):
        return list(self.assigned)


class Regulator:
    def __init__(self, cfg, n_cores, memguard=None):
        self.cfg = cfg
        self.n_cores = n_cores
        self.minperf_lines = lines_per_period(cfg.minperf_MBps, cfg.period)
        self.memguard = memguard
        if cfg.mode == MEMGUARD and memguard is None:
            raise ValueError("memguard mode needs a MemGuard instance")

    def on_period_boundary(self, S, usage):
        """Reset throttling and program every core's budget for the new period."""
        S.throttled[:] = 0
        holders = [effective_lock(S, c) > 0 for c in range(self.n_cores)]
        mode = self.cfg.mode
        if mode == MEMGUARD:
            assigned = self.memguard.period_boundary(usage)
        elif mode == BWLOCK and any(holders):
            assigned = [MAXPERF if h else self.minperf_lines for h in holders]
        else:
            assigned = [MAXPERF] * self.n_cores
        for c, b in enumerate(assigned):
            S.budget_rem[c] = UNLIMITED if b is MAXPERF else b
        S.overflow[:] = 0
        return BudgetState(assigned=assigned, holders=holders)

    def on_overflow(self, S, core):
        """Budget exhausted mid-period: refill (MemGuard reclaim) or throttle."""
        S.overflow[core] = 0
        if self.cfg.mode == MEMGUARD:
            extra = self.memguard.on_overflow(core)
            if extra > 0:
                S.budget_rem[core] += extra
                return False
        S.throttled[core] = 1
        return True
