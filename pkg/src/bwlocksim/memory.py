"""Shared-memory contention model.

Two mechanisms act on every quantum:

* bandwidth division: per-core line demands are granted by max-min fair
  (water-filling) allocation against the DRAM service capacity;
* latency inflation: every line fetched by a core pays an extra queueing
  delay ``L0 * (phi - 1)`` where ``phi`` grows with the utilization caused by
  the *other* cores (a core never queues behind its own single stream of
  misses).

A fully serialized access therefore costs ``L0 * phi``, and a burst whose
misses overlap with compute is only slowed by the queueing part.
"""

from dataclasses import dataclass, asdict

LINE_BYTES = 64


@dataclass(frozen=True)
class ContentionModel:
    peak_Bps: float = 2.4e9
    L0: float = 80.0  # ns, solo serialized line-fetch latency
    U0: float = 0.3  # utilization knee
    alpha: float = 6.0
    phi_max: float = 3.0

    def __post_init__(self):
        if not 0.0 <= self.U0 < 1.0:
            raise ValueError(f"U0 must be in [0, 1), got {self.U0}")
        if self.phi_max < 1.0:
            raise ValueError(f"phi_max must be >= 1, got {self.phi_max}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.peak_Bps <= 0 or self.L0 <= 0:
            raise ValueError("peak_Bps and L0 must be positive")

    def capacity_lines(self, quantum_ns: int) -> int:
        """Whole cache lines the memory system can serve in one quantum."""
        return int(self.peak_Bps * quantum_ns // (LINE_BYTES * 1_000_000_000))

    def as_dict(self):
        return asdict(self)


def bytes_to_lines(nbytes: float) -> int:
    return int(round(nbytes / LINE_BYTES))


def allocate(demands, capacity):
    """Max-min fair integer allocation of ``capacity`` lines.

    Demanders are visited smallest first; anyone asking for no more than the
    current equal share is served in full.  Once the smallest remaining demand
    exceeds the share, every remaining demander gets ``R // k`` lines and the
    ``R % k`` leftover lines go one each to the lowest core ids.
    """
    n = len(demands)
    grants = [0] * n
    if capacity <= 0 or n == 0:
        return grants
    order = sorted(range(n), key=lambda i: (demands[i], i))
    remaining = int(capacity)
    k = n
    for pos, i in enumerate(order):
        d = int(demands[i])
        share = remaining // k
        if d <= share:
            grants[i] = d
            remaining -= d
            k -= 1
            continue
        rest = sorted(order[pos:])
        extra = remaining - share * k
        for j in rest:
            grants[j] = share + (1 if extra > 0 else 0)
            if extra > 0:
                extra -= 1
        break
    return grants


def inflation_factor(total_demand, capacity, model: ContentionModel) -> float:
    """Per-access latency multiplier for utilization ``total_demand / capacity``.

    Flat at 1 up to the knee ``U0``, quadratic above it and capped at
    ``phi_max``.
    """
    if capacity <= 0:
        return model.phi_max if total_demand > 0 else 1.0
    u = float(total_demand) / capacity
    return phi_of_utilization(u, model.U0, model.alpha, model.phi_max)


def phi_of_utilization(u, U0, alpha, phi_max):
    # same operation order as the kernels; do not refactor into ** 2
    if u <= U0:
        return 1.0
    d = u - U0
    phi = 1.0 + alpha * d * d
    if phi > phi_max:
        return phi_max
    return phi
