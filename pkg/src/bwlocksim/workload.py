"""Task programs and the generators for the three workload archetypes.

A task executes a (usually looping) list of instructions:

``Compute(cycles)``
    pure CPU work.
``MemBurst(lines, cycles)``
    ``lines`` cache-line misses spread evenly over ``cycles`` of overlapped
    compute.  Runs at ``cycles / freq`` when unimpeded.
``SerialMem(accesses)``
    dependent (pointer-chasing) misses, one outstanding at a time.
``SetLock(val)``
    the bandwidth-lock system call.
``AwaitPeriod(period)``
    end of a frame: sleep until the next release ``period`` ns after the
    previous one, or continue immediately when already late.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from .memory import LINE_BYTES

DEFAULT_FREQ = 2.8  # cycles per ns


@dataclass(frozen=True)
class Compute:
    cycles: int

    def __post_init__(self):
        if self.cycles <= 0:
            raise ValueError("Compute.cycles must be > 0")


@dataclass(frozen=True)
class MemBurst:
    lines: int
    cycles: int

    def __post_init__(self):
        if self.lines <= 0 or self.cycles <= 0:
            raise ValueError("MemBurst lines and cycles must be > 0")
        if self.lines > self.cycles:
            # the pacing arithmetic assumes at most one miss per cycle
            raise ValueError("MemBurst may not fetch more than one line per cycle")


@dataclass(frozen=True)
class SerialMem:
    accesses: int

    def __post_init__(self):
        if self.accesses <= 0:
            raise ValueError("SerialMem.accesses must be > 0")


@dataclass(frozen=True)
class SetLock:
    val: int

    def __post_init__(self):
        if self.val < 0:
            raise ValueError("SetLock.val must be >= 0")


@dataclass(frozen=True)
class AwaitPeriod:
    period: int

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("AwaitPeriod.period must be > 0")


Instr = Union[Compute, MemBurst, SerialMem, SetLock, AwaitPeriod]


@dataclass(frozen=True)
class Program:
    instructions: tuple
    iterations: int | None = None  # None loops forever

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if not self.instructions:
            raise ValueError("empty program")
        if self.iterations is not None and self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not any(isinstance(i, (Compute, MemBurst, SerialMem, AwaitPeriod))
                   for i in self.instructions):
            raise ValueError("program never consumes time")

    @property
    def loop(self) -> bool:
        return self.iterations is None

    @property
    def has_frames(self) -> bool:
        return any(isinstance(i, AwaitPeriod) for i in self.instructions)

    @property
    def uses_setlock(self) -> bool:
        return any(isinstance(i, SetLock) for i in self.instructions)


@dataclass(frozen=True)
class TaskDescriptor:
    name: str
    program: Program
    affinity: int = 0
    arrival: int = 0  # ns
    coarse_lock: bool = False
    group: str | None = None
    jitter: float = 0.0  # uniform +-fraction applied to Compute and MemBurst cycles per iteration
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.affinity < 0:
            raise ValueError("affinity must be >= 0")
        if self.arrival < 0:
            raise ValueError("arrival must be >= 0")
        if self.coarse_lock and self.program.uses_setlock:
            raise ValueError(f"task {self.name!r}: coarse_lock and SetLock are mutually exclusive")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError("jitter must be in [0, 1)")


def ms_to_cycles(ms: float, freq: float = DEFAULT_FREQ) -> int:
    return int(round(ms * 1e6 * freq))


def make_frame_task(fps, critical_ms, critical_MB, compute_ms, lock_mode="none", *,
                    noncritical_MB=0.0, name="frame", affinity=0, arrival=0,
                    freq=DEFAULT_FREQ, jitter=0.0, group=None) -> TaskDescriptor:
    """Periodic frame-processing task with one memory-critical burst per frame.

    ``noncritical_MB`` turns the compute phase into a low-intensity burst, for
    applications whose misses are not all inside the critical function.
    """
    if fps <= 0:
        raise ValueError("fps must be positive")
    if critical_ms <= 0 or compute_ms <= 0 or critical_MB <= 0:
        raise ValueError("frame phases must be positive")
    if critical_ms + compute_ms >= 1000.0 / fps:
        raise ValueError(
            f"frame work {critical_ms + compute_ms}ms does not fit in the "
            f"{1000.0 / fps:.3f}ms frame period")
    if lock_mode not in ("none", "fine", "coarse"):
        raise ValueError(f"unknown lock_mode {lock_mode!r}")

    period = int(math.floor(1e9 / fps))
    burst = MemBurst(lines=int(round(critical_MB * 1e6 / LINE_BYTES)),
                     cycles=ms_to_cycles(critical_ms, freq))
    if noncritical_MB > 0:
        rest = MemBurst(lines=int(round(noncritical_MB * 1e6 / LINE_BYTES)),
                        cycles=ms_to_cycles(compute_ms, freq))
    else:
        rest = Compute(ms_to_cycles(compute_ms, freq))
    if lock_mode == "fine":
        body = [SetLock(1), burst, SetLock(0), rest, AwaitPeriod(period)]
    else:
        body = [burst, rest, AwaitPeriod(period)]
    params = dict(fps=fps, critical_ms=critical_ms, critical_MB=critical_MB,
                  compute_ms=compute_ms, noncritical_MB=noncritical_MB)
    return TaskDescriptor(name=name, program=Program(body), affinity=affinity,
                          arrival=arrival, coarse_lock=(lock_mode == "coarse"),
                          group=group, jitter=jitter, kind="frame", params=params)


# one stream instruction covers 64 ms so that integer MB/s rates give
# integer line counts (rate * 1e6 * 0.064 / 64 == rate * 1000)
STREAM_CHUNK_NS = 64_000_000


def make_stream_task(rate_MBps, *, name="bw_write", affinity=0, arrival=0,
                     freq=DEFAULT_FREQ, group=None) -> TaskDescriptor:
    """Always-eager streaming writer (bw_write) at ``rate_MBps`` when unimpeded."""
    if not rate_MBps > 0:
        raise ValueError("rate_MBps must be > 0")
    lines = int(round(rate_MBps * 1e6 * (STREAM_CHUNK_NS / 1e9) / LINE_BYTES))
    cycles = int(round(STREAM_CHUNK_NS * freq))
    prog = Program([MemBurst(lines=lines, cycles=cycles)])
    return TaskDescriptor(name=name, program=prog, affinity=affinity,
                          arrival=arrival, group=group, kind="stream",
                          params=dict(rate_MBps=rate_MBps))


def make_latency_task(accesses_per_batch, *, name="latency", affinity=0, arrival=0,
                      group=None) -> TaskDescriptor:
    """Pointer-chasing probe: batches of fully serialized misses."""
    if accesses_per_batch <= 0:
        raise ValueError("accesses_per_batch must be > 0")
    prog = Program([SerialMem(int(accesses_per_batch))])
    return TaskDescriptor(name=name, program=prog, affinity=affinity,
                          arrival=arrival, group=group, kind="latency",
                          params=dict(accesses_per_batch=accesses_per_batch))


def make_compute_task(work_ms, *, iterations=1, name="compute", affinity=0, arrival=0,
                      freq=DEFAULT_FREQ, group=None) -> TaskDescriptor:
    """Finite CPU-only benchmark, used to measure timer-interrupt overhead."""
    if work_ms <= 0:
        raise ValueError("work_ms must be > 0")
    prog = Program([Compute(ms_to_cycles(work_ms, freq))], iterations=iterations)
    return TaskDescriptor(name=name, program=prog, affinity=affinity,
                          arrival=arrival, group=group, kind="compute",
                          params=dict(work_ms=work_ms, iterations=iterations))


GENERATORS = {
    "frame": make_frame_task,
    "stream": make_stream_task,
    "latency": make_latency_task,
    "compute": make_compute_task,
}
