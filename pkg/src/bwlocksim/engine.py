"""Discrete-time multicore engine.

Time advances in fixed quanta.  Between quanta the engine handles, in this
order: the period boundary (trace flush, timer interrupt, regulator
re-programming), external lock commands due at that instant, then task
arrivals (woken inside the kernel).  Everything inside a quantum (dispatch,
contention, progress) is done by the selected kernel backend.
"""

import zlib
from dataclasses import dataclass, asdict

import numpy as np

from .bwlock import LockCommand, set_lock
from .kernel import KernelState, get_backend
from .memguard import MemGuard, MemGuardConfig
from .memory import ContentionModel
from .metrics import FrameRecord, MetricsLog, PeriodSample, RegulationSample, TaskStats
from .regulator import MEMGUARD, Regulator, RegulatorConfig
from .workload import DEFAULT_FREQ

JITTER_DRAWS = 4096


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    quantum: int = 10_000  # ns
    cores: int = 4
    freq: float = DEFAULT_FREQ  # cycles per ns
    timeslice: int = 1_000_000  # ns
    syscall_ns: int = 125
    handler_ns: int = 7_000  # period-timer interrupt cost, every core, every mode

    def __post_init__(self):
        if self.quantum <= 0 or self.cores <= 0 or self.freq <= 0:
            raise ValueError("quantum, cores and freq must be positive")
        if self.timeslice <= 0 or self.timeslice % self.quantum:
            raise ValueError("timeslice must be a positive multiple of the quantum")
        if self.syscall_ns < 0 or self.handler_ns < 0:
            raise ValueError("syscall_ns and handler_ns must be >= 0")


@dataclass(frozen=True)
class ExternalLock:
    """Lock command issued from outside the simulated tasks, e.g. by an admin utility."""
    at: int  # ns; takes effect at the first quantum boundary at or after it
    target: object
    val: int
    issuer: object = None


def _ceil_to(t, q):
    return -(-t // q) * q


class Engine:
    def __init__(self, tasks, config=None, model=None, regulator=None, memguard=None,
                 lock_events=(), seed=0, backend=None):
        self.config = cfg = config or EngineConfig()
        self.model = model or ContentionModel()
        self.reg_config = regulator or RegulatorConfig()
        self.tasks = list(tasks)
        self.seed = int(seed)
        period = self.reg_config.period
        if period % cfg.quantum:
            raise ValueError(f"period {period} is not a multiple of the quantum {cfg.quantum}")
        if cfg.handler_ns >= period:
            raise ValueError("handler_ns must be shorter than the period")
        cap = self.model.capacity_lines(cfg.quantum)
        if cap <= 0:
            raise ValueError("memory capacity per quantum rounds to zero lines")
        names = [t.name for t in self.tasks]
        if len(set(names)) != len(names):
            raise ValueError("task names must be unique")
        for t in self.tasks:
            if t.affinity >= cfg.cores:
                raise ValueError(f"task {t.name!r}: core {t.affinity} does not exist "
                                 f"(cores 0..{cfg.cores - 1})")
        self.task_index = {n: i for i, n in enumerate(names)}

        # per-task streams keyed by name, so a task draws the same factors
        # whether it runs alone (baseline) or with others
        jitter = {}
        for i, t in enumerate(self.tasks):
            if t.jitter > 0:
                rng = np.random.default_rng([self.seed, zlib.crc32(t.name.encode())])
                jitter[i] = 1.0 + rng.uniform(-t.jitter, t.jitter, JITTER_DRAWS)

        self.state = KernelState(
            self.tasks, n_cores=cfg.cores, quantum=cfg.quantum, freq=cfg.freq,
            timeslice=cfg.timeslice, syscall_ns=cfg.syscall_ns, capacity=cap,
            model=self.model, jitter=jitter)
        self.kernel = get_backend(backend)

        mg = None
        if self.reg_config.mode == MEMGUARD:
            self.memguard_config = memguard or MemGuardConfig()
            mg = MemGuard(self.memguard_config, cfg.cores, period)
        else:
            self.memguard_config = memguard
        self.regulator = Regulator(self.reg_config, cfg.cores, mg)

        self._events = []
        for seq, ev in enumerate(lock_events):
            if ev.at < 0:
                raise ValueError("lock event time must be >= 0")
            self._events.append((_ceil_to(ev.at, cfg.quantum), seq, ev))
        self._events.sort(key=lambda e: (e[0], e[1]))
        self._ev_pos = 0

        self.period = period
        self._next_boundary = 0
        self._usage = [0] * cfg.cores
        self.budgets = None
        self.log = MetricsLog(n_cores=cfg.cores, period=period, quantum=cfg.quantum)

    @property
    def clock(self):
        return self.state.clock

    def resolved_parameters(self):
        out = {
            "engine": asdict(self.config),
            "model": self.model.as_dict(),
            "regulator": asdict(self.reg_config),
            "seed": self.seed,
            "capacity_lines_per_quantum": self.state.cap_q,
            "minperf_lines_per_period": self.regulator.minperf_lines,
        }
        if self.memguard_config is not None:
            mg = asdict(self.memguard_config)
            mg["reserve_MBps"] = list(mg["reserve_MBps"])
            out["memguard"] = mg
        return out

    # event handling between quanta

    def _boundary(self):
        S = self.state
        t = S.clock
        self.budgets = self.regulator.on_period_boundary(S, self._usage)
        for c, (b, h) in enumerate(zip(self.budgets.assigned, self.budgets.holders)):
            self.log.regulation.append(RegulationSample(t, c, b, h))
        S.irq_left[:] += self.config.handler_ns
        self._next_boundary += self.period

    def _fire_due(self):
        t = self.state.clock
        if t == self._next_boundary:
            self._boundary()
        while self._ev_pos < len(self._events) and self._events[self._ev_pos][0] <= t:
            ev = self._events[self._ev_pos][2]
            self._ev_pos += 1
            set_lock(self, LockCommand(ev.target, ev.val), issuing_task=ev.issuer)

    def _close_period(self):
        S = self.state
        t0 = S.clock - self.period
        qpp = self.period // self.config.quantum
        for c in range(S.n_cores):
            self.log.samples.append(PeriodSample(
                t0, c, int(S.p_misses[c]), int(S.p_task[c]) / qpp,
                int(S.p_thr[c]) / qpp, int(S.p_idle[c]) / qpp, int(S.p_irq[c]) / qpp))
        self._usage = S.p_misses.tolist()
        S.reset_period_counters()

    def _drain_frames(self):
        ev = self.state.frame_events
        if ev:
            for i, n, start, end in ev:
                self.log.frames.append(FrameRecord(self.tasks[i].name, int(n), int(start), int(end)))
            ev.clear()

    def _update_stats(self):
        S = self.state
        self.log.duration_ns = S.clock
        self.log.tasks = [
            TaskStats(name=t.name, kind=t.kind, core=t.affinity, misses=int(S.misses[i]),
                      ops=int(S.ops[i]), finish_ns=int(S.finish_at[i]), run_ns=int(S.vruntime[i]))
            for i, t in enumerate(self.tasks)]

    def step(self):
        """Advance exactly one quantum."""
        return self.run_until(self.clock + self.config.quantum)

    def run_until(self, t):
        """Advance to ``t`` ns (rounded up to a quantum boundary) and return the log."""
        S = self.state
        Q = self.config.quantum
        if t < S.clock:
            raise EngineError(f"cannot run backwards to {t} ns from {S.clock} ns")
        end = _ceil_to(int(t), Q)
        while S.clock < end:
            self._fire_due()
            stop = min(end, self._next_boundary)
            if self._ev_pos < len(self._events):
                stop = min(stop, max(self._events[self._ev_pos][0], S.clock + Q))
            n = max(1, (stop - S.clock) // Q)
            self.kernel.run_quanta(S, n)
            if S.overflow.any():
                for c in np.flatnonzero(S.overflow):
                    self.regulator.on_overflow(S, int(c))
            self._drain_frames()
            if S.clock == self._next_boundary:
                self._close_period()
        self._update_stats()
        return self.log


def simulate(tasks, duration_ns, **kw):
    """Build an engine, run it for ``duration_ns`` and return it."""
    eng = Engine(tasks, **kw)
    eng.run_until(duration_ns)
    return eng
