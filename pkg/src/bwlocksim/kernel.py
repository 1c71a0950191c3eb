"""Per-quantum simulation kernel: state layout and backend selection.

The hot loop (dispatch, demand estimation, water-filling, progress) lives in
two interchangeable implementations:

* ``_ckernel`` -- Cython, built with ``pip install -e .``;
* ``_pykernel`` -- pure Python, always available.

Both operate on the same :class:`KernelState` and must produce identical
results bit for bit; ``tests/test_backends.py`` holds them to it.  Set
``BWLOCKSIM_BACKEND=python`` to force the fallback.
"""

import os

import numpy as np

from .workload import Compute, MemBurst, SerialMem, SetLock, AwaitPeriod

OP_COMPUTE, OP_BURST, OP_SERIAL, OP_LOCK, OP_AWAIT = range(5)
RUNNABLE, BLOCKED, DONE = 0, 1, 2
IDLE, THROTTLE = -1, -2
UNLIMITED = -1

_TASK_INT_FIELDS = (
    "affinity", "iters_limit", "iters", "status", "wake_at", "pc", "prog_l",
    "lock_val", "coarse", "vruntime", "last_run", "woke", "release", "fstart",
    "nframes", "misses", "ops", "finish_at",
)
_CORE_INT_FIELDS = (
    "cur", "slice_used", "throttled", "irq_left", "debt_ns", "budget_rem",
    "overflow", "p_misses", "p_task", "p_thr", "p_idle", "p_irq", "total_misses",
    "q_lines", "q_run",
)


def _encode(instr):
    if isinstance(instr, Compute):
        return OP_COMPUTE, instr.cycles, 0
    if isinstance(instr, MemBurst):
        return OP_BURST, instr.lines, instr.cycles
    if isinstance(instr, SerialMem):
        return OP_SERIAL, instr.accesses, 0
    if isinstance(instr, SetLock):
        return OP_LOCK, instr.val, 0
    if isinstance(instr, AwaitPeriod):
        return OP_AWAIT, instr.period, 0
    raise TypeError(f"unknown instruction {instr!r}")


class KernelState:
    """Flat arrays describing every task and core, shared with the kernels."""

    def __init__(self, tasks, *, n_cores, quantum, freq, timeslice, syscall_ns,
                 capacity, model, jitter=None):
        self.n_cores = int(n_cores)
        self.n_tasks = len(tasks)
        self.quantum = int(quantum)
        self.freq = float(freq)
        self.timeslice = int(timeslice)
        self.syscall_ns = float(syscall_ns)
        self.cap_q = int(capacity)
        self.L0 = float(model.L0)
        self.U0 = float(model.U0)
        self.alpha = float(model.alpha)
        self.phi_max = float(model.phi_max)
        self.clock = 0

        ops, a, b, start, length = [], [], [], [], []
        for t in tasks:
            start.append(len(ops))
            length.append(len(t.program.instructions))
            for ins in t.program.instructions:
                o, x, y = _encode(ins)
                ops.append(o)
                a.append(x)
                b.append(y)
        self.op = np.array(ops, dtype=np.int64)
        self.arg_a = np.array(a, dtype=np.int64)
        self.arg_b = np.array(b, dtype=np.int64)
        self.prog_start = np.array(start, dtype=np.int64)
        self.prog_len = np.array(length, dtype=np.int64)

        n = self.n_tasks
        for f in _TASK_INT_FIELDS:
            setattr(self, f, np.zeros(n, dtype=np.int64))
        self.prog_f = np.zeros(n, dtype=np.float64)
        for i, t in enumerate(tasks):
            self.affinity[i] = t.affinity
            self.iters_limit[i] = -1 if t.program.iterations is None else t.program.iterations
            self.coarse[i] = int(t.coarse_lock)
            self.release[i] = t.arrival
            self.fstart[i] = t.arrival
            self.finish_at[i] = -1
            self.last_run[i] = -1
            if t.arrival > 0:
                self.status[i] = BLOCKED
                self.wake_at[i] = t.arrival

        # per-iteration Compute scale factors
        jitter = jitter or {}
        vals, off, ln = [], [], []
        for i in range(n):
            seq = jitter.get(i, ())
            off.append(len(vals))
            ln.append(len(seq))
            vals.extend(float(v) for v in seq)
        self.jit_vals = np.array(vals, dtype=np.float64)
        self.jit_off = np.array(off, dtype=np.int64)
        self.jit_len = np.array(ln, dtype=np.int64)

        members = [[i for i, t in enumerate(tasks) if t.affinity == c] for c in range(self.n_cores)]
        self.core_off = np.zeros(self.n_cores + 1, dtype=np.int64)
        flat = []
        for c, m in enumerate(members):
            flat.extend(m)
            self.core_off[c + 1] = len(flat)
        self.core_tasks = np.array(flat, dtype=np.int64)

        for f in _CORE_INT_FIELDS:
            setattr(self, f, np.zeros(self.n_cores, dtype=np.int64))
        self.cur[:] = IDLE
        self.budget_rem[:] = UNLIMITED
        self.q_phi = np.ones(self.n_cores, dtype=np.float64)
        self.frame_events = []

    def reset_period_counters(self):
        for f in ("p_misses", "p_task", "p_thr", "p_idle", "p_irq"):
            getattr(self, f)[:] = 0

    def snapshot(self):
        """Copy of all mutable state, for composing or comparing runs."""
        out = {"clock": self.clock, "frame_events": list(self.frame_events)}
        for f in _TASK_INT_FIELDS + _CORE_INT_FIELDS + ("prog_f", "q_phi"):
            out[f] = getattr(self, f).copy()
        return out


def _select():
    want = os.environ.get("BWLOCKSIM_BACKEND", "auto").lower()
    if want not in ("auto", "cython", "python"):
        raise ImportError(f"BWLOCKSIM_BACKEND must be auto, cython or python, not {want!r}")
    if want != "python":
        try:
            from . import _ckernel
            return _ckernel, "cython"
        except ImportError:
            if want == "cython":
                raise
    from . import _pykernel
    return _pykernel, "python"


_impl, BACKEND = _select()


def get_backend(name=None):
    """Return the kernel module for ``name`` (``None`` -> the selected one)."""
    if name is None:
        return _impl
    if name == "python":
        from . import _pykernel
        return _pykernel
    if name == "cython":
        from . import _ckernel
        return _ckernel
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        from . import _ckernel  # noqa: F401
        names.insert(0, "cython")
    except ImportError:
        pass
    return names
