"""Pure-Python kernel.  Mirrors ``_ckernel.pyx`` operation for operation.

Float expressions are written in the same order in both files so that the
two backends stay bit-identical; keep them in sync when editing either.
"""

import math

from .memory import allocate, phi_of_utilization

OP_COMPUTE, OP_BURST, OP_SERIAL, OP_LOCK, OP_AWAIT = range(5)
RUNNABLE, BLOCKED, DONE = 0, 1, 2
IDLE, THROTTLE = -1, -2
BIG = 1 << 62
MAX_STEPS = 100_000

_MUTABLE = (
    "iters", "status", "wake_at", "pc", "prog_l", "lock_val", "vruntime",
    "last_run", "woke", "release", "fstart", "nframes", "misses", "ops",
    "finish_at", "prog_f",
    "cur", "slice_used", "throttled", "irq_left", "debt_ns", "budget_rem",
    "overflow", "p_misses", "p_task", "p_thr", "p_idle", "p_irq",
    "total_misses", "q_lines", "q_run", "q_phi",
)
_CONST = (
    "op", "arg_a", "arg_b", "prog_start", "prog_len", "jit_vals", "jit_off",
    "jit_len", "core_tasks", "core_off", "iters_limit", "affinity", "coarse",
)
_SCALARS = (
    "n_cores", "n_tasks", "quantum", "freq", "timeslice", "syscall_ns",
    "cap_q", "L0", "U0", "alpha", "phi_max", "clock",
)


class _Ctx:
    """List-backed working copy of a KernelState (numpy item access is slow)."""

    def __init__(self, S):
        for f in _MUTABLE + _CONST:
            setattr(self, f, getattr(S, f).tolist())
        for f in _SCALARS:
            setattr(self, f, getattr(S, f))
        self.frame_events = S.frame_events

    def store(self, S):
        for f in _MUTABLE:
            getattr(S, f)[:] = getattr(self, f)
        S.clock = self.clock


def _dispatch(x, core, t):
    if x.throttled[core]:
        return THROTTLE
    vr = x.vruntime
    lr = x.last_run
    st = x.status
    cur = x.cur[core]
    best = -1
    for k in range(x.core_off[core], x.core_off[core + 1]):
        i = x.core_tasks[k]
        if st[i] != RUNNABLE:
            continue
        if best < 0 or vr[i] < vr[best] or (vr[i] == vr[best] and lr[i] < lr[best]):
            best = i
    keep = cur >= 0 and st[cur] == RUNNABLE and x.slice_used[core] < x.timeslice
    for k in range(x.core_off[core], x.core_off[core + 1]):
        i = x.core_tasks[k]
        if x.woke[i]:
            if keep and st[i] == RUNNABLE and vr[i] < vr[cur]:
                keep = False
            x.woke[i] = 0
    if keep:
        return cur
    x.slice_used[core] = 0
    x.cur[core] = best
    return best


def dispatch(S, core, t):
    """Choose what ``core`` runs in the quantum starting at ``t``.

    Returns the throttle pseudo-task (-2) on a throttled core, else the
    runnable task with the least attained service (ties: longest waiting,
    then lowest index), keeping the current task until its timeslice expires
    or a woken task with less service arrives.  -1 means idle.
    """
    x = _Ctx(S)
    r = _dispatch(x, core, t)
    x.store(S)
    return r


def _exec(x, i, T, G, phi, commit, t0):
    """Run task ``i`` for ``T`` ns with at most ``G`` line fetches.

    Returns ``(lines, capstall)``; ``capstall`` is set when the task stopped
    because it needed a line beyond ``G``.  State is written back only when
    ``commit`` is true.
    """
    op = x.op
    a = x.arg_a
    b = x.arg_b
    start = x.prog_start[i]
    plen = x.prog_len[i]
    pc = x.pc[i]
    pf = x.prog_f[i]
    pl = x.prog_l[i]
    iters = x.iters[i]
    status = x.status[i]
    wake = x.wake_at[i]
    release = x.release[i]
    fstart = x.fstart[i]
    nframes = x.nframes[i]
    lockv = x.lock_val[i]
    finish = x.finish_at[i]
    freq = x.freq
    L0 = x.L0
    avail = T
    lines = 0
    nops = 0
    capstall = 0
    steps = 0
    while steps < MAX_STEPS:
        steps += 1
        k = start + pc
        o = op[k]
        if o == OP_COMPUTE:
            C = a[k]
            jl = x.jit_len[i]
            if jl > 0:
                C = math.floor(C * x.jit_vals[x.jit_off[i] + iters % jl] + 0.5)
            need = (C - pf) / freq
            if need <= T:
                T -= need
            else:
                pf += T * freq
                T = 0.0
                break
        elif o == OP_BURST:
            L = a[k]
            C = b[k]
            jl = x.jit_len[i]
            if jl > 0:
                C = math.floor(C * x.jit_vals[x.jit_off[i] + iters % jl] + 0.5)
                if C < L:
                    C = L
            xl = L0 * (phi - 1.0)
            g = G - lines
            rem = L - pl
            cost = (C - pf) / freq + rem * xl
            if rem <= g and cost <= T:
                T -= cost
                lines += rem
            else:
                ct = pf + T / (1.0 / freq + (L / C) * xl)
                if rem > g:
                    # stalls where line pl+g+1 would be needed
                    cl = float((pl + g + 1) * C) / L
                else:
                    cl = float(C)
                if cl <= ct:
                    lines += g
                    pl += g
                    if cl > pf:
                        pf = cl
                    T = 0.0
                    capstall = 1
                    break
                if ct < C:
                    c2 = ct
                else:
                    c2 = float(C)
                nl = math.floor(L * c2 / C)
                if nl > pl + g:
                    nl = pl + g
                if nl > L:
                    nl = L
                if nl < pl:
                    nl = pl
                lines += nl - pl
                pl = nl
                pf = c2
                T = 0.0
                break
        elif o == OP_SERIAL:
            A = a[k]
            cost1 = L0 * phi
            rem = A - pl
            g = G - lines
            n = math.floor((pf + T) / cost1)
            if rem <= n and rem <= g:
                T -= rem * cost1 - pf
                lines += rem
                nops += rem
            elif g < n and g < rem:
                lines += g
                nops += g
                pl += g
                pf = 0.0
                T = 0.0
                capstall = 1
                break
            else:
                lines += n
                nops += n
                pl += n
                pf = (pf + T) - n * cost1
                T = 0.0
                break
        elif o == OP_LOCK:
            need = x.syscall_ns - pf
            if need <= T:
                T -= need
                lockv = a[k]
            else:
                pf += T
                T = 0.0
                break
        else:  # OP_AWAIT
            now = math.floor(t0 + (avail - T))
            rel = release + a[k]
            if commit:
                x.frame_events.append((i, nframes, fstart, now))
            nframes += 1
            release = rel
            if rel <= now:
                fstart = now
            else:
                status = BLOCKED
                wake = rel
                fstart = rel
        if T < 0.0:
            T = 0.0
        # instruction complete
        pc += 1
        pf = 0.0
        pl = 0
        if pc >= plen:
            pc = 0
            iters += 1
            lim = x.iters_limit[i]
            if 0 <= lim <= iters:
                status = DONE
                finish = math.floor(t0 + (avail - T))
        if status != RUNNABLE:
            break
    if commit:
        x.pc[i] = pc
        x.prog_f[i] = pf
        x.prog_l[i] = pl
        x.iters[i] = iters
        x.status[i] = status
        x.wake_at[i] = wake
        x.release[i] = release
        x.fstart[i] = fstart
        x.nframes[i] = nframes
        x.lock_val[i] = lockv
        x.finish_at[i] = finish
        x.misses[i] += lines
        x.ops[i] += nops
    return lines, capstall


def _quantum(x):
    t = x.clock
    Q = x.quantum
    nc = x.n_cores
    st = x.status
    for i in range(x.n_tasks):
        if st[i] == BLOCKED and x.wake_at[i] <= t:
            st[i] = RUNNABLE
            x.woke[i] = 1

    run = [-1] * nc
    avail = [0.0] * nc
    t0 = [0] * nc
    for c in range(nc):
        task = _dispatch(x, c, t)
        x.q_run[c] = task
        irq = min(x.irq_left[c], Q)
        x.irq_left[c] -= irq
        debt = min(x.debt_ns[c], Q - irq)
        x.debt_ns[c] -= debt
        if irq > 0:
            x.p_irq[c] += 1
        elif task == THROTTLE:
            x.p_thr[c] += 1
        elif task >= 0:
            x.p_task[c] += 1
        else:
            x.p_idle[c] += 1
        if task >= 0:
            x.vruntime[task] += Q
            x.slice_used[c] += Q
            x.last_run[task] = t
            run[c] = task
        avail[c] = float(Q - irq - debt)
        t0[c] = t + irq + debt

    raw = [0] * nc
    capst = [0] * nc
    total = 0
    for c in range(nc):
        if run[c] >= 0:
            G = x.budget_rem[c] if x.budget_rem[c] >= 0 else BIG
            raw[c], capst[c] = _exec(x, run[c], avail[c], G, 1.0, False, t0[c])
            total += raw[c]

    eff = [0] * nc
    phis = [1.0] * nc
    for c in range(nc):
        if run[c] >= 0:
            phi = phi_of_utilization(float(total - raw[c]) / x.cap_q, x.U0, x.alpha, x.phi_max)
            phis[c] = phi
            G = x.budget_rem[c] if x.budget_rem[c] >= 0 else BIG
            eff[c] = _exec(x, run[c], avail[c], G, phi, False, t0[c])[0]
        x.q_phi[c] = phis[c]

    grants = allocate(eff, x.cap_q)
    for c in range(nc):
        used = 0
        if run[c] >= 0:
            used = _exec(x, run[c], avail[c], grants[c], phis[c], True, t0[c])[0]
        x.q_lines[c] = used
        x.p_misses[c] += used
        x.total_misses[c] += used
        if x.budget_rem[c] >= 0:
            x.budget_rem[c] -= used
            if x.budget_rem[c] == 0 and (used > 0 or capst[c]):
                x.overflow[c] = 1
    x.clock = t + Q


def run_quanta(S, nmax):
    """Advance up to ``nmax`` quanta; stop early after a budget overflow."""
    x = _Ctx(S)
    done = 0
    while done < nmax:
        _quantum(x)
        done += 1
        if any(x.overflow):
            break
    x.store(S)
    return done
