# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel.  Mirrors ``_pykernel.py`` operation for operation.

Every float expression keeps the evaluation order of the Python twin so the
two backends agree bit for bit.  Built without FMA contraction (setup.py).
"""

from libc.math cimport floor

cdef enum:
    OP_COMPUTE = 0
    OP_BURST = 1
    OP_SERIAL = 2
    OP_LOCK = 3
    OP_AWAIT = 4

cdef enum:
    RUNNABLE = 0
    BLOCKED = 1
    DONE = 2

cdef enum:
    IDLE = -1
    THROTTLE = -2

cdef long long BIG = 1LL << 62
cdef int MAX_STEPS = 100000
cdef int MAX_CORES = 256


cdef inline double _phi(double u, double U0, double alpha, double phi_max) noexcept nogil:
    cdef double d, phi
    if u <= U0:
        return 1.0
    d = u - U0
    phi = 1.0 + alpha * d * d
    if phi > phi_max:
        return phi_max
    return phi


cdef void _allocate(long long* dem, long long* grant, int n, long long capacity) noexcept nogil:
    """Max-min fair integer allocation; same tie rules as memory.allocate."""
    cdef int order[256]
    cdef int served[256]
    cdef int a, b, i, j, pos, k
    cdef long long remaining, share, extra, d
    for a in range(n):
        grant[a] = 0
        served[a] = 0
        order[a] = a
    if capacity <= 0 or n == 0:
        return
    # insertion sort by (demand, index)
    for a in range(1, n):
        j = order[a]
        b = a - 1
        while b >= 0 and (dem[order[b]] > dem[j] or (dem[order[b]] == dem[j] and order[b] > j)):
            order[b + 1] = order[b]
            b -= 1
        order[b + 1] = j
    remaining = capacity
    k = n
    for pos in range(n):
        i = order[pos]
        d = dem[i]
        share = remaining // k
        if d <= share:
            grant[i] = d
            served[i] = 1
            remaining -= d
            k -= 1
            continue
        extra = remaining - share * k
        for j in range(n):
            if served[j]:
                continue
            if extra > 0:
                grant[j] = share + 1
                extra -= 1
            else:
                grant[j] = share
        break


def allocate(demands, capacity):
    """Compiled max-min fair allocation (for tests and benchmarks)."""
    cdef int n = len(demands)
    cdef long long dem[256]
    cdef long long grant[256]
    cdef int i
    if n > MAX_CORES:
        raise ValueError("too many demanders")
    for i in range(n):
        dem[i] = demands[i]
    _allocate(dem, grant, n, capacity)
    return [grant[i] for i in range(n)]


cdef class _K:
    cdef long long[::1] op, arg_a, arg_b, prog_start, prog_len, jit_off, jit_len
    cdef long long[::1] core_tasks, core_off, iters_limit
    cdef double[::1] jit_vals, prog_f, q_phi
    cdef long long[::1] iters, status, wake_at, pc, prog_l, lock_val, vruntime
    cdef long long[::1] last_run, woke, release, fstart, nframes, misses, ops, finish_at
    cdef long long[::1] cur, slice_used, throttled, irq_left, debt_ns, budget_rem
    cdef long long[::1] overflow, p_misses, p_task, p_thr, p_idle, p_irq
    cdef long long[::1] total_misses, q_lines, q_run
    cdef int n_cores, n_tasks
    cdef long long quantum, timeslice, cap_q, clock
    cdef double freq, syscall_ns, L0, U0, alpha, phi_max
    cdef list frame_events

    def __init__(self, S):
        if S.n_cores > MAX_CORES:
            raise ValueError("too many cores for the compiled kernel")
        self.op = S.op
        self.arg_a = S.arg_a
        self.arg_b = S.arg_b
        self.prog_start = S.prog_start
        self.prog_len = S.prog_len
        self.jit_off = S.jit_off
        self.jit_len = S.jit_len
        self.jit_vals = S.jit_vals
        self.core_tasks = S.core_tasks
        self.core_off = S.core_off
        self.iters_limit = S.iters_limit
        self.prog_f = S.prog_f
        self.q_phi = S.q_phi
        self.iters = S.iters
        self.status = S.status
        self.wake_at = S.wake_at
        self.pc = S.pc
        self.prog_l = S.prog_l
        self.lock_val = S.lock_val
        self.vruntime = S.vruntime
        self.last_run = S.last_run
        self.woke = S.woke
        self.release = S.release
        self.fstart = S.fstart
        self.nframes = S.nframes
        self.misses = S.misses
        self.ops = S.ops
        self.finish_at = S.finish_at
        self.cur = S.cur
        self.slice_used = S.slice_used
        self.throttled = S.throttled
        self.irq_left = S.irq_left
        self.debt_ns = S.debt_ns
        self.budget_rem = S.budget_rem
        self.overflow = S.overflow
        self.p_misses = S.p_misses
        self.p_task = S.p_task
        self.p_thr = S.p_thr
        self.p_idle = S.p_idle
        self.p_irq = S.p_irq
        self.total_misses = S.total_misses
        self.q_lines = S.q_lines
        self.q_run = S.q_run
        self.n_cores = S.n_cores
        self.n_tasks = S.n_tasks
        self.quantum = S.quantum
        self.timeslice = S.timeslice
        self.cap_q = S.cap_q
        self.clock = S.clock
        self.freq = S.freq
        self.syscall_ns = S.syscall_ns
        self.L0 = S.L0
        self.U0 = S.U0
        self.alpha = S.alpha
        self.phi_max = S.phi_max
        self.frame_events = S.frame_events

    cdef long long _dispatch(self, int core, long long t):
        cdef long long cur, best, i
        cdef long long k
        cdef bint keep
        if self.throttled[core]:
            return THROTTLE
        cur = self.cur[core]
        best = -1
        for k in range(self.core_off[core], self.core_off[core + 1]):
            i = self.core_tasks[k]
            if self.status[i] != RUNNABLE:
                continue
            if (best < 0 or self.vruntime[i] < self.vruntime[best]
                    or (self.vruntime[i] == self.vruntime[best]
                        and self.last_run[i] < self.last_run[best])):
                best = i
        keep = cur >= 0 and self.status[cur] == RUNNABLE and self.slice_used[core] < self.timeslice
        for k in range(self.core_off[core], self.core_off[core + 1]):
            i = self.core_tasks[k]
            if self.woke[i]:
                if keep and self.status[i] == RUNNABLE and self.vruntime[i] < self.vruntime[cur]:
                    keep = False
                self.woke[i] = 0
        if keep:
            return cur
        self.slice_used[core] = 0
        self.cur[core] = best
        return best

    cdef long long _exec(self, long long i, double T, long long G, double phi,
                         bint commit, long long t0, int* capstall):
        cdef long long start = self.prog_start[i]
        cdef long long plen = self.prog_len[i]
        cdef long long pc = self.pc[i]
        cdef double pf = self.prog_f[i]
        cdef long long pl = self.prog_l[i]
        cdef long long iters = self.iters[i]
        cdef long long status = self.status[i]
        cdef long long wake = self.wake_at[i]
        cdef long long release = self.release[i]
        cdef long long fstart = self.fstart[i]
        cdef long long nframes = self.nframes[i]
        cdef long long lockv = self.lock_val[i]
        cdef long long finish = self.finish_at[i]
        cdef double freq = self.freq
        cdef double L0 = self.L0
        cdef double avail = T
        cdef long long lines = 0
        cdef long long nops = 0
        cdef int steps = 0
        cdef long long k, o, C, L, A, jl, g, rem, nl, n, rel, now, lim
        cdef double need, xl, cost, ct, cl, c2, cost1
        capstall[0] = 0
        while steps < MAX_STEPS:
            steps += 1
            k = start + pc
            o = self.op[k]
            if o == OP_COMPUTE:
                C = self.arg_a[k]
                jl = self.jit_len[i]
                if jl > 0:
                    C = <long long>floor(<double>C * self.jit_vals[self.jit_off[i] + iters % jl] + 0.5)
                need = (<double>C - pf) / freq
                if need <= T:
                    T -= need
                else:
                    pf += T * freq
                    T = 0.0
                    break
            elif o == OP_BURST:
                L = self.arg_a[k]
                C = self.arg_b[k]
                jl = self.jit_len[i]
                if jl > 0:
                    C = <long long>floor(<double>C * self.jit_vals[self.jit_off[i] + iters % jl] + 0.5)
                    if C < L:
                        C = L
                xl = L0 * (phi - 1.0)
                g = G - lines
                rem = L - pl
                cost = (<double>C - pf) / freq + <double>rem * xl
                if rem <= g and cost <= T:
                    T -= cost
                    lines += rem
                else:
                    ct = pf + T / (1.0 / freq + (<double>L / <double>C) * xl)
                    if rem > g:
                        # stalls where line pl+g+1 would be needed
                        cl = (<double>((pl + g + 1) * C)) / <double>L
                    else:
                        cl = <double>C
                    if cl <= ct:
                        lines += g
                        pl += g
                        if cl > pf:
                            pf = cl
                        T = 0.0
                        capstall[0] = 1
                        break
                    if ct < <double>C:
                        c2 = ct
                    else:
                        c2 = <double>C
                    nl = <long long>floor(<double>L * c2 / <double>C)
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
                A = self.arg_a[k]
                cost1 = L0 * phi
                rem = A - pl
                g = G - lines
                n = <long long>floor((pf + T) / cost1)
                if rem <= n and rem <= g:
                    T -= <double>rem * cost1 - pf
                    lines += rem
                    nops += rem
                elif g < n and g < rem:
                    lines += g
                    nops += g
                    pl += g
                    pf = 0.0
                    T = 0.0
                    capstall[0] = 1
                    break
                else:
                    lines += n
                    nops += n
                    pl += n
                    pf = (pf + T) - <double>n * cost1
                    T = 0.0
                    break
            elif o == OP_LOCK:
                need = self.syscall_ns - pf
                if need <= T:
                    T -= need
                    lockv = self.arg_a[k]
                else:
                    pf += T
                    T = 0.0
                    break
            else:
                now = <long long>floor(<double>t0 + (avail - T))
                rel = release + self.arg_a[k]
                if commit:
                    self.frame_events.append((i, nframes, fstart, now))
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
            pc += 1
            pf = 0.0
            pl = 0
            if pc >= plen:
                pc = 0
                iters += 1
                lim = self.iters_limit[i]
                if lim >= 0 and iters >= lim:
                    status = DONE
                    finish = <long long>floor(<double>t0 + (avail - T))
            if status != RUNNABLE:
                break
        if commit:
            self.pc[i] = pc
            self.prog_f[i] = pf
            self.prog_l[i] = pl
            self.iters[i] = iters
            self.status[i] = status
            self.wake_at[i] = wake
            self.release[i] = release
            self.fstart[i] = fstart
            self.nframes[i] = nframes
            self.lock_val[i] = lockv
            self.finish_at[i] = finish
            self.misses[i] += lines
            self.ops[i] += nops
        return lines

    cdef void _quantum(self):
        cdef long long t = self.clock
        cdef long long Q = self.quantum
        cdef int nc = self.n_cores
        cdef int c, cap_flag
        cdef long long i, task, irq, debt, G, total, used
        cdef long long run[256]
        cdef long long t0[256]
        cdef long long raw[256]
        cdef long long eff[256]
        cdef long long grants[256]
        cdef int capst[256]
        cdef double avail[256]
        cdef double phis[256]
        cdef double phi
        for i in range(self.n_tasks):
            if self.status[i] == BLOCKED and self.wake_at[i] <= t:
                self.status[i] = RUNNABLE
                self.woke[i] = 1

        for c in range(nc):
            task = self._dispatch(c, t)
            self.q_run[c] = task
            run[c] = -1
            irq = self.irq_left[c]
            if irq > Q:
                irq = Q
            self.irq_left[c] -= irq
            debt = self.debt_ns[c]
            if debt > Q - irq:
                debt = Q - irq
            self.debt_ns[c] -= debt
            if irq > 0:
                self.p_irq[c] += 1
            elif task == THROTTLE:
                self.p_thr[c] += 1
            elif task >= 0:
                self.p_task[c] += 1
            else:
                self.p_idle[c] += 1
            if task >= 0:
                self.vruntime[task] += Q
                self.slice_used[c] += Q
                self.last_run[task] = t
                run[c] = task
            avail[c] = <double>(Q - irq - debt)
            t0[c] = t + irq + debt

        total = 0
        for c in range(nc):
            raw[c] = 0
            capst[c] = 0
            if run[c] >= 0:
                G = self.budget_rem[c] if self.budget_rem[c] >= 0 else BIG
                raw[c] = self._exec(run[c], avail[c], G, 1.0, False, t0[c], &capst[c])
                total += raw[c]

        for c in range(nc):
            eff[c] = 0
            phis[c] = 1.0
            if run[c] >= 0:
                phi = _phi(<double>(total - raw[c]) / <double>self.cap_q,
                           self.U0, self.alpha, self.phi_max)
                phis[c] = phi
                G = self.budget_rem[c] if self.budget_rem[c] >= 0 else BIG
                eff[c] = self._exec(run[c], avail[c], G, phi, False, t0[c], &cap_flag)
            self.q_phi[c] = phis[c]

        _allocate(eff, grants, nc, self.cap_q)
        for c in range(nc):
            used = 0
            if run[c] >= 0:
                used = self._exec(run[c], avail[c], grants[c], phis[c], True, t0[c], &cap_flag)
            self.q_lines[c] = used
            self.p_misses[c] += used
            self.total_misses[c] += used
            if self.budget_rem[c] >= 0:
                self.budget_rem[c] -= used
                if self.budget_rem[c] == 0 and (used > 0 or capst[c]):
                    self.overflow[c] = 1
        self.clock = t + Q


def dispatch(S, int core, long long t):
    """Compiled twin of ``_pykernel.dispatch``."""
    cdef _K k = _K(S)
    return k._dispatch(core, t)


def run_quanta(S, long long nmax):
    """Advance up to ``nmax`` quanta; stop early after a budget overflow."""
    cdef _K k = _K(S)
    cdef long long done = 0
    cdef int c
    cdef bint hit
    while done < nmax:
        k._quantum()
        done += 1
        hit = False
        for c in range(k.n_cores):
            if k.overflow[c]:
                hit = True
        if hit:
            break
    S.clock = k.clock
    return done
