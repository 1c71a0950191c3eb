import numpy as np
import pytest

from bwlocksim.kernel import IDLE, THROTTLE, UNLIMITED
from bwlocksim.workload import (Compute, MemBurst, Program, SerialMem, TaskDescriptor,
                                make_compute_task, make_stream_task)

from conftest import kernel, make_state


def _loop(name, core=0):
    return TaskDescriptor(name, Program([Compute(1_000_000)]), affinity=core)


def test_round_robin_trace(backend):
    K = kernel(backend)
    S = make_state([_loop("A"), _loop("B")])
    seq = []
    for _ in range(400):
        K.run_quanta(S, 1)
        seq.append(int(S.q_run[0]))
    assert seq == [0] * 100 + [1] * 100 + [0] * 100 + [1] * 100


def test_dispatch_throttle_and_idle(backend):
    K = kernel(backend)
    S = make_state([_loop("A"), _loop("B")])
    S.throttled[0] = 1
    assert K.dispatch(S, 0, 0) == THROTTLE
    assert K.dispatch(S, 1, 0) == IDLE


def test_idle_quantum_accounting(backend):
    K = kernel(backend)
    S = make_state([])
    K.run_quanta(S, 1)
    assert S.clock == 10_000
    assert S.p_idle.tolist() == [1, 1, 1, 1]
    assert S.q_run.tolist() == [IDLE] * 4


def test_compute_only_consumes_no_lines(backend):
    K = kernel(backend)
    S = make_state([make_compute_task(5, iterations=1)])
    K.run_quanta(S, 1000)
    assert S.total_misses.sum() == 0
    assert S.finish_at[0] == 5_000_000


def test_budget_clip_raises_overflow(backend):
    K = kernel(backend)
    # 20 lines per quantum at this pace
    burst = MemBurst(lines=2000, cycles=280_000)
    S = make_state([TaskDescriptor("s", Program([burst]))])
    S.budget_rem[0] = 7
    n = K.run_quanta(S, 10)
    assert n == 1
    assert S.q_lines[0] == 7 and S.overflow[0] == 1 and S.budget_rem[0] == 0


def test_unlimited_budget_never_overflows(backend):
    K = kernel(backend)
    S = make_state([make_stream_task(1200)])
    assert S.budget_rem[0] == UNLIMITED
    assert K.run_quanta(S, 500) == 500
    assert S.overflow.sum() == 0


def test_burst_alone_completes_at_cycle_time(backend):
    K = kernel(backend)
    t = TaskDescriptor("b", Program([MemBurst(lines=31_250, cycles=8_120_000)], iterations=1))
    S = make_state([t])
    K.run_quanta(S, 400)
    assert S.finish_at[0] == 2_900_000
    assert S.misses[0] == 31_250


def test_serial_probe_batch_time(backend):
    K = kernel(backend)
    t = TaskDescriptor("p", Program([SerialMem(12_500)], iterations=1))
    S = make_state([t])
    K.run_quanta(S, 200)
    assert S.finish_at[0] == 1_000_000


def test_serial_probe_doubles_under_phi_two(backend):
    from bwlocksim.memory import ContentionModel
    # phi saturates at 2 for any utilization above the knee
    m = ContentionModel(U0=0.0, alpha=1e9, phi_max=2.0)
    probe = TaskDescriptor("p", Program([SerialMem(12_500)], iterations=1), affinity=0)
    K = kernel(backend)
    S = make_state([probe, make_stream_task(300, affinity=1)], model=m)
    K.run_quanta(S, 400)
    assert S.finish_at[0] == 2_000_000


def test_identical_streams_share_equally(backend):
    K = kernel(backend)
    S = make_state([make_stream_task(500, name="a", affinity=1),
                    make_stream_task(500, name="b", affinity=2)])
    K.run_quanta(S, 100)
    assert S.misses[0] == S.misses[1] > 0


def test_irq_and_debt_consume_quantum(backend):
    K = kernel(backend)
    S = make_state([make_compute_task(1, iterations=1)])
    S.irq_left[0] = 7_000
    S.debt_ns[0] = 1_000
    K.run_quanta(S, 200)
    assert S.p_irq[0] == 1
    assert S.finish_at[0] == 1_008_000


def test_jitter_scales_compute(backend):
    K = kernel(backend)
    t = TaskDescriptor("c", Program([Compute(2_800_000)], iterations=2), jitter=0.5)
    S = make_state([t], jitter={0: np.array([0.5, 2.0])})
    K.run_quanta(S, 1000)
    assert S.finish_at[0] == 500_000 + 2_000_000


def test_run_quanta_stops_on_overflow(backend):
    K = kernel(backend)
    S = make_state([make_stream_task(550)])
    S.budget_rem[0] = 1562
    n = K.run_quanta(S, 100)
    assert S.overflow[0] == 1
    # 550 MB/s is 85.93 lines per quantum: the 1562nd line lands in quantum 19
    assert n == 19
