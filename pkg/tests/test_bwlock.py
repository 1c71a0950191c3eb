import pytest

from bwlocksim.bwlock import (SELF, LockCommand, LockError, effective_lock,
                              nr_bwlocked_cores, set_lock)
from bwlocksim.engine import Engine, ExternalLock
from bwlocksim.kernel import BLOCKED
from bwlocksim.workload import make_compute_task, make_frame_task, make_stream_task


def _engine(**kw):
    tasks = [make_frame_task(24, 2.9, 2.0, 7.5, "fine", name="fine", affinity=0),
             make_compute_task(100, name="coarse", affinity=1),
             make_stream_task(550, name="bw", affinity=2)]
    tasks[1] = tasks[1].__class__(**{**tasks[1].__dict__, "coarse_lock": True})
    return Engine(tasks, **kw)


def test_self_lock_round_trip():
    e = _engine()
    set_lock(e, LockCommand(SELF, 1), issuing_task="fine")
    assert e.state.lock_val[0] == 1
    assert e.state.debt_ns[0] == 125
    set_lock(e, LockCommand(SELF, 0), issuing_task="fine")
    assert e.state.lock_val[0] == 0


def test_unknown_task():
    e = _engine()
    with pytest.raises(LockError):
        set_lock(e, LockCommand("nope", 1))
    with pytest.raises(LockError):
        set_lock(e, LockCommand(17, 1))
    with pytest.raises(LockError):
        set_lock(e, LockCommand(SELF, 1))


def test_external_lock_on_unmodified_stream():
    e = _engine(lock_events=[ExternalLock(5_000_000, "bw", 1)])
    e.run_until(5_000_000)
    assert e.state.lock_val[2] == 0
    e.run_until(20_000_000)
    assert e.state.lock_val[2] == 1
    assert e.state.debt_ns.sum() == 0  # tool-issued: no task pays for it


def test_effective_lock_cases():
    e = _engine()
    S = e.state
    assert effective_lock(S, 3) == 0  # idle core
    e.run_until(1_000_000)
    assert effective_lock(S, 1) == 1  # coarse task running
    assert effective_lock(S, 0) == 1  # fine task inside its critical section
    assert effective_lock(S, 2) == 0
    assert nr_bwlocked_cores(S) == 2
    e.run_until(5_000_000)
    assert effective_lock(S, 0) == 0  # past SetLock(0)
    S.throttled[1] = 1
    assert effective_lock(S, 1) == 0
    S.throttled[1] = 0
    S.status[1] = BLOCKED
    assert effective_lock(S, 1) == 0


def test_no_locks_anywhere():
    e = Engine([make_stream_task(100, name=f"s{c}", affinity=c) for c in range(4)])
    e.run_until(3_000_000)
    assert nr_bwlocked_cores(e.state) == 0


def test_fine_lock_visible_in_regulation():
    e = _engine()
    e.run_until(10_000_000)
    holders = {(r.t_ns, r.core): r.holder for r in e.log.regulation}
    assert holders[(1_000_000, 0)] and holders[(1_000_000, 1)]
    assert not holders[(1_000_000, 2)]
    assert not holders[(5_000_000, 0)]
