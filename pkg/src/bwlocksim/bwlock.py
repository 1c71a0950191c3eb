"""Bandwidth-lock state: the lock system call and lock sampling at period boundaries."""

from dataclasses import dataclass

from .kernel import RUNNABLE

SELF = None


class LockError(RuntimeError):
    """A lock command named a task that does not exist."""


@dataclass(frozen=True)
class LockCommand:
    target: object = SELF  # task name, task index, or SELF
    val: int = 1

    def __post_init__(self):
        if self.val < 0:
            raise ValueError("lock value must be >= 0")


def resolve_task(engine, target):
    if isinstance(target, str):
        try:
            return engine.task_index[target]
        except KeyError:
            raise LockError(f"unknown task {target!r}") from None
    if isinstance(target, int) and 0 <= target < engine.state.n_tasks:
        return target
    raise LockError(f"unknown task {target!r}")


def set_lock(engine, cmd, issuing_task=None):
    """Set the target's ``bwlock_val``.

    ``issuing_task`` is the calling task (``None`` for the external lock
    tool); a calling task is charged the system-call cost on its core.  The
    regulators only see the new value at the next period boundary.
    """
    S = engine.state
    if cmd.target is SELF:
        if issuing_task is None:
            raise LockError("SELF lock command needs an issuing task")
        target = resolve_task(engine, issuing_task)
    else:
        target = resolve_task(engine, cmd.target)
    S.lock_val[target] = cmd.val
    if issuing_task is not None:
        issuer = resolve_task(engine, issuing_task)
        S.debt_ns[S.affinity[issuer]] += int(round(S.syscall_ns))


def effective_lock(S, core):
    """Lock value of the task running on ``core``; coarse-lock tasks count as 1."""
    if S.throttled[core]:
        return 0
    cur = S.cur[core]
    if cur < 0 or S.status[cur] != RUNNABLE:
        return 0
    if S.coarse[cur]:
        return max(1, int(S.lock_val[cur]))
    return int(S.lock_val[cur])


def nr_bwlocked_cores(S):
    return sum(1 for c in range(S.n_cores) if effective_lock(S, c) > 0)
