"""Completion-budget update protocol: reject, accept, and probe signalling.

Budgets are per (task, downstream-task) durations. A reject shrinks upstream
budgets after a drop; an accept grows them when the slowest member of a batch
reaches the sink comfortably early. Signals reference the per-event history
tuple retained at each task, travel on the same channels as data, and are
never subject to drop points. Every k-th dropped event is forwarded as a
probe instead, so a collapsed budget can recover once conditions improve.
"""

import math
from dataclasses import dataclass

from .model import ExecTimeModel


@dataclass(frozen=True)
class HistoryTuple:
    """Per-event record kept at a task until acknowledged by a signal."""

    departure: int  # d = u + pi, local to the recording task
    queue_ms: int
    batch_m: int
    dest: str  # downstream task the event was forwarded to


@dataclass(frozen=True)
class RejectSignal:
    """Sent to all upstream tasks on an event's path when it is dropped.

    epsilon is the excess over the dropping task's budget (projected d - beta)
    and sum_queue the accumulated queue time upstream of the dropping task.
    """

    event_id: int
    epsilon: int
    sum_queue: int


@dataclass(frozen=True)
class AcceptSignal:
    """Sent by the sink when a batch's slowest member arrived early.

    epsilon = gamma - u* and sum_exec is the execution time accumulated by
    that member across the non-sink tasks.
    """

    event_id: int
    epsilon: int
    sum_exec: int


def compute_reduce_lambda(
    epsilon: int, q_i: int, qbar: int, xi: ExecTimeModel, m_i: int
) -> int:
    """Budget reduction for one upstream task after a reject.

    The excess is split in proportion to this task's share of the upstream
    queueing delay, capped by the gain batching gave over streaming. A task
    that never queued the event (qbar == 0) contributes nothing.
    """
    if qbar <= 0:
        return 0
    cap = xi.xi(m_i) - xi.xi(1)
    lam = min(epsilon * q_i / qbar, cap)
    return max(0, math.ceil(lam))


def compute_increase_lambda(
    epsilon: int,
    xi_m: int,
    xibar: int,
    q_i: int,
    m_i: int,
    m_max: int,
    xi: ExecTimeModel,
) -> int:
    """Budget increase for one upstream task after an accept.

    Scales the observed slack by this task's share of upstream execution
    time, capped by the headroom left before the batch size hits m_max: the
    queue-rate term plus the execution-cost gap up to xi(m_max).
    """
    if xibar <= 0:
        return 0
    headroom = (m_max - m_i) * q_i / m_i + xi.xi(m_max) - xi_m
    lam = min(epsilon * xi_m / xibar, headroom)
    return max(0, math.floor(lam))


def apply_reject(rt, sig: RejectSignal, dest: str) -> int | None:
    """Apply a reject at one upstream task; returns the new budget.

    The referenced history tuple is consumed. A signal for an event whose
    tuple was evicted (or already acknowledged) is counted and ignored.
    Budgets only ever move down here; an unset budget is set directly.
    """
    tup = rt.history.pop(sig.event_id, None)
    if tup is None:
        rt.ignored_signals += 1
        return None
    lam = compute_reduce_lambda(sig.epsilon, tup.queue_ms, sig.sum_queue, rt.xi, tup.batch_m)
    proposed = tup.departure - lam
    old = rt.budgets.get(dest)
    new = proposed if old is None else min(proposed, old)
    rt.budgets[dest] = new
    return new


def apply_accept(rt, sig: AcceptSignal, dest: str) -> int | None:
    """Apply an accept at one upstream task; returns the new budget.

    Mirror of apply_reject: budgets only ever move up, and an unset budget
    is set directly to d + lambda.
    """
    tup = rt.history.pop(sig.event_id, None)
    if tup is None:
        rt.ignored_signals += 1
        return None
    lam = compute_increase_lambda(
        sig.epsilon, rt.xi.xi(tup.batch_m), sig.sum_exec,
        tup.queue_ms, tup.batch_m, rt.xi.m_max, rt.xi,
    )
    proposed = tup.departure + lam
    old = rt.budgets.get(dest)
    new = proposed if old is None else max(proposed, old)
    rt.budgets[dest] = new
    return new


def sink_evaluate(
    members: list[tuple[int, int, int]], gamma: int, eps_max: int
) -> AcceptSignal | None:
    """Decide whether a completed sink batch warrants an accept signal.

    members holds (event_id, upstream_time, sum_exec) per batch member. Only
    the slowest member counts: raising budgets on the strength of the early
    ones would walk the tail past gamma. Fires iff gamma - u* > eps_max.
    """
    if not members:
        return None
    event_id, u_star, sum_exec = max(members, key=lambda m: m[1])
    epsilon = gamma - u_star
    if epsilon > eps_max:
        return AcceptSignal(event_id, epsilon, sum_exec)
    return None


def probe_due(drop_count: int, k_probe: int) -> bool:
    """True when the drop counter lands on a probe slot (every k-th drop)."""
    return k_probe > 0 and drop_count % k_probe == 0
