"""Streaming task engine on a discrete-event core.

Each task owns a FIFO queue, a batch under formation, and per-downstream
completion budgets. An event can be discarded at three points, always by
comparing projected or actual completion against the budget (ties keep):

  1. before queueing:   u + xi(1)       > beta   (cannot make it even alone)
  2. before execution:  u + q + xi(m)   > beta   (batch wait ate the slack)
  3. before transmit:   u + pi          > beta(dest)

Probe and avoid_drop events bypass all three. Every decision uses the local
clock of the task's device; skew offsets cancel between the two sides of
each comparison, so source/sink-aligned clocks make decisions skew-proof.

The DES kernel is a plain priority queue of (time, seq, thunk). Real-time
mode runs the identical decision path, paced against the wall clock.
"""

import heapq
import time as _time
import zlib
from collections import OrderedDict, deque
from dataclasses import replace

from .budget import (
    AcceptSignal,
    HistoryTuple,
    RejectSignal,
    apply_accept,
    apply_reject,
    probe_due,
    sink_evaluate,
)
from .model import UNBOUNDED, ClockDomain, Event, ExecTimeModel, OnlineExecTime


class Simulator:
    """Single-threaded virtual-time event loop."""

    def __init__(self) -> None:
        self._heap: list = []
        self._seq = 0
        self.now = 0

    def at(self, t_ms: int, fn) -> None:
        t = int(t_ms)
        if t < self.now:
            t = self.now
        heapq.heappush(self._heap, (t, self._seq, fn))
        self._seq += 1

    def after(self, delay_ms: int, fn) -> None:
        self.at(self.now + int(delay_ms), fn)

    def run(self, until_ms: int | None = None) -> None:
        while self._heap:
            t, _, fn = self._heap[0]
            if until_ms is not None and t > until_ms:
                break
            heapq.heappop(self._heap)
            self.now = t
            fn()
        if until_ms is not None and until_ms > self.now:
            self.now = until_ms


class RealTimeSimulator(Simulator):
    """Same event loop, paced so virtual milliseconds track wall time."""

    def __init__(self, time_scale: float = 1.0):
        super().__init__()
        self.time_scale = time_scale

    def run(self, until_ms: int | None = None) -> None:
        wall_start = _time.perf_counter()
        while self._heap:
            t, _, fn = self._heap[0]
            if until_ms is not None and t > until_ms:
                break
            target = wall_start + (t / 1000.0) / self.time_scale
            while _time.perf_counter() < target:
                remaining = target - _time.perf_counter()
                if remaining > 0.002:
                    _time.sleep(remaining / 2)
            heapq.heappop(self._heap)
            self.now = t
            fn()
        if until_ms is not None and until_ms > self.now:
            self.now = until_ms


class Link:
    """Serialising network link: one transfer at a time, then propagation.

    Step changes from the schedule apply to transfers that start after the
    change time; a transfer in progress keeps the parameters it started with.
    """

    def __init__(self, name: str, bandwidth_bps: float, latency_ms: float):
        self.name = name
        self.schedule: list[tuple[int, float, float]] = [(0, bandwidth_bps, latency_ms)]
        self.busy_until = 0

    def apply_change(self, t_ms: int, bandwidth_bps: float, latency_ms: float) -> None:
        self.schedule.append((int(t_ms), bandwidth_bps, latency_ms))
        self.schedule.sort()

    def params_at(self, t_ms: int) -> tuple[float, float]:
        bw, lat = self.schedule[0][1], self.schedule[0][2]
        for ts, b, l in self.schedule:
            if ts <= t_ms:
                bw, lat = b, l
            else:
                break
        return bw, lat

    def transfer(self, now_ms: int, nbytes: int) -> int:
        """Reserve the link for nbytes and return the arrival instant."""
        start = max(now_ms, self.busy_until)
        bw, lat = self.params_at(start)
        occupancy = int(round(nbytes * 8000.0 / bw))
        self.busy_until = start + occupancy
        return int(round(self.busy_until + lat))


class Transport:
    """Delivers events, signals, and control callbacks between tasks."""

    SIGNAL_BYTES = 64

    def __init__(self, sim: Simulator, default_link: Link | None = None):
        self.sim = sim
        self.tasks: dict[str, "Task"] = {}
        self.default_link = default_link
        self.routes: dict[tuple[str, str], Link | None] = {}

    def register(self, task: "Task") -> None:
        self.tasks[task.task_id] = task

    def set_route(self, src: str, dst: str, link: Link | None) -> None:
        self.routes[(src, dst)] = link

    def _link(self, src: str, dst: str) -> Link | None:
        return self.routes.get((src, dst), self.default_link)

    def _arrival(self, src: str, dst: str, nbytes: int) -> int:
        link = self._link(src, dst)
        if link is None:
            return self.sim.now
        return link.transfer(self.sim.now, nbytes)

    def send(self, src: str, dst: str, events: list[Event]) -> None:
        """One coalesced transfer per destination per dispatch."""
        nbytes = sum(e.size_bytes for e in events)
        arrival = self._arrival(src, dst, nbytes)
        task = self.tasks[dst]
        self.sim.at(arrival, lambda: task.on_group(events))

    def send_signal(self, src: str, dst: str, sig) -> None:
        arrival = self._arrival(src, dst, self.SIGNAL_BYTES)
        task = self.tasks.get(dst)
        if task is None:
            return
        self.sim.at(arrival, lambda: task.on_signal(sig))

    def send_callback(self, src: str, dst: str, fn, nbytes: int = 64) -> None:
        arrival = self._arrival(src, dst, nbytes)
        self.sim.at(arrival, fn)


def partition(key: str, n: int) -> int:
    """Stable key partitioner: deterministic hash modulo downstream count."""
    return zlib.crc32(key.encode()) % n


class Streaming:
    kind = "streaming"


class StaticBatching:
    kind = "static"

    def __init__(self, b: int):
        if b < 1:
            raise ValueError("static batch size must be >= 1")
        self.b = b


class DynamicBatching:
    kind = "dynamic"


class NobBatching:
    """Rate-indexed static batching from a calibration table."""

    kind = "nob"

    def __init__(self, table: dict[int, int], window_ms: int = 5000):
        if not table:
            raise ValueError("empty calibration table")
        self.rates = sorted(table)
        self.table = dict(table)
        self.window_ms = window_ms

    def lookup(self, rate_hz: float) -> int:
        """Entry for the nearest rate not below the measured rate."""
        for r in self.rates:
            if r >= rate_hz:
                return self.table[r]
        return self.table[self.rates[-1]]


class TaskRuntime:
    """Protocol state for one task: budgets, history tuples, counters."""

    def __init__(self, task_id: str, xi: ExecTimeModel, history_capacity: int = 100_000):
        self.task_id = task_id
        self.xi = xi
        self.budgets: dict[str, int] = {}
        self.history: OrderedDict[int, HistoryTuple] = OrderedDict()
        self.history_capacity = history_capacity
        self.ignored_signals = 0
        self.evicted_tuples = 0

    def effective_budget(self) -> int | None:
        """Budget used where the destination is not yet known (points 1-2).

        Maximum over assigned per-downstream budgets: permissive early,
        precise at point 3. Control forks that never take part in the
        protocol stay unset and do not mask the constrained routes.
        """
        if not self.budgets:
            return None
        return max(self.budgets.values())

    def record(self, event_id: int, tup: HistoryTuple) -> None:
        if len(self.history) >= self.history_capacity:
            self.history.popitem(last=False)
            self.evicted_tuples += 1
        self.history[event_id] = tup


class QueuedEvent:
    __slots__ = ("event", "arrival_local")

    def __init__(self, event: Event, arrival_local: int):
        self.event = event
        self.arrival_local = arrival_local


class Batch:
    __slots__ = ("items", "deadline")

    def __init__(self, items: list[QueuedEvent], deadline: int):
        self.items = items
        self.deadline = deadline


class NullMetrics:
    """No-op collector so the engine can run without instrumentation."""

    def record_batch(self, event_id: int, task_id: str, m: int) -> None: ...
    def record_drop(self, event: Event, task_id: str, point: int) -> None: ...
    def record_would_drop(self, event: Event, task_id: str, point: int) -> None: ...
    def record_probe_convert(self, event: Event, task_id: str, point: int) -> None: ...
    def record_delivered(self, event: Event, latency_ms: int, flagged: bool) -> None: ...


class Task:
    """One pipeline task instance bound to a device clock.

    logic maps the kept batch to 1:1 outputs as (payload, size_bytes) pairs;
    terminal tasks return no outputs. router names the downstream task ids
    for an output event, pipeline destination first, control forks after.
    """

    def __init__(
        self,
        sim: Simulator,
        transport: Transport,
        task_id: str,
        clock: ClockDomain,
        xi: ExecTimeModel,
        policy,
        router=None,
        logic=None,
        metrics=None,
        drops_enabled: bool = True,
        k_probe: int = 100,
        eps_max: int = 1000,
        sink_gamma: int | None = None,
        group_consume: bool = False,
        exec_factor=None,
        history_capacity: int = 100_000,
    ):
        self.sim = sim
        self.transport = transport
        self.task_id = task_id
        self.clock = clock
        self.rt = TaskRuntime(task_id, xi, history_capacity)
        self.policy = policy
        self.router = router or (lambda event: [])
        self.logic = logic
        self.metrics = metrics or NullMetrics()
        self.drops_enabled = drops_enabled
        self.k_probe = k_probe
        self.eps_max = eps_max
        self.sink_gamma = sink_gamma
        self.group_consume = group_consume
        self.exec_factor = exec_factor
        if sink_gamma is not None:
            self.rt.budgets["delivery"] = sink_gamma

        self.queue: deque[QueuedEvent] = deque()
        self.current: Batch | None = None
        self.ready: deque[Batch] = deque()
        self.executing = False
        self.drop_counter = 0
        self.dropped = 0
        self.executed_batches = 0
        self._flush_gen = 0
        self._arrivals: deque[int] = deque()  # local times, for rate measurement
        transport.register(self)

    # -- admission ---------------------------------------------------------

    def local_now(self) -> int:
        return self.clock.read(self.sim.now)

    def on_group(self, events: list[Event]) -> None:
        if not self.group_consume:
            for event in events:
                self.on_event(event)
            return
        # Sink-style consumption: the delivered group is executed as one
        # batch, so accept evaluation sees exactly the upstream batch.
        admitted = []
        for event in events:
            qe = self._admit(event)
            if qe is not None:
                admitted.append(qe)
        if admitted:
            self.ready.append(Batch(admitted, UNBOUNDED))
            self._maybe_exec()

    def on_event(self, event: Event) -> None:
        qe = self._admit(event)
        if qe is not None:
            self.queue.append(qe)
            self._form()

    def _admit(self, event: Event) -> QueuedEvent | None:
        local = self.local_now()
        if self.policy.kind == "nob":
            self._arrivals.append(local)
        hdr = event.header
        if not (hdr.probe or hdr.avoid_drop):
            beta = self.rt.effective_budget()
            if beta is not None:
                projected = (local - hdr.source_arrival) + self.rt.xi.xi(1)
                if projected > beta:
                    event = self._handle_drop(event, 1, projected - beta)
                    if event is None:
                        return None
        return QueuedEvent(event, local)

    def _handle_drop(self, event: Event, point: int, epsilon: int) -> Event | None:
        """Shared drop path: reject upstream, maybe probe-convert or forward."""
        self.drop_counter += 1
        hdr = event.header
        sig = RejectSignal(hdr.event_id, epsilon, hdr.sum_queue)
        for tid in hdr.path:
            self.transport.send_signal(self.task_id, tid, sig)
        if not self.drops_enabled:
            self.metrics.record_would_drop(event, self.task_id, point)
            return event
        if probe_due(self.drop_counter, self.k_probe):
            self.metrics.record_probe_convert(event, self.task_id, point)
            return replace_header(event, probe=True)
        self.dropped += 1
        self.metrics.record_drop(event, self.task_id, point)
        return None

    # -- batch formation ---------------------------------------------------

    def _form(self) -> None:
        kind = self.policy.kind
        if kind == "dynamic":
            if self.rt.effective_budget() is None:
                self._form_fixed(1)  # bootstrap: stream until a budget exists
            else:
                self._form_dynamic()
        elif kind == "streaming":
            self._form_fixed(1)
        elif kind == "static":
            self._form_fixed(self.policy.b)
        else:
            self._form_fixed(self._nob_target())
        self._maybe_exec()

    def _form_fixed(self, b: int) -> None:
        while b >= 1 and len(self.queue) >= b:
            items = [self.queue.popleft() for _ in range(b)]
            self.ready.append(Batch(items, UNBOUNDED))
            if self.policy.kind == "nob":
                b = self._nob_target()

    def _nob_target(self) -> int:
        local = self.local_now()
        window = self.policy.window_ms
        while self._arrivals and self._arrivals[0] <= local - window:
            self._arrivals.popleft()
        rate = len(self._arrivals) * 1000.0 / window
        return self.policy.lookup(rate)

    def _delta(self, qe: QueuedEvent) -> int:
        beta = self.rt.effective_budget()
        if beta is None:
            return UNBOUNDED
        return beta + qe.event.header.source_arrival

    def _form_dynamic(self) -> None:
        m_max = self.rt.xi.m_max
        while self.queue:
            qe = self.queue[0]
            if self.current is None:
                self.queue.popleft()
                self.current = Batch([qe], self._delta(qe))
                self._flush_gen += 1
                continue
            m = len(self.current.items)
            t = self.local_now()
            head_delta = self._delta(qe)
            if m < m_max and t + self.rt.xi.xi(m + 1) <= min(self.current.deadline, head_delta):
                self.queue.popleft()
                self.current.items.append(qe)
                self.current.deadline = min(self.current.deadline, head_delta)
            else:
                self._close_current()
        if self.current is not None and not self._flush_if_due():
            self._arm_flush()

    def _close_current(self) -> None:
        if self.current is not None:
            self.ready.append(self.current)
            self.current = None
            self._flush_gen += 1

    def _flush_target(self) -> int:
        batch = self.current
        return batch.deadline - self.rt.xi.xi(len(batch.items))

    def _flush_if_due(self) -> bool:
        if self.current is None or self.current.deadline >= UNBOUNDED:
            return False
        if self.local_now() >= self._flush_target():
            self._close_current()
            return True
        return False

    def _arm_flush(self) -> None:
        if self.current is None or self.current.deadline >= UNBOUNDED:
            return
        self._flush_gen += 1
        gen = self._flush_gen
        ref_target = self.clock.to_reference(self._flush_target())
        self.sim.at(max(ref_target, self.sim.now), lambda: self._on_flush(gen))

    def _on_flush(self, gen: int) -> None:
        if gen != self._flush_gen or self.current is None:
            return
        if self._flush_if_due():
            self._maybe_exec()
        else:
            self._arm_flush()

    # -- execution ---------------------------------------------------------

    def _maybe_exec(self) -> None:
        if self.executing or not self.ready:
            return
        self._start_exec(self.ready.popleft())

    def _start_exec(self, batch: Batch) -> None:
        local = self.local_now()
        m0 = len(batch.items)
        xi_m0 = self.rt.xi.xi(min(m0, self.rt.xi.m_max))
        beta = self.rt.effective_budget()
        kept: list[QueuedEvent] = []
        for qe in batch.items:
            hdr = qe.event.header
            if hdr.probe or hdr.avoid_drop or beta is None:
                kept.append(qe)
                continue
            projected = (local - hdr.source_arrival) + xi_m0
            if projected <= beta:
                kept.append(qe)
                continue
            event = self._handle_drop(qe.event, 2, projected - beta)
            if event is not None:
                kept.append(QueuedEvent(event, qe.arrival_local))
        if not kept:
            self._form()
            return
        m = len(kept)
        estimate = self.rt.xi.xi(min(m, self.rt.xi.m_max))
        factor = self.exec_factor(self.task_id, self.sim.now) if self.exec_factor else 1.0
        actual = max(1, int(round(estimate * factor)))
        for qe in kept:
            self.metrics.record_batch(qe.event.header.event_id, self.task_id, m)
        self.executing = True
        self.executed_batches += 1
        self.sim.after(actual, lambda: self._finish_exec(kept, m, actual, local))

    def _finish_exec(
        self, kept: list[QueuedEvent], m: int, actual: int, exec_start_local: int
    ) -> None:
        if isinstance(self.rt.xi, OnlineExecTime):
            self.rt.xi.observe(min(m, self.rt.xi.m_max), actual)
        if self.logic is not None:
            outputs = self.logic([qe.event for qe in kept])
        else:
            outputs = [(qe.event.payload, qe.event.size_bytes) for qe in kept]
        if self.sink_gamma is not None:
            self._deliver(kept, actual, exec_start_local)
        elif outputs:
            self._dispatch(kept, outputs, actual, exec_start_local)
        self.executing = False
        self._form()

    def _dispatch(self, kept, outputs, actual: int, exec_start_local: int) -> None:
        m = len(kept)
        outgoing: dict[str, list[Event]] = {}
        for qe, out in zip(kept, outputs, strict=True):
            payload, size = out[0], out[1]
            flags = out[2] if len(out) > 2 else None
            hdr = qe.event.header
            u = qe.arrival_local - hdr.source_arrival
            q = exec_start_local - qe.arrival_local
            pi = q + actual
            out_header = hdr.advanced(self.task_id, actual, q)
            if flags:
                out_header = replace(out_header, **flags)
            dests = self.router(qe.event)
            protected = out_header.probe or out_header.avoid_drop
            for i, dest in enumerate(dests):
                fwd = Event(out_header, qe.event.key, payload, size)
                beta_d = self.rt.budgets.get(dest)
                if not protected and beta_d is not None and u + pi > beta_d:
                    fwd = self._handle_drop(fwd, 3, u + pi - beta_d)
                    if fwd is None:
                        continue
                outgoing.setdefault(dest, []).append(fwd)
                if i == 0:  # primary (pipeline) destination reached: keep tuple
                    self.rt.record(hdr.event_id, HistoryTuple(u + pi, q, m, dest))
        for dest, events in outgoing.items():
            self.transport.send(self.task_id, dest, events)

    def _deliver(self, kept, actual: int, exec_start_local: int) -> None:
        """Sink delivery: point 3 against gamma, then accept evaluation."""
        gamma = self.sink_gamma
        members: list[tuple[int, int, int]] = []
        for qe in kept:
            hdr = qe.event.header
            u = qe.arrival_local - hdr.source_arrival
            q = exec_start_local - qe.arrival_local
            latency = u + q + actual
            members.append((hdr.event_id, u, hdr.sum_exec))
            if hdr.probe:
                continue  # probes are protocol traffic, not deliveries
            if latency > gamma and not hdr.avoid_drop:
                survivor = self._handle_drop(qe.event, 3, latency - gamma)
                if survivor is None or survivor.header.probe:
                    continue  # dropped at the sink (or converted to a probe)
            self.metrics.record_delivered(qe.event, latency, flagged=hdr.avoid_drop)
        sig = sink_evaluate(members, gamma, self.eps_max)
        if sig is not None:
            target = next(qe for qe in kept if qe.event.header.event_id == sig.event_id)
            for tid in target.event.header.path:
                self.transport.send_signal(self.task_id, tid, sig)

    # -- signals -----------------------------------------------------------

    def on_signal(self, sig) -> None:
        tup = self.rt.history.get(sig.event_id)
        if tup is None:
            self.rt.ignored_signals += 1
            return
        if isinstance(sig, RejectSignal):
            apply_reject(self.rt, sig, tup.dest)
        else:
            apply_accept(self.rt, sig, tup.dest)


def replace_header(event: Event, **changes) -> Event:
    return Event(replace(event.header, **changes), event.key, event.payload, event.size_bytes)
