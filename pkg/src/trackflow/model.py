"""Core timing model: clock domains, event headers, and execution-time models.

All timestamps are integer milliseconds on a single reference timeline.
Devices read time through a ClockDomain that adds a fixed skew, so code
that runs "on" a device only ever sees local readings. Durations (queue
times, execution costs, budgets) are skew-free by construction.
"""

import bisect
from dataclasses import dataclass, field, replace

# Sentinel for "no deadline": comparisons against it always keep/extend.
UNBOUNDED = 1 << 60


@dataclass(frozen=True)
class ClockDomain:
    """A device clock with a fixed offset from the reference timeline."""

    device_id: str
    skew_ms: int = 0

    def read(self, ref_time_ms: int) -> int:
        """Local reading of the given reference instant."""
        return ref_time_ms + self.skew_ms

    def to_reference(self, local_time_ms: int) -> int:
        """Reference instant at which this clock shows local_time_ms."""
        return local_time_ms - self.skew_ms


def skew_corrected_upstream_time(a_i: int, a1: int, sigma_i: int) -> int:
    """Upstream time of an event observed at a skewed clock.

    a_i is the local arrival reading, a1 the source timestamp (source clock
    is skew-free), sigma_i the observer's skew. Subtracting sigma_i restores
    the reference arrival instant.
    """
    return (a_i - sigma_i) - a1


@dataclass
class EventHeader:
    """Metadata carried by every event through the pipeline.

    sum_exec / sum_queue accumulate the execution and queue durations charged
    at the tasks already traversed; both are nondecreasing along the path.
    path records the task ids traversed, in order, for signal routing.
    """

    event_id: int
    source_arrival: int  # a1: admission timestamp at the source task
    sum_exec: int = 0
    sum_queue: int = 0
    avoid_drop: bool = False
    probe: bool = False
    path: tuple[str, ...] = ()

    def advanced(self, task_id: str, exec_ms: int, queue_ms: int) -> "EventHeader":
        return replace(
            self,
            sum_exec=self.sum_exec + exec_ms,
            sum_queue=self.sum_queue + queue_ms,
            path=self.path + (task_id,),
        )


@dataclass
class Event:
    """A keyed payload plus header; payloads are opaque to the engine."""

    header: EventHeader
    key: str
    payload: object = None
    size_bytes: int = 256


class ExecTimeModel:
    """Batch execution-cost model xi(b), strictly increasing in b."""

    m_max: int

    def xi(self, b: int) -> int:
        raise NotImplementedError

    def _check(self, b: int) -> None:
        if not 1 <= b <= self.m_max:
            raise ValueError(f"batch size {b} outside [1, {self.m_max}]")


class AffineExecTime(ExecTimeModel):
    """xi(b) = c0 + c1 * b, in integer milliseconds."""

    def __init__(self, c0: int, c1: int, m_max: int = 25):
        if c1 < 1:
            raise ValueError("c1 must be >= 1 ms for strict monotonicity")
        if c0 < 0 or m_max < 1:
            raise ValueError("c0 must be >= 0 and m_max >= 1")
        self.c0 = int(c0)
        self.c1 = int(c1)
        self.m_max = int(m_max)

    def xi(self, b: int) -> int:
        self._check(b)
        return self.c0 + self.c1 * b

    def __repr__(self) -> str:
        return f"AffineExecTime({self.c0}, {self.c1}, m_max={self.m_max})"


class TableExecTime(ExecTimeModel):
    """Empirical cost table with linear interpolation between measured sizes.

    Requires entries for b=1 and b=m_max; interpolated values are rounded and
    then nudged where needed to stay strictly increasing.
    """

    def __init__(self, points: dict[int, float], m_max: int = 25):
        if 1 not in points or m_max not in points:
            raise ValueError("table must cover b=1 and b=m_max")
        self.m_max = int(m_max)
        xs = sorted(points)
        ys = [points[x] for x in xs]
        if any(ys[i] >= ys[i + 1] for i in range(len(ys) - 1)):
            raise ValueError("table entries must be strictly increasing")
        self._table = [0] * (m_max + 1)
        for b in range(1, m_max + 1):
            i = bisect.bisect_left(xs, b)
            if i < len(xs) and xs[i] == b:
                val = ys[i]
            else:
                x0, x1 = xs[i - 1], xs[i]
                y0, y1 = ys[i - 1], ys[i]
                val = y0 + (y1 - y0) * (b - x0) / (x1 - x0)
            self._table[b] = int(round(val))
        for b in range(2, m_max + 1):  # rounding may flatten adjacent entries
            if self._table[b] <= self._table[b - 1]:
                self._table[b] = self._table[b - 1] + 1

    def xi(self, b: int) -> int:
        self._check(b)
        return self._table[b]


class OnlineExecTime(ExecTimeModel):
    """Cost model fitted at runtime from observed batch durations.

    Starts from a prior model and folds each observation in with an
    exponential moving average (smoothing 0.2). The updated entry is clamped
    between its neighbours so the table stays strictly increasing.
    """

    def __init__(self, prior: ExecTimeModel, alpha: float = 0.2):
        self.m_max = prior.m_max
        self.alpha = alpha
        self._table = [0] + [float(prior.xi(b)) for b in range(1, self.m_max + 1)]

    def xi(self, b: int) -> int:
        self._check(b)
        return int(round(self._table[b]))

    def observe(self, b: int, actual_ms: int) -> None:
        self._check(b)
        new = (1 - self.alpha) * self._table[b] + self.alpha * actual_ms
        if b > 1:
            new = max(new, self._table[b - 1] + 1)
        if b < self.m_max:
            new = min(new, self._table[b + 1] - 1)
        self._table[b] = new
