"""Analytic bounds for batch sizes, sustainable rates, and latency cost.

Fixed-conditions model: events arrive at a constant rate omega (events/s),
execution cost follows the task's xi, and the headroom is the completion
budget minus the upstream time at arrival. Two constraints define a stable
batch size m:

  1. (m - 1) / omega + xi(m) <= headroom   (last member still makes it)
  2. xi(m) <= headroom / 2                 (execution leaves room for the
                                            batch accumulating behind it)

The sustainable-rate calculation additionally requires omega <= m / xi(m),
the service-rate condition; without it the two constraints above are
satisfied by arbitrarily large omega, since the queueing term only shrinks
as the rate grows. Both readings are exposed for comparison.
"""

from .model import ExecTimeModel


def max_stable_batch(
    rate_hz: float, xi: ExecTimeModel, headroom_ms: int, m_max: int | None = None
) -> int | None:
    """Largest batch size meeting both constraints, or None in the drop regime.

    Found by exhaustive descent from m_max; None means even streaming (m=1)
    cannot satisfy the constraints at this headroom.
    """
    if rate_hz <= 0:
        raise ValueError("rate must be positive")
    top = min(m_max or xi.m_max, xi.m_max)
    gap_ms = 1000.0 / rate_hz
    for m in range(top, 0, -1):
        if (m - 1) * gap_ms + xi.xi(m) > headroom_ms:
            continue
        # streaming has no batch accumulating behind it: constraint 2 waived
        if m == 1 or 2 * xi.xi(m) <= headroom_ms:
            return m
    return None


def max_sustainable_rate(
    xi: ExecTimeModel,
    headroom_ms: int,
    m_max: int | None = None,
    half_headroom: bool = True,
) -> tuple[float, int]:
    """Highest constant rate (events/s) the task can absorb, with its batch size.

    For each m the candidate rate is the service rate m / xi(m); the pair is
    feasible if constraint 1 holds at that rate and, when half_headroom is
    set, constraint 2 as well. Returns (0.0, 0) when nothing fits. When no
    batched size fits but streaming does (xi(1) <= headroom), falls back to
    the streaming service rate at m=1: with at most one event in service
    there is no batch accumulating behind, so constraint 2 does not apply.
    """
    top = min(m_max or xi.m_max, xi.m_max)
    best = (0.0, 0)
    for m in range(top, 0, -1):
        cost = xi.xi(m)
        rate = 1000.0 * m / cost
        if (m - 1) * (cost / m) + cost > headroom_ms:
            continue
        if half_headroom and m > 1 and 2 * cost > headroom_ms:
            continue
        if rate > best[0]:
            best = (rate, m)
    if best[1] == 0 and xi.xi(1) <= headroom_ms:
        return (1000.0 / xi.xi(1), 1)
    return best


def smallest_feasible_batch(
    rate_hz: float, xi: ExecTimeModel, headroom_ms: int, m_max: int | None = None
) -> int | None:
    """Smallest batch size that sustains the given rate within the headroom.

    Requires the service rate m / xi(m) to cover the input rate on top of
    the two stability constraints. None when the rate is beyond capacity.
    """
    if rate_hz <= 0:
        raise ValueError("rate must be positive")
    top = min(m_max or xi.m_max, xi.m_max)
    gap_ms = 1000.0 / rate_hz
    for m in range(1, top + 1):
        cost = xi.xi(m)
        if 1000.0 * m / cost < rate_hz:
            continue
        if (m - 1) * gap_ms + cost <= headroom_ms and (m == 1 or 2 * cost <= headroom_ms):
            return m
    return None


def best_effort_batch(xi: ExecTimeModel, headroom_ms: int, m_max: int | None = None) -> int:
    """Throughput-maximising batch size for rates beyond capacity.

    Used for calibration-table entries at unsustainable rates: pick the m
    with the highest service rate that still fits constraint 2, falling back
    to streaming when nothing does.
    """
    top = min(m_max or xi.m_max, xi.m_max)
    best_m, best_rate = 1, 0.0
    for m in range(1, top + 1):
        if m > 1 and 2 * xi.xi(m) > headroom_ms:
            break
        rate = 1000.0 * m / xi.xi(m)
        if rate > best_rate:
            best_m, best_rate = m, rate
    return best_m


def sustainable_drop_rate(rate_hz: float, xi: ExecTimeModel, headroom_ms: int) -> float:
    """Expected drop rate (events/s) at a constant input rate: max(0, w - w_max)."""
    w_max, _ = max_sustainable_rate(xi, headroom_ms)
    return max(0.0, rate_hz - w_max)


def avg_latency_increase(rate_hz: float, xi: ExecTimeModel, m: int) -> float:
    """Mean added latency (ms) of batching at size m versus streaming.

    Batch-fill waiting averages (m - 1) / (2 * omega) across positions, and
    every member pays the execution-cost gap xi(m) - xi(1).
    """
    if rate_hz <= 0:
        raise ValueError("rate must be positive")
    if m < 1:
        raise ValueError("batch size must be >= 1")
    return (m - 1) * 1000.0 / (2.0 * rate_hz) + xi.xi(m) - xi.xi(1)


def nob_table(
    xi: ExecTimeModel,
    headroom_ms: int,
    rates: list[int],
    m_max: int | None = None,
) -> dict[int, int]:
    """Rate -> batch-size calibration table for rate-indexed static batching.

    Each entry is the smallest feasible batch for that rate; rates beyond
    capacity get the best-effort throughput-maximising size.
    """
    table: dict[int, int] = {}
    for rate in rates:
        m = smallest_feasible_batch(rate, xi, headroom_ms, m_max)
        table[rate] = m if m is not None else best_effort_batch(xi, headroom_ms, m_max)
    return table
