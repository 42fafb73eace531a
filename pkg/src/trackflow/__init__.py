"""Deadline-aware streaming dataflow for distributed camera analytics.

The package couples a completion-budget protocol (how long each pipeline
stage may still spend on an event), deadline-aware batching and load
shedding, and spotlight-style camera tracking, all runnable on a
discrete-event simulator or paced against the wall clock.
"""

from .bounds import (
    avg_latency_increase,
    best_effort_batch,
    max_stable_batch,
    max_sustainable_rate,
    nob_table,
    smallest_feasible_batch,
    sustainable_drop_rate,
)
from .budget import (
    AcceptSignal,
    HistoryTuple,
    RejectSignal,
    apply_accept,
    apply_reject,
    compute_increase_lambda,
    compute_reduce_lambda,
    probe_due,
    sink_evaluate,
)
from .engine import (
    DynamicBatching,
    Link,
    NobBatching,
    RealTimeSimulator,
    Simulator,
    StaticBatching,
    Streaming,
    Task,
    TaskRuntime,
    Transport,
    partition,
)
from .metrics import MetricsCollector
from .model import (
    UNBOUNDED,
    AffineExecTime,
    ClockDomain,
    Event,
    EventHeader,
    ExecTimeModel,
    OnlineExecTime,
    TableExecTime,
    skew_corrected_upstream_time,
)
from .netgen import generate_road_network, place_cameras
from .scenario import (
    ConfigError,
    Scenario,
    ScenarioConfig,
    WalkTrace,
    generate_feed,
    generate_walk,
    load_config,
    load_nob_table,
    parse_config,
    run_scenario,
)
from .tracking import (
    Detection,
    RoadNetwork,
    TrackingLogic,
    TrackState,
    load_placement,
    save_placement,
    spotlight_radius,
    unweighted_bfs,
    weighted_bfs,
)

__version__ = "0.1.0"

__all__ = [
    "UNBOUNDED",
    "AcceptSignal",
    "AffineExecTime",
    "ClockDomain",
    "ConfigError",
    "Detection",
    "DynamicBatching",
    "Event",
    "EventHeader",
    "ExecTimeModel",
    "HistoryTuple",
    "Link",
    "MetricsCollector",
    "NobBatching",
    "OnlineExecTime",
    "RealTimeSimulator",
    "RejectSignal",
    "RoadNetwork",
    "Scenario",
    "ScenarioConfig",
    "Simulator",
    "StaticBatching",
    "Streaming",
    "TableExecTime",
    "Task",
    "TaskRuntime",
    "TrackState",
    "TrackingLogic",
    "Transport",
    "WalkTrace",
    "apply_accept",
    "apply_reject",
    "avg_latency_increase",
    "best_effort_batch",
    "compute_increase_lambda",
    "compute_reduce_lambda",
    "generate_feed",
    "generate_road_network",
    "generate_walk",
    "load_config",
    "load_nob_table",
    "load_placement",
    "max_stable_batch",
    "max_sustainable_rate",
    "nob_table",
    "parse_config",
    "partition",
    "place_cameras",
    "probe_due",
    "run_scenario",
    "save_placement",
    "sink_evaluate",
    "skew_corrected_upstream_time",
    "smallest_feasible_batch",
    "spotlight_radius",
    "sustainable_drop_rate",
    "unweighted_bfs",
    "weighted_bfs",
]
