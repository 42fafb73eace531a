"""End-to-end scenario: an entity walks a road network watched by cameras.

Builds the full pipeline on one simulator: per-camera frame sources, an
object-detection stage, a recognition stage, the tracker that steers which
cameras are on, and the sink that enforces the delivery target. Camera
frames only exist while the tracker has that camera active, so tracker
quality directly sets the workload.

Configs are flat ``key = value`` text files; ``ScenarioConfig`` can also be
constructed directly in code.
"""

import bisect
import random
from dataclasses import dataclass, field, fields

from .analytics import (
    DEFAULT_FRAME_BYTES,
    CrLogic,
    DetectorProfile,
    FrameRecord,
    VaLogic,
    default_cr_profile,
    default_va_profile,
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
    Transport,
    partition,
)
from .metrics import MetricsCollector
from .model import AffineExecTime, ClockDomain, Event, EventHeader
from .netgen import place_cameras
from .tracking import RoadNetwork, TrackingLogic, load_placement


class ConfigError(ValueError):
    """Invalid scenario configuration; the CLI maps this to exit code 2."""


@dataclass
class ScenarioConfig:
    graph_file: str = ""
    duration: int = 0  # ms, required
    camera_count: int = 1000
    fps: int = 1
    entity_speed: float = 1.0  # walk speed, m/s
    tl_kind: str = "wbfs"  # base | bfs | wbfs
    tl_peak_speed: float = 4.0  # spotlight expansion speed, m/s
    gamma: int = 15000  # delivery target, ms
    batching: str = "dynamic"  # streaming | static:N | dynamic | nob:TABLE
    m_max: int = 25
    drops_enabled: bool = True
    epsilon_max: int = 1000
    probe_k: int = 100
    va_instances: int = 10
    cr_instances: int = 10
    frame_bytes: int = DEFAULT_FRAME_BYTES
    link_schedule: str = ""  # "t,link,bw_bps,lat_ms;..."
    skew_map: str = ""  # "device=skew_ms;..."
    seed: int = 0
    # extras
    placement_file: str = ""
    start_vertex: int = -1  # <0: cam0000's vertex / highest-degree vertex
    fov_m: float = 25.0
    link_bandwidth_bps: float = 1e9
    link_latency_ms: float = 0.5
    nob_window_ms: int = 5000
    compute_schedule: str = ""  # "t0,t1,selector,factor;..."
    history_capacity: int = 100_000
    protect_matches: bool = True
    tl_fixed_len_m: float = -1.0  # <0: mean edge length
    cr_tp_rate: float = 1.0
    cr_fp_rate: float = 0.0
    drain_ms: int = 0  # keep simulating this long after sources stop


_BOOLS = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _to_bool(s: str) -> bool:
    try:
        return _BOOLS[s.strip().lower()]
    except KeyError:
        raise ConfigError(f"not a boolean: {s!r}") from None


def parse_config(text: str) -> ScenarioConfig:
    """Parse flat ``key = value`` lines; '#' lines and blanks are skipped."""
    kinds = {
        f.name: f.type if isinstance(f.type, str) else f.type.__name__
        for f in fields(ScenarioConfig)
    }
    cfg = ScenarioConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value': {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        kind = kinds[key]
        try:
            if kind == "bool":
                parsed = _to_bool(value)
            elif kind == "int":
                parsed = int(value)
            elif kind == "float":
                parsed = float(value)
            else:
                parsed = value
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        setattr(cfg, key, parsed)
    validate_config(cfg)
    return cfg


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def validate_config(cfg: ScenarioConfig) -> None:
    if not cfg.graph_file:
        raise ConfigError("graph_file is required")
    if cfg.duration < 1000:
        raise ConfigError("duration must be at least 1000 ms")
    if cfg.camera_count < 1:
        raise ConfigError("camera_count must be >= 1")
    if cfg.fps < 1:
        raise ConfigError("fps must be >= 1")
    if cfg.tl_kind not in ("base", "bfs", "wbfs"):
        raise ConfigError(f"tl_kind must be base, bfs, or wbfs, not {cfg.tl_kind!r}")
    if cfg.m_max < 1:
        raise ConfigError("m_max must be >= 1")
    if cfg.va_instances < 1 or cfg.cr_instances < 1:
        raise ConfigError("va_instances and cr_instances must be >= 1")
    if cfg.gamma < 1:
        raise ConfigError("gamma must be >= 1 ms")
    parse_batching_spec(cfg.batching)  # raises on malformed values
    parse_skew_map(cfg.skew_map)
    parse_link_schedule(cfg.link_schedule)
    parse_compute_schedule(cfg.compute_schedule)


def parse_batching_spec(spec: str) -> tuple[str, object]:
    """Split a batching spec into (kind, argument)."""
    if spec == "streaming" or spec == "dynamic":
        return spec, None
    if spec.startswith("static:"):
        try:
            b = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad static batch size in {spec!r}") from None
        if b < 1:
            raise ConfigError("static batch size must be >= 1")
        return "static", b
    if spec.startswith("nob:"):
        path = spec.split(":", 1)[1]
        if not path:
            raise ConfigError("nob batching needs a table path: nob:PATH")
        return "nob", path
    raise ConfigError(f"unknown batching spec {spec!r}")


def parse_skew_map(spec: str) -> dict[str, int]:
    """Parse "device=skew_ms;..." and enforce aligned source/sink clocks."""
    skews: dict[str, int] = {}
    if not spec:
        return skews
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad skew entry {part!r}")
        device, value = (s.strip() for s in part.split("=", 1))
        try:
            skews[device] = int(value)
        except ValueError:
            raise ConfigError(f"bad skew value in {part!r}") from None
    for device, skew in skews.items():
        if skew != 0 and (device == "head" or device.startswith("edge:")):
            raise ConfigError(
                f"{device}: source and sink devices must keep zero skew; "
                "budgets are anchored to their clocks"
            )
    return skews


def parse_link_schedule(spec: str) -> list[tuple[int, str, float, float]]:
    """Parse "t,link,bandwidth_bps,latency_ms;..." step changes."""
    out = []
    if not spec:
        return out
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = [s.strip() for s in part.split(",")]
        if len(bits) != 4:
            raise ConfigError(f"bad link schedule entry {part!r}")
        try:
            out.append((int(bits[0]), bits[1], float(bits[2]), float(bits[3])))
        except ValueError:
            raise ConfigError(f"bad link schedule entry {part!r}") from None
    return sorted(out)


def parse_compute_schedule(spec: str) -> list[tuple[int, int, str, float]]:
    """Parse "t0,t1,selector,factor;..." execution slowdown windows.

    selector is '*', an exact task id, or a prefix like 'cr:*'. The factor
    scales actual execution time; the estimate the tasks plan with is not
    told, which is the point.
    """
    out = []
    if not spec:
        return out
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = [s.strip() for s in part.split(",")]
        if len(bits) != 4:
            raise ConfigError(f"bad compute schedule entry {part!r}")
        try:
            t0, t1, factor = int(bits[0]), int(bits[1]), float(bits[3])
        except ValueError:
            raise ConfigError(f"bad compute schedule entry {part!r}") from None
        if t1 <= t0 or factor <= 0:
            raise ConfigError(f"bad compute schedule entry {part!r}")
        out.append((t0, t1, bits[2], factor))
    return out


def _selector_match(selector: str, task_id: str) -> bool:
    if selector == "*" or selector == task_id:
        return True
    return selector.endswith("*") and task_id.startswith(selector[:-1])


def load_nob_table(path: str) -> dict[int, int]:
    """Read a calibration table of "rate_hz batch_size" lines."""
    table: dict[int, int] = {}
    try:
        with open(path) as f:
            for raw in f:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                rate, batch = line.split()
                table[int(float(rate))] = int(batch)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad calibration table {path}: {exc}") from None
    if not table:
        raise ConfigError(f"calibration table {path} is empty")
    return table


# -- entity walk -------------------------------------------------------------


class WalkTrace:
    """Piecewise-constant-speed path over the network, ms resolution."""

    def __init__(self, segments: list[tuple[int, int, int, int, float]]):
        if not segments:
            raise ValueError("empty walk")
        self.segments = segments  # (t0, t1, from_vertex, to_vertex, length_m)
        self._starts = [s[0] for s in segments]

    @property
    def duration_ms(self) -> int:
        return self.segments[-1][1]

    def locate(self, t_ms: int) -> tuple[int, int, float, float]:
        """Edge and metres travelled along it at t; clamps outside the walk."""
        if t_ms <= 0:
            t0, t1, u, v, length = self.segments[0]
            return u, v, length, 0.0
        i = bisect.bisect_right(self._starts, t_ms) - 1
        t0, t1, u, v, length = self.segments[i]
        if t_ms >= t1:
            return u, v, length, length
        return u, v, length, (t_ms - t0) / (t1 - t0) * length

    def visible_vertex(self, t_ms: int, fov_m: float) -> int | None:
        """The junction whose camera could see the entity, if any."""
        u, v, length, along = self.locate(t_ms)
        if along <= fov_m:
            return u
        if length - along <= fov_m:
            return v
        return None

    def sees(self, t_ms: int, vertex: int, fov_m: float) -> bool:
        u, v, length, along = self.locate(t_ms)
        if vertex == u and along <= fov_m:
            return True
        return vertex == v and length - along <= fov_m


def generate_walk(
    net: RoadNetwork, start: int, speed_mps: float, duration_ms: int, seed: int = 0
) -> WalkTrace:
    """Seeded random walk: uniform neighbour choice at every junction."""
    if speed_mps <= 0:
        raise ValueError("walk speed must be positive")
    rng = random.Random(seed)
    segments = []
    t, v = 0, start
    while t < duration_ms:
        nbrs = sorted(net.neighbors(v))
        w, length = nbrs[rng.randrange(len(nbrs))]
        dt = max(1, round(length / speed_mps * 1000))
        segments.append((t, t + dt, v, w, length))
        t += dt
        v = w
    return WalkTrace(segments)


def generate_feed(
    walk: WalkTrace,
    camera_id: str,
    camera_vertex: int,
    fps: int,
    duration_ms: int,
    fov_m: float,
    frame_bytes: int = DEFAULT_FRAME_BYTES,
) -> list[FrameRecord]:
    """Frames one camera would produce if it stayed on for the whole run."""
    interval = round(1000 / fps)
    return [
        FrameRecord(camera_id, t, walk.sees(t, camera_vertex, fov_m), frame_bytes)
        for t in range(0, duration_ms, interval)
    ]


# -- pipeline assembly -------------------------------------------------------


class _Camera:
    """Frame source gated by tracker commands; ticks on the frame grid."""

    __slots__ = ("scn", "camera_id", "vertex", "task", "active", "gen")

    def __init__(self, scn: "Scenario", camera_id: str, vertex: int, task: Task):
        self.scn = scn
        self.camera_id = camera_id
        self.vertex = vertex
        self.task = task
        self.active = False
        self.gen = 0

    def set_active(self, flag: bool) -> None:
        if flag and not self.active:
            self.active = True
            self.gen += 1
            interval = self.scn.interval_ms
            first = (self.scn.sim.now + interval - 1) // interval * interval
            self.scn.sim.at(first, lambda gen=self.gen: self._tick(gen))
        elif not flag and self.active:
            self.active = False
            self.gen += 1

    def _tick(self, gen: int) -> None:
        if gen != self.gen or not self.active:
            return
        if self.scn.sim.now >= self.scn.config.duration:
            return
        self.scn.emit_frame(self)
        self.scn.sim.after(self.scn.interval_ms, lambda: self._tick(gen))


class _TlAdapter:
    """Task logic for the tracker: folds detections, commands cameras."""

    def __init__(self, scn: "Scenario", tracking: TrackingLogic, state):
        self.scn = scn
        self.tracking = tracking
        self.state = state
        self.positives = 0
        self.collapse_violations = 0  # fresh positive that left active != 1

    def __call__(self, events: list[Event]) -> list[tuple]:
        detections = [e.payload for e in events]
        fresh_positive = any(
            d.matched and d.frame_ts >= self.state.last_seen_ms for d in detections
        )
        self.state, activate, deactivate = self.tracking.process_detections(
            detections, self.state
        )
        if fresh_positive:
            self.positives += 1
            if self.tracking.kind != "base" and len(self.state.active) != 1:
                self.collapse_violations += 1
        for cam in activate:
            self.scn.send_camera_command(cam, True)
        for cam in deactivate:
            self.scn.send_camera_command(cam, False)
        self.scn.collector.note_active(len(self.state.active))
        return []


class Scenario:
    """A fully wired run: build once, call run(), read the collector."""

    def __init__(self, config: ScenarioConfig, realtime: bool = False, time_scale: float = 1.0):
        validate_config(config)
        self.config = config
        self.interval_ms = round(1000 / config.fps)
        self.collector = MetricsCollector(config.gamma)
        self._next_event_id = 0

        try:
            self.net = RoadNetwork.from_file(config.graph_file)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load graph: {exc}") from None
        self._resolve_placement()
        walk_span = config.duration + 2 * config.gamma + 60_000
        self.walk = generate_walk(
            self.net, self.start_vertex, config.entity_speed, walk_span, config.seed
        )
        fixed_len = config.tl_fixed_len_m if config.tl_fixed_len_m > 0 else None
        self.tracking = TrackingLogic(
            config.tl_kind, self.net, self.placement, config.tl_peak_speed, fixed_len
        )

        self.sim = RealTimeSimulator(time_scale) if realtime else Simulator()
        self._build_links()
        self._build_tasks()

    # -- construction overridden in parts by tests --------------------------

    def _resolve_placement(self) -> None:
        cfg = self.config
        if cfg.placement_file:
            self.placement = load_placement(cfg.placement_file)
            if not self.placement:
                raise ConfigError("placement file has no cameras")
            known = set(self.net.vertices)
            for cam, vertex in self.placement.items():
                if vertex not in known:
                    raise ConfigError(f"{cam} placed on unknown vertex {vertex}")
            if cfg.start_vertex >= 0:
                self.start_vertex = cfg.start_vertex
            else:
                self.start_vertex = self.placement[min(self.placement)]
        else:
            if cfg.start_vertex >= 0:
                self.start_vertex = cfg.start_vertex
            else:
                # No better prior without coordinates: densest junction.
                self.start_vertex = max(
                    self.net.vertices, key=lambda v: (len(self.net.neighbors(v)), -v)
                )
            self.placement = place_cameras(self.net, self.start_vertex, cfg.camera_count)
        if self.start_vertex not in set(self.net.vertices):
            raise ConfigError(f"start vertex {self.start_vertex} not in graph")

    def _build_links(self) -> None:
        cfg = self.config
        self.link = Link("net", cfg.link_bandwidth_bps, cfg.link_latency_ms)
        for t, name, bw, lat in parse_link_schedule(cfg.link_schedule):
            if name != "net":
                raise ConfigError(f"unknown link {name!r} in link_schedule")
            self.link.apply_change(t, bw, lat)
        self.transport = Transport(self.sim, default_link=self.link)

    def _policy(self):
        kind, arg = parse_batching_spec(self.config.batching)
        if kind == "streaming":
            return Streaming()
        if kind == "dynamic":
            return DynamicBatching()
        if kind == "static":
            return StaticBatching(arg)
        return NobBatching(load_nob_table(arg), self.config.nob_window_ms)

    def _build_tasks(self) -> None:
        cfg = self.config
        skews = parse_skew_map(cfg.skew_map)
        compute = parse_compute_schedule(cfg.compute_schedule)

        def exec_factor(task_id: str, now: int) -> float:
            for t0, t1, selector, factor in compute:
                if t0 <= now < t1 and _selector_match(selector, task_id):
                    return factor
            return 1.0

        factor_fn = exec_factor if compute else None
        common = dict(
            metrics=self.collector,
            drops_enabled=cfg.drops_enabled,
            k_probe=cfg.probe_k,
            eps_max=cfg.epsilon_max,
            exec_factor=factor_fn,
            history_capacity=cfg.history_capacity,
        )

        def clock(device: str) -> ClockDomain:
            return ClockDomain(device, skews.get(device, 0))

        n_va, n_cr = cfg.va_instances, cfg.cr_instances
        va_profile = default_va_profile(cfg.m_max)
        cr_profile = DetectorProfile(
            default_cr_profile(cfg.m_max).cost, cfg.cr_tp_rate, cfg.cr_fp_rate, cfg.seed
        )

        self.cameras: dict[str, _Camera] = {}
        for cam in sorted(self.placement):
            task = Task(
                self.sim,
                self.transport,
                f"fc:{cam}",
                clock(f"edge:{cam}"),
                AffineExecTime(0, 1, m_max=4),
                Streaming(),
                router=lambda e: [f"va:{partition(e.key, n_va)}"],
                **common,
            )
            self.cameras[cam] = _Camera(self, cam, self.placement[cam], task)

        for i in range(n_va):
            Task(
                self.sim,
                self.transport,
                f"va:{i}",
                clock(f"va:{i}"),
                va_profile.cost,
                self._policy(),
                router=lambda e: [f"cr:{partition(e.key, n_cr)}"],
                logic=VaLogic(),
                **common,
            )
        for i in range(n_cr):
            Task(
                self.sim,
                self.transport,
                f"cr:{i}",
                clock(f"cr:{i}"),
                cr_profile.cost,
                self._policy(),
                router=lambda e: ["uv", "tl"],
                logic=CrLogic(cr_profile, f"cr:{i}", cfg.protect_matches),
                **common,
            )

        state = self.tracking.initial_state(self.start_vertex, 0)
        if not state.active:
            # would deadlock: no frames -> no detections -> no activations
            raise ConfigError("no camera covers the start vertex; tracking cannot boot")
        self.tl_adapter = _TlAdapter(self, self.tracking, state)
        Task(
            self.sim,
            self.transport,
            "tl",
            clock("head"),
            AffineExecTime(0, 1, m_max=4),
            Streaming(),
            logic=self.tl_adapter,
            **common,
        )
        self.uv = Task(
            self.sim,
            self.transport,
            "uv",
            clock("head"),
            AffineExecTime(0, 1, m_max=max(cfg.m_max, 4)),
            Streaming(),
            sink_gamma=cfg.gamma,
            group_consume=True,
            **common,
        )

    # -- runtime hooks -------------------------------------------------------

    def emit_frame(self, camera: _Camera) -> None:
        t = self.sim.now  # edge clocks are skew-free: local == reference
        event_id = self._next_event_id
        self._next_event_id += 1
        record = FrameRecord(
            camera.camera_id,
            t,
            self.walk.sees(t, camera.vertex, self.config.fov_m),
            self.config.frame_bytes,
        )
        header = EventHeader(event_id, source_arrival=t)
        self.collector.on_generated(event_id, camera.camera_id, t)
        camera.task.on_event(Event(header, camera.camera_id, record, record.payload_size))

    def send_camera_command(self, camera_id: str, flag: bool) -> None:
        cam = self.cameras[camera_id]
        self.transport.send_callback("tl", f"fc:{camera_id}", lambda: cam.set_active(flag))

    def _sample(self) -> None:
        self.collector.note_active_sample(self.sim.now, len(self.tl_adapter.state.active))
        if self.sim.now + 1000 <= self.config.duration:
            self.sim.after(1000, self._sample)

    # -- run -----------------------------------------------------------------

    def run(self) -> MetricsCollector:
        for cam in sorted(self.tl_adapter.state.active):
            self.cameras[cam].set_active(True)
        self.collector.note_active(len(self.tl_adapter.state.active))
        self.sim.at(0, self._sample)
        self.sim.run(until_ms=self.config.duration + self.config.drain_ms)
        return self.collector


def run_scenario(
    config: ScenarioConfig, realtime: bool = False, time_scale: float = 1.0
) -> Scenario:
    scn = Scenario(config, realtime=realtime, time_scale=time_scale)
    scn.run()
    return scn
