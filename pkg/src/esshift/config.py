"""Scenario configuration: typed defaults, file parsing, validation.

Scenario files are plain UTF-8 INI: sections of key=value lines.  Unknown
sections or keys are rejected so a typo cannot silently fall back to a
default.  Topology entries describe one node per key, e.g.

    [topology]
    ap1 = x=0 y=0 channel=1 range=120
    mn3 = x=50 y=-30
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from .engine import US_PER_MS, US_PER_S
from .network import CHANNELS, MIN_CHANNEL_GAP, NodeId, NodeKind


class ConfigError(Exception):
    """Base for everything wrong with a scenario file."""


class ParseError(ConfigError):
    """Malformed file: syntax, bad literal, unknown key."""


class ValidationError(ConfigError):
    """Well-formed but semantically invalid scenario."""


# ---- typed sections -------------------------------------------------------

@dataclass
class SimConf:
    horizon_s: int = 20
    seed: int = 1


@dataclass
class DetectionConf:
    mode: str = "ewma"                    # ewma | drop_rate
    alpha: float = 0.1
    qlength: float = 10.0
    drop_threshold: float = 0.01
    sample_period_us: int = 20 * US_PER_MS
    window_us: int = US_PER_S
    # Queue-length level at which the WMAN radio is switched on; tracks
    # qlength unless set explicitly.
    wman_activation_qlength: float | None = None

    @property
    def wman_qlength(self) -> float:
        return self.qlength if self.wman_activation_qlength is None \
            else self.wman_activation_qlength


@dataclass
class HandoffConf:
    delta_bps: float = 250_000.0
    t_ignore_us: int = US_PER_S
    t_repeat_us: int = 200 * US_PER_MS
    n_repeat: int = 4
    response_timeout_us: int = 50 * US_PER_MS
    retry_backoff_us: int = US_PER_S


@dataclass
class ScanConf:
    period_us: int = 100 * US_PER_MS
    dwell_us: int = 5 * US_PER_MS
    switch_us: int = 1 * US_PER_MS


@dataclass
class WmanConf:
    enabled: bool = False
    entry_latency_us: int = 20 * US_PER_MS
    scan_latency_us: int = 50 * US_PER_MS
    return_scan_period_us: int = 5 * US_PER_S
    capacity_bps: float = 10_000_000.0


@dataclass
class MacConf:
    effective_capacity_bps: float = 4_200_000.0
    overhead_us: int = 100
    queue_capacity: int = 100


@dataclass
class TrafficConf:
    packet_bytes: int = 1500
    interval_us: int = 20 * US_PER_MS
    stagger_us: int = US_PER_S
    jitter_us: int = 250
    destination: str = "cn1"


@dataclass
class NodeSpec:
    node: NodeId
    x: float
    y: float
    channel: int | None = None
    range_m: float | None = None


@dataclass
class LinkSpec:
    a: NodeId
    b: NodeId
    bandwidth_bps: float
    delay_us: int


@dataclass
class ScenarioConfig:
    sim: SimConf = field(default_factory=SimConf)
    detection: DetectionConf = field(default_factory=DetectionConf)
    handoff: HandoffConf = field(default_factory=HandoffConf)
    scan: ScanConf = field(default_factory=ScanConf)
    wman: WmanConf = field(default_factory=WmanConf)
    mac: MacConf = field(default_factory=MacConf)
    traffic: TrafficConf = field(default_factory=TrafficConf)
    nodes: dict[str, NodeSpec] = field(default_factory=dict)
    links: list[LinkSpec] = field(default_factory=list)
    scheme_enabled: bool = True

    def by_kind(self, kind: NodeKind) -> list[NodeSpec]:
        specs = [s for s in self.nodes.values() if s.node.kind is kind]
        specs.sort(key=lambda s: s.node.index)
        return specs


# ---- parsing ---------------------------------------------------------------

_NODE_RE = re.compile(r"^(mn|ap|bs|ar|cn)(\d+)$")

_SCALARS: dict[str, dict[str, tuple[str, type]]] = {
    # section -> file key -> (attribute, type)
    "sim": {"horizon_s": ("horizon_s", int), "seed": ("seed", int)},
    "detection": {
        "mode": ("mode", str),
        "alpha": ("alpha", float),
        "qlength": ("qlength", float),
        "drop_threshold": ("drop_threshold", float),
        "sample_period_ms": ("sample_period_us", "ms"),
        "window_ms": ("window_us", "ms"),
        "wman_activation_qlength": ("wman_activation_qlength", float),
    },
    "handoff": {
        "delta_bps": ("delta_bps", float),
        "t_ignore_ms": ("t_ignore_us", "ms"),
        "t_repeat_ms": ("t_repeat_us", "ms"),
        "n_repeat": ("n_repeat", int),
        "response_timeout_ms": ("response_timeout_us", "ms"),
        "retry_backoff_ms": ("retry_backoff_us", "ms"),
    },
    "scan": {
        "period_ms": ("period_us", "ms"),
        "dwell_ms": ("dwell_us", "ms"),
        "switch_ms": ("switch_us", "ms"),
        "return_period_s": ("__wman_return_alias", "s"),
    },
    "wman": {
        "enabled": ("enabled", bool),
        "entry_latency_ms": ("entry_latency_us", "ms"),
        "scan_latency_ms": ("scan_latency_us", "ms"),
        "return_scan_period_s": ("return_scan_period_us", "s"),
        "capacity_bps": ("capacity_bps", float),
    },
    "mac": {
        "effective_capacity_bps": ("effective_capacity_bps", float),
        "overhead_us": ("overhead_us", int),
        "queue_capacity": ("queue_capacity", int),
    },
    "traffic": {
        "packet_bytes": ("packet_bytes", int),
        "interval_ms": ("interval_us", "ms"),
        "stagger_s": ("stagger_us", "s"),
        "jitter_us": ("jitter_us", int),
        "destination": ("destination", str),
    },
}

_SECTION_ATTR = {"sim": "sim", "detection": "detection", "handoff": "handoff",
                 "scan": "scan", "wman": "wman", "mac": "mac",
                 "traffic": "traffic"}


def _convert(section: str, key: str, raw: str, kind) -> object:
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind == "ms":
            return round(float(raw) * US_PER_MS)
        if kind == "s":
            return round(float(raw) * US_PER_S)
        return raw.strip()
    except ValueError:
        raise ParseError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _parse_node(name: str, raw: str) -> NodeSpec:
    m = _NODE_RE.match(name)
    if not m:
        raise ParseError(f"[topology] unknown node name {name!r}")
    node = NodeId(NodeKind(m.group(1).upper()), int(m.group(2)))
    fields: dict[str, float] = {}
    for tok in raw.split():
        if "=" not in tok:
            raise ParseError(f"[topology] {name}: bad token {tok!r}")
        k, v = tok.split("=", 1)
        if k not in ("x", "y", "channel", "range"):
            raise ParseError(f"[topology] {name}: unknown field {k!r}")
        fields[k] = _convert("topology", name, v, int if k == "channel" else float)
    if "x" not in fields or "y" not in fields:
        raise ParseError(f"[topology] {name}: x and y are required")
    return NodeSpec(node, fields["x"], fields["y"],
                    channel=fields.get("channel"),
                    range_m=fields.get("range"))


def _parse_link(name: str, raw: str) -> LinkSpec:
    parts = name.split("-")
    if len(parts) != 2:
        raise ParseError(f"[links] bad link name {name!r}")
    ends = []
    for p in parts:
        m = _NODE_RE.match(p.strip())
        if not m:
            raise ParseError(f"[links] {name}: bad endpoint {p!r}")
        ends.append(NodeId(NodeKind(m.group(1).upper()), int(m.group(2))))
    bw = delay = None
    for tok in raw.split():
        if "=" not in tok:
            raise ParseError(f"[links] {name}: bad token {tok!r}")
        k, v = tok.split("=", 1)
        if k == "bandwidth_bps":
            bw = _convert("links", name, v, float)
        elif k == "delay_ms":
            delay = _convert("links", name, v, "ms")
        else:
            raise ParseError(f"[links] {name}: unknown field {k!r}")
    if bw is None or delay is None:
        raise ParseError(f"[links] {name}: bandwidth_bps and delay_ms required")
    return LinkSpec(ends[0], ends[1], bw, delay)


def parse_file(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read scenario file {path}: {exc}") from None
    return parse_text(text, source=str(path))


def parse_text(text: str, source: str = "<config>") -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str  # keep case
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(f"{source}: {exc}") from None

    conf = ScenarioConfig()
    wman_return_alias = None
    for section in cp.sections():
        if section == "topology":
            for name, raw in cp.items(section):
                spec = _parse_node(name, raw)
                conf.nodes[name] = spec
            continue
        if section == "links":
            for name, raw in cp.items(section):
                conf.links.append(_parse_link(name, raw))
            continue
        if section not in _SCALARS:
            raise ParseError(f"{source}: unknown section [{section}]")
        table = _SCALARS[section]
        target = getattr(conf, _SECTION_ATTR[section])
        for key, raw in cp.items(section):
            if key not in table:
                raise ParseError(f"{source}: unknown key {key!r} in [{section}]")
            attr, kind = table[key]
            value = _convert(section, key, raw, kind)
            if attr == "__wman_return_alias":
                wman_return_alias = value
            else:
                setattr(target, attr, value)
    if wman_return_alias is not None:
        conf.wman.return_scan_period_us = wman_return_alias
    validate(conf)
    return conf


# ---- semantic validation ---------------------------------------------------

def _positive(name: str, value) -> None:
    if value is None or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value}")


def validate(conf: ScenarioConfig) -> None:
    d, h, s, w, m, t = (conf.detection, conf.handoff, conf.scan, conf.wman,
                        conf.mac, conf.traffic)
    if d.mode not in ("ewma", "drop_rate"):
        raise ValidationError(f"detection.mode must be ewma or drop_rate, got {d.mode!r}")
    if not 0.0 < d.alpha <= 1.0:
        raise ValidationError(f"detection.alpha must be in (0, 1], got {d.alpha}")
    _positive("detection.qlength", d.qlength)
    if not 0.0 < d.drop_threshold < 1.0:
        raise ValidationError("detection.drop_threshold must be in (0, 1)")
    for name, v in [("detection.sample_period_ms", d.sample_period_us),
                    ("detection.window_ms", d.window_us),
                    ("handoff.delta_bps", h.delta_bps),
                    ("handoff.t_ignore_ms", h.t_ignore_us),
                    ("handoff.t_repeat_ms", h.t_repeat_us),
                    ("handoff.n_repeat", h.n_repeat),
                    ("handoff.response_timeout_ms", h.response_timeout_us),
                    ("scan.period_ms", s.period_us),
                    ("scan.dwell_ms", s.dwell_us),
                    ("wman.entry_latency_ms", w.entry_latency_us),
                    ("wman.scan_latency_ms", w.scan_latency_us),
                    ("wman.return_scan_period_s", w.return_scan_period_us),
                    ("wman.capacity_bps", w.capacity_bps),
                    ("mac.effective_capacity_bps", m.effective_capacity_bps),
                    ("mac.queue_capacity", m.queue_capacity),
                    ("traffic.packet_bytes", t.packet_bytes),
                    ("traffic.interval_ms", t.interval_us),
                    ("sim.horizon_s", conf.sim.horizon_s)]:
        _positive(name, v)
    if m.overhead_us < 0 or t.jitter_us < 0 or s.switch_us < 0:
        raise ValidationError("overhead_us, jitter_us, switch_ms must be >= 0")
    if t.jitter_us * 2 >= t.interval_us:
        raise ValidationError("traffic.jitter_us too large for the interval")
    if s.dwell_us + 2 * s.switch_us >= s.period_us:
        raise ValidationError("scan.period_ms must exceed dwell plus switches")

    if not conf.nodes:
        return  # parameter-only fragment; topology merged elsewhere

    aps = conf.by_kind(NodeKind.AP)
    if not aps:
        raise ValidationError("topology needs at least one AP")
    for spec in aps:
        if spec.channel is None or spec.channel not in CHANNELS:
            raise ValidationError(f"{spec.node}: channel must be in 1..11")
        if not spec.range_m or spec.range_m <= 0:
            raise ValidationError(f"{spec.node}: positive range required")
    # Two APs with overlapping coverage must not share spectrum.
    for i, a in enumerate(aps):
        for b in aps[i + 1:]:
            dist = ((a.x - b.x) ** 2 + (a.y - b.y) ** 2) ** 0.5
            if dist <= a.range_m + b.range_m \
                    and abs(a.channel - b.channel) < MIN_CHANNEL_GAP:
                raise ValidationError(
                    f"{a.node} and {b.node} overlap but channels "
                    f"{a.channel}/{b.channel} are within {MIN_CHANNEL_GAP}")
    for spec in conf.by_kind(NodeKind.BS):
        if not spec.range_m or spec.range_m <= 0:
            raise ValidationError(f"{spec.node}: positive range required")
    if not conf.by_kind(NodeKind.AR):
        raise ValidationError("topology needs an access router")
    if not conf.by_kind(NodeKind.CN):
        raise ValidationError("topology needs a correspondent node")
    if conf.traffic.destination not in conf.nodes:
        raise ValidationError(
            f"traffic.destination {conf.traffic.destination!r} not in topology")
    if conf.wman.enabled and not conf.by_kind(NodeKind.BS):
        raise ValidationError("wman.enabled requires a bs node in the topology")
    known = {str(spec.node).lower() for spec in conf.nodes.values()}
    known |= {f"{spec.node.kind.value.lower()}{spec.node.index}"
              for spec in conf.nodes.values()}
    for link in conf.links:
        for end in (link.a, link.b):
            name = f"{end.kind.value.lower()}{end.index}"
            if name not in known:
                raise ValidationError(f"link references unknown node {end}")


# ---- presets ---------------------------------------------------------------

CASES = ("I", "II", "III", "IV", "V", "VI")

_CASE_FILES = {"I": "case_i.cfg", "II": "case_ii.cfg", "III": "case_iii.cfg",
               "IV": "case_iv.cfg", "V": "case_v.cfg", "VI": "case_vi.cfg"}


def preset_path(case: str) -> Path:
    case = case.upper()
    if case not in _CASE_FILES:
        raise ValidationError(f"unknown case {case!r}; pick one of {', '.join(CASES)}")
    return Path(__file__).parent / "presets" / _CASE_FILES[case]


def load_case(case: str) -> ScenarioConfig:
    return parse_file(preset_path(case))
