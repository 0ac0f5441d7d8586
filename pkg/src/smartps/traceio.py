"""Trace schema, CSV parsing/writing, and synthetic mobility traces.

A trace is a time-ordered list of :class:`AttributeSample` rows carrying the
per-interface MAC attributes (RSSI, SINR, RSRP, RSRQ, TD, RD), the TCP-layer
attributes (RTT, CWND, PLR, PDR), the active path priority (WF = WiFi first,
LF = LTE first) and the two performance metrics: application goodput (AG,
Mbps) and application delay (AD, ms).

Real-world traces of this shape are not publicly available, so
:func:`synthesize_trace` generates internally consistent ones from scripted
mobility scenarios: MAC attributes follow per-segment trajectories and the
TCP-layer attributes are derived through the simulator's channel model.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np

WF = "WF"
LF = "LF"

# Canonical CSV column order.  PLR columns are serialized as percent strings
# ("0.03%"); everything else is a plain decimal.  `label` is optional and only
# present in merged/labeled traces.
TRACE_COLUMNS = [
    "t",
    "rssi_lte", "rssi_wifi",
    "sinr_lte", "sinr_wifi",
    "rsrp_lte", "rsrq_lte",
    "td_wifi", "rd_wifi",
    "rtt_lte", "rtt_wifi",
    "cwnd_lte", "cwnd_wifi",
    "plr_lte", "plr_wifi",
    "pdr_lte", "pdr_wifi",
    "prio", "ag", "ad",
]

_PLR_COLUMNS = {"plr_lte", "plr_wifi"}
_PRIO_TAGS = {"WF": WF, "LF": LF, "LF(4G)": LF, "LF(5G)": LF}


class TraceError(ValueError):
    """Malformed trace file or scenario file."""


@dataclass(frozen=True)
class AttributeSample:
    """One timestamped row of cross-layer attributes plus performance metrics."""

    t: float                 # seconds since trace start
    rssi_lte: float          # dBm, <= 0
    rssi_wifi: float         # dBm, <= 0
    sinr_lte: float          # dB
    sinr_wifi: float         # dB
    rsrp_lte: float          # dBm, <= 0
    rsrq_lte: float          # dB
    td_wifi: float           # Mbps, >= 0
    rd_wifi: float           # Mbps, >= 0
    rtt_lte: float           # ms, > 0
    rtt_wifi: float          # ms, > 0
    cwnd_lte: float          # packets, >= 1
    cwnd_wifi: float         # packets, >= 1
    plr_lte: float           # fraction in [0, 1]
    plr_wifi: float          # fraction in [0, 1]
    pdr_lte: float           # Mbps, >= 0
    pdr_wifi: float          # Mbps, >= 0
    prio: str                # WF or LF
    ag: float                # Mbps, >= 0
    ad: float                # ms, > 0
    label: Optional[str] = None  # WF or LF; present only in merged datasets
    # Raw priority tag as it appeared in the file (e.g. "LF(4G)").  The
    # interface-pair suffix is metadata only; the classifier sees `prio`.
    prio_tag: Optional[str] = None

    def validate(self, where: str = "sample") -> None:
        def bad(cond, msg):
            if cond:
                raise TraceError(f"{where}: {msg}")

        bad(self.prio not in (WF, LF), f"prio must be WF or LF, got {self.prio!r}")
        if self.label is not None:
            bad(self.label not in (WF, LF), f"label must be WF or LF, got {self.label!r}")
        for name in ("plr_lte", "plr_wifi"):
            v = getattr(self, name)
            bad(not (0.0 <= v <= 1.0), f"{name}={v} outside [0,1]")
        for name in ("pdr_lte", "pdr_wifi", "td_wifi", "rd_wifi", "ag"):
            bad(getattr(self, name) < 0.0, f"{name} must be >= 0")
        for name in ("rtt_lte", "rtt_wifi", "ad"):
            bad(getattr(self, name) <= 0.0, f"{name} must be > 0")
        for name in ("cwnd_lte", "cwnd_wifi"):
            bad(getattr(self, name) < 1.0, f"{name} must be >= 1")
        for name in ("rssi_lte", "rssi_wifi", "rsrp_lte"):
            bad(getattr(self, name) > 0.0, f"{name} is received power and must be <= 0 dBm")


def _fmt_num(x: float) -> str:
    """Shortest decimal that round-trips to the same float; ints lose the '.0'."""
    if x == math.floor(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def _fmt_plr(frac: float) -> str:
    # Decimal exponent shift keeps write->parse exact: the percent string is
    # the shortest repr of the fraction with the point moved two places.
    d = Decimal(_fmt_num(frac)) * 100
    return format(d.normalize(), "f") + "%"


def _parse_plr(cell: str) -> float:
    s = cell.strip()
    if s.endswith("%"):
        return float(Decimal(s[:-1]) / 100)
    return float(s)


def parse_trace(stream: Union[str, TextIO]) -> list[AttributeSample]:
    """Parse a trace CSV (header required) into a list of samples.

    PLR cells may be percent-formatted ("0.03%") or plain fractions.  The raw
    priority tags LF(4G)/LF(5G) collapse to prio=LF with the tag preserved in
    ``prio_tag``.  Raises :class:`TraceError` naming the offending row and
    column on any malformed cell or invariant violation.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = [ln.rstrip("\n") for ln in stream if ln.strip() != ""]
    if not lines:
        raise TraceError("empty input: header row required")
    header = [h.strip() for h in lines[0].split(",")]
    has_label = header == TRACE_COLUMNS + ["label"]
    if not has_label and header != TRACE_COLUMNS:
        missing = [c for c in TRACE_COLUMNS if c not in header]
        if missing:
            raise TraceError(f"header: missing column(s) {missing}")
        raise TraceError(f"header: unexpected column order {header}")

    samples: list[AttributeSample] = []
    prev_t = -math.inf
    for rowno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise TraceError(f"row {rowno}: expected {len(header)} cells, got {len(cells)}")
        vals = {}
        for col, cell in zip(header, cells):
            if col in ("prio", "label"):
                continue
            try:
                vals[col] = _parse_plr(cell) if col in _PLR_COLUMNS else float(cell)
            except (ValueError, ArithmeticError):
                raise TraceError(f"row {rowno}, column {col}: non-numeric cell {cell!r}") from None
        raw_prio = cells[header.index("prio")]
        if raw_prio not in _PRIO_TAGS:
            raise TraceError(f"row {rowno}, column prio: unknown tag {raw_prio!r}")
        label = None
        if has_label:
            raw_label = cells[-1]
            if raw_label != "":
                if raw_label not in (WF, LF):
                    raise TraceError(f"row {rowno}, column label: unknown label {raw_label!r}")
                label = raw_label
        sample = AttributeSample(
            prio=_PRIO_TAGS[raw_prio], label=label,
            prio_tag=raw_prio if raw_prio not in (WF, LF) else None,
            **vals,
        )
        sample.validate(f"row {rowno}")
        if sample.t < prev_t:
            raise TraceError(f"row {rowno}, column t: time goes backwards ({sample.t} < {prev_t})")
        prev_t = sample.t
        samples.append(sample)
    return samples


def write_trace(samples: Sequence[AttributeSample], include_label: Optional[bool] = None) -> str:
    """Serialize samples to canonical CSV text; exact inverse of parse_trace."""
    if include_label is None:
        include_label = any(s.label is not None for s in samples)
    header = TRACE_COLUMNS + (["label"] if include_label else [])
    out = [",".join(header)]
    prev_t = -math.inf
    for i, s in enumerate(samples):
        s.validate(f"sample {i}")
        if s.t < prev_t:
            raise TraceError(f"sample {i}: time goes backwards")
        prev_t = s.t
        cells = []
        for col in TRACE_COLUMNS:
            if col == "prio":
                cells.append(s.prio_tag if s.prio_tag else s.prio)
            elif col in _PLR_COLUMNS:
                cells.append(_fmt_plr(getattr(s, col)))
            else:
                cells.append(_fmt_num(getattr(s, col)))
        if include_label:
            cells.append(s.label if s.label is not None else "")
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Scenarios and synthetic traces
# ---------------------------------------------------------------------------

# MAC attributes a scenario can drive.  TCP-layer attributes are derived.
SCENARIO_ATTRS = [
    "rssi_wifi", "rssi_lte", "sinr_wifi", "sinr_lte",
    "rsrp_lte", "rsrq_lte", "td_wifi", "rd_wifi",
]

_DEFAULT_ATTRS = {
    "rssi_wifi": -45.0, "rssi_lte": -60.0,
    "sinr_wifi": 22.0, "sinr_lte": 15.0,
    "rsrp_lte": -90.0, "rsrq_lte": -10.0,
    "td_wifi": 30.0, "rd_wifi": 30.0,
}

# Clamp ranges keeping generated values inside AttributeSample invariants.
_CLAMPS = {
    "rssi_wifi": (-120.0, 0.0), "rssi_lte": (-120.0, 0.0),
    "sinr_wifi": (-20.0, 50.0), "sinr_lte": (-20.0, 50.0),
    "rsrp_lte": (-140.0, 0.0), "rsrq_lte": (-30.0, 0.0),
    "td_wifi": (0.0, 1000.0), "rd_wifi": (0.0, 1000.0),
}


@dataclass(frozen=True)
class Trajectory:
    """Per-attribute value evolution inside one scenario segment.

    kind is one of "constant" (v0), "ramp" (v0 -> v1 linearly over the
    segment) or "noisy" (v0 plus additive Gaussian noise with sigma=v1).
    """

    kind: str
    v0: float
    v1: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "ramp", "noisy"):
            raise TraceError(f"unknown trajectory kind {self.kind!r}")


def constant(v: float) -> Trajectory:
    return Trajectory("constant", v)


def linear_ramp(v0: float, v1: float) -> Trajectory:
    return Trajectory("ramp", v0, v1)


def noisy(v: float, sigma: float) -> Trajectory:
    return Trajectory("noisy", v, sigma)


@dataclass(frozen=True)
class Segment:
    start: float
    trajectories: dict[str, Trajectory] = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    """Scripted two-path mobility scenario driving the MAC attributes."""

    name: str
    duration: float
    segments: tuple[Segment, ...]
    seed: int = 0

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: s.start))
        object.__setattr__(self, "segments", segs)
        if self.duration < 0:
            raise TraceError("scenario duration must be >= 0")
        if self.duration > 0:
            if not segs or segs[0].start != 0.0:
                raise TraceError("first segment must start at t=0")
            for a, b in zip(segs, segs[1:]):
                if b.start <= a.start:
                    raise TraceError("segments must have strictly increasing start times")
        for seg in segs:
            for attr in seg.trajectories:
                if attr not in SCENARIO_ATTRS:
                    raise TraceError(f"segment drives unknown attribute {attr!r}")

    def segment_end(self, idx: int) -> float:
        if idx + 1 < len(self.segments):
            return self.segments[idx + 1].start
        return self.duration

    def attribute_series(self, attr: str, times: np.ndarray, rng=None) -> np.ndarray:
        """Evaluate one MAC attribute at the given times (noise-free unless rng given)."""
        out = np.full(len(times), _DEFAULT_ATTRS[attr])
        for i, seg in enumerate(self.segments):
            end = self.segment_end(i)
            mask = (times >= seg.start) & (times < end) if end < self.duration \
                else (times >= seg.start)
            traj = seg.trajectories.get(attr)
            if traj is None:
                continue
            if traj.kind == "constant":
                out[mask] = traj.v0
            elif traj.kind == "ramp":
                span = max(end - seg.start, 1e-9)
                out[mask] = traj.v0 + (traj.v1 - traj.v0) * (times[mask] - seg.start) / span
            else:  # noisy
                out[mask] = traj.v0
                if rng is not None and traj.v1 > 0:
                    out[mask] += rng.normal(0.0, traj.v1, size=int(mask.sum()))
        lo, hi = _CLAMPS[attr]
        return np.clip(out, lo, hi)


def _attr_rng(seed: int, stream: int) -> np.random.Generator:
    # Philox is counter-based: each (seed, stream) pair is an independent,
    # order-insensitive stream, so evaluation order cannot change a trace.
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, stream]))


def scenario_mac_series(scenario: Scenario, times: np.ndarray) -> dict[str, np.ndarray]:
    """All MAC attribute series at the given times, with seeded noise."""
    series = {}
    for i, attr in enumerate(SCENARIO_ATTRS):
        series[attr] = scenario.attribute_series(attr, times, rng=_attr_rng(scenario.seed, i))
    return series


def synthesize_trace(scenario: Scenario, sampling_interval: float = 0.1) -> list[AttributeSample]:
    """Generate a trace for a scenario, alternating WF/LF priority per row.

    MAC attributes follow the scenario trajectories; TCP-layer attributes
    (RTT, CWND, PLR, PDR) are derived from them through the simulator's
    channel model so traces are internally consistent.  AG/AD reflect the
    row's priority: the primary path dominates goodput and sets the delay.
    Deterministic for a fixed (scenario, sampling_interval).
    """
    from . import netsim  # deferred: netsim imports traceio for Scenario

    if sampling_interval <= 0:
        raise TraceError("sampling_interval must be > 0")
    n = int(math.floor(scenario.duration / sampling_interval + 1e-9))
    if n <= 0:
        return []
    times = np.arange(n) * sampling_interval
    mac = scenario_mac_series(scenario, times)

    cap_w, rtt_w, loss_w = netsim.channel_map_arrays(mac["rssi_wifi"], mac["sinr_wifi"], "WIFI")
    cap_l, rtt_l, loss_l = netsim.channel_map_arrays(mac["rssi_lte"], mac["sinr_lte"], "LTE")
    eff_w = cap_w * (1.0 - loss_w)
    eff_l = cap_l * (1.0 - loss_l)

    rng = _attr_rng(scenario.seed, 101)
    noise = {
        "ag": rng.normal(0, 0.4, n), "ad": rng.normal(0, 3.0, n),
        "rtt_w": rng.normal(0, 2.0, n), "rtt_l": rng.normal(0, 2.0, n),
        "pdr_w": rng.normal(0, 1.0, n), "pdr_l": rng.normal(0, 1.0, n),
        "plr_w": rng.normal(0, 0.1, n), "plr_l": rng.normal(0, 0.1, n),
    }

    samples = []
    for i in range(n):
        prio = WF if i % 2 == 0 else LF
        if prio == WF:
            eff_p, eff_s = eff_w[i], eff_l[i]
            rtt_p, loss_p = rtt_w[i], loss_w[i]
        else:
            eff_p, eff_s = eff_l[i], eff_w[i]
            rtt_p, loss_p = rtt_l[i], loss_l[i]
        ag = max(0.0, 0.9 * eff_p + 0.3 * eff_s + noise["ag"][i])
        # Loss on the primary path stalls in-order delivery until timeout
        # recovery, so delay grows steeply with loss.
        ad = max(1.0, rtt_p + 250.0 * loss_p + noise["ad"][i])

        def share(primary: bool) -> float:
            return 0.9 if primary else 0.3

        pdr_w = max(0.0, share(prio == WF) * eff_w[i] + noise["pdr_w"][i])
        pdr_l = max(0.0, share(prio == LF) * eff_l[i] + noise["pdr_l"][i])
        plr_wv = float(np.clip(loss_w[i] * (1.0 + noise["plr_w"][i]), 0.0, 1.0))
        plr_lv = float(np.clip(loss_l[i] * (1.0 + noise["plr_l"][i]), 0.0, 1.0))
        rtt_wv = max(1.0, rtt_w[i] + noise["rtt_w"][i])
        rtt_lv = max(1.0, rtt_l[i] + noise["rtt_l"][i])
        # Congestion window tracks the bandwidth-delay product of the path
        # as long as it is usable; heavy loss collapses it.
        cwnd_wv = max(1.0, round(cap_w[i] * rtt_wv / 12.0 * (1.0 - loss_w[i])))
        cwnd_lv = max(1.0, round(cap_l[i] * rtt_lv / 12.0 * (1.0 - loss_l[i])))

        samples.append(AttributeSample(
            t=round(times[i], 6),
            rssi_lte=float(mac["rssi_lte"][i]), rssi_wifi=float(mac["rssi_wifi"][i]),
            sinr_lte=float(mac["sinr_lte"][i]), sinr_wifi=float(mac["sinr_wifi"][i]),
            rsrp_lte=float(mac["rsrp_lte"][i]), rsrq_lte=float(mac["rsrq_lte"][i]),
            td_wifi=float(mac["td_wifi"][i]), rd_wifi=float(mac["rd_wifi"][i]),
            rtt_lte=rtt_lv, rtt_wifi=rtt_wv,
            cwnd_lte=cwnd_lv, cwnd_wifi=cwnd_wv,
            plr_lte=plr_lv, plr_wifi=plr_wv,
            pdr_lte=pdr_l, pdr_wifi=pdr_w,
            prio=prio, ag=ag, ad=ad,
        ))
    return samples


# ---------------------------------------------------------------------------
# Scenario files: key/value lines plus indented per-segment trajectory lines.
#
#   name walkaway
#   duration 60
#   seed 42
#   segment 0
#     rssi_wifi ramp -30 -85
#     rssi_lte noisy -60 2
# ---------------------------------------------------------------------------

def parse_scenario(text: str) -> Scenario:
    name = None
    duration = None
    seed = None
    segments: list[tuple[float, dict]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key = parts[0]
        try:
            if key == "name":
                name = parts[1]
            elif key == "duration":
                duration = float(parts[1])
            elif key == "seed":
                seed = int(parts[1])
            elif key == "segment":
                segments.append((float(parts[1]), {}))
            elif key in SCENARIO_ATTRS:
                if not segments:
                    raise TraceError(f"line {lineno}: trajectory before any segment")
                kind = parts[1]
                if kind == "constant":
                    traj = constant(float(parts[2]))
                elif kind == "ramp":
                    traj = linear_ramp(float(parts[2]), float(parts[3]))
                elif kind == "noisy":
                    traj = noisy(float(parts[2]), float(parts[3]))
                else:
                    raise TraceError(f"line {lineno}: unknown trajectory kind {kind!r}")
                segments[-1][1][key] = traj
            else:
                raise TraceError(f"line {lineno}: unknown key {key!r}")
        except (IndexError, ValueError) as exc:
            raise TraceError(f"line {lineno}: malformed scenario line {line!r}") from exc
    if name is None or duration is None or seed is None:
        raise TraceError("scenario file must set name, duration and seed")
    return Scenario(name=name, duration=duration, seed=seed,
                    segments=tuple(Segment(s, t) for s, t in segments))


def write_scenario(scenario: Scenario) -> str:
    out = [f"name {scenario.name}", f"duration {_fmt_num(scenario.duration)}",
           f"seed {scenario.seed}"]
    for seg in scenario.segments:
        out.append(f"segment {_fmt_num(seg.start)}")
        for attr, traj in sorted(seg.trajectories.items()):
            if traj.kind == "constant":
                out.append(f"  {attr} constant {_fmt_num(traj.v0)}")
            elif traj.kind == "ramp":
                out.append(f"  {attr} ramp {_fmt_num(traj.v0)} {_fmt_num(traj.v1)}")
            else:
                out.append(f"  {attr} noisy {_fmt_num(traj.v0)} {_fmt_num(traj.v1)}")
    return "\n".join(out) + "\n"
