"""Telemetry data types and sample sources.

Three kinds of source feed the sampler: the live nvidia-smi XML interface,
deterministic replay from a recorded trace file, and synthetic waveforms for
desk-scale testing without GPUs.
"""

from __future__ import annotations

import re
import subprocess
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    DeviceNotFound,
    MalformedXml,
    MissingField,
    ToolUnavailable,
    UnitParseError,
)

NVIDIA_SMI_ARGS = ["nvidia-smi", "-q", "-x"]


@dataclass
class TelemetrySample:
    """One timestamped reading for a single GPU.

    Timestamps are seconds since the session epoch (monotonic, fractional).
    """

    timestamp: float
    gpu_index: int
    power_draw: float
    gpu_util: float
    mem_util: float
    temperature: float | None = None

    def __post_init__(self):
        if self.gpu_index < 0:
            raise ValueError(f"gpu_index must be non-negative, got {self.gpu_index}")
        if self.power_draw < 0:
            raise ValueError(f"power_draw must be non-negative, got {self.power_draw}")
        if not 0.0 <= self.gpu_util <= 100.0:
            raise ValueError(f"gpu_util must be in [0, 100], got {self.gpu_util}")
        if not 0.0 <= self.mem_util <= 100.0:
            raise ValueError(f"mem_util must be in [0, 100], got {self.mem_util}")


@dataclass
class PowerTrace:
    """Ordered samples for a device set at a nominal sampling rate."""

    device_set: tuple[int, ...]
    nominal_rate: float
    samples: list[TelemetrySample] = field(default_factory=list)

    def __post_init__(self):
        self.device_set = tuple(self.device_set)
        if self.nominal_rate <= 0:
            raise ValueError(f"nominal_rate must be positive, got {self.nominal_rate}")
        allowed = set(self.device_set)
        for s in self.samples:
            if s.gpu_index not in allowed:
                raise ValueError(f"sample for gpu {s.gpu_index} outside device set {sorted(allowed)}")
        self.samples.sort(key=lambda s: (s.timestamp, s.gpu_index))

    def columns(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Timestamps, device indices and power as flat arrays.

        Cached after first use; samples must not be mutated afterwards.
        """
        cached = self.__dict__.get("_columns")
        if cached is not None and len(cached[0]) == len(self.samples):
            return cached
        n = len(self.samples)
        ts = np.empty(n, dtype=np.float64)
        gpu = np.empty(n, dtype=np.int64)
        power = np.empty(n, dtype=np.float64)
        for i, s in enumerate(self.samples):
            ts[i] = s.timestamp
            gpu[i] = s.gpu_index
            power[i] = s.power_draw
        self.__dict__["_columns"] = (ts, gpu, power)
        return ts, gpu, power


# --- synthetic waveforms ---------------------------------------------------

@dataclass(frozen=True)
class Constant:
    power_w: float

    def __post_init__(self):
        if self.power_w < 0:
            raise ValueError("power_w must be non-negative")


@dataclass(frozen=True)
class Square:
    low_w: float
    high_w: float
    period_s: float
    duty: float = 0.5

    def __post_init__(self):
        if self.low_w < 0 or self.high_w < 0:
            raise ValueError("square levels must be non-negative")
        if self.period_s <= 0:
            raise ValueError("period_s must be positive")
        if not 0.0 <= self.duty <= 1.0:
            raise ValueError("duty must be in [0, 1]")


@dataclass(frozen=True)
class Ramp:
    start_w: float
    end_w: float
    duration_s: float

    def __post_init__(self):
        if self.start_w < 0 or self.end_w < 0:
            raise ValueError("ramp endpoints must be non-negative")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")


Waveform = Constant | Square | Ramp


def synth_sample(waveform: Waveform, t: float) -> float:
    """Instantaneous power of a waveform at time t >= 0 (deterministic)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if isinstance(waveform, Constant):
        return waveform.power_w
    if isinstance(waveform, Square):
        frac = (t % waveform.period_s) / waveform.period_s
        return waveform.high_w if frac < waveform.duty else waveform.low_w
    if isinstance(waveform, Ramp):
        if t >= waveform.duration_s:
            return waveform.end_w
        return waveform.start_w + (waveform.end_w - waveform.start_w) * (t / waveform.duration_s)
    raise TypeError(f"unknown waveform {waveform!r}")


def _waveform_params(waveform: Waveform) -> tuple[int, float, float, float, float]:
    if isinstance(waveform, Constant):
        return _kernels.WAVE_CONSTANT, waveform.power_w, 0.0, 0.0, 0.0
    if isinstance(waveform, Square):
        return _kernels.WAVE_SQUARE, waveform.low_w, waveform.high_w, waveform.period_s, waveform.duty
    if isinstance(waveform, Ramp):
        return _kernels.WAVE_RAMP, waveform.start_w, waveform.end_w, waveform.duration_s, 0.0
    raise TypeError(f"unknown waveform {waveform!r}")


def waveform_powers(waveform: Waveform, ts: np.ndarray) -> np.ndarray:
    """Vectorized synth_sample over an array of timestamps."""
    code, p0, p1, p2, p3 = _waveform_params(waveform)
    return _kernels.waveform_series(code, p0, p1, p2, p3, np.asarray(ts, dtype=np.float64))


def synthesize_trace(
    waveform: Waveform,
    rate_s: float,
    duration_s: float,
    device_set: tuple[int, ...] = (0,),
) -> PowerTrace:
    """Build the trace an ideal sampler would record: one sample per device
    every rate_s starting at t=0, power taken from the waveform."""
    if rate_s <= 0:
        raise ValueError("rate_s must be positive")
    n = int(round(duration_s / rate_s))
    ts = np.arange(n, dtype=np.float64) * rate_s
    powers = waveform_powers(waveform, ts)
    samples = [
        TelemetrySample(timestamp=float(t), gpu_index=d, power_draw=float(p),
                        gpu_util=100.0, mem_util=0.0)
        for t, p in zip(ts, powers)
        for d in device_set
    ]
    return PowerTrace(device_set=tuple(device_set), nominal_rate=rate_s, samples=samples)


# --- source specification --------------------------------------------------

@dataclass(frozen=True)
class SourceSpec:
    """Which telemetry source to sample: nvidia-smi, replay file, or waveform."""

    kind: str  # "nvidia-smi" | "replay" | "synthetic"
    path: str | None = None
    waveform: Waveform | None = None

    def __post_init__(self):
        if self.kind == "replay" and not self.path:
            raise ValueError("replay source needs a file path")
        if self.kind == "synthetic" and self.waveform is None:
            raise ValueError("synthetic source needs a waveform")
        if self.kind not in ("nvidia-smi", "replay", "synthetic"):
            raise ValueError(f"unknown source kind {self.kind!r}")

    @classmethod
    def nvidia_smi(cls) -> "SourceSpec":
        return cls(kind="nvidia-smi")

    @classmethod
    def replay(cls, path: str) -> "SourceSpec":
        return cls(kind="replay", path=str(path))

    @classmethod
    def synthetic(cls, waveform: Waveform) -> "SourceSpec":
        return cls(kind="synthetic", waveform=waveform)


def parse_source_spec(text: str) -> SourceSpec:
    """Parse the CLI source grammar.

    nvidia-smi
    replay:<path>
    synthetic:constant:<watts>
    synthetic:square:<low>:<high>:<period>[:<duty>]
    synthetic:ramp:<start>:<end>:<duration>
    """
    parts = text.split(":")
    if parts[0] == "nvidia-smi" and len(parts) == 1:
        return SourceSpec.nvidia_smi()
    if parts[0] == "replay":
        # path may itself contain colons; keep everything after the prefix
        path = text[len("replay:"):]
        if not path:
            raise ValueError("replay source needs a file path")
        return SourceSpec.replay(path)
    if parts[0] == "synthetic" and len(parts) >= 2:
        shape, args = parts[1], parts[2:]
        try:
            if shape == "constant" and len(args) == 1:
                return SourceSpec.synthetic(Constant(float(args[0])))
            if shape == "square" and len(args) in (3, 4):
                duty = float(args[3]) if len(args) == 4 else 0.5
                return SourceSpec.synthetic(
                    Square(float(args[0]), float(args[1]), float(args[2]), duty))
            if shape == "ramp" and len(args) == 3:
                return SourceSpec.synthetic(Ramp(float(args[0]), float(args[1]), float(args[2])))
        except ValueError as e:
            raise ValueError(f"bad synthetic source {text!r}: {e}") from e
    raise ValueError(f"unrecognized source spec {text!r}")


# --- nvidia-smi XML parsing ------------------------------------------------

# Leading decimal with an optional W / % / C unit suffix, e.g. "133.76 W".
_VALUE_RE = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+))\s*([W%C]?)\s*$")


def _parse_unit_value(text: str | None, what: str) -> float:
    if text is None:
        raise UnitParseError(f"{what}: empty value")
    m = _VALUE_RE.match(text)
    if not m:
        raise UnitParseError(f"{what}: cannot parse {text!r}")
    return float(m.group(1))


def _find_text(gpu: ET.Element, paths: tuple[str, ...], what: str, device: int) -> str:
    for p in paths:
        el = gpu.find(p)
        if el is not None and el.text is not None:
            return el.text
    raise MissingField(f"device {device}: missing {what}")


def parse_nvidia_smi_xml(
    xml_text: str,
    device_set: tuple[int, ...],
    timestamp: float,
) -> list[TelemetrySample]:
    """Extract one sample per requested device from an nvidia-smi -q -x dump.

    Unit suffixes ("W", "%", "C") are stripped; "N/A" and other unparseable
    values raise UnitParseError rather than being clamped or dropped here.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as e:
        raise MalformedXml(str(e)) from e
    if root.tag != "nvidia_smi_log":
        raise MalformedXml(f"unexpected root element {root.tag!r}")

    attached_el = root.find("attached_gpus")
    if attached_el is None or attached_el.text is None:
        raise MissingField("attached_gpus")
    try:
        attached = int(attached_el.text.strip())
    except ValueError as e:
        raise MissingField(f"attached_gpus: {attached_el.text!r}") from e

    gpus = root.findall("gpu")
    samples = []
    for device in sorted(set(device_set)):
        if device < 0 or device >= attached:
            raise DeviceNotFound(f"device {device} not attached (attached_gpus={attached})")
        if device >= len(gpus):
            raise MissingField(f"device {device}: gpu element missing from document")
        gpu = gpus[device]

        power = _parse_unit_value(
            _find_text(gpu, ("power_readings/power_draw", "gpu_power_readings/power_draw"),
                       "power draw", device),
            "power_draw")
        gpu_util = _parse_unit_value(
            _find_text(gpu, ("utilization/gpu_util",), "gpu utilization", device),
            "gpu_util")
        mem_util = _parse_unit_value(
            _find_text(gpu, ("utilization/memory_util",), "memory utilization", device),
            "mem_util")

        temp_el = gpu.find("temperature/gpu_temp")
        temperature = None
        if temp_el is not None and temp_el.text is not None:
            temperature = _parse_unit_value(temp_el.text, "temperature")

        try:
            samples.append(TelemetrySample(
                timestamp=timestamp, gpu_index=device, power_draw=power,
                gpu_util=gpu_util, mem_util=mem_util, temperature=temperature))
        except ValueError as e:
            raise UnitParseError(str(e)) from e
    return samples


def poll_live(device_set: tuple[int, ...], timestamp: float) -> list[TelemetrySample]:
    """Invoke nvidia-smi once and parse its XML output."""
    try:
        out = subprocess.run(
            NVIDIA_SMI_ARGS, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
            check=True)
    except FileNotFoundError as e:
        raise ToolUnavailable("nvidia-smi not found on PATH") from e
    except subprocess.CalledProcessError as e:
        raise ToolUnavailable(f"nvidia-smi exited with status {e.returncode}") from e
    return parse_nvidia_smi_xml(out.stdout.decode("utf-8"), device_set, timestamp)
