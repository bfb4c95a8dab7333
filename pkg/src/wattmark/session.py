"""Lifecycle phase recording, energy integration and persistence.

A session groups the sequential phases of one method run; each phase's
energy is integrated from the live power trace when the phase ends, in W·h.
"""

from __future__ import annotations

import json
import os
import re
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from . import _kernels
from .errors import (
    EmptyWindowWarning,
    InferenceCountMissing,
    NoOpenPhase,
    PhaseAlreadyOpen,
    SessionNotFound,
    StoreCorrupt,
)
from .telemetry import PowerTrace, TelemetrySample

if TYPE_CHECKING:
    from .sampler import SamplerHandle

JOULES_PER_WH = 3600.0


class PhaseKind(Enum):
    BASE_TRAINING = "base_training"
    COMPRESSION = "compression"
    RETRAINING = "retraining"
    INFERENCE = "inference"

    @property
    def display(self) -> str:
        return _KIND_DISPLAY[self]


_KIND_DISPLAY = {
    PhaseKind.BASE_TRAINING: "BaseTraining",
    PhaseKind.COMPRESSION: "Compression",
    PhaseKind.RETRAINING: "Retraining",
    PhaseKind.INFERENCE: "Inference",
}


class AlgorithmType(Enum):
    BASELINE = "baseline"
    PRUNING = "pruning"
    QUANTIZATION = "quantization"
    DISTILLATION = "distillation"
    NAS = "nas"


@dataclass
class Phase:
    """One labeled lifecycle interval with its integrated energy."""

    kind: PhaseKind
    label: str
    start_ts: float
    end_ts: float
    energy_wh: float
    sample_count: int
    inference_count: int | None = None
    failed: bool = False

    def __post_init__(self):
        if self.end_ts < self.start_ts:
            raise ValueError("end_ts must be >= start_ts")
        if self.energy_wh < 0:
            raise ValueError("energy_wh must be non-negative")
        if self.kind is PhaseKind.INFERENCE:
            if self.inference_count is None and not self.failed:
                raise InferenceCountMissing(f"inference phase {self.label!r} has no count")
            if self.inference_count is not None and self.inference_count <= 0:
                raise ValueError("inference_count must be positive")
        elif self.inference_count is not None:
            raise ValueError(f"{self.kind.display} phase cannot carry an inference count")


@dataclass
class Session:
    """Phases recorded for one method run, plus where its trace lives."""

    session_id: str
    method_name: str
    algorithm_type: AlgorithmType
    device_set: tuple[int, ...]
    phases: list[Phase] = field(default_factory=list)
    trace_path: str | None = None

    def __post_init__(self):
        self.device_set = tuple(self.device_set)
        prev_end = None
        for p in self.phases:
            if prev_end is not None and p.start_ts < prev_end:
                raise ValueError(f"phase {p.label!r} overlaps the previous phase")
            prev_end = p.end_ts


# --- energy integration ----------------------------------------------------

def window_stats(trace: PowerTrace, start_ts: float, end_ts: float) -> tuple[float, int]:
    """Energy in W·h and sample count over the half-open window [start, end).

    Left-rectangle rule per device with actual inter-sample gaps; the final
    in-window sample covers one nominal interval. Device energies are summed.
    """
    if start_ts > end_ts:
        raise ValueError("start_ts must be <= end_ts")
    ts, gpu, power = trace.columns()
    joules = 0.0
    count = 0
    for device in trace.device_set:
        mask = gpu == device
        d_ts = ts[mask]
        d_power = power[mask]
        joules += _kernels.window_energy_j(d_ts, d_power, start_ts, end_ts,
                                           trace.nominal_rate)
        count += int(np.count_nonzero((d_ts >= start_ts) & (d_ts < end_ts)))
    return joules / JOULES_PER_WH, count


def integrate_energy(trace: PowerTrace, start_ts: float, end_ts: float) -> float:
    """Integrated energy in W·h over [start_ts, end_ts); 0 for empty windows."""
    energy, count = window_stats(trace, start_ts, end_ts)
    if count == 0:
        warnings.warn(
            f"no samples in window [{start_ts}, {end_ts})", EmptyWindowWarning,
            stacklevel=2)
    return energy


# --- phase recording -------------------------------------------------------

@dataclass
class _PhaseMarker:
    kind: PhaseKind
    label: str
    start_ts: float


class SessionRecorder:
    """Marks sequential phases against a running sampler.

    Phase timestamps default to the sampler clock; pass explicit `at` values
    (replay traces, message-log replays) for deterministic windows.
    """

    def __init__(self, handle: "SamplerHandle", session_id: str, method_name: str,
                 algorithm_type: AlgorithmType):
        self._handle = handle
        self._open: _PhaseMarker | None = None
        self._phases: list[Phase] = []
        self._last_end = None
        self.session_id = session_id
        self.method_name = method_name
        self.algorithm_type = algorithm_type

    @property
    def open_phase(self) -> _PhaseMarker | None:
        return self._open

    def begin_phase(self, kind: PhaseKind, label: str, at: float | None = None) -> _PhaseMarker:
        if self._open is not None:
            raise PhaseAlreadyOpen(f"phase {self._open.label!r} is still open")
        start_ts = self._handle.elapsed() if at is None else at
        if self._last_end is not None and start_ts < self._last_end:
            raise ValueError("phase start precedes the previous phase end")
        self._open = _PhaseMarker(kind=kind, label=label, start_ts=start_ts)
        return self._open

    def end_phase(self, inference_count: int | None = None, at: float | None = None,
                  failed: bool = False) -> Phase:
        if self._open is None:
            raise NoOpenPhase("no phase is open")
        marker = self._open
        end_ts = self._handle.elapsed() if at is None else at
        if end_ts < marker.start_ts:
            raise ValueError("phase end precedes its start")
        trace = self._handle.snapshot()
        energy, count = window_stats(trace, marker.start_ts, end_ts)
        phase = Phase(
            kind=marker.kind, label=marker.label, start_ts=marker.start_ts,
            end_ts=end_ts, energy_wh=energy, sample_count=count,
            inference_count=inference_count, failed=failed)
        self._phases.append(phase)
        self._open = None
        self._last_end = end_ts
        return phase

    def finish(self, trace_path: str | None = None) -> tuple[Session, PowerTrace]:
        """Stop the sampler and assemble the Session with its full trace."""
        if self._open is not None:
            raise PhaseAlreadyOpen(
                f"cannot finish session with phase {self._open.label!r} open")
        trace = self._handle.stop()
        session = Session(
            session_id=self.session_id, method_name=self.method_name,
            algorithm_type=self.algorithm_type, device_set=trace.device_set,
            phases=self._phases, trace_path=trace_path)
        if trace_path is not None:
            write_trace(trace, trace_path)
        return session, trace


# --- trace file format -----------------------------------------------------
#
# Line-delimited text, one sample per line, self-describing header:
#
#   #wattmark-trace v1 rate=<float> devices=<d0,d1,...>
#   ts,gpu,power_w,gpu_util,mem_util,temp
#   0.1,0,133.76,71.0,26.0,36.0
#
# Floats are written with repr so a parse -> serialize -> parse round trip
# is exact. temp is empty when the driver reported none.

_TRACE_HEADER_RE = re.compile(
    r"^#wattmark-trace v1 rate=(?P<rate>[^ ]+) devices=(?P<devices>[0-9,]+)$")
_TRACE_COLUMNS = "ts,gpu,power_w,gpu_util,mem_util,temp"


def write_trace(trace: PowerTrace, path: str) -> None:
    devices = ",".join(str(d) for d in trace.device_set)
    lines = [f"#wattmark-trace v1 rate={trace.nominal_rate!r} devices={devices}",
             _TRACE_COLUMNS]
    for s in trace.samples:
        temp = "" if s.temperature is None else repr(s.temperature)
        lines.append(f"{s.timestamp!r},{s.gpu_index},{s.power_draw!r},"
                     f"{s.gpu_util!r},{s.mem_util!r},{temp}")
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_trace(path: str) -> PowerTrace:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if len(lines) < 2:
        raise StoreCorrupt(f"{path}: truncated trace file")
    m = _TRACE_HEADER_RE.match(lines[0])
    if not m:
        raise StoreCorrupt(f"{path}: bad trace header {lines[0]!r}")
    if lines[1] != _TRACE_COLUMNS:
        raise StoreCorrupt(f"{path}: bad column line {lines[1]!r}")
    try:
        rate = float(m.group("rate"))
        devices = tuple(int(d) for d in m.group("devices").split(","))
    except ValueError as e:
        raise StoreCorrupt(f"{path}: bad header values: {e}") from e
    samples = []
    for i, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise StoreCorrupt(f"{path}:{i}: expected 6 fields, got {len(parts)}")
        try:
            samples.append(TelemetrySample(
                timestamp=float(parts[0]), gpu_index=int(parts[1]),
                power_draw=float(parts[2]), gpu_util=float(parts[3]),
                mem_util=float(parts[4]),
                temperature=float(parts[5]) if parts[5] else None))
        except ValueError as e:
            raise StoreCorrupt(f"{path}:{i}: {e}") from e
    try:
        return PowerTrace(device_set=devices, nominal_rate=rate, samples=samples)
    except ValueError as e:
        raise StoreCorrupt(f"{path}: {e}") from e


# --- session store ---------------------------------------------------------
#
# One JSON document per store file, holding any number of sessions keyed by
# id. Writes are atomic (temp file + rename): concurrent readers always see
# a complete document.

_STORE_FORMAT = "wattmark-session-store"


def _phase_to_dict(p: Phase) -> dict:
    return {
        "kind": p.kind.value, "label": p.label, "start_ts": p.start_ts,
        "end_ts": p.end_ts, "energy_wh": p.energy_wh,
        "sample_count": p.sample_count, "inference_count": p.inference_count,
        "failed": p.failed,
    }


def _phase_from_dict(d: dict) -> Phase:
    return Phase(
        kind=PhaseKind(d["kind"]), label=d["label"], start_ts=d["start_ts"],
        end_ts=d["end_ts"], energy_wh=d["energy_wh"],
        sample_count=d["sample_count"], inference_count=d.get("inference_count"),
        failed=d.get("failed", False))


def session_to_dict(session: Session) -> dict:
    return {
        "session_id": session.session_id,
        "method_name": session.method_name,
        "algorithm_type": session.algorithm_type.value,
        "device_set": list(session.device_set),
        "phases": [_phase_to_dict(p) for p in session.phases],
        "trace_path": session.trace_path,
    }


def session_from_dict(d: dict) -> Session:
    try:
        return Session(
            session_id=d["session_id"], method_name=d["method_name"],
            algorithm_type=AlgorithmType(d["algorithm_type"]),
            device_set=tuple(d["device_set"]),
            phases=[_phase_from_dict(p) for p in d["phases"]],
            trace_path=d.get("trace_path"))
    except (KeyError, TypeError, ValueError) as e:
        raise StoreCorrupt(f"bad session record: {e}") from e


def _load_store(store_path: str) -> dict:
    try:
        with open(store_path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        return {"format": _STORE_FORMAT, "version": 1, "sessions": {}}
    except (OSError, json.JSONDecodeError) as e:
        raise StoreCorrupt(f"{store_path}: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != _STORE_FORMAT:
        raise StoreCorrupt(f"{store_path}: not a session store")
    return doc


def save_session(session: Session, store_path: str) -> None:
    """Insert or replace one session in the store (atomic rewrite)."""
    doc = _load_store(store_path)
    doc["sessions"][session.session_id] = session_to_dict(session)
    tmp = f"{store_path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, store_path)


def load_session(store_path: str, session_id: str) -> Session:
    if not os.path.exists(store_path):
        raise SessionNotFound(f"store {store_path} does not exist")
    doc = _load_store(store_path)
    try:
        record = doc["sessions"][session_id]
    except (KeyError, TypeError) as e:
        raise SessionNotFound(f"session {session_id!r} not in {store_path}") from e
    return session_from_dict(record)


def list_sessions(store_path: str) -> list[str]:
    if not os.path.exists(store_path):
        return []
    doc = _load_store(store_path)
    sessions = doc.get("sessions")
    if not isinstance(sessions, dict):
        raise StoreCorrupt(f"{store_path}: missing sessions table")
    return sorted(sessions)
