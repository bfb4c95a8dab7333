"""Periodic sampling loop over a telemetry source.

The loop sleeps one interval, then polls, matching the sleep-first tracer
thread it replaces; drift is not compensated because energy integration uses
actual timestamps, not the nominal rate.
"""

from __future__ import annotations

import shutil
import threading
import time
from dataclasses import dataclass

from .errors import AlreadyStopped, SourceInitError, WattmarkError
from .telemetry import PowerTrace, SourceSpec, TelemetrySample, poll_live, synth_sample
from . import session as _session_io


@dataclass
class SamplerConfig:
    source: SourceSpec
    device_set: tuple[int, ...] = (0,)
    rate_s: float = 0.1

    def __post_init__(self):
        self.device_set = tuple(self.device_set)
        if self.rate_s <= 0:
            raise ValueError(f"rate_s must be positive, got {self.rate_s}")
        if not self.device_set:
            raise ValueError("device_set must not be empty")


class _LiveSource:
    def __init__(self, device_set: tuple[int, ...]):
        self.device_set = device_set
        self.nominal_rate = None

    def open(self):
        if shutil.which("nvidia-smi") is None:
            raise SourceInitError("nvidia-smi not found on PATH")

    def poll(self, t: float) -> list[TelemetrySample]:
        return poll_live(self.device_set, t)

    def drain(self) -> list[TelemetrySample]:
        return []

    def peek(self) -> list[TelemetrySample]:
        return []


class _SyntheticSource:
    def __init__(self, waveform, device_set: tuple[int, ...]):
        self.waveform = waveform
        self.device_set = device_set
        self.nominal_rate = None

    def open(self):
        pass

    def poll(self, t: float) -> list[TelemetrySample]:
        # Power must equal synth_sample at the stamped time exactly; no
        # interpolation or caching between polls.
        power = synth_sample(self.waveform, t)
        return [
            TelemetrySample(timestamp=t, gpu_index=d, power_draw=power,
                            gpu_util=100.0, mem_util=0.0)
            for d in self.device_set
        ]

    def drain(self) -> list[TelemetrySample]:
        return []

    def peek(self) -> list[TelemetrySample]:
        return []


class _ReplaySource:
    """Deterministic pass-through of a recorded trace.

    poll() emits the next recorded timestamp group; whatever was not polled
    by stop time is drained so the replayed trace is always complete.
    """

    def __init__(self, path: str):
        self.path = path
        self.nominal_rate = None
        self.device_set: tuple[int, ...] = ()
        self._groups: list[list[TelemetrySample]] = []
        self._cursor = 0

    def open(self):
        try:
            trace = _session_io.read_trace(self.path)
        except (OSError, WattmarkError) as e:
            raise SourceInitError(f"cannot replay {self.path}: {e}") from e
        self.nominal_rate = trace.nominal_rate
        self.device_set = trace.device_set
        group: list[TelemetrySample] = []
        for s in trace.samples:
            if group and s.timestamp != group[0].timestamp:
                self._groups.append(group)
                group = []
            group.append(s)
        if group:
            self._groups.append(group)

    def poll(self, t: float) -> list[TelemetrySample]:
        if self._cursor >= len(self._groups):
            return []
        group = self._groups[self._cursor]
        self._cursor += 1
        return group

    def drain(self) -> list[TelemetrySample]:
        rest = [s for g in self._groups[self._cursor:] for s in g]
        self._cursor = len(self._groups)
        return rest

    def peek(self) -> list[TelemetrySample]:
        return [s for g in self._groups[self._cursor:] for s in g]


def _make_source(config: SamplerConfig):
    spec = config.source
    if spec.kind == "nvidia-smi":
        return _LiveSource(config.device_set)
    if spec.kind == "synthetic":
        return _SyntheticSource(spec.waveform, config.device_set)
    return _ReplaySource(spec.path)


class SamplerHandle:
    """Running collection loop; stop() returns the gathered PowerTrace.

    Single producer (the loop thread), single consumer. The handle may move
    between threads but must not be driven from two at once.
    """

    def __init__(self, config: SamplerConfig, source):
        self.config = config
        self.polls = 0
        self.dropped = 0
        self._source = source
        self._epoch = time.monotonic()
        self._buffer: list[TelemetrySample] = []
        self._lock = threading.Lock()
        self._running = True
        self._stopped = False
        self._loop_error: BaseException | None = None
        self._thread = threading.Thread(
            target=self._run, name="wattmark-sampler", daemon=True)
        self._thread.start()

    def elapsed(self) -> float:
        """Seconds since the sampler epoch (the session clock)."""
        return time.monotonic() - self._epoch

    def snapshot(self) -> PowerTrace:
        """Copy of everything collected so far, without stopping the loop.

        Replay sources are a deterministic pass-through, so a snapshot also
        sees the not-yet-polled remainder of the recording.
        """
        with self._lock:
            samples = list(self._buffer) + self._source.peek()
        return self._build_trace(samples)

    def stop(self) -> PowerTrace:
        """Halt the loop and return all buffered samples as a PowerTrace."""
        if self._stopped:
            raise AlreadyStopped("sampler handle already stopped")
        self._stopped = True
        self._running = False
        self._thread.join()
        if self._loop_error is not None:
            raise self._loop_error
        with self._lock:
            self._buffer.extend(self._source.drain())
            samples = list(self._buffer)
        return self._build_trace(samples)

    def _build_trace(self, samples: list[TelemetrySample]) -> PowerTrace:
        rate = self._source.nominal_rate or self.config.rate_s
        devices = self._source.device_set or self.config.device_set
        return PowerTrace(device_set=devices, nominal_rate=rate, samples=samples)

    def _run(self):
        rate = self.config.rate_s
        while self._running:
            time.sleep(rate)
            if not self._running:
                break
            with self._lock:
                t = self.elapsed()
                self.polls += 1
                try:
                    self._buffer.extend(self._source.poll(t))
                except WattmarkError:
                    # transient poll failure: skip, never retry mid-interval
                    self.dropped += 1
                except BaseException as e:  # pragma: no cover - defensive
                    self._loop_error = e
                    self._running = False


def start(config: SamplerConfig) -> SamplerHandle:
    """Open the source and begin the sleep-then-poll collection loop."""
    source = _make_source(config)
    source.open()
    return SamplerHandle(config, source)


def stop(handle: SamplerHandle) -> PowerTrace:
    """Module-level alias for SamplerHandle.stop()."""
    return handle.stop()
