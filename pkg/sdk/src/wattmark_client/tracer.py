"""Decorator and context-manager instrumentation over the daemon protocol.

Tracing is globally disabled by default: wrapped functions then run
untouched and return (result, None) with zero daemon I/O. The SDK never
samples GPUs itself; all measurement happens in the daemon process.
"""

from __future__ import annotations

import functools
import sys
import uuid
import warnings
from contextlib import contextmanager, suppress
from dataclasses import dataclass

from .client import MODES, PHASE_KINDS, DaemonClient, DaemonUnreachable

_enabled = False
_clients: dict[str, DaemonClient] = {}


def enable_tracing() -> None:
    global _enabled
    _enabled = True


def disable_tracing() -> None:
    global _enabled
    _enabled = False


def tracing_enabled() -> bool:
    return _enabled


def shared_client(socket_path: str | None = None) -> DaemonClient:
    """One connection per socket per process; reused across wrappers."""
    client = DaemonClient(socket_path)
    return _clients.setdefault(client.socket_path, client)


def reset_clients() -> None:
    for client in _clients.values():
        client.close()
    _clients.clear()


@dataclass
class TracerConfig:
    mode: str
    phase_kind: str = "inference"
    label: str | None = None
    socket_path: str | None = None
    inference_count: int | None = None
    auto_session: bool = False
    on_unreachable: str = "raise"  # or "warn": degrade to untraced execution
    verbose: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"invalid tracing mode: {self.mode!r}")
        if self.phase_kind not in PHASE_KINDS:
            raise ValueError(f"invalid phase kind: {self.phase_kind!r}")
        if self.on_unreachable not in ("raise", "warn"):
            raise ValueError(f"on_unreachable must be raise or warn")


def _ensure_session(client: DaemonClient, config: TracerConfig, method: str) -> None:
    if client.query()["active"]:
        return
    if not config.auto_session:
        return  # the daemon will answer NoActiveSession with a clear code
    session_id = f"{config.mode}-{uuid.uuid4().hex[:8]}"
    client.begin_session(session_id, method, config.mode)


def _run_phase(config: TracerConfig, label: str, func, args, kwargs):
    try:
        client = shared_client(config.socket_path)
        _ensure_session(client, config, method=label)
        client.begin_phase(config.phase_kind, label)
    except DaemonUnreachable:
        if config.on_unreachable == "raise":
            raise
        warnings.warn(f"daemon unreachable; running {label!r} untraced",
                      stacklevel=3)
        return func(*args, **kwargs), None

    try:
        result = func(*args, **kwargs)
    except BaseException:
        # the workload error matters more than a failing end-phase send
        with suppress(Exception):
            client.end_phase(failed=True)
        raise
    summary = client.end_phase(count=config.inference_count)
    if config.verbose:
        print(f"[wattmark] {label}: {summary['energy_wh']} Wh "
              f"over {summary['sample_count']} samples", file=sys.stderr)
    return result, summary


def traced(mode: str, **options):
    """Wrap a callable so each call runs as one recorded phase.

    The wrapped callable returns (original result, phase summary); when
    tracing is disabled it returns (original result, None) without touching
    the daemon.
    """
    config = TracerConfig(mode=mode, **options)

    def decorate(func):
        label = config.label or func.__name__

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            if not _enabled:
                return func(*args, **kwargs), None
            return _run_phase(config, label, func, args, kwargs)

        wrapper.tracer_config = config
        return wrapper

    return decorate


class PhaseHandle:
    def __init__(self):
        self.summary: dict | None = None
        self.failed = False


@contextmanager
def phase(kind: str, label: str | None = None, count: int | None = None,
          socket_path: str | None = None):
    """Record one phase around a with-block (end is sent even on error)."""
    handle = PhaseHandle()
    if not _enabled:
        yield handle
        return
    client = shared_client(socket_path)
    client.begin_phase(kind, label or kind)
    try:
        yield handle
    except BaseException:
        handle.failed = True
        with suppress(Exception):
            handle.summary = client.end_phase(failed=True)
        raise
    handle.summary = client.end_phase(count=count)


class SessionHandle:
    def __init__(self, session_id: str):
        self.session_id = session_id
        self.summary: dict | None = None


@contextmanager
def session(method: str, mode: str, session_id: str | None = None,
            socket_path: str | None = None):
    """Begin a session for the with-block and persist it on exit."""
    handle = SessionHandle(session_id or f"{method}-{uuid.uuid4().hex[:8]}")
    if not _enabled:
        yield handle
        return
    client = shared_client(socket_path)
    client.begin_session(handle.session_id, method, mode)
    try:
        yield handle
    except BaseException:
        with suppress(Exception):
            handle.summary = client.end_session()
        raise
    handle.summary = client.end_session()
