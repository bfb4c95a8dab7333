"""Local control service driving sessions over a unix stream socket.

One request per line, one response per request. Requests are shell-style
token lists (`op key=value ...`, shlex quoting rules); responses are either
`ok <json>` or `err <Code> <message>`. The full grammar lives in
docs/protocol.md. One session may be active at a time; run several daemons
on distinct sockets for concurrency.
"""

from __future__ import annotations

import json
import logging
import os
import shlex
import socket
import threading
from dataclasses import dataclass

from . import sampler as sampler_mod
from .errors import (
    NoActiveSession,
    ProtocolError,
    SessionBusy,
    SocketBindError,
    WattmarkError,
)
from .session import (
    AlgorithmType,
    PhaseKind,
    SessionRecorder,
    save_session,
    session_to_dict,
)

logger = logging.getLogger(__name__)

SOCKET_ENV = "WATTMARK_SOCKET"


@dataclass
class DaemonConfig:
    socket_path: str
    sampler: sampler_mod.SamplerConfig
    store_path: str
    trace_dir: str | None = None  # defaults to the store's directory

    def resolved_trace_dir(self) -> str:
        if self.trace_dir:
            return self.trace_dir
        return os.path.dirname(os.path.abspath(self.store_path))


class _Shutdown(Exception):
    pass


class _State:
    def __init__(self, config: DaemonConfig):
        self.config = config
        self.recorder: SessionRecorder | None = None
        self.handle: sampler_mod.SamplerHandle | None = None


def _ok(payload: dict) -> str:
    return "ok " + json.dumps(payload, sort_keys=True)


def _err(code: str, message: str) -> str:
    return f"err {code} {message}"


def _parse_kv(tokens: list[str]) -> dict[str, str]:
    kv = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise ProtocolError(f"expected key=value, got {tok!r}")
        kv[key] = value
    return kv


def _opt_float(kv: dict[str, str], key: str) -> float | None:
    if key not in kv:
        return None
    try:
        return float(kv[key])
    except ValueError:
        raise ProtocolError(f"{key} must be a number, got {kv[key]!r}") from None


def _opt_int(kv: dict[str, str], key: str) -> int | None:
    if key not in kv:
        return None
    try:
        return int(kv[key])
    except ValueError:
        raise ProtocolError(f"{key} must be an integer, got {kv[key]!r}") from None


def _require(kv: dict[str, str], key: str) -> str:
    if key not in kv:
        raise ProtocolError(f"missing required field {key}")
    return kv[key]


def _handle_begin_session(state: _State, kv: dict[str, str]) -> str:
    if state.recorder is not None:
        raise SessionBusy(f"session {state.recorder.session_id!r} is active")
    session_id = _require(kv, "id")
    method = _require(kv, "method")
    try:
        algorithm_type = AlgorithmType(_require(kv, "type").lower())
    except ValueError:
        raise ProtocolError(f"unknown algorithm type {kv['type']!r}") from None
    handle = sampler_mod.start(state.config.sampler)
    state.handle = handle
    state.recorder = SessionRecorder(handle, session_id, method, algorithm_type)
    logger.info("session %s started (%s, %s)", session_id, method, algorithm_type.value)
    return _ok({"session_id": session_id})


def _handle_begin_phase(state: _State, kv: dict[str, str]) -> str:
    if state.recorder is None:
        raise NoActiveSession("begin a session first")
    try:
        kind = PhaseKind(_require(kv, "kind").lower())
    except ValueError:
        raise ProtocolError(f"unknown phase kind {kv['kind']!r}") from None
    label = kv.get("label", kind.value)
    marker = state.recorder.begin_phase(kind, label, at=_opt_float(kv, "at"))
    return _ok({"kind": kind.value, "label": label, "start_ts": marker.start_ts})


def _handle_end_phase(state: _State, kv: dict[str, str]) -> str:
    if state.recorder is None:
        raise NoActiveSession("begin a session first")
    failed = kv.get("failed", "0").lower() in ("1", "true", "yes")
    phase = state.recorder.end_phase(
        inference_count=_opt_int(kv, "count"), at=_opt_float(kv, "at"), failed=failed)
    return _ok({
        "kind": phase.kind.value, "label": phase.label,
        "start_ts": phase.start_ts, "end_ts": phase.end_ts,
        "energy_wh": phase.energy_wh, "sample_count": phase.sample_count,
        "inference_count": phase.inference_count, "failed": phase.failed,
    })


def _handle_end_session(state: _State, kv: dict[str, str]) -> str:
    if state.recorder is None:
        raise NoActiveSession("no session to end")
    recorder = state.recorder
    trace_path = os.path.join(
        state.config.resolved_trace_dir(), f"{recorder.session_id}.trace")
    session, trace = recorder.finish(trace_path)
    save_session(session, state.config.store_path)
    state.recorder = None
    state.handle = None
    logger.info("session %s persisted to %s", session.session_id,
                state.config.store_path)
    summary = session_to_dict(session)
    summary["sample_count"] = len(trace.samples)
    return _ok(summary)


def _handle_query(state: _State, kv: dict[str, str]) -> str:
    active = state.recorder is not None
    open_phase = None
    if active and state.recorder.open_phase is not None:
        open_phase = state.recorder.open_phase.kind.value
    return _ok({
        "active": active,
        "session_id": state.recorder.session_id if active else None,
        "open_phase": open_phase,
        "polls": state.handle.polls if state.handle else 0,
        "dropped": state.handle.dropped if state.handle else 0,
    })


_HANDLERS = {
    "begin-session": _handle_begin_session,
    "begin-phase": _handle_begin_phase,
    "end-phase": _handle_end_phase,
    "end-session": _handle_end_session,
    "query": _handle_query,
}


def handle_line(state: _State, line: str) -> str:
    """Process one control message, always producing one response line."""
    try:
        tokens = shlex.split(line)
    except ValueError as e:
        return _err("ProtocolError", f"unparseable message: {e}")
    if not tokens:
        return _err("ProtocolError", "empty message")
    op, rest = tokens[0], tokens[1:]
    if op == "shutdown":
        raise _Shutdown
    handler = _HANDLERS.get(op)
    if handler is None:
        return _err("ProtocolError", f"unknown op {op!r}")
    try:
        return handler(state, _parse_kv(rest))
    except WattmarkError as e:
        return _err(e.code, str(e))
    except ValueError as e:
        return _err("ProtocolError", str(e))


def _bind(socket_path: str) -> socket.socket:
    if os.path.exists(socket_path):
        # a leftover socket from a dead daemon is safe to clear
        probe = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        try:
            probe.connect(socket_path)
        except (ConnectionRefusedError, FileNotFoundError):
            os.unlink(socket_path)
        except OSError as e:
            raise SocketBindError(f"{socket_path}: {e}") from e
        else:
            probe.close()
            raise SocketBindError(f"{socket_path}: daemon already listening")
    sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
    try:
        sock.bind(socket_path)
    except OSError as e:
        sock.close()
        raise SocketBindError(f"{socket_path}: {e}") from e
    return sock


def serve(config: DaemonConfig, stop_event: threading.Event | None = None,
          ready_event: threading.Event | None = None) -> None:
    """Accept control connections until shutdown is requested.

    Connections are handled one at a time; session state persists across
    connections so clients may reconnect mid-session.
    """
    os.makedirs(config.resolved_trace_dir(), exist_ok=True)
    sock = _bind(config.socket_path)
    sock.listen(1)
    sock.settimeout(0.2)
    state = _State(config)
    if ready_event is not None:
        ready_event.set()
    logger.info("listening on %s", config.socket_path)
    try:
        while stop_event is None or not stop_event.is_set():
            try:
                conn, _ = sock.accept()
            except socket.timeout:
                continue
            with conn:
                _serve_connection(conn, state)
    except _Shutdown:
        pass
    finally:
        if state.handle is not None:
            # abandon any in-flight session; nothing is persisted
            try:
                state.handle.stop()
            except WattmarkError:
                pass
        sock.close()
        if os.path.exists(config.socket_path):
            os.unlink(config.socket_path)


def _serve_connection(conn: socket.socket, state: _State) -> None:
    conn.settimeout(None)
    reader = conn.makefile("r", encoding="utf-8")
    for line in reader:
        try:
            response = handle_line(state, line)
        except _Shutdown:
            conn.sendall(b"ok {}\n")
            raise
        conn.sendall(response.encode("utf-8") + b"\n")
