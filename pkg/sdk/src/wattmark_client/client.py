"""Line-protocol client for the profiling daemon.

Requests are single shlex-quoted lines (`op key=value ...`); responses are
`ok <json>` or `err <Code> <message>`. Uses only the standard library.
"""

from __future__ import annotations

import json
import os
import shlex
import socket

SOCKET_ENV = "WATTMARK_SOCKET"

PHASE_KINDS = ("base_training", "compression", "retraining", "inference")
MODES = ("distillation", "pruning", "quantization", "nas", "baseline")


class DaemonUnreachable(Exception):
    """Could not connect to the daemon socket."""


class DaemonError(Exception):
    """The daemon answered a request with an err line."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class TracerStateError(Exception):
    """Client-side misuse: phases are strictly sequential."""


def default_socket_path() -> str:
    path = os.environ.get(SOCKET_ENV)
    if not path:
        raise DaemonUnreachable(f"no socket path given and ${SOCKET_ENV} is unset")
    return path


def _format(op: str, **fields) -> str:
    parts = [op]
    for key, value in fields.items():
        if value is None:
            continue
        if isinstance(value, bool):
            value = int(value)
        parts.append(f"{key}={shlex.quote(str(value))}")
    return " ".join(parts)


class DaemonClient:
    """One persistent connection to a daemon; one in-flight phase at most."""

    def __init__(self, socket_path: str | None = None):
        self.socket_path = socket_path or default_socket_path()
        self._sock: socket.socket | None = None
        self._reader = None
        self._phase_open = False

    def connect(self) -> "DaemonClient":
        if self._sock is not None:
            return self
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        try:
            sock.connect(self.socket_path)
        except OSError as e:
            sock.close()
            raise DaemonUnreachable(f"{self.socket_path}: {e}") from e
        self._sock = sock
        self._reader = sock.makefile("r", encoding="utf-8")
        return self

    def close(self) -> None:
        if self._sock is not None:
            self._reader.close()
            self._sock.close()
            self._sock = None
            self._reader = None

    def __enter__(self) -> "DaemonClient":
        return self.connect()

    def __exit__(self, *exc) -> None:
        self.close()

    def request(self, op: str, **fields) -> dict:
        self.connect()
        line = _format(op, **fields)
        try:
            self._sock.sendall(line.encode("utf-8") + b"\n")
            response = self._reader.readline()
        except OSError as e:
            raise DaemonUnreachable(f"{self.socket_path}: {e}") from e
        if not response:
            raise DaemonUnreachable(f"{self.socket_path}: connection closed")
        response = response.rstrip("\n")
        if response.startswith("ok "):
            return json.loads(response[3:])
        if response.startswith("err "):
            code, _, message = response[4:].partition(" ")
            raise DaemonError(code, message)
        raise DaemonError("ProtocolError", f"bad response {response!r}")

    # --- protocol ops ----------------------------------------------------

    def begin_session(self, session_id: str, method: str, mode: str) -> dict:
        if mode not in MODES:
            raise ValueError(f"invalid tracing mode: {mode!r}")
        return self.request("begin-session", id=session_id, method=method, type=mode)

    def begin_phase(self, kind: str, label: str | None = None,
                    at: float | None = None) -> dict:
        if kind not in PHASE_KINDS:
            raise ValueError(f"invalid phase kind: {kind!r}")
        if self._phase_open:
            raise TracerStateError("a phase is already open; phases are sequential")
        payload = self.request("begin-phase", kind=kind, label=label, at=at)
        self._phase_open = True
        return payload

    def end_phase(self, count: int | None = None, failed: bool = False,
                  at: float | None = None) -> dict:
        payload = self.request("end-phase", count=count,
                               failed=failed or None, at=at)
        self._phase_open = False
        return payload

    def end_session(self) -> dict:
        return self.request("end-session")

    def query(self) -> dict:
        return self.request("query")
