"""Instrumentation client for the wattmark profiling daemon (stdlib only)."""

from .client import (
    MODES,
    PHASE_KINDS,
    SOCKET_ENV,
    DaemonClient,
    DaemonError,
    DaemonUnreachable,
    TracerStateError,
)
from .tracer import (
    TracerConfig,
    disable_tracing,
    enable_tracing,
    phase,
    reset_clients,
    session,
    shared_client,
    traced,
    tracing_enabled,
)

__version__ = "0.1.0"
