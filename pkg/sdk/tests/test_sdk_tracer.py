import socket

import pytest

import wattmark_client as wc
from wattmark_client.tracer import TracerConfig


@pytest.fixture(autouse=True)
def clean_state(monkeypatch):
    wc.disable_tracing()
    wc.reset_clients()
    monkeypatch.delenv(wc.SOCKET_ENV, raising=False)
    yield
    wc.disable_tracing()
    wc.reset_clients()


class GuardedSocket:
    """socket.socket stand-in that fails the test on any instantiation."""

    def __init__(self, *args, **kwargs):
        raise AssertionError("socket created while tracing was disabled")


class TestDisabledMode:
    def test_returns_result_and_none(self):
        @wc.traced(mode="distillation", socket_path="/tmp/nowhere.sock")
        def work(x):
            return x * 2

        assert work(21) == (42, None)

    def test_no_daemon_io_when_disabled(self, monkeypatch):
        monkeypatch.setattr(socket, "socket", GuardedSocket)

        @wc.traced(mode="baseline", socket_path="/tmp/nowhere.sock")
        def work():
            return "done"

        result, info = work()
        assert result == "done" and info is None

    def test_phase_context_is_inert_when_disabled(self, monkeypatch):
        monkeypatch.setattr(socket, "socket", GuardedSocket)
        with wc.phase("inference", "noop", socket_path="/tmp/nowhere.sock") as h:
            pass
        assert h.summary is None

    def test_exceptions_pass_through_unchanged(self):
        @wc.traced(mode="nas", socket_path="/tmp/nowhere.sock")
        def boom():
            raise KeyError("original")

        with pytest.raises(KeyError, match="original"):
            boom()


class TestConfigValidation:
    def test_invalid_mode_rejected_at_decoration_time(self):
        with pytest.raises(ValueError, match="invalid tracing mode"):
            wc.traced(mode="alchemy")(lambda: None)

    def test_invalid_phase_kind(self):
        with pytest.raises(ValueError, match="invalid phase kind"):
            TracerConfig(mode="pruning", phase_kind="warmup")

    def test_all_documented_modes_accepted(self):
        for mode in wc.MODES:
            TracerConfig(mode=mode)

    def test_wrapped_function_metadata_preserved(self):
        @wc.traced(mode="pruning")
        def my_training_step():
            """does one step"""

        assert my_training_step.__name__ == "my_training_step"
        assert my_training_step.__doc__ == "does one step"


class TestUnreachableDaemon:
    def test_raise_mode(self, tmp_path):
        wc.enable_tracing()

        @wc.traced(mode="baseline", socket_path=str(tmp_path / "missing.sock"))
        def work():
            return 1

        with pytest.raises(wc.DaemonUnreachable):
            work()

    def test_warn_mode_degrades_to_untraced(self, tmp_path):
        wc.enable_tracing()

        @wc.traced(mode="baseline", socket_path=str(tmp_path / "missing.sock"),
                   on_unreachable="warn")
        def work():
            return 7

        with pytest.warns(UserWarning, match="untraced"):
            result, info = work()
        assert result == 7 and info is None

    def test_missing_socket_path_env(self):
        with pytest.raises(wc.DaemonUnreachable):
            wc.DaemonClient().connect()
