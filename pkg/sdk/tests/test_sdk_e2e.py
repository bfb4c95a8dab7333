"""End-to-end: SDK against a real daemon process over the public socket
protocol and session-store file schema (no profiler-internal imports)."""

import json
import pathlib
import socket
import subprocess
import sys
import time

import pytest

import wattmark_client as wc


@pytest.fixture(autouse=True)
def clean_state(monkeypatch):
    wc.disable_tracing()
    wc.reset_clients()
    yield
    wc.disable_tracing()
    wc.reset_clients()


@pytest.fixture
def daemon(tmp_path):
    sock = tmp_path / "ctl.sock"
    store = tmp_path / "store.json"
    proc = subprocess.Popen(
        [sys.executable, "-m", "wattmark", "serve",
         "--socket", str(sock), "--source", "synthetic:constant:100",
         "--rate", "0.02", "--store", str(store),
         "--trace-dir", str(tmp_path / "traces")],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    deadline = time.monotonic() + 15.0
    while time.monotonic() < deadline:
        if proc.poll() is not None:
            raise AssertionError(f"daemon died: {proc.stderr.read().decode()}")
        try:
            probe = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            probe.connect(str(sock))
            probe.close()
            break
        except OSError:
            time.sleep(0.05)
    else:
        proc.kill()
        raise AssertionError("daemon socket never came up")
    yield {"socket": str(sock), "store": store}
    # drop any live client connections first or the single-connection
    # daemon never returns to accept() to see the shutdown
    wc.reset_clients()
    try:
        goodbye = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        goodbye.connect(str(sock))
        goodbye.sendall(b"shutdown\n")
        goodbye.close()
    except OSError:
        pass
    try:
        proc.wait(timeout=10.0)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait()
    proc.stdout.close()
    proc.stderr.close()


def load_store(path: pathlib.Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


class TestEndToEnd:
    def test_traced_sleep_loop_persists_session(self, daemon):
        wc.enable_tracing()

        @wc.traced(mode="baseline", phase_kind="inference", label="serve",
                   inference_count=1000, socket_path=daemon["socket"])
        def fake_inference_loop():
            # stand-in for a model serving loop
            time.sleep(0.5)
            return "predictions"

        with wc.session("sleepnet", "baseline", session_id="e2e-1",
                        socket_path=daemon["socket"]) as sess:
            with wc.phase("base_training", "train",
                          socket_path=daemon["socket"]) as train:
                time.sleep(0.2)
            result, info = fake_inference_loop()

        assert result == "predictions"
        assert info["inference_count"] == 1000
        assert info["energy_wh"] > 0
        assert train.summary["energy_wh"] > 0
        assert sess.summary["session_id"] == "e2e-1"

        stored = load_store(daemon["store"])["sessions"]["e2e-1"]
        phases = {p["label"]: p for p in stored["phases"]}
        serve = phases["serve"]
        assert serve["inference_count"] == 1000
        assert serve["energy_wh"] == pytest.approx(info["energy_wh"])
        # per-inference cost derived from the persisted session equals
        # phase energy / count
        iec = serve["energy_wh"] / serve["inference_count"]
        assert iec == pytest.approx(info["energy_wh"] / 1000)
        assert iec > 0

    def test_phase_context_sends_end_on_error(self, daemon):
        wc.enable_tracing()
        with wc.session("crashy", "baseline", session_id="e2e-2",
                        socket_path=daemon["socket"]):
            with pytest.raises(RuntimeError, match="boom"):
                with wc.phase("inference", "explodes",
                              socket_path=daemon["socket"]) as h:
                    raise RuntimeError("boom")
            assert h.failed is True
            assert h.summary["failed"] is True

        stored = load_store(daemon["store"])["sessions"]["e2e-2"]
        assert stored["phases"][0]["failed"] is True

    def test_nested_phase_is_client_side_error(self, daemon):
        wc.enable_tracing()
        with wc.session("nested", "baseline", socket_path=daemon["socket"]):
            with wc.phase("base_training", "outer", socket_path=daemon["socket"]):
                with pytest.raises(wc.TracerStateError):
                    with wc.phase("inference", "inner",
                                  socket_path=daemon["socket"]):
                        pass

    def test_auto_session_begins_on_first_phase(self, daemon):
        wc.enable_tracing()

        @wc.traced(mode="quantization", phase_kind="compression",
                   label="calibrate", auto_session=True,
                   socket_path=daemon["socket"])
        def calibrate():
            time.sleep(0.1)
            return "scales"

        result, info = calibrate()
        assert result == "scales"
        assert info["energy_wh"] >= 0
        client = wc.shared_client(daemon["socket"])
        state = client.query()
        assert state["active"] is True
        assert state["session_id"].startswith("quantization-")
        client.end_session()

    def test_daemon_error_propagates_as_exception(self, daemon):
        wc.enable_tracing()
        client = wc.shared_client(daemon["socket"])
        with pytest.raises(wc.DaemonError) as exc:
            client.end_phase()
        assert exc.value.code == "NoActiveSession"
