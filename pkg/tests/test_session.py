import time
import warnings

import numpy as np
import pytest

from wattmark.errors import (
    EmptyWindowWarning,
    InferenceCountMissing,
    NoOpenPhase,
    PhaseAlreadyOpen,
    SessionNotFound,
    StoreCorrupt,
)
from wattmark.sampler import SamplerConfig, start
from wattmark.session import (
    AlgorithmType,
    Phase,
    PhaseKind,
    Session,
    SessionRecorder,
    integrate_energy,
    list_sessions,
    load_session,
    read_trace,
    save_session,
    window_stats,
    write_trace,
)
from wattmark.telemetry import (
    Constant,
    PowerTrace,
    Ramp,
    SourceSpec,
    Square,
    TelemetrySample,
    synth_sample,
    synthesize_trace,
)

from oracles import random_trace

WH = 3600.0


def quadrature_oracle_wh(waveform, duration_s, step=0.001):
    """Independent fine-grained oracle: 1 ms left-rectangle quadrature of the
    waveform itself (not of any trace)."""
    n = int(round(duration_s / step))
    total = 0.0
    for k in range(n):
        total += synth_sample(waveform, k * step) * step
    return total / WH


class TestIntegration:
    def test_constant_100w_36s_is_one_wh(self):
        trace = synthesize_trace(Constant(100.0), rate_s=0.1, duration_s=36.0)
        assert len(trace.samples) == 360
        assert integrate_energy(trace, 0.0, 36.0) == pytest.approx(1.0, abs=1e-9)

    def test_empty_window_is_zero_with_warning(self):
        trace = synthesize_trace(Constant(100.0), rate_s=0.1, duration_s=1.0)
        with pytest.warns(EmptyWindowWarning):
            assert integrate_energy(trace, 50.0, 60.0) == 0.0

    def test_ramp_against_millisecond_quadrature(self):
        wave = Ramp(0.0, 200.0, duration_s=10.0)
        trace = synthesize_trace(wave, rate_s=0.1, duration_s=10.0)
        got = integrate_energy(trace, 0.0, 10.0)
        oracle = quadrature_oracle_wh(wave, 10.0)
        assert abs(got - oracle) / oracle < 0.01

    def test_multi_device_energies_sum(self):
        trace = synthesize_trace(Constant(100.0), rate_s=0.1, duration_s=36.0,
                                 device_set=(0, 1))
        assert integrate_energy(trace, 0.0, 36.0) == pytest.approx(2.0, abs=1e-9)

    def test_window_is_half_open(self):
        samples = [TelemetrySample(float(t), 0, 100.0, 0.0, 0.0) for t in (0.0, 1.0, 2.0)]
        trace = PowerTrace(device_set=(0,), nominal_rate=1.0, samples=samples)
        # sample at 2.0 is outside [0, 2): 100 W over two 1 s gaps
        energy, count = window_stats(trace, 0.0, 2.0)
        assert count == 2
        assert energy == pytest.approx(200.0 / WH)

    def test_additivity_on_random_traces(self):
        rng = np.random.RandomState(42)
        warnings.simplefilter("ignore", EmptyWindowWarning)
        for _ in range(200):
            trace, duration = random_trace(rng)
            start_ts = float(rng.uniform(0, duration / 3))
            end_ts = float(rng.uniform(2 * duration / 3, duration))
            m = float(rng.uniform(start_ts, end_ts))
            whole = integrate_energy(trace, start_ts, end_ts)
            split = (integrate_energy(trace, start_ts, m)
                     + integrate_energy(trace, m, end_ts))
            assert split == pytest.approx(whole, rel=1e-9, abs=1e-15)

    def test_monotone_in_window_size(self):
        rng = np.random.RandomState(43)
        warnings.simplefilter("ignore", EmptyWindowWarning)
        for _ in range(200):
            trace, duration = random_trace(rng)
            lo = float(rng.uniform(0, duration / 2))
            hi = float(rng.uniform(lo, duration))
            inner = integrate_energy(trace, lo, hi)
            outer = integrate_energy(trace, max(lo - 0.5, 0.0), hi + 0.5)
            assert outer >= inner - 1e-12

    def test_integration_is_deterministic(self):
        trace, duration = random_trace(np.random.RandomState(7))
        first = integrate_energy(trace, 0.0, duration)
        second = integrate_energy(trace, 0.0, duration)
        assert first == second

    def test_rate_robustness_for_slow_square(self):
        # 20 s period square sampled at 0.1/0.5/1.0 s over a 100 s window:
        # mean power and energy agree within 2% across rates
        wave = Square(50.0, 150.0, period_s=20.0, duty=0.5)
        energies, means = [], []
        for rate in (0.1, 0.5, 1.0):
            trace = synthesize_trace(wave, rate_s=rate, duration_s=100.0)
            energies.append(integrate_energy(trace, 0.0, 100.0))
            powers = [s.power_draw for s in trace.samples]
            means.append(sum(powers) / len(powers))
        for series in (energies, means):
            base = series[0]
            for v in series[1:]:
                assert abs(v - base) / base < 0.02

    def test_backwards_window_rejected(self):
        trace = synthesize_trace(Constant(1.0), 0.1, 1.0)
        with pytest.raises(ValueError):
            integrate_energy(trace, 5.0, 1.0)


class TestPhaseType:
    def test_inference_requires_count(self):
        with pytest.raises(InferenceCountMissing):
            Phase(PhaseKind.INFERENCE, "x", 0.0, 1.0, 0.5, 10)

    def test_count_forbidden_elsewhere(self):
        with pytest.raises(ValueError):
            Phase(PhaseKind.COMPRESSION, "x", 0.0, 1.0, 0.5, 10, inference_count=5)

    def test_failed_inference_may_omit_count(self):
        p = Phase(PhaseKind.INFERENCE, "x", 0.0, 1.0, 0.5, 10, failed=True)
        assert p.failed and p.inference_count is None

    def test_session_rejects_overlapping_phases(self):
        phases = [Phase(PhaseKind.BASE_TRAINING, "a", 0.0, 5.0, 1.0, 50),
                  Phase(PhaseKind.INFERENCE, "b", 4.0, 6.0, 0.1, 20, inference_count=10)]
        with pytest.raises(ValueError):
            Session("s", "m", AlgorithmType.BASELINE, (0,), phases)


def replay_handle(trace, tmp_path, name="trace"):
    path = tmp_path / f"{name}.trace"
    write_trace(trace, str(path))
    return start(SamplerConfig(source=SourceSpec.replay(str(path)),
                               rate_s=trace.nominal_rate))


class TestRecorder:
    def test_measured_inference_phase(self, tmp_path):
        # constant power chosen so the 10 s integral is 0.4465 Wh
        trace = synthesize_trace(Constant(160.74), rate_s=0.1, duration_s=10.0)
        handle = replay_handle(trace, tmp_path)
        rec = SessionRecorder(handle, "s1", "vgg16", AlgorithmType.BASELINE)
        rec.begin_phase(PhaseKind.INFERENCE, "serving", at=0.0)
        phase = rec.end_phase(inference_count=500000, at=10.0)
        assert phase.energy_wh == pytest.approx(0.4465, abs=1e-9)
        assert phase.inference_count == 500000
        assert phase.sample_count == 100
        handle.stop()

    def test_begin_while_open(self, tmp_path):
        trace = synthesize_trace(Constant(10.0), 0.1, 1.0)
        handle = replay_handle(trace, tmp_path)
        rec = SessionRecorder(handle, "s", "m", AlgorithmType.BASELINE)
        rec.begin_phase(PhaseKind.BASE_TRAINING, "train", at=0.0)
        with pytest.raises(PhaseAlreadyOpen):
            rec.begin_phase(PhaseKind.INFERENCE, "infer", at=0.5)
        handle.stop()

    def test_end_without_open(self, tmp_path):
        trace = synthesize_trace(Constant(10.0), 0.1, 1.0)
        handle = replay_handle(trace, tmp_path)
        rec = SessionRecorder(handle, "s", "m", AlgorithmType.BASELINE)
        with pytest.raises(NoOpenPhase):
            rec.end_phase()
        handle.stop()

    def test_inference_count_required(self, tmp_path):
        trace = synthesize_trace(Constant(10.0), 0.1, 1.0)
        handle = replay_handle(trace, tmp_path)
        rec = SessionRecorder(handle, "s", "m", AlgorithmType.BASELINE)
        rec.begin_phase(PhaseKind.INFERENCE, "infer", at=0.0)
        with pytest.raises(InferenceCountMissing):
            rec.end_phase(at=0.5)
        handle.stop()

    def test_zero_duration_phase_is_valid(self, tmp_path):
        trace = synthesize_trace(Constant(10.0), 0.1, 1.0)
        handle = replay_handle(trace, tmp_path)
        rec = SessionRecorder(handle, "s", "m", AlgorithmType.BASELINE)
        rec.begin_phase(PhaseKind.BASE_TRAINING, "t", at=0.3)
        phase = rec.end_phase(at=0.3)
        assert phase.energy_wh == 0.0
        assert phase.sample_count == 0
        handle.stop()

    def test_finish_assembles_session(self, tmp_path):
        trace = synthesize_trace(Constant(90.0), rate_s=0.1, duration_s=4.0)
        handle = replay_handle(trace, tmp_path)
        rec = SessionRecorder(handle, "run1", "vgg16", AlgorithmType.BASELINE)
        rec.begin_phase(PhaseKind.BASE_TRAINING, "train", at=0.0)
        rec.end_phase(at=2.0)
        rec.begin_phase(PhaseKind.INFERENCE, "infer", at=2.0)
        rec.end_phase(inference_count=1000, at=4.0)
        out = tmp_path / "run1.trace"
        session, full = rec.finish(trace_path=str(out))
        assert [p.kind for p in session.phases] == [PhaseKind.BASE_TRAINING,
                                                    PhaseKind.INFERENCE]
        assert len(full.samples) == 40
        assert out.exists()
        # the two phases tile the trace: energies sum to the whole window
        total = integrate_energy(full, 0.0, 4.0)
        assert sum(p.energy_wh for p in session.phases) == pytest.approx(total, rel=1e-12)

    def test_finish_with_open_phase_rejected(self, tmp_path):
        trace = synthesize_trace(Constant(10.0), 0.1, 1.0)
        handle = replay_handle(trace, tmp_path)
        rec = SessionRecorder(handle, "s", "m", AlgorithmType.BASELINE)
        rec.begin_phase(PhaseKind.BASE_TRAINING, "t", at=0.0)
        with pytest.raises(PhaseAlreadyOpen):
            rec.finish()
        rec.end_phase(at=0.5)
        handle.stop()

    def test_live_clock_phase_on_synthetic_source(self):
        config = SamplerConfig(source=SourceSpec.synthetic(Constant(100.0)),
                               rate_s=0.05)
        handle = start(config)
        rec = SessionRecorder(handle, "wall", "m", AlgorithmType.BASELINE)
        rec.begin_phase(PhaseKind.INFERENCE, "infer")
        time.sleep(0.4)
        phase = rec.end_phase(inference_count=10)
        assert phase.energy_wh > 0
        handle.stop()


class TestTraceFile:
    def test_round_trip_identity(self, tmp_path):
        trace = synthesize_trace(Square(33.3, 77.7, 1.7, 0.42), 0.1, 5.0, (0, 1))
        trace.samples[0].temperature = 36.5
        path = tmp_path / "t.trace"
        write_trace(trace, str(path))
        again = read_trace(str(path))
        assert again == trace
        # serialize -> parse -> serialize is byte stable
        path2 = tmp_path / "t2.trace"
        write_trace(again, str(path2))
        assert path.read_bytes() == path2.read_bytes()

    def test_truncated_trace_rejected(self, tmp_path):
        path = tmp_path / "t.trace"
        write_trace(synthesize_trace(Constant(5.0), 0.1, 1.0), str(path))
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(StoreCorrupt):
            read_trace(str(path))

    def test_garbage_header_rejected(self, tmp_path):
        path = tmp_path / "t.trace"
        path.write_text("hello\nworld\n")
        with pytest.raises(StoreCorrupt):
            read_trace(str(path))


def sample_session(trace_path=None):
    phases = [
        Phase(PhaseKind.BASE_TRAINING, "train", 0.0, 100.0, 138.59, 1000),
        Phase(PhaseKind.INFERENCE, "infer", 100.0, 110.0, 0.4465, 100,
              inference_count=500000),
    ]
    return Session("sess-1", "vgg16", AlgorithmType.BASELINE, (0,), phases,
                   trace_path=trace_path)


class TestStore:
    def test_save_load_round_trip(self, tmp_path):
        store = str(tmp_path / "store.json")
        session = sample_session(trace_path=str(tmp_path / "s.trace"))
        save_session(session, store)
        assert load_session(store, "sess-1") == session

    def test_unknown_id(self, tmp_path):
        store = str(tmp_path / "store.json")
        save_session(sample_session(), store)
        with pytest.raises(SessionNotFound):
            load_session(store, "missing")

    def test_missing_store(self, tmp_path):
        with pytest.raises(SessionNotFound):
            load_session(str(tmp_path / "nope.json"), "sess-1")

    def test_truncated_store(self, tmp_path):
        store = tmp_path / "store.json"
        save_session(sample_session(), str(store))
        data = store.read_bytes()
        store.write_bytes(data[:len(data) // 2])
        with pytest.raises(StoreCorrupt):
            load_session(str(store), "sess-1")

    def test_multiple_sessions_listed(self, tmp_path):
        store = str(tmp_path / "store.json")
        s1 = sample_session()
        s2 = sample_session()
        s2.session_id = "sess-2"
        save_session(s1, store)
        save_session(s2, store)
        assert list_sessions(store) == ["sess-1", "sess-2"]
