"""GPU energy profiling and full-cycle greeness analytics."""

from .accounting import (
    MethodRecord,
    compose_tec,
    derive_iec,
    export_records,
    import_records,
    session_record,
    validate_stages,
)
from .greeness import (
    CrossoverResult,
    GreenessCurve,
    GreenessQuery,
    Region,
    crossover,
    curve,
    greeness,
    greeness_value,
    log_grid,
    tau_sweep,
    winner_regions,
)
from .sampler import SamplerConfig, SamplerHandle, start, stop
from .session import (
    AlgorithmType,
    Phase,
    PhaseKind,
    Session,
    SessionRecorder,
    integrate_energy,
    load_session,
    read_trace,
    save_session,
    write_trace,
)
from .telemetry import (
    Constant,
    PowerTrace,
    Ramp,
    SourceSpec,
    Square,
    TelemetrySample,
    parse_nvidia_smi_xml,
    parse_source_spec,
    poll_live,
    synth_sample,
    synthesize_trace,
)

__version__ = "0.1.0"
