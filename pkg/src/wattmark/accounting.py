"""Session accounting: stage validation, TEC/IEC composition, method records.

Accuracy is stored as a percentage in [0, 100]; published greeness values
only reproduce on the percent scale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .errors import (
    BadHeader,
    InferenceCountMissing,
    NoInferencePhase,
    RangeViolation,
    RowParseError,
    UnvalidatedSession,
    ZeroInferenceCount,
)
from .session import AlgorithmType, Phase, PhaseKind, Session


@dataclass(frozen=True)
class MethodRecord:
    """(method, type, TEC, IEC, Acc) tuple the greeness metric consumes."""

    method_name: str
    algorithm_type: AlgorithmType
    tec_wh: float
    iec_wh: float
    acc_pct: float

    def __post_init__(self):
        if self.tec_wh < 0:
            raise RangeViolation("tec_wh", f"must be >= 0, got {self.tec_wh}")
        if self.iec_wh < 0:
            raise RangeViolation("iec_wh", f"must be >= 0, got {self.iec_wh}")
        if not 0.0 <= self.acc_pct <= 100.0:
            raise RangeViolation("acc_pct", f"must be in [0, 100], got {self.acc_pct}")


@dataclass(frozen=True)
class StageRule:
    required: frozenset[PhaseKind]
    forbidden: frozenset[PhaseKind]


def _rule(required: set[PhaseKind], forbidden: set[PhaseKind]) -> StageRule:
    return StageRule(frozenset(required), frozenset(forbidden))


# Which lifecycle stages each algorithm type must and must not contain.
STAGE_MATRIX: dict[AlgorithmType, StageRule] = {
    AlgorithmType.BASELINE: _rule(
        {PhaseKind.BASE_TRAINING, PhaseKind.INFERENCE},
        {PhaseKind.COMPRESSION, PhaseKind.RETRAINING}),
    AlgorithmType.PRUNING: _rule(
        {PhaseKind.BASE_TRAINING, PhaseKind.COMPRESSION,
         PhaseKind.RETRAINING, PhaseKind.INFERENCE},
        set()),
    AlgorithmType.DISTILLATION: _rule(
        {PhaseKind.BASE_TRAINING, PhaseKind.RETRAINING, PhaseKind.INFERENCE},
        {PhaseKind.COMPRESSION}),
    AlgorithmType.NAS: _rule(
        {PhaseKind.COMPRESSION, PhaseKind.RETRAINING, PhaseKind.INFERENCE},
        {PhaseKind.BASE_TRAINING}),
    # post-training quantization: calibration only, no retraining
    AlgorithmType.QUANTIZATION: _rule(
        {PhaseKind.BASE_TRAINING, PhaseKind.COMPRESSION, PhaseKind.INFERENCE},
        {PhaseKind.RETRAINING}),
}


def _counted_phases(session: Session) -> list[Phase]:
    # failed phases are kept for forensics but excluded from accounting
    return [p for p in session.phases if not p.failed]


def validate_stages(session: Session) -> list[str]:
    """Check the session's phases against its algorithm type's stage rule.

    Returns a list of violations; an empty list means the session is valid.
    """
    rule = STAGE_MATRIX[session.algorithm_type]
    present = {p.kind for p in _counted_phases(session)}
    violations = [f"missing: {k.display}" for k in sorted(rule.required - present,
                                                          key=lambda k: k.value)]
    violations += [f"forbidden: {k.display}" for k in sorted(present & rule.forbidden,
                                                             key=lambda k: k.value)]
    return violations


def compose_tec(session: Session) -> float:
    """Total training-phase energy in W·h: every non-inference phase summed."""
    violations = validate_stages(session)
    if violations:
        raise UnvalidatedSession(violations)
    return sum(p.energy_wh for p in _counted_phases(session)
               if p.kind is not PhaseKind.INFERENCE)


def derive_iec(session: Session) -> float:
    """Energy per single inference: summed phase energy over summed counts."""
    phases = [p for p in _counted_phases(session) if p.kind is PhaseKind.INFERENCE]
    if not phases:
        raise NoInferencePhase(f"session {session.session_id!r} has no inference phase")
    for p in phases:
        if p.inference_count is None:
            raise InferenceCountMissing(f"inference phase {p.label!r} has no count")
    total_count = sum(p.inference_count for p in phases)
    if total_count <= 0:
        raise ZeroInferenceCount("total inference count is zero")
    total_energy = sum(p.energy_wh for p in phases)
    return total_energy / total_count


def session_record(session: Session, acc_pct: float) -> MethodRecord:
    """Collapse a validated session plus measured accuracy into a record."""
    return MethodRecord(
        method_name=session.method_name,
        algorithm_type=session.algorithm_type,
        tec_wh=compose_tec(session),
        iec_wh=derive_iec(session),
        acc_pct=acc_pct)


# --- methods table ----------------------------------------------------------

TABLE_HEADER = ["method", "type", "tec_wh", "iec_wh", "acc_pct"]


def import_records(table_path: str) -> list[MethodRecord]:
    """Read a delimited methods table; scientific notation is accepted."""
    with open(table_path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise BadHeader(f"{table_path}: empty file") from None
        if [h.strip() for h in header] != TABLE_HEADER:
            raise BadHeader(
                f"{table_path}: expected header {','.join(TABLE_HEADER)!r}, "
                f"got {','.join(header)!r}")
        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TABLE_HEADER):
                raise RowParseError(line_no, f"expected {len(TABLE_HEADER)} fields, got {len(row)}")
            method, type_str, tec_str, iec_str, acc_str = (c.strip() for c in row)
            try:
                algorithm_type = AlgorithmType(type_str.lower())
            except ValueError:
                raise RowParseError(line_no, f"unknown algorithm type {type_str!r}") from None
            try:
                tec, iec, acc = float(tec_str), float(iec_str), float(acc_str)
            except ValueError as e:
                raise RowParseError(line_no, str(e)) from None
            records.append(MethodRecord(method, algorithm_type, tec, iec, acc))
    return records


def export_records(records: list[MethodRecord], table_path: str) -> None:
    """Write records in the import format (repr floats, so values round-trip)."""
    with open(table_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TABLE_HEADER)
        for r in records:
            writer.writerow([r.method_name, r.algorithm_type.value,
                             repr(r.tec_wh), repr(r.iec_wh), repr(r.acc_pct)])


def records_by_name(records: list[MethodRecord]) -> dict[str, MethodRecord]:
    return {r.method_name: r for r in records}
