"""End-to-end compilation: distance spec -> minimal cell -> verified encoding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .encoder import VoltageEncoding, derive_encoding, verify_encoding
from .metric import DistanceMatrix, DistanceSpec, MetricKind, build_dm, load_custom_dm
from .solver import (
    DEFAULT_NODE_BUDGET,
    CurrentRange,
    GlobalAssignment,
    ProbeOutcome,
    probe_k_range,
)


@dataclass(frozen=True)
class CompileResult:
    """Minimal-k encoding for a matrix, plus the per-k probe trail."""

    dm: DistanceMatrix
    cr: CurrentRange
    probes: tuple[ProbeOutcome, ...]
    k: Optional[int]
    assignment: Optional[GlobalAssignment]
    encoding: Optional[VoltageEncoding]

    @property
    def feasible(self) -> bool:
        return self.encoding is not None


def compile_dm(
    dm: DistanceMatrix,
    cr: Optional[CurrentRange] = None,
    k_max: int = 8,
    budget: int = DEFAULT_NODE_BUDGET,
) -> CompileResult:
    """Find the smallest feasible cell and derive its verified encoding.

    With cr omitted, the contiguous range 0..max_entry is used so every
    entry is decomposable by a large enough cell. The derived encoding is
    re-verified against the matrix before being returned; a verification
    failure would indicate a solver defect and raises.
    """
    if cr is None:
        cr = CurrentRange.covering(dm.max_entry)
    probes = tuple(probe_k_range(dm, cr, k_max, budget))
    last = probes[-1]
    if not last.feasible:
        return CompileResult(dm, cr, probes, None, None, None)
    assert last.assignment is not None
    encoding = derive_encoding(last.assignment)
    report = verify_encoding(encoding, dm)
    if not report.passed:
        raise RuntimeError(
            f"derived encoding failed verification on {len(report.mismatches)} entries"
        )
    return CompileResult(dm, cr, probes, last.k, last.assignment, encoding)


def resolve_dm(spec: DistanceSpec) -> DistanceMatrix:
    """Build a built-in matrix or load the referenced custom table."""
    if spec.kind is MetricKind.CUSTOM:
        assert spec.custom_source is not None
        return load_custom_dm(spec.custom_source)
    return build_dm(spec)


def compile_spec(
    spec: DistanceSpec,
    cr: Optional[CurrentRange] = None,
    k_max: int = 8,
    budget: int = DEFAULT_NODE_BUDGET,
) -> CompileResult:
    return compile_dm(resolve_dm(spec), cr, k_max, budget)
