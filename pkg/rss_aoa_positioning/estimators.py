"""Closed-form WLS and LS position estimators over the linearized system."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from .const import MAX_CONDITION_ESTIMATE, Method
from .errors import ConfigurationError, SingularGeometryError
from .linearization import (
    LinearSystem,
    WeightVector,
    apply_weights,
    build_system,
    build_weights,
    weight_rows,
)
from .measurement import MeasurementVector
from .scene import PathLossConfig, Point3

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PositionEstimate:
    position: Point3
    condition_estimate: float
    """Condition number of the normal-equations matrix (A^T W^T W A)."""
    method_tag: Method


@dataclass(frozen=True, eq=False)
class BatchEstimate:
    positions: np.ndarray
    """(M, 3); NaN rows where `failed` is set."""
    condition: np.ndarray
    failed: np.ndarray


def solve_batch(A: np.ndarray, b: np.ndarray, w: np.ndarray | None = None) -> BatchEstimate:
    """Minimize ||W(At - b)|| for a stack of systems by QR factorization.

    Args:
        A: (M, 3N, 3) system matrices.
        b: (M, 3N) right-hand sides.
        w: Optional (M, N) anchor weights; None means unweighted LS.
    """
    if w is not None:
        A, b = weight_rows(A, b, w)
    q, r = np.linalg.qr(A)
    singular_values = np.linalg.svd(r, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = (singular_values[..., 0] / singular_values[..., -1]) ** 2
    condition = np.where(np.isfinite(condition), condition, np.inf)
    failed = condition > MAX_CONDITION_ESTIMATE
    # Swap singular factors for identity so one bad trial does not poison the stack
    safe_r = np.where(failed[:, None, None], np.eye(3), r)
    qtb = np.einsum("mij,mi->mj", q, b)
    positions = np.linalg.solve(safe_r, qtb[..., None])[..., 0]
    positions[failed] = np.nan
    if failed.any():
        _LOGGER.debug("%d of %d systems are singular", int(failed.sum()), failed.shape[0])
    return BatchEstimate(positions=positions, condition=condition, failed=failed)


def _single(A: np.ndarray, b: np.ndarray, w: np.ndarray | None, method: Method) -> PositionEstimate:
    if A.ndim != 2 or A.shape[1] != 3 or b.shape != (A.shape[0],):  # noqa: PLR2004
        msg = f"Expected A (3N, 3) and b (3N,), got {A.shape} and {b.shape}"
        raise ConfigurationError(msg)
    result = solve_batch(A[None], b[None], None if w is None else w[None])
    condition = float(result.condition[0])
    if result.failed[0]:
        msg = f"{method.value}: weighted system is rank deficient (condition {condition:.3g})"
        raise SingularGeometryError(msg, condition)
    return PositionEstimate(
        position=Point3.from_array(result.positions[0]),
        condition_estimate=condition,
        method_tag=method,
    )


def solve_wls(sys: LinearSystem, w: WeightVector) -> PositionEstimate:
    A_w, b_w = apply_weights(sys, w)
    return _single(A_w, b_w, None, Method.WLS)


def solve_ls(sys: LinearSystem) -> PositionEstimate:
    return _single(sys.A, sys.b, None, Method.LS)


def estimate_from_measurements(
    theta: MeasurementVector, anchors: Any, pl: PathLossConfig, method: Method = Method.WLS
) -> PositionEstimate:
    """Linearize and solve in one call (closed-form methods only)."""
    sys = build_system(theta, anchors, pl)
    if method == Method.WLS:
        return solve_wls(sys, build_weights(theta.rss, pl))
    if method == Method.LS:
        return solve_ls(sys)
    msg = f"{method.value} is not a closed-form method"
    raise ConfigurationError(msg)


def solve_wls_batch(A: np.ndarray, b: np.ndarray, w: np.ndarray) -> BatchEstimate:
    return solve_batch(A, b, w)


def solve_ls_batch(A: np.ndarray, b: np.ndarray) -> BatchEstimate:
    return solve_batch(A, b)
