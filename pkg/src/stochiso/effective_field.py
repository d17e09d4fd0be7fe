"""Effective vector field F defined pointwise by

    grad(Q_plus) . F = lambda_plus * Q_plus
    grad(Sigma)  . F = lambda_floq * Sigma

solved as a complex 2x2 system at every node; Re F is the deterministic
flow whose limit cycle is the zero isostable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, StochIsoError
from .fields import gradient
from .grid import Grid, ScalarField, interpolate_many, write_csv

DET_RTOL = 1e-8
# gradients this small relative to their field-wide maximum are treated as
# vanishing (critical points of Q_plus or Sigma)
GRAD_RTOL = 1e-6
MAX_MASKED_FRACTION = 0.2


class MaskedStartError(StochIsoError, ValueError):
    stage = "effective-field"


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    F1: np.ndarray
    F2: np.ndarray
    valid: np.ndarray

    @property
    def real(self):
        return self.F1.real, self.F2.real

    def to_csv(self, path):
        X, Y = self.grid.mesh()
        data = np.column_stack([X, Y, self.F1.real, self.F1.imag, self.F2.real, self.F2.imag,
                                self.valid.astype(float)])
        data = np.where(np.isfinite(data), data, 0.0)
        write_csv(path, "x,y,Fx_re,Fx_im,Fy_re,Fy_im,valid", data)


def _interior(grid):
    m = np.zeros((grid.M, grid.N), dtype=bool)
    m[1:-1, 1:-1] = True
    return m.ravel()


def effective_vector_field(Q_plus: ScalarField, Sigma: ScalarField, lambda_plus: complex,
                           lambda_floq: float, grid: Grid,
                           max_masked: float = MAX_MASKED_FRACTION) -> VectorField:
    qx, qy = (g.values for g in gradient(Q_plus, grid))
    sx, sy = (g.values for g in gradient(Sigma, grid))
    bq = lambda_plus * Q_plus.values
    bs = lambda_floq * Sigma.values
    det = qx * sy - qy * sx
    nq = np.sqrt(np.abs(qx) ** 2 + np.abs(qy) ** 2)
    ns = np.sqrt(np.abs(sx) ** 2 + np.abs(sy) ** 2)
    valid = ((np.abs(det) >= DET_RTOL * nq * ns)
             & (nq > GRAD_RTOL * nq.max()) & (ns > GRAD_RTOL * ns.max()))
    with np.errstate(divide="ignore", invalid="ignore"):
        F1 = np.where(valid, (bq * sy - qy * bs) / det, np.nan)
        F2 = np.where(valid, (qx * bs - bq * sx) / det, np.nan)
    interior = _interior(grid)
    frac = 1.0 - valid[interior].mean()
    if frac > max_masked:
        raise NumericalError(
            f"{100 * frac:.1f}% of interior nodes have dependent gradients; wrong modes selected?")
    return VectorField(grid, F1, F2, valid)


def residuals(F: VectorField, Q_plus, Sigma, lambda_plus, lambda_floq):
    """Relative residuals of both defining equations at the valid nodes."""
    grid = F.grid
    qx, qy = (g.values for g in gradient(Q_plus, grid))
    sx, sy = (g.values for g in gradient(Sigma, grid))
    v = F.valid
    rq = np.abs(qx * F.F1 + qy * F.F2 - lambda_plus * Q_plus.values)[v]
    rs = np.abs(sx * F.F1 + sy * F.F2 - lambda_floq * Sigma.values)[v]
    return (rq.max() / np.abs(lambda_plus * Q_plus.values).max(),
            rs.max() / np.abs(lambda_floq * Sigma.values).max())


def _sampler(F: VectorField):
    grid = F.grid
    f1 = ScalarField(grid, np.where(F.valid, F.F1.real, 0.0))
    f2 = ScalarField(grid, np.where(F.valid, F.F2.real, 0.0))
    ok = ScalarField(grid, F.valid.astype(float))
    d = grid.domain

    def sample(p):
        x, y = p
        if not (d.x_lo <= x <= d.x_hi and d.y_lo <= y <= d.y_hi):
            return None
        px, py = np.array([x]), np.array([y])
        # all four corners valid <=> bilinear weight of the mask is one
        if interpolate_many(ok, px, py)[0] < 1.0 - 1e-12:
            return None
        return np.array([interpolate_many(f1, px, py)[0], interpolate_many(f2, px, py)[0]])

    return sample


def field_line(F: VectorField, start, step: float, n_steps: int) -> np.ndarray:
    """Fixed-step RK4 integration of Re F from ``start``; stops early when
    the path enters a cell touching a masked node or leaves the domain."""
    sample = _sampler(F)
    p = np.asarray(start, dtype=float)
    if not F.valid.any() or sample(p) is None:
        raise MaskedStartError(f"start point {tuple(start)} lies in the masked region")
    path = [p.copy()]
    for _ in range(n_steps):
        k1 = sample(p)
        k2 = sample(p + 0.5 * step * k1) if k1 is not None else None
        k3 = sample(p + 0.5 * step * k2) if k2 is not None else None
        k4 = sample(p + step * k3) if k3 is not None else None
        if k4 is None:
            break
        p = p + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if sample(p) is None:
            break
        path.append(p.copy())
    return np.array(path)
