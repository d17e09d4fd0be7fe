"""Finite-difference assembly of the backward (generator) and forward
(Fokker-Planck) operators on a cell-centered grid.

Both operators are built from 1D difference matrices combined with
Kronecker products (x is the fast index):

    backward  L+ u = f1 Dx u + f2 Dy u + D11 Dxx u + D22 Dyy u + 2 D12 Dx Dy u
    forward   L  p = -Dx(f1 p) - Dy(f2 p) + Dxx(D11 p) + Dyy(D22 p) + 2 Dx Dy(D12 p)

Interior rows use centered differences.  Border rows of the backward
operator:

* reflecting: the ghost node mirrors the first interior node
  (T[-1] = T[0]), i.e. zero normal derivative at the wall.
* truncated: second-order one-sided first differences, and the second
  difference of the neighbouring node.  Both are exact for quadratics, so
  constants, linear and quadratic functions are reproduced exactly.

The forward difference matrices are the negated/plain transposes of the
backward ones (for reflecting walls this is the sign-flipped mirror of the
advective product, i.e. zero flux).  Hence L is exactly the transpose of
L+, every column of L sums to zero, and the two share their spectrum.

``assemble_forward(..., zero_flux=True)`` uses the reflecting-wall rows
whatever the model's boundary policy.  That is the operator to take the
stationary density from on truncated domains: the transpose of the
extrapolating truncated rows is anti-diffusive at the border and puts
spurious signed mass there, while zero-flux walls keep the null vector
nonnegative.  The two differ only on border rows, where the density of a
well-sized truncated domain is negligible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grid import Grid, ScalarField
from .model import ModelSpec, diffusion_arrays, drift_arrays


@dataclass(frozen=True)
class SparseOperator:
    matrix: sp.csr_matrix
    which: str
    boundary: str
    grid: Grid

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def norm1(self):
        return float(abs(self.matrix).sum(axis=0).max())

    def triplets(self):
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def dump(self, path):
        """Write `row col value` lines for external inspection."""
        from .io import atomic_write_text

        rows, cols, vals = self.triplets()
        atomic_write_text(path, "".join(f"{r} {c} {v:.17g}\n" for r, c, v in zip(rows, cols, vals)))


def first_difference(n, h, boundary):
    """Backward-operator 1D first-derivative matrix."""
    upper = np.full(n - 1, 0.5 / h)
    lower = np.full(n - 1, -0.5 / h)
    main = np.zeros(n)
    if boundary == "reflecting":
        main[0], main[-1] = -0.5 / h, 0.5 / h
        return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")
    if boundary != "truncated":
        raise ValueError(f"unknown boundary {boundary!r}")
    m = sp.lil_matrix(sp.diags([lower, main, upper], [-1, 0, 1]))
    m[0, 0], m[0, 1], m[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
    m[n - 1, n - 1], m[n - 1, n - 2], m[n - 1, n - 3] = 1.5 / h, -2.0 / h, 0.5 / h
    return m.tocsr()


def second_difference(n, h, boundary):
    """Backward-operator 1D second-derivative matrix."""
    off = np.full(n - 1, 1.0 / h**2)
    main = np.full(n, -2.0 / h**2)
    if boundary == "reflecting":
        main[0] = main[-1] = -1.0 / h**2
        return sp.diags([off, main, off], [-1, 0, 1], format="csr")
    if boundary != "truncated":
        raise ValueError(f"unknown boundary {boundary!r}")
    m = sp.lil_matrix(sp.diags([off, main, off], [-1, 0, 1]))
    m[0, 0], m[0, 1], m[0, 2] = 1.0 / h**2, -2.0 / h**2, 1.0 / h**2
    m[n - 1, n - 1], m[n - 1, n - 2], m[n - 1, n - 3] = 1.0 / h**2, -2.0 / h**2, 1.0 / h**2
    return m.tocsr()


def _coefficients(spec, grid):
    X, Y = grid.mesh()
    f1, f2 = drift_arrays(spec, X, Y)
    D = diffusion_arrays(spec, X, Y)
    d12 = 0.5 * (D[:, 0, 1] + D[:, 1, 0])
    if np.any(d12 != 0):
        warnings.warn("nonzero off-diagonal diffusion uses the experimental mixed-derivative stencil",
                      stacklevel=3)
    return f1, f2, D[:, 0, 0], D[:, 1, 1], d12


def _blocks(grid, boundary, forward):
    gx = first_difference(grid.N, grid.dx, boundary)
    gy = first_difference(grid.M, grid.dy, boundary)
    hx = second_difference(grid.N, grid.dx, boundary)
    hy = second_difference(grid.M, grid.dy, boundary)
    if forward:
        gx, gy, hx, hy = -gx.T, -gy.T, hx.T, hy.T
    Ix = sp.identity(grid.N, format="csr")
    Iy = sp.identity(grid.M, format="csr")
    return (sp.kron(Iy, gx, format="csr"), sp.kron(gy, Ix, format="csr"),
            sp.kron(Iy, hx, format="csr"), sp.kron(hy, Ix, format="csr"),
            sp.kron(gy, gx, format="csr"))


def assemble_backward(spec: ModelSpec, grid: Grid) -> SparseOperator:
    f1, f2, d11, d22, d12 = _coefficients(spec, grid)
    Gx, Gy, Hx, Hy, Gxy = _blocks(grid, spec.boundary, forward=False)
    diag = sp.diags
    A = diag(f1) @ Gx + diag(f2) @ Gy + diag(d11) @ Hx + diag(d22) @ Hy
    if np.any(d12):
        A = A + 2.0 * diag(d12) @ Gxy
    return SparseOperator(_finish(A), "backward", spec.boundary, grid)


def assemble_forward(spec: ModelSpec, grid: Grid, zero_flux: bool = False) -> SparseOperator:
    f1, f2, d11, d22, d12 = _coefficients(spec, grid)
    boundary = "reflecting" if zero_flux else spec.boundary
    Gx, Gy, Hx, Hy, Gxy = _blocks(grid, boundary, forward=True)
    diag = sp.diags
    A = -(Gx @ diag(f1)) - Gy @ diag(f2) + Hx @ diag(d11) + Hy @ diag(d22)
    if np.any(d12):
        A = A + 2.0 * Gxy @ diag(d12)
    return SparseOperator(_finish(A), "forward", boundary, grid)


def _finish(A):
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def apply(op: SparseOperator, field: ScalarField) -> ScalarField:
    if field.values.shape[0] != op.dimension:
        raise ValueError(f"field of size {field.values.shape[0]} vs operator of dimension {op.dimension}")
    return field.with_values(op.matrix @ field.values, label=f"{op.which}[{field.label}]")
