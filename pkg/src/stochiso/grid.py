"""Cell-centered rectangular grids and grid-sampled scalar fields.

Node (i, j) sits at x_i = x_lo + (i + 1/2) dx, y_j = y_lo + (j + 1/2) dy with
dx = (x_hi - x_lo) / N.  Flat index k = i + N * j, so arrays reshaped to
(M, N) are indexed [j, i].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import Domain

MIN_POINTS = 8


@dataclass(frozen=True)
class Grid:
    domain: Domain
    N: int
    M: int

    def __post_init__(self):
        if int(self.N) != self.N or int(self.M) != self.M:
            raise ConfigError("grid sizes must be integers")
        if self.N < MIN_POINTS or self.M < MIN_POINTS:
            raise ConfigError(f"grid needs at least {MIN_POINTS} points per axis, got {self.N}x{self.M}")

    @property
    def dx(self):
        return (self.domain.x_hi - self.domain.x_lo) / self.N

    @property
    def dy(self):
        return (self.domain.y_hi - self.domain.y_lo) / self.M

    @property
    def size(self):
        return self.N * self.M

    @property
    def cell_area(self):
        return self.dx * self.dy

    @property
    def x(self):
        return self.domain.x_lo + (np.arange(self.N) + 0.5) * self.dx

    @property
    def y(self):
        return self.domain.y_lo + (np.arange(self.M) + 0.5) * self.dy

    def mesh(self):
        """Flat node coordinate arrays (X, Y) of length N*M."""
        X, Y = np.meshgrid(self.x, self.y)
        return X.ravel(), Y.ravel()

    def nearest_node(self, point):
        i = int(np.clip(np.floor((point[0] - self.domain.x_lo) / self.dx), 0, self.N - 1))
        j = int(np.clip(np.floor((point[1] - self.domain.y_lo) / self.dy), 0, self.M - 1))
        return flat_index(self, i, j)


def build_grid(domain: Domain, N: int, M: int) -> Grid:
    return Grid(domain, int(N), int(M))


def flat_index(grid: Grid, i: int, j: int) -> int:
    if not (0 <= i < grid.N and 0 <= j < grid.M):
        raise IndexError(f"node ({i}, {j}) outside {grid.N}x{grid.M} grid")
    return int(i + grid.N * j)


def node_point(grid: Grid, k: int) -> tuple[float, float]:
    if not 0 <= k < grid.size:
        raise IndexError(f"flat index {k} outside grid of {grid.size} nodes")
    j, i = divmod(int(k), grid.N)
    return (grid.domain.x_lo + (i + 0.5) * grid.dx, grid.domain.y_lo + (j + 0.5) * grid.dy)


class ScalarField:
    """Complex values on the nodes of a grid; read-only after construction."""

    def __init__(self, grid: Grid, values, label: str = ""):
        values = np.array(values, dtype=complex).ravel()
        if values.shape != (grid.size,):
            raise ValueError(f"field has {values.size} values, grid has {grid.size} nodes")
        values.flags.writeable = False
        self.grid = grid
        self.values = values
        self.label = label

    def __repr__(self):
        return f"ScalarField({self.label!r}, {self.grid.N}x{self.grid.M})"

    @property
    def real(self):
        return self.values.real

    def as_array(self):
        """Values reshaped to (M, N), indexed [j, i]."""
        return self.values.reshape(self.grid.M, self.grid.N)

    def with_values(self, values, label=None):
        return ScalarField(self.grid, values, self.label if label is None else label)

    def to_csv(self, path):
        """Write `x,y,re,im` rows (j outer, i inner) at 17 significant digits."""
        X, Y = self.grid.mesh()
        data = np.column_stack([X, Y, self.values.real, self.values.imag])
        write_csv(path, "x,y,re,im", data)


def write_csv(path, header, data):
    from .io import atomic_write_text

    lines = [header]
    lines.extend(",".join(f"{v:.17g}" for v in row) for row in np.asarray(data, dtype=float))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _cell_coords(grid, px, py):
    """Lower-left node index and local coordinates of each point's cell.

    Points in the half-cell margin outside the node hull clamp to the
    nearest cell (t clipped to [0, 1]).
    """
    d = grid.domain
    fx = (np.asarray(px, dtype=float) - d.x_lo) / grid.dx - 0.5
    fy = (np.asarray(py, dtype=float) - d.y_lo) / grid.dy - 0.5
    i0 = np.clip(np.floor(fx), 0, grid.N - 2).astype(np.intp)
    j0 = np.clip(np.floor(fy), 0, grid.M - 2).astype(np.intp)
    tx = np.clip(fx - i0, 0.0, 1.0)
    ty = np.clip(fy - j0, 0.0, 1.0)
    return i0, j0, tx, ty


def interpolate_many(field: ScalarField, px, py, strict: bool = False):
    """Bilinear interpolation at arrays of points.

    With ``strict`` a point outside the domain raises; points in the
    margin between the node hull and the domain wall are clamped.
    """
    grid = field.grid
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    if strict:
        d = grid.domain
        outside = (px < d.x_lo) | (px > d.x_hi) | (py < d.y_lo) | (py > d.y_hi) | ~np.isfinite(px + py)
        if np.any(outside):
            raise ValueError("interpolation point outside the grid domain")
    i0, j0, tx, ty = _cell_coords(grid, px, py)
    v = field.as_array()
    v00 = v[j0, i0]
    v10 = v[j0, i0 + 1]
    v01 = v[j0 + 1, i0]
    v11 = v[j0 + 1, i0 + 1]
    out = (v00 * (1 - tx) * (1 - ty) + v10 * tx * (1 - ty)
           + v01 * (1 - tx) * ty + v11 * tx * ty)
    if not np.iscomplexobj(field.values) or not np.any(field.values.imag):
        return out.real
    return out


def interpolate(field: ScalarField, point) -> complex:
    """Bilinear value of ``field`` at one point inside the domain."""
    val = interpolate_many(field, np.array([point[0]]), np.array([point[1]]), strict=True)[0]
    return complex(val)
