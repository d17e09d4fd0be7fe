"""Phase and isostable fields from eigenfunctions, and their level curves."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, StochIsoError
from .grid import Grid, ScalarField, interpolate_many, write_csv


class NoCrossingError(StochIsoError, ValueError):
    stage = "fields"


@dataclass(frozen=True)
class Contour:
    vertices: np.ndarray  # (n, 2)
    closed: bool
    level: float
    label: str = ""

    def __len__(self):
        return len(self.vertices)

    @property
    def area(self):
        """Absolute shoelace area (open contours are closed by their chord)."""
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def mean_radius(self, center=(0.0, 0.0)):
        pts = self.vertices[:-1] if self.closed else self.vertices
        return float(np.mean(np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])))

    def to_csv(self, path):
        write_csv(path, "x,y", self.vertices)


def _reference_node(grid, point):
    return grid.nearest_node(point)


def phase_field(Q_plus: ScalarField, reference_point) -> ScalarField:
    """psi = arg(Q_plus) in (-pi, pi], rotated so psi = 0 at the grid node
    nearest ``reference_point``."""
    q = Q_plus.values
    k = _reference_node(Q_plus.grid, reference_point)
    scale = np.max(np.abs(q))
    if abs(q[k]) < 1e-12 * scale:
        raise NumericalError(f"phase undefined at reference point {reference_point}: |Q| vanishes there")
    psi = np.angle(q) - np.angle(q[k])
    psi = np.where(psi > np.pi, psi - 2 * np.pi, psi)
    psi = np.where(psi <= -np.pi, psi + 2 * np.pi, psi)
    return ScalarField(Q_plus.grid, psi, "psi")


def phase_at(psi: ScalarField, px, py):
    """Phase at off-grid points, interpolating exp(i psi) to avoid the cut."""
    z = ScalarField(psi.grid, np.exp(1j * psi.values.real))
    return np.angle(interpolate_many(z, px, py) + 0j)


def _rotate_real(v):
    return v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))


def isostable_field(Q_floq: ScalarField, P0: ScalarField, grid: Grid) -> ScalarField:
    """Real isostable function with unit discrete L2 norm, positive where
    the stationary density peaks."""
    v = _rotate_real(Q_floq.values)
    amp = np.max(np.abs(v))
    if np.max(np.abs(v.imag)) > 1e-8 * amp:
        raise NumericalError("isostable eigenfunction is not real")
    s = v.real / np.sqrt(np.sum(v.real**2) * grid.cell_area)
    p = P0.values.real
    k = int(np.argmax(p))
    ref = s[k]
    if abs(ref) < 1e-10 * np.max(np.abs(s)):
        X, Y = grid.mesh()
        w = p / p.sum()
        cx, cy = float(w @ X), float(w @ Y)
        ref = interpolate_many(ScalarField(grid, s), np.array([cx]), np.array([cy]))[0]
    if ref < 0:
        s = -s
    return ScalarField(grid, s, "Sigma")


def gradient(field: ScalarField, grid: Grid):
    """Centered differences inside, second-order one-sided at the borders."""
    a = field.as_array()
    gy, gx = np.gradient(a, grid.dy, grid.dx, edge_order=2)
    return (ScalarField(grid, gx.ravel(), f"d{field.label}/dx"),
            ScalarField(grid, gy.ravel(), f"d{field.label}/dy"))


# Marching squares -------------------------------------------------------

def _edge_point(key, v, x, y, level):
    kind, i, j = key
    if kind == "h":
        a, b = v[j, i], v[j, i + 1]
        t = (level - a) / (b - a)
        return (x[i] + t * (x[i + 1] - x[i]), y[j])
    a, b = v[j, i], v[j + 1, i]
    t = (level - a) / (b - a)
    return (x[i], y[j] + t * (y[j + 1] - y[j]))


def _cell_segments(v, level, cell_mask):
    above = v > level
    corners = above[:-1, :-1].astype(int) + above[:-1, 1:] + above[1:, 1:] + above[1:, :-1]
    active = (corners > 0) & (corners < 4)
    if cell_mask is not None:
        active &= cell_mask
    segments = []
    for j, i in zip(*np.nonzero(active)):
        b0, b1, b2, b3 = above[j, i], above[j, i + 1], above[j + 1, i + 1], above[j + 1, i]
        bottom, right, top, left = ("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j)
        crossing = [e for e, c in ((bottom, b0 != b1), (right, b1 != b2),
                                   (top, b2 != b3), (left, b3 != b0)) if c]
        if len(crossing) == 2:
            segments.append(tuple(crossing))
            continue
        center = 0.25 * (v[j, i] + v[j, i + 1] + v[j + 1, i + 1] + v[j + 1, i])
        if (center > level) == b0:
            # corners 0 and 2 connect through the center
            segments.append((bottom, right))
            segments.append((top, left))
        else:
            segments.append((left, bottom))
            segments.append((right, top))
    return segments


def _link(segments):
    incident = defaultdict(list)
    for s, (a, b) in enumerate(segments):
        incident[a].append(s)
        incident[b].append(s)
    used = np.zeros(len(segments), dtype=bool)

    def walk(edge, s):
        chain = [edge]
        while True:
            used[s] = True
            a, b = segments[s]
            edge = b if a == edge else a
            chain.append(edge)
            nxt = [t for t in incident[edge] if not used[t]]
            if not nxt:
                return chain
            s = nxt[0]

    chains = []
    # open chains start at edges touched by a single segment
    for edge, segs in incident.items():
        if len(segs) == 1 and not used[segs[0]]:
            chains.append((walk(edge, segs[0]), False))
    for s in range(len(segments)):
        if not used[s]:
            chain = walk(segments[s][0], s)
            chains.append((chain, chain[0] == chain[-1]))
    return chains


def contours(field: ScalarField, grid: Grid, level: float = 0.0, cell_mask=None,
             label: str | None = None) -> list[Contour]:
    """All level curves of a real field; empty list when there is none."""
    v = np.asarray(field.as_array().real, dtype=float)
    x, y = grid.x, grid.y
    out = []
    for chain, closed in _link(_cell_segments(v, level, cell_mask)):
        pts = np.array([_edge_point(e, v, x, y, level) for e in chain])
        out.append(Contour(pts, closed, float(level), label if label is not None else field.label))
    return out


def zero_level_set(field: ScalarField, grid: Grid) -> list[Contour]:
    """Zero contours, largest-area (principal) first; closed ones preferred."""
    v = field.values.real
    if not (np.any(v > 0) and np.any(v < 0)):
        raise NoCrossingError(f"field {field.label!r} has no zero crossing")
    found = contours(field, grid, 0.0)
    if not found:
        raise NoCrossingError(f"field {field.label!r} has no zero crossing")
    found.sort(key=lambda c: (not c.closed, -c.area))
    return found


def principal_contour(found: list[Contour]) -> Contour:
    closed = [c for c in found if c.closed]
    return max(closed or found, key=lambda c: c.area)


def isochron(psi: ScalarField, grid: Grid, value: float) -> list[Contour]:
    """Level curves psi = value, traced as zeros of sin(psi - value) on
    cells where cos(psi - value) > 0 at every corner (this keeps away from
    the opposite ray and the branch cut)."""
    d = psi.values.real - value
    s = ScalarField(grid, np.sin(d), f"isochron({value:.6g})")
    c = np.cos(d).reshape(grid.M, grid.N)
    mask = (c[:-1, :-1] > 0) & (c[:-1, 1:] > 0) & (c[1:, :-1] > 0) & (c[1:, 1:] > 0)
    return contours(s, grid, 0.0, cell_mask=mask)


def winding_number(psi: ScalarField, contour: Contour) -> float:
    """Total wrapped phase increment along a contour, in turns."""
    ph = phase_at(psi, contour.vertices[:, 0], contour.vertices[:, 1])
    inc = np.angle(np.exp(1j * np.diff(ph)))
    return float(inc.sum() / (2 * np.pi))
