"""End-to-end analysis of one model: spectra, roles, density, phase,
isostable, zero isostable, isochrons and effective field."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .effective_field import VectorField, effective_vector_field
from .fields import isochron, isostable_field, phase_field, zero_level_set
from .grid import Grid, ScalarField, build_grid
from .model import ModelSpec, builtin_model
from .operator import assemble_backward, assemble_forward
from .spectral import (CLAMP_RELATIVE, DEFAULT_SHIFT, SpectralRoles, Spectrum, classify,
                       leading_spectrum, stationary_density)

# (label, builtin, overrides, (mu, omega, lambda_floq)) published for the
# five reference oscillators at 151 x 151
REFERENCE_ROWS = (
    ("Sp. Sink", "spiral-sink", {}, (-0.080, 0.564, -0.159)),
    ("SL-iso", "stuart-landau", {}, (-0.213, 3.032, -2.833)),
    ("SL-ani", "stuart-landau", {"Dy": 2.5e-4}, (-0.108, 3.008, -3.117)),
    ("Het-low", "heteroclinic", {"D": 0.01125}, (-0.044, 0.383, -0.332)),
    ("Het-high", "heteroclinic", {"D": 0.1}, (-0.136, 0.505, -0.553)),
)


@dataclass
class Analysis:
    spec: ModelSpec
    grid: Grid
    backward: Spectrum
    roles: SpectralRoles
    P0: ScalarField | None = None   # only computed together with the fields
    phase_ref: tuple | None = None
    psi: ScalarField | None = None
    Sigma: ScalarField | None = None
    sigma0: list = field(default_factory=list)
    isochrons: dict = field(default_factory=dict)
    F: VectorField | None = None


def spectral_roles(spec: ModelSpec, grid: Grid, k: int = 12, shift=DEFAULT_SHIFT, method="auto"):
    backward = leading_spectrum(assemble_backward(spec, grid), k=k, shift=shift, method=method)
    return backward, classify(backward)


def density(spec: ModelSpec, grid: Grid, clamp_relative=CLAMP_RELATIVE, shift=DEFAULT_SHIFT,
            method="auto") -> ScalarField:
    # zero-flux walls: mass-conserving and positivity-friendly on every boundary type
    fwd = leading_spectrum(assemble_forward(spec, grid, zero_flux=True), k=6, shift=shift, method=method)
    return stationary_density(fwd, grid, clamp_relative=clamp_relative)


def border_mass(P0: ScalarField, cells: int = 1) -> float:
    """Probability mass on the outermost ``cells`` rings of nodes; a large
    value means a truncated domain is too small."""
    a = P0.as_array().real
    inner = a[cells:-cells, cells:-cells].sum() if min(a.shape) > 2 * cells else 0.0
    return float((a.sum() - inner) * P0.grid.cell_area)


def default_phase_ref(P0: ScalarField):
    """Midpoint between the density mode and the right edge of the domain."""
    grid = P0.grid
    X, Y = grid.mesh()
    k = int(np.argmax(P0.values.real))
    return 0.5 * (X[k] + grid.domain.x_hi), float(Y[k])


def default_x0(Sigma: ScalarField, Q_plus: ScalarField, P0: ScalarField):
    """Node where both observables are far from zero, among the nodes whose
    density is not negligible."""
    X, Y = Sigma.grid.mesh()
    p = P0.values.real
    s = np.abs(Sigma.values) / np.max(np.abs(Sigma.values))
    q = np.abs(Q_plus.values) / np.max(np.abs(Q_plus.values))
    score = np.where(p >= 1e-3 * p.max(), np.minimum(s, q), -1.0)
    # symmetric models give mirror-image ties; rounding lets argmax pick the first one every time
    k = int(np.argmax(np.round(score, 8)))
    return float(X[k]), float(Y[k])


def isochron_values(n: int):
    return [2 * math.pi * j / n for j in range(n)]


def analyze(spec: ModelSpec, grid: Grid, k: int = 12, phase_ref=None, n_isochrons: int = 8,
            clamp_relative=CLAMP_RELATIVE, fields: bool = True, effective: bool = True,
            method="auto") -> Analysis:
    backward, roles = spectral_roles(spec, grid, k=k, method=method)
    if not fields:
        return Analysis(spec, grid, backward, roles)
    P0 = density(spec, grid, clamp_relative=clamp_relative, method=method)
    ref = tuple(phase_ref) if phase_ref is not None else default_phase_ref(P0)
    out = Analysis(spec, grid, backward, roles, P0, ref)
    out.psi = phase_field(roles.Q_plus, ref)
    out.Sigma = isostable_field(roles.Q_floq, P0, grid)
    out.sigma0 = zero_level_set(out.Sigma, grid)
    out.isochrons = {v: isochron(out.psi, grid, v) for v in isochron_values(n_isochrons)}
    if effective:
        out.F = effective_vector_field(roles.Q_plus, out.Sigma, roles.lambda_plus, roles.lambda_floq, grid)
    return out


@dataclass(frozen=True)
class TableRow:
    label: str
    computed: tuple
    reference: tuple

    @property
    def abs_diff(self):
        return tuple(abs(c - r) for c, r in zip(self.computed, self.reference))

    @property
    def rel_diff(self):
        return tuple(abs(c - r) / abs(r) for c, r in zip(self.computed, self.reference))

    def within(self, abs_tol=0.01, rel_tol=0.05):
        return all(a <= max(abs_tol, rel_tol * abs(r)) for a, r in zip(self.abs_diff, self.reference))

    def to_json(self):
        keys = ("mu", "omega", "lambda_floq")
        return {"label": self.label,
                "computed": dict(zip(keys, self.computed)),
                "reference": dict(zip(keys, self.reference)),
                "abs_diff": dict(zip(keys, self.abs_diff)),
                "rel_diff": dict(zip(keys, self.rel_diff))}


def table_row(label, name, overrides, reference, n, k=12, method="auto") -> TableRow:
    spec = builtin_model(name, overrides)
    _, roles = spectral_roles(spec, build_grid(spec.domain, n, n), k=k, method=method)
    return TableRow(label, (roles.mu, roles.omega, roles.lambda_floq), reference)
