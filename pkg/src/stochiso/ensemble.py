"""Euler-Maruyama ensembles and the decay of mean observables.

Random numbers come from Philox keyed by (seed, step) with the counter set
to the path index, so path p at step n sees the same normals no matter how
the ensemble is chunked.  Normals are made by Box-Muller from the raw
64-bit words.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError, EvaluationError, NumericalError, StochIsoError
from .grid import Grid, ScalarField, interpolate_many, write_csv
from .model import ModelSpec, drift_arrays, noise_arrays, noise_is_constant

DEFAULT_H = 1e-3
DEFAULT_PATHS = 10_000
_U53 = 1.0 / 9007199254740992.0  # 2^-53


class NoiseFloorError(StochIsoError, ValueError):
    stage = "ensemble"


def _uniform(words):
    # top 53 bits, shifted into (0, 1]
    return ((words >> np.uint64(11)).astype(np.float64) + 1.0) * _U53


def normals(seed: int, step: int, first_path: int, n_paths: int, k: int) -> np.ndarray:
    """Standard normals of shape (n_paths, k) for one Euler step."""
    blocks = -(-k // 4)  # 4 normals per Philox block
    bg = np.random.Philox(key=np.array([seed, step], dtype=np.uint64),
                          counter=np.array([first_path * blocks, 0, 0, 0], dtype=np.uint64))
    w = bg.random_raw(4 * blocks * n_paths).reshape(n_paths, blocks, 2, 2)
    u1, u2 = _uniform(w[..., 0]), _uniform(w[..., 1])
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.stack([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)], axis=-1)
    return z.reshape(n_paths, 4 * blocks)[:, :k]


def _fold(v, lo, hi):
    L = hi - lo
    u = np.mod(v - lo, 2 * L)
    return lo + np.where(u > L, 2 * L - u, u)


@dataclass
class Snapshot:
    step: int
    t: float
    X: np.ndarray       # (K, 2)
    alive: np.ndarray   # paths never blown up
    clamped: np.ndarray  # paths that touched a truncated wall


@dataclass
class PathStream:
    """Lazily simulated ensemble; each iteration reruns the simulation from
    scratch and yields a snapshot every ``record_every`` steps, plus the
    first and the last step."""

    spec: ModelSpec
    x0: np.ndarray
    h: float
    t_max: float
    K: int
    seed: int
    record_every: int = 1
    counts: dict = dc_field(default_factory=dict)

    @property
    def n_steps(self):
        return int(round(self.t_max / self.h))

    def __iter__(self):
        spec, h = self.spec, self.h
        d = spec.domain
        X = np.array(np.broadcast_to(self.x0, (self.K, 2)), dtype=float)
        alive = np.ones(self.K, dtype=bool)
        clamped = np.zeros(self.K, dtype=bool)
        sqh = np.sqrt(h)
        k = spec.noise_dim
        g_const = None
        if noise_is_constant(spec):
            g_const = noise_arrays(spec, np.float64(d.center[0]), np.float64(d.center[1]))
        yield Snapshot(0, 0.0, X.copy(), alive.copy(), clamped.copy())
        for n in range(self.n_steps):
            xi = normals(self.seed, n, 0, self.K, k)
            f1, f2, g = _coefficients(spec, X, alive, g_const is None)
            if g_const is not None:
                dW = (xi @ g_const.T) * sqh
            else:
                dW = np.einsum("pij,pj->pi", g, xi) * sqh
            X = X + np.column_stack([f1, f2]) * h + dW
            bad = alive & ~np.all(np.isfinite(X), axis=1)
            alive &= ~bad
            X[~alive] = np.nan
            if spec.boundary == "reflecting":
                X[:, 0] = _fold(X[:, 0], d.x_lo, d.x_hi)
                X[:, 1] = _fold(X[:, 1], d.y_lo, d.y_hi)
            else:
                Xc = np.column_stack([np.clip(X[:, 0], d.x_lo, d.x_hi), np.clip(X[:, 1], d.y_lo, d.y_hi)])
                clamped |= alive & np.any(Xc != X, axis=1)
                X = np.where(alive[:, None], Xc, np.nan)
            if (n + 1) % self.record_every == 0 or n + 1 == self.n_steps:
                yield Snapshot(n + 1, (n + 1) * h, X.copy(), alive.copy(), clamped.copy())
        self.counts = {"excluded": int((~alive).sum()), "clamped": int(clamped.sum())}


def _coefficients(spec, X, alive, want_noise=True):
    f1 = np.zeros(len(X))
    f2 = np.zeros(len(X))
    g = np.zeros((len(X), 2, spec.noise_dim)) if want_noise else None
    idx = np.nonzero(alive)[0]
    try:
        a, b = drift_arrays(spec, X[idx, 0], X[idx, 1])
        f1[idx], f2[idx] = a, b
        if want_noise:
            g[idx] = noise_arrays(spec, X[idx, 0], X[idx, 1])
    except EvaluationError:
        # find the offending paths one by one; they get a NaN step
        for p in idx:
            try:
                a, b = drift_arrays(spec, X[p:p + 1, 0], X[p:p + 1, 1])
                f1[p], f2[p] = a[0], b[0]
                if want_noise:
                    g[p] = noise_arrays(spec, X[p:p + 1, 0], X[p:p + 1, 1])[0]
            except EvaluationError:
                f1[p] = np.nan
    return f1, f2, g


def simulate_paths(spec: ModelSpec, x0, h: float = DEFAULT_H, t_max: float = 10.0,
                   K: int = DEFAULT_PATHS, seed: int = 0, record_every: int = 1) -> PathStream:
    if not h > 0:
        raise ConfigError(f"step h must be positive, got {h}")
    if not t_max >= 10 * h:
        raise ConfigError(f"t_max={t_max} must be at least 10 steps of h={h}")
    if K < 1:
        raise ConfigError("need at least one path")
    if record_every < 1:
        raise ConfigError("record_every must be >= 1")
    x0 = np.asarray(x0, dtype=float)
    pts = x0.reshape(-1, 2)
    if pts.shape[0] not in (1, K):
        raise ConfigError(f"x0 must be one point or {K} points")
    if not all(spec.domain.contains(p) for p in pts):
        raise ConfigError(f"initial point(s) outside the domain {spec.domain}")
    return PathStream(spec, x0 if x0.ndim == 2 else x0.reshape(2), float(h), float(t_max),
                      int(K), int(seed), int(record_every))


@dataclass(frozen=True)
class EnsembleStats:
    t: np.ndarray
    mean: np.ndarray      # complex
    n_paths: np.ndarray
    K: int
    seed: int
    model: str
    excluded: int = 0

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("time stamps must increase strictly")

    def to_csv(self, path):
        write_csv(path, "t,re_mean,im_mean,n_paths",
                  np.column_stack([self.t, self.mean.real, self.mean.imag, self.n_paths]))


def mean_observable_decay(paths: PathStream, field: ScalarField, grid: Grid | None = None) -> EnsembleStats:
    """Ensemble mean of field(X(t)) / field(X(0)) over the surviving paths."""
    if grid is not None and grid is not field.grid and grid != field.grid:
        raise ValueError("field lives on a different grid")
    scale = np.max(np.abs(field.values))
    ts, means, counts = [], [], []
    base = None
    for snap in paths:
        v = interpolate_many(field, np.nan_to_num(snap.X[:, 0]), np.nan_to_num(snap.X[:, 1])) + 0j
        if base is None:
            if np.any(np.abs(v) <= 1e-6 * scale):
                raise NumericalError(f"observable {field.label!r} vanishes at the initial point; ratio undefined")
            base = v
            ratio = np.ones(len(v), dtype=complex)  # exact, not v / v
        else:
            ratio = v / base
        ok = snap.alive
        ts.append(snap.t)
        counts.append(int(ok.sum()))
        means.append(np.mean(ratio[ok]) if ok.any() else np.nan)
    return EnsembleStats(np.array(ts), np.array(means, dtype=complex), np.array(counts),
                         paths.K, paths.seed, paths.spec.name, paths.counts.get("excluded", 0))


def _window(stats, t_lo, t_hi):
    sel = (stats.t >= t_lo) & (stats.t <= t_hi)
    if sel.sum() < 10:
        raise ConfigError(f"window [{t_lo}, {t_hi}] holds {int(sel.sum())} samples; need 10")
    return stats.t[sel], stats.mean[sel]


def _linfit(t, y):
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    dof = max(len(t) - 2, 1)
    s2 = float(r @ r) / dof
    var = s2 / float(np.sum((t - t.mean()) ** 2))
    return float(coef[0]), float(np.sqrt(var))


def fit_decay_rate(stats: EnsembleStats, t_lo: float, t_hi: float) -> tuple[float, float]:
    """Least-squares slope of ln(mean ratio) on [t_lo, t_hi] and its standard error."""
    t, m = _window(stats, t_lo, t_hi)
    y = m.real
    if np.any(~(y > 0)):
        raise NoiseFloorError("mean ratio is not positive throughout the window; shrink it")
    return _linfit(t, np.log(y))


def fit_complex_decay(stats: EnsembleStats, t_lo: float, t_hi: float):
    """Decay rate of |mean| and rotation rate of arg(mean), each with a standard error."""
    t, m = _window(stats, t_lo, t_hi)
    if np.any(np.abs(m) == 0) or not np.all(np.isfinite(m)):
        raise NoiseFloorError("mean vanishes inside the window")
    mu, mu_err = _linfit(t, np.log(np.abs(m)))
    omega, omega_err = _linfit(t, np.unwrap(np.angle(m)))
    return mu, mu_err, omega, omega_err


def fit_report(rate, stderr, window, lambda_ref):
    rel = abs(rate - lambda_ref) / abs(lambda_ref) if lambda_ref else float("nan")
    return {"rate": rate, "stderr": stderr, "window": list(window), "lambda_ref": lambda_ref, "rel_error": rel}


def histogram_tv(X, P0: ScalarField, bins: int = 51) -> float:
    """Total variation distance between the empirical distribution of the
    points and P0 integrated over a bins x bins partition of the domain."""
    grid = P0.grid
    d = grid.domain
    X = X[np.all(np.isfinite(X), axis=1)]
    ex = np.linspace(d.x_lo, d.x_hi, bins + 1)
    ey = np.linspace(d.y_lo, d.y_hi, bins + 1)
    H, _, _ = np.histogram2d(X[:, 0], X[:, 1], bins=[ex, ey])
    H = H / H.sum()
    # P0 mass per bin from the node masses
    Xn, Yn = grid.mesh()
    w = P0.values.real * grid.cell_area
    Pm, _, _ = np.histogram2d(Xn, Yn, bins=[ex, ey], weights=w)
    Pm = Pm / Pm.sum()
    return 0.5 * float(np.abs(H - Pm).sum())
