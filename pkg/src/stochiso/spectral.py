"""Leading eigenpairs of the discretized operators and their roles.

The backward operator's spectrum is split into the trivial eigenvalue
(constant eigenfunction), the slowest complex pair mu +- i omega whose
eigenfunction carries the phase, and the slowest nontrivial real eigenvalue
whose eigenfunction is the isostable coordinate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as sla

from .errors import ClassificationError, NotOscillatoryError, NumericalError
from .grid import Grid, ScalarField
from .operator import SparseOperator

log = logging.getLogger(__name__)

DEFAULT_SHIFT = 0.05
DENSE_LIMIT = 2500
RESIDUAL_BOUND = 1e-8
CLAMP_RELATIVE = 1e-8
PAIRING_RTOL = 1e-3


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs sorted by descending real part (ties: positive imag first)."""

    eigenvalues: np.ndarray
    vectors: np.ndarray  # (n, k), column per eigenvalue
    grid: Grid
    which: str
    method: str
    shift: complex
    residuals: np.ndarray
    op_norm1: float

    def __len__(self):
        return len(self.eigenvalues)

    def field(self, index, label=None) -> ScalarField:
        return ScalarField(self.grid, self.vectors[:, index], label or f"mode{index}")

    def to_json(self):
        return [{"re": float(l.real), "im": float(l.imag), "residual": float(r)}
                for l, r in zip(self.eigenvalues, self.residuals)]


def _residuals(A, vals, vecs):
    R = A @ vecs - vecs * vals
    return np.linalg.norm(R, axis=0) / np.linalg.norm(vecs, axis=0)


def _complete_conjugates(vals, vecs, tol):
    """Append conj(v) for any complex eigenvalue whose partner is missing
    (valid because the operators are real)."""
    extra_vals, extra_vecs = [], []
    for i, lam in enumerate(vals):
        if abs(lam.imag) <= tol * max(1.0, abs(lam)):
            continue
        if not np.any(np.abs(vals - np.conj(lam)) <= 1e-7 * max(1.0, abs(lam))):
            extra_vals.append(np.conj(lam))
            extra_vecs.append(np.conj(vecs[:, i]))
    if extra_vals:
        vals = np.concatenate([vals, extra_vals])
        vecs = np.column_stack([vecs] + extra_vecs)
    return vals, vecs


def _order(vals):
    # descending real part; conjugate partners adjacent with +imag first
    keys = np.lexsort((-vals.imag, -np.round(vals.real, 10)))
    return keys


def _arnoldi(A, k, shift, ncv, maxiter):
    n = A.shape[0]
    ncv = min(n - 1, ncv)
    sigma = shift
    last = None
    for attempt in range(3):
        try:
            # fixed start vector: ARPACK's random default makes reruns differ in the last digits
            v0 = np.random.default_rng(0).standard_normal(A.shape[0])
            return sla.eigs(A, k=k, sigma=sigma, ncv=ncv, maxiter=maxiter, tol=0, v0=v0)
        except RuntimeError as exc:
            # singular factorization: shift sits on an eigenvalue
            last = exc
            sigma = shift + 1e-3 * (attempt + 1) * max(1.0, abs(shift))
            log.warning("shift-invert factorization failed (%s); retrying with shift %s", exc, sigma)
        except sla.ArpackNoConvergence as exc:
            raise NumericalError(f"Arnoldi iteration did not converge: {exc}") from None
    raise NumericalError(f"shift-invert factorization failed: {last}")


def _refine(A, vals, vecs, shift_eps=1e-10):
    """One step of inverse iteration per pair; polishes residuals that the
    Arnoldi tolerance leaves near the bound."""
    import scipy.sparse as sp

    n = A.shape[0]
    I = sp.identity(n, format="csc")
    out_vals = vals.copy()
    out_vecs = vecs.copy()
    Ac = sp.csc_matrix(A, dtype=complex)
    for i, lam in enumerate(vals):
        sigma = lam + shift_eps * max(1.0, abs(lam))
        try:
            lu = sla.splu(Ac - sigma * I)
        except RuntimeError:
            continue
        v = lu.solve(vecs[:, i].astype(complex))
        v /= np.linalg.norm(v)
        Av = A @ v
        out_vals[i] = np.vdot(v, Av)
        out_vecs[:, i] = v
    return out_vals, out_vecs


def _postprocess(A, vals, vecs):
    vals = np.asarray(vals, dtype=complex)
    vecs = np.asarray(vecs, dtype=complex)
    # exactly-real eigenvalues get exactly-real vectors
    for i, lam in enumerate(vals):
        if abs(lam.imag) <= 1e-12 * max(1.0, abs(lam)):
            v = vecs[:, i]
            v = v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
            vals[i] = lam.real
            vecs[:, i] = v.real + 0j
    vals, vecs = _complete_conjugates(vals, vecs, 1e-12)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    res = _residuals(A, vals, vecs)
    if np.any(res > RESIDUAL_BOUND):
        vals, vecs = _refine(A, vals, vecs)
        res = _residuals(A, vals, vecs)
    return vals, vecs, res


def leading_spectrum(op: SparseOperator, k: int = 12, shift: complex = DEFAULT_SHIFT,
                     method: str = "auto", maxiter: int | None = None) -> Spectrum:
    """The ``k`` eigenpairs of ``op`` nearest ``shift``.

    ``method`` is ``arnoldi`` (shift-invert ARPACK), ``dense`` (full
    diagonalization) or ``auto`` (dense when the grid has at most 2500
    nodes).
    """
    A = op.matrix
    n = A.shape[0]
    if k < 6 or k >= n - 1:
        raise ValueError(f"need 6 <= k < {n - 1}, got {k}")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "arnoldi"
    if method not in ("dense", "arnoldi"):
        raise ValueError(f"unknown eigensolver method {method!r}")
    sigma = shift
    for attempt in range(3):
        if method == "dense":
            vals, vecs = scipy.linalg.eig(A.toarray())
            idx = np.argsort(np.abs(vals - shift))[:k]
            vals, vecs = vals[idx], vecs[:, idx]
        else:
            vals, vecs = _arnoldi(A, k, sigma, max(4 * k, 40), maxiter or 100 * n)
        vals, vecs, res = _postprocess(A, vals, vecs)
        if np.all(res <= RESIDUAL_BOUND):
            break
        if method == "dense":
            break
        # a shift on top of an eigenvalue leaves a (nearly) singular
        # factorization that SuperLU does not always report
        sigma = shift + 1e-3 * (attempt + 1) * max(1.0, abs(shift))
        log.warning("eigenpair residuals too large; retrying with shift %s", sigma)
    if np.any(res > RESIDUAL_BOUND):
        bad = vals[res > RESIDUAL_BOUND]
        raise NumericalError(f"eigenpair residuals above {RESIDUAL_BOUND:g} for {bad}")
    order = _order(vals)
    return Spectrum(vals[order], vecs[:, order], op.grid, op.which, method, complex(sigma),
                    res[order], op.norm1())


def _is_real(lam, tol=1e-8):
    return abs(lam.imag) <= tol * max(1.0, abs(lam))


@dataclass(frozen=True)
class SpectralRoles:
    lambda0: complex
    lambda_plus: complex
    lambda_floq: float
    index0: int
    index_plus: int
    index_floq: int
    Q0: ScalarField = field(repr=False)
    Q_plus: ScalarField = field(repr=False)
    Q_floq: ScalarField = field(repr=False)
    quality: float
    oscillatory: bool
    cond2_ok: bool
    cond3_margin: float
    cond3_ok: bool
    checked: int
    harmonic_distance: tuple = ()

    @property
    def mu(self):
        return self.lambda_plus.real

    @property
    def omega(self):
        return self.lambda_plus.imag

    @property
    def robust(self):
        return self.oscillatory and self.cond2_ok and self.cond3_ok

    def to_json(self):
        return {"mu": self.mu, "omega": self.omega, "lambda_floq": self.lambda_floq,
                "quality": self.quality, "cond3_margin": self.cond3_margin}

    def report(self):
        """Human-readable diagnostics, including the checked subset size."""
        return (f"lambda0={self.lambda0:.3g} mu={self.mu:.6g} omega={self.omega:.6g} "
                f"lambda_floq={self.lambda_floq:.6g} quality={self.quality:.3g} "
                f"(ii) {'ok' if self.cond2_ok else 'FAILS'}, (iii) margin={self.cond3_margin:.3g} "
                f"{'ok' if self.cond3_ok else 'FAILS'} over {self.checked} computed eigenvalues")


def classify(spectrum: Spectrum, tol_zero: float | None = None,
             quality_threshold: float = 3.0, harmonics: int = 3) -> SpectralRoles:
    vals = spectrum.eigenvalues
    if tol_zero is None:
        tol_zero = 1e-6 * spectrum.op_norm1
    i0 = int(np.argmin(np.abs(vals)))
    if abs(vals[i0]) > tol_zero:
        raise ClassificationError(
            f"no trivial eigenvalue within {tol_zero:g} (smallest modulus {abs(vals[i0]):g})")
    nontrivial = [i for i in range(len(vals)) if i != i0]
    complex_idx = [i for i in nontrivial if not _is_real(vals[i]) and vals[i].imag > 0]
    real_idx = [i for i in nontrivial if _is_real(vals[i])]
    if not complex_idx:
        raise NotOscillatoryError("no complex eigenvalue pair among the computed spectrum")
    if not real_idx:
        raise ClassificationError(
            f"no nontrivial real eigenvalue among the {len(vals)} computed; increase k")
    ip = max(complex_idx, key=lambda i: vals[i].real)
    ifl = max(real_idx, key=lambda i: vals[i].real)
    lam_p = complex(vals[ip])
    lam_f = float(vals[ifl].real)
    mu, omega = lam_p.real, lam_p.imag
    quality = abs(omega / mu) if mu != 0 else np.inf
    oscillatory = bool(mu < 0 and lam_p.real >= max(vals[i].real for i in nontrivial) - 1e-12)
    others = [vals[i].real for i in nontrivial
              if i != ip and not (abs(vals[i] - np.conj(lam_p)) <= 1e-9 * max(1.0, abs(lam_p)))]
    margin = 2 * mu - max(others)
    harm = []
    for kk in range(1, harmonics + 1):
        target = 1j * omega * kk + mu * kk**2
        harm.append(float(np.min(np.abs(vals - target))))
    return SpectralRoles(
        lambda0=complex(vals[i0]), lambda_plus=lam_p, lambda_floq=lam_f,
        index0=i0, index_plus=ip, index_floq=ifl,
        Q0=spectrum.field(i0, "Q0"), Q_plus=spectrum.field(ip, "Q_plus"),
        Q_floq=spectrum.field(ifl, "Q_floq"),
        quality=float(quality), oscillatory=oscillatory,
        cond2_ok=bool(quality >= quality_threshold),
        cond3_margin=float(margin), cond3_ok=bool(margin >= -tol_zero),
        checked=len(vals), harmonic_distance=tuple(harm),
    )


def _realify(v):
    v = v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
    return v


def stationary_density(forward_spectrum: Spectrum, grid: Grid, tol_zero: float | None = None,
                       clamp_relative: float = CLAMP_RELATIVE) -> ScalarField:
    """Normalized stationary density from the forward operator's null vector.

    Negative entries no deeper than ``clamp_relative`` times the maximum are
    set to zero; anything deeper is an error.
    """
    vals = forward_spectrum.eigenvalues
    if tol_zero is None:
        tol_zero = 1e-6 * forward_spectrum.op_norm1
    i0 = int(np.argmin(np.abs(vals)))
    if abs(vals[i0]) > tol_zero:
        raise ClassificationError(f"forward spectrum has no eigenvalue within {tol_zero:g} of zero")
    v = _realify(forward_spectrum.vectors[:, i0])
    if np.max(np.abs(v.imag)) > 1e-8 * np.max(np.abs(v)):
        raise NumericalError("null vector of the forward operator is not real")
    p = v.real
    if p.sum() < 0:
        p = -p
    floor = -clamp_relative * p.max()
    if p.min() < floor:
        raise NumericalError(
            f"stationary density has negative entries down to {p.min() / p.max():.3g} of its maximum; "
            "refine the grid or raise the clamp (--p0-clamp)")
    p = np.where(p < 0, 0.0, p)
    p = p / (p.sum() * grid.cell_area)
    return ScalarField(grid, p, "P0")


def pair_modes(forward: Spectrum, backward: Spectrum, n_modes: int, rtol: float = PAIRING_RTOL):
    """Index pairs (backward, forward) matched by nearest eigenvalue."""
    pairs = []
    used = set()
    for ib in range(min(n_modes, len(backward))):
        lam = backward.eigenvalues[ib]
        d = np.abs(forward.eigenvalues - lam)
        d[list(used)] = np.inf
        jf = int(np.argmin(d))
        if d[jf] > rtol * max(1.0, abs(lam)):
            raise NumericalError(f"no forward eigenvalue within {rtol:g} of backward eigenvalue {lam:.6g}")
        used.add(jf)
        pairs.append((ib, jf))
    return pairs


def biorthogonality_check(forward: Spectrum, backward: Spectrum, grid: Grid, n_modes: int) -> np.ndarray:
    """Gram matrix <Q_a | P_b> of paired modes, each row scaled so that its
    diagonal entry is one.  The pairing is bilinear (no conjugation) because
    the backward eigenvectors already are the conjugated functions Q*."""
    pairs = pair_modes(forward, backward, n_modes)
    W = np.column_stack([backward.vectors[:, ib] for ib, _ in pairs])
    P = np.column_stack([forward.vectors[:, jf] for _, jf in pairs])
    W = W / np.linalg.norm(W, axis=0)
    P = P / np.linalg.norm(P, axis=0)
    G = (W.T @ P) * grid.cell_area
    return G / np.diag(G)[:, None]
