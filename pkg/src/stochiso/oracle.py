"""Closed-form reference quantities for the planar Ornstein-Uhlenbeck
process dX = A X dt + B dW with A = [[mu, -omega], [omega, mu]].

For that process

    Q_plus(x) = x1 + i x2,                 eigenvalue mu + i omega
    Sigma(x)  = 2 + (mu / eps) |x|^2,      eigenvalue 2 mu
    eps       = (B11^2 + B12^2 + B21^2 + B22^2) / 4

and the zero isostable is the circle |x|^2 = 2 eps / |mu|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .model import Domain, ModelSpec, make_model


@dataclass(frozen=True)
class OuCanonical:
    mu: float
    omega: float
    B: tuple = ((0.0, 0.0), (0.0, 0.0))

    def __post_init__(self):
        if not self.mu < 0:
            raise ConfigError(f"canonical OU needs mu < 0, got {self.mu}")
        if not self.omega > 0:
            raise ConfigError(f"canonical OU needs omega > 0, got {self.omega}")
        object.__setattr__(self, "B", tuple(tuple(float(v) for v in row) for row in self.B))

    @classmethod
    def isotropic(cls, mu, omega, D):
        s = math.sqrt(2 * D)
        return cls(mu, omega, ((s, 0.0), (0.0, s)))

    @property
    def eps(self):
        return sum(v * v for row in self.B for v in row) / 4.0

    @property
    def A(self):
        return np.array([[self.mu, -self.omega], [self.omega, self.mu]])

    def to_model(self, domain: Domain, boundary="truncated", name="ou-canonical") -> ModelSpec:
        (b11, b12), (b21, b22) = self.B
        return make_model(
            name,
            ["mu*x - omega*y", "omega*x + mu*y"],
            [["b11", "b12"], ["b21", "b22"]],
            {"mu": self.mu, "omega": self.omega, "b11": b11, "b12": b12, "b21": b21, "b22": b22},
            domain, boundary,
        )


@dataclass(frozen=True)
class OuEigendata:
    Q_plus: Callable
    Sigma: Callable
    lambda_pm: complex
    lambda_floq: float


def ou_eigendata(p: OuCanonical) -> OuEigendata:
    ratio = p.mu / p.eps if p.eps > 0 else -math.inf

    def Q_plus(x, y):
        return np.asarray(x) + 1j * np.asarray(y)

    def Sigma(x, y):
        return 2.0 + ratio * (np.asarray(x) ** 2 + np.asarray(y) ** 2)

    return OuEigendata(Q_plus, Sigma, complex(p.mu, p.omega), 2.0 * p.mu)


def ou_effective_field(point, p: OuCanonical):
    x1, x2 = point
    r2 = x1 * x1 + x2 * x2
    if r2 == 0:
        raise ZeroDivisionError("effective field is singular at the origin")
    e = p.eps
    F1 = p.mu * x1 - p.omega * x2 + 2 * e * (x1 - 1j * x2) / r2
    F2 = p.omega * x1 + p.mu * x2 + 2 * e * (x2 + 1j * x1) / r2
    return complex(F1), complex(F2)


def ou_sigma0_radius(p: OuCanonical) -> float:
    return math.sqrt(2 * p.eps / abs(p.mu))


def canonicalize(A, B):
    """Similarity transform of a linear focus to canonical coordinates.

    Returns ``(canon, T)`` with ``A T = T C`` (C canonical) so that
    z = T^-1 x obeys the canonical OU with noise matrix T^-1 B.  T is built
    from the eigenvector of mu + i omega scaled to unit norm.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    w, V = np.linalg.eig(A)
    if np.all(np.abs(w.imag) == 0):
        raise ConfigError("matrix has real eigenvalues; not a focus")
    k = int(np.argmax(w.imag))
    v = V[:, k] / np.linalg.norm(V[:, k])
    T = np.column_stack([v.real, -v.imag])
    Bc = np.linalg.solve(T, B)
    return OuCanonical(float(w[k].real), float(w[k].imag), tuple(map(tuple, Bc))), T


def linear_eigendata(A, B) -> OuEigendata:
    """Closed-form Q_plus and Sigma of a general linear focus, in the
    original coordinates (pulled back through ``canonicalize``)."""
    canon, T = canonicalize(A, B)
    Tinv = np.linalg.inv(T)
    base = ou_eigendata(canon)

    def pull(f):
        def g(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            return f(Tinv[0, 0] * x + Tinv[0, 1] * y, Tinv[1, 0] * x + Tinv[1, 1] * y)
        return g

    return OuEigendata(pull(base.Q_plus), pull(base.Sigma), base.lambda_pm, base.lambda_floq)


def generator_fd(drift, diffusion, u, point, h=1e-5):
    """Continuum backward operator f.grad(u) + D:hess(u) at a point, with
    central finite differences of spacing ``h`` (independent of any grid)."""
    x, y = point
    f = np.asarray(drift(x, y))
    D = np.asarray(diffusion(x, y))
    ux = (u(x + h, y) - u(x - h, y)) / (2 * h)
    uy = (u(x, y + h) - u(x, y - h)) / (2 * h)
    c = u(x, y)
    uxx = (u(x + h, y) - 2 * c + u(x - h, y)) / h**2
    uyy = (u(x, y + h) - 2 * c + u(x, y - h)) / h**2
    uxy = (u(x + h, y + h) - u(x + h, y - h) - u(x - h, y + h) + u(x - h, y - h)) / (4 * h * h)
    return (f[0] * ux + f[1] * uy + D[0, 0] * uxx + (D[0, 1] + D[1, 0]) * uxy + D[1, 1] * uyy)
