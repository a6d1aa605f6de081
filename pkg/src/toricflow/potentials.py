"""Strictly convex flow potentials on the dual Lie algebra t* ~ R^n.

The deformation machinery is driven by one strictly convex function
phi: t* -> R with analytic gradient and Hessian.  This module keeps a small
registry of closed-form families (quadratics, quadratics with exponential
perturbations, log-sum-exp, user-registered callables) and the derived
objects built from phi:

  * the concentration rate  f_lam(x) = (x - lam) . grad phi(x) - phi(x),
    whose unique minimum over the polytope sits at x = lam and drives the
    exponential localization of flowed sections onto the fiber over lam;
  * Legendre-transform utilities (forward dual and a damped-Newton inverse
    gradient lookup) used by the potential-duality checks.

All evaluations are numpy-vectorized: `x` may be a single point of shape
(n,) or a batch of shape (m, n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatch, DomainError, NewtonError
from .polytopes import DelzantPolytope


class ConvexPotential:
    """Interface: value/grad/hess, batched over a leading axis."""

    dimension: int

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def hess(self, x) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        return type(self).__name__

    def _coerce(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise DimensionMismatch(
                f"point dimension {x.shape[-1]} != potential dimension {self.dimension}"
            )
        return x


class QuadraticPotential(ConvexPotential):
    """phi(x) = x.Q x / 2 + b.x + c with symmetric positive definite Q."""

    def __init__(self, Q, b=None, c: float = 0.0):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        self.Q = Q
        self.dimension = Q.shape[0]
        self.b = np.zeros(self.dimension) if b is None else np.asarray(b, dtype=float)
        if self.b.shape != (self.dimension,):
            raise DimensionMismatch("b has the wrong shape")
        self.c = float(c)

    def value(self, x):
        x = self._coerce(x)
        quad = 0.5 * np.einsum("...i,ij,...j->...", x, self.Q, x)
        return quad + x @ self.b + self.c

    def grad(self, x):
        x = self._coerce(x)
        return x @ self.Q + self.b

    def hess(self, x):
        x = self._coerce(x)
        return np.broadcast_to(self.Q, x.shape[:-1] + self.Q.shape).copy()

    def describe(self):
        return f"quadratic(Q={self.Q.tolist()}, b={self.b.tolist()}, c={self.c})"


@dataclass(frozen=True)
class ExponentialTerm:
    """a * exp(k . x); convex for a >= 0."""

    coefficient: float
    wavevector: tuple[float, ...]


class PerturbedQuadratic(ConvexPotential):
    """Quadratic plus exponential terms, e.g. x^2/2 + 0.1 e^x."""

    def __init__(self, base: QuadraticPotential, terms: Sequence[ExponentialTerm]):
        self.base = base
        self.terms = tuple(terms)
        self.dimension = base.dimension
        for t in self.terms:
            if len(t.wavevector) != self.dimension:
                raise DimensionMismatch("perturbation wavevector has wrong dimension")

    def value(self, x):
        x = self._coerce(x)
        out = self.base.value(x)
        for t in self.terms:
            out = out + t.coefficient * np.exp(x @ np.asarray(t.wavevector))
        return out

    def grad(self, x):
        x = self._coerce(x)
        out = self.base.grad(x)
        for t in self.terms:
            k = np.asarray(t.wavevector)
            out = out + (t.coefficient * np.exp(x @ k))[..., None] * k
        return out

    def hess(self, x):
        x = self._coerce(x)
        out = self.base.hess(x)
        for t in self.terms:
            k = np.asarray(t.wavevector)
            out = out + (t.coefficient * np.exp(x @ k))[..., None, None] * np.outer(k, k)
        return out

    def describe(self):
        return (
            self.base.describe()
            + " + "
            + " + ".join(f"{t.coefficient}*exp({list(t.wavevector)}.x)" for t in self.terms)
        )


class LogSumExpPotential(ConvexPotential):
    """phi(x) = log sum_i w_i exp(k_i . x); strictly convex when the k_i do
    not lie in a common affine hyperplane."""

    def __init__(self, wavevectors, weights=None):
        K = np.atleast_2d(np.asarray(wavevectors, dtype=float))
        self.K = K
        self.dimension = K.shape[1]
        w = np.ones(K.shape[0]) if weights is None else np.asarray(weights, dtype=float)
        if (w <= 0).any():
            raise ValueError("weights must be positive")
        self.weights = w

    def _log_terms(self, x):
        return x @ self.K.T + np.log(self.weights)

    def value(self, x):
        x = self._coerce(x)
        return logsumexp(self._log_terms(x), axis=-1)

    def grad(self, x):
        x = self._coerce(x)
        lt = self._log_terms(x)
        p = np.exp(lt - logsumexp(lt, axis=-1, keepdims=True))
        return p @ self.K

    def hess(self, x):
        x = self._coerce(x)
        lt = self._log_terms(x)
        p = np.exp(lt - logsumexp(lt, axis=-1, keepdims=True))
        mean = p @ self.K
        second = np.einsum("...k,ki,kj->...ij", p, self.K, self.K)
        return second - mean[..., :, None] * mean[..., None, :]

    def describe(self):
        return f"log-sum-exp({self.K.tolist()}, w={self.weights.tolist()})"


class CallablePotential(ConvexPotential):
    """User-registered closed form with analytic gradient and Hessian."""

    def __init__(self, dimension: int, value_fn, grad_fn, hess_fn, label: str = "custom"):
        self.dimension = dimension
        self._value, self._grad, self._hess = value_fn, grad_fn, hess_fn
        self.label = label

    def value(self, x):
        return self._value(self._coerce(x))

    def grad(self, x):
        return self._grad(self._coerce(x))

    def hess(self, x):
        return self._hess(self._coerce(x))

    def describe(self):
        return self.label


class ReflectedPotential(ConvexPotential):
    """phi'(x) = phi(center - x).  Convexity and Hessians are preserved;
    used to express the second torus-invariant chart of a segment model."""

    def __init__(self, base, center):
        self.base = base
        self.center = np.asarray(center, dtype=float)
        self.dimension = len(self.center)

    def value(self, x):
        return self.base.value(self.center - self._coerce(x))

    def grad(self, x):
        return -self.base.grad(self.center - self._coerce(x))

    def hess(self, x):
        return self.base.hess(self.center - self._coerce(x))

    def describe(self):
        return f"reflected({self.base.describe()}, center={self.center.tolist()})"


def make_potential(kind: str, **params) -> ConvexPotential:
    """Factory used by the config layer.

    kinds: "quadratic" (Q, b, c, perturbations), "log-sum-exp"
    (wavevectors, weights).
    """
    if kind == "quadratic":
        base = QuadraticPotential(params["Q"], params.get("b"), params.get("c", 0.0))
        terms = [ExponentialTerm(a, tuple(k)) for a, k in params.get("perturbations", [])]
        return PerturbedQuadratic(base, terms) if terms else base
    if kind == "log-sum-exp":
        return LogSumExpPotential(params["wavevectors"], params.get("weights"))
    raise ValueError(f"unknown potential kind {kind!r}")


# -- concentration rate f_lam ---------------------------------------------------


def concentration_rate(phi: ConvexPotential, lam, x) -> np.ndarray:
    """f_lam(x) = (x - lam) . grad phi(x) - phi(x).

    Strict convexity of phi makes lam the unique minimizer over any convex
    domain containing it, with minimum value -phi(lam).
    """
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.einsum("...i,...i->...", x - lam, phi.grad(x)) - phi.value(x)


def concentration_rate_grad(phi: ConvexPotential, lam, x) -> np.ndarray:
    """grad f_lam(x) = Hess phi(x) . (x - lam)."""
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.einsum("...ij,...j->...i", phi.hess(x), x - lam)


@dataclass(frozen=True)
class ConcentrationFunctional:
    """f_lam bundled with its potential and center."""

    base: ConvexPotential
    center: tuple[float, ...]

    def value(self, x):
        return concentration_rate(self.base, self.center, x)

    def grad(self, x):
        return concentration_rate_grad(self.base, self.center, x)

    def hess_at_center(self) -> np.ndarray:
        return self.base.hess(np.asarray(self.center, dtype=float))


class MinimumCheck(NamedTuple):
    ok: bool
    argmin: tuple[float, ...]
    distance_to_center: float
    cell_size: float
    hessian_min_eigenvalue: float
    message: str


def f_lambda_min_check(
    phi: ConvexPotential, lam, poly: DelzantPolytope, resolution: int = 256
) -> MinimumCheck:
    """Grid search confirming that f_lam attains its minimum next to lam and
    that Hess f_lam(lam) = Hess phi(lam) is positive definite."""
    lam = np.asarray(lam, dtype=float)
    if not poly.is_interior(lam):
        raise DomainError(f"center {lam.tolist()} is not interior to {poly.name}")
    pts = np.array([c.point for c in poly.grid_cells(resolution)])
    vals = concentration_rate(phi, lam, pts)
    argmin = pts[int(np.argmin(vals))]
    h = 1.0 / resolution
    dist = float(np.max(np.abs(argmin - lam)))
    eig_min = float(np.linalg.eigvalsh(phi.hess(lam)).min())
    ok = dist <= h + 1e-12 and eig_min > 0
    msg = "ok"
    if dist > h + 1e-12:
        msg = (
            f"grid minimum at {argmin.tolist()} is {dist:.3e} away from the center "
            f"(cell size {h:.3e}); the potential may not be strictly convex"
        )
    elif eig_min <= 0:
        msg = f"Hessian at the center is not positive definite (min eig {eig_min:.3e})"
    return MinimumCheck(ok, tuple(argmin), dist, h, eig_min, msg)


# -- Legendre transform utilities ----------------------------------------------


class LegendreDual(NamedTuple):
    y: np.ndarray
    value: float


def legendre_dual(g, x) -> LegendreDual:
    """Forward transform at x: y = grad g(x), g*(y) = x.y - g(x).

    `g` is anything with value/grad (a ConvexPotential or a symplectic
    potential).
    """
    x = np.asarray(x, dtype=float)
    y = g.grad(x)
    return LegendreDual(y, float(x @ y - g.value(x)))


def legendre_inverse(
    g,
    y,
    x0,
    tol: float = 1e-12,
    max_iter: int = 50,
    domain: Optional[Callable[[np.ndarray], bool]] = None,
) -> np.ndarray:
    """Solve grad g(x) = y by damped Newton (step halving).

    `domain` rejects iterates outside the admissible open set; failures to
    converge within the budget raise NewtonError.
    """
    x = np.asarray(x0, dtype=float).copy()
    y = np.asarray(y, dtype=float)
    for _ in range(max_iter):
        r = g.grad(x) - y
        rnorm = np.linalg.norm(r)
        if rnorm <= tol:
            return x
        step = np.linalg.solve(g.hess(x), r)
        alpha = 1.0
        while alpha > 2.0 ** -40:
            trial = x - alpha * step
            if domain is None or domain(trial):
                if np.linalg.norm(g.grad(trial) - y) < rnorm:
                    x = trial
                    break
            alpha *= 0.5
        else:
            raise NewtonError(
                f"damping exhausted at x={x.tolist()} with residual {rnorm:.3e}"
            )
    r = np.linalg.norm(g.grad(x) - y)
    if r <= tol:
        return x
    raise NewtonError(f"no convergence in {max_iter} iterations (residual {r:.3e})")


class StrictConvexityReport(NamedTuple):
    ok: bool
    min_eigenvalue: float
    witness: tuple[float, ...]


def check_strict_convexity(
    phi: ConvexPotential, samples
) -> StrictConvexityReport:
    """Minimum Hessian eigenvalue of phi over the sample points; the witness
    is the point where it is attained."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    eigs = np.linalg.eigvalsh(phi.hess(samples))
    per_point = eigs.min(axis=-1)
    idx = int(np.argmin(per_point))
    val = float(per_point[idx])
    return StrictConvexityReport(val > 0.0, val, tuple(samples[idx]))
