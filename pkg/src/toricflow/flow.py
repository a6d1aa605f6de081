"""Toric Kahler structures deformed by imaginary-time Hamiltonian flow.

Model and conventions
---------------------
On the dense torus orbit we use action-angle coordinates (x, theta) with
symplectic form omega = sum_j dx_j ^ dtheta_j; x ranges over the interior of
the moment polytope P and equals the moment map.  A compatible complex
structure is encoded by a symplectic potential g on P (default: the Guillemin
potential g_P = (1/2) sum_k l_k log l_k), through the holomorphic coordinates

    w_j = exp(dg/dx_j + i theta_j),

and takes the Abreu block form J = [[0, -G^{-1}], [G, 0]] in the frame
(d/dx, d/dtheta), G = Hess g.  The flow generated by a strictly convex
Hamiltonian phi(x), continued to imaginary time t, simply adds t*phi to the
symplectic potential:

    g_t = g_0 + t*phi,   G_t = G_0 + t Hess phi,

which stays strictly convex for all t >= 0, so every J_t is an honest Kahler
structure for the same omega (a geodesic ray of toric metrics).

Gauge: the primitive beta = sum_j x_j dtheta_j of omega is fixed once and for
all; it pairs with the torus generators as beta(d/dtheta_j) = x_j and with the
Hamiltonian field X_phi = sum_j (dphi/dx_j) d/dtheta_j as

    beta(X_phi) = x . grad phi(x),

a function of x alone, hence annihilated by X_phi.  The invariant Kahler
potential is normalized by rho = 2 (x . grad g - g), i.e. rho(y) = 2 g*(y) in
Legendre-dual coordinates, which makes x = (1/2) grad_y rho and the frame
e^{-rho/2} sigma holomorphic (see sections.py).  Two exact identities anchor
everything:

    rho_t = rho_0 + 2 t f_0(x),          f_0(x) = x . grad phi - phi,
    rho_t = 2 (x . grad g_t - g_t)       (Legendre route),

and the module reports their residual as its central self-check.

Polarizations: the anti-holomorphic frame of J_t is spanned by the columns of
[ (1/2) G_t^{-1} ; (i/2) Id ]; as t grows these tilt into the pure angular
directions span{d/dtheta_j}, the involutive mixed limit on the open orbit.
Convergence is metrized by the largest principal angle between frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, DomainError
from .polytopes import DelzantPolytope
from .potentials import ConvexPotential, concentration_rate, legendre_inverse


class SymplecticPotential:
    """Guillemin potential of a polytope plus an optional smooth strictly
    convex correction.

    g(x) = (1/2) sum_k l_k(x) log l_k(x) + extra(x), with closed-form
    gradient (1/2) sum_k nu_k (log l_k + 1) and Hessian
    (1/2) sum_k nu_k nu_k^T / l_k.  Evaluations are restricted to the open
    interior l_k > 0.
    """

    def __init__(self, polytope: DelzantPolytope, extra: Optional[ConvexPotential] = None):
        self.polytope = polytope
        self.extra = extra
        self.dimension = polytope.dimension
        if extra is not None and extra.dimension != polytope.dimension:
            raise DimensionMismatch("extra potential dimension mismatch")

    def _facet_values(self, x) -> np.ndarray:
        l = self.polytope.facet_values(x)
        if l.min() <= 0.0:
            raise DomainError(
                "symplectic potential evaluated on or outside the boundary "
                f"(min facet value {l.min():.3e})"
            )
        return l

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        l = self._facet_values(x)
        out = 0.5 * np.sum(l * np.log(l), axis=-1)
        if self.extra is not None:
            out = out + self.extra.value(x)
        return out

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        l = self._facet_values(x)
        out = 0.5 * (np.log(l) + 1.0) @ self.polytope.normals
        if self.extra is not None:
            out = out + self.extra.grad(x)
        return out

    def hess(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        l = self._facet_values(x)
        A = self.polytope.normals
        out = 0.5 * np.einsum("...k,ki,kj->...ij", 1.0 / l, A, A)
        if self.extra is not None:
            out = out + self.extra.hess(x)
        return out


def guillemin_potential(poly: DelzantPolytope, x):
    """Value, gradient and Hessian of the canonical symplectic potential."""
    g = SymplecticPotential(poly)
    return g.value(x), g.grad(x), g.hess(x)


@dataclass(frozen=True)
class OrbitPoint:
    """A point of the dense orbit: interior action coordinates and angles."""

    x: tuple[float, ...]
    theta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if len(self.x) != len(self.theta):
            raise DimensionMismatch("x and theta must have equal length")

    @property
    def x_array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)

    @property
    def theta_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)


@dataclass(frozen=True)
class KahlerFlowState:
    """The deformed structure at time t: g_t = g_0 + t*phi."""

    g0: SymplecticPotential
    phi: ConvexPotential
    t: float = 0.0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("flow time must be nonnegative")
        if self.g0.dimension != self.phi.dimension:
            raise DimensionMismatch("symplectic and flow potentials disagree in dimension")

    @property
    def polytope(self) -> DelzantPolytope:
        return self.g0.polytope

    def at_time(self, t: float) -> "KahlerFlowState":
        return KahlerFlowState(self.g0, self.phi, t)

    # flowed symplectic potential and derivatives
    def potential(self, x) -> np.ndarray:
        return self.g0.value(x) + self.t * self.phi.value(x)

    def moment_dual(self, x) -> np.ndarray:
        """y_t = grad g_t(x), the log-modulus coordinates of w^t."""
        return self.g0.grad(x) + self.t * self.phi.grad(x)

    def metric_hessian(self, x) -> np.ndarray:
        """G_t = Hess g_t(x)."""
        return self.g0.hess(x) + self.t * self.phi.hess(x)

    # Kahler potentials
    def kahler_potential_reference(self, x) -> np.ndarray:
        """rho_0 = 2 (x . grad g_0 - g_0), the time-zero normalization."""
        x = np.asarray(x, dtype=float)
        return 2.0 * (np.einsum("...i,...i->...", x, self.g0.grad(x)) - self.g0.value(x))

    def kahler_potential(self, x) -> np.ndarray:
        """rho_t = rho_0 + 2 t f_0(x), with f_0 = x . grad phi - phi."""
        x = np.asarray(x, dtype=float)
        zero = np.zeros(self.phi.dimension)
        return self.kahler_potential_reference(x) + 2.0 * self.t * concentration_rate(
            self.phi, zero, x
        )

    def kahler_potential_legendre(self, x) -> np.ndarray:
        """rho_t = 2 (x . grad g_t - g_t), through the flowed Legendre data."""
        x = np.asarray(x, dtype=float)
        return 2.0 * (np.einsum("...i,...i->...", x, self.moment_dual(x)) - self.potential(x))

    def duality_residual(self, x) -> np.ndarray:
        """|rho_t(formula) - rho_t(Legendre)|; vanishes identically."""
        return np.abs(self.kahler_potential(x) - self.kahler_potential_legendre(x))


def flowed_potential(state: KahlerFlowState, x):
    """g_t(x) together with its gradient and Hessian."""
    return state.potential(x), state.moment_dual(x), state.metric_hessian(x)


def kahler_potential_t(state: KahlerFlowState, x):
    return state.kahler_potential(x)


def kahler_potential_duality(state: KahlerFlowState, x):
    """(rho_t via Legendre, residual against the additive formula)."""
    leg = state.kahler_potential_legendre(x)
    return leg, np.abs(leg - state.kahler_potential(x))


_COND_LIMIT = 1e12


def complex_structure(state: KahlerFlowState, x) -> np.ndarray:
    """J_t at x in the (d/dx, d/dtheta) frame: [[0, -G^{-1}], [G, 0]]."""
    G = state.metric_hessian(np.asarray(x, dtype=float))
    if G.ndim != 2:
        raise DimensionMismatch("complex_structure expects a single point")
    if np.linalg.cond(G) > _COND_LIMIT:
        raise DomainError("metric Hessian is numerically singular at this point")
    n = G.shape[0]
    Ginv = np.linalg.inv(G)
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -Ginv
    J[n:, :n] = G
    return J


def metric_matrix(state: KahlerFlowState, x) -> np.ndarray:
    """omega(-, J_t -) in the same frame: block diag(G_t, G_t^{-1})."""
    G = state.metric_hessian(np.asarray(x, dtype=float))
    n = G.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = G
    M[n:, n:] = np.linalg.inv(G)
    return M


def polarization_basis_t(state: KahlerFlowState, x) -> np.ndarray:
    """Anti-holomorphic frame of J_t: columns [ (1/2)G_t^{-1} ; (i/2)Id ]."""
    G = state.metric_hessian(np.asarray(x, dtype=float))
    n = G.shape[0]
    top = 0.5 * np.linalg.inv(G)
    bottom = 0.5j * np.eye(n)
    return np.vstack([top.astype(complex), bottom])


def mixed_polarization_basis(n: int) -> np.ndarray:
    """The limiting frame on the orbit: pure angular directions [0 ; Id]."""
    return np.vstack([np.zeros((n, n), dtype=complex), np.eye(n, dtype=complex)])


def subspace_angle(A: np.ndarray, B: np.ndarray) -> float:
    """Largest principal angle (radians) between the column spans of A and B.

    Orthonormalize both frames and read the angles off the singular values
    of the cross-Gram matrix; zero exactly when the spans coincide.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    if A.shape[0] != B.shape[0]:
        raise DimensionMismatch("frames live in different ambient dimensions")
    Qa = scipy.linalg.orth(A)
    Qb = scipy.linalg.orth(B)
    if Qa.shape[1] != A.shape[1] or Qb.shape[1] != B.shape[1]:
        raise ValueError("rank-deficient polarization frame")
    if Qa.shape[1] != Qb.shape[1]:
        raise DimensionMismatch("frames have different ranks")
    s = scipy.linalg.svd(Qa.conj().T @ Qb, compute_uv=False)
    s = np.clip(s, 0.0, 1.0)
    return float(np.arccos(s.min()))


# -- gauge bookkeeping -----------------------------------------------------------


def beta_of_hamiltonian_field(phi: ConvexPotential, x) -> np.ndarray:
    """beta(X_phi) = x . grad phi(x) in the gauge beta = sum x_j dtheta_j.

    Depends on x only, so its derivative along X_phi (an angular derivative)
    vanishes identically.
    """
    x = np.asarray(x, dtype=float)
    return np.einsum("...i,...i->...", x, phi.grad(x))


def hamiltonian_derivative_of_beta_pairing(
    phi: ConvexPotential, x, n_theta: int = 16
) -> float:
    """Numerical value of X_phi(beta(X_phi)) at x.

    beta(X_phi) is constant along the torus fiber; the spectral angular
    derivative of its values over a theta grid is identically zero, which is
    what this returns (computed, not assumed).
    """
    x = np.asarray(x, dtype=float)
    vals = np.repeat(beta_of_hamiltonian_field(phi, x), n_theta)
    modes = np.fft.fft(vals)
    freqs = np.fft.fftfreq(n_theta) * n_theta
    dvals = np.fft.ifft(1j * freqs * modes)
    coeff = np.max(np.abs(phi.grad(x)))
    return float(coeff * np.max(np.abs(dvals)))


# -- the biholomorphism psi_t -----------------------------------------------------


def holomorphic_log_coordinates(state: KahlerFlowState, p: OrbitPoint) -> np.ndarray:
    """log w^t at p: grad g_t(x) + i theta (J_t-holomorphic coordinates)."""
    return state.moment_dual(p.x_array) + 1j * p.theta_array


def flow_map_psi_t(state: KahlerFlowState, p: OrbitPoint) -> OrbitPoint:
    """Image of p under the time-t biholomorphism, read in time-zero
    holomorphic coordinates.

    The log-modulus coordinates move by y -> grad g_0(x) + t grad phi(x)
    while the angles are unchanged; the action coordinates of the image are
    recovered by inverting grad g_0 (damped Newton).  Consequently the
    J_t-coordinate of p equals the J_0-coordinate of the image.
    """
    x = p.x_array
    y_target = state.moment_dual(x)
    poly = state.polytope
    x_new = legendre_inverse(
        state.g0,
        y_target,
        x0=x,
        domain=lambda q: bool(poly.facet_values(q).min() > 0.0),
    )
    return OrbitPoint(tuple(x_new), p.theta)


# -- decay of the polarization angle ----------------------------------------------


class DecayCurve(NamedTuple):
    ts: np.ndarray
    angles: np.ndarray
    slope: float


def fit_loglog_slope(ts, values, decade: float = 10.0) -> float:
    """Least-squares slope of log(values) vs log(ts) over the trailing
    decade ts >= max(ts)/decade."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = ts >= ts.max() / decade
    if mask.sum() < 2:
        raise ValueError("not enough points in the fitting window")
    return float(np.polyfit(np.log(ts[mask]), np.log(values[mask]), 1)[0])


def polarization_decay_curve(
    g0: SymplecticPotential, phi: ConvexPotential, x, t_grid
) -> DecayCurve:
    """Largest principal angle between the time-t frame and the angular
    limit frame, along a t grid, with the log-log slope over the last decade."""
    x = np.asarray(x, dtype=float)
    ts = np.asarray(t_grid, dtype=float)
    if not (np.diff(ts) > 0).all():
        raise ValueError("t grid must be strictly increasing")
    n = g0.dimension
    target = mixed_polarization_basis(n)
    angles = np.array(
        [
            subspace_angle(polarization_basis_t(KahlerFlowState(g0, phi, t), x), target)
            for t in ts
        ]
    )
    positive = ts > 0
    slope = fit_loglog_slope(ts[positive], angles[positive]) if positive.sum() >= 2 else np.nan
    return DecayCurve(ts, angles, slope)
