"""Delta-concentration of flowed sections onto moment-map fibers.

For an interior lattice weight lam, the flowed section density on the
polytope is proportional to e^{-t f_lam}, with f_lam strictly convex and
minimized exactly at lam.  Normalized by the constant

    C_t = [ (2 pi)^n  int_P e^{-t f_lam(x)} dx ]^{-1}

(the inverse L^1 norm over the manifold, whose Liouville measure pushes
forward to (2 pi)^n times Lebesgue measure on P for a full-rank torus), the
pairing of C_t s_t against a test object with orbit profile H(mu) is

    C_t (2 pi)^n int_P e^{-t f_lam} H dx  -->  H(lam)   as t -> infinity,

a Laplace limit with first correction of order 1/t.  The limiting functional
is the fiber pairing: the torus-average of the integrand over the fiber
mu^{-1}(lam), weighted by the fiber measure.  Two fiber normalizations are
supported: `normalized` (unit mass per fiber, the limit produced by the
C_t normalization above) and `paper-form` (the angular volume form on the
fiber, whose total weight W = (2 pi)^n is measured, recorded, and checked to
be the same for every interior lattice point rather than assumed).

This module also computes concentration statistics of the normalized density
(mean -> lam, covariance ~ (t Hess phi(lam))^{-1}), fitted log-log decay
rates, and assembles pass/fail reports for one (lam, phi, t-grid) experiment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import AliasingError, DimensionMismatch, FiberDegenerationError
from .flow import SymplecticPotential, fit_loglog_slope
from .polytopes import DelzantPolytope
from .potentials import ConvexPotential, concentration_rate
from .quadrature import PeakHint, QuadratureSpec, integrate, integrate_many
from .sections import WeightSection, torus_volume

TWO_PI = 2.0 * np.pi


# -- test profiles ------------------------------------------------------------


@dataclass(frozen=True)
class BumpProfile:
    """Compactly supported C^2 piecewise-polynomial bump H on the polytope.

    With plateau = 0:  H = height (1 - s)^3 (1 + 2s), s = |x-center|^2/radius^2,
    so H(center) = height and Hess H(center) = -(2 height / radius^2) Id.
    With plateau = p in (0, 1): H equals height inside radius p*radius and
    tapers to zero through the C^2 quintic step.
    """

    center: tuple[float, ...]
    radius: float
    height: float = 1.0
    plateau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")
        if not (0.0 <= self.plateau < 1.0):
            raise ValueError("plateau must lie in [0, 1)")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center)
        if x.shape[-1] != len(c):
            raise DimensionMismatch("bump center dimension mismatch")
        r = np.linalg.norm(x - c, axis=-1) / self.radius
        if self.plateau == 0.0:
            s = np.clip(r**2, 0.0, 1.0)
            return np.where(r < 1.0, self.height * (1 - s) ** 3 * (1 + 2 * s), 0.0)
        u = np.clip((r - self.plateau) / (1.0 - self.plateau), 0.0, 1.0)
        taper = 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
        return self.height * np.where(r < 1.0, taper, 0.0)

    def supported_at(self, x) -> bool:
        return bool(self(np.asarray(x, dtype=float)) != 0.0)


# -- fiber measures -------------------------------------------------------------


@dataclass(frozen=True)
class FiberMeasureModel:
    """Fiber normalization: `normalized` gives every fiber unit mass;
    `paper-form` uses the angular volume form, with the per-fiber weight
    measured by quadrature over the fiber torus and recorded."""

    mode: str = "normalized"
    torus_constant: float = TWO_PI
    n_theta: int = 64

    def __post_init__(self):
        if self.mode not in ("normalized", "paper-form"):
            raise ValueError("mode must be 'normalized' or 'paper-form'")

    def fiber_weight(self, poly: DelzantPolytope, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        if not poly.is_interior(lam):
            raise FiberDegenerationError(
                f"fiber over {lam.tolist()} degenerates on the boundary"
            )
        if self.mode == "normalized":
            return 1.0
        return _measure_fiber_torus_volume(poly.dimension, self.torus_constant, self.n_theta)


def _measure_fiber_torus_volume(n: int, constant: float, n_theta: int) -> float:
    """Angular volume of one moment-map fiber, by uniform quadrature of the
    constant function over the fiber torus (exact for a Riemann sum on a
    periodic integrand)."""
    h = constant / n_theta
    one_axis = np.sum(np.ones(n_theta)) * h
    return float(one_axis**n)


def fiber_weight_constancy(
    poly: DelzantPolytope, lams: Sequence, model: FiberMeasureModel
) -> tuple[list[float], float]:
    """Measured fiber weights across lattice points and their relative spread."""
    weights = [model.fiber_weight(poly, lam) for lam in lams]
    w = np.asarray(weights)
    spread = float((w.max() - w.min()) / np.abs(w).max())
    return weights, spread


# -- normalization constant and pairings ------------------------------------------


def _laplace_width(phi: ConvexPotential, lam, t: float) -> Optional[float]:
    if t <= 0:
        return None
    eig_min = float(np.linalg.eigvalsh(phi.hess(np.asarray(lam, dtype=float))).min())
    if eig_min <= 0:
        return None
    return 1.0 / np.sqrt(t * eig_min)


def _density_moments(
    fs: Sequence,
    poly: DelzantPolytope,
    phi: ConvexPotential,
    lam,
    t: float,
    spec: QuadratureSpec,
) -> list[float]:
    """Integrals of e^{-t f_lam} f_i over P on one shared grid.

    The bare density is the reference column driving refinement; a peak hint
    of Laplace width 1/sqrt(t min-eig Hess phi(lam)) is added once the flow
    has localized the mass.
    """
    lam = np.asarray(lam, dtype=float)
    shift = -t * phi.value(lam)  # rescale so the peak value is O(1)

    def matrix(pts):
        density = np.exp(-t * concentration_rate(phi, lam, pts) - shift)
        cols = [density] + [density * f(pts) for f in fs]
        return np.stack(cols, axis=-1)

    width = _laplace_width(phi, lam, t)
    if width is not None and poly.is_interior(lam):
        hinted = QuadratureSpec(
            resolution=spec.resolution,
            max_refinements=spec.max_refinements,
            rel_tol=spec.rel_tol,
            abs_tol=spec.abs_tol,
            clip_depth=spec.clip_depth,
            peaks=spec.peaks + (PeakHint(tuple(lam), float(width)),),
        )
    else:
        hinted = spec
    results = integrate_many(matrix, 1 + len(fs), poly, hinted)
    return [r.value * np.exp(shift) for r in results]


def _integrate_against_density(
    f,
    poly: DelzantPolytope,
    phi: ConvexPotential,
    lam,
    t: float,
    spec: QuadratureSpec,
):
    if f is None:
        value = _density_moments([], poly, phi, lam, t, spec)[0]
    else:
        value = _density_moments([f], poly, phi, lam, t, spec)[1]
    return value, 0.0


def normalization_Ct(
    lam,
    phi: ConvexPotential,
    poly: DelzantPolytope,
    t: float,
    spec: QuadratureSpec = QuadratureSpec(),
    torus_constant: float = TWO_PI,
) -> float:
    """C_t = [ kappa^n int_P e^{-t f_lam} dx ]^{-1} with kappa = 2 pi by
    default (the Liouville pushforward density for full toric rank)."""
    kappa = torus_volume(poly.dimension, torus_constant)
    value, _ = _integrate_against_density(None, poly, phi, lam, t, spec)
    return 1.0 / (kappa * value)


def pairing_iota(
    s_t: WeightSection,
    bump: BumpProfile,
    C_t: float,
    spec: QuadratureSpec = QuadratureSpec(),
    torus_constant: float = TWO_PI,
) -> float:
    """iota(C_t s_t)(tau) = C_t kappa^n int_P e^{-t f_lam} H dx for the test
    object with orbit profile H."""
    poly = s_t.polytope
    kappa = torus_volume(poly.dimension, torus_constant)
    value, _ = _integrate_against_density(bump, poly, s_t.phi, s_t.lam, s_t.t, spec)
    return C_t * kappa * value


def fiber_pairing_delta(
    s0: WeightSection,
    bump: BumpProfile,
    lam=None,
    model: FiberMeasureModel = FiberMeasureModel(),
) -> float:
    """Fiber pairing of the time-zero section against the test object: the
    torus-averaged integrand H at the fiber, times the fiber weight."""
    lam = s0.lam if lam is None else np.asarray(lam, dtype=float)
    weight = model.fiber_weight(s0.polytope, lam)
    return float(bump(lam)) * weight


# -- concentration statistics -------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationStats:
    t: float
    total_mass: float           # quadrature mass of the normalized density
    mean: tuple[float, ...]
    covariance: tuple[tuple[float, ...], ...]
    localized_mass: float       # mass within `radius` of the center
    radius: float

    @property
    def covariance_matrix(self) -> np.ndarray:
        return np.asarray(self.covariance)


def concentration_profile(
    lam,
    phi: ConvexPotential,
    poly: DelzantPolytope,
    t: float,
    spec: QuadratureSpec = QuadratureSpec(),
    radius: Optional[float] = None,
) -> ConcentrationStats:
    """Moments of the normalized density e^{-t f_lam} / |e^{-t f_lam}|_1.

    The quadrature refines automatically near lam once the predicted Laplace
    peak width falls below the base cell size (peak hints plus Richardson
    refinement); mean -> lam and covariance ~ (t Hess phi(lam))^{-1}.
    """
    lam = np.asarray(lam, dtype=float)
    if not poly.is_interior(lam):
        raise FiberDegenerationError("concentration center must be interior")
    n = poly.dimension
    if radius is None:
        radius = 5.0 / np.sqrt(t) if t > 0 else float("inf")

    # one shared grid: first moments, second moments about lam, tail mass
    fs = [lambda p, i=i: p[:, i] - lam[i] for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    fs += [lambda p, i=i, j=j: (p[:, i] - lam[i]) * (p[:, j] - lam[j]) for i, j in pairs]
    if np.isfinite(radius):
        fs.append(lambda p: (np.linalg.norm(p - lam, axis=-1) <= radius).astype(float))
    moments = _density_moments(fs, poly, phi, lam, t, spec)
    Z = moments[0]
    first = np.array(moments[1 : 1 + n]) / Z
    mean = lam + first
    cov = np.zeros((n, n))
    for (i, j), raw in zip(pairs, moments[1 + n : 1 + n + len(pairs)]):
        centered = raw / Z - first[i] * first[j]
        cov[i, j] = cov[j, i] = centered
    localized = moments[-1] / Z if np.isfinite(radius) else 1.0
    return ConcentrationStats(
        t=float(t),
        total_mass=1.0,
        mean=tuple(mean),
        covariance=tuple(tuple(row) for row in cov),
        localized_mass=float(localized),
        radius=float(radius),
    )


# -- the full experiment --------------------------------------------------------------


@dataclass(frozen=True)
class BumpReport:
    bump_id: int
    center: tuple[float, ...]
    radius: float
    height: float
    plateau: float
    fiber_value: float
    pairings: tuple[float, ...]
    abs_errors: tuple[float, ...]
    final_error: float
    slope: Optional[float]
    overlaps_center: bool
    error_decreasing: bool
    slope_ok: bool
    passed: bool


@dataclass(frozen=True)
class ConvergenceReport:
    lam: tuple[float, ...]
    phi_descriptor: str
    mode: str
    t_grid: tuple[float, ...]
    slope_window: tuple[float, float]
    fiber_weight: float
    bumps: tuple[BumpReport, ...]
    covariance_times_t: tuple[tuple[tuple[float, ...], ...], ...]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "lambda": list(self.lam),
            "phi": self.phi_descriptor,
            "mode": self.mode,
            "t_grid": list(self.t_grid),
            "slope_window": list(self.slope_window),
            "W_lambda": self.fiber_weight,
            "pass": self.passed,
            "bumps": [
                {
                    "bump_id": b.bump_id,
                    "center": list(b.center),
                    "radius": b.radius,
                    "height": b.height,
                    "plateau": b.plateau,
                    "fiber_value": b.fiber_value,
                    "pairings": list(b.pairings),
                    "abs_errors": list(b.abs_errors),
                    "final_error": b.final_error,
                    "slope": b.slope,
                    "overlaps_center": b.overlaps_center,
                    "error_decreasing": b.error_decreasing,
                    "slope_ok": b.slope_ok,
                    "pass": b.passed,
                }
                for b in self.bumps
            ],
        }


SLOPE_WINDOW = (-1.15, -0.85)
FINAL_ERROR_TOL = 1e-2
DISJOINT_ERROR_TOL = 1e-6
NOISE_FLOOR = 1e-11


def convergence_experiment(
    lam,
    phi: ConvexPotential,
    g0: SymplecticPotential,
    bumps: Sequence[BumpProfile],
    t_grid: Sequence[float],
    spec: QuadratureSpec = QuadratureSpec(),
    mode: FiberMeasureModel = FiberMeasureModel(),
    torus_constant: float = TWO_PI,
    final_error_tol: float = FINAL_ERROR_TOL,
    with_concentration: bool = False,
    threads: int = 1,
) -> ConvergenceReport:
    """Run the weak-convergence experiment for one interior lattice weight.

    For every bump the pairing iota(C_t s_t)(tau) is tracked along the
    increasing t grid against the fiber value; bumps containing lam must show
    errors decreasing to below tolerance with a log-log slope of -1 (first
    Laplace correction), while bumps supported away from lam must vanish.
    The (lam, bump, t) evaluations are independent; with threads > 1 the
    per-t work runs concurrently and is merged in deterministic t order.
    """
    poly = g0.polytope
    lam = np.asarray(lam, dtype=float)
    if not poly.is_interior(lam):
        raise FiberDegenerationError(
            "convergence requires an interior (regular) lattice weight"
        )
    ts = np.asarray(t_grid, dtype=float)
    if not (np.diff(ts) > 0).all():
        raise ValueError("t grid must be strictly increasing")
    window = (float(ts.max() / 10.0), float(ts.max()))

    s0 = WeightSection(tuple(int(round(v)) for v in lam), g0, phi, 0.0)
    normalized_model = FiberMeasureModel("normalized")
    weight = mode.fiber_weight(poly, lam)

    def pairings_at(t: float) -> list[float]:
        # normalization and all bump pairings share one evaluation grid
        moments = _density_moments(list(bumps), poly, phi, lam, float(t), spec)
        return [m / moments[0] for m in moments[1:]]

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_t = list(pool.map(pairings_at, ts))
    else:
        per_t = [pairings_at(t) for t in ts]
    pairing_matrix = np.asarray(per_t)  # (len(ts), len(bumps))

    bump_reports = []
    for bump_id, bump in enumerate(bumps):
        fiber_norm = fiber_pairing_delta(s0, bump, lam, normalized_model)
        pairings = pairing_matrix[:, bump_id]
        errors = np.abs(pairings - fiber_norm)
        overlaps = bump.supported_at(lam)
        decreasing = bool(
            np.all(np.diff(errors) < NOISE_FLOOR) or errors[-1] < NOISE_FLOOR
        )
        slope = None
        slope_ok = True
        if overlaps:
            safe = np.maximum(errors, NOISE_FLOOR * 1e-3)
            slope = fit_loglog_slope(ts, safe)
            slope_ok = SLOPE_WINDOW[0] <= slope <= SLOPE_WINDOW[1]
            tol = final_error_tol
        else:
            tol = DISJOINT_ERROR_TOL
        final_error = float(errors[-1])
        passed = bool(final_error < tol and decreasing and slope_ok)
        bump_reports.append(
            BumpReport(
                bump_id=bump_id,
                center=bump.center,
                radius=bump.radius,
                height=bump.height,
                plateau=bump.plateau,
                fiber_value=float(fiber_norm * (weight if mode.mode == "paper-form" else 1.0)),
                pairings=tuple(float(v) for v in pairings),
                abs_errors=tuple(float(v) for v in errors),
                final_error=final_error,
                slope=slope,
                overlaps_center=overlaps,
                error_decreasing=decreasing,
                slope_ok=slope_ok,
                passed=passed,
            )
        )

    cov_t = []
    if with_concentration:
        for t in ts:
            stats = concentration_profile(lam, phi, poly, float(t), spec)
            cov_t.append(tuple(tuple(float(t) * v for v in row) for row in stats.covariance))

    return ConvergenceReport(
        lam=tuple(lam),
        phi_descriptor=phi.describe(),
        mode=mode.mode,
        t_grid=tuple(float(t) for t in ts),
        slope_window=window,
        fiber_weight=float(weight),
        bumps=tuple(bump_reports),
        covariance_times_t=tuple(cov_t),
        passed=all(b.passed for b in bump_reports),
    )


# -- weight orthogonality --------------------------------------------------------------


def weight_orthogonality_check(
    g0: SymplecticPotential,
    phi: ConvexPotential,
    lam1,
    lam2,
    t: float = 0.0,
    n_theta: int = 8,
    spec: QuadratureSpec = QuadratureSpec(resolution=64),
) -> float:
    """Theta-averaged pairing of a weight-lam1 section against a weight-lam2
    test object.

    Distinct weights vanish exactly by discrete Fourier orthogonality (the
    returned number is the quadrature residual); equal weights return the
    radial integral, which is positive.  A theta grid that cannot separate
    the two weights raises AliasingError.
    """
    lam1 = tuple(int(v) for v in np.asarray(lam1).ravel())
    lam2 = tuple(int(v) for v in np.asarray(lam2).ravel())
    poly = g0.polytope
    n = poly.dimension
    if lam1 != lam2 and all((a - b) % n_theta == 0 for a, b in zip(lam1, lam2)):
        raise AliasingError(
            f"theta grid of {n_theta} points aliases weights {lam1} and {lam2}"
        )
    s1 = WeightSection(lam1, g0, phi, t)
    s2 = WeightSection(lam2, g0, phi, t)

    # the integrand separates: radial profile times prod_j e^{i d_j theta_j};
    # average each angular factor over its own uniform grid
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    angular = 1.0 + 0.0j
    for d in (a - b for a, b in zip(lam1, lam2)):
        angular *= np.mean(np.exp(1j * d * thetas))

    def integrand(pts):
        radial = np.exp(s1._log_modulus(pts) + s2._log_modulus(pts))
        return np.abs(radial * angular)

    value, _ = integrate(integrand, poly, spec)
    return float(value)
