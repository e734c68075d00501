"""Geometry of the warped-product cusp  R x [0, inf),  g = A(t)^2 dx^2 + dt^2.

Heights t are Busemann values; the parabolic generator acts by x -> x + 1.
Distances are measured inside the horoball {t >= 0}: unit-speed geodesics
conserve c = A(t)^2 x'(s), their height satisfies (t')^2 = 1 - c^2/A(t)^2,
and a geodesic either climbs monotonically or climbs through a single
turning height t* with A(t*) = |c| and comes back down.  Both branches are
quadratures after the substitution t = t* - w^2, which removes the
inverse-square-root endpoint singularity.

Within the leading pure-exponential zone of a profile the distances reduce
to the rescaled upper-half-plane closed form; routines dispatch to it when
the whole geodesic provably stays in that zone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profile import LogAreaProfile
from .quadrature import QuadratureBudgetError, adaptive_simpson

__all__ = [
    "CuspModel",
    "HoroPoint",
    "horo_distance",
    "meeting_height",
    "quasigeodesic_distance",
    "exact_distance",
    "flow_contraction",
    "ball_horoball_volume",
]

_U_SUPPORT_CAP = 300.0  # exp(u) must stay finite inside the quadratures


@dataclass(frozen=True)
class HoroPoint:
    """Point of the cusp: horocycle coordinate x, height t >= 0."""

    x: float
    t: float = 0.0

    def __post_init__(self):
        if self.t < 0.0:
            raise ValueError("height must be >= 0")


class CuspModel:
    """Cusp metric determined by a log profile u with A(t) = e^{-u(t)}."""

    translation_width = 1.0

    def __init__(self, profile: LogAreaProfile):
        self.profile = profile

    @classmethod
    def constant_curvature(cls, alpha: float) -> "CuspModel":
        return cls(LogAreaProfile.constant(alpha))

    @property
    def curvature_bounds(self):
        return self.profile.curvature_bounds

    def u(self, t):
        return self.profile.u(t)

    def du(self, t):
        return self.profile.du(t)

    def area(self, t):
        return self.profile.area(t)


def horo_distance(model: CuspModel, t: float, x1: float, x2: float) -> float:
    """Intrinsic distance A(t)*|x1-x2| along the horocycle at height t."""
    return math.exp(-model.profile.u(t)) * abs(x2 - x1)


def meeting_height(model: CuspModel, x1: float, x2: float) -> float:
    """Smallest height at which the horocyclic distance drops to 1.

    Solves A(t)*|dx| = 1, i.e. u(t) = ln|dx|; the infimum is 0 when the
    points are already within unit horocyclic distance on the horosphere.
    """
    dx = abs(x2 - x1)
    if dx <= 0.0:
        raise ValueError("meeting height needs distinct horocycle coordinates")
    if dx <= 1.0:
        return 0.0
    return model.profile.inverse_u(math.log(dx))


def quasigeodesic_distance(model: CuspModel, p: HoroPoint, q: HoroPoint) -> float:
    """Distance surrogate from the up-over-down path through the meeting height.

    Returns 2*t_xy - t_p - t_q when both heights are below the meeting height
    of the boundary projections, |t_p - t_q| otherwise.  Approximates the true
    distance up to an additive constant depending only on the curvature
    bounds.
    """
    if p.x == q.x:
        return abs(p.t - q.t)
    t_xy = meeting_height(model, p.x, q.x)
    if p.t <= t_xy and q.t <= t_xy:
        return 2.0 * t_xy - p.t - q.t
    return abs(p.t - q.t)


def flow_contraction(model: CuspModel, t: float, s: float) -> float:
    """A(t+s)/A(t): contraction of horocyclic lengths under the radial flow."""
    if t < 0.0 or s < 0.0:
        raise ValueError("heights and flow times must be >= 0")
    return math.exp(model.profile.u(t) - model.profile.u(t + s))


# ---------------------------------------------------------------------------
# exact distances: closed form in constant-curvature zones, else shooting
# ---------------------------------------------------------------------------


def _closed_form_distance(alpha: float, p: HoroPoint, q: HoroPoint):
    """Distance and max geodesic height in the pure e^{-alpha t} metric.

    The metric rescales to the upper half-plane via (X, Y) = (alpha*x,
    e^{alpha*t}); distances divide by alpha.  The max height on the connecting
    geodesic is the semicircle top when it lies between the endpoints.
    """
    X1, X2 = alpha * p.x, alpha * q.x
    T1, T2 = alpha * p.t, alpha * q.t
    if max(T1, T2) > _U_SUPPORT_CAP:
        raise ValueError("points too deep for closed-form evaluation")
    Y1, Y2 = math.exp(T1), math.exp(T2)
    dX = X2 - X1
    cosh_val = 1.0 + (dX ** 2 + (Y2 - Y1) ** 2) / (2.0 * Y1 * Y2)
    d = math.acosh(cosh_val) / alpha
    if dX == 0.0:
        return d, max(p.t, q.t)
    xi = (X2 ** 2 + Y2 ** 2 - X1 ** 2 - Y1 ** 2) / (2.0 * dX)
    radius = math.hypot(X1 - xi, Y1)
    if min(X1, X2) < xi < max(X1, X2):
        y_max = radius
    else:
        y_max = max(Y1, Y2)
    return d, math.log(y_max) / alpha


class _Shooting:
    """One geodesic boundary-value solve on a fixed profile."""

    def __init__(self, model: CuspModel, p: HoroPoint, q: HoroPoint, tol: float):
        self.pw = model.profile.pw
        self.t_lo, self.t_hi = sorted((p.t, q.t))
        self.dx = abs(q.x - p.x)
        self.tol = tol
        self.knots = [k for k in self.pw.knots if np.isfinite(k)]

    def _segmented(self, g, w_lo, w_hi, t_star):
        """Integrate g over [w_lo, w_hi], splitting at profile knots.

        Tolerances are relative, anchored on a coarse Simpson estimate of
        each sub-segment.
        """
        cuts = [w_lo, w_hi]
        for k in self.knots:
            if t_star - w_hi ** 2 < k < t_star - w_lo ** 2:
                cuts.append(math.sqrt(t_star - k))
        cuts = sorted(set(cuts))
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            coarse = abs((b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b)))
            total += adaptive_simpson(g, a, b, tol=self.tol * max(coarse, 1e-12),
                                      max_depth=30)
        return total

    def _side_integrals(self, t_star, t_from):
        """(horizontal displacement, arclength) climbing t_from -> t_star."""
        u_c = self.pw.eval_scalar(t_star)[0]
        if u_c > _U_SUPPORT_CAP:
            raise ValueError("geodesic climbs beyond the supported height range")
        W = math.sqrt(max(t_star - t_from, 0.0))

        def g_x(w):
            t = max(t_star - w * w, 0.0)
            u, du, _ = self.pw.eval_scalar(t)
            gap = 2.0 * (u_c - u)
            if gap < 1e-13:
                return 2.0 * math.exp(u) / math.sqrt(2.0 * du)
            return 2.0 * w * math.exp(u) / math.sqrt(math.expm1(gap))

        def g_l(w):
            t = max(t_star - w * w, 0.0)
            u, du, _ = self.pw.eval_scalar(t)
            gap = 2.0 * (u_c - u)
            if gap < 1e-13:
                return math.sqrt(2.0 / du)
            return 2.0 * w / math.sqrt(-math.expm1(-gap))

        return g_x, g_l, W

    def dx_turning(self, t_star):
        gx, _, W_lo = self._side_integrals(t_star, self.t_lo)
        W_hi = math.sqrt(max(t_star - self.t_hi, 0.0))
        return (self._segmented(gx, 0.0, W_lo, t_star)
                + self._segmented(gx, 0.0, W_hi, t_star))

    def dx_monotone(self, t_star):
        gx, _, W_lo = self._side_integrals(t_star, self.t_lo)
        W_hi = math.sqrt(max(t_star - self.t_hi, 0.0))
        return self._segmented(gx, W_hi, W_lo, t_star)

    def length(self, t_star, turning: bool):
        _, gl, W_lo = self._side_integrals(t_star, self.t_lo)
        W_hi = math.sqrt(max(t_star - self.t_hi, 0.0))
        if turning:
            return (self._segmented(gl, 0.0, W_lo, t_star)
                    + self._segmented(gl, 0.0, W_hi, t_star))
        return self._segmented(gl, W_hi, W_lo, t_star)

    def solve(self) -> float:
        dx_crit = self.dx_turning(self.t_hi)  # turning exactly at the top point
        if self.dx >= dx_crit:
            lo, hi = self.t_hi, self.t_hi + max(1.0, self.t_hi * 0.5)
            for _ in range(200):
                if self.dx_turning(hi) >= self.dx:
                    break
                lo, hi = hi, 2.0 * hi + 1.0
            else:
                raise RuntimeError("turning-height bracket did not close")
            fn, turning = self.dx_turning, True
        else:
            # monotone climb: displacement decreases as the virtual turning
            # height rises; bracket upward until it drops below the target
            lo, hi = self.t_hi, self.t_hi + max(1.0, self.t_hi * 0.5)
            for _ in range(200):
                if self.dx_monotone(hi) <= self.dx:
                    break
                lo, hi = hi, 2.0 * hi + 1.0
            else:
                raise RuntimeError("monotone bracket did not close")
            fn, turning = self.dx_monotone, False

        target = self.dx
        for _ in range(120):
            mid = 0.5 * (lo + hi)
            val = fn(mid)
            increasing = turning
            if (val < target) == increasing:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-11 * max(1.0, hi) or abs(val - target) <= 1e-10 * target:
                break
        return self.length(0.5 * (lo + hi), turning)


def exact_distance(model: CuspModel, p: HoroPoint, q: HoroPoint,
                   method: str = "auto", tol: float = 1e-11) -> float:
    """Geodesic distance between p and q inside the horoball.

    ``method`` is "auto" (closed form whenever the connecting geodesic
    provably stays in the leading constant-curvature zone, shooting
    otherwise), "closed_form" or "shooting".  Distances within the horoball
    upper-bound ambient distances and coincide whenever the ambient geodesic
    does not leave the horoball.
    """
    if p.x == q.x:
        return abs(p.t - q.t)
    profile = model.profile
    if method in ("auto", "closed_form"):
        pure = profile.pure_height
        if p.t < pure and q.t < pure:
            d, t_max = _closed_form_distance(profile.alpha, p, q)
            if t_max <= pure or method == "closed_form":
                return d
        elif method == "closed_form":
            raise ValueError("endpoints outside the constant-curvature zone")
    return _Shooting(model, p, q, tol).solve()


def ball_horoball_volume(model: CuspModel, R: float, rel_tol: float = 1e-3,
                         budget: int = 400_000) -> float:
    """Volume of B(o, R) intersected with the horoball, o = (0, 0).

    Reduces the 2D integral of the area element A(t) dx dt over the region
    {exact_distance(o, (x,t)) <= R} to an adaptive quadrature of
    2 * A(t) * x_max(t), using the x -> -x symmetry and monotonicity of the
    distance in |x|.  Raises QuadratureBudgetError carrying the partial value
    when the evaluation budget is exhausted.
    """
    if R <= 0.0:
        raise ValueError("radius must be positive")
    origin = HoroPoint(0.0, 0.0)
    state = {"evals": 0, "partial": 0.0}

    def x_max(t):
        state["evals"] += 1
        if state["evals"] > budget:
            raise QuadratureBudgetError(
                f"volume quadrature budget exceeded at R={R}", state["partial"])
        if exact_distance(model, origin, HoroPoint(0.0, t)) >= R:
            return 0.0
        hi = 1.0
        while exact_distance(model, origin, HoroPoint(hi, t)) < R:
            hi *= 2.0
            if hi > 1e308 / 2:
                raise RuntimeError("horizontal extent overflow")
        lo = hi / 2.0 if hi > 1.0 else 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if exact_distance(model, origin, HoroPoint(mid, t)) < R:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def integrand(t):
        return 2.0 * math.exp(-model.profile.u(t)) * x_max(t)

    # rough pass fixes the absolute tolerance for the adaptive pass and
    # provides the partial bound reported on budget exhaustion
    t_grid = np.linspace(0.0, R, 65)
    rough = float(np.trapezoid([integrand(t) for t in t_grid], t_grid))
    state["partial"] = rough
    return adaptive_simpson(integrand, 0.0, R, tol=0.25 * rel_tol * rough,
                            max_depth=30)


def distance_rows(model: CuspModel, dx_values) -> list:
    """Rows (dx, exact, quasigeodesic, gap) for the distance table."""
    rows = []
    for dx in dx_values:
        p, q = HoroPoint(0.0, 0.0), HoroPoint(float(dx), 0.0)
        exact = exact_distance(model, p, q)
        quasi = quasigeodesic_distance(model, p, q)
        rows.append((float(dx), exact, quasi, exact - quasi))
    return rows


def volume_rows(model: CuspModel, radii, cuspidal_log_fn) -> list:
    """Rows (R, volume, F(R), volume/F(R)) for the volume table."""
    rows = []
    for R in radii:
        vol = ball_horoball_volume(model, float(R))
        logF = cuspidal_log_fn(float(R))
        F = math.exp(logF)
        rows.append((float(R), vol, F, vol / F))
    return rows
