"""C^2 convex interpolation between two exponential decays.

A bridge connects e^{-alpha t} (on [t0, t1]) with e^{-beta t} (on [t2, t3]),
or the other way around, by a single convex decreasing function psi whose
normalised second derivative stays inside a pinching box:

    alpha^2 - eta  <=  psi''/psi  <=  beta^2 + eta.

Everything is built and evaluated on u = -ln psi, where the box reads

    alpha^2 - eta  <=  (u')^2 - u''  <=  beta^2 + eta,

and the junctions with the pure exponentials are exact (u coincides with the
line alpha*t, resp. beta*t, on a short hold at each end of the bridge).

The slope u' runs through three phases: a smoothstep ramp away from the
entry slope, a long cruise at the level that balances the integral
constraint u(t2) - u(t1) = (exit line) - (entry line), and a short ramp onto
the exit slope.  The cruise level exceeds beta (falls below alpha in the
descending case) by (beta - alpha) * t1/(t2 - t1), which is what forces the
separation requirement t2 >> t1: the overshoot must stay within the
curvature box.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .piecewise import BRIDGE, Piece, PiecewisePoly, line_piece, piece_end_value, ramp_piece

__all__ = [
    "Direction",
    "BridgeSpec",
    "FeasibilityReport",
    "BridgeProfile",
    "PinchReport",
    "BridgeError",
    "check_epigraph_feasibility",
    "required_separation",
    "build_bridge",
    "verify_pinching",
]

_EXP_CAP = 700.0  # beyond this, exp() is +inf for any practical margin


class BridgeError(RuntimeError):
    """Bridge construction failed (infeasible or separation too tight)."""


class Direction(enum.Enum):
    ALPHA_TO_BETA = "alpha_to_beta"   # e^{-alpha t} on the left, e^{-beta t} on the right
    BETA_TO_ALPHA = "beta_to_alpha"


@dataclass(frozen=True)
class BridgeSpec:
    """Endpoint data for one interpolation piece.

    Heights t0 < t1 < t2 < t3 delimit the two exponential plateaus and the
    gap [t1, t2] to be bridged.  Decay rates satisfy 0 < alpha <= beta and
    the pinching slack obeys 0 < eta < alpha^2, so the lower curvature bound
    alpha^2 - eta stays positive and convexity of psi is automatic.
    """

    t0: float
    t1: float
    t2: float
    t3: float
    alpha: float
    beta: float
    eta: float
    direction: Direction = Direction.ALPHA_TO_BETA

    def __post_init__(self):
        if not (self.t0 < self.t1 < self.t2 < self.t3):
            raise ValueError("heights must satisfy t0 < t1 < t2 < t3")
        if not (0.0 < self.alpha <= self.beta):
            raise ValueError("decay rates must satisfy 0 < alpha <= beta")
        if not (0.0 < self.eta < self.alpha ** 2):
            raise ValueError("pinching slack must satisfy 0 < eta < alpha^2")

    @property
    def width(self) -> float:
        return self.t2 - self.t1


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of the epigraph inequalities for one bridge spec.

    Inequality (a):  phi1'(t1)(t2-t1) < phi2(t2) - phi1(t1)
    Inequality (b):  phi2(t2) - phi1(t1) < phi2'(t2)(t2-t1)

    for the exponential pair in the spec's direction.  Both hold iff some C^2
    convex decreasing interpolation exists.  Margins are the amount by which
    each rearranged inequality clears zero (+inf when the exponential term
    overflows, which only happens deep in feasible territory).
    """

    ineq_a_holds: bool
    ineq_b_holds: bool
    margin_a: float
    margin_b: float
    sufficient_condition_holds: bool

    @property
    def feasible(self) -> bool:
        return self.ineq_a_holds and self.ineq_b_holds

    def as_dict(self) -> dict:
        return {
            "ineq_a_holds": self.ineq_a_holds,
            "ineq_b_holds": self.ineq_b_holds,
            "margin_a": self.margin_a,
            "margin_b": self.margin_b,
            "sufficient_condition_holds": self.sufficient_condition_holds,
            "feasible": self.feasible,
        }


def _exp_or_inf(x: float) -> float:
    return math.inf if x > _EXP_CAP else math.exp(x)


def check_epigraph_feasibility(spec: BridgeSpec) -> FeasibilityReport:
    """Evaluate the two epigraph inequalities in overflow-safe form.

    Ascending case (alpha on the left):
        (a)  e^{alpha t1 - beta t2} + alpha u - 1 > 0      with u = t2 - t1
        (b)  e^{beta u + (beta-alpha) t1} - beta u - 1 > 0  (always true)
    Descending case (beta on the left):
        (a)  e^{beta t1 - alpha t2} + beta u - 1 > 0
        (b)  e^{alpha u - (beta-alpha) t1} - alpha u - 1 > 0

    The simple sufficient condition is u > 1/alpha in the ascending case; in
    the descending case no closed form sharper than (b) itself is available,
    so the two coincide there.
    """
    a, b = spec.alpha, spec.beta
    t1, t2 = spec.t1, spec.t2
    u = spec.width
    if spec.direction is Direction.ALPHA_TO_BETA:
        margin_a = _exp_or_inf(a * t1 - b * t2) + a * u - 1.0
        margin_b = _exp_or_inf(b * u + (b - a) * t1) - b * u - 1.0
        sufficient = u > 1.0 / a
    else:
        margin_a = _exp_or_inf(b * t1 - a * t2) + b * u - 1.0
        margin_b = _exp_or_inf(a * u - (b - a) * t1) - a * u - 1.0
        sufficient = margin_b > 0.0
    return FeasibilityReport(
        ineq_a_holds=margin_a > 0.0,
        ineq_b_holds=margin_b > 0.0,
        margin_a=margin_a,
        margin_b=margin_b,
        sufficient_condition_holds=sufficient,
    )


# Slope-profile bounds of the canonical quintic ramp r(s) = 6s^5 - 15s^4 + 10s^3,
# which interpolates [alpha, beta] with vanishing first and second derivatives
# at both ends: sup|r'| = 15/8, sup|r''| = 10/sqrt(3).
_M1_FACTOR = 15.0 / 8.0
_M2_FACTOR = 10.0 / math.sqrt(3.0)


def required_separation(alpha: float, beta: float, eta: float):
    """Sufficient separation (A_required, B_required) for a guaranteed bridge.

    A bridge is guaranteed whenever t2 > A_required * t1 and t0 > B_required.
    The constant comes from the worst-case bound

        C = 1 / (8 (beta+1) (M1 + M2 + beta)),
        A_required = max(beta/alpha, 1 + 1/(C eta)),
        B_required = 1 / (beta - alpha),

    with M1, M2 the derivative bounds of the canonical quintic slope ramp.
    This is a crude a-priori bound; desk-scale runs use much smaller
    separations in aggressive mode and gate the result with verify_pinching.
    """
    if not (0.0 < alpha < beta):
        raise ValueError("required_separation needs 0 < alpha < beta")
    if not (0.0 < eta < alpha ** 2):
        raise ValueError("pinching slack must satisfy 0 < eta < alpha^2")
    m1 = _M1_FACTOR * (beta - alpha)
    m2 = _M2_FACTOR * (beta - alpha)
    c = 1.0 / (8.0 * (beta + 1.0) * (m1 + m2 + beta))
    a_required = max(beta / alpha, 1.0 + 1.0 / (c * eta))
    b_required = 1.0 / (beta - alpha)
    return a_required, b_required


def cruise_slack(alpha: float, beta: float, eta: float, direction: Direction) -> float:
    """Largest admissible deviation of the cruise slope from its plateau value.

    Ascending bridges cruise above beta; the box (u')^2 <= beta^2 + eta and
    the global slope bound u' <= beta + eta/4 cap the overshoot.  Descending
    bridges cruise below alpha with the symmetric caps.
    """
    if direction is Direction.ALPHA_TO_BETA:
        return min(eta / 4.0, math.sqrt(beta ** 2 + eta) - beta)
    return min(eta / 4.0, alpha - math.sqrt(alpha ** 2 - eta))


@dataclass(frozen=True)
class BridgeProfile:
    """A built bridge on [t1, t2] with exact evaluators.

    ``pw`` holds u as chained polynomial pieces (holds, ramps, cruise), so u,
    u' and u'' are exact and junction residuals vanish.  The normalised
    coordinate is s = lam * (t - t1) with lam = 1/(t2 - t1); the slope profile

        k'(s) = u'(t) (1 - t1/t) + (u(t)/t) (t1/t)

    is the derivative of k(s) = s * u(t)/t and is exposed for the invariant
    checks: it equals the entry slope on [0, eps1/2], the exit slope on
    [1 - eps1/2, 1], and stays inside [alpha - eta/4, beta + eta/4] because it
    is a convex combination of u' and u/t.
    """

    spec: BridgeSpec
    lam: float
    eps1: float
    cruise: float
    pw: PiecewisePoly = field(repr=False)

    def eval(self, t):
        return self.pw.eval(t)

    def u(self, t):
        return self.pw.u(t)

    def du(self, t):
        return self.pw.du(t)

    def d2u(self, t):
        return self.pw.d2u(t)

    def t_of_s(self, s):
        return self.spec.t1 + np.asarray(s) / self.lam

    def phi(self, s):
        """phi(s) = u(t)/t, the effective decay rate at normalised position s."""
        t = self.t_of_s(s)
        return self.pw.u(t) / t

    def k(self, s):
        """k(s) = s * phi(s); k(0) = 0 and k(1) is the exit decay rate."""
        return np.asarray(s) * self.phi(s)

    def kprime(self, s):
        """Slope profile k'(s), a convex combination of u'(t) and u(t)/t."""
        t = self.t_of_s(s)
        u, du, _ = self.pw.eval(t)
        w = self.spec.t1 / t
        return du * (1.0 - w) + (u / t) * w

    @property
    def alpha(self):
        return self.spec.alpha

    @property
    def beta(self):
        return self.spec.beta

    @property
    def eta(self):
        return self.spec.eta

    @property
    def sample_range(self):
        return (self.spec.t1, self.spec.t2)


def _ramp_lengths(direction, alpha, beta, eta, cruise):
    """Ramp lengths keeping the curvature excursions inside half the slack.

    Entry ramp (large amplitude): the transient 6*amp*x(L-x)/L^3 in u'' dips
    the pinch by at most 1.5*amp/(rate*L^2); L = 3*sqrt(3*amp/(rate*eta))
    caps that dip at eta/6.  Exit ramp (tiny amplitude c): the pinch headroom
    near the cruise is beta^2+eta-cruise^2 (resp. cruise^2-alpha^2+eta), and
    L = 3*c/headroom keeps the transient at a third of it.
    """
    if direction is Direction.ALPHA_TO_BETA:
        amp_in = max(cruise - alpha, 0.0)
        L_in = 3.0 * math.sqrt(3.0 * max(amp_in, 1e-12) / (alpha * eta))
        c = max(cruise - beta, 0.0)
        headroom = beta ** 2 + eta - cruise ** 2
        L_out = max(2.0, 3.0 * c / max(headroom, 1e-12))
    else:
        amp_in = max(beta - cruise, 0.0)
        L_in = 3.0 * math.sqrt(3.0 * max(amp_in, 1e-12) / (beta * eta))
        c = max(alpha - cruise, 0.0)
        headroom = cruise ** 2 - (alpha ** 2 - eta)
        L_out = max(2.0, 3.0 * c / max(headroom, 1e-12))
    return max(L_in, 2.0), L_out


def build_bridge(spec: BridgeSpec, aggressive: bool = False) -> BridgeProfile:
    """Construct the bridge profile for a feasible spec.

    In the default mode the guaranteed separation (required_separation) is
    enforced up front.  In aggressive mode any separation is attempted and
    the construction fails only if the cruise slope cannot stay inside the
    curvature box; callers are expected to gate the result with
    verify_pinching.
    """
    feas = check_epigraph_feasibility(spec)
    if not feas.feasible:
        raise BridgeError(
            f"bridge infeasible on [{spec.t1}, {spec.t2}] "
            f"(margin_a={feas.margin_a:.3g}, margin_b={feas.margin_b:.3g})"
        )
    alpha, beta, eta = spec.alpha, spec.beta, spec.eta
    if not aggressive and beta > alpha:
        a_req, b_req = required_separation(alpha, beta, eta)
        if spec.t2 <= a_req * spec.t1 or spec.t0 <= b_req:
            raise BridgeError(
                f"separation below the guaranteed bound (need t2 > {a_req:.3g}*t1 "
                f"and t0 > {b_req:.3g}); use aggressive mode to attempt anyway"
            )

    if spec.direction is Direction.ALPHA_TO_BETA:
        v_in, v_out = alpha, beta
    else:
        v_in, v_out = beta, alpha
    t1, t2 = spec.t1, spec.t2
    D = spec.width
    hold = min(1.0, 0.01 * D)
    T1, T2 = t1 + hold, t2 - hold
    target = v_out * t2 - v_in * t1  # u(t2) - u(t1), both ends on their lines

    # Solve the cruise level from the integral constraint, iterating so the
    # ramp lengths can depend on the solved level.  Breakpoints are computed
    # from t1 and t2 directly so the bridge ends exactly at t2.
    cruise = v_out
    for _ in range(3):
        L_in, L_out = _ramp_lengths(spec.direction, alpha, beta, eta, cruise)
        cuts = (t1, T1, T1 + L_in, T2 - L_out, T2, t2)
        if any(b <= a for a, b in zip(cuts, cuts[1:])) or L_in + L_out > 0.5 * (T2 - T1):
            raise BridgeError(
                f"bridge too short for its ramps on [{t1}, {t2}] "
                f"(need width >> {2 * (L_in + L_out):.3g})"
            )
        h1, w_in = cuts[1] - cuts[0], cuts[2] - cuts[1]
        w_cruise = cuts[3] - cuts[2]
        w_out, h2 = cuts[4] - cuts[3], cuts[5] - cuts[4]
        denom = 0.5 * w_in + w_cruise + 0.5 * w_out
        cruise = (target - v_in * (h1 + 0.5 * w_in) - v_out * (h2 + 0.5 * w_out)) / denom

    slack = cruise_slack(alpha, beta, eta, spec.direction)
    overshoot = cruise - beta if spec.direction is Direction.ALPHA_TO_BETA else alpha - cruise
    if overshoot > 0.95 * slack:
        raise BridgeError(
            f"cruise slope overshoot {overshoot:.3g} exceeds the pinching slack "
            f"{slack:.3g}; separation t2/t1 = {t2 / t1:.3g} is too tight"
        )

    pieces = []
    u0 = v_in * t1
    levels = (v_in, v_in, cruise, cruise, v_out, v_out)
    for i, (lo, hi) in enumerate(zip(cuts, cuts[1:])):
        va, vb = levels[i], levels[i + 1]
        if va == vb:
            piece = line_piece(lo, hi, u0, va, BRIDGE)
        else:
            piece = ramp_piece(lo, hi - lo, u0, va, vb)
        pieces.append(piece)
        u0 = piece_end_value(piece)
    # force the exact endpoint so the next plateau chains onto its own line;
    # the solve guarantees this analytically, floating point leaves ~ulp dust
    mismatch = u0 - v_out * t2
    if abs(mismatch) > 1e-7 * max(1.0, abs(v_out * t2)):
        raise BridgeError(f"integral constraint failed to close (residual {mismatch:.3g})")

    lam = 1.0 / D
    return BridgeProfile(spec=spec, lam=lam, eps1=2.0 * hold * lam, cruise=cruise,
                         pw=PiecewisePoly(pieces))


@dataclass(frozen=True)
class PinchReport:
    """Sampled curvature statistics for a bridge or a full profile."""

    min_ratio: float
    max_ratio: float
    lower_bound: float
    upper_bound: float
    n_samples: int
    fd_step: float
    fd_max_rel_err: float

    @property
    def within_bounds(self) -> bool:
        return self.min_ratio >= self.lower_bound and self.max_ratio <= self.upper_bound

    def as_dict(self) -> dict:
        return {
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "within_bounds": self.within_bounds,
            "n_samples": self.n_samples,
            "fd_step": self.fd_step,
            "fd_max_rel_err": self.fd_max_rel_err,
        }


def verify_pinching(profile, n_samples: int = 10_000, fd_step: float | None = None) -> PinchReport:
    """Sample psi''/psi = (u')^2 - u'' and cross-check against differences of u.

    Works for a single BridgeProfile or anything exposing ``eval``/``pw``,
    ``alpha``, ``beta``, ``eta`` and ``sample_range``.  The finite-difference
    oracle avoids piece boundaries, where the one-sided third derivative jump
    of the C^2 profile would pollute a second-order difference.
    """
    t_lo, t_hi = profile.sample_range
    t = np.linspace(t_lo, t_hi, n_samples)
    u, du, d2u = profile.eval(t)
    ratio = du ** 2 - d2u

    if fd_step is None:
        fd_step = min(0.5, max(1e-4, 1e-6 * (t_hi - t_lo)))
    knots = profile.pw.knots
    knots = knots[np.isfinite(knots)]
    m = n_samples // 10 + 16
    tf = np.linspace(t_lo + 2 * fd_step, t_hi - 2 * fd_step, m)
    near_knot = np.min(np.abs(tf[:, None] - knots[None, :]), axis=1) <= 2.0 * fd_step
    tf = tf[~near_knot]
    fd_err = 0.0
    if tf.size:
        up = profile.eval(tf + fd_step)[0]
        um = profile.eval(tf - fd_step)[0]
        uc, duc, d2uc = profile.eval(tf)
        du_fd = (up - um) / (2.0 * fd_step)
        d2u_fd = (up - 2.0 * uc + um) / fd_step ** 2
        ratio_fd = du_fd ** 2 - d2u_fd
        ratio_an = duc ** 2 - d2uc
        fd_err = float(np.max(np.abs(ratio_fd - ratio_an) / np.maximum(np.abs(ratio_an), 1e-30)))

    return PinchReport(
        min_ratio=float(ratio.min()),
        max_ratio=float(ratio.max()),
        lower_bound=profile.alpha ** 2 - profile.eta,
        upper_bound=profile.beta ** 2 + profile.eta,
        n_samples=n_samples,
        fd_step=fd_step,
        fd_max_rel_err=fd_err,
    )
