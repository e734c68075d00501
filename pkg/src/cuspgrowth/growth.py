"""Counting functions, the cuspidal function, and growth-rate estimators.

All tables are stored in log space (values routinely reach e^{1000}); sums
and discrete convolutions go through log-sum-exp.  Exponent estimates are
windowed max/min of ln f(R)/R rather than regression fits: the profiles of
interest make ln f(R)/R oscillate between two limits, which a fit would
average away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CuspModel, HoroPoint, exact_distance
from .quadrature import log_integral_over_segments

__all__ = [
    "CountingTable",
    "GrowthEstimate",
    "parabolic_counting",
    "horospherical_area",
    "cuspidal_F",
    "growth_exponents",
    "convolve",
    "volume_sandwich",
    "max_formula",
    "pinch_predicates",
    "PinchPredicateReport",
]

COUNTING_KINDS = ("parabolic_orbit", "lattice_orbit")
TABLE_KINDS = COUNTING_KINDS + ("volume", "cuspidal")


@dataclass(frozen=True)
class CountingTable:
    """ln f(R) on an increasing grid of radii."""

    grid: np.ndarray
    log_values: np.ndarray
    kind: str

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        vals = np.asarray(self.log_values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "log_values", vals)
        if grid.ndim != 1 or grid.shape != vals.shape:
            raise ValueError("grid and log_values must be 1-d arrays of equal length")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.kind not in TABLE_KINDS:
            raise ValueError(f"unknown table kind {self.kind!r}")
        if self.kind in COUNTING_KINDS and np.any(np.diff(vals) < 0):
            raise ValueError("counting tables must be nondecreasing")

    def window(self, lo: float, hi: float) -> "CountingTable":
        mask = (self.grid >= lo) & (self.grid <= hi)
        return CountingTable(self.grid[mask], self.log_values[mask], self.kind)


@dataclass(frozen=True)
class GrowthEstimate:
    """Windowed upper/lower exponential growth rates of a table.

    omega_plus / omega_minus are the max / min of ln f(R)/R over the window;
    they estimate limsup / liminf of the same expression and inherit every
    finite-window caveat (in particular, truncated counting tables
    underestimate).
    """

    omega_plus: float
    omega_minus: float
    window: tuple
    ratios: np.ndarray = field(repr=False)
    argmax_R: float = math.nan
    argmin_R: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.omega_minus > self.omega_plus:
            raise ValueError("omega_minus must not exceed omega_plus")

    def as_dict(self) -> dict:
        return {
            "omega_plus": self.omega_plus,
            "omega_minus": self.omega_minus,
            "window": list(self.window),
            "argmax_R": self.argmax_R,
            "argmin_R": self.argmin_R,
            "finite_window_caveat": "rates are window max/min of ln f(R)/R, not limits",
            **self.diagnostics,
        }


def growth_exponents(table: CountingTable, window) -> GrowthEstimate:
    """Estimate omega+ and omega- of a table over [window[0], window[1]]."""
    lo, hi = window
    sub = table.window(lo, hi)
    if sub.grid.size == 0:
        raise ValueError(f"window [{lo}, {hi}] contains no grid points")
    if np.any(sub.grid <= 0):
        raise ValueError("window must sit at positive radii")
    ratios = sub.log_values / sub.grid
    i_max, i_min = int(np.argmax(ratios)), int(np.argmin(ratios))
    return GrowthEstimate(
        omega_plus=float(ratios[i_max]),
        omega_minus=float(ratios[i_min]),
        window=(float(lo), float(hi)),
        ratios=ratios,
        argmax_R=float(sub.grid[i_max]),
        argmin_R=float(sub.grid[i_min]),
    )


def parabolic_counting(model: CuspModel, R_grid) -> CountingTable:
    """v_P(R) = #{k in Z : d(o, (k, 0)) <= R}, o the origin on the horosphere.

    The generator translates by the model's horocycle width; distances are
    monotone in |k|, so each radius needs one doubling search plus a binary
    search rather than an enumeration.
    """
    R_grid = np.asarray(R_grid, dtype=float)
    if np.any(np.diff(R_grid) <= 0):
        raise ValueError("radius grid must be increasing")
    origin = HoroPoint(0.0, 0.0)
    width = model.translation_width

    def dist(k: int) -> float:
        return exact_distance(model, origin, HoroPoint(width * k, 0.0))

    log_counts = []
    for R in R_grid:
        if dist(1) > R:
            log_counts.append(0.0)  # identity only
            continue
        hi = 2
        while dist(hi) <= R:
            hi *= 2
        lo = hi // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if dist(mid) <= R:
                lo = mid
            else:
                hi = mid
        log_counts.append(math.log(2 * lo + 1))
    return CountingTable(R_grid, np.array(log_counts), "parabolic_orbit")


def horospherical_area(model: CuspModel, t: float) -> float:
    """Length of one fundamental domain of the parabolic action at height t."""
    if t < 0.0:
        raise ValueError("height must be >= 0")
    return math.exp(-model.profile.u(t)) * model.translation_width


def cuspidal_F(model: CuspModel, R: float, rel_tol: float = 1e-6) -> float:
    """ln F(R) with F(R) = integral_0^R A(t)/A((t+R)/2) dt.

    The integrand exp(u((t+R)/2) - u(t)) reaches e^{beta R/2}, so the
    quadrature runs in log space, split at the profile knots and at their
    preimages under t -> (t+R)/2.
    """
    if R <= 0.0:
        raise ValueError("radius must be positive")
    pw = model.profile.pw

    def log_integrand(t):
        return pw.u(0.5 * (t + R)) - pw.u(t)

    knots = [k for k in pw.knots if np.isfinite(k)]
    cuts = {0.0, R}
    for k in knots:
        if 0.0 < k < R:
            cuts.add(k)
        pre = 2.0 * k - R  # where (t+R)/2 crosses the knot
        if 0.0 < pre < R:
            cuts.add(pre)
    return log_integral_over_segments(log_integrand, sorted(cuts), rel_tol=rel_tol)


def _check_integer_aligned(*tables: CountingTable):
    base = tables[0].grid
    if not np.allclose(base, np.round(base)) or np.any(np.diff(base) != 1.0):
        raise ValueError("convolution needs consecutive integer grids")
    for t in tables[1:]:
        if t.grid.shape != base.shape or np.any(t.grid != base):
            raise ValueError("tables must share the same integer grid")


def convolve(f: CountingTable, g: CountingTable) -> CountingTable:
    """Discrete convolution (f*g)(R) = sum_{n=0}^{R} f(n) g(R-n), in log space."""
    _check_integer_aligned(f, g)
    n = f.grid.size
    out = np.empty(n)
    for i in range(n):
        terms = f.log_values[: i + 1] + g.log_values[: i + 1][::-1]
        out[i] = np.logaddexp.reduce(terms)
    return CountingTable(f.grid, out, "volume")


def volume_sandwich(v_gamma: CountingTable, F_list):
    """Lower/upper log-space envelopes for the ball volume table.

    lower = v_Gamma + sum_i F_i (pointwise log-sum-exp),
    upper = v_Gamma + sum_i v_Gamma * F_i (discrete convolution).
    """
    F_list = list(F_list)
    if not F_list:
        return v_gamma, v_gamma
    _check_integer_aligned(v_gamma, *F_list)
    lower = v_gamma.log_values.copy()
    upper = v_gamma.log_values.copy()
    for F in F_list:
        lower = np.logaddexp(lower, F.log_values)
        upper = np.logaddexp(upper, convolve(v_gamma, F).log_values)
    return (CountingTable(v_gamma.grid, lower, "volume"),
            CountingTable(v_gamma.grid, upper, "volume"))


def max_formula(delta_gamma: float, F_estimates) -> tuple:
    """omega_pm(X) = max(delta(Gamma), omega_pm(F_1), ..., omega_pm(F_l))."""
    plus = [delta_gamma] + [e.omega_plus for e in F_estimates]
    minus = [delta_gamma] + [e.omega_minus for e in F_estimates]
    for v in plus + minus:
        if not math.isfinite(v):
            raise ValueError("growth inputs must be finite")
    return max(plus), max(minus)


@dataclass(frozen=True)
class PinchPredicateReport:
    """Half-pinching predicate and the ball-in-horoball volume exponent box."""

    delta_p: float
    delta_p_minus: float
    eps: float
    half_pinched: bool
    case: str             # "i" when delta >= 2*delta^-, else "ii"
    vol_lower_exp: float  # exponent of the guaranteed lower envelope
    vol_upper_exp: float  # exponent of the guaranteed upper envelope

    def as_dict(self) -> dict:
        return {
            "delta_p": self.delta_p,
            "delta_p_minus": self.delta_p_minus,
            "eps": self.eps,
            "half_pinched": self.half_pinched,
            "case": self.case,
            "vol_lower_exp": self.vol_lower_exp,
            "vol_upper_exp": self.vol_upper_exp,
        }


def pinch_predicates(delta_p: float, delta_p_minus: float, eps: float) -> PinchPredicateReport:
    """Evaluate the half-pinching test delta/delta^- <= 2 and the exponent box.

    Case (i), delta >= 2*delta^-: volume of B(x,R) within the horoball grows
    at most like exp(2(delta - delta^- + eps) R); case (ii) caps it at
    exp(2(delta + eps) R).  Both cases share the lower exponent
    delta^- - eps.
    """
    if not (0.0 < delta_p_minus <= delta_p):
        raise ValueError("exponents must satisfy 0 < delta_p_minus <= delta_p")
    if delta_p >= 2.0 * delta_p_minus:
        case, upper = "i", 2.0 * (delta_p - delta_p_minus + eps)
    else:
        case, upper = "ii", 2.0 * (delta_p + eps)
    return PinchPredicateReport(
        delta_p=delta_p,
        delta_p_minus=delta_p_minus,
        eps=eps,
        half_pinched=delta_p / delta_p_minus <= 2.0,
        case=case,
        vol_lower_exp=delta_p_minus - eps,
        vol_upper_exp=upper,
    )
