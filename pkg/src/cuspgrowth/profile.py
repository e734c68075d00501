"""Interval schedules and the global horocyclic length profile A(t).

The profile alternates plateaus where A(t) is exactly e^{-alpha t} (on
[p_n, q_n]) or exactly e^{-beta t} (on [r_n, s_n]) with convex bridges in
between.  Plateau families live on a geometric ladder:

    p_n = (1-lambda0) Delta^{n-1} + lambda0 Delta^n,   r_n = (p_n + Delta^n)/2,
    q_n = (1-mu0)     Delta^{n-1} + mu0     Delta^n,   s_n = (q_n + Delta^n)/2,

which pins the alignment  t in [p_n, q_n]  <=>  (t + Delta^n)/2 in [r_n, s_n].
Below the first plateau and above the last bridge the profile continues as a
pure e^{-alpha t} line, so the metric is unperturbed near the horosphere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bridge import (
    BridgeError,
    BridgeSpec,
    Direction,
    build_bridge,
    cruise_slack,
    verify_pinching,
)
from .piecewise import (
    PURE_ALPHA,
    PURE_BETA,
    Piece,
    PiecewisePoly,
    line_piece,
    piece_end_value,
)

__all__ = [
    "ScheduleError",
    "IntervalSchedule",
    "make_schedule",
    "desk_separation",
    "auto_schedule",
    "LogAreaProfile",
    "build_area",
    "eval_log_area",
    "inverse_area",
]


class ScheduleError(ValueError):
    """An interval schedule violates one of its constraints."""


@dataclass(frozen=True)
class IntervalSchedule:
    """Validated plateau schedule for indices n_min..n_max."""

    delta: float
    lambda0: float
    mu0: float
    a_sep: float
    n_min: int
    n_max: int
    p: np.ndarray = field(repr=False)  # index 0 -> n_min, last entry is p_{n_max+1}
    q: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)

    def index(self, n: int) -> int:
        if not (self.n_min <= n <= self.n_max):
            raise IndexError(f"period {n} outside [{self.n_min}, {self.n_max}]")
        return n - self.n_min

    def plateau_alpha(self, n: int):
        i = self.index(n)
        return self.p[i], self.q[i]

    def plateau_beta(self, n: int):
        i = self.index(n)
        return self.r[i], self.s[i]

    @property
    def t_start(self) -> float:
        return float(self.p[0])

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "lambda0": self.lambda0,
            "mu0": self.mu0,
            "a_sep": self.a_sep,
            "n_min": self.n_min,
            "n_max": self.n_max,
        }


def _ladder(delta, lambda0, mu0, n_min, n_max):
    n = np.arange(n_min, n_max + 2, dtype=float)  # one extra period for p_{n_max+1}
    lower = delta ** (n - 1.0)
    upper = delta ** n
    p = (1.0 - lambda0) * lower + lambda0 * upper
    q = (1.0 - mu0) * lower + mu0 * upper
    r = (p + upper) / 2.0
    s = (q + upper) / 2.0
    return p, q, r, s, upper


def make_schedule(delta: float, lambda0: float, mu0: float, a_sep: float,
                  n_min: int, n_max: int) -> IntervalSchedule:
    """Build and fully validate a plateau schedule.

    Raises ScheduleError naming the violated constraint and the offending
    period index.  Checks, for every n in range:

    * mu0 > lambda0 and 1 + lambda0 - 2*a_sep*mu0 > 0 (parameter region),
    * r_n > a_sep * q_n and p_{n+1} > a_sep * s_n (bridge separations),
    * q_n >= p_n + 1 (plateau long enough to carry a full translation),
    * strict inclusion [p_n, s_n] within (Delta^{n-1}+1, Delta^n - 1).
    """
    if delta <= 1.0:
        raise ScheduleError("geometric scale must satisfy Delta > 1")
    if not (0.0 < lambda0 < 1.0 and 0.0 < mu0 < 1.0):
        raise ScheduleError("placement fractions must lie in (0, 1)")
    if mu0 <= lambda0:
        raise ScheduleError("placement fractions must satisfy mu0 > lambda0")
    if 1.0 + lambda0 - 2.0 * a_sep * mu0 <= 0.0:
        raise ScheduleError("parameter region violated: 1 + lambda0 - 2*A*mu0 <= 0")
    if n_min < 1 or n_max < n_min:
        raise ScheduleError("period range must satisfy 1 <= n_min <= n_max")

    p, q, r, s, upper = _ladder(delta, lambda0, mu0, n_min, n_max)
    lower = upper / delta
    for i, n in enumerate(range(n_min, n_max + 1)):
        if not r[i] > a_sep * q[i]:
            raise ScheduleError(f"separation r_n > A*q_n fails at n={n}")
        if not p[i + 1] > a_sep * s[i]:
            raise ScheduleError(f"separation p_(n+1) > A*s_n fails at n={n}")
        if not q[i] >= p[i] + 1.0:
            raise ScheduleError(f"plateau width q_n >= p_n + 1 fails at n={n}")
        if not (p[i] >= lower[i] + 1.0 and s[i] <= upper[i] - 1.0):
            raise ScheduleError(f"strict inclusion in (Delta^(n-1), Delta^n) fails at n={n}")
    return IntervalSchedule(delta, lambda0, mu0, a_sep, n_min, n_max,
                            p=p, q=q, r=r, s=s)


def desk_separation(alpha: float, beta: float, eta: float, margin: float = 0.6) -> float:
    """Smallest separation ratio at which both bridge types keep their cruise
    overshoot at ``margin`` times the pinching slack."""
    if beta == alpha:
        return 2.0
    up = 1.0 + (beta - alpha) / (margin * cruise_slack(alpha, beta, eta, Direction.ALPHA_TO_BETA))
    down = 1.0 + (beta - alpha) / (margin * cruise_slack(alpha, beta, eta, Direction.BETA_TO_ALPHA))
    return max(up, down, beta / alpha)


def auto_schedule(alpha: float, beta: float, eta: float, n_min: int = 1, n_max: int = 1,
                  a_sep: float | None = None) -> IntervalSchedule:
    """Search the smallest geometric scale Delta passing all direct checks.

    The placement rule is fixed: lambda0 puts p_n at roughly 0.6*A_sep, which
    secures the descending separation, and mu0 sits just above lambda0 so the
    alpha plateau is a few units long.  Delta is found by doubling until the
    checks pass, then bisecting down.
    """
    if a_sep is None:
        a_sep = desk_separation(alpha, beta, eta)

    def attempt(delta):
        lambda0 = 0.6 * a_sep / delta
        if not 0.0 < lambda0 < 0.5:
            return None
        step = delta ** n_min - delta ** (n_min - 1)
        mu0 = lambda0 + max(2.5, 3.0) / step
        m_cap = ((1.0 - lambda0 + lambda0 * delta) + delta) / (2.0 * a_sep)
        mu0_cap = 0.9 * (m_cap - 1.0) / (delta - 1.0)
        if mu0 >= mu0_cap:
            return None
        try:
            return make_schedule(delta, lambda0, mu0, a_sep, n_min, n_max)
        except ScheduleError:
            return None

    delta = max(4.0, 2.0 * a_sep)
    schedule = attempt(delta)
    while schedule is None:
        delta *= 2.0
        if delta > 1e15:
            raise ScheduleError("no feasible geometric scale found below 1e15")
        schedule = attempt(delta)
    lo, hi = delta / 2.0, delta
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        trial = attempt(mid)
        if trial is None:
            lo = mid
        else:
            hi, schedule = mid, trial
    return schedule


class LogAreaProfile:
    """Global log profile u(t) = -ln A(t) with curvature bounds.

    The profile is C^2, strictly increasing with slope in
    [alpha - eta/4, beta + eta/4], squeezed between the lines alpha*t and
    beta*t, and its curvature K(t) = -((u')^2 - u'') stays inside
    [-beta^2 - eta, -alpha^2 + eta].  A(t) = e^{-u(t)} is then convex and
    decreasing.
    """

    def __init__(self, pw: PiecewisePoly, alpha: float, beta: float, eta: float,
                 schedule: IntervalSchedule | None = None):
        self.pw = pw
        self.alpha = alpha
        self.beta = beta
        self.eta = eta
        self.schedule = schedule

    # -- evaluation ------------------------------------------------------

    def eval(self, t):
        return self.pw.eval(t)

    def u(self, t):
        return self.pw.u(t)

    def du(self, t):
        return self.pw.du(t)

    def d2u(self, t):
        return self.pw.d2u(t)

    def curvature(self, t):
        u, du, d2u = self.pw.eval(t)
        return -(du ** 2 - d2u)

    def area(self, t):
        """A(t); underflows to 0.0 for large heights, use u for log work."""
        return np.exp(-self.pw.u(t))

    @property
    def t_start(self) -> float:
        return self.schedule.t_start if self.schedule is not None else 0.0

    @property
    def t_end(self) -> float:
        return self.pw.t_end

    @property
    def sample_range(self):
        return (0.0, self.t_end * 1.05 if self.t_end > 0 else 10.0)

    @property
    def pure_height(self) -> float:
        """Largest height below which the profile is the exact alpha line."""
        first = self.pw.pieces[0]
        if len(self.pw.pieces) == 1:
            return math.inf
        return first.t_hi

    @property
    def curvature_bounds(self):
        """(a^2, b^2) with curvature pinched in [-b^2, -a^2]."""
        if len(self.pw.pieces) == 1:
            return self.alpha ** 2, self.alpha ** 2
        return self.alpha ** 2 - self.eta, self.beta ** 2 + self.eta

    def inverse_u(self, v: float, tol: float = 1e-10) -> float:
        """Unique t with u(t) = v, by bisection (u is strictly increasing)."""
        if v < 0.0:
            raise ValueError("u is nonnegative on the profile domain")
        if v == 0.0:
            return 0.0
        lo, hi = 0.0, v / self.alpha + 1.0
        if self.pw.u(hi) < v:
            raise ValueError("value above the profile range")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self.pw.u(mid) < v:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    # -- serialization ---------------------------------------------------

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "eta": self.eta,
            "schedule": self.schedule.as_dict() if self.schedule else None,
            "pieces": self.pw.as_dict()["pieces"],
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "LogAreaProfile":
        sched = d.get("schedule")
        schedule = None
        if sched is not None:
            schedule = make_schedule(sched["delta"], sched["lambda0"], sched["mu0"],
                                     sched["a_sep"], sched["n_min"], sched["n_max"])
        return cls(PiecewisePoly.from_dict(d), d["alpha"], d["beta"], d["eta"], schedule)

    @classmethod
    def from_json(cls, path) -> "LogAreaProfile":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def constant(cls, alpha: float) -> "LogAreaProfile":
        """Constant-curvature profile u(t) = alpha*t."""
        pw = PiecewisePoly([Piece(0.0, math.inf, (0.0, alpha), PURE_ALPHA)])
        return cls(pw, alpha, alpha, 0.0, None)

    def sample_rows(self, t_grid):
        """Rows (t, u, u', u'', K) for CSV emission."""
        u, du, d2u = self.pw.eval(np.asarray(t_grid, dtype=float))
        K = -(du ** 2 - d2u)
        return np.column_stack([t_grid, u, du, d2u, K])


def build_area(schedule: IntervalSchedule, alpha: float, beta: float, eta: float) -> LogAreaProfile:
    """Assemble the global profile over the schedule.

    Layout per period n: alpha plateau [p_n, q_n], ascending bridge
    [q_n, r_n], beta plateau [r_n, s_n], descending bridge [s_n, p_(n+1)].
    A pure alpha line covers [0, p_min] and everything beyond the last
    descending bridge.  With alpha == beta the profile is the single line
    alpha*t regardless of the schedule.
    """
    if beta < alpha:
        raise ValueError("decay rates must satisfy alpha <= beta")
    if alpha == beta:
        return LogAreaProfile.constant(alpha)
    if not (0.0 < eta < alpha ** 2):
        raise ValueError("pinching slack must satisfy 0 < eta < alpha^2")

    pieces = []
    u0 = 0.0
    cursor = 0.0

    def append_line(t_hi, slope, kind):
        nonlocal u0, cursor
        if t_hi <= cursor:
            return
        piece = line_piece(cursor, t_hi, u0, slope, kind)
        pieces.append(piece)
        u0 += slope * (t_hi - cursor)
        cursor = t_hi

    def append_bridge(t_lo, t_hi, direction, t0, t3):
        nonlocal u0, cursor
        spec = BridgeSpec(t0=t0, t1=t_lo, t2=t_hi, t3=t3,
                          alpha=alpha, beta=beta, eta=eta, direction=direction)
        try:
            bridge = build_bridge(spec, aggressive=True)
        except BridgeError as exc:
            raise BridgeError(f"gap [{t_lo:.6g}, {t_hi:.6g}] ({direction.value}): {exc}") from exc
        # re-anchor the bridge pieces onto the running value; the bridge was
        # built on the same entry line, so the shift is at most a few ulps
        shift = u0 - bridge.pw.pieces[0].coeffs[0]
        for piece in bridge.pw.pieces:
            coeffs = (piece.coeffs[0] + shift,) + piece.coeffs[1:]
            pieces.append(Piece(piece.t_lo, piece.t_hi, coeffs, piece.kind))
        u0 = piece_end_value(pieces[-1])
        cursor = t_hi

    for n in range(schedule.n_min, schedule.n_max + 1):
        p_n, q_n = schedule.plateau_alpha(n)
        r_n, s_n = schedule.plateau_beta(n)
        p_next = float(schedule.p[schedule.index(n) + 1])
        append_line(q_n, alpha, PURE_ALPHA)
        append_bridge(q_n, r_n, Direction.ALPHA_TO_BETA, t0=p_n, t3=s_n)
        append_line(s_n, beta, PURE_BETA)
        append_bridge(s_n, p_next, Direction.BETA_TO_ALPHA, t0=r_n, t3=p_next + 1.0)
    # pure alpha tail past the final descending bridge
    pieces.append(line_piece(cursor, math.inf, u0, alpha, PURE_ALPHA))

    return LogAreaProfile(PiecewisePoly(pieces), alpha, beta, eta, schedule)


def eval_log_area(profile: LogAreaProfile, t):
    """(u, u', u'') at height t."""
    return profile.eval(t)


def inverse_area(profile: LogAreaProfile, v: float, tol: float = 1e-10) -> float:
    """The unique height t with u(t) = v."""
    return profile.inverse_u(v, tol=tol)
