"""Piecewise-polynomial log profiles u(t) = -ln A(t).

Profiles are stored as a sorted list of polynomial pieces in the local
coordinate (t - t_lo).  Evaluation returns u together with its first and
second derivative, which is what every curvature and distance routine
downstream consumes; A(t) itself is never materialised because it underflows
for heights beyond a few hundred.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

__all__ = ["Piece", "PiecewisePoly"]

PURE_ALPHA = "pure_alpha"
PURE_BETA = "pure_beta"
BRIDGE = "bridge"


@dataclass(frozen=True)
class Piece:
    """u(t) = sum coeffs[j] * (t - t_lo)^j on [t_lo, t_hi]."""

    t_lo: float
    t_hi: float
    coeffs: tuple
    kind: str

    def as_dict(self) -> dict:
        return {
            "t_lo": self.t_lo,
            "t_hi": self.t_hi,
            "coeffs": list(self.coeffs),
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Piece":
        return cls(float(d["t_lo"]), float(d["t_hi"]), tuple(d["coeffs"]), d["kind"])


def _horner3(coeffs, x):
    """Evaluate a polynomial and its first two derivatives in one pass."""
    p = np.zeros_like(x)
    dp = np.zeros_like(x)
    d2p = np.zeros_like(x)
    for c in reversed(coeffs):
        d2p = d2p * x + 2.0 * dp
        dp = dp * x + p
        p = p * x + c
    return p, dp, d2p


class PiecewisePoly:
    """Contiguous polynomial pieces covering [0, +inf).

    The last piece is open-ended: its polynomial is used for every t beyond
    its t_lo.  Pieces must be contiguous and sorted; continuity of values is
    the builder's responsibility (profiles are chained exactly, so junction
    residuals are zero in floating point).
    """

    def __init__(self, pieces):
        pieces = list(pieces)
        if not pieces:
            raise ValueError("empty profile")
        for a, b in zip(pieces, pieces[1:]):
            if b.t_lo != a.t_hi:
                raise ValueError(f"pieces not contiguous at t={a.t_hi}")
        self.pieces = pieces
        # interior breakpoints only; searchsorted maps t -> piece index
        self._starts = np.array([p.t_lo for p in pieces[1:]])
        self._starts_list = [p.t_lo for p in pieces[1:]]

    @property
    def knots(self) -> np.ndarray:
        """All piece boundaries, including the left end of the first piece."""
        return np.array([p.t_lo for p in self.pieces] + [self.pieces[-1].t_hi])

    @property
    def t_end(self) -> float:
        """Right end of the last bounded piece."""
        return self.pieces[-1].t_lo

    def eval_scalar(self, t: float):
        """(u, u', u'') at one height, without array overhead."""
        if t < 0.0:
            raise ValueError("height t must be >= 0")
        i = bisect.bisect_right(self._starts_list, t)
        piece = self.pieces[i]
        x = t - piece.t_lo
        p = dp = d2p = 0.0
        for c in reversed(piece.coeffs):
            d2p = d2p * x + 2.0 * dp
            dp = dp * x + p
            p = p * x + c
        return p, dp, d2p

    def eval(self, t):
        """Return (u, u', u'') at t (scalar or array)."""
        if isinstance(t, (float, int)):
            return self.eval_scalar(float(t))
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        if np.any(t_arr < 0.0):
            raise ValueError("height t must be >= 0")
        idx = np.searchsorted(self._starts, t_arr, side="right")
        u = np.empty_like(t_arr)
        du = np.empty_like(t_arr)
        d2u = np.empty_like(t_arr)
        for i in np.unique(idx):
            piece = self.pieces[i]
            mask = idx == i
            p, dp, d2p = _horner3(piece.coeffs, t_arr[mask] - piece.t_lo)
            u[mask], du[mask], d2u[mask] = p, dp, d2p
        if scalar:
            return float(u[0]), float(du[0]), float(d2u[0])
        return u, du, d2u

    def u(self, t):
        return self.eval(t)[0]

    def du(self, t):
        return self.eval(t)[1]

    def d2u(self, t):
        return self.eval(t)[2]

    def as_dict(self) -> dict:
        return {"pieces": [p.as_dict() for p in self.pieces]}

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewisePoly":
        return cls([Piece.from_dict(p) for p in d["pieces"]])


def line_piece(t_lo: float, t_hi: float, u_lo: float, slope: float, kind: str) -> Piece:
    """Constant-slope piece anchored at its left value."""
    return Piece(t_lo, t_hi, (u_lo, slope), kind)


def ramp_piece(t_lo: float, width: float, u_lo: float, v0: float, v1: float,
               kind: str = BRIDGE) -> Piece:
    """Cubic-smoothstep slope transition from v0 to v1 over [t_lo, t_lo+width].

    u'(x) = v0 + (v1-v0) * (3(x/L)^2 - 2(x/L)^3) keeps u' C^1 with flat ends,
    so chaining ramps with constant-slope pieces yields a C^2 profile.  The
    integral over the ramp is exactly width*(v0+v1)/2.
    """
    L = width
    d = v1 - v0
    coeffs = (u_lo, v0, 0.0, d / L**2, -d / (2.0 * L**3))
    return Piece(t_lo, t_lo + L, coeffs, kind)


def piece_end_value(piece: Piece) -> float:
    """u at the right end of a bounded piece, from its own coefficients."""
    x = piece.t_hi - piece.t_lo
    v = 0.0
    for c in reversed(piece.coeffs):
        v = v * x + c
    return v
