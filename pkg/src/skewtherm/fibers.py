"""Manneville-Pomeau fiber maps driven by the doubling base.

The fiber over x carries g_x(y) = y + y^(p(x)+1) mod 1 with exponent profile
p(x) = p0 + p1*(1 - cos(2*pi*x))/2.  Each g_x has two monotone branches split
at the point c_x solving c + c^(p+1) = 1; branch 1 (the one containing the
neutral fixed point y=0) is the only branch whose inverse can fail to contract.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .base import BasePoint, circle_distance
from .errors import CapacityExhaustedError, HypothesisViolatedError

# Fiber circle with the wraparound metric: largest possible distance.
DIAM_Y = 0.5

_BISECT_WIDTH = 1e-12
_NEWTON_STEPS = 5


@dataclass(frozen=True)
class MpFamily:
    """Parameters of the fiber family and its root-finding tolerance."""

    p0: float = 0.5
    p1: float = 0.5
    delta_a: float = 0.1
    root_tol: float = 1e-13

    def __post_init__(self):
        if self.p0 <= 0:
            raise ValueError("p0 must be positive")
        if self.p1 < 0:
            raise ValueError("p1 must be nonnegative")
        if self.root_tol <= 0:
            raise ValueError("root_tol must be positive")
        # the split point c_x grows with p, so the binding case is p = p0
        if not 0 < self.delta_a < branch_boundary_for_exponent(self.p0):
            raise ValueError("neutral band must sit inside branch 1's domain")

    def exponent(self, x) -> float:
        """Fiber exponent p(x); accepts a BasePoint or a float."""
        xv = float(x)
        return self.p0 + self.p1 * (1.0 - math.cos(2.0 * math.pi * xv)) / 2.0

    def in_neutral_band(self, y) -> np.ndarray | bool:
        return circle_distance(y, 0.0) < self.delta_a

    def to_json(self) -> dict:
        return {"p0": self.p0, "p1": self.p1, "delta_a": self.delta_a,
                "root_tol": self.root_tol}

    @classmethod
    def from_json(cls, d: dict) -> "MpFamily":
        return cls(**d)


def fiber_forward(family: MpFamily, x, y):
    """g_x(y) = y + y^(p(x)+1) mod 1; y may be an array."""
    p = family.exponent(x)
    y = np.asarray(y, dtype=float)
    out = (y + y ** (p + 1.0)) % 1.0
    if out.ndim == 0:
        return float(out)
    return out


def branch_boundary_for_exponent(p: float) -> float:
    """The split point c with c + c^(p+1) = 1, found to near machine precision."""
    lo, hi = 0.0, 1.0
    while hi - lo > _BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        if mid + mid ** (p + 1.0) < 1.0:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        f = c + c ** (p + 1.0) - 1.0
        c -= f / (1.0 + (p + 1.0) * c ** p)
    return c


def branch_boundary(family: MpFamily, x) -> float:
    return branch_boundary_for_exponent(family.exponent(x))


def _solve_increasing(p, target, lo, hi):
    """Vectorized root of y + y^(p+1) = target on [lo, hi] (monotone in y)."""
    p = np.asarray(p, dtype=float)
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    n_bisect = int(math.ceil(math.log2(1.0 / _BISECT_WIDTH)))
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        below = mid + mid ** (p + 1.0) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    y = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        f = y + y ** (p + 1.0) - target
        y = y - f / (1.0 + (p + 1.0) * y ** p)
        # rounding can push the iterate a hair outside the bracket (even
        # below zero near the neutral root), where fractional powers blow up
        y = np.minimum(np.maximum(y, lo), hi)
    return y


def inverse_branches_for_exponent(p, t):
    """Both g-preimages of t for exponent(s) p: neutral branch then expanding.

    y1 solves y + y^(p+1) = t on [0, c); y2 solves y + y^(p+1) = t + 1 on
    [c, 1).  Fully vectorized over t (and p, if given as a matching array).
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if np.isscalar(p) or np.asarray(p).ndim == 0:
        c = branch_boundary_for_exponent(float(p))
    else:
        c = _solve_increasing(p, np.ones_like(t), 0.0, 1.0)
    y1 = _solve_increasing(p, t, 0.0, c)
    y2 = _solve_increasing(p, t + 1.0, c, 1.0)
    # the expanding branch ends at y=1 which is the same circle point as 0
    y2 = np.where(y2 >= 1.0, 0.0, y2)
    if scalar:
        return float(y1[0]), float(y2[0])
    return y1, y2


def fiber_inverse_branches(family: MpFamily, x, t):
    """Ordered preimage pair (y1, y2) of t under g_x, neutral branch first."""
    return inverse_branches_for_exponent(family.exponent(x), t)


@functools.lru_cache(maxsize=8192)
def _grid_preimage_tables(p: float, n_nodes: int):
    """Preimages of the fiber grid nodes j/n under g with exponent p (cached).

    Returns read-only arrays (y1, y2); callers must not mutate them.
    """
    t = np.arange(n_nodes, dtype=float) / n_nodes
    y1, y2 = inverse_branches_for_exponent(p, t)
    y1.setflags(write=False)
    y2.setflags(write=False)
    return y1, y2


def grid_preimages(family: MpFamily, x, n_nodes: int):
    return _grid_preimage_tables(family.exponent(x), n_nodes)


def preimage_tree(family: MpFamily, x: BasePoint, y: float, n: int) -> list[np.ndarray]:
    """All 2^n preimages of y under the n-step fiber cascade over x.

    Returns per-level arrays ``levels[0..n]``: ``levels[k]`` holds the points
    of the partial forward orbits at level k, indexed so that the leaf for
    word index ``idx`` (bit i-1 of idx = branch letter w_i - 1, letters
    counted from the deepest preimage) appears at ``levels[k][idx >> k]``.
    ``levels[n]`` is just ``[y]``.
    """
    if x.capacity < n:
        raise CapacityExhaustedError(f"tree depth {n} exceeds capacity {x.capacity}")
    levels = [None] * (n + 1)
    levels[n] = np.array([y], dtype=float)
    for j in range(n - 1, -1, -1):
        p = family.exponent(x.forward(j))
        y1, y2 = inverse_branches_for_exponent(p, levels[j + 1])
        merged = np.empty(2 * len(y1))
        merged[0::2] = y1
        merged[1::2] = y2
        levels[j] = merged
    return levels


def paired_preimage_trees(family: MpFamily, x: BasePoint, x2: BasePoint,
                          y: float, n: int):
    """Preimage trees over x and x2 with identical word indexing.

    Pairing leaves (and partial orbits) by branch-word label realizes the
    preimage pairing for this two-branch family, because the branches are
    globally ordered on the circle.
    """
    return preimage_tree(family, x, y, n), preimage_tree(family, x2, y, n)


@dataclass(frozen=True)
class HypothesisConstants:
    """Measured and derived constants of the expansion regime, with checks."""

    d: int
    dhat: int
    q: int
    gamma: float
    L: float
    alpha: float
    eps_phi: float
    iota: float
    eps: float
    s: float = field(init=False)
    zeta: float = field(init=False)
    theta: float = field(init=False)
    c: float = field(init=False)

    @property
    def dbar(self) -> int:
        return self.d * self.dhat

    def __post_init__(self):
        s = math.exp(self.eps_phi) * (
            (self.d - self.q) * self.gamma ** (-self.alpha)
            + self.q * self.L ** self.alpha) / self.d
        zeta = s + 2.0 * s * self.eps_phi * DIAM_Y ** self.alpha
        theta = self.q * math.exp(self.eps) * math.exp(self.eps_phi) / self.d
        avg = self.gamma ** (-(1.0 - self.iota)) * self.L ** self.iota
        c = -0.25 * math.log(avg) if avg < 1.0 else float("nan")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "c", c)

    def checks(self) -> list[tuple[str, bool]]:
        avg = self.gamma ** (-(1.0 - self.iota)) * self.L ** self.iota
        out = [
            ("gamma > 1", self.gamma > 1.0),
            ("L >= 1", self.L >= 1.0),
            ("alpha in (0,1]", 0.0 < self.alpha <= 1.0),
            ("iota in (0,1)", 0.0 < self.iota < 1.0),
            ("s < 1", self.s < 1.0),
            ("zeta < 1", self.zeta < 1.0),
            ("theta < 1", self.theta < 1.0),
            ("0 < eps_phi < log d - log q",
             0.0 < self.eps_phi < math.log(self.d) - math.log(self.q)),
            ("gamma^-(1-iota) L^iota < e^-2c < 1",
             not math.isnan(self.c) and self.c > 0.0
             and avg < math.exp(-2.0 * self.c) < 1.0),
        ]
        return out

    def first_failure(self) -> str | None:
        for name, ok in self.checks():
            if not ok:
                return name
        return None

    def all_pass(self) -> bool:
        return self.first_failure() is None

    def to_json(self) -> dict:
        return {
            "d": self.d, "dhat": self.dhat, "dbar": self.dbar, "q": self.q,
            "gamma": self.gamma, "L": self.L, "alpha": self.alpha,
            "eps_phi": self.eps_phi, "iota": self.iota, "eps": self.eps,
            "s": self.s, "zeta": self.zeta, "theta": self.theta, "c": self.c,
            "checks": {name: ok for name, ok in self.checks()},
        }


def estimate_constants(family: MpFamily, alpha: float, eps_phi: float,
                       iota: float, eps: float, samples: int,
                       rng: np.random.Generator | None = None,
                       pair_distance: float = 1e-4,
                       exploratory: bool = False) -> HypothesisConstants:
    """Sample one-step preimage pairs to estimate gamma and L, then derive
    the regime constants and run their inequality checks.

    gamma is the smallest expansion ratio d(images)/d(preimages) seen over
    pairs whose preimage fiber coordinates both avoid the neutral band; L is
    the largest reciprocal ratio over pairs meeting the band, floored at 1
    (the regime assumes L >= 1 and the sampled supremum can dip just below).
    Raises HypothesisViolatedError naming the first failed inequality unless
    ``exploratory`` is set.
    """
    if samples < 1000:
        raise ValueError("need at least 10^3 samples")
    rng = rng or np.random.default_rng(0)

    x = rng.uniform(0.0, 1.0, size=samples)
    # mix pure-base, pure-fiber and diagonal displacements
    mode = rng.integers(0, 3, size=samples)
    dx = np.where(mode != 1, pair_distance, 0.0)
    dy = np.where(mode != 0, pair_distance, 0.0)
    # keep the target pair (y, y+dy) off the wrap point: branch-labeled
    # pairing follows the geodesic lift only when the geodesic avoids 0
    y = rng.uniform(0.0, 1.0, size=samples) * (1.0 - dy)
    x2 = (x + dx) % 1.0
    y2 = y + dy

    p = family.p0 + family.p1 * (1.0 - np.cos(2.0 * np.pi * x)) / 2.0
    p2 = family.p0 + family.p1 * (1.0 - np.cos(2.0 * np.pi * x2)) / 2.0
    d_img = circle_distance((2.0 * x) % 1.0, (2.0 * x2) % 1.0) + circle_distance(y, y2)

    b1, b2 = inverse_branches_for_exponent(p, y)
    b1p, b2p = inverse_branches_for_exponent(p2, y2)
    d_base = circle_distance(x, x2)

    gamma_emp = math.inf
    L_emp = 0.0
    for yb, ybp in ((b1, b1p), (b2, b2p)):
        d_pre = d_base + circle_distance(yb, ybp)
        ratio = d_img / d_pre
        meets = (circle_distance(yb, 0.0) < family.delta_a) | \
                (circle_distance(ybp, 0.0) < family.delta_a)
        if np.any(~meets):
            gamma_emp = min(gamma_emp, float(np.min(ratio[~meets])))
        if np.any(meets):
            L_emp = max(L_emp, float(np.max(1.0 / ratio[meets])))
    if not math.isfinite(gamma_emp):
        raise HypothesisViolatedError("no preimage pairs outside neutral band")
    L_emp = max(L_emp, 1.0)

    constants = HypothesisConstants(d=2, dhat=2, q=1, gamma=gamma_emp,
                                    L=L_emp, alpha=alpha, eps_phi=eps_phi,
                                    iota=iota, eps=eps)
    failure = constants.first_failure()
    if failure is not None and not exploratory:
        raise HypothesisViolatedError(failure)
    return constants
