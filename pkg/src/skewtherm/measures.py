"""Fiber conformal measures, eigendata of the base and full operators, and
the disintegration checks tying them together.

Fiber measures are never materialized: integrating psi against the depth-n
measure over x is the ratio of two anchored cascades.  Eigendata come from
power iteration on the cached operator stencils; the adjoint iteration uses
the exact transpose of the same incidence structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import BasePoint
from .errors import CapacityExhaustedError, NoConvergenceError
from .fibers import MpFamily
from .gridfn import GridFn, GridFn2D
from .operators import (
    _Stencil,
    _full_stencil,
    apply_fiber_operator,
    base_preimage_points,
    base_stencil,
    full_operator_column,
    iterate_cascade,
)
from .phi import DEFAULT_ANCHOR_Y, compute_phi
from .potential import TrigPotential


def fiber_integrate(pot: TrigPotential, family: MpFamily, x: BasePoint,
                    psi: GridFn, n: int,
                    anchor_y: float = DEFAULT_ANCHOR_Y) -> float:
    """Integral of psi against the depth-n fiber measure over x.

    Computed as the anchored ratio of the psi-cascade to the ones-cascade;
    psi == 1 gives exactly 1 for every n because the two cascades coincide
    bitwise.
    """
    num = iterate_cascade(pot, family, x, psi, n)
    den = iterate_cascade(pot, family, x, GridFn.ones(psi.n_nodes), n)
    ratio = num.interp(anchor_y) / den.interp(anchor_y)
    return math.exp(num.log_offset - den.log_offset) * ratio


@dataclass(frozen=True)
class FiberMeasure:
    """The depth-n fiber measure over x, kept as a functional.

    Never materialized as node weights: integrating psi is the anchored
    cascade ratio, exactly the construction behind the conformal family.
    """

    pot: TrigPotential
    family: MpFamily
    x: BasePoint
    n: int
    anchor_y: float = DEFAULT_ANCHOR_Y

    def integrate(self, psi: GridFn) -> float:
        return fiber_integrate(self.pot, self.family, self.x, psi, self.n,
                               self.anchor_y)


def eigen_equation_residual(pot: TrigPotential, family: MpFamily,
                            x: BasePoint, psi: GridFn, n: int,
                            anchor_y: float = DEFAULT_ANCHOR_Y,
                            phi_value: float | None = None,
                            phi_tol: float = 1e-10) -> float:
    """Gap between the two sides of the fiber eigen-equation at depth n.

    Left side: one transfer step of psi integrated against the depth-n
    measure over f(x).  Right side: e^Phi(x) times psi integrated at depth
    n+1 over x.  Both sides are computed independently; the theorem sends
    the gap to zero geometrically in n.
    """
    if x.capacity < n + 1:
        raise CapacityExhaustedError("residual at depth n needs capacity >= n+1")
    lifted = apply_fiber_operator(pot, family, x, psi)
    lhs = fiber_integrate(pot, family, x.forward(1), lifted, n, anchor_y)
    if phi_value is None:
        phi_value, _, _ = compute_phi(pot, family, x, tol=phi_tol,
                                      anchor_y=anchor_y,
                                      n_nodes=psi.n_nodes)
    rhs = math.exp(phi_value) * fiber_integrate(pot, family, x, psi, n + 1,
                                                anchor_y)
    return abs(lhs - rhs)


@dataclass
class RpfSolution:
    """Eigentriple of a discretized transfer operator.

    ``log_eigenvalue`` is the pressure estimate; ``eigenfunction`` is scaled
    so that its integral against the weights is 1; ``weights`` are
    nonnegative and sum to 1 (a quadrature rule for the eigenmeasure, not a
    pointwise object).
    """

    log_eigenvalue: float
    eigenfunction: GridFn | GridFn2D
    weights: np.ndarray
    residual: float
    iterations: int

    @property
    def mu_weights(self) -> np.ndarray:
        """Node weights of the equilibrium measure: eigenfunction times
        eigenmeasure (already normalized by the joint scaling)."""
        h = self.eigenfunction.values
        return self.weights * h.reshape(self.weights.shape)

    def to_json(self) -> dict:
        return {"log_eigenvalue": self.log_eigenvalue,
                "residual": self.residual, "iterations": self.iterations,
                "weights_shape": list(np.shape(self.weights))}


def _power_iterate(stencil: _Stencil, tol: float, max_iter: int):
    """Forward and adjoint power iteration sharing one incidence structure.

    Stops when both the log-eigenvalue change and the iterate's sup change
    are within tolerance; the eigenvalue alone can settle many iterations
    before the vector does.
    """
    v = np.ones(stencil.size)
    lam = 0.0
    log_lam_prev = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        w = stencil.apply(v)
        lam = float(np.max(w))
        w /= lam
        log_lam = math.log(lam)
        moved = float(np.max(np.abs(w - v)))
        v = w
        if abs(log_lam - log_lam_prev) <= tol and moved <= 10.0 * tol:
            break
        log_lam_prev = log_lam
    else:
        raise NoConvergenceError(
            f"forward power iteration did not settle in {max_iter} steps")

    u = np.full(stencil.size, 1.0 / stencil.size)
    log_adj_prev = math.inf
    for adj_iterations in range(1, max_iter + 1):
        w = stencil.apply_adjoint(u)
        total = float(np.sum(w))
        w /= total
        log_adj = math.log(total)
        moved = float(np.sum(np.abs(w - u)))
        u = w
        if abs(log_adj - log_adj_prev) <= tol and moved <= 10.0 * tol:
            break
        log_adj_prev = log_adj
    else:
        raise NoConvergenceError(
            f"adjoint power iteration did not settle in {max_iter} steps")

    # joint normalization: weights sum to 1 already; scale v so <v, u> = 1
    v = v / float(np.dot(u, v))
    res_fwd = float(np.max(np.abs(stencil.apply(v) - lam * v))) / lam / float(np.max(v))
    res_adj = float(np.sum(np.abs(stencil.apply_adjoint(u) - lam * u))) / lam
    return lam, v, u, max(res_fwd, res_adj), iterations + adj_iterations


def rpf_base_solve(phi_eval, n_x: int, tol: float = 1e-10,
                   max_iter: int = 10000, capacity: int = 64) -> RpfSolution:
    """Eigendata of the base operator discretized on n_x nodes.

    ``phi_eval`` maps a BasePoint to the transverse potential; it is called
    once per exact dyadic preimage node and the resulting stencil is power
    iterated forward (eigenfunction) and transposed (eigenmeasure weights).
    """
    points = base_preimage_points(n_x, capacity)
    phis = np.array([[phi_eval(p) for p in fam] for fam in points])
    stencil = base_stencil(phis, n_x)
    lam, v, u, residual, iterations = _power_iterate(stencil, tol, max_iter)
    return RpfSolution(log_eigenvalue=math.log(lam), eigenfunction=GridFn(v),
                       weights=u, residual=residual, iterations=iterations)


def rpf_full_solve(pot: TrigPotential, family: MpFamily, n_x: int, n_y: int,
                   tol: float = 1e-10, max_iter: int = 10000) -> RpfSolution:
    """Eigendata of the full operator on the n_x x n_y torus grid."""
    if n_x * n_y > 1 << 20:
        raise ValueError("torus grid capped at 2^20 nodes")
    stencil = _full_stencil(pot, family, n_x, n_y)
    lam, v, u, residual, iterations = _power_iterate(stencil, tol, max_iter)
    return RpfSolution(log_eigenvalue=math.log(lam),
                       eigenfunction=GridFn2D(v.reshape(n_x, n_y)),
                       weights=u.reshape(n_x, n_y), residual=residual,
                       iterations=iterations)


def intertwine_residual(pot: TrigPotential, family: MpFamily,
                        big_psi: GridFn2D, x_samples: list[BasePoint],
                        n: int, phi_eval,
                        anchor_y: float = DEFAULT_ANCHOR_Y) -> float:
    """Largest gap between the two routes around the intertwining square.

    Route one applies the full operator and integrates its fiber restriction
    over x; route two integrates the restrictions at both base preimages and
    sums them with e^Phi weights.
    """
    worst = 0.0
    for x in x_samples:
        column = full_operator_column(pot, family, x, big_psi)
        lhs = fiber_integrate(pot, family, x, column, n, anchor_y)
        rhs = 0.0
        for xbar in x.preimages():
            slice_fn = big_psi.slice_at(float(xbar))
            rhs += math.exp(phi_eval(xbar)) * fiber_integrate(
                pot, family, xbar, slice_fn, n, anchor_y)
        worst = max(worst, abs(lhs - rhs))
    return worst


def conditional_integrate(pot: TrigPotential, family: MpFamily, x: BasePoint,
                          big_psi: GridFn2D, full_sol: RpfSolution,
                          base_sol: RpfSolution, n: int,
                          anchor_y: float = DEFAULT_ANCHOR_Y) -> float:
    """Integral of psi(x, .) against the conditional measure over x.

    The conditional density w.r.t. the fiber measure is the full
    eigenfunction's slice divided by the base eigenfunction's value, so this
    evaluates (integral of psi * h against nu_x at depth n) / h_base(x).
    """
    if big_psi.shape[1] != full_sol.eigenfunction.shape[1]:
        raise ValueError("test function and eigenfunction need matching fiber grids")
    h_slice = full_sol.eigenfunction.slice_at(float(x))
    psi_slice = big_psi.slice_at(float(x))
    integrand = GridFn(psi_slice.values * h_slice.values,
                       psi_slice.log_offset + h_slice.log_offset)
    h_base = float(base_sol.eigenfunction.interp(float(x)))
    if h_base <= 0.0:
        raise AssertionError("base eigenfunction must be positive")
    return fiber_integrate(pot, family, x, integrand, n, anchor_y) / h_base


def disintegrate_integral(pot: TrigPotential, family: MpFamily,
                          big_psi: GridFn2D, full_sol: RpfSolution,
                          base_sol: RpfSolution, n: int,
                          capacity: int = 64,
                          anchor_y: float = DEFAULT_ANCHOR_Y) -> float:
    """Integral of psi d(mu) computed through the disintegration route:
    conditional fiber integrals weighted by the base equilibrium quadrature.
    """
    n_x = base_sol.eigenfunction.n_nodes
    mu_hat = base_sol.mu_weights
    total = 0.0
    for i in range(n_x):
        if mu_hat[i] == 0.0:
            continue
        x = BasePoint.from_fraction(i, n_x, capacity)
        total += mu_hat[i] * conditional_integrate(
            pot, family, x, big_psi, full_sol, base_sol, n, anchor_y)
    return total


def direct_integral(big_psi: GridFn2D, full_sol: RpfSolution) -> float:
    """Integral of psi d(mu) straight from the full solution's node weights."""
    return float(np.sum(full_sol.mu_weights * big_psi.values)
                 * math.exp(big_psi.log_offset))


def measure_continuity_probe(pot: TrigPotential, family: MpFamily,
                             psi: GridFn, x: BasePoint,
                             deltas: list[float], n: int,
                             anchor_y: float = DEFAULT_ANCHOR_Y) -> list[float]:
    """Fiber-integral gaps |nu_x(psi) - nu_x'(psi)| for x' = x + delta.

    Deltas must be dyadic so the perturbed points are exact; the gaps should
    shrink as delta does (weak-* continuity of the fiber measures).
    """
    base_val = fiber_integrate(pot, family, x, psi, n, anchor_y)
    out = []
    for delta in deltas:
        k = round(-math.log2(delta))
        if 2.0 ** -k != delta:
            raise ValueError(f"delta {delta} is not dyadic")
        x2 = x.add_dyadic(1, k)
        out.append(abs(base_val - fiber_integrate(pot, family, x2, psi, n,
                                                  anchor_y)))
    return out
