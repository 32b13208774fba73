"""Fiberwise, base and full transfer operators on grid functions.

Every application renormalizes its output and accumulates the scale factor in
log_offset, so n-fold cascades never overflow even though the raw iterates
grow like e^(n * pressure).
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .base import BasePoint
from .errors import CapacityExhaustedError, NonpositiveFunctionError
from .fibers import MpFamily, grid_preimages
from .gridfn import GridFn, GridFn2D
from .potential import TrigPotential


def apply_fiber_operator(pot: TrigPotential, family: MpFamily, x: BasePoint,
                         psi: GridFn, require_positive: bool = False) -> GridFn:
    """One fiberwise transfer step: sum e^phi(x, .) * psi over the
    g_x-preimages of every output node.

    The result lives on the fiber over f(x); psi is read at the preimages by
    periodic linear interpolation, which preserves positivity and
    monotonicity.
    """
    if x.capacity < 1:
        raise CapacityExhaustedError("one operator step needs capacity >= 1")
    if require_positive and np.any(psi.values <= 0.0):
        raise NonpositiveFunctionError("cone semantics need psi > 0 at all nodes")
    y1, y2 = grid_preimages(family, x, psi.n_nodes)
    out = (np.exp(pot(x, y1)) * psi.interp(y1)
           + np.exp(pot(x, y2)) * psi.interp(y2))
    return GridFn(out, psi.log_offset).renormalize()


def iterate_cascade(pot: TrigPotential, family: MpFamily, x: BasePoint,
                    psi: GridFn, n: int, require_positive: bool = False) -> GridFn:
    """n-fold cascade along the forward orbit of x (deepest operator first)."""
    if x.capacity < n:
        raise CapacityExhaustedError(f"cascade of depth {n} needs capacity >= {n}")
    out = psi.copy()
    for k in range(n):
        out = apply_fiber_operator(pot, family, x.forward(k), out,
                                   require_positive=require_positive)
    return out


class _Stencil:
    """Sparse incidence structure of a discretized transfer operator.

    Row i of (idx, wgt) lists the source nodes and interpolation-times-
    potential weights contributing to output node i.  Forward application is
    a gather; the adjoint is the exact transpose, applied as a scatter, so
    the two iterations are numerically consistent duals.
    """

    def __init__(self, idx: np.ndarray, wgt: np.ndarray, size: int):
        self.idx = idx
        self.wgt = wgt
        self.size = size

    def apply(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", self.wgt, v[self.idx])

    def apply_adjoint(self, u: np.ndarray) -> np.ndarray:
        contrib = self.wgt * u[:, None]
        return np.bincount(self.idx.ravel(), weights=contrib.ravel(),
                           minlength=self.size)


def _interp_stencil(points: np.ndarray, n: int):
    """Indices and weights of linear interpolation at the given circle points."""
    s = (points % 1.0) * n
    j = np.floor(s).astype(np.int64) % n
    frac = s - np.floor(s)
    return j, (j + 1) % n, 1.0 - frac, frac


@functools.lru_cache(maxsize=8)  # a 512x512 stencil holds ~70 MB
def _full_stencil(pot: TrigPotential, family: MpFamily,
                  n_x: int, n_y: int) -> _Stencil:
    """Incidence structure of the full operator on the n_x x n_y torus grid.

    Output node (i, j) receives, for each base preimage xb of i/n_x and each
    fiber branch preimage yb of j/n_y under g_xb, the weight
    e^phi(xb, yb) times the bilinear interpolation stencil at (xb, yb).
    """
    xs = np.arange(n_x, dtype=float) / n_x
    size = n_x * n_y
    idx_blocks = []
    wgt_blocks = []
    for b in (0.0, 1.0):
        xbar = (xs + b) / 2.0
        jx0, jx1, wx0, wx1 = _interp_stencil(xbar, n_x)
        for branch in (0, 1):
            yb = np.empty((n_x, n_y))
            for i, xv in enumerate(xbar):
                yb[i] = grid_preimages(family, xv, n_y)[branch]
            jy0, jy1, wy0, wy1 = _interp_stencil(yb, n_y)
            w_pot = np.exp(_phi_on_curve(pot, xbar, yb))
            for jx, wx in ((jx0, wx0), (jx1, wx1)):
                for jy, wy in ((jy0, wy0), (jy1, wy1)):
                    idx_blocks.append(jx[:, None] * n_y + jy)
                    wgt_blocks.append(w_pot * wx[:, None] * wy)
    idx = np.stack([blk.reshape(size) for blk in idx_blocks], axis=1)
    wgt = np.stack([blk.reshape(size) for blk in wgt_blocks], axis=1)
    return _Stencil(idx, wgt, size)


def _phi_on_curve(pot: TrigPotential, xbar: np.ndarray, yb: np.ndarray) -> np.ndarray:
    """phi evaluated at (xbar[i], yb[i, j]) without materializing a mesh."""
    out = np.full(yb.shape, pot.constant, dtype=float)
    for kx, ky, a in pot.terms:
        out += a * np.cos(2.0 * math.pi * (kx * xbar[:, None] + ky * yb))
    return out


def apply_full_operator(pot: TrigPotential, family: MpFamily,
                        big_psi: GridFn2D) -> GridFn2D:
    """Full transfer step: sum over all four skew-product preimages."""
    n_x, n_y = big_psi.shape
    stencil = _full_stencil(pot, family, n_x, n_y)
    out = stencil.apply(big_psi.values.reshape(-1)).reshape(n_x, n_y)
    return GridFn2D(out, big_psi.log_offset).renormalize()


def full_operator_column(pot: TrigPotential, family: MpFamily, x: BasePoint,
                         big_psi: GridFn2D) -> GridFn:
    """The full operator's output restricted to the fiber over an exact x.

    Uses the exact base preimages of x (digit-prepended), so no interpolation
    happens at x itself; Psi is still read by bilinear interpolation.
    """
    n_y = big_psi.shape[1]
    out = np.zeros(n_y)
    for xbar in x.preimages():
        y1, y2 = grid_preimages(family, xbar, n_y)
        for yb in (y1, y2):
            out += np.exp(pot(xbar, yb)) * big_psi.interp(float(xbar), yb)
    return GridFn(out, big_psi.log_offset)


@functools.lru_cache(maxsize=16)
def _base_stencil_geometry(n_x: int):
    """Interpolation stencils at the two preimage families of the base grid."""
    xs = np.arange(n_x, dtype=float) / n_x
    rows = []
    for b in (0.0, 1.0):
        xbar = (xs + b) / 2.0
        rows.append((xbar, _interp_stencil(xbar, n_x)))
    return rows


def base_stencil(phi_values, n_x: int) -> _Stencil:
    """Incidence structure of the base operator from tabulated phi values.

    ``phi_values`` is a (2, n_x) array: phi at the lower-branch preimage of
    each node, then at the upper-branch preimage.
    """
    phi_values = np.asarray(phi_values, dtype=float)
    if phi_values.shape != (2, n_x):
        raise ValueError("need phi at both preimages of every node")
    idx_blocks = []
    wgt_blocks = []
    for (xbar, (j0, j1, w0, w1)), phis in zip(_base_stencil_geometry(n_x),
                                              phi_values):
        w_pot = np.exp(phis)
        idx_blocks.extend([j0, j1])
        wgt_blocks.extend([w_pot * w0, w_pot * w1])
    idx = np.stack(idx_blocks, axis=1)
    wgt = np.stack(wgt_blocks, axis=1)
    return _Stencil(idx, wgt, n_x)


def base_preimage_points(n_x: int, capacity: int) -> list[list[BasePoint]]:
    """Exact BasePoints for both preimage families of the base grid nodes.

    Grid nodes are i/n_x (n_x a power of two), so every preimage
    (i/n_x + b)/2 is a dyadic rational with an exact digit expansion.
    """
    if n_x & (n_x - 1):
        raise ValueError("base grid size must be a power of two")
    out = []
    for b in (0, 1):
        fam = []
        for i in range(n_x):
            num = i + b * n_x  # (i/n_x + b)/2 = num / (2 n_x)
            fam.append(BasePoint.from_fraction(num, 2 * n_x, capacity))
        out.append(fam)
    return out


def apply_base_operator(phi_eval, xi: GridFn, capacity: int = 64) -> GridFn:
    """Base transfer step: sum e^Phi at both doubling preimages of each node.

    ``phi_eval`` maps a BasePoint to the transverse potential value; it is
    called at the 2N exact dyadic preimage points of the grid.
    """
    n_x = xi.n_nodes
    points = base_preimage_points(n_x, capacity)
    phis = np.array([[phi_eval(p) for p in fam] for fam in points])
    stencil = base_stencil(phis, n_x)
    out = stencil.apply(xi.values)
    return GridFn(out, xi.log_offset).renormalize()
