"""Sampled periodic functions with a log-scale offset.

A GridFn represents e^log_offset * interp(values) on the fiber circle, with
nodes at j/N.  Renormalizing after every operator application keeps the
stored values at unit sup norm while the operator's exponential growth
accumulates in log_offset.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

MIN_NODES = 16


def _check_nodes(n: int) -> None:
    if n < MIN_NODES or (n & (n - 1)) != 0:
        raise ValueError(f"grid size must be a power of two >= {MIN_NODES}, got {n}")


@dataclass
class GridFn:
    """N samples on the circle plus a log-scale factor."""

    values: np.ndarray
    log_offset: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        _check_nodes(self.values.size)

    @property
    def n_nodes(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes, dtype=float) / self.n_nodes

    @classmethod
    def ones(cls, n: int) -> "GridFn":
        _check_nodes(n)
        return cls(np.ones(n))

    @classmethod
    def from_callable(cls, f, n: int) -> "GridFn":
        _check_nodes(n)
        return cls(np.asarray(f(np.arange(n, dtype=float) / n), dtype=float))

    def interp(self, t):
        """Periodic linear interpolation at circle point(s) t."""
        return periodic_interp(self.values, t)

    def renormalize(self) -> "GridFn":
        """Scale stored values to unit max-abs, folding the factor into log_offset."""
        m = float(np.max(np.abs(self.values)))
        if m == 0.0:
            return self
        self.values /= m
        self.log_offset += math.log(m)
        return self

    def copy(self) -> "GridFn":
        return GridFn(self.values.copy(), self.log_offset)

    def pair_delta(self, y: float) -> float:
        """log <f, delta_y>; requires the interpolated value to be positive."""
        v = float(self.interp(y))
        if v <= 0.0:
            raise ValueError("log pairing needs a positive value at the anchor")
        return self.log_offset + math.log(v)

    def pair_uniform(self) -> float:
        """log <f, uniform>, the uniform measure being the node average."""
        v = float(np.mean(self.values))
        if v <= 0.0:
            raise ValueError("log pairing needs a positive node average")
        return self.log_offset + math.log(v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# log_offset,{self.log_offset:.15g}\n")
        buf.write("node,value\n")
        for t, v in zip(self.nodes, self.values):
            buf.write(f"{t:.15g},{v:.15g}\n")
        return buf.getvalue()


@dataclass
class GridFn2D:
    """N_X x N_Y samples on the torus plus a log-scale factor."""

    values: np.ndarray
    log_offset: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("GridFn2D needs a 2-d sample array")
        _check_nodes(self.values.shape[0])
        _check_nodes(self.values.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def ones(cls, n_x: int, n_y: int) -> "GridFn2D":
        return cls(np.ones((n_x, n_y)))

    @classmethod
    def from_callable(cls, f, n_x: int, n_y: int) -> "GridFn2D":
        xs = np.arange(n_x, dtype=float) / n_x
        ys = np.arange(n_y, dtype=float) / n_y
        return cls(np.asarray(f(xs[:, None], ys[None, :]), dtype=float))

    def interp(self, x, y):
        """Periodic bilinear interpolation at torus point(s) (x, y)."""
        return periodic_interp_2d(self.values, x, y)

    def slice_at(self, x: float) -> GridFn:
        """The fiber restriction Psi(x, .) as a GridFn (interpolated in x)."""
        n_x, n_y = self.values.shape
        s = (np.asarray(x, dtype=float) % 1.0) * n_x
        j = int(s) % n_x
        frac = float(s - int(s))
        row = (1.0 - frac) * self.values[j] + frac * self.values[(j + 1) % n_x]
        return GridFn(row, self.log_offset)

    def renormalize(self) -> "GridFn2D":
        m = float(np.max(np.abs(self.values)))
        if m == 0.0:
            return self
        self.values /= m
        self.log_offset += math.log(m)
        return self

    def copy(self) -> "GridFn2D":
        return GridFn2D(self.values.copy(), self.log_offset)


def periodic_interp(values: np.ndarray, t):
    """Linear interpolation of node samples (nodes j/N) at circle points t."""
    n = values.size
    s = (np.asarray(t, dtype=float) % 1.0) * n
    j = np.floor(s).astype(int) % n
    frac = s - np.floor(s)
    out = (1.0 - frac) * values[j] + frac * values[(j + 1) % n]
    if out.ndim == 0:
        return float(out)
    return out


def periodic_interp_2d(values: np.ndarray, x, y):
    """Bilinear interpolation on the torus grid (nodes (i/NX, j/NY))."""
    n_x, n_y = values.shape
    sx = (np.asarray(x, dtype=float) % 1.0) * n_x
    sy = (np.asarray(y, dtype=float) % 1.0) * n_y
    ix = np.floor(sx).astype(int) % n_x
    iy = np.floor(sy).astype(int) % n_y
    fx = sx - np.floor(sx)
    fy = sy - np.floor(sy)
    ixp = (ix + 1) % n_x
    iyp = (iy + 1) % n_y
    out = ((1.0 - fx) * (1.0 - fy) * values[ix, iy]
           + fx * (1.0 - fy) * values[ixp, iy]
           + (1.0 - fx) * fy * values[ix, iyp]
           + fx * fy * values[ixp, iyp])
    if out.ndim == 0:
        return float(out)
    return out
