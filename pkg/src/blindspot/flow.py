"""Dense Horn-Schunck optical flow.

The solver minimises the discrete form of

    E(u, v) = sum (Ix*u + Iy*v + It)**2 + alpha**2 * (|grad u|**2 + |grad v|**2)

with the classic Jacobi iteration: each step replaces (u, v) by its weighted
neighbourhood mean and then projects it toward the brightness-constancy
line of the pixel.  Every pixel is updated from the previous iterate, so the
result does not depend on traversal order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, ShapeMismatchError
from .frames import Frame

# 1/6 on the axial neighbours, 1/12 on the diagonals
AVERAGING_KERNEL = np.array(
    [[1 / 12, 1 / 6, 1 / 12], [1 / 6, 0.0, 1 / 6], [1 / 12, 1 / 6, 1 / 12]]
)


@dataclass(frozen=True)
class SolverParams:
    alpha: float = 1.0
    max_iters: int = 100
    epsilon: float = 1e-4

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass(frozen=True, eq=False)
class Derivatives:
    ix: np.ndarray
    iy: np.ndarray
    it: np.ndarray

    @property
    def shape(self):
        return self.ix.shape


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel displacement in pixels/frame, indexed ``u[y, x]``."""

    u: np.ndarray
    v: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.shape != v.shape or u.ndim != 2:
            raise ShapeMismatchError(f"u {u.shape} and v {v.shape} must be equal 2-D grids")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DegenerateInputError("flow field contains non-finite values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def shape(self):
        return self.u.shape

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    def __eq__(self, other):
        if not isinstance(other, FlowField):
            return NotImplemented
        return np.array_equal(self.u, other.u) and np.array_equal(self.v, other.v)

    __hash__ = None


def _check_pair(f1: Frame, f2: Frame):
    if f1.shape != f2.shape:
        raise ShapeMismatchError(f"frame sizes differ: {f1.shape} vs {f2.shape}")


def estimate_derivatives(f1: Frame, f2: Frame) -> Derivatives:
    """Horn-Schunck cube derivatives.

    Each derivative averages the four first differences along its axis that
    lie in the 2x2x2 cube spanned by pixel (x, y), its right/lower neighbours
    and both frames.  The last row and column reuse their edge values.
    """
    _check_pair(f1, f2)
    a = np.pad(f1.pixels, ((0, 1), (0, 1)), mode="edge")
    b = np.pad(f2.pixels, ((0, 1), (0, 1)), mode="edge")

    def ddx(p):
        return p[:-1, 1:] - p[:-1, :-1] + p[1:, 1:] - p[1:, :-1]

    def ddy(p):
        return p[1:, :-1] - p[:-1, :-1] + p[1:, 1:] - p[:-1, 1:]

    d = b - a
    ix = (ddx(a) + ddx(b)) / 4.0
    iy = (ddy(a) + ddy(b)) / 4.0
    it = (d[:-1, :-1] + d[1:, :-1] + d[:-1, 1:] + d[1:, 1:]) / 4.0
    return Derivatives(ix, iy, it)


def local_mean(grid: np.ndarray) -> np.ndarray:
    return ndimage.correlate(grid, AVERAGING_KERNEL, mode="nearest")


@numba.njit(cache=True)
def _jacobi(ix, iy, it, alpha2, max_iters, epsilon):
    h, w = ix.shape
    denom = alpha2 + ix * ix + iy * iy
    gx = ix / denom
    gy = iy / denom
    # one-pixel halo holds the replicated edge values
    u = np.zeros((h + 2, w + 2))
    v = np.zeros((h + 2, w + 2))
    un = np.zeros((h + 2, w + 2))
    vn = np.zeros((h + 2, w + 2))
    axial = 1.0 / 6.0
    diag = 1.0 / 12.0
    n = 0
    step = 0.0
    for n in range(1, max_iters + 1):
        total = 0.0
        for y in range(1, h + 1):
            for x in range(1, w + 1):
                ub = (u[y - 1, x] + u[y + 1, x] + u[y, x - 1] + u[y, x + 1]) * axial + (
                    u[y - 1, x - 1] + u[y - 1, x + 1] + u[y + 1, x - 1] + u[y + 1, x + 1]
                ) * diag
                vb = (v[y - 1, x] + v[y + 1, x] + v[y, x - 1] + v[y, x + 1]) * axial + (
                    v[y - 1, x - 1] + v[y - 1, x + 1] + v[y + 1, x - 1] + v[y + 1, x + 1]
                ) * diag
                r = ix[y - 1, x - 1] * ub + iy[y - 1, x - 1] * vb + it[y - 1, x - 1]
                a = ub - gx[y - 1, x - 1] * r
                b = vb - gy[y - 1, x - 1] * r
                du = a - u[y, x]
                dv = b - v[y, x]
                total += np.sqrt(du * du + dv * dv)
                un[y, x] = a
                vn[y, x] = b
        for g in (un, vn):
            g[0, :] = g[1, :]
            g[h + 1, :] = g[h, :]
            g[:, 0] = g[:, 1]
            g[:, w + 1] = g[:, w]
        u, un = un, u
        v, vn = vn, v
        step = total / (h * w)
        if not np.isfinite(step) or step < epsilon:
            break
    return u[1 : h + 1, 1 : w + 1].copy(), v[1 : h + 1, 1 : w + 1].copy(), n, step


def solve_derivatives(d: Derivatives, params: SolverParams = SolverParams()) -> FlowField:
    """Jacobi iteration from the zero field.

    Stops after ``max_iters`` steps or once the mean per-pixel update
    magnitude drops below ``epsilon``.
    """
    u, v, n, step = _jacobi(
        np.ascontiguousarray(d.ix, dtype=np.float64),
        np.ascontiguousarray(d.iy, dtype=np.float64),
        np.ascontiguousarray(d.it, dtype=np.float64),
        float(params.alpha) ** 2,
        int(params.max_iters),
        float(params.epsilon),
    )
    if not np.isfinite(step):
        raise DegenerateInputError(f"non-finite update at iteration {n}")
    return FlowField(u, v, iterations=n)


def solve_horn_schunck(f1: Frame, f2: Frame, params: SolverParams = SolverParams()) -> FlowField:
    return solve_derivatives(estimate_derivatives(f1, f2), params)


def _forward_diff(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = np.zeros_like(grid)
    gy = np.zeros_like(grid)
    gx[:, :-1] = grid[:, 1:] - grid[:, :-1]
    gy[:-1, :] = grid[1:, :] - grid[:-1, :]
    return gx, gy


def flow_energy(flow: FlowField, d: Derivatives, alpha: float) -> float:
    """Discrete energy with forward-difference gradients (zero at the far edges)."""
    if flow.shape != d.shape:
        raise ShapeMismatchError(f"flow {flow.shape} vs derivatives {d.shape}")
    data = (d.ix * flow.u + d.iy * flow.v + d.it) ** 2
    ux, uy = _forward_diff(flow.u)
    vx, vy = _forward_diff(flow.v)
    smooth = ux**2 + uy**2 + vx**2 + vy**2
    return float(np.sum(data) + alpha**2 * np.sum(smooth))


# --------------------------------------------------------------------------
# debug dump: <i4 width, <i4 height, then u and v as <f4 row-major grids
# --------------------------------------------------------------------------


def dump_flow(flow: FlowField) -> bytes:
    head = struct.pack("<ii", flow.width, flow.height)
    return head + flow.u.astype("<f4").tobytes() + flow.v.astype("<f4").tobytes()


def load_flow_dump(data: bytes) -> FlowField:
    if len(data) < 8:
        raise DegenerateInputError("flow dump too short")
    w, h = struct.unpack("<ii", data[:8])
    n = w * h
    if w < 0 or h < 0 or len(data) - 8 != 8 * n:
        raise DegenerateInputError(f"flow dump body is {len(data) - 8} bytes, expected {8 * n} for {w}x{h}")
    body = np.frombuffer(data[8:], dtype="<f4")
    return FlowField(body[:n].reshape(h, w).astype(np.float64), body[n:].reshape(h, w).astype(np.float64))
