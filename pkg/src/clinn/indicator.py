"""Cell-based shock flagging.

A fixed tiny perceptron decides per cell whether the local characteristic
speeds compress hard enough, relative to the cell size, to call the cell
part of a discontinuity.  Its weights are constants, not trained: the unit
fires when the width-averaged speed left of the cell exceeds the one on
the right by a margin that scales with the largest neighboring cell width.
Only compression trips it, so rarefaction edges stay quiet.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IndicatorParams:
    w: float = 10.0    # gain on the left-right speed difference
    m: float = -12.0   # penalty per unit cell width
    c: float = -1.0    # base offset

DEFAULT_PARAMS = IndicatorParams()


@dataclass(frozen=True)
class Mesh1D:
    """Cell centers and widths along one axis."""

    centers: np.ndarray
    widths: np.ndarray

    @property
    def n(self):
        return self.centers.size

    @classmethod
    def from_points(cls, xs):
        """Cells centered at the given points, edges at midpoints.

        End cells take the width implied by their single neighbor.
        """
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 1 or xs.size < 2:
            raise ValueError("need a 1D array of at least two points")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("points must be strictly increasing")
        edges = np.empty(xs.size + 1)
        edges[1:-1] = 0.5 * (xs[:-1] + xs[1:])
        edges[0] = xs[0] - 0.5 * (xs[1] - xs[0])
        edges[-1] = xs[-1] + 0.5 * (xs[-1] - xs[-2])
        return cls(centers=xs.copy(), widths=np.diff(edges))


@dataclass
class FlagGrid:
    out: np.ndarray    # unit activations, same shape as the input values
    flags: np.ndarray  # out > 0.5


def an_out(lam_left, lam_right, dx, params=DEFAULT_PARAMS):
    """Activation for given side-averaged speeds and cell width."""
    z = params.w * (np.asarray(lam_left) - np.asarray(lam_right)) \
        + params.m * np.asarray(dx) + params.c
    return 1.0 / (1.0 + np.exp(-z))


def _axis_pass(lam_bar, widths, params):
    """Activations along the last axis; ends copy the nearest interior cell."""
    n = lam_bar.shape[-1]
    if n < 3:
        raise ValueError("indicator needs at least 3 cells along the axis")
    h0, h1, h2 = widths[:-2], widths[1:-1], widths[2:]
    lb0, lb1, lb2 = lam_bar[..., :-2], lam_bar[..., 1:-1], lam_bar[..., 2:]
    lam_left = (h0 * lb0 + h1 * lb1) / (h0 + h1)
    lam_right = (h1 * lb1 + h2 * lb2) / (h1 + h2)
    dx = np.maximum(np.maximum(h0, h1), h2)
    inner = an_out(lam_left, lam_right, dx, params)
    out = np.empty_like(lam_bar)
    out[..., 1:-1] = inner
    out[..., 0] = inner[..., 0]
    out[..., -1] = inner[..., -1]
    return out


def detect_1d(lam, mesh, u, params=DEFAULT_PARAMS):
    """Flag cells of a 1D profile.  `u` may be batched as (..., n)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != mesh.n:
        raise ValueError(
            f"profile has {u.shape[-1]} cells, mesh has {mesh.n}")
    out = _axis_pass(np.asarray(lam(u), dtype=np.float64), mesh.widths, params)
    return FlagGrid(out=out, flags=out > 0.5)


def detect_2d(lams, mesh_x, mesh_y, u, params=DEFAULT_PARAMS):
    """Flag cells of a 2D profile u[..., iy, ix]: max of an x and a y pass."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != mesh_x.n or u.shape[-2] != mesh_y.n:
        raise ValueError(
            f"profile shape {u.shape[-2:]} does not match meshes "
            f"({mesh_y.n}, {mesh_x.n})")
    out_x = _axis_pass(np.asarray(lams[0](u), dtype=np.float64),
                       mesh_x.widths, params)
    lam_y = np.asarray(lams[1](u), dtype=np.float64)
    out_y = _axis_pass(np.swapaxes(lam_y, -1, -2), mesh_y.widths, params)
    out = np.maximum(out_x, np.swapaxes(out_y, -1, -2))
    return FlagGrid(out=out, flags=out > 0.5)
