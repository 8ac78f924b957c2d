"""From indicator flags to shock geometry.

Flagged cells on the training grid become the discontinuity point set;
per time slice the flags are clustered, cluster centroids are linked
across adjacent slices into tracks, and each track carries a
piecewise-linear trajectory with finite-difference speed estimates.
The jump-condition loss samples the prediction a small offset to each
side of a track.  In 2D there is no curve fitting; each flagged cell
gets a local front normal and a normal-displacement speed instead.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SideSample:
    left: tuple    # (x - h, t) after clipping
    right: tuple   # (x + h, t) after clipping
    h: float


@dataclass
class ShockCurve:
    times: np.ndarray     # (m,) strictly increasing slice times
    centers: np.ndarray   # (m,) cluster centroid per slice
    speeds: np.ndarray    # (m,) finite-difference slope of the path
    members: list         # per sample: row indices of the cluster's cells

    @property
    def n_samples(self):
        return self.times.size

    @property
    def usable(self):
        # one sample gives no slope, so such a track cannot feed the
        # jump-condition loss
        return self.times.size >= 2

    def gamma(self, t):
        return np.interp(np.asarray(t, dtype=np.float64),
                         self.times, self.centers)

    def speed_at(self, t):
        return np.interp(np.asarray(t, dtype=np.float64),
                         self.times, self.speeds)


@dataclass(frozen=True)
class Rh2DTarget:
    ix: int
    iy: int
    x: float
    y: float
    normal: tuple   # unit vector (nx, ny)
    speed: float


def build_pd(grid, flags):
    """Row indices of flagged cells; row order matches the grid points."""
    flags = np.asarray(flags, dtype=bool)
    if flags.size != grid.n_points:
        raise ValueError(
            f"flag array covers {flags.size} cells, grid has {grid.n_points}")
    return np.flatnonzero(flags.ravel()).astype(np.int64)


def fit_curves(grid, pd_rows, gap_cells=3, link_cells=5):
    """Link per-slice flag clusters into shock tracks.

    Clustering and linking work on x coordinates with thresholds
    measured in cell widths: a gap wider than `gap_cells` cells splits
    a slice into separate clusters, and a cluster attaches to the
    nearest track extended at the previous slice if that track's last
    centroid lies within `link_cells` cells, else it starts a new
    track.  Clusters are visited left to right and tracks in creation
    order, so the outcome is deterministic including ties.
    """
    if grid.d != 1:
        raise ValueError("curve fitting is 1D machinery")
    pd_rows = np.asarray(pd_rows, dtype=np.int64)
    if pd_rows.size == 0:
        return []
    nx = grid.nx
    dx = grid.dx[0]
    gap = gap_cells * dx + 1e-12
    slice_of = pd_rows // nx

    tracks = []      # dicts: times, centers, members, last_slice
    for it in range(grid.nt):
        rows = pd_rows[slice_of == it]
        if rows.size == 0:
            continue
        x_pd = grid.points[rows, 0]
        order = np.argsort(x_pd, kind="stable")
        x_pd = x_pd[order]
        rows = rows[order]
        t_slice = float(grid.points[it * nx, -1])
        cuts = np.flatnonzero(np.diff(x_pd) > gap) + 1
        open_tracks = [tr for tr in tracks if tr["last_slice"] == it - 1]
        taken = [False] * len(open_tracks)
        for run, run_rows in zip(np.split(x_pd, cuts), np.split(rows, cuts)):
            centroid = float(np.mean(run))
            best = -1
            best_d = link_cells * dx + 1e-12
            for k, tr in enumerate(open_tracks):
                if taken[k]:
                    continue
                d = abs(centroid - tr["centers"][-1])
                if d < best_d:
                    best, best_d = k, d
            if best >= 0:
                tr = open_tracks[best]
                taken[best] = True
            else:
                tr = {"times": [], "centers": [], "members": [],
                      "last_slice": -2}
                tracks.append(tr)
            tr["times"].append(t_slice)
            tr["centers"].append(centroid)
            tr["members"].append(run_rows)
            tr["last_slice"] = it

    out = []
    for tr in tracks:
        times = np.asarray(tr["times"])
        centers = np.asarray(tr["centers"])
        m = times.size
        speeds = np.zeros(m)
        if m >= 2:
            speeds[0] = (centers[1] - centers[0]) / (times[1] - times[0])
            speeds[-1] = (centers[-1] - centers[-2]) / (times[-1] - times[-2])
            if m > 2:
                speeds[1:-1] = (centers[2:] - centers[:-2]) \
                    / (times[2:] - times[:-2])
        out.append(ShockCurve(times=times, centers=centers, speeds=speeds,
                              members=tr["members"]))
    return out


def side_samples(curve, t, h, lo, hi):
    """Probe points just left and right of the track at time t."""
    if h <= 0:
        raise ValueError("side offset must be positive")
    g = float(curve.gamma(t))
    xl = min(max(g - h, lo), hi)
    xr = min(max(g + h, lo), hi)
    if not xl < xr:
        raise ValueError(
            f"side samples at t={t} collapse to one point after clipping")
    return SideSample(left=(xl, float(t)), right=(xr, float(t)), h=h)


def rh_target_2d(flags_now, flags_next, mesh_x, mesh_y, dt, window=2):
    """Per-cell front normals and speeds from two adjacent 2D flag slices.

    The front direction at a flagged cell is the principal axis of the
    flagged cells in the surrounding (2*window+1)^2 patch; the normal is
    the perpendicular.  Speed is the median displacement toward the next
    slice's flagged cells, projected on the normal, divided by dt.
    Cells with fewer than 2 flagged neighbors, or with no successor
    cells in the patch, are skipped.
    """
    flags_now = np.asarray(flags_now, dtype=bool)
    flags_next = np.asarray(flags_next, dtype=bool)
    if flags_now.shape != (mesh_y.n, mesh_x.n) or flags_next.shape != flags_now.shape:
        raise ValueError("flag slices must both be shaped (ny, nx)")
    if dt <= 0:
        raise ValueError("dt must be positive")
    cx, cy = mesh_x.centers, mesh_y.centers
    targets = []
    for iy, ix in zip(*np.nonzero(flags_now)):
        y0, y1 = max(iy - window, 0), min(iy + window + 1, mesh_y.n)
        x0, x1 = max(ix - window, 0), min(ix + window + 1, mesh_x.n)
        wy, wx = np.nonzero(flags_now[y0:y1, x0:x1])
        if wy.size - 1 < 2:    # the cell itself is always in its patch
            continue
        px = cx[x0 + wx]
        py = cy[y0 + wy]
        dxs = px - px.mean()
        dys = py - py.mean()
        cov = np.array([[dxs @ dxs, dxs @ dys], [dxs @ dys, dys @ dys]])
        _, vecs = np.linalg.eigh(cov)
        n = vecs[:, 0]   # least-variance direction: normal to the front
        ny_, nx_ = np.nonzero(flags_next[y0:y1, x0:x1])
        if nx_.size == 0:
            continue
        disp = np.column_stack([cx[x0 + nx_] - cx[ix], cy[y0 + ny_] - cy[iy]])
        s = float(np.median(disp @ n)) / dt
        targets.append(Rh2DTarget(ix=int(ix), iy=int(iy),
                                  x=float(cx[ix]), y=float(cy[iy]),
                                  normal=(float(n[0]), float(n[1])),
                                  speed=s))
    return targets
