"""Evaluation metrics and static report artifacts.

Metrics are plain grid MSEs: one over the whole evaluation grid and four
taken at the times T/8, 3T/8, 5T/8, 7T/8.  Those times rarely land on a
grid line, so each slice snaps to the nearest grid time; the snapped
values are recorded in the metrics JSON and in the profile plot titles.

Artifacts are deliberately dependency-free: predictions go to CSV, plots
to hand-written SVG.  Both are deterministic byte-for-byte for fixed
inputs so regression tests can diff them directly.

Heatmaps cover the (x, t) plane for 1D cases.  A 2D solution has no
single plane to show, so its heatmaps take the final-time slice over
(x, y) and its profiles run along the main diagonal x = y.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from . import network, oracle

SLICE_FRACTIONS = (0.125, 0.375, 0.625, 0.875)

# heatmap cells are block-averaged down to at most this many columns/rows
HEATMAP_MAX_COLS = 200
HEATMAP_MAX_ROWS = 100


# -- metrics ---------------------------------------------------------------

def mse(pred, exact):
    """Mean squared difference between two congruent grids."""
    pred = np.asarray(pred, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    if pred.shape != exact.shape:
        raise ValueError(
            f"grid shapes differ: {pred.shape} vs {exact.shape}")
    return float(np.mean((pred - exact) ** 2))


def snap_time(times, t_slice):
    """Index and value of the grid time nearest t_slice (ties go low)."""
    times = np.asarray(times, dtype=np.float64)
    it = int(np.argmin(np.abs(times - t_slice)))
    return it, float(times[it])


def mse_at_time(pred, exact, times, t_slice):
    """MSE restricted to the grid time nearest t_slice.

    `pred` and `exact` are time-major grids, shape (nt, ...); `times`
    lists the grid times.  Returns (mse, snapped_time).
    """
    pred = np.asarray(pred, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    if pred.shape != exact.shape:
        raise ValueError(
            f"grid shapes differ: {pred.shape} vs {exact.shape}")
    if len(times) != pred.shape[0]:
        raise ValueError(
            f"{len(times)} times for time-major axis of {pred.shape[0]}")
    it, t_snap = snap_time(times, t_slice)
    return float(np.mean((pred[it] - exact[it]) ** 2)), t_snap


def improvement_ratio(mse_method, mse_pinn):
    """Percent reduction of mse_method relative to the plain baseline.

    Negative when the method is worse.  The baseline must be nonzero.
    """
    if mse_pinn == 0.0:
        raise ValueError("baseline MSE is zero; ratio undefined")
    return (1.0 - mse_method / mse_pinn) * 100.0


@dataclass(frozen=True)
class MetricsRecord:
    """Grid-MSE summary of one trained model on one evaluation grid."""

    case: str
    method: str
    mse_all: float
    mse_slices: tuple       # four floats, at the snapped slice times
    slice_times: tuple      # the snapped times themselves
    grid_shape: tuple       # (nt, nx) or (nt, nx, nx)

    def __post_init__(self):
        if self.mse_all < 0 or any(v < 0 for v in self.mse_slices):
            raise ValueError("MSE values must be non-negative")
        if len(self.mse_slices) != 4 or len(self.slice_times) != 4:
            raise ValueError("expected exactly four slice entries")

    def to_dict(self, mse_pinn=None):
        out = {
            "case": self.case,
            "method": self.method,
            "mse_all": self.mse_all,
            "mse_t1": self.mse_slices[0],
            "mse_t2": self.mse_slices[1],
            "mse_t3": self.mse_slices[2],
            "mse_t4": self.mse_slices[3],
            "slice_times": list(self.slice_times),
            "grid_shape": list(self.grid_shape),
        }
        if mse_pinn is not None:
            out["improvement_vs_pinn"] = improvement_ratio(
                self.mse_all, mse_pinn)
        return out


def grid_shape(grid):
    if grid.d == 1:
        return (grid.nt, grid.nx)
    return (grid.nt, grid.nx, grid.nx)


def grid_times(spec, grid):
    return np.linspace(0.0, spec.T, grid.nt)


def compute_metrics(spec, method, grid, u_pred, u_exact=None):
    """Build a MetricsRecord from a prediction over a collocation grid."""
    shape = grid_shape(grid)
    u_pred = np.asarray(u_pred, dtype=np.float64).reshape(shape)
    if u_exact is None:
        u_exact = oracle.exact(spec, grid.points)
    u_exact = np.asarray(u_exact, dtype=np.float64).reshape(shape)
    times = grid_times(spec, grid)
    slices = []
    snapped = []
    for frac in SLICE_FRACTIONS:
        v, t_snap = mse_at_time(u_pred, u_exact, times, frac * spec.T)
        slices.append(v)
        snapped.append(t_snap)
    return MetricsRecord(
        case=spec.id, method=method,
        mse_all=mse(u_pred, u_exact),
        mse_slices=tuple(slices), slice_times=tuple(snapped),
        grid_shape=shape)


def write_metrics(record, path, mse_pinn=None):
    """Write the record as JSON with sorted keys; returns the path."""
    payload = json.dumps(record.to_dict(mse_pinn=mse_pinn),
                         sort_keys=True, indent=2)
    with open(path, "w") as fh:
        fh.write(payload + "\n")
    return path


# -- CSV export -------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def prediction_csv(spec, grid, u_pred, u_exact):
    """CSV text of (t, x[, y], u_pred, u_exact, abs_err), one row per node."""
    pts = grid.points
    up = np.asarray(u_pred, dtype=np.float64).ravel()
    ue = np.asarray(u_exact, dtype=np.float64).ravel()
    err = np.abs(up - ue)
    if grid.d == 1:
        lines = ["t,x,u_pred,u_exact,abs_err"]
        for i in range(pts.shape[0]):
            lines.append(",".join((
                _fmt(pts[i, 1]), _fmt(pts[i, 0]),
                _fmt(up[i]), _fmt(ue[i]), _fmt(err[i]))))
    else:
        lines = ["t,x,y,u_pred,u_exact,abs_err"]
        for i in range(pts.shape[0]):
            lines.append(",".join((
                _fmt(pts[i, 2]), _fmt(pts[i, 0]), _fmt(pts[i, 1]),
                _fmt(up[i]), _fmt(ue[i]), _fmt(err[i]))))
    return "\n".join(lines) + "\n"


# -- SVG plumbing -----------------------------------------------------------

# dark-to-bright perceptual ramp, interpolated linearly between anchors
_RAMP = np.array([
    (0.267, 0.005, 0.329), (0.283, 0.141, 0.458), (0.254, 0.265, 0.530),
    (0.207, 0.372, 0.553), (0.164, 0.471, 0.558), (0.128, 0.567, 0.551),
    (0.135, 0.659, 0.518), (0.267, 0.749, 0.441), (0.478, 0.821, 0.318),
    (0.741, 0.873, 0.150), (0.993, 0.906, 0.144),
])


def _color(v):
    """Map v in [0, 1] to a hex color on the ramp."""
    v = min(max(float(v), 0.0), 1.0)
    pos = v * (len(_RAMP) - 1)
    i = min(int(pos), len(_RAMP) - 2)
    w = pos - i
    rgb = (1.0 - w) * _RAMP[i] + w * _RAMP[i + 1]
    return "#%02x%02x%02x" % tuple(int(round(255 * c)) for c in rgb)


def _block_mean(a, max_rows, max_cols):
    """Average rectangular blocks so the result fits max_rows x max_cols."""
    a = np.asarray(a, dtype=np.float64)
    nr, nc = a.shape
    br = -(-nr // max_rows)  # ceil
    bc = -(-nc // max_cols)
    if br == 1 and bc == 1:
        return a
    row_edges = np.arange(0, nr, br)
    col_edges = np.arange(0, nc, bc)
    summed = np.add.reduceat(np.add.reduceat(a, row_edges, axis=0),
                             col_edges, axis=1)
    row_n = np.diff(np.append(row_edges, nr))
    col_n = np.diff(np.append(col_edges, nc))
    return summed / np.outer(row_n, col_n)


def _num(x):
    """Compact deterministic number formatting for SVG attributes."""
    s = f"{float(x):.2f}"
    return s.rstrip("0").rstrip(".") if "." in s else s


def _svg_heatmap(data, vmin, vmax, title, xlabel, ylabel,
                 extent):
    """Heatmap SVG for a (rows, cols) array, row 0 drawn at the bottom.

    `extent` is (x0, x1, y0, y1) in data coordinates for the axis labels.
    Horizontal runs of equal color are merged into single rects to keep
    file sizes reasonable.
    """
    data = _block_mean(data, HEATMAP_MAX_ROWS, HEATMAP_MAX_COLS)
    rows, cols = data.shape
    span = vmax - vmin
    if span <= 0:
        span = 1.0
    norm = (data - vmin) / span

    ml, mr, mt, mb = 58.0, 76.0, 30.0, 42.0
    pw, ph = 520.0, 300.0
    width = ml + pw + mr
    height = mt + ph + mb
    cw = pw / cols
    ch = ph / rows

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}"'
        f' height="{_num(height)}" viewBox="0 0 {_num(width)} {_num(height)}">',
        f'<title>{title}</title>',
        f'<rect width="{_num(width)}" height="{_num(height)}" fill="white"/>',
        f'<text x="{_num(ml + pw / 2)}" y="19" font-family="sans-serif"'
        f' font-size="13" text-anchor="middle">{title}</text>',
    ]
    for r in range(rows):
        y = mt + ph - (r + 1) * ch
        row = norm[r]
        c = 0
        while c < cols:
            color = _color(row[c])
            c2 = c + 1
            while c2 < cols and _color(row[c2]) == color:
                c2 += 1
            out.append(
                f'<rect x="{_num(ml + c * cw)}" y="{_num(y)}"'
                f' width="{_num((c2 - c) * cw + 0.3)}" height="{_num(ch + 0.3)}"'
                f' fill="{color}"/>')
            c = c2

    x0, x1, y0, y1 = extent
    axis = 'font-family="sans-serif" font-size="11"'
    out += [
        f'<rect x="{_num(ml)}" y="{_num(mt)}" width="{_num(pw)}"'
        f' height="{_num(ph)}" fill="none" stroke="black"/>',
        f'<text x="{_num(ml)}" y="{_num(mt + ph + 16)}" {axis}'
        f' text-anchor="middle">{_num(x0)}</text>',
        f'<text x="{_num(ml + pw)}" y="{_num(mt + ph + 16)}" {axis}'
        f' text-anchor="middle">{_num(x1)}</text>',
        f'<text x="{_num(ml + pw / 2)}" y="{_num(mt + ph + 32)}" {axis}'
        f' text-anchor="middle">{xlabel}</text>',
        f'<text x="{_num(ml - 6)}" y="{_num(mt + ph)}" {axis}'
        f' text-anchor="end">{_num(y0)}</text>',
        f'<text x="{_num(ml - 6)}" y="{_num(mt + 10)}" {axis}'
        f' text-anchor="end">{_num(y1)}</text>',
        f'<text x="14" y="{_num(mt + ph / 2)}" {axis} text-anchor="middle"'
        f' transform="rotate(-90 14 {_num(mt + ph / 2)})">{ylabel}</text>',
    ]

    # colorbar with the value bounds written at its ends
    cbx = ml + pw + 18.0
    steps = 24
    sh = ph / steps
    for s in range(steps):
        v = (s + 0.5) / steps
        out.append(
            f'<rect x="{_num(cbx)}" y="{_num(mt + ph - (s + 1) * sh)}"'
            f' width="14" height="{_num(sh + 0.3)}" fill="{_color(v)}"/>')
    out += [
        f'<rect x="{_num(cbx)}" y="{_num(mt)}" width="14" height="{_num(ph)}"'
        f' fill="none" stroke="black"/>',
        f'<text x="{_num(cbx + 18)}" y="{_num(mt + ph)}" {axis}>'
        f'{_fmt(vmin)}</text>',
        f'<text x="{_num(cbx + 18)}" y="{_num(mt + 10)}" {axis}>'
        f'{_fmt(vmax)}</text>',
        '</svg>',
    ]
    return "\n".join(out) + "\n"


def _svg_profiles(panels, xlabel, title):
    """Stacked line panels, each (label, x, pred, exact)."""
    ml, mr, mt, mb = 58.0, 24.0, 26.0, 34.0
    pw, ph = 520.0, 130.0
    gap = 26.0
    n = len(panels)
    width = ml + pw + mr
    height = mt + n * ph + (n - 1) * gap + mb
    axis = 'font-family="sans-serif" font-size="11"'
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}"'
        f' height="{_num(height)}" viewBox="0 0 {_num(width)} {_num(height)}">',
        f'<title>{title}</title>',
        f'<rect width="{_num(width)}" height="{_num(height)}" fill="white"/>',
        f'<text x="{_num(ml + pw / 2)}" y="16" font-family="sans-serif"'
        f' font-size="13" text-anchor="middle">{title}</text>',
    ]
    for p, (label, xs, pred, exact) in enumerate(panels):
        top = mt + p * (ph + gap)
        lo = float(min(pred.min(), exact.min()))
        hi = float(max(pred.max(), exact.max()))
        if hi - lo < 1e-12:
            hi = lo + 1.0
        pad = 0.06 * (hi - lo)
        lo -= pad
        hi += pad
        x0, x1 = float(xs[0]), float(xs[-1])

        def sx(v):
            return ml + (v - x0) / (x1 - x0) * pw

        def sy(v):
            return top + ph - (v - lo) / (hi - lo) * ph

        def poly(ys):
            return " ".join(
                f"{_num(sx(xs[i]))},{_num(sy(ys[i]))}"
                for i in range(len(xs)))

        out += [
            f'<rect x="{_num(ml)}" y="{_num(top)}" width="{_num(pw)}"'
            f' height="{_num(ph)}" fill="none" stroke="#999"/>',
            f'<polyline points="{poly(exact)}" fill="none" stroke="#c33"'
            f' stroke-width="1.2" stroke-dasharray="5,3"/>',
            f'<polyline points="{poly(pred)}" fill="none" stroke="#235"'
            f' stroke-width="1.4"/>',
            f'<text x="{_num(ml + 6)}" y="{_num(top + 14)}" {axis}>'
            f'{label}</text>',
            f'<text x="{_num(ml - 6)}" y="{_num(top + ph)}" {axis}'
            f' text-anchor="end">{_num(lo)}</text>',
            f'<text x="{_num(ml - 6)}" y="{_num(top + 10)}" {axis}'
            f' text-anchor="end">{_num(hi)}</text>',
        ]
    out += [
        f'<text x="{_num(ml + pw / 2)}" y="{_num(height - 10)}" {axis}'
        f' text-anchor="middle">{xlabel} '
        f'(solid: prediction, dashed: reference)</text>',
        '</svg>',
    ]
    return "\n".join(out) + "\n"


# -- export -----------------------------------------------------------------

def export_prediction(params, spec, grid, out_dir, method="model"):
    """Write prediction CSV, two heatmaps, and slice profiles to out_dir.

    Returns {"csv": ..., "heatmap_pred": ..., "heatmap_err": ...,
    "profiles": ..., "record": MetricsRecord}.  All files are
    deterministic for fixed inputs.
    """
    os.makedirs(out_dir, exist_ok=True)
    u_pred = network.forward_batch(params, grid.points)
    u_exact = oracle.exact(spec, grid.points)
    record = compute_metrics(spec, method, grid, u_pred, u_exact)

    shape = grid_shape(grid)
    pred_g = u_pred.reshape(shape)
    exact_g = u_exact.reshape(shape)
    err_g = np.abs(pred_g - exact_g)
    times = grid_times(spec, grid)
    xs = np.linspace(spec.lo[0], spec.hi[0], grid.nx)
    vmin, vmax = spec.u0_inf, spec.u0_sup

    paths = {}
    csv_path = os.path.join(out_dir, "prediction.csv")
    _write_text(csv_path, prediction_csv(spec, grid, u_pred, u_exact))
    paths["csv"] = csv_path

    if grid.d == 1:
        hm_pred = pred_g
        hm_err = err_g
        extent = (spec.lo[0], spec.hi[0], 0.0, spec.T)
        ylabel = "t"
        plane = "(x, t) plane"
    else:
        hm_pred = pred_g[-1]
        hm_err = err_g[-1]
        extent = (spec.lo[0], spec.hi[0], spec.lo[1], spec.hi[1])
        ylabel = "y"
        plane = f"(x, y) at t = {_num(spec.T)}"

    hp = os.path.join(out_dir, "heatmap_pred.svg")
    _write_text(hp, _svg_heatmap(
        hm_pred, vmin, vmax,
        f"case {spec.id} {method}: prediction, {plane}", "x", ylabel, extent))
    paths["heatmap_pred"] = hp

    he = os.path.join(out_dir, "heatmap_err.svg")
    _write_text(he, _svg_heatmap(
        hm_err, vmin, vmax,
        f"case {spec.id} {method}: abs error, {plane}", "x", ylabel, extent))
    paths["heatmap_err"] = he

    panels = []
    for frac, t_snap in zip(SLICE_FRACTIONS, record.slice_times):
        it, _ = snap_time(times, t_snap)
        if grid.d == 1:
            pr, ex = pred_g[it], exact_g[it]
            label = f"t = {_fmt(t_snap)}"
        else:
            idx = np.arange(grid.nx)
            pr, ex = pred_g[it, idx, idx], exact_g[it, idx, idx]
            label = f"t = {_fmt(t_snap)} along x = y"
        panels.append((label, xs, pr, ex))
    xlab = "x" if grid.d == 1 else "x (= y)"
    pf = os.path.join(out_dir, "profiles.svg")
    _write_text(pf, _svg_profiles(
        panels, xlab, f"case {spec.id} {method}: time slices"))
    paths["profiles"] = pf

    paths["record"] = record
    return paths


def _write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc
