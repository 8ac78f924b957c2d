"""Composite training loss.

Six weighted terms share one reverse-mode tape per evaluation: the
equation residual, initial and boundary data mismatches, a
characteristic-profile consistency term, a range penalty keeping the
prediction inside the initial data's bounds, and a jump-speed
consistency term enforced along fitted discontinuity tracks.  Per-point
refinement weights multiply into every term; which terms are active
follows the method preset.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import diffengine as de
from . import network
from . import shockgeom

TERMS = ("gov", "ic", "bc", "im", "bd", "rh")

PRESET_TERMS = {
    "clinn": ("gov", "ic", "bc", "im", "bd", "rh"),
    "ifnn": ("gov", "ic", "bc", "im"),
    "pinnwe": ("gov", "ic", "bc", "rh"),
    "pinn": ("gov", "ic", "bc"),
}

# side probes whose predictions differ by less than this give no usable
# jump ratio and their cluster is skipped for the epoch
RH_SKIP_TOL = 1e-8


@dataclass(frozen=True)
class LossWeights:
    """Term coefficients plus the set of active terms."""

    gov: float = 1.0
    ic: float = 1000.0
    bc: float = 10.0
    im: float = 10000.0
    bd: float = 10000.0
    rh: float = 100.0
    terms: tuple = TERMS

    def __post_init__(self):
        unknown = [t for t in self.terms if t not in TERMS]
        if unknown:
            raise ValueError(f"unknown loss terms {unknown}")
        negative = [t for t in TERMS if getattr(self, t) < 0]
        if negative:
            raise ValueError(f"negative weight for terms {negative}")

    def active(self, term):
        return term in self.terms

    @property
    def uses_shocks(self):
        # only the jump-speed term consumes flagged cells; without it
        # nothing is detected and nothing gets excluded
        return "rh" in self.terms


def preset_weights(method):
    """Default weights with the preset's term toggles applied."""
    try:
        terms = PRESET_TERMS[method]
    except KeyError:
        raise ValueError(f"unknown method preset {method!r}") from None
    return LossWeights(terms=terms)


@dataclass
class LossBreakdown:
    """Weighted term values plus the refinement bookkeeping arrays.

    Term fields already carry their coefficient and the per-point
    refinement weights, so `total` is exactly their sum.  `gov_pp` and
    `im_pp` hold raw per-point contributions aligned with the grid's
    interior rows, zeroed at excluded flagged rows; refinement ranks by
    these.
    """

    gov: float
    ic: float
    bc: float
    im: float
    bd: float
    rh: float
    total: float
    gov_pp: np.ndarray
    im_pp: np.ndarray
    rh_points_used: int = 0
    rh_all_skipped: bool = False

    def term_values(self):
        return tuple(getattr(self, t) for t in TERMS)


@dataclass
class RhData:
    """Side probes, orientation, and target speed per jump cluster."""

    left: np.ndarray     # (C, d+1) probe rows on one side of the track
    right: np.ndarray    # (C, d+1) matching rows on the other side
    normals: np.ndarray  # (C, d) unit front normal per cluster
    speeds: np.ndarray   # (C,) target normal speed
    members: list        # per cluster: the flagged grid rows it stands for

    @property
    def n_clusters(self):
        return int(self.speeds.size)


def build_rh_1d(spec, grid, curves, h=None):
    """Probe pairs along every usable fitted track.

    One cluster per (track, slice) sample.  Tracks with a single sample
    carry no slope and are dropped; samples whose probes collapse onto
    one point after clipping (tracks hugging a domain edge) are dropped
    too.
    """
    if grid.d != 1:
        raise ValueError("use build_rh_2d for two space dimensions")
    if h is None:
        h = 2.0 * grid.dx[0]
    lo, hi = spec.lo[0], spec.hi[0]
    left, right, speeds, members = [], [], [], []
    for curve in curves:
        if not curve.usable:
            continue
        for k in range(curve.n_samples):
            t = float(curve.times[k])
            try:
                ss = shockgeom.side_samples(curve, t, h, lo, hi)
            except ValueError:
                continue
            left.append(ss.left)
            right.append(ss.right)
            speeds.append(float(curve.speeds[k]))
            members.append(np.asarray(curve.members[k], dtype=np.int64))
    c = len(speeds)
    return RhData(
        left=np.asarray(left, dtype=np.float64).reshape(c, 2),
        right=np.asarray(right, dtype=np.float64).reshape(c, 2),
        normals=np.ones((c, 1)),
        speeds=np.asarray(speeds, dtype=np.float64),
        members=members)


def build_rh_2d(spec, grid, slice_targets, h=None):
    """Probe pairs from per-slice fitted front normals and speeds.

    `slice_targets` pairs a time-slice index with the fitted targets for
    that slice.  Each target becomes its own cluster whose single member
    is the flagged cell it was fitted at.
    """
    if grid.d != 2:
        raise ValueError("use build_rh_1d in one space dimension")
    if h is None:
        h = 2.0 * grid.dx[0]
    nx = grid.nx
    ncell = nx * nx
    left, right, normals, speeds, members = [], [], [], [], []
    for it, targets in slice_targets:
        t = float(grid.points[it * ncell, -1])
        for tg in targets:
            nxv, nyv = tg.normal
            pl = (float(np.clip(tg.x - h * nxv, spec.lo[0], spec.hi[0])),
                  float(np.clip(tg.y - h * nyv, spec.lo[1], spec.hi[1])), t)
            pr = (float(np.clip(tg.x + h * nxv, spec.lo[0], spec.hi[0])),
                  float(np.clip(tg.y + h * nyv, spec.lo[1], spec.hi[1])), t)
            if abs(pl[0] - pr[0]) + abs(pl[1] - pr[1]) < 1e-12:
                continue
            left.append(pl)
            right.append(pr)
            normals.append((float(nxv), float(nyv)))
            speeds.append(float(tg.speed))
            members.append(np.asarray([it * ncell + tg.iy * nx + tg.ix],
                                      dtype=np.int64))
    c = len(speeds)
    return RhData(
        left=np.asarray(left, dtype=np.float64).reshape(c, 3),
        right=np.asarray(right, dtype=np.float64).reshape(c, 3),
        normals=np.asarray(normals, dtype=np.float64).reshape(c, 2),
        speeds=np.asarray(speeds, dtype=np.float64),
        members=members)


def _extend_u0(spec):
    """Initial profile continued past the spatial box by its edge values."""
    lo, hi = spec.lo, spec.hi
    if spec.d == 1:
        u0, du0 = spec.u0, spec.u0_prime_axes[0]

        def fn(x):
            return u0(np.clip(x, lo[0], hi[0]))

        def dfn(x):
            inside = (x > lo[0]) & (x < hi[0])
            return np.where(inside, du0(np.clip(x, lo[0], hi[0])), 0.0)

        return fn, (dfn,)

    u0 = spec.u0
    dux, duy = spec.u0_prime_axes

    def fn2(x, y):
        return u0(np.clip(x, lo[0], hi[0]), np.clip(y, lo[1], hi[1]))

    def dfx(x, y):
        inside = (x > lo[0]) & (x < hi[0])
        return np.where(inside, dux(np.clip(x, lo[0], hi[0]),
                                    np.clip(y, lo[1], hi[1])), 0.0)

    def dfy(x, y):
        inside = (y > lo[1]) & (y < hi[1])
        return np.where(inside, duy(np.clip(x, lo[0], hi[0]),
                                    np.clip(y, lo[1], hi[1])), 0.0)

    return fn2, (dfx, dfy)


class LossContext:
    """Precomputed row classification, data targets, and jump clusters.

    Holds everything about one collocation grid that stays fixed within
    a refinement round, so per-epoch evaluation only varies with the
    network parameters and the refinement weights.
    """

    def __init__(self, spec, grid, weights, rh=None, pd_rows=None):
        if grid.d != spec.d:
            raise ValueError("grid dimensionality does not match the problem")
        self.spec = spec
        self.grid = grid
        self.weights = weights
        self.rh = rh

        n = grid.n_points
        if pd_rows is None:
            pd_rows = np.empty(0, dtype=np.int64)
        pd_rows = np.asarray(pd_rows, dtype=np.int64)
        if pd_rows.size and not np.isin(pd_rows, grid.idx_interior).all():
            raise ValueError("discontinuity rows must be interior rows")
        self.pd_rows = pd_rows
        self.n_interior = int(grid.idx_interior.size)

        # selection vectors carrying the per-term normalizations; the
        # interior terms keep the full interior count in the denominator
        # even though flagged rows drop out of the sums
        sel = np.zeros(n)
        sel[grid.idx_interior] = 1.0 / self.n_interior
        sel[pd_rows] = 0.0
        self.sel_interior = sel
        sel_ic = np.zeros(n)
        sel_ic[grid.idx_initial] = 1.0 / grid.idx_initial.size
        self.sel_ic = sel_ic
        sel_bc = np.zeros(n)
        sel_bc[grid.idx_boundary] = 1.0  # boundary mismatch is unnormalized
        self.sel_bc = sel_bc

        # over idx_interior: rows kept by the interior terms
        keep = np.ones(self.n_interior, dtype=bool)
        if pd_rows.size:
            keep[np.searchsorted(grid.idx_interior, pd_rows)] = False
        self.interior_kept = keep

        target = np.zeros(n)
        pts = grid.points
        icoords = [pts[grid.idx_initial, j] for j in range(spec.d)]
        target[grid.idx_initial] = spec.u0(*icoords)
        if grid.idx_boundary.size:
            target[grid.idx_boundary] = spec.boundary_values(
                pts[grid.idx_boundary])
        self.target_full = target

        self.u0_ext, self.u0_prime_ext = _extend_u0(spec)


def _check_rar(ctx, rar_weights):
    if rar_weights is None:
        rar_weights = ctx.grid.rar_weights
    rar_weights = np.asarray(rar_weights, dtype=np.float64)
    if rar_weights.shape != (ctx.grid.n_points,):
        raise ValueError("refinement weight vector length mismatch")
    return rar_weights


def _rh_graph(tape, pv, params, ctx, rar_w):
    """Jump-speed term on the tape; returns (node or None, used, skipped)."""
    rh = ctx.rh
    spec, w = ctx.spec, ctx.weights
    # cheap value-only prefilter decides which clusters contribute this
    # epoch, keeping the guarded division on the tape well away from 0
    ul = network.forward_batch(params, rh.left)
    ur = network.forward_batch(params, rh.right)
    kept = np.flatnonzero(np.abs(ul - ur) >= RH_SKIP_TOL)
    if kept.size == 0:
        return None, 0, True
    c = kept.size
    xlr = np.vstack([rh.left[kept], rh.right[kept]])
    urh = de.forward_on_tape(tape, pv, xlr, input_tangents=False)
    u_l = de.gather(urh, np.arange(c))
    u_r = de.gather(urh, np.arange(c, 2 * c))
    num = None
    for a in range(spec.d):
        fl = de.extfun(u_l, spec.flux_axes[a], spec.lam_axes[a], f"flux{a}")
        fr = de.extfun(u_r, spec.flux_axes[a], spec.lam_axes[a], f"flux{a}")
        dfa = de.sub(fl, fr)
        if spec.d > 1:
            dfa = de.mul(dfa, tape.const(rh.normals[kept, a][None, :, None]))
        num = dfa if num is None else de.add(num, dfa)
    ratio = de.div(num, de.sub(u_l, u_r))
    resid = de.absval(de.sub(ratio,
                             tape.const(rh.speeds[kept][None, :, None])))
    member_w = np.array([float(rar_w[rh.members[i]].sum()) for i in kept])
    n_used = int(sum(len(rh.members[i]) for i in kept))
    var = de.wsum(resid, w.rh * member_w / n_used)
    return var, n_used, False


def _graph(tape, pv, params, ctx, rar_w):
    """Assemble every active term; returns (root node or None, breakdown)."""
    spec, w = ctx.spec, ctx.weights
    d = spec.d
    u = de.forward_on_tape(tape, pv, ctx.grid.points)
    uval = de.extract(u, 0)

    cols = dict.fromkeys(TERMS, 0.0)
    pieces = []
    gov_pp = np.zeros(ctx.n_interior)
    im_pp = np.zeros(ctx.n_interior)
    rh_used = 0
    rh_all_skipped = False

    def term(name, sq, sel):
        var = de.wsum(sq, getattr(w, name) * sel * rar_w)
        cols[name] = float(var.val[0, 0, 0])
        pieces.append(var)

    lam_nodes = None
    if w.active("gov") or w.active("im"):
        lam_nodes = [de.extfun(uval, spec.lam_axes[a], spec.lam_prime_axes[a],
                               f"lam{a}") for a in range(d)]

    if w.active("gov"):
        res = de.extract(u, d + 1)
        for a in range(d):
            res = de.add(res, de.mul(lam_nodes[a], de.extract(u, a + 1)))
        sq = de.square(res)
        gov_pp = (sq.val[0, ctx.grid.idx_interior, 0]
                  * ctx.interior_kept / ctx.n_interior)
        term("gov", sq, ctx.sel_interior)

    if w.active("ic") or w.active("bc"):
        sq = de.square(de.sub(uval,
                              tape.const(ctx.target_full[None, :, None])))
        if w.active("ic"):
            term("ic", sq, ctx.sel_ic)
        if w.active("bc"):
            term("bc", sq, ctx.sel_bc)

    if w.active("im"):
        pts = ctx.grid.points
        tnode = tape.const(pts[:, -1][None, :, None])
        shifted = [de.sub(tape.const(pts[:, a][None, :, None]),
                          de.mul(lam_nodes[a], tnode)) for a in range(d)]
        if d == 1:
            prof = de.extfun(shifted[0], ctx.u0_ext,
                             ctx.u0_prime_ext[0], "u0")
        else:
            prof = de.extfun2(shifted[0], shifted[1], ctx.u0_ext,
                              ctx.u0_prime_ext, "u0")
        sq = de.square(de.sub(uval, prof))
        im_pp = (sq.val[0, ctx.grid.idx_interior, 0]
                 * ctx.interior_kept / ctx.n_interior)
        term("im", sq, ctx.sel_interior)

    if w.active("bd"):
        sq = de.square(de.sub(uval,
                              de.clamp(uval, spec.u0_inf, spec.u0_sup)))
        term("bd", sq, ctx.sel_interior)

    if w.active("rh") and ctx.rh is not None and ctx.rh.n_clusters:
        var, rh_used, rh_all_skipped = _rh_graph(tape, pv, params, ctx, rar_w)
        if var is not None:
            cols["rh"] = float(var.val[0, 0, 0])
            pieces.append(var)

    root = None
    for p in pieces:
        root = p if root is None else de.add(root, p)

    breakdown = LossBreakdown(
        gov=cols["gov"], ic=cols["ic"], bc=cols["bc"], im=cols["im"],
        bd=cols["bd"], rh=cols["rh"],
        total=float(root.val[0, 0, 0]) if root is not None else 0.0,
        gov_pp=gov_pp, im_pp=im_pp,
        rh_points_used=rh_used, rh_all_skipped=rh_all_skipped)
    return root, breakdown


def total_loss(params, ctx, rar_weights=None):
    """Evaluate every active term without the parameter gradient."""
    rar_w = _check_rar(ctx, rar_weights)
    tape = de.Tape()
    pv = de.register_params(tape, params)
    _, breakdown = _graph(tape, pv, params, ctx, rar_w)
    return breakdown


def total_loss_and_grad(params, ctx, rar_weights=None):
    """Breakdown plus the flat parameter gradient of the total."""
    rar_w = _check_rar(ctx, rar_weights)
    tape = de.Tape()
    pv = de.register_params(tape, params)
    root, breakdown = _graph(tape, pv, params, ctx, rar_w)
    if root is None:
        return breakdown, np.zeros(network.flatten(params).size)
    tape.backward(root)
    return breakdown, de.collect_gradient(tape, pv)


# -- plain-array reference paths -------------------------------------------
#
# Each term again in direct NumPy, without the tape.  These back the
# unit tests (the tape assembly must agree with them) and give readable
# statements of what each term is.

def predict_with_grads(params, X):
    """Values and exact input derivatives of the network over rows of X."""
    X = np.asarray(X, dtype=np.float64)
    tape = de.Tape()
    pv = de.register_params(tape, params)
    u = de.forward_on_tape(tape, pv, X)
    v = u.val
    d = X.shape[1] - 1
    space = [v[a + 1, :, 0].copy() for a in range(d)]
    return v[0, :, 0].copy(), space, v[d + 1, :, 0].copy()


def loss_gov(params, ctx, rar_weights=None):
    """Equation-residual term, before its coefficient is applied."""
    rar_w = _check_rar(ctx, rar_weights)
    rows = ctx.grid.idx_interior[ctx.interior_kept]
    if rows.size == 0:
        return 0.0
    u, space, ut = predict_with_grads(params, ctx.grid.points[rows])
    res = ut.copy()
    for a in range(ctx.spec.d):
        res += ctx.spec.lam_axes[a](u) * space[a]
    return float(rar_w[rows] @ (res ** 2) / ctx.n_interior)


def loss_ic(params, ctx, rar_weights=None):
    rar_w = _check_rar(ctx, rar_weights)
    rows = ctx.grid.idx_initial
    u = network.forward_batch(params, ctx.grid.points[rows])
    return float(rar_w[rows] @ ((u - ctx.target_full[rows]) ** 2) / rows.size)


def loss_bc(params, ctx, rar_weights=None):
    rar_w = _check_rar(ctx, rar_weights)
    rows = ctx.grid.idx_boundary
    if rows.size == 0:
        return 0.0
    u = network.forward_batch(params, ctx.grid.points[rows])
    return float(rar_w[rows] @ ((u - ctx.target_full[rows]) ** 2))


def loss_im(params, ctx, rar_weights=None):
    """Profile-consistency mismatch |u - u0(x - lam(u) t)|^2 term."""
    rar_w = _check_rar(ctx, rar_weights)
    rows = ctx.grid.idx_interior[ctx.interior_kept]
    if rows.size == 0:
        return 0.0
    pts = ctx.grid.points[rows]
    u = network.forward_batch(params, pts)
    shifted = [pts[:, a] - ctx.spec.lam_axes[a](u) * pts[:, -1]
               for a in range(ctx.spec.d)]
    prof = ctx.u0_ext(*shifted)
    return float(rar_w[rows] @ ((u - prof) ** 2) / ctx.n_interior)


def loss_bd(params, ctx, rar_weights=None):
    """Squared distance of the prediction to the initial-data range."""
    rar_w = _check_rar(ctx, rar_weights)
    rows = ctx.grid.idx_interior[ctx.interior_kept]
    if rows.size == 0:
        return 0.0
    u = network.forward_batch(params, ctx.grid.points[rows])
    over = np.maximum(0.0, u - ctx.spec.u0_sup)
    under = np.maximum(0.0, ctx.spec.u0_inf - u)
    return float(rar_w[rows] @ ((over + under) ** 2) / ctx.n_interior)


def loss_rh(params, ctx, rar_weights=None):
    """Jump-speed mismatch averaged over contributing flagged points."""
    rar_w = _check_rar(ctx, rar_weights)
    rh = ctx.rh
    if rh is None or rh.n_clusters == 0:
        return 0.0
    ul = network.forward_batch(params, rh.left)
    ur = network.forward_batch(params, rh.right)
    kept = np.flatnonzero(np.abs(ul - ur) >= RH_SKIP_TOL)
    if kept.size == 0:
        warnings.warn("every jump cluster skipped (flat prediction across "
                      "the tracks); term contributes 0", RuntimeWarning)
        return 0.0
    num = np.zeros(kept.size)
    for a in range(ctx.spec.d):
        df = ctx.spec.flux_axes[a](ul[kept]) - ctx.spec.flux_axes[a](ur[kept])
        num += rh.normals[kept, a] * df
    r = np.abs(num / (ul[kept] - ur[kept]) - rh.speeds[kept])
    member_w = np.array([float(rar_w[rh.members[i]].sum()) for i in kept])
    n_used = sum(len(rh.members[i]) for i in kept)
    return float(member_w @ r / n_used)
