"""Adam optimization and the refinement training loop.

One run is an outer loop over refinement rounds around a full-batch
epoch loop.  Round boundaries rebuild the discontinuity machinery from
the current prediction (indicator flags, flagged-row exclusion, fitted
tracks) and refresh the per-point weights from the freshly measured
residuals.  Everything is deterministic for a fixed seed and config;
wall-clock times therefore live next to the history, not inside it.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import diffengine as de
from . import indicator
from . import loss
from . import network
from . import oracle
from . import shockgeom

HISTORY_COLUMNS = ("epoch", "loss_gov", "loss_ic", "loss_bc", "loss_im",
                   "loss_bd", "loss_rh", "total", "eval_mse")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    j: int
    alpha: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n, alpha):
        if alpha <= 0:
            raise ValueError("learning rate must be positive")
        return cls(m=np.zeros(n), v=np.zeros(n), j=0, alpha=float(alpha))


def adam_step(theta, grad, state):
    """One bias-corrected moment step; mutates state, returns new theta."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != theta.shape:
        raise ValueError(
            f"gradient shape {grad.shape} does not match {theta.shape}")
    if not np.isfinite(grad).all():
        bad = int(np.count_nonzero(~np.isfinite(grad)))
        raise de.NumericalError(
            f"non-finite gradient in {bad} of {grad.size} coordinates "
            f"at step {state.j + 1}")
    state.j += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    mhat = state.m / (1.0 - state.beta1 ** state.j)
    vhat = state.v / (1.0 - state.beta2 ** state.j)
    return theta - state.alpha * mhat / (np.sqrt(vhat) + state.eps)


@dataclass(frozen=True)
class RarSchedule:
    """Refinement rounds, per-round epoch counts, and boost sizes."""

    rounds: int = 1
    epochs: tuple = (5000, 5000)
    n_pt: int = 500
    w_eq: float = 33.0
    w_if: float = 16.0

    def __post_init__(self):
        if self.rounds < 0 or self.n_pt < 0:
            raise ValueError("rounds and n_pt must be non-negative")
        if len(self.epochs) != self.rounds + 1:
            raise ValueError(
                f"need {self.rounds + 1} epoch counts, got {len(self.epochs)}")
        if any(e < 0 for e in self.epochs):
            raise ValueError("epoch counts must be non-negative")


def rar_update(rar_weights, gov_pp, im_pp, schedule, rows=None):
    """Fresh weight vector: reset to 1, boost the top-residual points.

    `gov_pp` and `im_pp` are per-point losses over the selectable points
    (interior rows minus the flagged set); `rows` maps their positions
    to rows of the weight vector (identity when omitted).  Passing
    im_pp=None disables that side of the selection.  Ties rank the lower
    index first.
    """
    w = np.ones(np.asarray(rar_weights, dtype=np.float64).shape[0])
    gov_pp = np.asarray(gov_pp, dtype=np.float64)
    if rows is None:
        rows = np.arange(gov_pp.size)
    rows = np.asarray(rows, dtype=np.int64)
    if rows.shape != gov_pp.shape:
        raise ValueError("row map does not match the per-point losses")
    n = min(int(schedule.n_pt), gov_pp.size)
    if n > 0:
        top = np.argsort(-gov_pp, kind="stable")[:n]
        w[rows[top]] += schedule.w_eq
    if im_pp is not None:
        im_pp = np.asarray(im_pp, dtype=np.float64)
        if im_pp.shape != gov_pp.shape:
            raise ValueError("per-point loss arrays differ in length")
        if n > 0:
            top = np.argsort(-im_pp, kind="stable")[:n]
            w[rows[top]] += schedule.w_if
    return w


@dataclass
class TrainHistory:
    """Per-epoch weighted term values plus the evaluation bookkeeping."""

    rows: list = field(default_factory=list)   # (epoch, 6 terms, total)
    evals: dict = field(default_factory=dict)  # epoch -> eval MSE
    wall_ms: list = field(default_factory=list)
    best_epoch: int = -1
    best_mse: float = float("inf")

    @property
    def n_epochs(self):
        return len(self.rows)

    def to_csv(self):
        lines = [",".join(HISTORY_COLUMNS)]
        for row in self.rows:
            epoch = row[0]
            cells = [str(epoch)] + [repr(float(v)) for v in row[1:]]
            cells.append(repr(float(self.evals[epoch]))
                         if epoch in self.evals else "")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    def write_timings(self, path):
        # kept apart from the history so identical runs stay byte-identical
        with open(path, "w") as fh:
            fh.write("epoch,wall_ms\n")
            for k, ms in enumerate(self.wall_ms, start=1):
                fh.write(f"{k},{ms:.3f}\n")


class DivergenceError(RuntimeError):
    """Loss blew past the divergence limit; carries the partial history."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def detect_flags(spec, grid, params):
    """Indicator flags over every time slice of the current prediction."""
    u = network.forward_batch(params, grid.points)
    nx = grid.nx
    if spec.d == 1:
        mesh = indicator.Mesh1D.from_points(grid.points[:nx, 0])
        return indicator.detect_1d(spec.lam_axes[0], mesh,
                                   u.reshape(grid.nt, nx)).flags
    mesh_x = indicator.Mesh1D.from_points(grid.points[:nx, 0])
    mesh_y = indicator.Mesh1D.from_points(grid.points[:nx * nx:nx, 1])
    return indicator.detect_2d(spec.lam_axes, mesh_x, mesh_y,
                               u.reshape(grid.nt, nx, nx)).flags


def _shock_refresh(spec, grid, params, weights, h_offset):
    """Rebuild flags, excluded rows, and jump clusters from a prediction."""
    if not weights.uses_shocks:
        return None, np.empty(0, dtype=np.int64)
    flags = detect_flags(spec, grid, params)
    pd_all = shockgeom.build_pd(grid, flags)
    pd_rows = pd_all[np.isin(pd_all, grid.idx_interior)]
    if spec.d == 1:
        curves = shockgeom.fit_curves(grid, pd_all)
        rh = loss.build_rh_1d(spec, grid, curves, h=h_offset)
    else:
        nx = grid.nx
        mesh_x = indicator.Mesh1D.from_points(grid.points[:nx, 0])
        mesh_y = indicator.Mesh1D.from_points(grid.points[:nx * nx:nx, 1])
        slice_targets = []
        for it in range(grid.nt - 1):
            targets = shockgeom.rh_target_2d(flags[it], flags[it + 1],
                                             mesh_x, mesh_y, grid.dt)
            if targets:
                slice_targets.append((it, targets))
        rh = loss.build_rh_2d(spec, grid, slice_targets, h=h_offset)
    return rh, pd_rows


def train(spec, params, grid, eval_grid, weights, schedule, alpha=1e-4,
          h_offset=None, eval_every=1000, divergence_limit=1e12):
    """Run the full loop; returns (history, best_params, final_params).

    The evaluation MSE against the exact solution is measured every
    `eval_every` epochs and once more at the end; the returned best
    parameters are the ones with the minimum recorded value.  The MSE
    never feeds back into the loss.
    """
    arch = params.architecture()
    theta = network.flatten(params).copy()
    state = AdamState.fresh(theta.size, alpha)
    rar_w = np.ones(grid.n_points)
    history = TrainHistory()
    u_eval = oracle.exact(spec, eval_grid.points)

    best_theta = theta.copy()
    global_epoch = 0

    def evaluate(epoch):
        nonlocal best_theta
        pred = network.forward_batch(network.from_flat(arch, theta),
                                     eval_grid.points)
        mse = float(np.mean((pred - u_eval) ** 2))
        history.evals[epoch] = mse
        if mse < history.best_mse:
            history.best_mse = mse
            history.best_epoch = epoch
            best_theta = theta.copy()

    for rnd in range(schedule.rounds + 1):
        if rnd == 0:
            ctx = loss.LossContext(spec, grid, weights)
        else:
            p = network.from_flat(arch, theta)
            rh, pd_rows = _shock_refresh(spec, grid, p, weights, h_offset)
            ctx = loss.LossContext(spec, grid, weights, rh=rh,
                                   pd_rows=pd_rows)
            bd = loss.total_loss(p, ctx, rar_w)
            rows_elig = grid.idx_interior[ctx.interior_kept]
            gov_e = bd.gov_pp[ctx.interior_kept]
            im_e = (bd.im_pp[ctx.interior_kept]
                    if weights.active("im") else None)
            rar_w = rar_update(rar_w, gov_e, im_e, schedule, rows=rows_elig)

        for _ in range(schedule.epochs[rnd]):
            t0 = time.perf_counter()
            p = network.from_flat(arch, theta)
            bd, grad = loss.total_loss_and_grad(p, ctx, rar_w)
            if not np.isfinite(bd.total) or bd.total > divergence_limit:
                history.rows.append((global_epoch + 1, *bd.term_values(),
                                     bd.total))
                raise DivergenceError(
                    f"loss diverged at epoch {global_epoch + 1}: "
                    f"total={bd.total:.6e}", history)
            theta = adam_step(theta, grad, state)
            global_epoch += 1
            history.rows.append((global_epoch, *bd.term_values(), bd.total))
            history.wall_ms.append((time.perf_counter() - t0) * 1000.0)
            if eval_every and global_epoch % eval_every == 0:
                evaluate(global_epoch)

    if global_epoch not in history.evals:
        evaluate(global_epoch)

    best_params = network.from_flat(arch, best_theta, copy=True)
    final_params = network.from_flat(arch, theta, copy=True)
    grid.rar_weights[:] = rar_w  # expose the final weights to callers
    return history, best_params, final_params
