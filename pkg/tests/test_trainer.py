"""Optimizer arithmetic, refinement bookkeeping, and the training loop."""

import numpy as np
import pytest

from clinn import loss, network, problems, trainer
from clinn.diffengine import NumericalError
from clinn.loss import preset_weights
from clinn.problems import sample_grid
from clinn.trainer import (
    AdamState, DivergenceError, RarSchedule, TrainHistory, adam_step,
    detect_flags, rar_update, train,
)

ARCH = network.Architecture(width=8, depth=2, input_dim=2)


def test_adam_first_step_closed_form():
    state = AdamState.fresh(1, alpha=0.1)
    theta = np.array([1.0])
    new = adam_step(theta, np.array([2.0]), state)
    # bias correction makes the first step alpha * g / (|g| + eps)
    assert new[0] == pytest.approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8), rel=1e-14)
    assert state.j == 1
    assert state.m[0] == pytest.approx(0.2)
    assert state.v[0] == pytest.approx(0.004)


def test_adam_matches_reference_recurrence():
    rng = np.random.default_rng(0)
    theta = rng.normal(size=5)
    state = AdamState.fresh(5, alpha=0.01)
    m = np.zeros(5)
    v = np.zeros(5)
    ref = theta.copy()
    for j in range(1, 8):
        g = rng.normal(size=5)
        theta = adam_step(theta, g, state)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9 ** j)) \
            / (np.sqrt(v / (1 - 0.999 ** j)) + 1e-8)
        np.testing.assert_allclose(theta, ref, rtol=1e-14)


def test_adam_validates_inputs():
    state = AdamState.fresh(3, alpha=0.1)
    with pytest.raises(ValueError):
        adam_step(np.zeros(3), np.zeros(2), state)
    with pytest.raises(NumericalError):
        adam_step(np.zeros(3), np.array([1.0, np.nan, 0.0]), state)
    with pytest.raises(ValueError):
        AdamState.fresh(3, alpha=0.0)


def test_schedule_validates_epoch_counts():
    RarSchedule(rounds=2, epochs=(5, 5, 5))
    with pytest.raises(ValueError):
        RarSchedule(rounds=1, epochs=(5,))
    with pytest.raises(ValueError):
        RarSchedule(rounds=-1, epochs=())
    with pytest.raises(ValueError):
        RarSchedule(rounds=0, epochs=(-3,))


def test_rar_update_boost_budget():
    rng = np.random.default_rng(1)
    n = 1000
    sched = RarSchedule(rounds=1, epochs=(1, 1), n_pt=500)
    w = rar_update(np.ones(n), rng.uniform(size=n), rng.uniform(size=n),
                   sched)
    assert w.sum() - n == pytest.approx(500 * 49.0)
    assert set(np.unique(w)) <= {1.0, 34.0, 17.0, 50.0}
    idle = w == 1.0
    assert idle.sum() >= n - 1000


def test_rar_update_selects_the_largest_residuals():
    gov = np.array([0.1, 5.0, 0.2, 4.0, 0.3])
    im = np.array([9.0, 0.0, 8.0, 0.0, 0.0])
    sched = RarSchedule(rounds=1, epochs=(1, 1), n_pt=2, w_eq=33, w_if=16)
    w = rar_update(np.ones(5), gov, im, sched)
    np.testing.assert_allclose(w, [17.0, 34.0, 17.0, 34.0, 1.0])


def test_rar_update_tie_break_prefers_lower_index():
    sched = RarSchedule(rounds=1, epochs=(1, 1), n_pt=3)
    w = rar_update(np.ones(6), np.full(6, 2.0), None, sched)
    np.testing.assert_allclose(w, [34.0, 34.0, 34.0, 1.0, 1.0, 1.0])


def test_rar_update_row_mapping_and_overlap():
    sched = RarSchedule(rounds=1, epochs=(1, 1), n_pt=1)
    w = rar_update(np.ones(10), np.array([1.0, 2.0]), np.array([0.0, 3.0]),
                   sched, rows=np.array([4, 7]))
    assert w[7] == 1.0 + 33.0 + 16.0   # both selections hit the same row
    assert w[4] == 1.0
    assert w.sum() == pytest.approx(10 + 49)


def test_rar_update_clamps_to_available_points():
    sched = RarSchedule(rounds=1, epochs=(1, 1), n_pt=500)
    w = rar_update(np.ones(8), np.arange(8.0), np.arange(8.0), sched)
    assert np.all(w == 50.0)


def test_rar_update_validates_shapes():
    sched = RarSchedule(rounds=1, epochs=(1, 1))
    with pytest.raises(ValueError):
        rar_update(np.ones(5), np.ones(3), np.ones(4), sched)
    with pytest.raises(ValueError):
        rar_update(np.ones(5), np.ones(3), None, sched, rows=np.arange(2))


def tiny_run(method="clinn", seed=3, alpha=1e-3, epochs=(30, 30),
             eval_every=20, case="2A"):
    spec = problems.get_problem(case)
    grid = sample_grid(spec, 12, 6)
    eval_grid = sample_grid(spec, 24, 8)
    params = network.init(ARCH, seed=seed)
    sched = RarSchedule(rounds=len(epochs) - 1, epochs=tuple(epochs))
    return train(spec, params, grid, eval_grid, preset_weights(method),
                 sched, alpha=alpha, eval_every=eval_every)


def test_training_is_deterministic():
    h1, best1, fin1 = tiny_run()
    h2, best2, fin2 = tiny_run()
    assert h1.to_csv() == h2.to_csv()
    np.testing.assert_array_equal(network.flatten(fin1),
                                  network.flatten(fin2))
    np.testing.assert_array_equal(network.flatten(best1),
                                  network.flatten(best2))


def test_history_shape_and_eval_cadence():
    hist, best, _ = tiny_run()
    assert hist.n_epochs == 60
    assert [r[0] for r in hist.rows] == list(range(1, 61))
    assert sorted(hist.evals) == [20, 40, 60]
    assert hist.best_mse == min(hist.evals.values())
    assert hist.best_epoch in hist.evals
    assert len(hist.wall_ms) == 60
    # the reported best parameters reproduce the recorded best MSE
    spec = problems.get_problem("2A")
    eval_grid = sample_grid(spec, 24, 8)
    from clinn import oracle
    pred = network.forward_batch(best, eval_grid.points)
    mse = float(np.mean((pred - oracle.exact(spec, eval_grid.points)) ** 2))
    assert mse == pytest.approx(hist.best_mse, rel=1e-12)


def test_history_csv_layout():
    hist, _, _ = tiny_run()
    lines = hist.to_csv().strip().split("\n")
    assert lines[0] == ",".join(trainer.HISTORY_COLUMNS)
    assert len(lines) == 61
    first = lines[1].split(",")
    assert len(first) == 9
    assert first[-1] == ""             # no eval at epoch 1
    assert lines[20].split(",")[-1] != ""


def test_final_rar_weights_exposed_on_grid():
    spec = problems.get_problem("2A")
    grid = sample_grid(spec, 12, 6)
    eval_grid = sample_grid(spec, 24, 8)
    params = network.init(ARCH, seed=3)
    sched = RarSchedule(rounds=1, epochs=(30, 30))
    train(spec, params, grid, eval_grid, preset_weights("ifnn"), sched,
          alpha=1e-3, eval_every=0)
    w = grid.rar_weights
    eligible = grid.idx_interior.size    # no flags excluded for ifnn
    assert w.sum() - grid.n_points == pytest.approx(eligible * 49.0)
    assert np.all(w[grid.idx_initial] == 1.0)
    assert np.all(w[grid.idx_boundary] == 1.0)


def test_presets_without_jump_term_log_zero_rh():
    for method in ("pinn", "ifnn"):
        hist, _, _ = tiny_run(method=method, epochs=(20, 20), eval_every=0)
        rh_col = [row[6] for row in hist.rows]
        assert all(v == 0.0 for v in rh_col)


def test_divergence_raises_with_partial_history():
    spec = problems.get_problem("1B")
    grid = sample_grid(spec, 12, 6)
    eval_grid = sample_grid(spec, 16, 8)
    params = network.init(ARCH, seed=0)
    sched = RarSchedule(rounds=0, epochs=(50,))
    with pytest.raises(DivergenceError) as exc:
        train(spec, params, grid, eval_grid, preset_weights("clinn"),
              sched, alpha=1e-3, divergence_limit=10.0)
    hist = exc.value.history
    assert hist.n_epochs == 1            # init loss already beyond the limit
    assert hist.rows[0][-1] > 10.0


def test_detect_flags_shapes():
    spec = problems.get_problem("2A")
    grid = sample_grid(spec, 16, 5)
    params = network.init(ARCH, seed=1)
    flags = detect_flags(spec, grid, params)
    assert flags.shape == (5, 16)
    assert flags.dtype == bool
    spec2 = problems.get_problem("2D")
    grid2 = sample_grid(spec2, 8, 4)
    params2 = network.init(network.Architecture(width=8, depth=2,
                                                input_dim=3), seed=1)
    flags2 = detect_flags(spec2, grid2, params2)
    assert flags2.shape == (4, 8, 8)


def test_shock_refresh_skips_presets_without_jump_term():
    spec = problems.get_problem("2A")
    grid = sample_grid(spec, 12, 6)
    params = network.init(ARCH, seed=1)
    rh, pd = trainer._shock_refresh(spec, grid, params,
                                    preset_weights("pinn"), None)
    assert rh is None
    assert pd.size == 0


def test_zero_epoch_phase_is_allowed():
    hist, _, _ = tiny_run(epochs=(10, 0), eval_every=0)
    assert hist.n_epochs == 10
    assert sorted(hist.evals) == [10]
