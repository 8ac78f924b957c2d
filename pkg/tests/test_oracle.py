"""Reference solutions: residuals, jump conditions, bounds, wave types."""

import numpy as np
import pytest

from clinn import oracle, problems

CASES_1D = ("1A", "1B", "2A", "2B", "3A", "3B")

N_CELLS = 512


def _away_from_fronts(spec, rng, n):
    """Random interior points at least 2 reference cells from any front."""
    lo, hi = spec.lo[0], spec.hi[0]
    dx = (hi - lo) / N_CELLS
    fronts = oracle.wavefronts(spec)
    pts = []
    while len(pts) < n:
        x = rng.uniform(lo + 4 * dx, hi - 4 * dx, size=4 * n)
        t = rng.uniform(8 * dx / max(1.0, spec.T), spec.T * (1 - 1e-3), size=4 * n)
        keep = np.ones(x.shape, dtype=bool)
        for gamma, t0, t1 in fronts:
            on = (t >= t0 - 2 * dx) & (t <= t1 + 2 * dx)
            keep &= ~on | (np.abs(x - gamma(np.clip(t, t0, t1))) >= 2 * dx)
        pts.extend(zip(x[keep], t[keep]))
    arr = np.array(pts[:n])
    return arr[:, 0], arr[:, 1]


@pytest.mark.parametrize("cid", CASES_1D)
def test_pde_residual_away_from_fronts(cid):
    spec = problems.get_problem(cid)
    rng = np.random.default_rng(42)
    x, t = _away_from_fronts(spec, rng, 500)
    h = (spec.hi[0] - spec.lo[0]) / N_CELLS / 8.0
    flux = spec.flux_axes[0]

    def u(xq, tq):
        pts = np.column_stack([xq, tq])
        return oracle.exact(spec, pts)

    u_t = (u(x, t + h) - u(x, t - h)) / (2 * h)
    f_x = (flux(u(x + h, t)) - flux(u(x - h, t))) / (2 * h)
    resid = np.abs(u_t + f_x)
    assert resid.max() < 1e-3, (cid, float(resid.max()))


def test_smooth_case_satisfies_implicit_relation():
    spec = problems.get_problem("1A")
    rng = np.random.default_rng(3)
    x, t = _away_from_fronts(spec, rng, 400)
    pts = np.column_stack([x, t])
    u = oracle.exact(spec, pts)
    resid = np.abs(u - spec.u0(x - u * t))
    assert resid.max() < 1e-10, float(resid.max())


@pytest.mark.parametrize("cid", CASES_1D)
def test_jump_speed_matches_track_slope(cid):
    spec = problems.get_problem(cid)
    flux = spec.flux_axes[0]
    for tr in oracle.exact_shocks(spec):
        t0, t1 = tr.t0, tr.t1
        span = t1 - t0
        ts = np.linspace(t0 + 0.01 * span, t1 - 0.01 * span, 50)
        if tr.kinks:
            for tk in tr.kinks:
                ts = ts[np.abs(ts - tk) > 0.02 * span]
        ul = tr.left(ts)
        ur = tr.right(ts)
        rh = (flux(ul) - flux(ur)) / (ul - ur)
        assert np.max(np.abs(rh - tr.speed(ts))) < 1e-6, (cid, tr.label)
        # the track slope itself agrees with the stated speed
        h = 1e-6 * max(1.0, span)
        inner = ts[(ts - h > t0) & (ts + h < t1)]
        if tr.kinks:
            for tk in tr.kinks:
                inner = inner[np.abs(inner - tk) > 2 * h]
        slope = (tr.gamma(inner + h) - tr.gamma(inner - h)) / (2 * h)
        assert np.max(np.abs(slope - tr.speed(inner))) < 1e-5, (cid, tr.label)


def test_merging_case_speeds_are_exact():
    spec = problems.get_problem("2A")
    by_label = {tr.label: tr for tr in oracle.exact_shocks(spec)}
    fast = by_label["fast"]
    merged = by_label["merged"]
    assert fast.t1 == pytest.approx(0.5, abs=1e-12)
    assert merged.t0 == pytest.approx(0.5, abs=1e-12)
    ts = np.linspace(fast.t0 + 1e-9, fast.t1 - 1e-9, 50)
    assert np.max(np.abs(fast.speed(ts) - 12.0)) < 1e-9
    ts = np.linspace(merged.t0 + 1e-9, merged.t1 - 1e-9, 50)
    assert np.max(np.abs(merged.speed(ts) - 2.0)) < 1e-9


@pytest.mark.parametrize("cid", problems.CASE_IDS)
def test_solution_respects_initial_bounds(cid):
    spec = problems.get_problem(cid)
    rng = np.random.default_rng(11)
    n = 2000
    cols = [rng.uniform(spec.lo[a], spec.hi[a], n) for a in range(spec.d)]
    cols.append(rng.uniform(0.0, spec.T, n))
    u = oracle.exact(spec, np.column_stack(cols))
    assert u.min() >= spec.u0_inf - 1e-9
    assert u.max() <= spec.u0_sup + 1e-9


@pytest.mark.parametrize("cid", problems.CASE_IDS)
def test_solution_matches_initial_data_at_t0(cid):
    spec = problems.get_problem(cid)
    rng = np.random.default_rng(12)
    n = 500
    cols = [rng.uniform(spec.lo[a], spec.hi[a], n) for a in range(spec.d)]
    X = np.column_stack(cols)
    pts = np.column_stack([X, np.zeros(n)])
    u = oracle.exact(spec, pts)
    u0 = spec.u0(X[:, 0]) if spec.d == 1 else spec.u0(X[:, 0], X[:, 1])
    np.testing.assert_allclose(u, u0, rtol=0, atol=1e-12)


def test_classify_wave_on_quadratic_flux():
    spec = problems.get_problem("1B")
    assert oracle.classify_wave(spec, 1.0, 0.0) == "shock"
    assert oracle.classify_wave(spec, 0.0, 1.0) == "rarefaction"
    with pytest.raises(ValueError):
        oracle.classify_wave(spec, 0.5, 0.5)


def test_riemann_profile_shock_and_fan():
    spec = problems.get_problem("1B")
    prof = oracle.riemann_convex(spec, 1.0, 0.0)
    # left-closed jump at the RH speed 0.5
    assert prof(0.5) == 1.0
    assert prof(0.5 + 1e-9) == 0.0
    fan = oracle.riemann_convex(spec, 0.0, 1.0)
    xi = np.linspace(-0.5, 1.5, 101)
    vals = fan(xi)
    lam = spec.lam_axes[0]
    inside = (xi > 0) & (xi < 1)
    np.testing.assert_allclose(lam(vals[inside]), xi[inside], atol=1e-9)
    np.testing.assert_allclose(vals[xi <= 0], 0.0, atol=1e-9)
    np.testing.assert_allclose(vals[xi >= 1], 1.0, atol=1e-9)


def test_2d_front_geometry_consistent_with_solution():
    spec = problems.get_problem("2D")
    (surf,) = oracle.exact_shocks(spec)
    rng = np.random.default_rng(5)
    ts = rng.uniform(0.05, spec.T * 0.95, 40)
    eps = 1e-6
    for t in ts:
        g = float(surf.gamma(t))
        if not (spec.lo[0] + 0.1 < g < spec.hi[0] - 0.1):
            continue
        # crossing leg x = gamma(t) at fixed y < gamma(t) jumps the state
        y = g - 0.5
        if y < spec.lo[1] + 0.05:
            continue
        ul = oracle.exact(spec, np.array([[g - eps, y, t]]))[0]
        ur = oracle.exact(spec, np.array([[g + eps, y, t]]))[0]
        assert abs(ul - ur) > 0.1
        f = spec.flux_axes[0]
        s = (f(np.float64(ul)) - f(np.float64(ur))) / (ul - ur)
        assert abs(s - float(surf.speed(t))) < 1e-6
