"""Closed-form reference solutions for the benchmark cases.

Every case has an entropy solution assembled from constant states, simple
fans, and explicit shock paths.  The smooth Burgers case (1A) is the one
exception: its solution is recovered pointwise from the characteristic
relation u = u0(x - u t) by bracketed bisection plus a Newton polish, with
the branch chosen by which side of the shock path the query point lies on.

`exact_shocks` exposes the discontinuity geometry (paths, speeds, and the
states on both sides) so evaluation code and tests can measure distances
to shocks and check jump conditions without re-deriving anything.
"""

from dataclasses import dataclass

import numpy as np

SQRT2 = float(np.sqrt(2.0))
FAN_EDGE_3A = 0.5 * (SQRT2 + 1.0)   # shock speed; also the fan's last speed
BREAK_TIME_1A = 1.0 / np.pi

_CHUNK = 16384


@dataclass(frozen=True)
class ShockTrack:
    """One discontinuity path x = gamma(t) of a 1D solution.

    `left`/`right` give the one-sided states, `speed` the path slope.
    All four are vectorized in t over [t0, t1].  `kinks` lists interior
    times where the formula switches branch.
    """

    case: str
    label: str
    t0: float
    t1: float
    gamma: callable
    speed: callable
    left: callable
    right: callable
    kinks: tuple = ()


@dataclass(frozen=True)
class ShockSurface2D:
    """L-shaped shock set of the 2D case.

    The front is {x = gamma(t), y <= gamma(t)} union {y = gamma(t),
    x <= gamma(t)}; phi is negative exactly between the two legs.
    """

    case: str
    label: str
    t0: float
    t1: float
    gamma: callable
    speed: callable
    left: callable
    right: callable
    kinks: tuple = ()

    def phi(self, x, y, t):
        g = self.gamma(np.asarray(t, dtype=np.float64))
        return (np.asarray(x) - g) * (np.asarray(y) - g)

    def on_front(self, x, y, t, tol):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        g = self.gamma(np.asarray(t, dtype=np.float64))
        leg_x = (np.abs(x - g) <= tol) & (y <= g + tol)
        leg_y = (np.abs(y - g) <= tol) & (x <= g + tol)
        return leg_x | leg_y


# -- smooth Burgers case: characteristic inversion ------------------------

def _implicit_sine_root(x, t, take_last):
    """Roots x0 of x0 + (sin(pi x0) + 0.5) t = x, picked per side.

    All inputs are 1D arrays with t > 0.  The characteristic foot lies in
    [x - 1.5 t, x + 0.5 t] because the data stays in [-0.5, 1.5]; the sign
    of the residual at the bracket ends is fixed, so a scan over 128
    subintervals always finds a crossing.  `take_last` selects the largest
    root (the state right of the shock), otherwise the smallest.
    """
    lo = x - 1.5 * t - 1e-9
    hi = x + 0.5 * t + 1e-9
    frac = np.linspace(0.0, 1.0, 129)
    nodes = lo[None, :] + (hi - lo)[None, :] * frac[:, None]
    g = nodes + (np.sin(np.pi * nodes) + 0.5) * t[None, :] - x[None, :]
    neg = g <= 0.0
    cross = neg[:-1, :] != neg[1:, :]
    idx_first = np.argmax(cross, axis=0)
    idx_last = cross.shape[0] - 1 - np.argmax(cross[::-1, :], axis=0)
    idx = np.where(take_last, idx_last, idx_first)
    cols = np.arange(x.size)
    a = nodes[idx, cols]
    b = nodes[idx + 1, cols]
    a_neg = neg[idx, cols]
    for _ in range(60):
        m = 0.5 * (a + b)
        m_neg = (m + (np.sin(np.pi * m) + 0.5) * t - x) <= 0.0
        same = m_neg == a_neg
        a = np.where(same, m, a)
        b = np.where(same, b, m)
    return 0.5 * (a + b)


def _polish_1a(x, t, u):
    """Newton steps on u = sin(pi (x - u t)) + 0.5 down to machine level."""
    for _ in range(6):
        arg = np.pi * (x - u * t)
        res = u - np.sin(arg) - 0.5
        slope = 1.0 + np.pi * t * np.cos(arg)
        ok = np.abs(slope) > 1e-8
        u = u - np.where(ok, res / np.where(ok, slope, 1.0), 0.0)
    return u


def _solve_1a(x, t, take_last):
    x0 = _implicit_sine_root(x, t, take_last)
    return _polish_1a(x, t, (x - x0) / t)


def _exact_1a(x, t):
    u = np.sin(np.pi * x) + 0.5
    live = t > 1e-13
    if not np.any(live):
        return u
    xl = x[live]
    tl = t[live]
    # Past breaking the shock sits at 1 + t/2 (mod 2); query points right
    # of the nearest shock image take the largest root, the shock point
    # itself keeps the left state.
    shock_img = 1.0 + 0.5 * tl + 2.0 * np.round((xl - 1.0 - 0.5 * tl) / 2.0)
    take_last = (tl > BREAK_TIME_1A) & (xl > shock_img)
    ul = np.empty(xl.size)
    for s in range(0, xl.size, _CHUNK):
        e = min(s + _CHUNK, xl.size)
        ul[s:e] = _solve_1a(xl[s:e], tl[s:e], take_last[s:e])
    u[live] = ul
    return u


def _state_1a(t, take_last):
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    x = 1.0 + 0.5 * t
    u = _solve_1a(x, t, np.full(t.shape, take_last))
    return float(u[0]) if scalar else u


# -- piecewise cases ------------------------------------------------------

def _exact_1b(x, t):
    root = np.sqrt(1.0 + 3.0 * t)
    inside = (x > -root) & (x <= 3.0 * root)
    return np.where(inside, 3.0 * x / (1.0 + 3.0 * t), 0.0)


def _exact_2a(x, t):
    pre = np.where(x <= -5.0 + 12.0 * t, 1.0,
                   np.where(x <= 4.0 - 6.0 * t, 9.0, 19.0))
    post = np.where(x <= 2.0 * t, 1.0, 19.0)
    return np.where(t < 0.5, pre, post)


def _gamma_2b(t):
    t = np.asarray(t, dtype=np.float64)
    mid = -2.0 - 3.0 * t + 8.0 * np.sqrt(np.maximum(t, 0.0))
    return np.where(t < 1.0, 2.0 + t, np.where(t < 4.0, mid, 6.0 - t))


def _speed_2b(t):
    t = np.asarray(t, dtype=np.float64)
    mid = -3.0 + 4.0 / np.sqrt(np.maximum(t, 1e-300))
    return np.where(t < 1.0, 1.0, np.where(t < 4.0, mid, -1.0))


def _exact_2b(x, t):
    g = _gamma_2b(t)
    tw = np.where(t > 0.0, t, 1.0)
    fan = 0.5 * (5.0 - (x + 2.0) / tw)
    early = np.where(x <= -2.0 + t, 2.0,
                     np.where(x <= -2.0 + 5.0 * t, fan,
                              np.where(x <= g, 0.0, 4.0)))
    mid = np.where(x <= -2.0 + t, 2.0, np.where(x <= g, fan, 4.0))
    late = np.where(x <= g, 2.0, 4.0)
    u = np.where(t < 1.0, early, np.where(t < 4.0, mid, late))
    u0 = np.where(x <= -2.0, 2.0, np.where(x <= 2.0, 0.0, 4.0))
    return np.where(t > 0.0, u, u0)


def _fan_3a(xi):
    # inverse of the characteristic speed on the branch u in [1/sqrt(2), 1]
    inner = (2.0 * xi + 1.0 - np.sqrt(4.0 * xi + 1.0)) / xi
    return 0.5 * (1.0 + np.sqrt(np.maximum(1.0 - inner, 0.0)))


def _exact_3a(x, t):
    tw = np.where(t > 0.0, t, 1.0)
    xi = (x - 1.0) / tw
    fan = _fan_3a(np.where(xi > 0.0, xi, 1.0))
    u = np.where(xi <= 0.0, 1.0, np.where(xi <= FAN_EDGE_3A, fan, 0.0))
    u0 = np.where(x <= 1.0, 1.0, 0.0)
    return np.where(t > 0.0, u, u0)


def _exact_3b(x, t):
    tw = np.where(t > 0.0, t, 1.0)
    fan1 = np.sqrt(np.maximum(x, 0.0) / tw)
    fan2 = np.sqrt(np.maximum(x - 1.0, 0.0) / tw)
    u = np.where(x <= t, -2.0,
                 np.where(x <= 2.25 * t, fan1,
                          np.where(x <= 1.0 + 2.25 * t, 1.5,
                                   np.where(x <= 1.0 + 4.0 * t, fan2, 2.0))))
    u0 = np.where(x <= 0.0, -2.0, np.where(x <= 1.0, 1.5, 2.0))
    return np.where(t > 0.0, u, u0)


def _exact_v2d(z, t):
    """1D profile the 2D solution is built from: states 1 | 5 | -3."""
    g = _gamma_2b(t)
    tw = np.where(t > 0.0, t, 1.0)
    fan = (z + 2.0) / tw
    early = np.where(z <= -2.0 + t, 1.0,
                     np.where(z <= -2.0 + 5.0 * t, fan,
                              np.where(z <= g, 5.0, -3.0)))
    mid = np.where(z <= -2.0 + t, 1.0, np.where(z <= g, fan, -3.0))
    late = np.where(z <= g, 1.0, -3.0)
    u = np.where(t < 1.0, early, np.where(t < 4.0, mid, late))
    u0 = np.where(z <= -2.0, 1.0, np.where(z <= 2.0, 5.0, -3.0))
    return np.where(t > 0.0, u, u0)


def _left_2b(t):
    t = np.asarray(t, dtype=np.float64)
    mid = 4.0 - 4.0 / np.sqrt(np.maximum(t, 1e-300))
    return np.where(t < 1.0, 0.0, np.where(t < 4.0, mid, 2.0))


def _left_2d(t):
    t = np.asarray(t, dtype=np.float64)
    mid = -3.0 + 8.0 / np.sqrt(np.maximum(t, 1e-300))
    return np.where(t < 1.0, 5.0, np.where(t < 4.0, mid, 1.0))


# -- public API -----------------------------------------------------------

def exact(spec, points):
    """Entropy solution values at rows of (x[, y], t)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != spec.d + 1:
        raise ValueError(
            f"expected points of shape (n, {spec.d + 1}) for case {spec.id}"
        )
    t = points[:, -1]
    if spec.id == "2D":
        return _exact_v2d(np.maximum(points[:, 0], points[:, 1]), t)
    x = points[:, 0]
    fn = {"1A": _exact_1a, "1B": _exact_1b, "2A": _exact_2a,
          "2B": _exact_2b, "3A": _exact_3a, "3B": _exact_3b}[spec.id]
    return fn(x, t)


def exact_grid(spec, grid):
    return exact(spec, grid.points)


def _const(value):
    return lambda t: np.full(np.shape(np.asarray(t, dtype=np.float64)), value) \
        if np.ndim(t) else value


def exact_shocks(spec):
    """Discontinuity tracks of the case (a 2D case yields one surface)."""
    cid = spec.id
    if cid == "1A":
        return (ShockTrack(
            case=cid, label="interior", t0=BREAK_TIME_1A, t1=spec.T,
            gamma=lambda t: 1.0 + 0.5 * np.asarray(t, dtype=np.float64),
            speed=_const(0.5),
            left=lambda t: _state_1a(t, False),
            right=lambda t: _state_1a(t, True)),)
    if cid == "1B":
        def gm(t):
            return -np.sqrt(1.0 + 3.0 * np.asarray(t, dtype=np.float64))

        def gp(t):
            return 3.0 * np.sqrt(1.0 + 3.0 * np.asarray(t, dtype=np.float64))

        return (
            ShockTrack(case=cid, label="left", t0=0.0, t1=spec.T,
                       gamma=gm,
                       speed=lambda t: -1.5 / np.sqrt(1.0 + 3.0 * np.asarray(t, dtype=np.float64)),
                       left=_const(0.0),
                       right=lambda t: -3.0 / np.sqrt(1.0 + 3.0 * np.asarray(t, dtype=np.float64))),
            ShockTrack(case=cid, label="right", t0=0.0, t1=spec.T,
                       gamma=gp,
                       speed=lambda t: 4.5 / np.sqrt(1.0 + 3.0 * np.asarray(t, dtype=np.float64)),
                       left=lambda t: 9.0 / np.sqrt(1.0 + 3.0 * np.asarray(t, dtype=np.float64)),
                       right=_const(0.0)),
        )
    if cid == "2A":
        return (
            ShockTrack(case=cid, label="fast", t0=0.0, t1=0.5,
                       gamma=lambda t: -5.0 + 12.0 * np.asarray(t, dtype=np.float64),
                       speed=_const(12.0), left=_const(1.0), right=_const(9.0)),
            ShockTrack(case=cid, label="slow", t0=0.0, t1=0.5,
                       gamma=lambda t: 4.0 - 6.0 * np.asarray(t, dtype=np.float64),
                       speed=_const(-6.0), left=_const(9.0), right=_const(19.0)),
            ShockTrack(case=cid, label="merged", t0=0.5, t1=spec.T,
                       gamma=lambda t: 2.0 * np.asarray(t, dtype=np.float64),
                       speed=_const(2.0), left=_const(1.0), right=_const(19.0)),
        )
    if cid == "2B":
        return (ShockTrack(case=cid, label="main", t0=0.0, t1=spec.T,
                           gamma=_gamma_2b, speed=_speed_2b,
                           left=_left_2b, right=_const(4.0),
                           kinks=(1.0, 4.0)),)
    if cid == "3A":
        return (ShockTrack(
            case=cid, label="front", t0=0.0, t1=spec.T,
            gamma=lambda t: 1.0 + FAN_EDGE_3A * np.asarray(t, dtype=np.float64),
            speed=_const(FAN_EDGE_3A),
            left=_const(1.0 / SQRT2), right=_const(0.0)),)
    if cid == "3B":
        return (ShockTrack(
            case=cid, label="left", t0=0.0, t1=spec.T,
            gamma=lambda t: np.asarray(t, dtype=np.float64) + 0.0,
            speed=_const(1.0), left=_const(-2.0), right=_const(1.0)),)
    if cid == "2D":
        return (ShockSurface2D(case=cid, label="corner", t0=0.0, t1=spec.T,
                               gamma=_gamma_2b, speed=_speed_2b,
                               left=_left_2d, right=_const(-3.0),
                               kinks=(1.0, 4.0)),)
    raise ValueError(f"unknown case {spec.id!r}")


def wavefronts(spec):
    """All curves x = c(t) where the 1D solution loses smoothness.

    Shock paths plus fan edges and plateau joints.  Returned as
    (gamma, t0, t1) triples; used to keep finite-difference residual
    checks away from points where one-sided derivatives disagree.
    """
    tracks = [(tr.gamma, tr.t0, tr.t1) for tr in exact_shocks(spec)
              if isinstance(tr, ShockTrack)]
    T = spec.T
    cid = spec.id
    extra = []
    if cid == "2B":
        extra = [(lambda t: -2.0 + np.asarray(t, dtype=np.float64), 0.0, min(4.0, T)),
                 (lambda t: -2.0 + 5.0 * np.asarray(t, dtype=np.float64), 0.0, min(1.0, T))]
    elif cid == "3A":
        extra = [(lambda t: np.ones_like(np.asarray(t, dtype=np.float64)), 0.0, T)]
    elif cid == "3B":
        extra = [(lambda t: 2.25 * np.asarray(t, dtype=np.float64), 0.0, T),
                 (lambda t: 1.0 + 2.25 * np.asarray(t, dtype=np.float64), 0.0, T),
                 (lambda t: 1.0 + 4.0 * np.asarray(t, dtype=np.float64), 0.0, T)]
    return tracks + extra


def classify_wave(spec, u_l, u_r, tol=1e-12):
    """Label the jump (u_l, u_r): 'contact', 'shock', or 'rarefaction'."""
    u_l = float(u_l)
    u_r = float(u_r)
    if u_l == u_r:
        raise ValueError("equal states carry no wave")
    flux = spec.flux_axes[0]
    lam = spec.lam_axes[0]
    s = (flux(np.float64(u_l)) - flux(np.float64(u_r))) / (u_l - u_r)
    ll = float(lam(np.float64(u_l)))
    lr = float(lam(np.float64(u_r)))
    if abs(ll - s) <= tol and abs(lr - s) <= tol:
        return "contact"
    if ll >= s - tol and s >= lr - tol:
        return "shock"
    return "rarefaction"


def riemann_convex(spec, u_l, u_r, tol=1e-12):
    """Similarity profile u(xi) for a single jump, xi = x/t.

    Requires the characteristic speed to be strictly monotone between the
    states; compressive data gives the left-closed shock profile, the
    other orientation an inverted fan.
    """
    u_l = float(u_l)
    u_r = float(u_r)
    if u_l == u_r:
        raise ValueError("equal states carry no wave")
    flux = spec.flux_axes[0]
    lam = spec.lam_axes[0]
    probe = np.linspace(u_l, u_r, 257)
    steps = np.diff(lam(probe))
    if not (np.all(steps > 0.0) or np.all(steps < 0.0)):
        raise ValueError(
            "characteristic speed is not strictly monotone between the states")
    ll = float(lam(np.float64(u_l)))
    lr = float(lam(np.float64(u_r)))
    if ll >= lr:
        s = (flux(np.float64(u_l)) - flux(np.float64(u_r))) / (u_l - u_r)

        def profile(xi):
            xi = np.asarray(xi, dtype=np.float64)
            return np.where(xi <= s, u_l, u_r)

        return profile

    def profile(xi):
        xi = np.asarray(xi, dtype=np.float64)
        a = np.full(xi.shape, u_l)
        b = np.full(xi.shape, u_r)
        target = np.clip(xi, ll, lr)
        # lam is monotone increasing along the segment from u_l to u_r
        while np.max(np.abs(b - a)) > tol:
            m = 0.5 * (a + b)
            low = lam(m) < target
            a = np.where(low, m, a)
            b = np.where(low, b, m)
        u = 0.5 * (a + b)
        return np.where(xi <= ll, u_l, np.where(xi > lr, u_r, u))

    return profile
