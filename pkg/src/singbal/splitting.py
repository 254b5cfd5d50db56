"""Dyadic flux splitting: Godunov transport between explicit source kicks u <- u + h G[u]."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import GridFunction, derivative, fractional_tv, norm
from .kernels import L1_SINGULAR, TABULATED, Kernel, KernelError, apply_pv
from .semigroup import (
    BoundConstants,
    EvolutionError,
    Flux,
    godunov_step,
    l1kernel_oleinik_check,
    tv_halfp1_bound,
)

DIAG_FIELDS = ("t", "l1", "l2", "l6", "linf", "min_dfu_x")


@dataclass(frozen=True)
class SplittingConfig:
    """Time step h = 2^-nu; T is rounded up to a multiple of h.

    ``dt`` optionally fixes the Godunov sub-step; it must divide h.
    ``method`` picks how G is applied: "auto" uses the Fourier multiplier
    for Hilbert kernels on periodic grids and pair quadrature otherwise.
    """

    nu: int
    T: float
    flux: Flux
    kernel: Kernel
    n: int | None = None
    cfl: float = 0.9
    dt: float | None = None
    ceiling: float = 1e6
    method: str = "auto"
    requested_T: float = field(default=None)

    def __post_init__(self):
        if int(self.nu) != self.nu or self.nu < 1:
            raise ValueError(f"nu must be an integer >= 1, got {self.nu}")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        h = self.h
        steps = int(np.ceil(self.T / h - 1e-9))
        object.__setattr__(self, "requested_T", self.T if self.requested_T is None else self.requested_T)
        object.__setattr__(self, "T", steps * h)
        if self.dt is not None:
            ratio = h / self.dt
            if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
                raise ValueError(f"sub-step dt={self.dt} must divide 2^-nu={h}")

    @property
    def h(self) -> float:
        return 2.0 ** (-self.nu)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.h))

    def with_nu(self, nu: int) -> "SplittingConfig":
        return SplittingConfig(nu, self.requested_T, self.flux, self.kernel, self.n, self.cfl, self.dt, self.ceiling, self.method)


@dataclass
class SplittingRun:
    config: SplittingConfig
    u0: GridFunction
    times: np.ndarray
    pre: list[GridFunction]
    post: list[GridFunction]
    diagnostics: list[dict]
    blown_up: bool = False

    @property
    def final(self) -> GridFunction:
        return self.post[-1]

    def at(self, t: float, side: str = "post") -> GridFunction:
        """State at dyadic time t (post-kick by default, ``side="pre"`` for t-)."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise KeyError(f"no snapshot at t={t}")
        return (self.pre if side == "pre" else self.post)[i]

    def export(self, directory) -> Path:
        d = Path(directory)
        (d / "snapshots").mkdir(parents=True, exist_ok=True)
        for t, a, b in zip(self.times, self.pre, self.post):
            a.save(d / "snapshots" / f"t{t:.8f}_pre.txt")
            b.save(d / "snapshots" / f"t{t:.8f}_post.txt")
        with open(d / "diagnostics.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DIAG_FIELDS)
            for row in self.diagnostics:
                w.writerow([repr(float(row[k])) for k in DIAG_FIELDS])
        return d


def _apply_G(cfg: SplittingConfig, u: GridFunction) -> GridFunction:
    method = cfg.method
    if method == "auto":
        method = "spectral" if (u.is_periodic and cfg.kernel.spectral_ok) else "pair-quadrature"
    return apply_pv(cfg.kernel, u, method)


def _diagnostics(t: float, u: GridFunction, flux: Flux) -> dict:
    v = u.with_values(flux.df(u.values))
    dv = derivative(v, 1, "central")
    return {
        "t": t,
        "l1": norm(u, 1),
        "l2": norm(u, 2),
        "l6": norm(u, 6),
        "linf": norm(u, np.inf),
        "min_dfu_x": float(dv.values.min()),
        "max_dfu_x": float(dv.values.max()),
    }


def _interval(u: np.ndarray, h: float, cfg: SplittingConfig, g: GridFunction, record: bool = False):
    """Godunov transport over one splitting interval of length h."""
    periodic = g.is_periodic
    now = 0.0
    states = [(0.0, u)] if record else None
    while now < h * (1 - 1e-13):
        lo, hi = u.min(), u.max()
        if not periodic:
            lo, hi = min(lo, 0.0), max(hi, 0.0)
        speed = cfg.flux.max_speed(lo, hi)
        if cfg.dt is not None:
            step = min(cfg.dt, h - now)
            if speed * step > g.dx * (1 + 1e-12):
                raise EvolutionError(f"fixed sub-step {cfg.dt} violates CFL (speed {speed:.4g}, dx {g.dx:.4g})")
        else:
            step = h - now if speed == 0 else min(cfg.cfl * g.dx / speed, h - now)
        u = godunov_step(u, step, g.dx, cfg.flux, periodic)
        now += step
        if not np.all(np.isfinite(u)):
            raise EvolutionError(f"non-finite state inside splitting interval at offset {now:.6g}")
        if record:
            states.append((now, u))
    return (u, states) if record else u


def run_splitting(u0: GridFunction, cfg: SplittingConfig) -> SplittingRun:
    if cfg.n is not None and cfg.n != u0.n:
        raise ValueError(f"initial data has n={u0.n}, config expects n={cfg.n}")
    if not np.all(np.isfinite(u0.values)):
        raise ValueError("initial data must be finite")
    h = cfg.h
    times = [0.0]
    pre, post = [u0], [u0]
    diags = [_diagnostics(0.0, u0, cfg.flux)]
    u = u0
    blown = False
    for ell in range(1, cfg.steps + 1):
        transported = u.with_values(_interval(np.array(u.values), h, cfg, u0))
        kicked = transported + h * _apply_G(cfg, transported) if not cfg.kernel.is_zero else transported
        t = ell * h
        times.append(t)
        pre.append(transported)
        post.append(kicked)
        diags.append(_diagnostics(t, kicked, cfg.flux))
        u = kicked
        if norm(u, np.inf) > cfg.ceiling:
            blown = True
            break
    return SplittingRun(cfg, u0, np.array(times), pre, post, diags, blown)


# -- diagnostics --------------------------------------------------------------


def l2_growth_check(run: SplittingRun) -> float:
    cfg = run.config
    l20 = norm(run.u0, 2)
    if l20 == 0:
        return 0.0
    G = cfg.kernel.G_op_norm
    ratios = [
        norm(u, 2) / ((1 + cfg.h * G) ** (t / cfg.h) * l20) for t, u in zip(run.times, run.post)
    ]
    return float(max(ratios))


def self_convergence(u0: GridFunction, cfg: SplittingConfig, nu_list, R: float):
    """L1([-R,R]) differences between consecutive levels at the final time.

    All levels share one dyadic Godunov sub-step, so the differences isolate
    the splitting error.
    """
    nus = sorted(int(v) for v in nu_list)
    if len(nus) < 3:
        raise ValueError("self_convergence needs at least three levels")
    dt = cfg.dt
    if dt is None:
        speed = cfg.flux.max_speed(float(u0.values.min()), float(u0.values.max()))
        k = nus[-1]
        while 2.0 ** (-k) * 1.5 * max(speed, 1e-12) > cfg.cfl * u0.dx:
            k += 1
        dt = 2.0 ** (-k)
    runs = {}
    for nu in nus:
        c = SplittingConfig(nu, cfg.requested_T, cfg.flux, cfg.kernel, cfg.n, cfg.cfl, dt, cfg.ceiling, cfg.method)
        runs[nu] = run_splitting(u0, c).final
    mask = np.abs(u0.x) <= R
    table = []
    for a, b in zip(nus[:-1], nus[1:]):
        diff = float(np.sum(np.abs(runs[a].values - runs[b].values)[mask]) * u0.dx)
        table.append({"nu": a, "nu_next": b, "l1_diff": diff})
    for prev, row in zip(table[:-1], table[1:]):
        row["ratio"] = row["l1_diff"] / prev["l1_diff"] if prev["l1_diff"] > 0 else float("nan")
    return table


# -- entropy residual ---------------------------------------------------------


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    q = 1 - s[inside] ** 2
    out[inside] = np.exp(-1 / q)
    return out


def _dbump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    q = 1 - si**2
    out[inside] = np.exp(-1 / q) * (-2 * si / q**2)
    return out


@dataclass(frozen=True)
class TestFunction:
    """phi(t,x) = b((t-tc)/wt) b((x-xc)/wx) with the standard C-infinity bump b."""

    tc: float
    xc: float
    wt: float
    wx: float

    def phi(self, t, x):
        return _bump((t - self.tc) / self.wt) * _bump((x - self.xc) / self.wx)

    def phi_t(self, t, x):
        return _dbump((t - self.tc) / self.wt) / self.wt * _bump((x - self.xc) / self.wx)

    def phi_x(self, t, x):
        return _bump((t - self.tc) / self.wt) * _dbump((x - self.xc) / self.wx) / self.wx


def lattice_test_functions(T: float, x_lo: float, x_hi: float, count: int = 5, wt_frac: float = 0.2, wx_frac: float = 0.1):
    """count x count centers strictly inside (0,T) x (x_lo, x_hi)."""
    wt = wt_frac * T
    wx = wx_frac * (x_hi - x_lo)
    tcs = np.linspace(wt, T - wt, count + 2)[1:-1]
    xcs = np.linspace(x_lo + wx, x_hi - wx, count + 2)[1:-1]
    return [TestFunction(float(tc), float(xc), wt, wx) for tc in tcs for xc in xcs]


def _check_support(tf: TestFunction, T: float, g: GridFunction):
    if tf.tc - tf.wt <= 0 or tf.tc + tf.wt >= T:
        raise ValueError(f"test function time support [{tf.tc - tf.wt}, {tf.tc + tf.wt}] leaves (0, {T})")
    if tf.xc - tf.wx <= g.x[0] or tf.xc + tf.wx >= g.x[-1]:
        raise ValueError(f"test function space support leaves the domain ({g.x[0]}, {g.x[-1]})")


_GAUSS_S, _GAUSS_W = np.polynomial.legendre.leggauss(3)
_GAUSS_S = 0.5 * (_GAUSS_S + 1)
_GAUSS_W = 0.5 * _GAUSS_W


def entropy_residual(run: SplittingRun, k, phi_centers, phi_width, return_all: bool = False):
    """Minimum over test functions and levels k of the discrete entropy functional.

    Transport intervals are re-evolved sub-step by sub-step. The state is
    taken linear in time across each sub-step and integrated against phi_t,
    phi_x with 3-point Gauss-Legendre, so the quadrature stays accurate when
    sub-steps are long compared with the test function. Each kick at t_l
    contributes h * G[u(t_l-)] sign(u(t_l) - k) phi(t_l), which dominates the
    jump of |u - k| phi across the kick.

    ``phi_centers`` is a list of (tc, xc); ``phi_width`` is (wt, wx) or a
    single number used for both. TestFunction instances are also accepted.
    """
    cfg = run.config
    g = run.u0
    if phi_width is None:
        wt = wx = None
    elif np.isscalar(phi_width):
        wt = wx = float(phi_width)
    else:
        wt, wx = phi_width
    tfs = [c if isinstance(c, TestFunction) else TestFunction(float(c[0]), float(c[1]), wt, wx) for c in phi_centers]
    T_end = run.times[-1]
    for tf in tfs:
        _check_support(tf, T_end, g)
    ks = np.atleast_1d(np.asarray(k, dtype=float))
    x = g.x
    f = cfg.flux.f
    fk = f(ks)
    acc = np.zeros((len(tfs), ks.size))
    t_lo = np.array([tf.tc - tf.wt for tf in tfs])
    t_hi = np.array([tf.tc + tf.wt for tf in tfs])

    def integrands(u):
        au = np.abs(u[None, :] - ks[:, None])
        q = (f(u)[None, :] - fk[:, None]) * np.sign(u[None, :] - ks[:, None])
        return au, q

    for ell in range(len(run.times) - 1):
        t0 = run.times[ell]
        _, states = _interval(np.array(run.post[ell].values), cfg.h, cfg, g, record=True)
        prev = None
        for s, u in states:
            cur = (t0 + s, *integrands(u))
            if prev is not None:
                ta, a_prev, q_prev = prev
                tb, a_cur, q_cur = cur
                dt = tb - ta
                for i in np.flatnonzero((t_hi > ta) & (t_lo < tb)):
                    tf = tfs[i]
                    for sj, wj in zip(_GAUSS_S, _GAUSS_W):
                        tj = ta + sj * dt
                        pt, px = tf.phi_t(tj, x), tf.phi_x(tj, x)
                        val = (1 - sj) * (a_prev @ pt + q_prev @ px) + sj * (a_cur @ pt + q_cur @ px)
                        acc[i] += wj * dt * val * g.dx
            prev = cur
        tl = run.times[ell + 1]
        if not cfg.kernel.is_zero:
            src = run.post[ell + 1].values - run.pre[ell + 1].values
            sgn = np.sign(run.post[ell + 1].values[None, :] - ks[:, None])
            for i in np.flatnonzero((t_hi > tl) & (t_lo < tl)):
                acc[i] += (sgn * src[None, :]) @ tfs[i].phi(tl, x) * g.dx
    if return_all:
        return acc
    return float(acc.min())


def entropy_tolerance(C: float, run: SplittingRun) -> float:
    return C * (run.u0.dx + run.config.h)


# -- L1 kernel diagnostics ----------------------------------------------------


def _require_l1(kernel: Kernel):
    if kernel.kind not in (L1_SINGULAR, TABULATED) and not kernel.is_zero:
        raise KernelError(f"kernel kind {kernel.kind!r} has no L1 bound")


def l1_decay_check(run: SplittingRun, L_K: float | None = None) -> float:
    kernel = run.config.kernel
    _require_l1(kernel)
    LK = kernel.L_K if L_K is None else L_K
    l10 = norm(run.u0, 1)
    if l10 == 0:
        return 0.0
    return float(max(norm(u, 1) / (np.exp(LK * t) * l10) for t, u in zip(run.times, run.post)))


def fit_constants(run: SplittingRun, tau: float) -> dict:
    """Empirical stand-ins for the non-constructive constants at time tau.

    C = (1 + L_K) max_{s in [tau/2, tau]} ||u(s)||_inf bounds the state and
    M_fit = C * max |f''| on [-C, C]; the same number is used for C_T.
    """
    kernel = run.config.kernel
    _require_l1(kernel)
    sel = (run.times >= tau / 2 - 1e-12) & (run.times <= tau + 1e-12)
    sup = max(norm(run.post[i], np.inf) for i in np.flatnonzero(sel))
    C = (1 + (kernel.L_K or 0.0)) * sup
    mesh = np.linspace(-C, C, 2001)
    M_fit = float(C * np.max(np.abs(run.config.flux.d2f(mesh))))
    return {"sup_u": float(sup), "C": float(C), "M_fit": M_fit, "C_T": M_fit}


def tv_halfp1_bound_check(run: SplittingRun, tau: float, a: float, b: float, fitted: dict | None = None):
    cfg = run.config
    _require_l1(cfg.kernel)
    if tau <= 0:
        raise ValueError("tau must be positive")
    flux = cfg.flux
    fitted = fit_constants(run, tau) if fitted is None else fitted
    consts = BoundConstants.from_data(flux, cfg.kernel.G_op_norm, run.u0, cfg.kernel.L_K)
    u = run.at(tau)
    measured = fractional_tv(u, 1.0 / (2 * flux.p1), a, b)
    bound = tv_halfp1_bound(tau, a, b, flux.C_f, consts.Gamma3, fitted["M_fit"])
    return float(measured), float(bound)


def l1kernel_oleinik_run_check(run: SplittingRun, tau: float, fitted: dict | None = None) -> float:
    fitted = fit_constants(run, tau) if fitted is None else fitted
    return l1kernel_oleinik_check(run.at(tau), tau, fitted["C_T"], run.config.flux)


# -- characteristics ----------------------------------------------------------


def trace_characteristics(run: SplittingRun, feet, substeps: int = 8):
    """Forward characteristics x' = f'(u) through the splitting trajectory.

    On each interval the speed field is interpolated linearly in time between
    the post-kick state at t_l and the pre-kick state at t_{l+1}.
    """
    g = run.u0
    x = np.array(feet, dtype=float)
    path = [x.copy()]
    times = [0.0]
    df = run.config.flux.df

    def speed(state, pos):
        if g.is_periodic:
            xp = np.append(g.x, g.x[0] + g.length)
            vp = np.append(state, state[0])
            r = g.x0 + np.mod(pos - g.x0, g.length)
            return df(np.interp(r, xp, vp))
        return df(np.interp(pos, g.x, state, left=0.0, right=0.0))

    h = run.config.h
    for ell in range(len(run.times) - 1):
        a, b = run.post[ell].values, run.pre[ell + 1].values
        dt = h / substeps
        for j in range(substeps):
            s0, s1 = j / substeps, (j + 1) / substeps
            k1 = speed((1 - s0) * a + s0 * b, x)
            k2 = speed((1 - s1) * a + s1 * b, x + dt * k1)
            x = x + 0.5 * dt * (k1 + k2)
        path.append(x.copy())
        times.append(run.times[ell + 1])
    return np.array(times), np.array(path)


def holder_characteristic_check(run: SplittingRun, feet, t_max: float = 1.0):
    """max over pairs tau1 < tau2 <= t_max of |x(tau2)-x(tau1)| / (tau2-tau1)^(1-gamma_p).

    Returned with Gamma1, the contract being ratio <= Gamma1.
    """
    cfg = run.config
    consts = BoundConstants.from_data(cfg.flux, cfg.kernel.G_op_norm, run.u0)
    times, path = trace_characteristics(run, feet)
    sel = times <= t_max + 1e-12
    times, path = times[sel], path[sel]
    expo = 1 - consts.gamma_p
    worst = 0.0
    for i in range(len(times) - 1):
        d = np.abs(path[i + 1 :] - path[i])
        span = (times[i + 1 :] - times[i])[:, None] ** expo
        worst = max(worst, float(np.max(d / span)))
    return worst, consts.Gamma1
