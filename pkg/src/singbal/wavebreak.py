"""Smooth pseudospectral solver, wave-breaking criteria and the gradient-norm bound systems."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import GridFunction, derivative, norm, wavenumbers
from .kernels import Kernel, spectral_symbol
from .semigroup import Flux


class ResolutionError(RuntimeError):
    pass


class CriterionError(ValueError):
    pass


BOX_NOTE = (
    "line problem emulated on a periodic box; data tails must be below 1e-8 "
    "of the peak for the emulation to be meaningful"
)


# -- smooth solver ------------------------------------------------------------


@dataclass
class SmoothTrajectory:
    times: np.ndarray
    states: list[GridFunction]
    m: np.ndarray
    tail: np.ndarray
    stop_reason: str

    def norms(self) -> dict:
        """Measured ||u_x||_2^2, ||u_xx||_2^2, ||u_x||_6^6 series."""
        ux2, uxx2, ux6 = [], [], []
        for u in self.states:
            d1 = derivative(u, 1)
            d2 = derivative(u, 2)
            ux2.append(norm(d1, 2) ** 2)
            uxx2.append(norm(d2, 2) ** 2)
            ux6.append(norm(d1, 6) ** 6)
        return {"ux_l2_sq": np.array(ux2), "uxx_l2_sq": np.array(uxx2), "ux_l6_6": np.array(ux6)}


def m_of_t(u: GridFunction, flux: Flux) -> float:
    """|min_x [f'(u)]_x|, zero when the minimum is nonnegative."""
    if u.is_periodic:
        ux = derivative(u, 1).values
    else:
        ux = derivative(u, 1, "central").values
    low = float(np.min(flux.d2f(u.values) * ux))
    return -low if low < 0 else 0.0


def spectral_tail(values: np.ndarray) -> float:
    """max |u^| over modes in [0.8, 1] of the 2/3 cutoff, relative to the largest mode."""
    n = values.size
    uh = np.abs(np.fft.rfft(values))
    top = uh.max()
    if top == 0:
        return 0.0
    cut = n // 3
    band = uh[int(0.8 * cut) : cut + 1]
    return float(band.max() / top)


def smooth_solve(
    u0: GridFunction,
    flux: Flux,
    kernel: Kernel,
    dt: float | None = None,
    m_ceiling: float | None = None,
    t_max: float | None = None,
    tail_abort: float = 1e-2,
    tail_initial: float = 1e-8,
):
    """RK4 pseudospectral evolution until m(t) passes ``m_ceiling`` or ``t_max``.

    Returns (trajectory, observed T* or None, fit) where fit is
    (slope, intercept, rms residual) of the least-squares line through 1/m(t)
    over the final decade of growth.
    """
    if not u0.is_periodic:
        raise ResolutionError("smooth_solve needs a periodic grid")
    tail0 = spectral_tail(u0.values)
    if tail0 > tail_initial:
        raise ResolutionError(f"initial data under-resolved: spectral tail {tail0:.2e} > {tail_initial:g}")
    n, dx = u0.n, u0.dx
    k = wavenumbers(n, dx)
    mask = (np.abs(np.fft.fftfreq(n)) * n < n / 3).astype(float)
    ikm = 1j * k * mask
    sym = spectral_symbol(kernel, n, dx)

    def rhs(uh):
        u = np.real(np.fft.ifft(uh))
        return -ikm * np.fft.fft(flux.f(u)) + sym * uh

    m0 = m_of_t(u0, flux)
    speed = float(np.max(np.abs(flux.df(u0.values))))
    if dt is None:
        dt = 0.25 * dx / max(speed, 1e-12)
        if m0 > 0:
            dt = min(dt, 1 / (200 * m0))
    elif speed * dt > 0.5 * dx:
        raise ResolutionError(f"dt={dt} violates the advective CFL bound 0.5*dx/max|f'(u0)|")
    if m_ceiling is None:
        m_ceiling = np.inf if m0 == 0 else 4 * m0
    if t_max is None:
        t_max = 2.0 / m0 if m0 > 0 else 1.0

    uh = np.fft.fft(u0.values)
    times, states, ms, tails = [0.0], [u0], [m0], [tail0]
    t = 0.0
    reason = "time ceiling"
    while t < t_max - 1e-14:
        h = min(dt, t_max - t)
        k1 = rhs(uh)
        k2 = rhs(uh + 0.5 * h * k1)
        k3 = rhs(uh + 0.5 * h * k2)
        k4 = rhs(uh + h * k3)
        uh = uh + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        vals = np.real(np.fft.ifft(uh))
        if not np.all(np.isfinite(vals)):
            raise ResolutionError(f"non-finite state at t={t:.6g}")
        u = u0.with_values(vals)
        m = m_of_t(u, flux)
        tail = spectral_tail(vals)
        if tail > tail_abort and m < m_ceiling:
            raise ResolutionError(
                f"spectral tail {tail:.2e} exceeds {tail_abort:g} at t={t:.6g} with m={m:.4g} below ceiling {m_ceiling:.4g}"
            )
        times.append(t)
        states.append(u)
        ms.append(m)
        tails.append(tail)
        if m >= m_ceiling:
            reason = "m ceiling"
            break
    traj = SmoothTrajectory(np.array(times), states, np.array(ms), np.array(tails), reason)
    if reason != "m ceiling":
        return traj, None, None
    Tstar, fit = extrapolate_tstar(traj.times, traj.m)
    return traj, Tstar, fit


def extrapolate_tstar(times, m):
    """Zero of the least-squares line through 1/m over the last decade of growth."""
    times, m = np.asarray(times), np.asarray(m)
    sel = (m >= m[-1] / 10) & (m > 0)
    # at least the final few samples
    if sel.sum() < 5:
        sel = np.zeros_like(sel)
        sel[-5:] = True
    x, y = times[sel], 1.0 / m[sel]
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(-intercept / slope), (float(slope), float(intercept), resid)


# -- criteria -----------------------------------------------------------------


def data_norms(u: GridFunction, flux: Flux | None = None) -> dict:
    d1 = derivative(u, 1)
    d2 = derivative(u, 2)
    out = {
        "l2": norm(u, 2),
        "linf": norm(u, np.inf),
        "dx_l2": norm(d1, 2),
        "dxx_l2": norm(d2, 2),
        "dx_l6": norm(d1, 6),
        "inf_dx": float(d1.values.min()),
    }
    if flux is not None:
        out["inf_dfu_x"] = float(np.min(flux.d2f(u.values) * d1.values))
    return out


@dataclass
class BreakingCriterion:
    theorem: str
    theta: float
    inputs: dict
    norms: dict
    derived: dict
    satisfied: bool
    bracket: tuple[float, float] | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bracket"] = list(self.bracket) if self.bracket else None
        return d


def _bracket(m0: float, theta: float):
    if m0 <= 0:
        return None
    return (1.0 / ((1 + theta) * m0), 1.0 / ((1 - theta) * m0))


def criterion_quadratic(u0: GridFunction, a: float, theta: float = 0.25) -> BreakingCriterion:
    if not 0 < theta <= 0.25:
        raise CriterionError(f"theta must lie in (0, 1/4], got {theta}")
    if a <= 0:
        raise CriterionError("a must be positive")
    nm = data_norms(u0)
    lhs = abs(min(nm["inf_dx"], 0.0))
    rhs = 2 ** 0.75 * np.sqrt(a) / np.sqrt(theta) * nm["dx_l2"] ** 0.25 * nm["dxx_l2"] ** 0.25
    m0 = 2 * a * lhs
    Z0 = 2 ** 1.5 * a * np.sqrt(nm["dx_l2"] * nm["dxx_l2"])
    derived = {"m0": m0, "threshold": float(rhs), "Z0": float(Z0), "inf_du0": -lhs}
    ok = bool(lhs > rhs)
    return BreakingCriterion("quadratic", theta, {"a": a}, nm, derived, ok, _bracket(m0, theta))


def threshold_amplitude(profile: GridFunction, a: float, theta: float = 0.25) -> float:
    """Amplitude A* at which A * profile meets the quadratic criterion with equality.

    The left side is degree 1 in A and the right side degree 1/2, so
    A * profile satisfies the criterion exactly when A > A*.
    """
    nm = data_norms(profile)
    slope = abs(min(nm["inf_dx"], 0.0))
    if slope == 0:
        return float("inf")
    c = 2**0.75 * np.sqrt(a) / np.sqrt(theta)
    return float(c**2 * np.sqrt(nm["dx_l2"] * nm["dxx_l2"]) / slope**2)


def theta_p(p: float) -> float:
    return (2 - 3 * p) / 16


def eta_parts(nm: dict, Gamma: float, p: float, f2_at_0: float):
    v1, v2, v6, M = nm["dx_l2"], nm["dxx_l2"], nm["dx_l6"], nm["l2"]
    eta1 = v1**2 * v2**2 + 2 * Gamma * v6**6 * (v1**2 + 2**p * M**p * v1 ** (2 + p))
    eta2 = np.sqrt(2) * f2_at_0 + Gamma * (
        4 * np.sqrt(M * v1) + (p + 2) / (p + 1) * 2 ** (1 + p / 2) * (M * v1) ** ((p + 1) / 2)
    )
    return float(eta1), float(eta2), float(eta1 ** 0.125 * eta2**0.5)


def _growth_constants(flux: Flux):
    if flux.Gamma is None or flux.p is None:
        raise CriterionError(f"flux {flux.kind!r} has no f''' growth bound")
    if not 0 <= flux.p < 2 / 3:
        raise CriterionError(f"growth exponent p={flux.p} must lie in [0, 2/3)")
    return flux.Gamma, flux.p


def criterion_growth(u0: GridFunction, flux: Flux, C_G: float, theta: float | None = None) -> BreakingCriterion:
    Gamma, p = _growth_constants(flux)
    tp = theta_p(p)
    theta = tp / 2 if theta is None else theta
    if not 0 < theta < tp:
        raise CriterionError(f"theta must lie in (0, {tp}), got {theta}")
    nm = data_norms(u0, flux)
    eta1, eta2, eta = eta_parts(nm, Gamma, p, flux.f2_at_0)
    m0 = abs(min(nm["inf_dfu_x"], 0.0))
    t1 = 2 * (1 + 6 * C_G + Gamma) / ((2 - 3 * p) - 16 * theta)
    t2 = eta / np.sqrt(theta)
    M = nm["l2"]
    derived = {
        "theta_p": tp,
        "eta1": eta1,
        "eta2": eta2,
        "eta": eta,
        "alpha1": np.sqrt(2) * flux.f2_at_0,
        "alpha2": 4 * Gamma * np.sqrt(M),
        "alpha3": (p + 2) / (p + 1) * 2 ** (1 + p / 2) * Gamma * M ** ((p + 1) / 2),
        "m0": m0,
        "threshold_rate": float(t1),
        "threshold_eta": float(t2),
    }
    inputs = {"Gamma": Gamma, "p": p, "C_G": C_G, "f2_at_0": flux.f2_at_0}
    ok = bool(m0 > max(t1, t2))
    return BreakingCriterion("growth", theta, inputs, nm, derived, ok, _bracket(m0, theta))


def alpha_general(flux: Flux, linf: float, k: int = 4001):
    w = np.linspace(-2 * linf, 2 * linf, k)
    return float(np.max(np.abs(flux.d2f(w)))), float(np.max(np.abs(flux.d3f(w))))


def lambda_parts(nm: dict, alpha2: float, alpha3: float, C_K: float):
    v0, v1, v2, v6, vinf = nm["l2"], nm["dx_l2"], nm["dxx_l2"], nm["dx_l6"], nm["linf"]
    lam1 = np.sqrt(2) * v1**0.25 * (alpha2 + alpha3 * np.sqrt(v0 * v1)) ** 0.5 * (v2**2 + alpha3 * v6**6) ** 0.125
    lam2 = 3**6 * 2 * C_K**3 * v0**2 / (alpha2 * vinf**3) if vinf > 0 else np.inf
    return float(lam1), float(lam2)


def criterion_general(u0: GridFunction, flux: Flux, C_K: float, C_G: float, theta: float = 1 / 16) -> BreakingCriterion:
    if not 0 < theta < 1 / 8:
        raise CriterionError(f"theta must lie in (0, 1/8), got {theta}")
    nm = data_norms(u0, flux)
    alpha2, alpha3 = alpha_general(flux, nm["linf"])
    lam1, lam2 = lambda_parts(nm, alpha2, alpha3, C_K)
    m0 = abs(min(nm["inf_dfu_x"], 0.0))
    t1 = (alpha3 + 6 * C_G + 1) / (1 - 8 * theta)
    t2 = lam1 / np.sqrt(theta)
    t3 = lam2 * theta / (1 - theta) ** 3
    M = nm["l2"]
    z1 = nm["dx_l2"] ** 2
    Z0 = (z1 * nm["dxx_l2"] ** 2 + alpha3 * z1 * nm["dx_l6"] ** 6) ** 0.25 * (
        np.sqrt(2) * alpha2 + 2 * alpha3 * np.sqrt(M) * z1**0.25
    )
    derived = {
        "alpha1": 2 * nm["linf"],
        "alpha2": alpha2,
        "alpha3": alpha3,
        "lambda1": lam1,
        "lambda2": lam2,
        "Z0": float(Z0),
        "m0": m0,
        "threshold_rate": float(t1),
        "threshold_lambda1": float(t2),
        "threshold_lambda2": float(t3),
    }
    inputs = {"C_K": C_K, "C_G": C_G}
    ok = bool(m0 > max(t1, t2, t3))
    return BreakingCriterion("general", theta, inputs, nm, derived, ok, _bracket(m0, theta))


def breaking_set_membership(v: GridFunction, flux: Flux, T: float, C_G: float) -> bool:
    Gamma, p = _growth_constants(flux)
    tp = theta_p(p)
    nm = data_norms(v, flux)
    lhs = abs(min(nm["inf_dfu_x"], 0.0))
    if lhs == 0:
        return False
    _, _, eta = eta_parts(nm, Gamma, p, flux.f2_at_0)
    rhs = max((1 + 6 * C_G + Gamma) / (4 * tp), np.sqrt(2) * eta / np.sqrt(tp), 2 / ((2 - tp) * T))
    return bool(lhs > rhs)


# -- bound systems ------------------------------------------------------------


@dataclass
class BoundSystemTrace:
    t: np.ndarray
    z1: np.ndarray
    z6: np.ndarray
    z2_tilde: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray
    Z: np.ndarray
    variant: str
    truncated: bool = False
    measured: dict = field(default_factory=dict)
    dominated: dict = field(default_factory=dict)

    def attach_measured(self, series: dict, upto: int | None = None, rtol: float = 0.01) -> dict:
        """Record measured norm series and per-point domination flags."""
        pairs = {"ux_l2_sq": self.z1, "uxx_l2_sq": self.z2_tilde, "ux_l6_6": self.z6}
        k = len(self.t) if upto is None else min(upto, len(self.t))
        for name, bound in pairs.items():
            meas = np.asarray(series[name])[:k]
            b = bound[:k]
            finite = np.isfinite(b)
            self.measured[name] = meas
            self.dominated[name] = np.where(finite, meas <= b * (1 + rtol), True)
        return {name: bool(np.all(flags)) for name, flags in self.dominated.items()}


def integrate_bound_system(times, m_series, initial_norms: dict, constants: dict, variant: str = "growth") -> BoundSystemTrace:
    """RK4 integration of the (z1, z6, z2~) comparison system on the m mesh.

    ``initial_norms`` holds ux_l2_sq, uxx_l2_sq, ux_l6_6. ``constants``
    holds Gamma, p, C_G, M and f2_at_0 (growth/quadratic variants) or
    alpha2, alpha3, C_G, M (general variant). Quadratic uses a = f''/2.
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(m_series, dtype=float)
    if variant not in ("growth", "general", "quadratic"):
        raise ValueError(f"unknown bound-system variant {variant!r}")
    C_G = constants.get("C_G", 0.0)
    M = constants.get("M", 0.0)
    if variant == "general":
        a3 = constants["alpha3"]
        Gam, p = a3, 0.0
    else:
        Gam = constants.get("Gamma", 0.0)
        p = constants.get("p", 0.0)

    def rhs(y, mm):
        z1, z6, z2 = y
        dz1 = mm * z1
        dz6 = (5 * mm + 6 * C_G) * z6
        if variant == "general":
            dz2 = (5 * mm + Gam) * z2 + Gam * z6
        else:
            dz2 = (5 * mm + Gam) * z2 + Gam * (2 + 2 ** (p + 1) * M**p * max(z1, 0.0) ** (p / 2)) * z6
        return np.array([dz1, dz6, dz2])

    y = np.array([initial_norms["ux_l2_sq"], initial_norms["ux_l6_6"], initial_norms["uxx_l2_sq"]], dtype=float)
    out = np.full((t.size, 3), np.inf)
    out[0] = y
    truncated = False
    with np.errstate(over="raise", invalid="raise"):
        for i in range(t.size - 1):
            h = t[i + 1] - t[i]
            mid = 0.5 * (m[i] + m[i + 1])
            try:
                k1 = rhs(y, m[i])
                k2 = rhs(y + 0.5 * h * k1, mid)
                k3 = rhs(y + 0.5 * h * k2, mid)
                k4 = rhs(y + h * k3, m[i + 1])
                y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            except FloatingPointError:
                truncated = True
                break
            if not np.all(np.isfinite(y)) or np.any(y > 1e300):
                truncated = True
                break
            out[i + 1] = y
    z1, z6, z2 = out[:, 0], out[:, 1], out[:, 2]
    with np.errstate(over="ignore", invalid="ignore"):
        Z1 = z1 * z2
        if variant == "general":
            Z2 = z1 * z6
            Z = (Z1 + Gam * Z2) ** 0.25 * (np.sqrt(2) * constants["alpha2"] + 2 * Gam * np.sqrt(M) * z1**0.25)
        elif variant == "quadratic":
            a = constants["f2_at_0"] / 2
            Z2 = np.zeros_like(Z1)
            Z = 2**1.5 * a * z1**0.25 * z2**0.25
        else:
            Z2 = 2 * z1 * z6 + 2 ** (p + 1) * M**p * z1 ** (1 + p / 2) * z6
            a1 = np.sqrt(2) * constants["f2_at_0"]
            a2 = 4 * Gam * np.sqrt(M)
            a3 = (p + 2) / (p + 1) * 2 ** (1 + p / 2) * Gam * M ** ((p + 1) / 2)
            Z = (Z1 + Gam * Z2) ** 0.25 * (a1 + a2 * z1**0.25 + a3 * z1 ** ((p + 1) / 4))
    return BoundSystemTrace(t, z1, z6, z2, Z1, Z2, Z, variant, truncated)


# -- characteristics ----------------------------------------------------------


def _fourier_upsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Trigonometric interpolant of one period sampled ``factor`` times finer."""
    if factor == 1:
        return np.asarray(values)
    n = values.size
    return np.fft.irfft(np.fft.rfft(values), n * factor) * factor


def _spline_on(x0: float, step: float, values: np.ndarray) -> CubicSpline:
    xs = x0 + step * np.arange(values.size + 1)
    return CubicSpline(xs, np.append(values, values[0]), bc_type="periodic")


def w_along_characteristics(
    traj: SmoothTrajectory,
    flux: Flux,
    kernel: Kernel,
    beta_list,
    Z=None,
    t_stop: float | None = None,
    upsample: int = 8,
):
    """Follow x' = f'(u(t,x)) from each foot and sample w = -[f'(u)]_x along it.

    ``Z`` (a series on the trajectory times) enables the |w' - w^2| <= Z
    comparison. Feet whose path leaves the periodic cell are dropped.
    """
    times = traj.times
    if t_stop is not None:
        keep = times <= t_stop + 1e-14
        times = times[keep]
    nt = times.size
    g0 = traj.states[0]
    lo, hi = g0.x0, g0.x0 + g0.length
    x = np.array(beta_list, dtype=float)
    xs = np.empty((nt, x.size))
    ws = np.empty((nt, x.size))
    def splines(i):
        u = traj.states[i]
        fine_u = _fourier_upsample(u.values, upsample)
        fine_ux = _fourier_upsample(derivative(u, 1).values, upsample)
        step = u.dx / upsample
        return _spline_on(u.x0, step, fine_u), _spline_on(u.x0, step, -flux.d2f(fine_u) * fine_ux)

    def wrap(y):
        return lo + np.mod(y - lo, hi - lo)

    cur = splines(0)
    for i in range(nt):
        xs[i] = x
        ws[i] = cur[1](wrap(x))
        if i == nt - 1:
            break
        nxt = splines(i + 1)
        h = times[i + 1] - times[i]
        k1 = flux.df(cur[0](wrap(x)))
        k2 = flux.df(nxt[0](wrap(x + h * k1)))
        x = x + 0.5 * h * (k1 + k2)
        cur = nxt
    left = (xs < lo) | (xs >= hi)
    dropped = np.any(left, axis=0)
    # central differences only, so the residual lives on interior samples
    wdot = np.gradient(ws, times, axis=0, edge_order=2)
    resid = np.abs(wdot - ws**2)
    resid[0] = resid[-1] = 0.0
    out = {
        "times": times,
        "paths": xs,
        "w": ws,
        "residual": resid,
        "dropped": dropped,
        "sup_w": ws[:, ~dropped].max(axis=1) if np.any(~dropped) else np.full(nt, np.nan),
        "max_residual": float(resid[:, ~dropped].max()) if np.any(~dropped) else float("nan"),
    }
    if Z is not None:
        Zs = np.asarray(Z)[:nt]
        out["residual_over_Z"] = float(np.max(resid[:, ~dropped] / Zs[:, None]))
    return out


# -- reports ------------------------------------------------------------------


@dataclass
class BreakingReport:
    criterion: BreakingCriterion
    observed_Tstar: float | None
    extrapolation_fit: tuple | None
    inside_bracket: bool
    trace: BoundSystemTrace | None
    margin: float = 0.05
    note: str = BOX_NOTE

    @classmethod
    def build(cls, criterion, Tstar, fit, trace=None, margin: float = 0.05):
        inside = False
        if Tstar is not None and criterion.bracket is not None:
            lo, hi = criterion.bracket
            inside = bool(lo * (1 - margin) <= Tstar <= hi * (1 + margin))
        return cls(criterion, Tstar, fit, inside, trace, margin)

    def to_dict(self, series_files: dict | None = None) -> dict:
        d = {
            "criterion": _plain(self.criterion.to_dict()),
            "observed_Tstar": self.observed_Tstar,
            "extrapolation_fit": (
                dict(zip(("slope", "intercept", "residual"), self.extrapolation_fit)) if self.extrapolation_fit else None
            ),
            "inside_bracket": self.inside_bracket,
            "margin": self.margin,
            "modeling_note": self.note,
        }
        if self.trace is not None:
            d["trace"] = {
                "variant": self.trace.variant,
                "truncated": self.trace.truncated,
                "dominated": {k: bool(np.all(v)) for k, v in self.trace.dominated.items()},
            }
        if series_files:
            d["series_files"] = dict(series_files)
        return d


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
