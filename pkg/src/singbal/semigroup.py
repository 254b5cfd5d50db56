"""Convex fluxes, the entropy semigroup of u_t + f(u)_x = 0 and its a-priori estimates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .grid import GridError, GridFunction, fractional_tv, norm

Array = np.ndarray


class FluxError(ValueError):
    pass


class EvolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Flux:
    """Flux f with derivatives and structural constants.

    ``C_f, p1, p2`` are the convexity/growth constants (None when the flux is
    not strictly convex), ``Gamma, p`` bound |f'''| <= Gamma (1 + |u|^p) and
    are None when no such bound with p < 2/3 exists.
    """

    kind: str
    f: Callable[[Array], Array] = field(repr=False)
    df: Callable[[Array], Array] = field(repr=False)
    d2f: Callable[[Array], Array] = field(repr=False)
    d3f: Callable[[Array], Array] = field(repr=False)
    C_f: float | None
    p1: float | None
    p2: float | None
    Gamma: float | None = None
    p: float | None = None
    u_star: float | None = None
    params: dict = field(default_factory=dict)

    # -- constructors -------------------------------------------------------

    @classmethod
    def quadratic(cls, a: float = 0.5, b: float = 0.0, c: float = 0.0):
        if a <= 0:
            raise FluxError("quadratic flux needs a > 0")
        # |f'(s)| <= 2a (1+|s|) requires |b| <= 2a
        ok = abs(b) <= 2 * a
        return cls(
            "quadratic",
            lambda u: a * u * u + b * u + c,
            lambda u: 2 * a * u + b,
            lambda u: np.full_like(np.asarray(u, dtype=float), 2 * a),
            lambda u: np.zeros_like(np.asarray(u, dtype=float)),
            C_f=2 * a if ok else None,
            p1=1.0 if ok else None,
            p2=1.0 if ok else None,
            Gamma=0.0,
            p=0.0,
            u_star=-b / (2 * a),
            params={"a": a, "b": b, "c": c},
        )

    @classmethod
    def burgers(cls):
        return cls.quadratic(0.5, 0.0, 0.0)

    @classmethod
    def power(cls, p1: float):
        """f(u) = |u|^(1+p1)/(1+p1)."""
        if p1 < 1:
            raise FluxError("power flux needs p1 >= 1")
        C_f = 2.0 ** (1 - p1)
        p2 = _minimal_p2(p1, C_f)
        if p1 == 1:
            Gamma, p = 0.0, 0.0
        elif 2 <= p1 < 8 / 3:
            Gamma, p = p1 * (p1 - 1), p1 - 2
        else:
            Gamma, p = None, None

        def d3f(u):
            u = np.asarray(u, dtype=float)
            if p1 == 1:
                return np.zeros_like(u)
            with np.errstate(divide="ignore"):
                return p1 * (p1 - 1) * np.sign(u) * np.abs(u) ** (p1 - 2)

        return cls(
            "power",
            lambda u: np.abs(u) ** (1 + p1) / (1 + p1),
            lambda u: np.sign(u) * np.abs(u) ** p1,
            lambda u: p1 * np.abs(u) ** (p1 - 1),
            d3f,
            C_f=C_f,
            p1=float(p1),
            p2=p2,
            Gamma=Gamma,
            p=p,
            u_star=0.0,
            params={"p1": p1},
        )

    @classmethod
    def logcosh(cls, eps: float = 0.1):
        """f(u) = u^2/2 + eps log cosh u, a non-quadratic flux with bounded f'''."""
        if not 0 <= eps <= 1:
            raise FluxError("logcosh flux needs 0 <= eps <= 1")
        # max |sech^2 tanh| = 2/(3 sqrt 3)
        Gamma = eps * 4 / (3 * np.sqrt(3))

        def f(u):
            a = np.abs(u)
            return 0.5 * u * u + eps * (a + np.log1p(np.exp(-2 * a)) - np.log(2))

        return cls(
            "logcosh",
            f,
            lambda u: u + eps * np.tanh(u),
            lambda u: 1 + eps / np.cosh(u) ** 2,
            lambda u: -2 * eps * np.tanh(u) / np.cosh(u) ** 2,
            C_f=1.0,
            p1=1.0,
            p2=1.0,
            Gamma=Gamma,
            p=0.0,
            u_star=0.0,
            params={"eps": eps},
        )

    @classmethod
    def linear(cls, speed: float = 1.0):
        """Transport flux f(u) = speed*u; not strictly convex."""
        return cls(
            "linear",
            lambda u: speed * np.asarray(u, dtype=float),
            lambda u: np.full_like(np.asarray(u, dtype=float), speed),
            lambda u: np.zeros_like(np.asarray(u, dtype=float)),
            lambda u: np.zeros_like(np.asarray(u, dtype=float)),
            C_f=None,
            p1=None,
            p2=None,
            params={"speed": speed},
        )

    @classmethod
    def custom(cls, f, df, d2f, d3f, C_f, p1, p2, Gamma=None, p=None, name="custom"):
        ustar = None
        lo, hi = -1e3, 1e3
        if df(np.array(lo)) < 0 < df(np.array(hi)):
            ustar = brentq(lambda s: float(df(np.array(s))), lo, hi)
        return cls(name, f, df, d2f, d3f, C_f, p1, p2, Gamma, p, ustar)

    # -- properties ---------------------------------------------------------

    @property
    def is_convex(self) -> bool:
        return self.C_f is not None

    @property
    def f2_at_0(self) -> float:
        return float(self.d2f(np.array(0.0)))

    def check_assumptions(self, mesh=None) -> dict:
        """Sampled checks of the convexity/growth and f''' growth assumptions."""
        if mesh is None:
            mesh = np.linspace(-20, 20, 4001)
        res = {"convex": bool(np.all(self.d2f(mesh) > 0))}
        if self.is_convex:
            res["exponents"] = bool(1 <= self.p1 <= self.p2 < self.p1 + 2)
            res["growth"] = bool(np.all(np.abs(self.df(mesh)) <= self.C_f * (1 + np.abs(mesh)) ** self.p2 * (1 + 1e-12)))
            s = np.geomspace(1e-3, 20, 60)
            res["phi_lower"] = bool(np.all(phi_f(self, s) >= self.C_f * s**self.p1 * (1 - 1e-9)))
            res["holder_L1"] = bool(self.p2 < self.p1 + 1)
        if self.Gamma is not None:
            m = mesh[mesh != 0]
            res["third_derivative"] = bool(
                0 <= self.p < 2 / 3 and np.all(np.abs(self.d3f(m)) <= self.Gamma * (1 + np.abs(m) ** self.p) * (1 + 1e-12) + 1e-15)
            )
        return res

    def Lambda_M(self, M: float, k: int = 801) -> float:
        """sup over |u|,|v| <= M of |f(u)-f(v)|/|f'(u)-f'(v)| on a mesh."""
        s = np.linspace(-M, M, k)
        U, V = np.meshgrid(s, s)
        num = np.abs(self.f(U) - self.f(V))
        den = np.abs(self.df(U) - self.df(V))
        mask = den > 1e-14
        return float(np.max(num[mask] / den[mask]))

    def max_speed(self, lo: float, hi: float) -> float:
        """max |f'| on [lo, hi] (f' monotone)."""
        return float(max(abs(self.df(np.array(lo))), abs(self.df(np.array(hi)))))

    def riemann_flux(self, a: Array, b: Array) -> Array:
        """Godunov flux: min of f on [a,b] if a <= b, max on [b,a] otherwise."""
        if self.u_star is None:
            fa, fb = self.f(a), self.f(b)
            return np.where(a <= b, np.minimum(fa, fb), np.maximum(fa, fb))
        s = self.u_star
        return np.maximum(self.f(np.maximum(a, s)), self.f(np.minimum(b, s)))


def _minimal_p2(p1: float, C_f: float) -> float:
    if p1 == 1:
        return 1.0

    def peak(p2):
        d = p2 - p1
        return p1 * np.log(p1) + d * np.log(d) - p2 * np.log(p2) - np.log(C_f)

    return float(brentq(peak, p1 + 1e-12, p1 + 2 - 1e-12, xtol=1e-14)) + 1e-9


def make_flux(kind: str, **kw) -> Flux:
    table = {
        "burgers": Flux.burgers,
        "quadratic": Flux.quadratic,
        "power": Flux.power,
        "logcosh": Flux.logcosh,
        "linear": Flux.linear,
    }
    if kind not in table:
        raise FluxError(f"unknown flux kind {kind!r}")
    return table[kind](**kw)


def phi_f(flux: Flux, s):
    """inf_a {f'(a+s) - f'(a)}; closed form for quadratic and power fluxes."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise FluxError("phi_f needs s > 0")
    if flux.kind == "quadratic":
        out = 2 * flux.params["a"] * s
    elif flux.kind == "power":
        out = 2.0 ** (1 - flux.p1) * s**flux.p1
    else:
        a = np.linspace(-60, 60, 24001)
        out = np.array([np.min(flux.df(a + si) - flux.df(a)) for si in np.atleast_1d(s)]).reshape(s.shape)
    return out if out.ndim else float(out)


# -- evolution ----------------------------------------------------------------


def godunov_step(u: Array, dt: float, dx: float, flux: Flux, periodic: bool) -> Array:
    if periodic:
        left = np.roll(u, 1)
        F = flux.riemann_flux(left, u)  # interface i-1/2
        return u - dt / dx * (np.roll(F, -1) - F)
    ext = np.concatenate(([0.0], u, [0.0]))
    F = flux.riemann_flux(ext[:-1], ext[1:])
    return u - dt / dx * (F[1:] - F[:-1])


def godunov_evolve(u0: GridFunction, t: float, flux: Flux, cfl: float = 0.9, dt: float | None = None) -> GridFunction:
    """Godunov finite-volume evolution to time ``t``.

    Line grids see zero ghost states on both sides. ``dt`` fixes the step
    (it must then satisfy the CFL restriction itself); otherwise each step
    uses ``cfl*dx/max|f'(u)|``.
    """
    if t < 0:
        raise EvolutionError("t must be nonnegative")
    if not 0 < cfl < 1:
        raise EvolutionError("cfl must lie in (0, 1)")
    u = np.array(u0.values)
    periodic = u0.is_periodic
    now = 0.0
    steps = 0
    while now < t * (1 - 1e-14):
        if dt is None:
            lo, hi = u.min(), u.max()
            if not periodic:
                lo, hi = min(lo, 0.0), max(hi, 0.0)
            speed = flux.max_speed(lo, hi)
            h = t - now if speed == 0 else min(cfl * u0.dx / speed, t - now)
        else:
            h = min(dt, t - now)
        u = godunov_step(u, h, u0.dx, flux, periodic)
        now += h
        steps += 1
        if not np.all(np.isfinite(u)):
            raise EvolutionError(f"non-finite state after {steps} steps at t={now:.6g}")
    return u0.with_values(u)


# -- Lax-Oleinik oracle -------------------------------------------------------


class _Legendre:
    """f* on the velocity range of the data, via (f')^{-1} on an oversampled mesh."""

    def __init__(self, flux: Flux, umin: float, umax: float, npts: int):
        pad = 1e-9 + 1e-6 * (umax - umin)
        self.u = np.linspace(umin - pad, umax + pad, max(npts, 16))
        self.v = flux.df(self.u)
        if np.any(np.diff(self.v) <= 0):
            raise FluxError("Legendre oracle needs a strictly convex flux")
        self.flux = flux

    def u_of(self, v):
        return np.interp(v, self.v, self.u)

    def fstar(self, v):
        uv = self.u_of(v)
        # beyond the data range f* continues affinely
        return uv * v - self.flux.f(uv)


def _primitive(u0: GridFunction):
    """Trapezoid primitive at grid points and an evaluator for any y."""
    vals = u0.values
    U = np.concatenate(([0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * u0.dx)))
    if u0.is_periodic:
        mass = U[-1] + 0.5 * (vals[-1] + vals[0]) * u0.dx
        ext = np.append(U, mass)
        xs = u0.x0 + u0.dx * np.arange(u0.n + 1)
        spline = CubicSpline(xs, ext - mass * (xs - u0.x0) / u0.length, bc_type="periodic")

        def evaluate(y):
            y = np.asarray(y, dtype=float)
            k = np.floor((y - u0.x0) / u0.length)
            r = y - k * u0.length
            return spline(r) + mass * (r - u0.x0) / u0.length + k * mass

        return evaluate
    xs = u0.x
    spline = CubicSpline(xs, U)

    def evaluate(y):
        y = np.asarray(y, dtype=float)
        inside = spline(np.clip(y, xs[0], xs[-1]))
        # zero data outside the window
        return inside

    return evaluate


def lax_oleinik_oracle(u0: GridFunction, t: float, flux: Flux, x, refine: bool = True, chunk: int = 256):
    """Entropy solution at (t, x) from the Hopf-Lax minimization.

    The minimizer is first located over grid points ``y`` and then polished
    by golden-section search on a cubic interpolant of the primitive.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if t <= 0:
        raise EvolutionError("oracle needs t > 0")
    umin, umax = float(u0.values.min()), float(u0.values.max())
    if not u0.is_periodic:
        umin, umax = min(umin, 0.0), max(umax, 0.0)
    leg = _Legendre(flux, umin, umax, 4 * u0.n)
    vmin, vmax = leg.v[0], leg.v[-1]
    U = _primitive(u0)

    if u0.is_periodic:
        # candidate y on the periodic extension covering [x - t vmax, x - t vmin]
        lo = int(np.floor((xs.min() - t * vmax - u0.x0) / u0.dx)) - 2
        hi = int(np.ceil((xs.max() - t * vmin - u0.x0) / u0.dx)) + 2
        ygrid = u0.x0 + u0.dx * np.arange(lo, hi + 1)
    else:
        ygrid = u0.x
    Ugrid = U(ygrid)

    out = np.empty_like(xs)
    ystar = np.empty_like(xs)
    for s in range(0, xs.size, chunk):
        xc = xs[s : s + chunk, None]
        obj = Ugrid[None, :] + t * leg.fstar((xc - ygrid[None, :]) / t)
        j = np.argmin(obj, axis=1)
        ystar[s : s + chunk] = ygrid[j]
    if refine:
        ystar = _golden(lambda y: U(y) + t * leg.fstar((xs - y) / t), ystar - u0.dx, ystar + u0.dx)
    out = leg.u_of((xs - ystar) / t)
    return out if np.ndim(x) else float(out[0])


def _golden(fun, a, b, iters: int = 60):
    g = (np.sqrt(5) - 1) / 2
    a, b = a.copy(), b.copy()
    for _ in range(iters):
        c = b - g * (b - a)
        d = a + g * (b - a)
        left = fun(c) < fun(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    return 0.5 * (a + b)


def characteristic_solution(u0_func: Callable, t: float, x, flux: Flux, bracket: tuple[float, float]):
    """Smooth solution u = u0(x - t f'(u)) by bisection on the implicit equation."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = bracket
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        out[i] = brentq(lambda w: w - u0_func(xi - t * flux.df(np.array(w))), lo, hi, xtol=1e-14)
    return out if np.ndim(x) else float(out[0])


# -- checkers -----------------------------------------------------------------


def oleinik_check(u: GridFunction, t: float, flux: Flux) -> float:
    """max over x < y of f'(u(y)) - f'(u(x)) - (y - x)/t, in one pass."""
    if t <= 0:
        raise EvolutionError("t must be positive")
    a = flux.df(u.values) - u.x / t
    run_min = np.minimum.accumulate(a)
    return float(np.max(a[1:] - run_min[:-1]))


def linf_decay_bound(l2_initial: float, t: float, flux: Flux) -> float:
    if t <= 0:
        raise EvolutionError("t must be positive")
    return 4.0 * (l2_initial**2 / (flux.C_f * t)) ** (1.0 / (flux.p1 + 2))


def linf_decay_check(u: GridFunction, t: float, flux: Flux, l2_initial: float):
    return norm(u, np.inf), linf_decay_bound(l2_initial, t, flux)


def linf_decay_check_l1(u: GridFunction, t: float, flux: Flux, l1_initial: float):
    if t <= 0:
        raise EvolutionError("t must be positive")
    return norm(u, np.inf), 4.0 * (l1_initial / (flux.C_f * t)) ** (1.0 / (flux.p1 + 1))


def decay_scaling(sup_norms, times, flux: Flux):
    """Products ||u(t)||_inf * t^(1/(p1+2)) over a time sweep."""
    times = np.asarray(times, dtype=float)
    return np.asarray(sup_norms, dtype=float) * times ** (1.0 / (flux.p1 + 2))


def fractional_tv_bound_check(u: GridFunction, t: float, flux: Flux, a: float, b: float, l2_initial: float | None = None):
    if t <= 0:
        raise EvolutionError("t must be positive")
    l2 = norm(u, 2) if l2_initial is None else l2_initial
    Mt = linf_decay_bound(l2, t, flux)
    measured = fractional_tv(u, 1.0 / flux.p1, a, b)
    bound = 2.0 / flux.C_f * ((b - a) / t + flux.max_speed(-Mt, Mt))
    return float(measured), float(bound)


def l1kernel_oleinik_check(u: GridFunction, tau: float, C_T: float, flux: Flux) -> float:
    """max over x1 < x2 of f'(u(x2)) - f'(u(x1)) - max{4 d/tau, 2 sqrt(C_T d)}."""
    if tau <= 0:
        raise EvolutionError("tau must be positive")
    v = flux.df(u.values)
    x = u.x
    worst = -np.inf
    for i in range(u.n - 1):
        d = x[i + 1 :] - x[i]
        allow = np.maximum(4 * d / tau, 2 * np.sqrt(C_T * d))
        worst = max(worst, float(np.max(v[i + 1 :] - v[i] - allow)))
    return worst


@dataclass(frozen=True)
class BoundConstants:
    gamma_p: float
    tilde_gamma_p: float | None
    Gamma1: float
    Gamma3: float | None
    C_f: float
    p1: float
    l2_initial: float

    @classmethod
    def from_data(cls, flux: Flux, G_norm: float, u0: GridFunction, L_K: float | None = None):
        if not flux.is_convex:
            raise FluxError("bound constants need a strictly convex flux")
        C_f, p1, p2 = flux.C_f, flux.p1, flux.p2
        l2 = norm(u0, 2)
        gp = p2 / (2 + p1)
        Gamma1 = C_f * (
            2 ** (1 + p1) + 2 ** (4 + 2 * p1) * np.exp(2 * G_norm) / C_f * (1 + G_norm + G_norm**2) * l2**2
        ) ** gp
        tgp = Gamma3 = None
        if p2 < p1 + 1:
            tgp = p2 / (p1 + 1)
            if L_K is not None:
                f0 = float(flux.f(np.array(0.0)))
                Gamma3 = gamma3(C_f, p1, p2, f0, L_K, norm(u0, 1))
        return cls(gp, tgp, float(Gamma1), Gamma3, C_f, p1, l2)

    def M_t(self, t: float) -> float:
        return 4.0 * (self.l2_initial**2 / (self.C_f * t)) ** (1.0 / (self.p1 + 2))


def gamma3(C_f: float, p1: float, p2: float, f0: float, L_K: float, l1_initial: float) -> float:
    tg = p2 / (p1 + 1)
    return float(C_f * (2**p1 * (1 + (1 + p1) / C_f * (f0 + 2 * np.exp(L_K) * l1_initial))) ** tg)


def tv_halfp1_bound(tau: float, a: float, b: float, C_f: float, Gamma3: float, M_fit: float) -> float:
    w = b - a
    return (16 / tau**2 * (w**2 + (w + 2 * Gamma3) ** 2) + 4 * (np.e**2 + 1) * M_fit * w) / C_f**2


__all__ = [
    "BoundConstants",
    "EvolutionError",
    "Flux",
    "FluxError",
    "GridError",
    "characteristic_solution",
    "decay_scaling",
    "fractional_tv_bound_check",
    "gamma3",
    "godunov_evolve",
    "l1kernel_oleinik_check",
    "lax_oleinik_oracle",
    "linf_decay_bound",
    "linf_decay_check",
    "linf_decay_check_l1",
    "make_flux",
    "oleinik_check",
    "phi_f",
    "tv_halfp1_bound",
]
