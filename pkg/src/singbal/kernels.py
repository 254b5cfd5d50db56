"""Odd singular convolution kernels and the principal-value operator they define."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .grid import LINE, PERIODIC, GridError, GridFunction, inner, norm, total_variation

HILBERT = "hilbert"
PERIODIC_HILBERT = "periodic_hilbert"
L1_SINGULAR = "l1_singular"
TABULATED = "tabulated"
ZERO = "zero"

KINDS = (HILBERT, PERIODIC_HILBERT, L1_SINGULAR, TABULATED, ZERO)


class KernelError(ValueError):
    pass


def _l1_singular(x):
    ax = np.abs(x)
    return np.sign(x) / (np.sqrt(ax) * (1.0 + ax * ax))


@dataclass(frozen=True)
class Kernel:
    """Odd kernel K with its structural constants.

    C_K bounds |K(x)|*|x| and |K'(x)|*x**2, L_K bounds the L1 norm (None when
    the kernel is not integrable), G_op_norm is the L2 operator norm of the
    principal-value convolution.
    """

    kind: str
    C_K: float
    G_op_norm: float
    L_K: float | None = None
    P: float | None = None
    table: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.kind == PERIODIC_HILBERT and not (self.P and self.P > 0):
            raise KernelError("periodic_hilbert needs a positive half-period P")

    # -- built-ins ----------------------------------------------------------

    @classmethod
    def hilbert(cls):
        return cls(HILBERT, C_K=1.0 / np.pi, G_op_norm=1.0)

    @classmethod
    def periodic_hilbert(cls, P: float):
        # |K| x <= 1/pi near 0, but |K'| x^2 peaks at x = P with value pi/4
        return cls(PERIODIC_HILBERT, C_K=np.pi / 4, G_op_norm=1.0, P=float(P))

    @classmethod
    def l1_singular(cls):
        return cls(L1_SINGULAR, C_K=1.0, G_op_norm=_l1_singular_symbol_sup(), L_K=float(np.sqrt(2.0) * np.pi))

    @classmethod
    def zero(cls):
        return cls(ZERO, C_K=0.0, G_op_norm=0.0, L_K=0.0)

    @classmethod
    def tabulated(cls, x, values):
        x = np.asarray(x, dtype=float)
        v = np.asarray(values, dtype=float)
        if np.any(x <= 0) or np.any(np.diff(x) <= 0):
            raise KernelError("tabulated kernels need strictly increasing x > 0")
        dv = np.gradient(v, x)
        C_K = float(max(np.max(np.abs(v) * x), np.max(np.abs(dv) * x * x)))
        L_K = float(2 * integrate.trapezoid(np.abs(v), x) + 2 * abs(v[0]) * x[0])
        xi = np.linspace(0.0, np.pi / np.min(np.diff(x)), 512)[1:]
        sym = 2 * integrate.trapezoid(v[None, :] * np.sin(np.outer(xi, x)), x, axis=1)
        return cls(TABULATED, C_K=C_K, G_op_norm=float(np.max(np.abs(sym))), L_K=L_K, table=(x, v))

    @classmethod
    def load_table(cls, path):
        data = np.loadtxt(Path(path), comments="#", ndmin=2)
        return cls.tabulated(data[:, 0], data[:, 1])

    @property
    def is_zero(self) -> bool:
        return self.kind == ZERO

    @property
    def spectral_ok(self) -> bool:
        return self.kind in (HILBERT, PERIODIC_HILBERT, ZERO)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x):
        return eval_kernel(self, x)

    def periodized(self, y, P: float):
        """Kernel restricted to one period of half-width P.

        The Hilbert kernel is replaced by its periodic sum, other non-periodic
        kernels are cut off at |y| = P.
        """
        y = np.asarray(y, dtype=float)
        if self.kind == HILBERT:
            return np.cos(np.pi * y / (2 * P)) / np.sin(np.pi * y / (2 * P)) / (2 * P)
        if self.kind == PERIODIC_HILBERT:
            if not np.isclose(self.P, P, rtol=1e-10):
                raise KernelError(f"kernel half-period {self.P} does not match grid half-period {P}")
            return eval_kernel(self, y)
        return np.where(np.abs(y) < P, eval_kernel(self, y), 0.0)


def _l1_singular_symbol_sup() -> float:
    # |K^(xi)| = 2 |int_0^inf K(x) sin(xi x) dx|; sup over a log mesh of xi
    def sine_transform(xi):
        head, _ = integrate.quad(lambda s: 2 * s * np.sin(xi * s * s) / (1 + s**4), 0, 1.0, limit=200)
        tail, _ = integrate.quad(lambda x: 1.0 / (np.sqrt(x) * (1 + x * x)), 1.0, np.inf, weight="sin", wvar=xi)
        return 2 * abs(head + tail)

    xis = np.geomspace(1e-2, 1e2, 121)
    vals = [sine_transform(xi) for xi in xis]
    return float(max(vals))


def eval_kernel(k: Kernel, x):
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise KernelError("kernel is singular at x = 0")
    if k.kind == HILBERT:
        out = 1.0 / (np.pi * x)
    elif k.kind == PERIODIC_HILBERT:
        z = np.pi * x / (2 * k.P)
        out = np.cos(z) / np.sin(z) / (2 * k.P)
    elif k.kind == L1_SINGULAR:
        out = _l1_singular(x)
    elif k.kind == ZERO:
        out = np.zeros_like(x)
    else:
        tx, tv = k.table
        out = np.sign(x) * np.interp(np.abs(x), tx, tv, left=tv[0], right=0.0)
    return out if out.ndim else float(out)


def check_kernel_bounds(k: Kernel, xs=None, h: float = 1e-6) -> dict:
    """Sampled check of oddness and the |K| <= C/|x|, |K'| <= C/x^2 bounds."""
    if k.is_zero:
        return {"odd": True, "decay": True, "derivative": True, "l1": True}
    if xs is None:
        top = k.P if k.P else 50.0
        xs = np.geomspace(1e-4, top, 400)
        if k.P:
            xs = xs[xs < k.P * (1 - 1e-9)]
    K = eval_kernel(k, xs)
    dK = (eval_kernel(k, xs * (1 + h)) - eval_kernel(k, xs * (1 - h))) / (2 * h * xs)
    slack = 1 + 1e-6
    res = {
        "odd": bool(np.allclose(eval_kernel(k, -xs), -K, rtol=1e-12, atol=0)),
        "decay": bool(np.all(np.abs(K) * xs <= k.C_K * slack)),
        "derivative": bool(np.all(np.abs(dK) * xs**2 <= k.C_K * slack)),
        "l1": True,
    }
    if k.kind == L1_SINGULAR:
        l1 = 2 * integrate.quad(lambda s: 2 / (1 + s**4), 0, np.inf)[0]
        res["l1"] = bool(l1 <= k.L_K * slack)
    return res


# -- principal value operator -------------------------------------------------


def _pair_weights(k: Kernel, g: GridFunction) -> np.ndarray:
    """Signed convolution weights c_m, m = -(N)..N, for the pair quadrature."""
    if g.is_periodic:
        P = g.length / 2
        half = g.n // 2
        j = np.arange(1, half + 1)
        w = k.periodized(j * g.dx, P) * g.dx
        if g.n % 2 == 0:
            # j = n/2 reaches the same point from both sides and cancels
            w[-1] = 0.0
        return w
    j = np.arange(1, g.n)
    return eval_kernel(k, j * g.dx) * g.dx


def _pair_quadrature(k: Kernel, g: GridFunction) -> np.ndarray:
    u = g.values
    w = _pair_weights(k, g)
    if g.is_periodic:
        n = g.n
        c = np.zeros(n)
        m = np.arange(1, w.size + 1)
        c[m % n] += w
        c[(-m) % n] -= w
        return np.real(np.fft.ifft(np.fft.fft(c) * np.fft.fft(u)))
    # G[g]_i = sum_j w_j (u_{i-j} - u_{i+j}), zero outside the window
    full = np.concatenate((-w[::-1], [0.0], w))
    return fftconvolve(u, full, mode="same")


def spectral_symbol(k: Kernel, n: int, dx: float) -> np.ndarray:
    """Fourier multiplier of G on a periodic grid."""
    if k.is_zero:
        return np.zeros(n, dtype=complex)
    if k.spectral_ok:
        return -1j * np.sign(np.fft.fftfreq(n, d=dx))
    g = GridFunction(np.zeros(n), dx, PERIODIC)
    w = _pair_weights(k, g)
    c = np.zeros(n)
    m = np.arange(1, w.size + 1)
    c[m % n] += w
    c[(-m) % n] -= w
    return np.fft.fft(c)


def apply_pv(k: Kernel, g: GridFunction, method: str = "pair-quadrature") -> GridFunction:
    """Grid samples of the principal-value convolution G[g]."""
    if k.is_zero:
        return g.with_values(np.zeros(g.n))
    if method == "spectral":
        if not g.is_periodic:
            raise KernelError("spectral principal value needs a periodic domain")
        if not k.spectral_ok:
            raise KernelError(f"no exact Fourier multiplier for kernel kind {k.kind!r}")
        if k.kind == PERIODIC_HILBERT:
            k.periodized(np.array([g.dx]), g.length / 2)
        sym = spectral_symbol(k, g.n, g.dx)
        return g.with_values(np.real(np.fft.ifft(sym * np.fft.fft(g.values))))
    if method != "pair-quadrature":
        raise KernelError(f"unknown method {method!r}")
    return g.with_values(_pair_quadrature(k, g))


def apply_periodic(k: Kernel, g: GridFunction) -> GridFunction:
    """Periodic convolution over one period by pair quadrature."""
    if not g.is_periodic:
        raise KernelError("apply_periodic needs a periodic grid function")
    if k.kind not in (HILBERT, PERIODIC_HILBERT, ZERO):
        raise KernelError(f"kernel kind {k.kind!r} is not periodic")
    return apply_pv(k, g, "pair-quadrature")


def truncation_error_bound(k: Kernel, g: GridFunction) -> float:
    """Size of the kernel tail dropped beyond the half-width of a line window."""
    if g.is_periodic:
        return 0.0
    return float(k.C_K * norm(g, 2) / np.sqrt(g.half_width))


# -- operator estimates -------------------------------------------------------


def tail_energy_check(k: Kernel, g: GridFunction, r: float, kappa: float, pad: float = 16.0):
    """L2 mass of G[g] outside [-r-kappa, r+kappa] against 2 C_K |g| sqrt(r/kappa).

    G[g] is evaluated on a zero-padded line reaching ``pad*(r+kappa)``; the
    remainder beyond it is added through the pointwise decay
    |G[g](x)| <= C_K |g|_1 / (|x| - r), which can only enlarge the measurement.
    """
    if kappa <= 0:
        raise KernelError("kappa must be positive")
    if g.is_periodic:
        raise KernelError("tail energy is defined on the line")
    outside = np.abs(g.x) > r + 1e-12
    if np.any(g.values[outside] != 0):
        raise KernelError(f"grid function is not supported in [-{r}, {r}]")
    bound = 2 * k.C_K * norm(g, 2) * np.sqrt(r / kappa)
    if not np.any(g.values):
        return 0.0, 0.0
    X = max(pad * (r + kappa), g.half_width)
    extra = int(np.ceil((X - g.half_width) / g.dx))
    wide = GridFunction(np.pad(g.values, extra), g.dx, LINE, g.x0 - extra * g.dx)
    Gg = apply_pv(k, wide)
    far = np.abs(wide.x) > r + kappa
    inside2 = float(np.sum(Gg.values[far] ** 2) * g.dx)
    Xend = wide.half_width
    tail2 = 2 * (k.C_K * norm(g, 1)) ** 2 / (Xend - r)
    return float(np.sqrt(inside2 + tail2)), float(bound)


def indicator_l1_bound(k: Kernel, a: float, b: float, P: float, n: int = 8192):
    """||G_per[chi_[a,b]]||_L1 on one period against C (b-a)(2 + 5 ln2 + 2 ln P - 2 ln(b-a))."""
    if not -P <= a < b <= P:
        raise KernelError("need -P <= a < b <= P")
    # cell-average sampling keeps the discrete indicator width exact
    edges = -P + (2 * P / n) * np.arange(n + 1)
    lo = np.clip(edges[:-1], a, b)
    hi = np.clip(edges[1:], a, b)
    chi = GridFunction.periodic((hi - lo) / (2 * P / n), n, P)
    measured = norm(apply_periodic(k, chi), 1)
    w = b - a
    bound = k.C_K * w * (2 + 5 * np.log(2) + 2 * np.log(P) - 2 * np.log(w))
    return float(measured), float(bound)


def periodic_l1_bound_check(k: Kernel, w: GridFunction, mean_tol: float = 1e-10):
    """||G_per[w]||_L1 against C_K |w|_1 (2 + 3 ln2 + 2 ln P + 2 ln TV - 2 ln |w|_1)."""
    if not w.is_periodic:
        raise KernelError("periodic_l1_bound_check needs a periodic grid function")
    l1 = norm(w, 1)
    mean = float(np.sum(w.values) * w.dx)
    if abs(mean) > mean_tol * max(1.0, l1):
        raise KernelError(f"w must have zero mean over one period, got {mean:.3e}")
    if l1 == 0:
        return 0.0, 0.0
    P = w.length / 2
    beta = total_variation(w)
    measured = norm(apply_periodic(k, w), 1)
    bound = k.C_K * l1 * (2 + 3 * np.log(2) + 2 * np.log(P) + 2 * np.log(beta) - 2 * np.log(l1))
    return float(measured), float(bound)


def skew_defect(k: Kernel, g: GridFunction, method: str = "pair-quadrature") -> float:
    """|<G g, g>| / |g|^2."""
    n2 = norm(g, 2) ** 2
    if n2 == 0:
        return 0.0
    return abs(inner(apply_pv(k, g, method), g)) / n2


def probe_battery(n: int = 1024, P: float = np.pi, seed: int = 0, count: int = 24) -> list[GridFunction]:
    """Deterministic periodic test functions: smooth, rough and localized."""
    rng = np.random.Generator(np.random.Philox(seed))
    x = -P + (2 * P / n) * np.arange(n)
    out = []
    for i in range(count):
        kind = i % 4
        if kind == 0:
            modes = rng.integers(1, 16, size=6)
            coef = rng.normal(size=(6, 2))
            v = sum(c[0] * np.cos(m * np.pi * x / P) + c[1] * np.sin(m * np.pi * x / P) for m, c in zip(modes, coef))
        elif kind == 1:
            c, s = rng.uniform(-P / 2, P / 2), rng.uniform(0.05, 0.5) * P
            v = np.exp(-((x - c) / s) ** 2)
        elif kind == 2:
            a, b = np.sort(rng.uniform(-P, P, size=2))
            v = np.where((x > a) & (x < b), 1.0, 0.0) - 0.3
        else:
            v = np.convolve(rng.normal(size=n), np.ones(9) / 9, mode="same")
        out.append(GridFunction(v, 2 * P / n, PERIODIC, -P))
    return out


def estimate_C_G(k: Kernel, n: int = 1024, seed: int = 0, headroom: float = 1.25) -> float:
    """Empirical L6 -> L6 bound of G over ``probe_battery`` times ``headroom``."""
    if k.is_zero:
        return 0.0
    method = "spectral" if k.spectral_ok else "pair-quadrature"
    P = k.P if k.kind == PERIODIC_HILBERT else np.pi
    ratios = []
    for g in probe_battery(n, P, seed):
        if k.kind == L1_SINGULAR or k.kind == TABULATED:
            Gg = apply_pv(k, GridFunction(np.pad(g.values, n), g.dx, LINE, g.x0 - n * g.dx))
            ratios.append(norm(Gg, 6) / norm(g, 6))
        else:
            ratios.append(norm(apply_pv(k, g, method), 6) / norm(g, 6))
    return float(headroom * max(ratios))


def make_kernel(kind: str, P: float | None = None) -> Kernel:
    factory: dict[str, Callable[[], Kernel]] = {
        HILBERT: Kernel.hilbert,
        L1_SINGULAR: Kernel.l1_singular,
        ZERO: Kernel.zero,
        PERIODIC_HILBERT: lambda: Kernel.periodic_hilbert(P),
    }
    try:
        return factory[kind]()
    except KeyError:
        raise KernelError(f"cannot build kernel {kind!r} by name") from None
