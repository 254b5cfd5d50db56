"""Uniform 1-D grid functions, discrete norms, derivatives and fractional variation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable

import numpy as np

PERIODIC = "periodic"
LINE = "line"

_NORMS = (1, 2, 6, np.inf)


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples ``values[i]`` at ``x0 + i*dx``.

    ``domain`` is ``"periodic"`` (one period, ``n*dx`` is the period) or
    ``"line"`` (truncated real line, zero outside the sampled interval).
    """

    values: np.ndarray
    dx: float
    domain: str = PERIODIC
    x0: float = 0.0
    _x: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 4:
            raise GridError(f"need a 1-D array with at least 4 samples, got shape {vals.shape}")
        if not self.dx > 0:
            raise GridError(f"dx must be positive, got {self.dx}")
        if self.domain not in (PERIODIC, LINE):
            raise GridError(f"unknown domain kind {self.domain!r}")
        if not np.all(np.isfinite(vals)):
            raise GridError("grid function has non-finite values")

    # -- constructors -------------------------------------------------------

    @classmethod
    def periodic(cls, func: Callable | np.ndarray, n: int, P: float, x0: float | None = None):
        """Sample ``func`` on ``n`` points of one period ``[x0, x0 + 2P)``."""
        dx = 2.0 * P / n
        x0 = -P if x0 is None else x0
        x = x0 + dx * np.arange(n)
        vals = func(x) if callable(func) else np.asarray(func, dtype=float)
        return cls(np.broadcast_to(vals, x.shape), dx, PERIODIC, x0)

    @classmethod
    def line(cls, func: Callable | np.ndarray, n: int, L: float, check_tail: bool = True):
        """Sample ``func`` on ``n`` points spanning ``[-L, L]`` inclusive."""
        dx = 2.0 * L / (n - 1)
        x = -L + dx * np.arange(n)
        vals = func(x) if callable(func) else np.asarray(func, dtype=float)
        g = cls(np.broadcast_to(vals, x.shape), dx, LINE, -L)
        if check_tail:
            g.check_truncation()
        return g

    # -- basic properties ---------------------------------------------------

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        if self._x is None:
            object.__setattr__(self, "_x", self.x0 + self.dx * np.arange(self.n))
        return self._x

    @property
    def is_periodic(self) -> bool:
        return self.domain == PERIODIC

    @property
    def length(self) -> float:
        """Period for periodic grids, ``2L`` for line grids."""
        return self.n * self.dx if self.is_periodic else (self.n - 1) * self.dx

    @property
    def half_width(self) -> float:
        return 0.5 * self.length

    def with_values(self, values) -> "GridFunction":
        return GridFunction(values, self.dx, self.domain, self.x0)

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            self.domain == other.domain
            and self.n == other.n
            and np.isclose(self.dx, other.dx, rtol=1e-12, atol=0)
            and np.isclose(self.x0, other.x0, rtol=0, atol=1e-12 * max(1.0, abs(self.x0)))
        )

    def check_truncation(self, rel: float = 1e-8) -> bool:
        """Warn when a line function is not negligible at the ends of its window."""
        if self.is_periodic:
            return True
        peak = np.max(np.abs(self.values))
        edge = max(abs(self.values[0]), abs(self.values[-1]))
        ok = peak == 0 or edge <= rel * peak
        if not ok:
            warnings.warn(
                f"line-domain truncation: boundary value {edge:.3e} exceeds {rel:g} of max {peak:.3e}",
                stacklevel=3,
            )
        return ok

    # arithmetic keeps value semantics
    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if not self.same_grid(other):
                raise GridError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._coerce(other))

    def __rsub__(self, other):
        return self.with_values(self._coerce(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self):
        return f"GridFunction(domain={self.domain}, n={self.n}, dx={self.dx:.6g}, x0={self.x0:.6g})"

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"# domain={self.domain} n={self.n} dx={self.dx!r}"]
        lines += [f"{xi!r} {vi!r}" for xi, vi in zip(self.x.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GridFunction":
        header, *rows = [ln for ln in text.splitlines() if ln.strip()]
        if not header.startswith("#"):
            raise GridError("missing grid header line")
        meta = dict(tok.split("=", 1) for tok in header[1:].split())
        try:
            domain, n, dx = meta["domain"], int(meta["n"]), float(meta["dx"])
        except KeyError as exc:
            raise GridError(f"grid header lacks {exc.args[0]!r}") from None
        data = np.array([[float(v) for v in r.split()] for r in rows])
        if data.shape != (n, 2):
            raise GridError(f"expected {n} rows of (x, value), got {data.shape}")
        return cls(data[:, 1], dx, domain, float(data[0, 0]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "GridFunction":
        return cls.from_text(Path(path).read_text())


def norm(g: GridFunction, p=2) -> float:
    """Discrete L^p norm, ``p`` in {1, 2, 6, inf}."""
    if p not in _NORMS:
        raise GridError(f"norm order must be one of 1, 2, 6, inf; got {p!r}")
    a = np.abs(g.values)
    if p == np.inf:
        return float(a.max())
    if p == 1:
        return float(a.sum() * g.dx)
    scale = a.max()
    if scale == 0:
        return 0.0
    return float(scale * (np.sum((a / scale) ** p) * g.dx) ** (1.0 / p))


def inner(g: GridFunction, h: GridFunction) -> float:
    return float(np.dot(g.values, g._coerce(h)) * g.dx)


def wavenumbers(n: int, dx: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n, d=dx)


def derivative(g: GridFunction, order: int = 1, method: str = "spectral") -> GridFunction:
    """First or second derivative by Fourier differentiation or central differences.

    Central differences use one-sided stencils at the ends of a line grid and
    periodic wrap-around on a periodic grid.
    """
    if order not in (1, 2):
        raise GridError(f"derivative order must be 1 or 2, got {order}")
    u = g.values
    if method == "spectral":
        if not g.is_periodic:
            raise GridError("spectral differentiation needs a periodic domain")
        k = wavenumbers(g.n, g.dx)
        uh = np.fft.fft(u)
        if order == 1 and g.n % 2 == 0:
            k = k.copy()
            k[g.n // 2] = 0.0
        return g.with_values(np.real(np.fft.ifft((1j * k) ** order * uh)))
    if method != "central":
        raise GridError(f"unknown derivative method {method!r}")
    dx = g.dx
    if g.is_periodic:
        up, um = np.roll(u, -1), np.roll(u, 1)
        d = (up - um) / (2 * dx) if order == 1 else (up - 2 * u + um) / dx**2
        return g.with_values(d)
    d = np.empty_like(u)
    if order == 1:
        d[1:-1] = (u[2:] - u[:-2]) / (2 * dx)
        d[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * dx)
        d[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * dx)
    else:
        d[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2
        d[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / dx**2
        d[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / dx**2
    return g.with_values(d)


def total_variation(g: GridFunction, periodic_wrap: bool | None = None) -> float:
    wrap = g.is_periodic if periodic_wrap is None else periodic_wrap
    v = np.append(g.values, g.values[0]) if wrap else g.values
    return float(np.abs(np.diff(v)).sum())


# -- fractional variation -----------------------------------------------------


def _window(g: GridFunction, a: float, b: float) -> np.ndarray:
    if a > b:
        raise GridError(f"empty interval [{a}, {b}]")
    tol = 1e-9 * g.dx
    lo, hi = g.x[0], g.x[-1]
    if a < lo - tol or b > hi + tol:
        raise GridError(f"interval [{a}, {b}] not inside grid domain [{lo}, {hi}]")
    mask = (g.x >= a - tol) & (g.x <= b + tol)
    return g.values[mask]


def turning_points(v: np.ndarray) -> np.ndarray:
    """Endpoints plus strict local extrema of ``v`` (plateaus collapsed)."""
    if v.size <= 2:
        return v.copy()
    keep = np.concatenate(([True], np.diff(v) != 0))
    w = v[keep]
    if w.size <= 2:
        return np.array([v[0], v[-1]]) if w.size < 2 else w
    d = np.diff(w)
    turn = np.sign(d[1:]) != np.sign(d[:-1])
    return np.concatenate(([w[0]], w[1:-1][turn], [w[-1]]))


def pvar_dp(v: np.ndarray, q: float) -> float:
    """max over sub-partitions keeping both ends of sum |v_j - v_i|^q.

    Quadratic dynamic programme; call on ``turning_points`` output.
    """
    k = v.size
    if k < 2:
        return 0.0
    best = np.zeros(k)
    for j in range(1, k):
        best[j] = np.max(best[:j] + np.abs(v[j] - v[:j]) ** q)
    return float(best[-1])


def pvar_bruteforce(v: np.ndarray, q: float) -> float:
    """Exhaustive enumeration over all partitions; exponential, test use only."""
    v = np.asarray(v, dtype=float)
    m = v.size
    if m < 2:
        return 0.0
    inner_idx = range(1, m - 1)
    best = 0.0
    for r in range(m - 1):
        for sub in combinations(inner_idx, r):
            idx = (0, *sub, m - 1)
            s = float(np.sum(np.abs(np.diff(v[list(idx)])) ** q))
            best = max(best, s)
    return best


def fractional_tv(g: GridFunction, gamma: float, a: float, b: float) -> float:
    """Fractional gamma-total variation of ``g`` over grid points in ``[a, b]``."""
    if not 0 < gamma <= 1:
        raise GridError(f"gamma must lie in (0, 1], got {gamma}")
    v = _window(g, a, b)
    q = 1.0 / gamma
    tp = turning_points(v)
    if q == 1.0:
        return float(np.abs(np.diff(tp)).sum())
    return pvar_dp(tp, q)
