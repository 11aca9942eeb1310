"""Quadrature for two-noise renormalisation constants.

The integrals are written in the mixed representation (t, k), Fourier in
x and direct in t.  For t > 0 the heat kernel is exp(-c k^2 t), so its
singularity at the origin never has to be resolved on a grid.  Two choices
keep this exact:

* the mollifier profile is a finite sum of products phi(t) psi(x), which
  makes the x-transform of the covariance a sum of products as well;
* the cutoff depends on t only, K_c = chi(t) P_c.  Then
  (d_t - c d_x^2) K_c = delta_0 + f_c with f_c = chi'(t) P_c, smooth and
  supported in the slab r^2/4 <= t <= r^2.

The time integrals over t + s are done in closed form where chi = 1 and by
Gauss-Legendre in the cutoff slab.  Everything else is Gauss-Legendre on
fixed panels, so results are deterministic for a given :class:`Quad`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import quad as adaptive_quad, trapezoid
from scipy.interpolate import CubicSpline
from scipy.special import gammainc

from .registry import UnknownIdentity, registry, registry_identity
from .renorm import DEFAULT_NULL
from .trees import EdgeKind, Tree, parse_tree


class NumericError(ValueError):
    pass


class UnderResolved(NumericError):
    pass


# ---------------------------------------------------------------------------
# profiles


def bump(x, sharpness: float = 1.0):
    """exp(-s / (1 - x^2)) on (-1, 1), zero outside."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    safe = np.where(inside, 1 - x * x, 1.0)
    return np.where(inside, np.exp(-sharpness / safe), 0.0)


_NORM_NODES = 4001


@lru_cache(maxsize=None)
def _bump_mass(sharpness: float) -> float:
    u = np.linspace(-1, 1, _NORM_NODES)
    return float(np.sum(bump(u, sharpness)) * (u[1] - u[0]))


@dataclass(frozen=True)
class Mollifier:
    """rho(t, x) = phi(t) psi(x) (1 + eta t x) at unit scale, phi and psi
    normalised bumps on [-1, 1].  The support is the unit parabolic ball
    max(|t|^(1/2), |x|) <= 1.  eta != 0 breaks x -> -x and is only meant
    for ablations; |eta| < 1 keeps rho nonnegative.  (A perturbation
    without t-dependence would not do: the x-correlation of any product
    profile is even.)"""

    eps: float = 0.1
    eta: float = 0.0
    sharpness: float = 1.0

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise NumericError(f"mollifier scale must be positive, got {self.eps}")
        if not abs(self.eta) < 1:
            raise NumericError("|eta| < 1 is needed for a nonnegative profile")

    @property
    def symmetric(self) -> bool:
        return self.eta == 0

    def with_eps(self, eps: float) -> "Mollifier":
        return replace(self, eps=eps)

    def terms(self) -> list[tuple[float, Callable, Callable]]:
        """(weight, time factor, space factor) at unit scale."""
        z = _bump_mass(self.sharpness)

        def phi(t):
            return bump(t, self.sharpness) / z

        def psi(x):
            return bump(x, self.sharpness) / z

        out = [(1.0, phi, psi)]
        if self.eta:
            out.append((self.eta, lambda t: np.asarray(t) * phi(t), lambda x: np.asarray(x) * psi(x)))
        return out

    def unit(self, t, x):
        return sum(w * ft(t) * fx(x) for w, ft, fx in self.terms())

    def __call__(self, t, x):
        e = self.eps
        return self.unit(np.asarray(t) / e**2, np.asarray(x) / e) / e**3


# ---------------------------------------------------------------------------
# kernels


def _h(x):
    x = np.asarray(x, dtype=float)
    pos = x > 0
    return np.where(pos, np.exp(-1 / np.where(pos, x, 1.0)), 0.0)


@dataclass(frozen=True)
class KernelFamily:
    """Heat kernels P(c, t, x) of d_t - c d_x^2 and their truncations.

    ``radius`` is the parabolic truncation radius r: chi(t) = 1 for
    t <= r^2/4 and 0 for t >= r^2.  ``radius=None`` is the un-truncated
    kernel."""

    c: float = 1.0
    radius: float | None = 1.0
    lam: float = 0.1

    def __post_init__(self) -> None:
        if not (self.lam <= self.c <= 1 / self.lam):
            raise NumericError(f"c = {self.c} outside [{self.lam}, {1 / self.lam}]")
        if self.radius is not None and not self.radius > 0:
            raise NumericError("truncation radius must be positive")

    @property
    def slab(self) -> tuple[float, float] | None:
        if self.radius is None:
            return None
        return self.radius**2 / 4, self.radius**2

    def P(self, t, x, dx: int = 0, dc: int = 0):
        """d_x^dx d_c^dc P(c, t, x), zero for t <= 0."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        c = self.c
        pos = t > 0
        ts = np.where(pos, t, 1.0)
        g = np.exp(-x * x / (4 * c * ts)) / np.sqrt(4 * np.pi * c * ts)
        # d_c log P = -1/(2c) + x^2/(4 c^2 t); d_x log P = -x/(2 c t)
        u = -1 / (2 * c) + x * x / (4 * c * c * ts)
        du = 1 / (2 * c * c) - x * x / (2 * c**3 * ts)
        if dc == 0:
            f = g
        elif dc == 1:
            f = g * u
        elif dc == 2:
            f = g * (u * u + du)
        else:
            raise NumericError("c-derivatives above order 2 are not tabulated")
        if dx == 1:
            # d_x of g*Q(x) with Q the c-derivative factor
            if dc == 0:
                f = -x / (2 * c * ts) * g
            elif dc == 1:
                f = g * (-x / (2 * c * ts) * u + x / (2 * c * c * ts))
            else:
                dq = 2 * u * x / (2 * c * c * ts) - x / (c**3 * ts)
                f = g * (-x / (2 * c * ts) * (u * u + du) + dq)
        elif dx != 0:
            raise NumericError("only first spatial derivatives are tabulated")
        return np.where(pos, f, 0.0)

    def chi(self, t):
        t = np.asarray(t, dtype=float)
        if self.slab is None:
            return np.ones_like(t)
        t1, t2 = self.slab
        u = np.clip((t - t1) / (t2 - t1), 0.0, 1.0)
        a, b = _h(1 - u), _h(u)
        return a / (a + b)

    def dchi(self, t):
        t = np.asarray(t, dtype=float)
        if self.slab is None:
            return np.zeros_like(t)
        t1, t2 = self.slab
        u = (t - t1) / (t2 - t1)
        inside = (u > 0) & (u < 1)
        us = np.where(inside, u, 0.5)
        a, b = _h(1 - us), _h(us)
        d = -a * b * (1 / (1 - us) ** 2 + 1 / us**2) / (a + b) ** 2 / (t2 - t1)
        return np.where(inside, d, 0.0)

    def K(self, t, x, dx: int = 0, dc: int = 0):
        return self.chi(t) * self.P(t, x, dx, dc)

    def f(self, t, x, dc: int = 0):
        """The smooth remainder (d_t - c d_x^2) K_c - delta_0."""
        return self.dchi(t) * self.P(t, x, 0, dc)


# ---------------------------------------------------------------------------
# quadrature


def _gauss(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _panels(breaks: Sequence[float], n: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ws = zip(*(_gauss(a, b, n) for a, b in zip(breaks[:-1], breaks[1:])))
    return np.concatenate(xs), np.concatenate(ws)


@dataclass(frozen=True)
class Quad:
    """Quadrature resolution.  ``refine(2)`` doubles every node count."""

    n_s: int = 801          # trapezoid nodes for the profile transforms
    n_d: int = 32           # Gauss nodes per half of the time-lag range
    n_log: int = 28         # geometric k-panels on [k_min, 1]
    n_lin: int = 100        # uniform k-panels on [1, k_max]
    order: int = 12         # Gauss nodes per k-panel
    n_sigma: int = 48       # Gauss nodes across the cutoff slab (t + s)
    n_slab: int = 64        # Gauss nodes for the remainder's time argument
    k_min: float = 1e-5
    k_max: float = 200.0

    def refine(self, factor: int = 2) -> "Quad":
        return replace(
            self,
            n_s=(self.n_s - 1) * factor + 1,
            n_d=self.n_d * factor,
            n_log=self.n_log * factor,
            n_lin=self.n_lin * factor,
            n_sigma=self.n_sigma * factor,
            n_slab=self.n_slab * factor,
        )

    def kappa(self) -> tuple[np.ndarray, np.ndarray]:
        breaks = [0.0, *np.geomspace(self.k_min, 1.0, self.n_log + 1),
                  *np.linspace(1.0, self.k_max, self.n_lin + 1)[1:]]
        return _panels(breaks, self.order)


DEFAULT_QUAD = Quad()


@lru_cache(maxsize=32)
def _space_hat(m: Mollifier, q: Quad) -> np.ndarray:
    """psi_r^(kappa) for every profile term on the k nodes, shape (R, Nk)."""
    kap, _ = q.kappa()
    u = np.linspace(-1, 1, q.n_s)
    h = u[1] - u[0]
    ph = np.exp(-1j * np.outer(u, kap))
    return np.stack([(fx(u) * h) @ ph for _, _, fx in m.terms()])


def _time_corr(m: Mollifier, q: Quad, d: np.ndarray) -> np.ndarray:
    """Phi_rr'(d) = int phi_r(s + d) phi_r'(s) ds, shape (R, R, Nd)."""
    s = np.linspace(-1, 1, q.n_s)
    h = s[1] - s[0]
    terms = m.terms()
    out = np.empty((len(terms), len(terms), len(d)))
    for i, (_, fi, _) in enumerate(terms):
        shifted = fi(s[None, :] + d[:, None])
        for j, (_, fj, _) in enumerate(terms):
            out[i, j] = shifted @ (fj(s) * h)
    return out


def _cov_hat(m: Mollifier, q: Quad, d: np.ndarray) -> np.ndarray:
    """x-transform of the unit-scale covariance, C^_1(d, kappa), shape
    (Nd, Nk).  C^_1(d, -kappa) is its complex conjugate."""
    psi = _space_hat(m, q)
    phi = _time_corr(m, q, d)
    w = [t[0] for t in m.terms()]
    out = np.zeros((len(d), psi.shape[1]), dtype=complex)
    for i in range(len(w)):
        for j in range(len(w)):
            out += w[i] * w[j] * phi[i, j][:, None] * (psi[i] * np.conj(psi[j]))[None, :]
    return out


def _fold(chat: np.ndarray, n: int) -> np.ndarray:
    """int_R F(k) C^(-k) dk = int_0^oo F(k) [conj C^(k) + (-1)^n C^(k)] dk
    for F(-k) = (-1)^n F(k)."""
    if n % 2 == 0:
        return 2 * chat.real
    return -2j * chat.imag


def _int_pow_exp(nmax: int, lam: np.ndarray, a: np.ndarray, length) -> list[np.ndarray]:
    """int_a^(a+L) s^n exp(-lam s) ds for n = 0..nmax, broadcasting lam
    against a.  L may be infinite."""
    lam = np.asarray(lam, dtype=float)
    a = np.asarray(a, dtype=float)
    base = np.exp(-lam * a)
    unbounded = bool(np.all(np.isinf(length)))
    inner = []
    for mm in range(nmax + 1):
        p = 1.0 if unbounded else gammainc(mm + 1, lam * length)
        inner.append(math.factorial(mm) * p / lam ** (mm + 1))
    out = []
    for n in range(nmax + 1):
        acc = 0.0
        for mm in range(n + 1):
            acc = acc + math.comb(n, mm) * a ** (n - mm) * inner[mm]
        out.append(base * acc)
    return out


def _lag_poly(i: int, j: int, delta: np.ndarray) -> list[np.ndarray]:
    """Coefficients in sigma of ((sigma + delta)/2)^i ((sigma - delta)/2)^j."""
    out = [np.zeros_like(delta) for _ in range(i + j + 1)]
    for p in range(i + 1):
        for r in range(j + 1):
            out[p + r] = out[p + r] + (math.comb(i, p) * math.comb(j, r)
                                       * delta ** (i - p) * (-delta) ** (j - r))
    return [c / 2 ** (i + j) for c in out]


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class Shape:
    """A two-noise tree read as edges (x-derivatives, c-derivatives).  With
    ``root_noise`` the single edge ends in the second noise; otherwise both
    edges end in noises."""

    root_noise: bool
    edges: tuple[tuple[int, int], ...]


def tree_shape(tree: Tree | str, tup: Sequence[int] | None = None) -> Shape:
    t = parse_tree(tree) if isinstance(tree, str) else tree
    if tup is not None:
        t = t.skeleton.decorate(tuple(tup))
    if t.noises != 2 or t.x_total != (0, 0):
        raise NumericError(f"unsupported tree shape {t}: need two noises and no x-powers")
    for e in t.children:
        if not (e.child.noise and not e.child.children):
            raise NumericError(f"unsupported tree shape {t}: edges must end in a noise")
    edges = tuple((1 if e.kind == EdgeKind.PRIME else 0, e.order) for e in t.children)
    if any(o > 2 for _, o in edges):
        raise NumericError(f"{t}: derivative orders above 2 are not supported")
    if t.noise and len(edges) == 1:
        return Shape(True, edges)
    if not t.noise and len(edges) == 2:
        return Shape(False, edges)
    raise NumericError(f"unsupported tree shape {t}")


def _check_scale(m: Mollifier, k: KernelFamily) -> None:
    if k.slab is not None and 2 * m.eps**2 >= k.slab[0]:
        raise NumericError(f"eps = {m.eps} too large for truncation radius {k.radius}")


def constant2(tree: Tree | str, tup: Sequence[int] | None = None, c: float = 1.0,
              m: Mollifier | None = None, radius: float | None = None,
              quad: Quad = DEFAULT_QUAD) -> float:
    """The Wick-pair integral of a two-noise tree.

    For a noise carrying one edge to a noise this is
    int d_x^p d_c^i K_c(z) C_eps(z) dz; for two edges to noises it is
    the double integral of the two kernels against C_eps(z - w).
    ``radius=None`` uses the un-truncated heat kernel."""
    m = m or Mollifier()
    kern = KernelFamily(c, radius)
    _check_scale(m, kern)
    sh = tree_shape(tree, tup)
    if sh.root_noise:
        return _single(sh.edges[0], kern, m, quad)
    return _double(sh.edges, kern, m, quad)


def _single(edge: tuple[int, int], kern: KernelFamily, m: Mollifier, quad: Quad) -> float:
    dx, i = edge
    eps, c = m.eps, kern.c
    kap, wk = quad.kappa()
    d, wd = _gauss(0.0, 2.0, 2 * quad.n_d)
    chat = _fold(_cov_hat(m, quad, d), dx)
    dd, kk = d[:, None], kap[None, :]
    f = (1j * kk) ** dx * (-kk * kk * dd) ** i * np.exp(-c * kk * kk * dd)
    val = np.einsum("d,k,dk->", wd, wk, f * chat) / (2 * np.pi)
    return float(val.real) * eps ** (-1 - dx)


def _double(edges, kern: KernelFamily, m: Mollifier, quad: Quad) -> float:
    (dx1, i), (dx2, j) = edges
    n = dx1 + dx2
    if kern.slab is None and n < 2:
        raise NumericError("infrared divergent without truncation; pass a radius")
    eps, c = m.eps, kern.c
    kap, wk = quad.kappa()
    d = np.concatenate([_gauss(-2.0, 0.0, quad.n_d)[0], _gauss(0.0, 2.0, quad.n_d)[0]])
    wd = np.concatenate([_gauss(-2.0, 0.0, quad.n_d)[1], _gauss(0.0, 2.0, quad.n_d)[1]])
    chat = _fold(_cov_hat(m, quad, d), n)

    delta = eps**2 * d
    a = np.abs(delta)[:, None]
    k = kap[None, :] / eps
    lam = c * k * k
    coef = _lag_poly(i, j, delta)
    if kern.slab is None:
        ints = _int_pow_exp(len(coef) - 1, lam, a, math.inf)
    else:
        t1, t2 = kern.slab
        ints = _int_pow_exp(len(coef) - 1, lam, a, 2 * t1 - 2 * a)
    J = sum(cn[:, None] * In for cn, In in zip(coef, ints))
    if kern.slab is not None:
        J = J + _slab(i, j, delta, lam[0], kern, quad)

    phase = (1j) ** dx1 * (-1j) ** dx2
    M = phase * k**n * (-k * k) ** (i + j)
    val = 0.5 * np.einsum("d,k,dk->", wd, wk, M * chat * J) / (2 * np.pi)
    return float(val.real) / eps


def _slab(i: int, j: int, delta: np.ndarray, lam: np.ndarray, kern: KernelFamily,
           quad: Quad) -> np.ndarray:
    """The part of the sigma integral where chi(t) chi(s) < 1."""
    t1, t2 = kern.slab
    a = np.abs(delta)
    x, w = np.polynomial.legendre.leggauss(quad.n_sigma)
    lo, hi = 2 * t1 - a, 2 * t2 + a
    sig = 0.5 * (hi - lo)[:, None] * x[None, :] + 0.5 * (hi + lo)[:, None]
    ws = 0.5 * (hi - lo)[:, None] * w[None, :]
    t, s = (sig + delta[:, None]) / 2, (sig - delta[:, None]) / 2
    g = ws * kern.chi(t) * kern.chi(s) * t**i * s**j
    return np.einsum("dq,dqk->dk", g, np.exp(-lam[None, None, :] * sig[:, :, None]))


def remainder_term(order: int, c: float, m: Mollifier, radius: float = 1.0,
                   quad: Quad = DEFAULT_QUAD) -> float:
    """d_c^order of int int K_c(z) f_c(w) C_eps(z - w) dz dw."""
    kern = KernelFamily(c, radius)
    _check_scale(m, kern)
    eps = m.eps
    t1, t2 = kern.slab
    kap, wk = quad.kappa()
    d = np.concatenate([_gauss(-2.0, 0.0, quad.n_d)[0], _gauss(0.0, 2.0, quad.n_d)[0]])
    wd = np.concatenate([_gauss(-2.0, 0.0, quad.n_d)[1], _gauss(0.0, 2.0, quad.n_d)[1]])
    chat = _fold(_cov_hat(m, quad, d), 0)
    s, ws = _gauss(t1, t2, quad.n_slab)
    dt = eps**2 * d
    sig = 2 * s[None, :] + dt[:, None]                       # (d, s)
    g = ws[None, :] * kern.chi(s[None, :] + dt[:, None]) * kern.dchi(s)[None, :]
    k2 = (kap / eps) ** 2
    e = (-k2[None, None, :] * sig[:, :, None]) ** order * np.exp(-c * k2[None, None, :] * sig[:, :, None])
    inner = np.einsum("ds,dsk->dk", g, e)
    val = np.einsum("d,k,dk->", wd, wk, inner * chat) / (2 * np.pi)
    return float(val) / eps


# ---------------------------------------------------------------------------
# covariance on a grid


@dataclass(frozen=True)
class CovarianceGrid:
    t: np.ndarray
    x: np.ndarray
    values: np.ndarray      # shape (len(t), len(x))

    def integral(self) -> float:
        return float(trapezoid(trapezoid(self.values, self.x, axis=1), self.t))


def covariance(m: Mollifier, h: float | None = None, n_s: int = 801) -> CovarianceGrid:
    """C_eps = rho_eps * rho_eps(-.) on the parabolic grid with spatial step
    h and time step h^2, covering its support |t| <= 2 eps^2, |x| <= 2 eps."""
    eps = m.eps
    h = eps / 8 if h is None else h
    if eps < 3 * h:
        raise UnderResolved(f"eps = {eps} is below 3 grid cells of size {h}")
    nx = int(math.ceil(2 * eps / h))
    nt = int(math.ceil(2 * eps**2 / h**2))
    x = h * np.arange(-nx, nx + 1)
    t = h * h * np.arange(-nt, nt + 1)
    u = np.linspace(-1, 1, n_s)
    w = u[1] - u[0]
    terms = m.terms()
    y = x / eps
    d = t / eps**2
    vals = np.zeros((len(t), len(x)))
    for wi, fi, gi in terms:
        for wj, fj, gj in terms:
            # the symmetric shift makes the r = r' terms exactly even in y
            space = (gi(u[None, :] + y[:, None] / 2) * gj(u[None, :] - y[:, None] / 2)).sum(axis=1) * w
            time = (fi(u[None, :] + d[:, None]) * fj(u)[None, :]).sum(axis=1) * w
            vals += wi * wj * np.outer(time, space)
    return CovarianceGrid(t, x, vals / eps**3)


# ---------------------------------------------------------------------------
# identity residuals


@dataclass(frozen=True)
class ResidualRow:
    eps: float
    raw: float
    remainder: float

    @property
    def corrected(self) -> float:
        return self.raw + self.remainder


@dataclass
class ResidualTable:
    name: str
    bindings: dict
    c: float
    rows: list[ResidualRow] = field(default_factory=list)

    def gaps(self) -> list[tuple[float, float, float]]:
        out = []
        for p in range(len(self.rows)):
            for q in range(p + 1, len(self.rows)):
                a, b = self.rows[p], self.rows[q]
                out.append((max(a.eps, b.eps), min(a.eps, b.eps), abs(a.raw - b.raw)))
        return sorted(out)

    def cauchy_decreasing(self) -> bool:
        """Every gap between residuals is smaller than every gap involving a
        larger eps."""
        g = self.gaps()
        return all(x[2] < y[2] for x in g for y in g if x[0] < y[0])

    def scale(self) -> float:
        return max(abs(r.raw) for r in self.rows)

    def records(self) -> list[dict]:
        return [{"kind": "numeric_residual", "identity": self.name, "bindings": self.bindings, "c": self.c,
                 "eps": r.eps, "raw": r.raw, "remainder": r.remainder, "corrected": r.corrected}
                for r in self.rows]

    def render(self) -> str:
        b = ", ".join(f"{k}={v}" for k, v in self.bindings.items())
        lines = [f"identity {self.name} ({b}) at c = {self.c}",
                 f"{'eps':>8} {'residual':>16} {'remainder':>16} {'corrected':>12}"]
        for r in self.rows:
            lines.append(f"{r.eps:8.4g} {r.raw:16.10f} {r.remainder:16.10f} {r.corrected:12.3e}")
        for hi, lo, g in self.gaps():
            lines.append(f"gap({hi:g}, {lo:g}) = {g:.3e}")
        lines.append(f"Cauchy-decreasing: {'yes' if self.cauchy_decreasing() else 'no'}")
        return "\n".join(lines)


def _remainder_order(name: str, bindings: dict) -> int:
    spec = registry().get(name)
    if spec is None:
        raise UnknownIdentity(name)
    if spec.family != 1 or spec.taus != ("Xi", "Xi"):
        raise NumericError(f"no remainder formula for identity {name}")
    o = spec.order
    return int(eval(str(o), {"__builtins__": {}}, dict(bindings))) if isinstance(o, str) else int(o)


def identity_residual(name: str, bindings: dict | None = None, c: float = 1.0,
                      m: Mollifier | None = None, eps_list: Iterable[float] = (0.1, 0.05, 0.025),
                      radius: float = 1.0, quad: Quad = DEFAULT_QUAD) -> ResidualTable:
    """Residuals of a two-noise identity along an eps ladder.

    ``raw`` is the display lhs - rhs evaluated on the constants with a = c.
    ``remainder`` is the contribution of the smooth part f_c of the
    truncated kernel, so ``raw + remainder`` vanishes up to quadrature."""
    m = m or Mollifier()
    bindings = dict(bindings or {})
    order = _remainder_order(name, bindings)
    rel = registry_identity(name, bindings).display
    terms = list(rel)
    for t, _ in terms:
        if t.noises != 2:
            raise NumericError(f"identity {name} involves {t}, which has {t.noises} noises")
    table = ResidualTable(name, bindings, c)
    for eps in eps_list:
        me = m.with_eps(eps)
        raw = 0.0
        for t, p in terms:
            raw += float(p.evaluate({"a": c})) * constant2(t, None, c, me, radius, quad)
        table.rows.append(ResidualRow(eps, raw, remainder_term(order, c, me, radius, quad)))
    return table


# ---------------------------------------------------------------------------
# checks used by the cli and the acceptance suite


TWO_NOISE_SHAPES = ("Xi*I[Xi]", "Ip[Xi]*Ip[Xi]", "Ip[Xi]*I[Xi]", "I[Xi]*I[Xi]")


def two_noise_trees(max_order: int = 1) -> list[Tree]:
    """The two-noise trees with derivative orders up to ``max_order``."""
    out: set[Tree] = set()
    for s in TWO_NOISE_SHAPES:
        t = parse_tree(s)
        for tup in itertools.product(range(max_order + 1), repeat=t.n_edges):
            out.add(t.decorate(tup))
    return sorted(out)


def parity_table(m: Mollifier, c: float = 1.0, radius: float = 1.0, max_order: int = 1,
                 quad: Quad = DEFAULT_QUAD) -> list[tuple[Tree, bool, float]]:
    """(tree, flagged by x_parity, value) for the two-noise trees."""
    return [(t, DEFAULT_NULL.reason(t) == "x_parity", constant2(t, None, c, m, radius, quad))
            for t in two_noise_trees(max_order)]


def scaling_values(tree: str, tup: Sequence[int] | None, c: float, m: Mollifier,
                   eps_list: Iterable[float], quad: Quad = DEFAULT_QUAD) -> list[tuple[float, float]]:
    """(eps, eps * constant) with the un-truncated kernel.  The quadrature
    works in scaled variables, so these agree to rounding; compare with
    :func:`direct_single` for a check that is not built in."""
    return [(e, e * constant2(tree, tup, c, m.with_eps(e), None, quad)) for e in eps_list]


def direct_single(m: Mollifier, c: float = 1.0, dx: int = 0, dc: int = 0, nodes: int = 201) -> float:
    """int d_x^dx d_c^dc P_c(z) C_eps(z) dz in physical space, for a
    symmetric mollifier: C_eps is a product of the time and space
    autocorrelations (adaptive quadrature, then splines), and t = s^2
    removes the t^(-1/2) singularity of P.  An independent route to
    :func:`constant2` on the tree Xi*I[Xi] with the same decoration."""
    if not m.symmetric:
        raise NumericError("the direct route needs a product mollifier (eta = 0)")
    (_, phi, psi), = m.terms()
    e = m.eps
    kern = KernelFamily(c, None)

    def corr(f, scale, lag):
        lo, hi = -scale, scale - lag
        if hi <= lo:
            return 0.0
        return adaptive_quad(lambda u: f((u + lag) / scale) * f(u / scale), lo, hi,
                             epsabs=0, epsrel=1e-11, limit=100)[0] / scale**2

    xs = np.linspace(0.0, 2 * e, nodes)
    ts = np.linspace(0.0, 2 * e * e, nodes)
    cx = CubicSpline(xs, [corr(psi, e, x) for x in xs], bc_type=((1, 0.0), "not-a-knot"))
    ct = CubicSpline(ts, [corr(phi, e * e, t) for t in ts], bc_type=((1, 0.0), "not-a-knot"))

    # d_c P changes sign in x, so the inner tolerance needs an absolute floor
    floor = 1e-11 * float(cx(0.0))

    def inner(s):
        t = s * s
        g = lambda x: float(kern.P(t, x, dx, dc)) * float(cx(abs(x)))
        width = min(2 * e, 12 * math.sqrt(c * t))
        val = adaptive_quad(g, -width, width, points=[0.0], epsabs=floor, epsrel=1e-9, limit=200)[0]
        return 2 * s * float(ct(t)) * val

    return adaptive_quad(inner, 0.0, math.sqrt(2) * e, epsabs=0, epsrel=1e-9, limit=200)[0]


def relative_spread(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / np.abs(v).max())
