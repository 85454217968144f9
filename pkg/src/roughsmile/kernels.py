"""Self-similar Volterra kernels and their K-functionals.

A kernel here is ``K(t, s) = (t - s)**(H - 1/2) * f_K(s / t)`` for ``s < t`` and
zero otherwise.  The Riemann-Liouville case has ``f_K = sqrt(2H)`` and admits
closed forms for everything; other self-similar kernels are carried by a
tabulated shape factor and handled by quadrature.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, special

H_MIN_QUADRATURE = 0.02

class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, what, estimate, tol):
        super().__init__(f"{what}: error estimate {estimate:.3e} exceeds tolerance {tol:.1e}")
        self.estimate = estimate
        self.tol = tol


def _check_hurst(H):
    if not (0.0 < H <= 0.5):
        raise ValueError(f"Hurst index must lie in (0, 1/2], got {H}")


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function on [0, 1]: ``values[j]`` on ``[breaks[j], breaks[j+1])``."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or v.shape != (b.size - 1,):
            raise ValueError("need len(values) == len(breaks) - 1")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breaks must be strictly increasing")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def indicator(cls, a, b):
        return cls(np.array([a, b]), np.array([1.0]))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.breaks, s, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        out = np.where(inside, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)
        return out


class KernelSpec:
    """Base class for self-similar Volterra kernels with Hurst index ``H``."""

    kind = "abstract"

    def __init__(self, H: float):
        _check_hurst(H)
        self.H = float(H)

    @property
    def alpha(self) -> float:
        """Exponent ``H + 1/2`` of the primitive."""
        return self.H + 0.5

    def shape(self, r):
        raise NotImplementedError

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        pos = t > s
        lag = np.where(pos, t - s, 1.0)
        ratio = np.where(pos, s / np.where(t > 0, t, 1.0), 0.0)
        return np.where(pos, lag ** (self.H - 0.5) * self.shape(ratio), 0.0)

    def __repr__(self):
        return f"{type(self).__name__}(H={self.H})"

    # -- convolutions -----------------------------------------------------

    def _tail(self, c, t, n_nodes=48):
        """``int_c^t K(t, s) ds`` by Gauss-Jacobi with the diagonal weight built in."""
        x, w = special.roots_jacobi(n_nodes, self.H - 0.5, 0.0)
        span = np.maximum(t - c, 0.0)[..., None]
        s = c[..., None] + 0.5 * span * (1.0 + x)
        tt = np.where(t > 0, t, 1.0)[..., None]
        vals = self.shape(np.clip(s / tt, 0.0, 1.0))
        return (vals * w).sum(axis=-1) * (0.5 * span[..., 0]) ** self.alpha

    def primitive(self, t, b):
        """``P(t, b) = int_0^{min(t, b)} K(t, s) ds``, broadcasting ``t`` against ``b``."""
        t, b = np.broadcast_arrays(np.asarray(t, float), np.asarray(b, float))
        t = np.maximum(t, 0.0)
        m = np.clip(b, 0.0, t)
        return self._tail(np.zeros_like(t), t) - self._tail(m, t)

    def convolve_step(self, f: StepFunction, t):
        """Exact-as-possible ``(K f)(t)`` for a step function ``f``."""
        t = np.asarray(t, dtype=float)
        P = self.primitive(t[..., None], f.breaks)
        return (np.diff(P, axis=-1) * f.values).sum(axis=-1)

    def convolve_smooth(self, f: Callable, t, n_nodes: int = 96):
        """``(K f)(t)`` for a smooth callable by Gauss-Jacobi quadrature.

        The weight ``(t - s)**(H - 1/2)`` is absorbed into the Jacobi rule, so
        the remaining integrand ``f_K(s/t) f(s)`` is smooth and convergence is
        spectral.
        """
        t = np.asarray(t, dtype=float)
        x, w = special.roots_jacobi(n_nodes, self.H - 0.5, 0.0)
        half = 0.5 * np.maximum(t, 0.0)[..., None]
        s = half * (1.0 + x)
        tt = np.where(t > 0, t, 1.0)[..., None]
        vals = self.shape(np.clip(s / tt, 0.0, 1.0)) * f(s)
        out = (vals * w).sum(axis=-1) * half[..., 0] ** (self.H + 0.5)
        return np.where(t > 0, out, 0.0)

    def k1(self, t):
        """``K1(t) = int_0^t K(t, s) ds``."""
        return self.primitive(t, np.asarray(t, dtype=float))

    def kbar1(self, u, n_nodes: int = 48):
        """Adjoint applied to one: ``int_u^1 K(t, u) dt``."""
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        x, w = special.roots_jacobi(n_nodes, 0.0, self.H - 0.5)
        span = (1.0 - u)[..., None]
        t = u[..., None] + 0.5 * span * (1.0 + x)
        vals = self.shape(np.clip(u[..., None] / np.where(t > 0, t, 1.0), 0.0, 1.0))
        return (vals * w).sum(axis=-1) * (0.5 * span[..., 0]) ** self.alpha


class RiemannLiouvilleKernel(KernelSpec):
    """``K(t, s) = sqrt(2H) (t - s)**(H - 1/2)``."""

    kind = "riemann-liouville"

    @property
    def scale(self) -> float:
        return math.sqrt(2.0 * self.H)

    def shape(self, r):
        return np.full(np.shape(r), self.scale)

    def primitive(self, t, b):
        t, b = np.broadcast_arrays(np.asarray(t, float), np.asarray(b, float))
        a = self.alpha
        tp = np.maximum(t, 0.0)
        return self.scale / a * (tp**a - np.maximum(t - np.maximum(b, 0.0), 0.0) ** a)

    def k1(self, t):
        return self.scale / self.alpha * np.maximum(np.asarray(t, float), 0.0) ** self.alpha

    def kbar1(self, u, n_nodes: int = 48):
        u = np.asarray(u, dtype=float)
        return self.scale / self.alpha * np.maximum(1.0 - u, 0.0) ** self.alpha


class TabulatedKernel(KernelSpec):
    """Self-similar kernel whose shape factor ``f_K`` is tabulated on [0, 1].

    Values are interpolated barycentrically, so Chebyshev-Lobatto nodes (see
    :meth:`from_function`) are the natural choice.
    """

    kind = "tabulated"

    def __init__(self, H: float, nodes, values):
        super().__init__(H)
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
            raise ValueError("nodes and values must be matching 1-d arrays (>= 2 points)")
        if nodes.min() < 0.0 or nodes.max() > 1.0:
            raise ValueError("shape nodes must lie in [0, 1]")
        self.nodes = nodes
        self.values = values
        # a fixed generator keeps the weight computation reproducible
        self._interp = interpolate.BarycentricInterpolator(nodes, values, rng=np.random.default_rng(0))

    @classmethod
    def from_function(cls, H, f_K, n: int = 32):
        j = np.arange(n + 1)
        r = 0.5 * (1.0 - np.cos(np.pi * j / n))
        return cls(H, r, np.asarray(f_K(r), dtype=float) * np.ones_like(r))

    @classmethod
    def from_file(cls, path):
        """Read the two-column ``r f_K(r)`` format with a ``# fK H=<value>`` header."""
        text = Path(path).read_text()
        first = text.lstrip().splitlines()[0] if text.strip() else ""
        m = re.match(r"#\s*fK\s+H\s*=\s*([0-9eE.+-]+)", first)
        if m is None:
            raise ValueError(f"{path}: missing '# fK H=<value>' header")
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
        return cls(float(m.group(1)), data[:, 0], data[:, 1])

    def to_file(self, path):
        body = "\n".join(f"{r:.17g} {v:.17g}" for r, v in zip(self.nodes, self.values))
        Path(path).write_text(f"# fK H={self.H!r}\n{body}\n")

    def shape(self, r):
        r = np.asarray(r, dtype=float)
        r = np.clip(r, 0.0, 1.0)
        # subnormal offsets from a node overflow the barycentric weights
        r = np.where(r < 1e-300, 0.0, r)
        return self._interp(r).reshape(r.shape)


# -- K-functionals ---------------------------------------------------------


@dataclass(frozen=True)
class KFunctionals:
    """The five kernel inner products on [0, 1] used by the expansions."""

    k1_1: float
    k2_1: float
    k1sq_1: float
    kbar1sq_1: float
    k1_kbar1: float

    def as_array(self):
        return np.array([self.k1_1, self.k2_1, self.k1sq_1, self.kbar1sq_1, self.k1_kbar1])


def kfunc_closed_form(H: float) -> KFunctionals:
    """Riemann-Liouville K-functionals in closed form."""
    _check_hurst(H)
    a = H + 0.5
    k1sq = H / ((H + 1.0) * a**2)
    return KFunctionals(
        k1_1=math.sqrt(2.0 * H) / (a * (H + 1.5)),
        k2_1=1.0 / (2.0 * H + 1.0),
        k1sq_1=k1sq,
        kbar1sq_1=k1sq,
        k1_kbar1=2.0 * H / a**2 * special.beta(H + 1.5, H + 1.5),
    )


def _quad(f, lo, hi, tol, what):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=200)[:2]
    if not np.isfinite(val) or err > 10 * tol:
        raise QuadratureError(what, err, tol)
    return val


def _k1_quad(kernel, t, tol):
    a = kernel.alpha
    if t <= 0.0:
        return 0.0
    return _quad(lambda u: kernel.shape((t - u ** (1.0 / a)) / t) / a, 0.0, t**a, tol, "K1")


def _k2_quad(kernel, t, tol):
    b = 2.0 * kernel.H
    if t <= 0.0:
        return 0.0
    return _quad(lambda u: kernel.shape((t - u ** (1.0 / b)) / t) ** 2 / b, 0.0, t**b, tol, "K^2 1")


def _kbar1_quad(kernel, u, tol):
    a = kernel.alpha
    if u >= 1.0:
        return 0.0
    return _quad(lambda v: kernel.shape(u / (u + v ** (1.0 / a))) / a, 0.0, (1.0 - u) ** a, tol, "Kbar1")


def kfunc_quadrature(kernel: KernelSpec, tol: float = 1e-8) -> KFunctionals:
    """K-functionals by iterated adaptive quadrature.

    The inner integrals are taken after substituting ``u = (t - s)**(H + 1/2)``
    (``u = (t - s)**(2H)`` for the squared kernel), which makes every integrand
    bounded.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if kernel.H < H_MIN_QUADRATURE:
        raise ValueError(f"quadrature paths require H >= {H_MIN_QUADRATURE}")
    inner = tol * 1e-3
    outer = tol * 0.1
    k1 = lambda t: _k1_quad(kernel, t, inner)
    kb = lambda u: _kbar1_quad(kernel, u, inner)
    return KFunctionals(
        k1_1=_quad(k1, 0.0, 1.0, outer, "<K1,1>"),
        k2_1=_quad(lambda t: _k2_quad(kernel, t, inner), 0.0, 1.0, outer, "<K^2 1,1>"),
        k1sq_1=_quad(lambda t: k1(t) ** 2, 0.0, 1.0, outer, "<(K1)^2,1>"),
        kbar1sq_1=_quad(lambda u: kb(u) ** 2, 0.0, 1.0, outer, "<(Kbar1)^2,1>"),
        k1_kbar1=_quad(lambda t: k1(t) * kb(t), 0.0, 1.0, outer, "<K1,Kbar1>"),
    )


def kbar1_integral_quadrature(kernel: KernelSpec, tol: float = 1e-10) -> float:
    """``<Kbar1, 1>`` by quadrature; equals ``<K1, 1>`` by Fubini."""
    return _quad(lambda u: _kbar1_quad(kernel, u, tol * 1e-3), 0.0, 1.0, tol * 0.1, "<Kbar1,1>")


def kfunctionals(kernel: KernelSpec, tol: float = 1e-8) -> KFunctionals:
    """Closed form for Riemann-Liouville kernels, quadrature otherwise."""
    if isinstance(kernel, RiemannLiouvilleKernel):
        return kfunc_closed_form(kernel.H)
    return kfunc_quadrature(kernel, tol)


# -- convenience helpers ---------------------------------------------------


def convolve(kernel: KernelSpec, f, t):
    """``(K f)(t) = int_0^t K(t, s) f(s) ds`` for a :class:`StepFunction` or callable."""
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0) | (t_arr > 1)):
        raise ValueError("t must lie in [0, 1]")
    if isinstance(f, StepFunction):
        out = kernel.convolve_step(f, t_arr)
    else:
        out = kernel.convolve_smooth(f, t_arr)
    return float(out) if np.ndim(out) == 0 else out


def adjoint_k1(kernel: KernelSpec, u):
    """``Kbar1(u) = int_u^1 K(t, u) dt``."""
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0) | (u_arr > 1)):
        raise ValueError("u must lie in [0, 1]")
    out = kernel.kbar1(u_arr)
    return float(out) if np.ndim(out) == 0 else out
