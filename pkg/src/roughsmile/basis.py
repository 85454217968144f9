"""Orthonormal bases of L^2[0, 1] used for the Ritz and KL steps.

Each basis function is described through its derivative atom ``edot_i``, its
primitive ``e_i(s) = int_0^s edot_i`` and its kernel convolution
``ehat_i = K edot_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import KernelSpec

SQRT2 = math.sqrt(2.0)


def haar_support(i: int):
    """``(a, m, b, amplitude)`` of Haar atom ``i >= 2``: ``+amp`` on [a, m), ``-amp`` on [m, b)."""
    k = (i - 1).bit_length() - 1
    l = i - 2**k
    width = 2.0 ** -(k + 1)
    return (2 * l - 2) * width, (2 * l - 1) * width, 2 * l * width, 2.0 ** (k / 2)


@dataclass(frozen=True)
class BasisSpec:
    """A Fourier or Haar basis truncated to ``N`` functions.

    Parameters
    ----------
    kind : {"fourier", "haar"}
    N : int
        Number of basis functions, at least one.
    """

    kind: str = "haar"
    N: int = 8

    def __post_init__(self):
        if self.kind not in ("fourier", "haar"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @property
    def resolution(self) -> int:
        """Grid cells needed: Haar breakpoints on cell boundaries, about one cell per Fourier mode."""
        if self.kind == "fourier":
            return self.N
        if self.N == 1:
            return 1
        k = (self.N - 1).bit_length() - 1
        return 2 ** (k + 1)

    def _pts(self, s):
        return np.atleast_1d(np.asarray(s, dtype=float))

    def edot(self, s):
        """Atoms ``edot_i(s)``, shape ``(N, len(s))``."""
        s = self._pts(s)
        out = np.empty((self.N, s.size))
        out[0] = 1.0
        if self.kind == "fourier":
            for i in range(2, self.N + 1):
                n = i // 2
                trig = np.cos if i % 2 == 0 else np.sin
                out[i - 1] = SQRT2 * trig(2 * np.pi * n * s)
        else:
            for i in range(2, self.N + 1):
                a, m, b, amp = haar_support(i)
                # average of both sides at breakpoints
                up = 0.5 * (np.sign(s - a) + np.sign(m - s))
                down = 0.5 * (np.sign(s - m) + np.sign(b - s))
                out[i - 1] = amp * (up - down)
        return out

    def e(self, s):
        """Primitives ``e_i(s) = int_0^s edot_i``, shape ``(N, len(s))``."""
        s = self._pts(s)
        out = np.empty((self.N, s.size))
        out[0] = s
        if self.kind == "fourier":
            for i in range(2, self.N + 1):
                w = 2 * np.pi * (i // 2)
                if i % 2 == 0:
                    out[i - 1] = SQRT2 * np.sin(w * s) / w
                else:
                    out[i - 1] = SQRT2 * (1.0 - np.cos(w * s)) / w
        else:
            for i in range(2, self.N + 1):
                a, m, b, amp = haar_support(i)
                out[i - 1] = amp * (np.clip(s, a, m) - a - (np.clip(s, m, b) - m))
        return out

    def ehat(self, s, kernel: KernelSpec):
        """Convolutions ``(K edot_i)(s)``, shape ``(N, len(s))``.

        Haar atoms use the kernel primitive at the breakpoints, which is exact
        for Riemann-Liouville kernels; Fourier atoms are integrated numerically
        after the diagonal substitution.
        """
        s = self._pts(s)
        out = np.empty((self.N, s.size))
        out[0] = kernel.k1(s)
        if self.kind == "fourier":
            n_nodes = max(96, 8 * self.N)
            for i in range(2, self.N + 1):
                w = 2 * np.pi * (i // 2)
                trig = np.cos if i % 2 == 0 else np.sin
                out[i - 1] = kernel.convolve_smooth(lambda u, w=w, trig=trig: SQRT2 * trig(w * u), s, n_nodes)
        else:
            cache = {}

            def P(b):
                if b not in cache:
                    cache[b] = kernel.primitive(s, b)
                return cache[b]

            for i in range(2, self.N + 1):
                a, m, b, amp = haar_support(i)
                out[i - 1] = amp * (2.0 * P(m) - P(a) - P(b))
        return out

    def gram(self, grid):
        """Gram matrix of the atoms on a quadrature grid."""
        E = self.edot(grid.nodes)
        return (E * grid.weights) @ E.T
