"""Monte Carlo pricing under generalized rough Bergomi.

Paths are simulated once on the unit interval and mapped to each maturity
``T`` by self-similarity: ``(What_{Tu}, W_{Tu}) = (T**H What_u, T**(1/2) W_u)`` in
law.  Every maturity therefore reuses the same Gaussian draws (common random
numbers) on its own ``n_steps`` grid.

Log-price and variance integrals both use left-point sums, which makes
``exp(X)`` an exact discrete martingale.

Random numbers come from Philox streams keyed by ``(seed, block)``.  Blocks
have a fixed size and results are concatenated in block order, so the output
does not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .blackscholes import BandError, bs_price, bs_vega, implied_vol
from .volmodel import RBergomiParams

SCHEMES = ("exact", "hybrid")
BLOCK_PATHS = 16384
JITTER = 1e-12
CSV_COLUMNS = ["t", "k", "x", "call", "call_se", "put", "put_se", "ivol", "ivol_se", "scheme", "seed"]


class CovarianceError(np.linalg.LinAlgError):
    """Joint covariance not positive definite even after jitter."""


def worker_count() -> int:
    env = os.environ.get("ROUGHSMILE_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("ROUGHSMILE_THREADS must be a positive integer")
        return n
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class MCConfig:
    """Simulation settings.

    Parameters
    ----------
    n_paths : int
        Number of paths (even when ``antithetic``).
    n_steps : int
        Time steps on each maturity's grid.
    scheme : {"exact", "hybrid"}
        Exact joint-covariance sampling or the hybrid kernel discretization.
    seed : int
        64-bit seed.
    antithetic : bool
        Pair each Gaussian draw with its negative.
    maturities, strikes : tuple of float
        Maturities in years and log-strikes for :func:`price_options`.
    block_paths : int
        Paths per RNG block; part of the reproducibility contract.
    """

    n_paths: int = 1_000_000
    n_steps: int = 256
    scheme: str = "exact"
    seed: int = 0
    antithetic: bool = True
    maturities: tuple = (0.1,)
    strikes: tuple = (0.0,)
    block_paths: int = BLOCK_PATHS

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError("n_paths must be at least 2")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("n_paths must be even with antithetic pairing")
        if self.n_steps < 8:
            raise ValueError("n_steps must be at least 8")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if len(self.maturities) == 0 or min(self.maturities) <= 0:
            raise ValueError("maturities must be positive and non-empty")
        if self.block_paths < 2 or self.block_paths % 2:
            raise ValueError("block_paths must be an even number >= 2")
        object.__setattr__(self, "maturities", tuple(float(t) for t in self.maturities))
        object.__setattr__(self, "strikes", tuple(float(k) for k in self.strikes))


# -- Gaussian generators on the unit grid ------------------------------------


def rl_covariance(u, H):
    """``Cov(What_s, What_t)`` of the Riemann-Liouville process on a grid ``u``."""
    u = np.asarray(u, float)
    s = np.minimum.outer(u, u)
    t = np.maximum.outer(u, u)
    a = H + 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(t > 0, s / t, 0.0)
        cov = 2 * H * s**a * t ** (H - 0.5) / a * special.hyp2f1(1.0, 0.5 - H, H + 1.5, r)
    # diagonal in closed form: Var = t^(2H)
    cov[np.diag_indices_from(cov)] = u ** (2 * H)
    return np.where(s > 0, cov, 0.0)


def rl_cross_covariance(u, H):
    """``Cov(What_{u_i}, W_{u_j} - W_{u_{j-1}})`` on a grid starting after 0."""
    u = np.asarray(u, float)
    prev = np.concatenate([[0.0], u[:-1]])
    a = H + 0.5
    c = math.sqrt(2 * H) / a
    ti = u[:, None]
    return c * (np.maximum(ti - prev[None, :], 0.0) ** a - np.maximum(ti - u[None, :], 0.0) ** a)


class _ExactFactor:
    """``What = Z1 A^T + Z2 L^T`` with ``dW = sqrt(du) Z1``."""

    def __init__(self, n, H):
        du = 1.0 / n
        u = du * np.arange(1, n + 1)
        A = rl_cross_covariance(u, H) / math.sqrt(du)
        R = rl_covariance(u, H) - A @ A.T
        R = 0.5 * (R + R.T)
        try:
            L = linalg.cholesky(R, lower=True)
        except linalg.LinAlgError:
            try:
                L = linalg.cholesky(R + JITTER * np.eye(n), lower=True)
            except linalg.LinAlgError as exc:
                raise CovarianceError(f"residual covariance not PSD after jitter {JITTER} (n={n}, H={H})") from exc
        self.At = np.ascontiguousarray(A.T)
        self.Lt = np.ascontiguousarray(L.T)
        self.n_normals = 2

    def __call__(self, Z1, Z2):
        return Z1 @ self.At + Z2 @ self.Lt


class _HybridFactor:
    """Hybrid scheme with one exact near-diagonal cell.

    ``What_{u_i} = sqrt(2H) [W1_i + sum_{k>=2} (b_k du)**(H-1/2) dW_{i-k+1}]``
    with ``b_k`` the optimal evaluation points and ``W1_i`` the exact integral
    over the last cell, drawn jointly with ``dW_i``.
    """

    def __init__(self, n, H):
        du = 1.0 / n
        a = H - 0.5
        k = np.arange(2, n + 1, dtype=float)
        if a == 0.0:
            b = k - 0.5  # flat kernel: any point in the cell is exact
        else:
            b = ((k ** (a + 1) - (k - 1) ** (a + 1)) / (a + 1)) ** (1.0 / a)
        weights = math.sqrt(2 * H) * (b * du) ** a
        T = np.zeros((n, n))
        for lag, wgt in enumerate(weights, start=1):
            idx = np.arange(lag, n)
            T[idx, idx - lag] = wgt
        self.Tt = np.ascontiguousarray(T.T)
        # joint law of (dW_i, sqrt(2H) W1_i)
        c12 = math.sqrt(2 * H) * du ** (H + 0.5) / (H + 0.5)
        c22 = du ** (2 * H)
        self.sd = math.sqrt(du)
        self.beta = c12 / du
        self.resid = math.sqrt(max(c22 - c12 * c12 / du, 0.0))
        self.n_normals = 2

    def __call__(self, Z1, Z2):
        dW = self.sd * Z1
        near = self.beta * dW + self.resid * Z2
        return near + dW @ self.Tt


_FACTOR_CACHE: dict = {}


def _factor(scheme, n, H):
    key = (scheme, n, float(H))
    if key not in _FACTOR_CACHE:
        _FACTOR_CACHE[key] = (_ExactFactor if scheme == "exact" else _HybridFactor)(n, H)
    return _FACTOR_CACHE[key]


# -- simulation --------------------------------------------------------------


@dataclass
class PathBundle:
    """Simulation output.

    Attributes
    ----------
    X : dict
        Terminal log-price per maturity, shape ``(n_paths,)``; antithetic
        partners sit at positions ``2j`` and ``2j + 1``.
    sample_times : ndarray
        Unit-grid times at which ``What`` and ``W`` are kept for diagnostics.
    W_hat_unit, W_unit : ndarray
        ``(n_paths, len(sample_times))`` samples on the unit interval; scale by
        ``T**H`` and ``T**(1/2)`` for maturity ``T``.
    paths : dict or None
        Full unit-grid arrays (``What``, ``dWtilde``) when requested.
    """

    params: RBergomiParams
    cfg: MCConfig
    X: dict
    sample_times: np.ndarray
    W_hat_unit: np.ndarray = field(repr=False)
    W_unit: np.ndarray = field(repr=False)
    paths: dict | None = field(default=None, repr=False)

    def variance_path(self, t):
        """Spot variance ``sigma(What_s, s^(2H))**2`` on maturity ``t``'s left points (needs ``paths``)."""
        if self.paths is None:
            raise ValueError("simulate with keep_paths=True to access full paths")
        p = self.params
        n = self.cfg.n_steps
        s = t * np.arange(n) / n
        what = np.hstack([np.zeros((self.paths["What"].shape[0], 1)), self.paths["What"][:, :-1]]) * t**p.H
        vol = p.sigma0 * np.exp(0.5 * p.eta * what - 0.25 * p.theta * p.eta**2 * s ** (2 * p.H))
        return vol * vol


def _block_normals(seed, block, size, antithetic, n_normals, n):
    bitgen = np.random.Philox(key=np.array([seed, block], dtype=np.uint64))
    rng = np.random.Generator(bitgen)
    m = size // 2 if antithetic else size
    Z = rng.standard_normal((n_normals + 1, m, n))
    if antithetic:
        # interleave partners: rows 2j and 2j+1
        full = np.empty((n_normals + 1, size, n))
        full[:, 0::2] = Z
        full[:, 1::2] = -Z
        Z = full
    return Z


def _simulate_block(params, cfg, factor, block, size, sample_idx, keep):
    n = cfg.n_steps
    Z = _block_normals(cfg.seed, block, size, cfg.antithetic, factor.n_normals, n)
    W_hat = factor(Z[0], Z[1])
    du = 1.0 / n
    dW = math.sqrt(du) * Z[0]
    dWt = params.rho * dW + params.rho_bar * math.sqrt(du) * Z[2]
    left = np.empty_like(W_hat)
    left[:, 0] = 0.0
    left[:, 1:] = W_hat[:, :-1]
    u_left = du * np.arange(n)
    H, eta, s0 = params.H, params.eta, params.sigma0
    out = {}
    for T in cfg.maturities:
        logvol = math.log(s0) + 0.5 * eta * T**H * left - 0.25 * params.theta * eta**2 * (T * u_left) ** (2 * H)
        vol = np.exp(logvol)
        out[T] = math.sqrt(T) * np.einsum("ij,ij->i", vol, dWt) - 0.5 * T * du * np.einsum("ij,ij->i", vol, vol)
    W = np.cumsum(dW, axis=1)
    extra = {"What": W_hat, "dWtilde": dWt} if keep else None
    return out, W_hat[:, sample_idx], W[:, sample_idx], extra


def simulate(params: RBergomiParams, cfg: MCConfig, keep_paths: bool = False, n_workers: int | None = None) -> PathBundle:
    """Simulate terminal log-prices for every maturity in ``cfg``.

    Parameters
    ----------
    params : RBergomiParams
    cfg : MCConfig
    keep_paths : bool
        Keep full unit-grid paths (memory ``~ 16 n_paths n_steps`` bytes).
    n_workers : int, optional
        Thread count; defaults to ``ROUGHSMILE_THREADS`` or ``min(4, cpus)``.
    """
    n = cfg.n_steps
    factor = _factor(cfg.scheme, n, params.H)
    sample_idx = np.unique(np.linspace(0, n - 1, 5).round().astype(int))
    sizes = [cfg.block_paths] * (cfg.n_paths // cfg.block_paths)
    if cfg.n_paths % cfg.block_paths:
        sizes.append(cfg.n_paths % cfg.block_paths)
    workers = n_workers or worker_count()

    def run(b):
        return _simulate_block(params, cfg, factor, b, sizes[b], sample_idx, keep_paths)

    if workers == 1 or len(sizes) == 1:
        results = [run(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, range(len(sizes))))
    X = {T: np.concatenate([r[0][T] for r in results]) for T in cfg.maturities}
    paths = None
    if keep_paths:
        paths = {k: np.concatenate([r[3][k] for r in results]) for k in ("What", "dWtilde")}
    return PathBundle(params, cfg, X, (sample_idx + 1) / n,
                      np.concatenate([r[1] for r in results]), np.concatenate([r[2] for r in results]), paths)


# -- pricing -----------------------------------------------------------------


def _mean_se(values, paired):
    if paired:
        values = values.reshape(-1, 2).mean(axis=1)
    m = values.size
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(m))


@dataclass(frozen=True)
class PriceRow:
    t: float
    k: float
    x: float
    call: float
    call_se: float
    put: float
    put_se: float
    ivol: float
    ivol_se: float
    scheme: str
    seed: int


def price_options(bundle: PathBundle, strikes=None, maturities=None) -> list:
    """Call and put prices with standard errors, plus implied vols.

    The implied vol comes from the out-of-the-money option; its standard error
    is the price standard error divided by vega.  Rows come out maturity-major.
    """
    strikes = bundle.cfg.strikes if strikes is None else tuple(strikes)
    maturities = bundle.cfg.maturities if maturities is None else tuple(maturities)
    paired = bundle.cfg.antithetic
    H = bundle.params.H
    rows = []
    for T in maturities:
        if T not in bundle.X:
            raise KeyError(f"maturity {T} was not simulated")
        S = np.exp(bundle.X[T])
        for k in strikes:
            K = math.exp(k)
            c, cse = _mean_se(np.maximum(S - K, 0.0), paired)
            p, pse = _mean_se(np.maximum(K - S, 0.0), paired)
            is_call = k >= 0
            try:
                iv = implied_vol(c if is_call else p, T, k, is_call)
                ise = (cse if is_call else pse) / float(bs_vega(iv, T, k))
            except BandError:
                iv, ise = math.nan, math.nan
            rows.append(PriceRow(T, k, k / T ** (0.5 - H), c, cse, p, pse, iv, ise, bundle.cfg.scheme, bundle.cfg.seed))
    return rows


def write_price_csv(rows, path, header: dict | None = None):
    """Write price rows with the standard column set and ``# key=value`` headers."""
    with open(path, "w", newline="") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key}={val}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(v)
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.17g}"


__all__ = [
    "MCConfig", "PathBundle", "PriceRow", "simulate", "price_options", "write_price_csv",
    "bs_price", "implied_vol", "rl_covariance", "rl_cross_covariance", "CovarianceError",
]
