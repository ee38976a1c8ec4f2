"""Iterative parameter estimation for heterogeneous two-dimensional Gaussians.

Two estimators of the common mean and per-sample variances, both constrained
by a variance floor c0:

- cyclic maximum likelihood on the raw samples: alternate the weighted-mean
  update with the floored residual-variance update until the log-likelihood
  change drops below eps;
- a doubly iterative scheme on the unit directions alone: an inner
  expectation-maximization pass over the mean (magnitudes as hidden data),
  an inner pass over the variances, cycled until the direction-domain
  log-likelihood settles.

The batched engines work on stacks of bursts ((B, K, 2) arrays) with
per-burst early stopping; the public per-burst operations wrap them.  Every
step is an exact coordinate ascent or EM step, so all traces are
non-decreasing up to float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import cond_mean_norm, cond_mean_sq_residual, log1p_mills
from .scenario import Burst, InvariantBurst

_LOG_2PI = float(np.log(2.0 * np.pi))

__all__ = [
    "EstimationConfig",
    "ParamEstimate",
    "angular_loglik",
    "cyclic_em",
    "cyclic_em_batch",
    "cyclic_ml_batch",
    "cyclic_ml_h1",
    "em_mean_batch",
    "em_mean_step",
    "em_sigma_batch",
    "em_sigma_step",
    "gaussian_loglik",
    "ml_sigma_h0",
]


@dataclass(frozen=True)
class EstimationConfig:
    """Iteration caps, stopping tolerances, and the variance floor.

    eps stops the cyclic ML loop, eps1/eps2 the two inner EM loops, eps3 the
    outer cycle; all are absolute changes in log-likelihood.  paper_init
    selects the raw-sample initialization for the direction-domain estimator
    instead of the default scale-free one.
    """

    c0: float = 1.0
    n_co1: int = 15
    n_co2: int = 15
    n_em_m: int = 20
    n_em_sigma: int = 20
    eps: float = 1e-2
    eps1: float = 1e-3
    eps2: float = 1e-2
    eps3: float = 1e-2
    paper_init: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.c0) and self.c0 > 0):
            raise ValueError("c0 must be finite and > 0")
        for name in ("n_co1", "n_co2", "n_em_m", "n_em_sigma"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ValueError(f"{name} must be an integer >= 1")
        for name in ("eps", "eps1", "eps2", "eps3"):
            if not (np.isfinite(getattr(self, name)) and getattr(self, name) >= 0):
                raise ValueError(f"{name} must be finite and >= 0")


@dataclass(frozen=True)
class ParamEstimate:
    """Mean estimate, per-sample variance estimates, and the iteration trace.

    The trace pairs iteration indices with log-likelihood values; index 0 is
    the initialization where the estimator defines one.
    """

    m_hat: np.ndarray
    sigma2_hat: np.ndarray
    trace: tuple

    def __post_init__(self):
        m = np.array(self.m_hat, dtype=float)
        s2 = np.array(self.sigma2_hat, dtype=float)
        if m.shape != (2,) or s2.ndim != 1:
            raise ValueError("m_hat must be (2,) and sigma2_hat a vector")
        m.flags.writeable = False
        s2.flags.writeable = False
        object.__setattr__(self, "m_hat", m)
        object.__setattr__(self, "sigma2_hat", s2)
        object.__setattr__(self, "trace", tuple((int(i), float(v)) for i, v in self.trace))


def gaussian_loglik(x: np.ndarray, m: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """Raw-sample log-likelihood, summed over pulses; batched over leading axes."""
    diff = x - np.asarray(m)[..., None, :]
    q = np.sum(diff * diff, axis=-1)
    return -np.sum(np.log(2.0 * np.pi * sigma2) + q / (2.0 * sigma2), axis=-1)


def angular_loglik(z: np.ndarray, m: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """Direction-domain log-likelihood, summed over pulses; batched over leading axes."""
    m = np.asarray(m)
    p = np.einsum("...kj,...j->...k", z, m)
    msq = np.sum(m * m, axis=-1)[..., None]
    t = p / np.sqrt(sigma2)
    return np.sum(-msq / (2.0 * sigma2) - _LOG_2PI + log1p_mills(t), axis=-1)


def _h0_variances(x: np.ndarray, c0: float) -> np.ndarray:
    return np.maximum(0.5 * np.sum(x * x, axis=-1), c0)


def cyclic_ml_batch(x: np.ndarray, sigma2_init: np.ndarray, c0: float, n_max: int, eps: float):
    """Cyclic ML over stacked bursts.

    Returns (m (B,2), sigma2 (B,K), loglik trace (B,n_max) NaN-padded past
    each burst's stopping point, iteration counts (B,)).
    """
    b = x.shape[0]
    m = np.zeros((b, 2))
    s2 = np.array(sigma2_init, dtype=float)
    trace = np.full((b, n_max), np.nan)
    iters = np.zeros(b, dtype=int)
    ll_prev = np.zeros(b)
    active = np.ones(b, dtype=bool)
    for n in range(1, n_max + 1):
        xa = x[active]
        w = 1.0 / s2[active]
        m_new = np.sum(xa * w[..., None], axis=1) / np.sum(w, axis=1)[:, None]
        resid = xa - m_new[:, None, :]
        s2_new = np.maximum(0.5 * np.sum(resid * resid, axis=-1), c0)
        ll_new = gaussian_loglik(xa, m_new, s2_new)
        m[active] = m_new
        s2[active] = s2_new
        trace[active, n - 1] = ll_new
        iters[active] = n
        if n > 1:
            done = np.abs(ll_new - ll_prev[active]) < eps
        else:
            done = np.zeros(ll_new.shape, dtype=bool)
        ll_prev[active] = ll_new
        idx = np.nonzero(active)[0]
        active[idx[done]] = False
        if not active.any():
            break
    return m, s2, trace, iters


def em_mean_batch(z: np.ndarray, m_init: np.ndarray, sigma2: np.ndarray, n_max: int, eps: float):
    """EM over the mean with variances held fixed, batched.

    Trace has n_max + 1 columns; column 0 is the log-likelihood at m_init.
    """
    b = z.shape[0]
    m = np.array(m_init, dtype=float)
    trace = np.full((b, n_max + 1), np.nan)
    trace[:, 0] = angular_loglik(z, m, sigma2)
    iters = np.zeros(b, dtype=int)
    ll_prev = trace[:, 0].copy()
    active = np.ones(b, dtype=bool)
    sig = np.sqrt(sigma2)
    w = 1.0 / sigma2
    w_sum = np.sum(w, axis=1)
    for n in range(1, n_max + 1):
        za = z[active]
        p = np.einsum("bkj,bj->bk", za, m[active])
        h = cond_mean_norm(p, sigma2[active])
        m_new = np.sum((h * w[active])[..., None] * za, axis=1) / w_sum[active][:, None]
        ll_new = angular_loglik(za, m_new, sigma2[active])
        m[active] = m_new
        trace[active, n] = ll_new
        iters[active] = n
        done = np.abs(ll_new - ll_prev[active]) < eps
        ll_prev[active] = ll_new
        idx = np.nonzero(active)[0]
        active[idx[done]] = False
        if not active.any():
            break
    return m, trace, iters


def em_sigma_batch(z: np.ndarray, m: np.ndarray, sigma2_init: np.ndarray, c0: float, n_max: int, eps: float):
    """EM over the variances with the mean held fixed, batched.

    The floored update is the constrained maximizer of each step's surrogate,
    so the trace stays non-decreasing.  Trace column 0 is the starting value.
    """
    b = z.shape[0]
    s2 = np.array(sigma2_init, dtype=float)
    trace = np.full((b, n_max + 1), np.nan)
    trace[:, 0] = angular_loglik(z, m, s2)
    iters = np.zeros(b, dtype=int)
    ll_prev = trace[:, 0].copy()
    active = np.ones(b, dtype=bool)
    p_all = np.einsum("bkj,bj->bk", z, m)
    msq_all = np.sum(m * m, axis=-1)[:, None]
    for n in range(1, n_max + 1):
        pa = p_all[active]
        r = cond_mean_sq_residual(pa, s2[active], msq_all[active])
        s2_new = np.maximum(0.5 * r, c0)
        ll_new = angular_loglik(z[active], m[active], s2_new)
        s2[active] = s2_new
        trace[active, n] = ll_new
        iters[active] = n
        done = np.abs(ll_new - ll_prev[active]) < eps
        ll_prev[active] = ll_new
        idx = np.nonzero(active)[0]
        active[idx[done]] = False
        if not active.any():
            break
    return s2, trace, iters


def cyclic_em_batch(
    z: np.ndarray,
    m_init: np.ndarray,
    sigma2_init: np.ndarray,
    c0: float,
    n_co2: int,
    n_em_m: int,
    n_em_sigma: int,
    eps1: float,
    eps2: float,
    eps3: float,
):
    """Outer cycle alternating the two inner EM passes, batched.

    Each outer iteration warm-starts both passes from the current estimates.
    Returns (m, sigma2, outer trace (B, n_co2 + 1) with the initialization in
    column 0, outer iteration counts).
    """
    b = z.shape[0]
    m = np.array(m_init, dtype=float)
    s2 = np.array(sigma2_init, dtype=float)
    trace = np.full((b, n_co2 + 1), np.nan)
    trace[:, 0] = angular_loglik(z, m, s2)
    iters = np.zeros(b, dtype=int)
    ll_prev = trace[:, 0].copy()
    active = np.ones(b, dtype=bool)
    for i in range(1, n_co2 + 1):
        za = z[active]
        m_new, _, _ = em_mean_batch(za, m[active], s2[active], n_em_m, eps1)
        s2_new, _, _ = em_sigma_batch(za, m_new, s2[active], c0, n_em_sigma, eps2)
        ll_new = angular_loglik(za, m_new, s2_new)
        m[active] = m_new
        s2[active] = s2_new
        trace[active, i] = ll_new
        iters[active] = i
        done = np.abs(ll_new - ll_prev[active]) < eps3
        ll_prev[active] = ll_new
        idx = np.nonzero(active)[0]
        active[idx[done]] = False
        if not active.any():
            break
    return m, s2, trace, iters


def _check_burst(burst: Burst) -> np.ndarray:
    if not isinstance(burst, Burst):
        raise ValueError("expected a Burst")
    if burst.k < 2:
        raise ValueError("estimation needs at least 2 samples")
    return burst.samples


def _check_inv(inv: InvariantBurst) -> np.ndarray:
    if not isinstance(inv, InvariantBurst):
        raise ValueError("expected an InvariantBurst")
    if inv.k < 2:
        raise ValueError("estimation needs at least 2 samples")
    return inv.directions


def _trace_list(row: np.ndarray, first_index: int):
    return [(first_index + j, float(v)) for j, v in enumerate(row) if not np.isnan(v)]


def ml_sigma_h0(burst: Burst, c0: float) -> np.ndarray:
    """Floored per-sample variance ML estimates under the no-target hypothesis."""
    x = _check_burst(burst)
    if not (np.isfinite(c0) and c0 > 0):
        raise ValueError("c0 must be finite and > 0")
    return _h0_variances(x[None], c0)[0]


def cyclic_ml_h1(burst: Burst, cfg: EstimationConfig, sigma2_init: np.ndarray) -> ParamEstimate:
    """Cyclic ML estimate of (mean, variances) under the target hypothesis."""
    x = _check_burst(burst)
    s2 = np.asarray(sigma2_init, dtype=float)
    if s2.shape != (burst.k,) or not np.all(np.isfinite(s2)):
        raise ValueError("sigma2_init must be a finite (K,) vector")
    if np.any(s2 < cfg.c0):
        raise ValueError("sigma2_init must respect the c0 floor")
    m, s2_out, trace, iters = cyclic_ml_batch(x[None], s2[None], cfg.c0, cfg.n_co1, cfg.eps)
    return ParamEstimate(m[0], s2_out[0], _trace_list(trace[0, : iters[0]], 1))


def em_mean_step(inv: InvariantBurst, m: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """One EM update of the mean from directions, variances fixed."""
    z = _check_inv(inv)
    m = np.asarray(m, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    if m.shape != (2,) or not np.all(np.isfinite(m)):
        raise ValueError("m must be a finite 2-vector")
    if s2.shape != (inv.k,) or np.any(s2 <= 0):
        raise ValueError("sigma2 must be a positive (K,) vector")
    p = z @ m
    h = cond_mean_norm(p, s2)
    w = 1.0 / s2
    return np.sum((h * w)[:, None] * z, axis=0) / np.sum(w)


def em_sigma_step(inv: InvariantBurst, m: np.ndarray, sigma2: np.ndarray, c0: float) -> np.ndarray:
    """One floored EM update of the variances from directions, mean fixed."""
    z = _check_inv(inv)
    m = np.asarray(m, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    if m.shape != (2,) or not np.all(np.isfinite(m)):
        raise ValueError("m must be a finite 2-vector")
    if s2.shape != (inv.k,) or np.any(s2 <= 0):
        raise ValueError("sigma2 must be a positive (K,) vector")
    if not (np.isfinite(c0) and c0 > 0):
        raise ValueError("c0 must be finite and > 0")
    p = z @ m
    r = cond_mean_sq_residual(p, s2, float(m @ m))
    return np.maximum(0.5 * r, c0)


def cyclic_em(inv: InvariantBurst, cfg: EstimationConfig, m_init: np.ndarray, sigma2_init: np.ndarray) -> ParamEstimate:
    """Doubly iterative direction-domain estimate of (mean, variances)."""
    z = _check_inv(inv)
    m0 = np.asarray(m_init, dtype=float)
    s20 = np.asarray(sigma2_init, dtype=float)
    if m0.shape != (2,) or not np.all(np.isfinite(m0)):
        raise ValueError("m_init must be a finite 2-vector")
    if s20.shape != (inv.k,) or not np.all(np.isfinite(s20)):
        raise ValueError("sigma2_init must be a finite (K,) vector")
    if np.any(s20 < cfg.c0):
        raise ValueError("sigma2_init must respect the c0 floor")
    m, s2, trace, iters = cyclic_em_batch(
        z[None], m0[None], s20[None], cfg.c0,
        cfg.n_co2, cfg.n_em_m, cfg.n_em_sigma, cfg.eps1, cfg.eps2, cfg.eps3,
    )
    return ParamEstimate(m[0], s2[0], _trace_list(trace[0, : iters[0] + 1], 0))
