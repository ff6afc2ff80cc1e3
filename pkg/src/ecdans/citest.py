"""Independence and conditional-independence tests.

The primary CI test is partial correlation with the Fisher-z significance
transform, suitable for the linear-Gaussian setting. HSIC with Gaussian
kernels and a permutation null is available as an alternative marginal test
and supplies the statistic used by the orientation phase.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .model import (
    CITestResult,
    Dataset,
    DegenerateConditioningError,
    DegenerateKernelError,
    InsufficientSampleError,
    NodeRef,
    lagged_column,
)

#: Clamp bound keeping |r| < 1 ahead of the z-transform.
R_CLAMP_EPS = 1e-10


@dataclass(frozen=True)
class TestConfig:
    """Significance level and test family for all CI tests in a run."""

    alpha: float = 0.05
    test_kind: str = "parcorr"  # "parcorr" | "hsic"
    hsic_permutations: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.test_kind not in ("parcorr", "hsic"):
            raise ValueError(f"unknown test kind {self.test_kind!r}")
        if self.test_kind == "hsic" and self.hsic_permutations < 100:
            raise ValueError("hsic needs at least 100 permutations")


def _partial_from_cov(cov: np.ndarray) -> float:
    """Partial correlation of indices 0, 1 of a covariance given the rest.

    Uses the Schur complement of the conditioning block, which equals the
    correlation of the regression residuals.
    """
    if cov.shape[0] == 2:
        resid = cov
    else:
        zz = cov[2:, 2:]
        xz = cov[:2, 2:]
        try:
            # Positive definiteness doubles as the rank check.
            np.linalg.cholesky(zz)
            resid = cov[:2, :2] - xz @ np.linalg.solve(zz, xz.T)
        except np.linalg.LinAlgError:
            raise DegenerateConditioningError(
                "singular conditioning covariance: collinear or constant"
            ) from None
    den = np.sqrt(resid[0, 0] * resid[1, 1])
    if not np.isfinite(den) or den <= 0.0:
        raise DegenerateConditioningError("zero-variance residual")
    r = resid[0, 1] / den
    return float(np.clip(r, -1.0 + R_CLAMP_EPS, 1.0 - R_CLAMP_EPS))


def partial_correlation(x: np.ndarray, y: np.ndarray,
                        cond: Sequence[np.ndarray] = ()) -> float:
    """Correlation of the residuals of x and y after regression on [1, cond].

    Computed from the Schur complement of the conditioning block in the
    covariance of the centered stack [x, y, cond], which equals the residual
    correlation but costs one small Gram product instead of two
    least-squares solves.

    Parameters
    ----------
    x, y : 1-D arrays of equal length n
    cond : sequence of conditioning vectors, each of length n

    Returns
    -------
    float in [-1 + 1e-10, 1 - 1e-10]

    Raises
    ------
    InsufficientSampleError
        If n <= len(cond) + 2.
    DegenerateConditioningError
        If the covariance of the stacked columns is singular (collinear or
        constant conditioning, or a zero-variance residual); callers treat
        the test as non-informative.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    k = len(cond)
    if y.shape[0] != n or any(z.shape[0] != n for z in cond):
        raise ValueError("all vectors must share the same length")
    if n <= k + 2:
        raise InsufficientSampleError(
            f"n={n} too small for {k} conditioning variables"
        )
    stack = np.column_stack([x, y, *(np.asarray(z, float) for z in cond)])
    centered = stack - stack.mean(axis=0)
    return _partial_from_cov(centered.T @ centered)


def fisher_z(r: float, n: int, k: int, alpha: float,
             cond_set: tuple[NodeRef, ...] = ()) -> CITestResult:
    """Fisher-z significance for a (partial) correlation.

    statistic = sqrt(n - k - 3) * atanh(r); two-sided normal p-value;
    effect size |r|; independent iff p > alpha.
    """
    if n - k - 3 <= 0:
        raise InsufficientSampleError(
            f"n={n} too small for Fisher-z with k={k}"
        )
    if not abs(r) < 1.0:
        raise ValueError(f"|r| must be < 1, got {r}")
    z = np.sqrt(n - k - 3) * np.arctanh(r)
    p = float(2.0 * norm.sf(abs(z)))
    return CITestResult(
        statistic=float(z),
        p_value=p,
        effect_size=abs(float(r)),
        independent=p > alpha,
        cond_set=cond_set,
    )


def _standardize(col: np.ndarray) -> np.ndarray:
    # Constant columns map to zeros and surface as rank deficiency.
    mu = col.mean()
    sd = col.std()
    if sd <= 0.0:
        return np.zeros_like(col)
    return (col - mu) / sd


def _pairwise_sq_dists(v: np.ndarray) -> np.ndarray:
    if v.ndim == 1:
        v = v[:, None]
    sq = np.sum(v * v, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (v @ v.T)
    return np.maximum(d2, 0.0)


def _gaussian_gram(v: np.ndarray) -> np.ndarray:
    """Gram matrix with the median-pairwise-distance bandwidth."""
    d2 = _pairwise_sq_dists(np.asarray(v, dtype=float))
    off = d2[np.triu_indices_from(d2, k=1)]
    positive = off[off > 0.0]
    if positive.size == 0:
        raise DegenerateKernelError("constant input: bandwidth is zero")
    sigma = np.sqrt(np.median(positive))
    return np.exp(-d2 / (2.0 * sigma ** 2))


def hsic_statistic(x: np.ndarray, y: np.ndarray) -> float:
    """Biased HSIC statistic with Gaussian kernels, bandwidths per input."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("inputs must share the same length")
    gram_x = _gaussian_gram(x)
    gram_y = _gaussian_gram(y)
    centering = np.eye(n) - np.ones((n, n)) / n
    kc = centering @ gram_x @ centering
    return float(np.sum(kc * gram_y) / n ** 2)


def hsic_test(x: np.ndarray, y: np.ndarray, cfg: TestConfig) -> CITestResult:
    """HSIC independence test with a permutation p-value.

    The p-value counts permutations of y whose statistic reaches the
    observed one, with the +1 correction; deterministic in cfg.rng_seed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("inputs must share the same length")
    if n < 20:
        raise InsufficientSampleError(f"HSIC needs n >= 20, got {n}")
    gram_x = _gaussian_gram(x)
    gram_y = _gaussian_gram(y)
    centering = np.eye(n) - np.ones((n, n)) / n
    kc = centering @ gram_x @ centering
    stat = float(np.sum(kc * gram_y) / n ** 2)

    rng = np.random.default_rng(cfg.rng_seed)
    hits = 0
    for _ in range(cfg.hsic_permutations):
        perm = rng.permutation(n)
        perm_stat = np.sum(kc[np.ix_(perm, perm)] * gram_y) / n ** 2
        if perm_stat >= stat:
            hits += 1
    p = (1 + hits) / (1 + cfg.hsic_permutations)
    return CITestResult(
        statistic=stat,
        p_value=p,
        effect_size=max(stat, 0.0),
        independent=p > cfg.alpha,
    )


def _derived_seed(base: int, a: NodeRef, b: NodeRef) -> int:
    # Stable per unordered endpoint pair, so parallel scheduling cannot
    # change permutation draws.
    def enc(ref: NodeRef) -> int:
        if ref.var is None:
            return 1 << 20
        return (ref.var << 8) | ref.lag

    lo, hi = sorted((enc(a), enc(b)))
    return int(np.random.SeedSequence([base, lo, hi]).generate_state(1)[0])


def ci_test(dataset: Dataset, a: NodeRef, b: NodeRef,
            cond: Iterable[NodeRef], cfg: TestConfig,
            tau_max: int) -> CITestResult:
    """Run the configured (conditional) independence test between two nodes.

    Columns are aligned to the shared effective sample of length
    ``T - tau_max`` and standardized. Symmetric in (a, b). Conditional tests
    always use partial correlation; the HSIC family applies to marginal
    tests only.
    """
    if a == b:
        raise ValueError("cannot test a node against itself")
    # Canonical endpoint order keeps results bitwise symmetric in (a, b).
    a, b = sorted((a, b), key=NodeRef.sort_key)
    cond = tuple(sorted(cond, key=NodeRef.sort_key))
    if a in cond or b in cond:
        raise ValueError("conditioning set contains an endpoint")
    x = _standardize(lagged_column(dataset, a, tau_max))
    y = _standardize(lagged_column(dataset, b, tau_max))
    if cfg.test_kind == "hsic" and not cond:
        seeded = replace(cfg, rng_seed=_derived_seed(cfg.rng_seed, a, b))
        return hsic_test(x, y, seeded)
    z = [_standardize(lagged_column(dataset, c, tau_max)) for c in cond]
    r = partial_correlation(x, y, z)
    return fisher_z(r, len(x), len(cond), cfg.alpha, cond_set=cond)


class CiTester:
    """Data-backed tester over a fixed dataset and lag window.

    Pre-extracts and standardizes every node column once and computes the
    covariance matrix of all columns a single time; partial correlations
    then come from small slices of that cache, so per-test cost does not
    grow with the sample length. Stateless apart from a thread-safe test
    counter, so tests may run concurrently.
    """

    def __init__(self, dataset: Dataset, cfg: TestConfig, tau_max: int):
        if dataset.T <= tau_max + 3:
            raise InsufficientSampleError(
                f"T={dataset.T} too short for tau_max={tau_max}"
            )
        self.dataset = dataset
        self.cfg = cfg
        self.tau_max = tau_max
        self.m = dataset.m
        self.n = dataset.T - tau_max
        self._columns: dict[NodeRef, np.ndarray] = {}
        for i in range(dataset.m):
            for lag in range(tau_max + 1):
                ref = NodeRef(i, lag)
                self._columns[ref] = _standardize(
                    lagged_column(dataset, ref, tau_max))
        surrogate = NodeRef(None, 0)
        self._columns[surrogate] = _standardize(
            lagged_column(dataset, surrogate, tau_max))
        refs = sorted(self._columns, key=NodeRef.sort_key)
        self._pos = {ref: i for i, ref in enumerate(refs)}
        mat = np.column_stack([self._columns[ref] for ref in refs])
        mat = mat - mat.mean(axis=0)
        self._cov = mat.T @ mat
        self._lock = threading.Lock()
        self.n_tests = 0

    def column(self, ref: NodeRef) -> np.ndarray:
        return self._columns[ref]

    def test(self, a: NodeRef, b: NodeRef,
             cond: Iterable[NodeRef] = ()) -> CITestResult:
        if a == b:
            raise ValueError("cannot test a node against itself")
        a, b = sorted((a, b), key=NodeRef.sort_key)
        cond = tuple(sorted(cond, key=NodeRef.sort_key))
        if a in cond or b in cond:
            raise ValueError("conditioning set contains an endpoint")
        with self._lock:
            self.n_tests += 1
        if self.cfg.test_kind == "hsic" and not cond:
            seeded = replace(self.cfg,
                             rng_seed=_derived_seed(self.cfg.rng_seed, a, b))
            return hsic_test(self._columns[a], self._columns[b], seeded)
        if self.n <= len(cond) + 2:
            raise InsufficientSampleError(
                f"n={self.n} too small for {len(cond)} conditioning variables"
            )
        idx = [self._pos[a], self._pos[b], *(self._pos[c] for c in cond)]
        r = _partial_from_cov(self._cov[np.ix_(idx, idx)])
        return fisher_z(r, self.n, len(cond), self.cfg.alpha, cond_set=cond)
