"""Small-divisor estimates in executable form.

Contains the one-dimensional sublevel-measure bound, the Wronskian
determinant identity for directional derivatives of the potential, the
determinant lower bound for integer vector families, exhaustive
Diophantine-condition checks on a truncated lattice, resonance clustering
counts, and Monte-Carlo estimation of excluded phase-space measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import mpmath
import numpy as np

from .lattice import sup_norm
from .potential import ModelParams, TrigPoly, base_frequencies, mu

IntVec = tuple[int, ...]


@dataclass(frozen=True)
class DiophParams:
    """Explicit stand-ins for the abstract constants of the small-divisor
    estimates.  All exponents are configurable; defaults are desk-scale."""

    eta: float = 0.1
    C1_exp: float = 8.0
    c1_exp: float = 0.001
    threshold_exp: Optional[float] = None  # default 1/(8b), filled per use
    L: int = 8

    def __post_init__(self):
        if not (0.0 < self.eta < 1.0):
            raise ValueError("eta must lie in (0,1)")
        if self.C1_exp <= 0 or self.c1_exp <= 0:
            raise ValueError("exponents must be positive")
        if self.L < 1:
            raise ValueError("L must be >= 1")

    def threshold(self, params: ModelParams) -> float:
        """Separation threshold (epsilon+delta)^e with e = 1/(8b) by default."""
        e = self.threshold_exp
        if e is None:
            e = 1.0 / (8.0 * params.b)
        return (params.epsilon + params.delta) ** e


def km_bound(k: int, A: float, eps: float) -> float:
    """Sublevel-measure bound zeta_k (eps/A)^(1/k) for a function whose
    k-th derivative is at least A in absolute value on the unit interval,
    with zeta_k = k(k+1)((k+1)!)^(1/k)."""
    if k < 1:
        raise ValueError("order must be >= 1")
    if A <= 0 or eps <= 0:
        raise ValueError("A and eps must be positive")
    zeta = k * (k + 1) * math.factorial(k + 1) ** (1.0 / k)
    return zeta * (eps / A) ** (1.0 / k)


def sublevel_measure_1d(samples: np.ndarray, interval: tuple[float, float],
                        eps: float) -> float:
    """Measure of {|f| <= eps} estimated from equispaced samples of f.

    Used as the brute-force oracle against km_bound.  Counts subintervals
    by the indicator at their midpoints-free trapezoid: each sample
    carries weight length/(m-1), endpoints half.
    """
    f = np.asarray(samples, dtype=float)
    if f.ndim != 1 or f.size < 1000:
        raise ValueError("need a 1-d sample array with >= 1000 points")
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite samples")
    a, b = interval
    h = (b - a) / (f.size - 1)
    ind = (np.abs(f) <= eps).astype(float)
    return float(np.trapezoid(ind, dx=h))


# -- Wronskian determinant identity ------------------------------------


@dataclass(frozen=True)
class WronskianInput:
    """Data for the derivative-determinant identity: potential, phases,
    a direction (beta, q) in phase space, and D distinct lattice sites."""

    V: TrigPoly
    alpha: tuple[float, ...]
    theta: tuple[float, ...]
    beta: tuple[float, ...]
    q: tuple[float, ...]
    sites: tuple[IntVec, ...]

    def __post_init__(self):
        d = self.V.d
        for name in ("alpha", "theta", "beta", "q"):
            if len(getattr(self, name)) != d:
                raise ValueError(f"{name} must have length d")
        if not self.sites:
            raise ValueError("need at least one site")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("sites must be distinct")
        if any(len(n) != d for n in self.sites):
            raise ValueError("site dimension mismatch")


def _wronskian_columns(inp: WronskianInput):
    """Per column (s, l): the linear form x = (l (.) n_s) . beta + q . l
    and the cosine value cos(2 pi l . (theta + n_s (.) alpha))."""
    xs, coss = [], []
    al = np.asarray(inp.alpha)
    th = np.asarray(inp.theta)
    be = np.asarray(inp.beta)
    qv = np.asarray(inp.q)
    for n in inp.sites:
        nv = np.asarray(n, dtype=float)
        for l in inp.V.gamma:
            lv = np.asarray(l, dtype=float)
            xs.append(float(np.dot(lv * nv, be) + np.dot(qv, lv)))
            coss.append(float(np.cos(2.0 * np.pi * np.dot(lv, th + nv * al))))
    return np.asarray(xs), np.asarray(coss)


def wronskian_det(inp: WronskianInput, size_cap: int = 12,
                  cond_limit: float = 1e12) -> tuple[float, float]:
    """Absolute determinant of the even-derivative matrix, computed two
    ways: directly, and through the cosine-times-Vandermonde product.

    The (j, c) entry of the matrix is the 2j-th derivative of the c-th
    cosine term along the direction, which is (-(2 pi x_c)^2)^j cos_c.
    The product form pulls out the cosines and one squared linear form per
    column, leaving a Vandermonde determinant in the squared forms.
    """
    xs, coss = _wronskian_columns(inp)
    R = xs.size
    if R > size_cap:
        raise ValueError(f"matrix size {R} exceeds cap {size_cap}")
    lam2 = (2.0 * np.pi * xs) ** 2
    W = np.empty((R, R))
    for j in range(1, R + 1):
        W[j - 1] = (-lam2) ** j * coss
    direct = _safe_abs_det(W, cond_limit)

    factored = float(np.prod(np.abs(coss))) * float(np.prod(lam2))
    for c in range(R):
        for cp in range(c + 1, R):
            factored *= (2.0 * np.pi) ** 2 * abs(xs[c] ** 2 - xs[cp] ** 2)
    return direct, factored


def _safe_abs_det(W: np.ndarray, cond_limit: float) -> float:
    """|det W| via LU, re-evaluated in extended precision when the matrix
    is badly conditioned."""
    R = W.shape[0]
    if R == 0:
        return 1.0
    cond = np.linalg.cond(W) if R > 1 else 1.0
    if np.isfinite(cond) and cond <= cond_limit:
        return float(abs(np.linalg.det(W)))
    with mpmath.workdps(50):
        M = mpmath.matrix([[mpmath.mpf(float(W[i, j])) for j in range(R)]
                           for i in range(R)])
        return float(abs(mpmath.det(M)))


# -- determinant lower bound for integer families ----------------------


def bgg_check(vectors: Sequence[Sequence[float]],
              w: Sequence[float]) -> tuple[float, float, bool]:
    """For r independent vectors with 1-norm at most M, the largest inner
    product with w is bounded below by r^{-3/2} M^{1-r} |w|_2 |det|.

    Returns (lhs, rhs, holds).
    """
    V = np.asarray(vectors, dtype=float)
    wv = np.asarray(w, dtype=float)
    r = V.shape[0]
    if V.shape != (r, r):
        raise ValueError("need r vectors of length r")
    det = np.linalg.det(V)
    if abs(det) < 1e-12:
        raise ValueError("vectors are (numerically) linearly dependent")
    M = max(1.0, float(np.abs(V).sum(axis=1).max()))
    lhs = float(np.abs(V @ wv).max())
    rhs = r ** -1.5 * M ** (1.0 - r) * float(np.linalg.norm(wv)) * abs(det)
    holds = lhs >= rhs - 1e-12 * abs(rhs)
    return lhs, rhs, holds


# -- Diophantine condition report --------------------------------------


@dataclass(frozen=True)
class DCReport:
    passed: bool
    thresholds: dict
    violations: tuple[tuple, ...]  # rows (condition, witness..., value, threshold)
    indeterminate: tuple[tuple, ...] = ()

    def by_condition(self, cond: str) -> list[tuple]:
        return [v for v in self.violations if v[0] == cond]

    def to_rows(self) -> list[dict]:
        return [
            {"condition": v[0], "witness": repr(v[1]), "value": v[2],
             "threshold": v[3]}
            for v in self.violations
        ]


def _k_vectors(b: int, radius: int, include_zero: bool) -> list[IntVec]:
    import itertools
    out = [k for k in itertools.product(range(-radius, radius + 1), repeat=b)]
    if not include_zero:
        out = [k for k in out if any(c != 0 for c in k)]
    return out


def _n_vectors(d: int, radius: int) -> list[IntVec]:
    import itertools
    return list(itertools.product(range(-radius, radius + 1), repeat=d))


def check_dc_conditions(params: ModelParams, dioph: DiophParams) -> DCReport:
    """Exhaustive Diophantine checks on the truncated lattice.

    (i)   pairwise separation of the diagonal values mu_n, |n| <= L;
    (ii)  |k . omega0| bounded below for 0 < |k| <= 2L;
    (iii) |xi k . omega0 + mu_n| >= scale^{-C1} off the excited set;
    (iv)  |k . omega0 + mu_n - mu_n'| bounded below unless the combination
          vanishes identically (k = 0 and n = n').
    """
    L = dioph.L
    thr = dioph.threshold(params)
    omega0 = base_frequencies(params)
    b, d = params.b, params.d
    eps_delta = params.epsilon + params.delta
    L_min = max(1, math.ceil(math.log(1.0 / eps_delta))) if eps_delta > 0 else 1
    violations = []
    indeterminate = []

    ns = _n_vectors(d, L)
    mus = {n: params.mu_n(n) for n in ns}

    # (i) pairwise separation of potential values.
    for i, n in enumerate(ns):
        for np_ in ns[i + 1:]:
            gap = abs(mus[n] - mus[np_])
            if gap < thr:
                violations.append(("i", (n, np_), gap, thr))

    # (ii) small divisors of k . omega0.
    for k in _k_vectors(b, 2 * L, include_zero=False):
        val = abs(float(np.dot(k, omega0)))
        if val < thr:
            violations.append(("ii", (k,), val, thr))

    # (iii) joint small divisors off the excited set, with a per-site scale.
    excited = set()
    for l, n in enumerate(params.sites):
        e = tuple(1 if j == l else 0 for j in range(b))
        excited.add((e, tuple(n)))
        excited.add((tuple(-c for c in e), tuple(n)))
    for k in _k_vectors(b, L, include_zero=True):
        for n in ns:
            if (k, n) in excited:
                continue
            scale = max(L_min, max(sup_norm(k), sup_norm(n), 1))
            floor = scale ** (-dioph.C1_exp)
            kw = float(np.dot(k, omega0))
            val = min(abs(kw + mus[n]), abs(-kw + mus[n]))
            if val < floor:
                violations.append(("iii", (k, n), val, floor))

    # (iv) second differences, skipping identically-zero combinations.
    for k in _k_vectors(b, 2 * L, include_zero=True):
        kw = float(np.dot(k, omega0))
        k_zero = all(c == 0 for c in k)
        for n in ns:
            for np_ in ns:
                if k_zero and n == np_:
                    continue  # identically zero, excluded by definition
                val = abs(kw + mus[n] - mus[np_])
                if val < 1e-13:
                    indeterminate.append(("iv", (k, n, np_), val, thr))
                elif val < thr:
                    violations.append(("iv", (k, n, np_), val, thr))

    return DCReport(
        passed=not violations,
        thresholds={"pair": thr, "scale_floor_exp": dioph.C1_exp,
                    "L": L, "L_min": L_min},
        violations=tuple(violations),
        indeterminate=tuple(indeterminate),
    )


# -- resonance clustering ----------------------------------------------


import functools


@functools.lru_cache(maxsize=64)
def _resonance_table(params: ModelParams, L: int):
    """Cached (k list, k . omega0 array, n list, mu array) on the cube."""
    omega0 = base_frequencies(params)
    ks = _k_vectors(params.b, L, include_zero=True)
    ns = _n_vectors(params.d, L)
    kw = np.array([float(np.dot(k, omega0)) for k in ks])
    mus = np.array([params.mu_n(n) for n in ns])
    return ks, kw, ns, mus


def clustering_count(params: ModelParams, sigma: float, L: int,
                     threshold: float) -> tuple[int, list[tuple]]:
    """Largest per-sign count of near-resonant lattice points.

    For each sign xi, counts (k, n) in the truncated lattice with
    |xi (sigma + k . omega0) + mu_n| below threshold, and returns the
    maximum of the two counts together with all witnesses.
    """
    ks, kw, ns, mus = _resonance_table(params, L)
    best = 0
    witnesses = []
    for xi in (+1, -1):
        vals = np.abs(xi * (sigma + kw)[:, None] + mus[None, :])
        hits = np.argwhere(vals < threshold)
        best = max(best, hits.shape[0])
        for ki, ni in hits:
            witnesses.append((ks[ki], ns[ni], xi, float(vals[ki, ni])))
    return best, witnesses


# -- Monte-Carlo excluded-measure estimation ---------------------------


def wilson_interval(successes: int, trials: int,
                    z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials
                         + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def _predicate_potential_sublevel(V: TrigPoly, eta: float):
    def fails(alpha: np.ndarray, theta: np.ndarray) -> bool:
        return abs(V(theta)) <= eta
    return fails


def _predicate_dc_ii(template: ModelParams, L: int, threshold: float):
    ks = _k_vectors(template.b, 2 * L, include_zero=False)

    def fails(alpha: np.ndarray, theta: np.ndarray) -> bool:
        p = ModelParams(
            V=template.V, alpha=tuple(alpha), theta=tuple(theta),
            epsilon=template.epsilon, delta=template.delta, p=template.p,
            sites=template.sites, a=template.a)
        omega0 = base_frequencies(p)
        for k in ks:
            if abs(float(np.dot(k, omega0))) < threshold:
                return True
        return False
    return fails


def make_predicate(condition: str, template: ModelParams,
                   **kwargs) -> Callable[[np.ndarray, np.ndarray], bool]:
    """Failure predicates for measure estimation, keyed by name."""
    if condition == "always_true":
        return lambda alpha, theta: False
    if condition == "potential_sublevel":
        return _predicate_potential_sublevel(template.V, kwargs["eta"])
    if condition == "dc_ii":
        return _predicate_dc_ii(template, kwargs["L"], kwargs["threshold"])
    raise ValueError(f"unknown predicate id {condition!r}")


def estimate_excluded_measure(condition: str, template: ModelParams,
                              n_samples: int, seed: int,
                              **kwargs) -> tuple[float, tuple[float, float]]:
    """Fraction of uniformly sampled (alpha, theta) failing the named
    condition, with a 95% Wilson interval.

    Sampling uses a counter-based generator keyed by the seed, so results
    are reproducible and independent of evaluation order.
    """
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    d = template.d
    fails = make_predicate(condition, template, **kwargs)
    rng = np.random.Generator(np.random.Philox(key=seed))
    draws = rng.random((n_samples, 2 * d))
    n_fail = 0
    for row in draws:
        if fails(row[:d], row[d:]):
            n_fail += 1
    return n_fail / n_samples, wilson_interval(n_fail, n_samples)
