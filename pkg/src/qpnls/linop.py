"""Assembly and inversion of the linearized lattice operators.

An operator lives on the +/- layered sites of a region: diagonal part
built from sigma, k . omega and the potential values mu_n, a hopping
Laplacian acting in n on each layer, and an optional short-range coupling
term.  Green's functions are computed by direct factorization and
classified by inverse norm and off-diagonal decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import scipy.linalg

from .lattice import Indexing, Region, Site, index_region, sup_norm
from .potential import ModelParams

IntVec = tuple[int, ...]


@dataclass(frozen=True)
class ShortRangeOperator:
    """Short-range coupling term: Toplitz in k, diagonal in n.

    kernel maps (delta_k, n, xi, xi') to a complex entry; decay_const and
    decay_rate bound the entries by C2 (1+|dk|)^C2 exp(-g|dk| - g|n|).
    """

    kernel: dict
    decay_const: float = 1.0
    decay_rate: float = 1.0

    def __post_init__(self):
        if not (0.5 < self.decay_rate < 10.0):
            raise ValueError("decay rate must lie in (1/2, 10)")
        if self.decay_const < 0:
            raise ValueError("decay constant must be >= 0")

    def entry(self, dk: IntVec, n: IntVec, xi: int, xip: int) -> complex:
        return self.kernel.get((dk, n, xi, xip), 0.0 + 0.0j)

    def check_contract(self, atol: float = 1e-12) -> list[str]:
        """Self-adjointness and the decay bound, on all stored entries."""
        problems = []
        for (dk, n, xi, xip), val in self.kernel.items():
            mirror = self.entry(tuple(-c for c in dk), n, xip, xi)
            if abs(val - np.conj(mirror)) > atol:
                problems.append(f"not self-adjoint at {(dk, n, xi, xip)}")
            log_bound = (math.log(max(self.decay_const, 1e-300))
                         + self.decay_const * math.log1p(sup_norm(dk))
                         - self.decay_rate * (sup_norm(dk) + sup_norm(n)))
            bound = math.exp(log_bound) if log_bound < 700 else math.inf
            if abs(val) > bound + atol:
                problems.append(f"decay bound violated at {(dk, n, xi, xip)}")
        return problems

    @staticmethod
    def zero() -> "ShortRangeOperator":
        return ShortRangeOperator(kernel={})


@dataclass(frozen=True)
class LDEParams:
    """Classification thresholds for restricted Green's functions."""

    rho: float = 1e-2
    gamma_target: Optional[float] = None  # default gamma/2 of the instance
    norm_exp: float = 0.75  # norm budget exp(M^norm_exp)
    dist_exp: float = 8.0 / 9.0  # decay measured beyond M^dist_exp

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise ValueError("rho must lie in (0,1)")


@dataclass(frozen=True)
class AssembledOperator:
    region: Region
    indexing: Indexing
    matrix: np.ndarray
    sigma: float
    omega: tuple[float, ...]
    epsilon: float
    delta: float

    @property
    def m(self) -> int:
        return self.indexing.m

    def hermiticity_defect(self) -> float:
        H = self.matrix
        denom = max(np.linalg.norm(H), 1e-300)
        return float(np.linalg.norm(H - H.conj().T) / denom)


def diagonal_value(params: ModelParams, omega: Sequence[float],
                   sigma: float, site: Site) -> float:
    """Diagonal entry: -(sigma + k . omega) + mu_n on the + layer,
    +(sigma + k . omega) + mu_n on the - layer."""
    k, n, xi = site
    kw = float(np.dot(k, omega))
    if xi > 0:
        return -sigma - kw + params.mu_n(n)
    return sigma + kw + params.mu_n(n)


def assemble_D(params: ModelParams, omega: Sequence[float], region: Region,
               sigma: float, exclude: Iterable[Site] = ()) -> AssembledOperator:
    """Diagonal part of the operator on the region's layered sites."""
    idx = index_region(region, params.b, exclude)
    diag = np.array([diagonal_value(params, omega, sigma, s)
                     for s in idx.sites], dtype=float)
    return AssembledOperator(region, idx, np.diag(diag).astype(complex),
                             sigma, tuple(omega), params.epsilon, params.delta)


def assemble_H(params: ModelParams, omega: Sequence[float], region: Region,
               sigma: float, S: Optional[ShortRangeOperator] = None,
               exclude: Iterable[Site] = ()) -> AssembledOperator:
    """Full operator: diagonal + epsilon * (hopping in n, per layer)
    + delta * S, restricted to the region minus exclusions."""
    idx = index_region(region, params.b, exclude)
    m = idx.m
    H = np.zeros((m, m), dtype=complex)
    for i, s in enumerate(idx.sites):
        H[i, i] = diagonal_value(params, omega, sigma, s)
    eps = params.epsilon
    if eps != 0.0:
        for i, (k, n, xi) in enumerate(idx.sites):
            for j_coord in range(len(n)):
                for step in (-1, 1):
                    n2 = list(n)
                    n2[j_coord] += step
                    neighbor = (k, tuple(n2), xi)
                    j = idx.index.get(neighbor)
                    if j is not None:
                        H[i, j] += eps
    if S is not None and params.delta != 0.0 and S.kernel:
        for i, (k, n, xi) in enumerate(idx.sites):
            for j, (kp, npr, xip) in enumerate(idx.sites):
                if npr != n:
                    continue
                dk = tuple(c - cp for c, cp in zip(k, kp))
                val = S.entry(dk, n, xi, xip)
                if val != 0.0:
                    H[i, j] += params.delta * val
    return AssembledOperator(region, idx, H, sigma, tuple(omega),
                             params.epsilon, params.delta)


# -- Green's functions -------------------------------------------------


class SingularOperatorError(RuntimeError):
    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


@dataclass(frozen=True)
class GreenReport:
    norm: float
    decay_rate_fit: float
    decay_fit_residual: float
    good: bool
    M: int
    norm_budget: float
    gamma_target: float
    far_pair_count: int


def operator_norm(G: np.ndarray, tol: float = 1e-10,
                  max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on G* G."""
    m = G.shape[0]
    rng = np.random.default_rng(7)
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    v /= np.linalg.norm(v)
    Gh = G.conj().T
    prev = 0.0
    for _ in range(max_iter):
        w = Gh @ (G @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
        if abs(lam - prev) <= tol * max(lam, 1.0):
            break
        prev = lam
    return math.sqrt(lam)


def _pair_distances(idx: Indexing) -> np.ndarray:
    pos = idx.positions()
    return np.abs(pos[:, None, :] - pos[None, :, :]).max(axis=2)


def green(op: AssembledOperator, lde: LDEParams = LDEParams(),
          gamma: float = 1.0) -> tuple[np.ndarray, GreenReport]:
    """Inverse of the assembled operator with a decay/norm report.

    The region diameter plays the role of the scale M: the report is good
    when the inverse norm stays below exp(M^{3/4}) and every pair beyond
    distance M^{8/9} decays at the target rate.
    """
    H = op.matrix
    m = H.shape[0]
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e14:
        svals = np.linalg.svd(H, compute_uv=False)
        raise SingularOperatorError(
            f"operator numerically singular (cond {cond:.3e})",
            float(svals[-1]))
    lu, piv = scipy.linalg.lu_factor(H)
    G = scipy.linalg.lu_solve((lu, piv), np.eye(m, dtype=complex))
    residual = np.linalg.norm(H @ G - np.eye(m))
    if residual > 1e-10 * max(1.0, np.linalg.norm(G)):
        raise SingularOperatorError(
            f"inverse residual too large ({residual:.3e})", 0.0)

    M = max(op.region.diameter(), 1)
    dist = _pair_distances(op.indexing)
    cutoff = M ** lde.dist_exp
    mask = dist >= cutoff
    np.fill_diagonal(mask, False)
    gamma_target = lde.gamma_target if lde.gamma_target is not None else gamma / 2.0
    norm = operator_norm(G)
    norm_budget = math.exp(M ** lde.norm_exp)

    if mask.any():
        d_far = dist[mask].astype(float)
        g_far = np.abs(G[mask])
        logs = np.log(np.maximum(g_far, 1e-300))
        A = np.vstack([d_far, np.ones_like(d_far)]).T
        sol, res, *_ = np.linalg.lstsq(A, logs, rcond=None)
        rate_fit = float(-sol[0])
        fit_residual = float(np.sqrt(res[0] / mask.sum())) if res.size else 0.0
        decay_ok = bool(np.all(g_far <= np.exp(-gamma_target * d_far)))
        far_count = int(mask.sum())
    else:
        rate_fit = math.inf
        fit_residual = 0.0
        decay_ok = True
        far_count = 0

    report = GreenReport(
        norm=norm, decay_rate_fit=rate_fit, decay_fit_residual=fit_residual,
        good=bool(norm <= norm_budget and decay_ok), M=M,
        norm_budget=norm_budget, gamma_target=gamma_target,
        far_pair_count=far_count)
    return G, report


def schur_green(op: AssembledOperator,
                resonant_sites: Iterable[Site]) -> np.ndarray:
    """Inverse reconstructed through the Schur complement of the resonant
    block.  Equals the direct inverse wherever both are defined."""
    idx = op.indexing
    B = sorted({idx[s] for s in resonant_sites})
    C = [i for i in range(idx.m) if i not in set(B)]
    H = op.matrix
    if not B or not C:
        G, _ = green(op)
        return G
    HBB = H[np.ix_(B, B)]
    HBC = H[np.ix_(B, C)]
    HCB = H[np.ix_(C, B)]
    HCC = H[np.ix_(C, C)]
    cond = np.linalg.cond(HCC)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularOperatorError(
            "complement block numerically singular", 0.0)
    GCC = np.linalg.inv(HCC)
    Schur = HBB - HBC @ GCC @ HCB
    cond_s = np.linalg.cond(Schur)
    if not np.isfinite(cond_s) or cond_s > 1e14:
        raise SingularOperatorError(
            "resonant Schur block numerically singular", 0.0)
    SB = np.linalg.inv(Schur)
    G = np.empty_like(H)
    G[np.ix_(B, B)] = SB
    G[np.ix_(B, C)] = -SB @ HBC @ GCC
    G[np.ix_(C, B)] = -GCC @ HCB @ SB
    G[np.ix_(C, C)] = GCC + GCC @ HCB @ SB @ HBC @ GCC
    return G


# -- sigma sweeps ------------------------------------------------------


@dataclass(frozen=True)
class SweepStats:
    sigmas: np.ndarray
    good: np.ndarray  # bool per sigma
    bad_fraction: float
    bad_intervals: tuple[tuple[float, float], ...]
    worst_region: tuple  # per sigma: index of the failing region or -1


def lde_region_family(params: ModelParams, M: int,
                      n_range: Optional[int] = None) -> list[tuple[Region, str]]:
    """Regions used for classification sweeps: elementary regions of size
    M translated to (0, n) for |n| up to 10 M."""
    from .lattice import enumerate_elementary_regions
    if n_range is None:
        n_range = 10 * M
    b, d = params.b, params.d
    shapes = enumerate_elementary_regions(b + d, M)
    out = []
    import itertools
    for n0 in itertools.product(range(-n_range, n_range + 1), repeat=d):
        shift = (0,) * b + n0
        for si, shape in enumerate(shapes):
            out.append((shape.translate(shift), f"n={n0} shape={si}"))
    return out


def sigma_sweep(params: ModelParams, omega: Sequence[float],
                regions: Sequence[tuple[Region, str]],
                sigma_grid: Sequence[float],
                S: Optional[ShortRangeOperator] = None,
                lde: LDEParams = LDEParams(),
                exclude: Iterable[Site] = ()) -> SweepStats:
    """Classify every sigma as good or bad over a family of regions.

    A sigma is bad when any region in the family fails its Green's
    function classification (or is singular).  Returns the bad fraction,
    maximal bad intervals of the grid, and the first failing region per
    sigma.
    """
    sigmas = np.asarray(sigma_grid, dtype=float)
    good = np.ones(sigmas.size, dtype=bool)
    worst = [-1] * sigmas.size
    for si, sigma in enumerate(sigmas):
        for ri, (region, _) in enumerate(regions):
            try:
                op = assemble_H(params, omega, region, float(sigma), S,
                                exclude=exclude)
                _, rep = green(op, lde)
                ok = rep.good
            except SingularOperatorError:
                ok = False
            if not ok:
                good[si] = False
                worst[si] = ri
                break
    bad_fraction = float((~good).mean()) if sigmas.size else 0.0
    intervals = []
    start = None
    for si in range(sigmas.size):
        if not good[si] and start is None:
            start = sigmas[si]
        if good[si] and start is not None:
            intervals.append((float(start), float(sigmas[si - 1])))
            start = None
    if start is not None:
        intervals.append((float(start), float(sigmas[-1])))
    return SweepStats(sigmas, good, bad_fraction, tuple(intervals),
                      tuple(worst))


def min_diagonal_gap(params: ModelParams, omega: Sequence[float],
                     region: Region, sigma: float,
                     exclude: Iterable[Site] = ()) -> float:
    """Smallest |xi (sigma + k . omega) + mu_n| over the region's sites."""
    idx = index_region(region, params.b, exclude)
    return min(abs(diagonal_value(params, omega, sigma, s))
               for s in idx.sites)


# -- perturbation stability --------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    hypothesis_value: float
    hypothesis_met: bool
    norm_ok: Optional[bool]
    entry_ok: Optional[bool]
    norm_observed: Optional[float]
    max_entry_excess: Optional[float]


def _lattice_decay_sum(r: int, c: float, radius: int = 60) -> float:
    """Sum of exp(-c |x|) over Z^r in the sup norm, truncated."""
    total = 1.0
    for m in range(1, radius + 1):
        shell = (2 * m + 1) ** r - (2 * m - 1) ** r
        total += shell * math.exp(-c * m)
    return total


def perturbation_stability(A: np.ndarray, B: np.ndarray,
                           positions: np.ndarray, eps1: float, c: float,
                           C2: float = 1.0) -> StabilityReport:
    """Neumann-series stability of the inverse under a decaying
    perturbation.

    eps1 is the certified inverse bound of A (||A^{-1}|| <= 1/eps1); the
    perturbation size eps2 is measured from B against the decay profile
    exp(-c |x - x'|).  When the smallness product is at most 1/2, the
    perturbed inverse must satisfy ||(A+B)^{-1}|| <= 2/eps1 and the
    entrywise difference bound eps1^{-1} exp(-c |x - x'|).
    """
    m = A.shape[0]
    Ainv = np.linalg.inv(A)
    if operator_norm(Ainv) > 1.0 / eps1 * (1 + 1e-10):
        raise ValueError("certified inverse bound on A does not hold")
    dist = np.abs(positions[:, None, :] - positions[None, :, :]).max(axis=2)
    diam = float(dist.max())
    eps2 = float(np.max(np.abs(B) * np.exp(c * dist)))
    r = positions.shape[1]
    hyp = (m ** 2 * math.exp(2 * c * diam) * (1 + diam) ** C2
           * eps2 / eps1 * _lattice_decay_sum(r, c))
    if hyp > 0.5:
        return StabilityReport(hyp, False, None, None, None, None)
    G2 = np.linalg.inv(A + B)
    norm2 = operator_norm(G2)
    diff = np.abs(G2 - Ainv)
    bound = np.exp(-c * dist) / eps1
    excess = float(np.max(diff - bound))
    return StabilityReport(hyp, True, bool(norm2 <= 2.0 / eps1 + 1e-12),
                           bool(excess <= 1e-12), float(norm2), excess)


# -- binary matrix dumps -----------------------------------------------


def dump_matrix(path, matrix: np.ndarray) -> None:
    """Dense binary dump: row-major little-endian complex128 plus a JSON
    sidecar describing shape and layout."""
    import json
    from pathlib import Path
    path = Path(path)
    arr = np.ascontiguousarray(matrix, dtype="<c16")
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(arr.tobytes(order="C"))
    import os
    os.replace(tmp, path)
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps(
        {"dtype": "complex128", "byte_order": "little", "order": "row-major",
         "shape": list(arr.shape)}, sort_keys=True))


def load_matrix(path) -> np.ndarray:
    import json
    from pathlib import Path
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<c16")
    return data.reshape(meta["shape"]).copy()


# -- localization diagnostic -------------------------------------------


@dataclass(frozen=True)
class EigenDecayReport:
    rates: np.ndarray
    fraction_localized: float
    rate_threshold: float


def linear_localization_diagnostic(params: ModelParams,
                                   radius: int) -> EigenDecayReport:
    """Eigenvector decay rates of the single-particle operator
    epsilon * hopping + V(n alpha + theta) on a box, d = 1 only.

    Each eigenvector's decay rate is the least-squares slope of
    log|psi| against distance from its peak site.  The localization
    threshold |log epsilon| / 4 is a diagnostic, not a certified value.
    """
    if params.d != 1:
        raise ValueError("diagnostic implemented for d = 1")
    ns = np.arange(-radius, radius + 1)
    m = ns.size
    H = np.zeros((m, m))
    for i, n in enumerate(ns):
        H[i, i] = params.mu_n((int(n),))
    eps = params.epsilon
    for i in range(m - 1):
        H[i, i + 1] = eps
        H[i + 1, i] = eps
    _, vecs = np.linalg.eigh(H)
    rates = np.empty(m)
    for j in range(m):
        psi = np.abs(vecs[:, j])
        peak = int(np.argmax(psi))
        d_from_peak = np.abs(np.arange(m) - peak).astype(float)
        keep = (psi > 1e-280) & (d_from_peak > 0)
        if eps == 0.0 or keep.sum() < 2:
            rates[j] = math.inf
            continue
        A = np.vstack([d_from_peak[keep], np.ones(keep.sum())]).T
        sol, *_ = np.linalg.lstsq(A, np.log(psi[keep]), rcond=None)
        rates[j] = -sol[0]
    threshold = math.inf if eps == 0.0 else abs(math.log(eps)) / 4.0
    frac = float(np.mean(rates >= threshold))
    return EigenDecayReport(rates, frac, threshold)
