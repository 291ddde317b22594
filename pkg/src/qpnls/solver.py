"""Construction of quasi-periodic localized states.

The unknown is a table of Fourier amplitudes u_hat(k, n) on the layered
lattice, with the minus layer tied to the plus layer by conjugacy.  The
frequency vector omega is solved from the finitely many equations at the
excited sites, and the remaining equations are solved by Newton steps on
growing regions.  All nonlinear terms are convolutions in k at fixed n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.signal

from .lattice import Region, Site, frozen_mode_sites, sup_norm
from .linop import (AssembledOperator, ShortRangeOperator,
                    SingularOperatorError, assemble_H)
from .potential import ModelParams, base_frequencies

IntVec = tuple[int, ...]


# -- state -------------------------------------------------------------


@dataclass
class FourierState:
    """Fourier amplitudes keyed by layered site.

    The minus layer mirrors the plus layer through conjugacy
    (coefficient at (k, n, -) equals the conjugate at (-k, n, +)), and
    the anchor amplitudes at the excited sites are held exactly.
    """

    coeffs: dict
    b: int
    d: int
    anchors: dict  # (k, n, +1) site -> exact amplitude

    def copy(self) -> "FourierState":
        return FourierState(dict(self.coeffs), self.b, self.d,
                            dict(self.anchors))

    def get(self, site: Site) -> complex:
        return self.coeffs.get(site, 0.0 + 0.0j)

    def set(self, site: Site, value: complex,
            drop_tol: float = 0.0) -> None:
        if site in self.anchors:
            return
        if value == 0.0 or abs(value) <= drop_tol:
            self.coeffs.pop(site, None)
        else:
            self.coeffs[site] = complex(value)

    def support_radius(self) -> int:
        if not self.coeffs:
            return 0
        return max(max(sup_norm(k), sup_norm(n))
                   for k, n, _ in self.coeffs)

    def k_radius(self) -> int:
        if not self.coeffs:
            return 0
        return max(sup_norm(k) for k, _, _ in self.coeffs)

    def n_support(self) -> set:
        return {n for _, n, _ in self.coeffs}

    def conjugacy_defect(self) -> float:
        worst = 0.0
        for (k, n, xi), val in self.coeffs.items():
            mirror = self.get((tuple(-c for c in k), n, -xi))
            worst = max(worst, abs(val - np.conj(mirror)))
        return float(worst)

    def enforce_anchors(self) -> None:
        for site, value in self.anchors.items():
            self.coeffs[site] = complex(value)
            k, n, xi = site
            self.coeffs[(tuple(-c for c in k), n, -xi)] = complex(
                np.conj(value))

    def sup_norm_value(self) -> float:
        return max((abs(v) for v in self.coeffs.values()), default=0.0)


def anchor_sites(params: ModelParams) -> dict:
    """Map from the plus-layer anchor sites to their exact amplitudes."""
    out = {}
    for l, n in enumerate(params.sites):
        e = tuple(1 if j == l else 0 for j in range(params.b))
        out[(e, tuple(n), +1)] = complex(params.a[l])
    return out


def initial_state(params: ModelParams) -> FourierState:
    """Single-mode seed: amplitude a_l at (e_l, n_l, +) plus conjugates."""
    anchors = anchor_sites(params)
    state = FourierState({}, params.b, params.d, anchors)
    state.enforce_anchors()
    return state


def symmetrize(state: FourierState) -> FourierState:
    """Project onto the conjugacy-symmetric subspace by averaging the two
    determinations of each coefficient.  Idempotent."""
    out = state.copy()
    seen = set()
    new = {}
    for site in list(out.coeffs):
        if site in seen:
            continue
        k, n, xi = site
        mirror = (tuple(-c for c in k), n, -xi)
        a = out.get(site)
        bm = out.get(mirror)
        avg = 0.5 * (a + np.conj(bm))
        if avg != 0.0:
            new[site] = avg
            new[mirror] = np.conj(avg)
        seen.add(site)
        seen.add(mirror)
    out.coeffs = new
    out.enforce_anchors()
    return out


# -- convolutions in k at fixed n --------------------------------------


def _layer_array(state: FourierState, n: IntVec, xi: int,
                 R: int) -> np.ndarray:
    """Dense k-array of one layer at fixed n, k in [-R, R]^b."""
    shape = (2 * R + 1,) * state.b
    arr = np.zeros(shape, dtype=complex)
    for (k, nn, x), val in state.coeffs.items():
        if nn == n and x == xi and sup_norm(k) <= R:
            idx = tuple(c + R for c in k)
            arr[idx] = val
    return arr


def _conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    method = "direct" if max(a.size, b.size) < 256 else "auto"
    return scipy.signal.convolve(a, b, mode="full", method=method)


def convolution_nonlinearity(state: FourierState, p: int) -> dict:
    """Nonlinear terms per layer: (u*v)^p * u on the plus layer and
    (u*v)^p * v on the minus layer, convolving in k at each fixed n.

    Returns a coefficient map over layered sites; the k-support grows to
    (2p+1) times the input support.
    """
    R = state.k_radius()
    out = {}
    for n in state.n_support():
        u = _layer_array(state, n, +1, R)
        v = _layer_array(state, n, -1, R)
        if not (u.any() or v.any()):
            continue
        uv = _conv(u, v)
        w = uv
        for _ in range(p - 1):
            w = _conv(w, uv)
        plus = _conv(w, u)
        minus = _conv(w, v)
        Rout = R * (2 * p + 1)
        for arr, xi in ((plus, +1), (minus, -1)):
            nz = np.argwhere(np.abs(arr) > 0)
            for idx in nz:
                k = tuple(int(c) - Rout for c in idx)
                out[(k, n, xi)] = arr[tuple(idx)]
    return out


def convolution_power(state: FourierState, p: int) -> dict:
    """(u*v)^p per fixed n, as a map n -> centered dense k-array."""
    R = state.k_radius()
    out = {}
    for n in state.n_support():
        u = _layer_array(state, n, +1, R)
        v = _layer_array(state, n, -1, R)
        uv = _conv(u, v)
        w = uv
        for _ in range(p - 1):
            w = _conv(w, uv)
        out[n] = w
    return out


def _laplacian_neighbors(n: IntVec) -> list[IntVec]:
    out = []
    for j in range(len(n)):
        for step in (-1, 1):
            m = list(n)
            m[j] += step
            out.append(tuple(m))
    return out


# -- residual ----------------------------------------------------------


def evaluate_F(state: FourierState, omega: Sequence[float],
               params: ModelParams) -> dict:
    """Residual of the lattice equations at the current state.

    Plus-layer rows: (-k . omega + mu_n) u + eps (hopping in n) u
    + delta (u*v)^p * u; minus-layer rows are the conjugate mirror.
    Evaluated on the state's support, the nonlinearity support, and one
    hopping halo in n.
    """
    om = np.asarray(omega, dtype=float)
    nl = (convolution_nonlinearity(state, params.p)
          if params.delta != 0.0 and state.coeffs else {})
    rows = set(state.coeffs) | set(nl)
    if params.epsilon != 0.0:
        for k, n, xi in list(state.coeffs):
            for m in _laplacian_neighbors(n):
                rows.add((k, m, xi))
    residual = {}
    mu_cache = {}
    for site in rows:
        k, n, xi = site
        if n not in mu_cache:
            mu_cache[n] = params.mu_n(n)
        kw = float(np.dot(k, om))
        diag = (-kw + mu_cache[n]) if xi > 0 else (kw + mu_cache[n])
        val = diag * state.get(site)
        if params.epsilon != 0.0:
            hop = sum(state.get((k, m, xi)) for m in _laplacian_neighbors(n))
            val += params.epsilon * hop
        if params.delta != 0.0:
            val += params.delta * nl.get(site, 0.0)
        if val != 0.0:
            residual[site] = val
    return residual


def residual_sup(residual: dict, exclude: Iterable[Site] = ()) -> float:
    excl = frozenset(exclude)
    return float(max((abs(v) for s, v in residual.items() if s not in excl),
                     default=0.0))


# -- frequency (Q) equations -------------------------------------------


def solve_Q(state: FourierState, params: ModelParams,
            omega_guess: Optional[Sequence[float]] = None,
            tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Solve the equations at the excited sites for the frequencies.

    omega_l = omega0_l + (eps hopping + delta nonlinearity at the anchor)
    / a_l; the right-hand side does not depend on omega, so the fixed
    point is reached immediately and later sweeps only confirm it.
    """
    omega0 = base_frequencies(params)
    om = np.asarray(omega_guess, dtype=float) if omega_guess is not None \
        else omega0.copy()
    nl = (convolution_nonlinearity(state, params.p)
          if params.delta != 0.0 else {})
    for _ in range(max_iter):
        new = omega0.copy()
        for l, n in enumerate(params.sites):
            e = tuple(1 if j == l else 0 for j in range(params.b))
            site = (e, tuple(n), +1)
            corr = 0.0 + 0.0j
            if params.epsilon != 0.0:
                corr += params.epsilon * sum(
                    state.get((e, m, +1))
                    for m in _laplacian_neighbors(tuple(n)))
            if params.delta != 0.0:
                corr += params.delta * nl.get(site, 0.0)
            new[l] += float(np.real(corr)) / params.a[l]
        if np.max(np.abs(new - om)) < tol:
            return new
        om = new
    raise RuntimeError(
        f"frequency solve did not converge; last iterates {om} -> {new}")


# -- Newton step -------------------------------------------------------


def linearization_coupling(state: FourierState, params: ModelParams,
                           n_values: Iterable[IntVec],
                           dk_radius: int) -> ShortRangeOperator:
    """Derivative of the nonlinearity as a k-Toplitz, n-diagonal kernel.

    Diagonal layer blocks carry (p+1)(u*v)^p; the cross-layer blocks
    carry p (u*v)^(p-1) * u * u and its conjugate mirror.
    """
    p = params.p
    R = state.k_radius()
    kernel = {}
    for n in n_values:
        u = _layer_array(state, n, +1, R)
        v = _layer_array(state, n, -1, R)
        uv = _conv(u, v)
        w = uv
        for _ in range(p - 1):
            w = _conv(w, uv)
        if p >= 2:
            wm = uv
            for _ in range(p - 2):
                wm = _conv(wm, uv)
        else:
            wm = None
        uu = _conv(u, u)
        vv = _conv(v, v)
        if wm is not None:
            uu = _conv(wm, uu)
            vv = _conv(wm, vv)
        blocks = {
            (+1, +1): (p + 1) * w,
            (-1, -1): (p + 1) * w,
            (+1, -1): p * uu,
            (-1, +1): p * vv,
        }
        for (xi, xip), arr in blocks.items():
            Rb = (arr.shape[0] - 1) // 2
            nz = np.argwhere(np.abs(arr) > 0)
            for idx in nz:
                dk = tuple(int(c) - Rb for c in idx)
                if sup_norm(dk) > dk_radius:
                    continue
                kernel[(dk, n, xi, xip)] = arr[tuple(idx)]
    return ShortRangeOperator(kernel=kernel, decay_const=1e6,
                              decay_rate=1.0)


def newton_step(state: FourierState, omega: Sequence[float],
                params: ModelParams, N: int) -> tuple[FourierState, float]:
    """One Newton correction on the cube of size N, excited sites frozen.

    Assembles the linearized operator (diagonal + hopping + nonlinearity
    coupling) on the layered cube minus the excited set, solves for the
    correction against the current residual, and subtracts it.
    """
    region = Region.cube(params.b + params.d, N)
    excl = frozen_mode_sites(params.sites)
    n_values = set()
    for y in region.sites():
        n_values.add(y[params.b:])
    S = linearization_coupling(state, params, n_values, dk_radius=2 * N)
    op = assemble_H(params, omega, region, sigma=0.0, S=S, exclude=excl)
    residual = evaluate_F(state, omega, params)
    rhs = np.array([residual.get(s, 0.0) for s in op.indexing.sites],
                   dtype=complex)
    try:
        delta = np.linalg.solve(op.matrix, rhs)
    except np.linalg.LinAlgError as exc:
        svals = np.linalg.svd(op.matrix, compute_uv=False)
        raise SingularOperatorError(
            f"linearized operator singular on cube N={N}", float(svals[-1])
        ) from exc
    new = state.copy()
    for i, site in enumerate(op.indexing.sites):
        new.set(site, new.get(site) - delta[i])
    new.enforce_anchors()
    corr = float(np.max(np.abs(delta))) if delta.size else 0.0
    return new, corr


# -- full run ----------------------------------------------------------


@dataclass(frozen=True)
class NewtonTrace:
    steps: tuple[dict, ...]  # per step: r, N, residual, correction, omega

    def residuals(self) -> list[float]:
        return [s["residual"] for s in self.steps]

    def corrections(self) -> list[float]:
        return [s["correction"] for s in self.steps]


@dataclass(frozen=True)
class Certificates:
    residual: float
    decay_sum: float
    conjugacy_defect: float
    omega_shift: float


@dataclass(frozen=True)
class Solution:
    state: FourierState
    omega: tuple[float, ...]
    params: ModelParams
    certificates: Certificates
    trace: NewtonTrace
    converged: bool
    newton_steps: int


def decay_sum(state: FourierState, params: ModelParams) -> float:
    """Weighted amplitude sum over the plus layer away from the anchors:
    sum |u(k, n)| exp(|k| + |n|)."""
    anchors = set(anchor_sites(params))
    total = 0.0
    for site, val in state.coeffs.items():
        if site[2] < 0 or site in anchors:
            continue
        k, n, _ = site
        total += abs(val) * math.exp(sup_norm(k) + sup_norm(n))
    return total


def certificates_for(state: FourierState, omega: Sequence[float],
                     params: ModelParams) -> Certificates:
    res = residual_sup(evaluate_F(state, omega, params))
    omega0 = base_frequencies(params)
    return Certificates(
        residual=res,
        decay_sum=decay_sum(state, params),
        conjugacy_defect=state.conjugacy_defect(),
        omega_shift=float(np.max(np.abs(np.asarray(omega) - omega0))),
    )


class DivergedError(RuntimeError):
    def __init__(self, message: str, trace: NewtonTrace):
        super().__init__(message)
        self.trace = trace


def run_solver(params: ModelParams, M: int = 2, r_max: int = 10,
               tol: float = 1e-11, N_cap: int = 16,
               q_before_p: bool = True) -> Solution:
    """Alternating frequency solves and Newton corrections on growing
    cubes N_r = min(M^(r+1), N_cap) until the residual is below tol.

    The state is re-symmetrized after every correction; divergence
    (residual growth on two consecutive steps) aborts with the trace.
    """
    state = initial_state(params)
    omega = solve_Q(state, params)
    steps = []
    res = residual_sup(evaluate_F(state, omega, params))
    if res < tol:
        trace = NewtonTrace(tuple(steps))
        return Solution(state, tuple(omega), params,
                        certificates_for(state, omega, params), trace,
                        converged=True, newton_steps=0)
    growth = 0
    prev_res = res
    for r in range(r_max):
        N = min(M ** (r + 1), N_cap)
        if q_before_p:
            omega = solve_Q(state, params, omega)
        state, corr = newton_step(state, omega, params, N)
        state = symmetrize(state)
        if not q_before_p:
            omega = solve_Q(state, params, omega)
        res = residual_sup(evaluate_F(state, omega, params))
        anchor_err = max(abs(state.get(s) - v)
                         for s, v in state.anchors.items())
        steps.append({"r": r, "N": N, "residual": res, "correction": corr,
                      "omega": tuple(float(x) for x in omega),
                      "conjugacy_defect": state.conjugacy_defect(),
                      "anchor_error": float(anchor_err)})
        if not (math.isfinite(res) and math.isfinite(corr)):
            raise DivergedError("non-finite residual or correction",
                                NewtonTrace(tuple(steps)))
        if res < tol:
            break
        growth = growth + 1 if res > prev_res else 0
        if growth >= 2:
            raise DivergedError(
                f"residual grew twice in a row (last {res:.3e})",
                NewtonTrace(tuple(steps)))
        prev_res = res
    omega = solve_Q(state, params, omega)
    trace = NewtonTrace(tuple(steps))
    certs = certificates_for(state, omega, params)
    return Solution(state, tuple(float(x) for x in omega), params, certs,
                    trace, converged=bool(certs.residual < tol),
                    newton_steps=len(steps))


# -- persistence -------------------------------------------------------


def solution_to_record(sol: Solution) -> dict:
    return {
        "params": sol.params.to_record(),
        "omega": list(sol.omega),
        "coeffs": [
            {"k": list(k), "n": list(n), "xi": int(xi),
             "re": float(np.real(v)), "im": float(np.imag(v))}
            for (k, n, xi), v in sorted(sol.state.coeffs.items())
        ],
        "certificates": {
            "residual": sol.certificates.residual,
            "decay_sum": sol.certificates.decay_sum,
            "conjugacy_defect": sol.certificates.conjugacy_defect,
            "omega_shift": sol.certificates.omega_shift,
        },
        "trace": list(sol.trace.steps),
        "converged": sol.converged,
        "newton_steps": sol.newton_steps,
    }


def solution_from_record(rec: dict) -> Solution:
    params = ModelParams.from_record(rec["params"])
    coeffs = {}
    for row in rec["coeffs"]:
        site = (tuple(int(c) for c in row["k"]),
                tuple(int(c) for c in row["n"]), int(row["xi"]))
        coeffs[site] = complex(row["re"], row["im"])
    state = FourierState(coeffs, params.b, params.d, anchor_sites(params))
    c = rec["certificates"]
    certs = Certificates(c["residual"], c["decay_sum"],
                         c["conjugacy_defect"], c["omega_shift"])
    trace = NewtonTrace(tuple(rec["trace"]))
    return Solution(state, tuple(float(x) for x in rec["omega"]), params,
                    certs, trace, bool(rec["converged"]),
                    int(rec["newton_steps"]))
