import math

import numpy as np
import pytest

from qpnls.evolve import (BlowUpError, LatticeBox, closed_form_decoupled,
                          free_lattice_single_site, integrate, reconstruct,
                          tail_mass, verify)
from qpnls.potential import ModelParams, TrigPoly, reference_params
from qpnls.solver import run_solver


def flat_potential_params(epsilon, delta=0.0):
    return ModelParams(V=TrigPoly(d=1, K=1, gamma=((1,),), v=(0.0,)),
                       alpha=(0.3,), theta=(0.1,), epsilon=epsilon,
                       delta=delta, p=1, sites=((0,),), a=(1.0,))


class TestReconstruct:
    def test_t_zero_is_coefficient_sum(self):
        sol = run_solver(reference_params())
        box, field = reconstruct(sol, 0.0)
        per_site = {}
        for (k, n, xi), v in sol.state.coeffs.items():
            if xi > 0:
                per_site[n] = per_site.get(n, 0.0) + v
        for n, want in per_site.items():
            assert field[box.index(n)] == pytest.approx(want)

    def test_single_mode_modulus_constant(self):
        sol = run_solver(reference_params(0.0, 0.0))
        for t in (0.0, 0.7, 13.9):
            box, field = reconstruct(sol, t)
            assert abs(field[box.index((0,))]) == pytest.approx(1.5)

    def test_exact_periodicity(self):
        sol = run_solver(reference_params(0.0, 0.0))
        om = sol.omega[0]
        T = 2 * math.pi / om
        box, f1 = reconstruct(sol, 0.3)
        _, f2 = reconstruct(sol, 0.3 + T, box)
        assert np.max(np.abs(f1 - f2)) <= 1e-12

    def test_phase_wrapped_recomputation(self):
        # the field depends on t only through k . omega t mod 2 pi
        sol = run_solver(reference_params())
        om = np.asarray(sol.omega)
        t = 7.3
        box, f1 = reconstruct(sol, t)
        wrapped = float((om[0] * t) % (2 * math.pi)) / om[0]
        _, f2 = reconstruct(sol, wrapped, box)
        assert np.max(np.abs(f1 - f2)) <= 1e-9


class TestIntegrate:
    def test_decoupled_closed_form(self):
        p = reference_params(0.0, 0.0)
        box = LatticeBox(1, 4)
        rng = np.random.default_rng(31)
        u0 = (rng.standard_normal(box.shape)
              + 1j * rng.standard_normal(box.shape))
        traj = integrate(u0, p, box, T=10.0, dt=1e-3, store_every=2000)
        for t, u in zip(traj.times, traj.states):
            exact = closed_form_decoupled(u0, p, box, float(t))
            assert np.max(np.abs(u - exact)) <= 1e-8

    def test_fourth_order_in_dt(self):
        p = ModelParams(V=TrigPoly.cosine(1), alpha=(0.33,), theta=(0.05,),
                        epsilon=0.0, delta=0.0, p=1, sites=((0,),), a=(1.0,))
        box = LatticeBox(1, 3)
        u0 = np.exp(1j * np.linspace(0, 1, 7)).astype(complex)
        errs = []
        for dt in (0.2, 0.1, 0.05):
            tr = integrate(u0, p, box, T=2.0, dt=dt, store_every=10 ** 9)
            exact = closed_form_decoupled(u0, p, box, 2.0)
            errs.append(np.max(np.abs(tr.states[-1] - exact)))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        for o in orders:
            assert o == pytest.approx(4.0, abs=0.2)

    def test_free_lattice_bessel_oracle(self):
        p = flat_potential_params(1e-3)
        box = LatticeBox(1, 20)
        u0 = np.zeros(box.shape, dtype=complex)
        u0[box.index((0,))] = 1.0
        traj = integrate(u0, p, box, T=1.0, dt=1e-3, store_every=10 ** 9)
        ns = list(range(-20, 21))
        exact = free_lattice_single_site(1.0, 1e-3, ns)
        got = np.array([traj.states[-1][box.index((n,))] for n in ns])
        assert np.max(np.abs(got - exact)) <= 1e-8

    def test_norm_conservation(self):
        p = reference_params()
        sol = run_solver(p)
        box, u0 = reconstruct(sol, 0.0)
        traj = integrate(u0, p, box, T=5.0, dt=1e-3, store_every=10 ** 9)
        assert traj.norm_drift <= 1e-8 * np.linalg.norm(u0)

    def test_blow_up_detection(self):
        # RK4 far outside its stability region amplifies every step
        p = ModelParams(V=TrigPoly(d=1, K=1, gamma=((1,),), v=(0.0,)),
                        alpha=(0.1,), theta=(0.1,), epsilon=0.9, delta=0.0,
                        p=1, sites=((0,),), a=(1.0,))
        box = LatticeBox(1, 6)
        u0 = np.ones(box.shape, dtype=complex)
        with pytest.raises(BlowUpError):
            integrate(u0, p, box, T=2000.0, dt=4.0)

    def test_invalid_dt(self):
        p = reference_params()
        with pytest.raises(ValueError):
            integrate(np.ones(3, dtype=complex), p, LatticeBox(1, 1), 1.0,
                      0.0)


class TestVerify:
    def test_decoupled_deviation_is_integrator_error(self):
        sol = run_solver(reference_params(0.0, 0.0))
        rep = verify(sol, T=10.0, dt=1e-3)
        assert rep.deviation_sup <= 1e-8
        assert rep.within_budget

    def test_reference_solution_budget(self):
        sol = run_solver(reference_params())
        rep = verify(sol, T=20.0, dt=1e-3)
        assert rep.within_budget
        assert rep.norm_drift <= 1e-8

    def test_tail_stays_small(self):
        sol = run_solver(reference_params())
        rep = verify(sol, T=10.0, dt=1e-3)
        assert rep.tail_mass_max <= max(2 * rep.tail_mass_initial, 1e-20)


class TestTailMass:
    def test_counts_only_outside(self):
        box = LatticeBox(1, 3)
        u = np.zeros(box.shape, dtype=complex)
        u[box.index((3,))] = 2.0
        u[box.index((0,))] = 5.0
        assert tail_mass(u, box, 2) == pytest.approx(4.0)
        assert tail_mass(u, box, 3) == 0.0
