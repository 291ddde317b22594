"""Construct a quasi-periodic solution by the two-stage iteration:
frequency correction from the resonant equations, then Newton steps on
the non-resonant block.
"""

import math

from qpnls.potential import base_frequencies, reference_params
from qpnls.solver import run_solver


def main():
    p = reference_params()
    sol = run_solver(p)
    om0 = base_frequencies(p)

    print(f"converged: {sol.converged} in {sol.newton_steps} Newton steps")
    print(f"frequency shift: {sol.omega[0] - om0[0]:+.6e}")
    print("\nscale  residual      correction")
    for step in sol.trace.steps:
        print(f"  {step['r']}    {step['residual']:.3e}    "
              f"{step['correction']:.3e}")

    c = sol.certificates
    print(f"\ncertificates:")
    print(f"  residual        {c.residual:.3e}")
    print(f"  decay sum       {c.decay_sum:.4f} "
          f"(budget {math.sqrt(p.epsilon + p.delta):.4f})")
    print(f"  omega shift     {c.omega_shift:.3e} (budget {10 * p.delta:.1e})")
    print(f"  conjugacy defect {c.conjugacy_defect:.2e}")

    print("\nlargest coefficients:")
    top = sorted(sol.state.coeffs.items(), key=lambda kv: -abs(kv[1]))[:6]
    for (k, n, xi), v in top:
        print(f"  k={k} n={n} xi={xi:+d}: {abs(v):.4e}")


if __name__ == "__main__":
    main()
