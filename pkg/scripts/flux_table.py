"""Flux-sector table for the doubled Fibonacci reference state and the analytic effective state."""

import argparse

from topoprep import experiments as ex
from topoprep.anyons import load_category
from topoprep.probes import analytic_effective_ground_state, flux_tomography


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--dt", type=float, default=0.1)
    args = p.parse_args()
    setup = ex.model_setup("doubled_fibonacci")
    ref = ex.reference_state("doubled_fibonacci", args.dt)
    print("state      (1,1)   (tau,tau)  (1,tau)+(tau,1)")
    for loop in setup.lattice.minimal_dual_loops:
        e = flux_tomography("doubled_fibonacci", loop, setup.ground, psi=ref).expectations
        print(f"psi_R {loop}  {e['(1,1)']:.4f}  {e['(tau,tau)']:.4f}     {e['(1,tau)+(tau,1)']:.4f}")
    pr = analytic_effective_ground_state(load_category("doubled_fibonacci")).probabilities
    print(f"psi_eff        {pr[0]:.4f}  {pr[3]:.4f}     {pr[1] + pr[2]:.4f}")


if __name__ == "__main__":
    main()
