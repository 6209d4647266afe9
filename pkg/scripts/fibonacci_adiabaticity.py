"""Adiabaticity error of the doubled Fibonacci preparation versus total time, for both Z starts."""

import argparse
import csv
from pathlib import Path

from topoprep import experiments as ex
from topoprep.evolution import Schedule, evolve
from topoprep.lattice import build_field_hamiltonian


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--T", type=float, nargs="+", default=[40.0, 80.0, 160.0, 320.0])
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--out", default="results/fibonacci_adiabaticity.csv")
    args = p.parse_args()
    setup = ex.model_setup("doubled_fibonacci")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start", "T", "eps_adia"])
        for sign in (1, -1):
            H_triv, psi0 = build_field_hamiltonian([0.0, 0.0, float(sign)], setup.n_sites)
            for T in args.T:
                _, traj = evolve(H_triv, setup.H_top, Schedule(T, args.dt), psi0=psi0, instantaneous=False, final_subspace=setup.ground)
                label = "+Z" if sign > 0 else "-Z"
                w.writerow([label, f"{T:g}", f"{traj.eps_adia[-1]:.6e}"])
                print(label, T, f"{traj.eps_adia[-1]:.3e}", flush=True)
    print(out)


if __name__ == "__main__":
    main()
