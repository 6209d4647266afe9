"""Leading-order effective Hamiltonian checks on the torus, the anyon chain and the Majorana chain."""

from topoprep import experiments as ex
from topoprep.anyon_chain import chain_effective
from topoprep.anyons import load_category
from topoprep.evolution import field_operator
from topoprep.majorana import ChainSpec, exact_parity_effective
from topoprep.sw import SWContext, leading_order_check


def main() -> None:
    for model in ex.LATTICE_MODELS:
        setup = ex.model_setup(model)
        checks = [("Z", [0, 0, 1], 2)]
        # the X field at fourth order reaches the whole string-net space for the doubled models
        if model == "toric":
            checks.append(("X", [1, 0, 0], 4))
        for axis, field, L in checks:
            V = field_operator(field, setup.n_sites)
            ctx = SWContext.build(setup.H_top, V, depth=L, ground=setup.ground)
            print(model, f"sum {axis}", leading_order_check(ctx, L).as_text())
    fib = load_category("fibonacci")
    for L in (3, 4, 5):
        rep = chain_effective(fib, L, [0.0, 1.0], {1: 0.3}, {1: 0.2})
        print(f"fibonacci chain L={L} order={rep.order} f_L={rep.coeffs[1]:.6g} residual={rep.residual:.1e}")
    for L in (4, 6, 8, 10):
        rep = exact_parity_effective(ChainSpec(L), 0.05)
        print(f"majorana L={L} Delta={rep.delta:.4e} alpha={rep.alpha:.8f} beta={rep.beta:.4e}")


if __name__ == "__main__":
    main()
