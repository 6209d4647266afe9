"""Critical-chain gaps from exact diagonalization next to the two closed forms."""

from topoprep.majorana import ChainSpec, critical_gap, lowest_mode_energy, sector_spectra


def main() -> None:
    print(" L  even gap     odd-even     2sin(pi/(2(2L+1)))  2sin(pi/(2L+1))")
    for L in range(2, 11):
        even, odd = sector_spectra(ChainSpec(L, 1.0))
        print(f"{L:2d}  {even[1] - even[0]:.8f}  {abs(odd[0] - even[0]):.8f}  {lowest_mode_energy(L):.8f}          {critical_gap(L):.8f}")


if __name__ == "__main__":
    main()
