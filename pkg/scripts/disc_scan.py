"""Disc scan of final-state observables; thin wrapper over the experiment runner."""

import argparse
from pathlib import Path

from topoprep import experiments as ex


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--model", default="toric", choices=ex.LATTICE_MODELS)
    p.add_argument("--family", default="disc_pm", choices=("disc_pm", "disc_pm_x"))
    p.add_argument("--grid", type=int, default=11)
    p.add_argument("--T", type=float, nargs="+", default=[40.0])
    p.add_argument("--sign", type=int, default=-1, choices=(-1, 1))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results")
    args = p.parse_args()
    cfg = ex.ExperimentConfig(args.model, args.family, args.grid, tuple(args.T), sign=args.sign, workers=args.workers, out=args.out)
    res = ex.logical_map(cfg) if args.model == "toric" else ex.run(cfg, with_reference=True)
    stem = Path(args.out) / f"{args.model}_{args.family}_{'p' if args.sign > 0 else 'm'}"
    print(res.write_csv(f"{stem}.csv"))
    res.write_manifest(f"{stem}_manifest.json")
    if res.failures():
        raise SystemExit("\n".join(res.failures()))


if __name__ == "__main__":
    main()
