"""Command-line entry point: ``topoprep {simulate,scan,sweff,tomography,figures}``.

Every flag can also be given in a YAML file passed with ``--config``; flags on
the command line take precedence. The exit code is 0 only if every invariant
check of the subcommand passes.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import experiments as ex
from .anyons import load_category
from .lattice import build_field_hamiltonian
from .probes import analytic_effective_ground_state, flux_tomography, loop_eigenvalues, single_layer, write_tomography_csv

log = logging.getLogger("topoprep")

CONFIG_KEYS = ("model", "family", "grid", "T", "dt", "kappa", "sign", "probes", "eps", "out", "workers", "chain_length")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _grid(text: str):
    vals = _floats(text)
    if len(vals) == 1 and float(vals[0]).is_integer() and "." not in text:
        return int(vals[0])
    return vals


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError("config file must hold a mapping")
    unknown = set(data) - set(CONFIG_KEYS) - {"figure", "L", "field", "axis"}
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    return data


def _merged(args: argparse.Namespace, defaults: dict) -> dict:
    cfg = dict(load_config(args.config))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key, val in defaults.items():
        cfg.setdefault(key, val)
    return cfg


def _experiment(cfg: dict) -> ex.ExperimentConfig:
    keys = {k: cfg[k] for k in CONFIG_KEYS if k in cfg}
    return ex.ExperimentConfig.from_mapping(keys)


def _report(failures: list[str]) -> int:
    for f in failures:
        log.error("invariant failed: %s", f)
    return 1 if failures else 0


# ------------------------------------------------------------------ commands


def cmd_simulate(args) -> int:
    cfg = _merged(args, {"model": "doubled_fibonacci", "T": [320.0], "grid": [0.0], "family": "theta"})
    out = Path(cfg.get("out", "results"))
    out.mkdir(parents=True, exist_ok=True)
    if cfg["model"] == "majorana":
        from .majorana import ChainSpec, symmetry_protected_interpolation

        failures = []
        path = out / "majorana_simulate.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["L", "T", "initial_parity", "final_overlap", "parity_drift", "sector"])
            for T in cfg["T"]:
                rep = symmetry_protected_interpolation(ChainSpec(int(cfg.get("chain_length", 6)), 1.0), float(T), float(cfg.get("dt", 0.1)), int(cfg.get("sign", 1)))
                w.writerow([rep.L, f"{rep.T:.12g}", f"{rep.initial_parity:.12g}", f"{rep.final_overlap:.12g}", f"{rep.parity_drift:.12g}", rep.target_sector])
                if rep.parity_drift > 1e-8:
                    failures.append(f"parity drift {rep.parity_drift:.2e} at T={T}")
        print(path)
        return _report(failures)
    ec = _experiment(cfg)
    coords, nvec = ex.field_points(ec)[0]
    failures = []
    for T in ec.T:
        row, traj = ex.simulate_point(ec, coords, nvec, T, instantaneous=True)
        path = out / f"{ec.model}_simulate_T{T:g}.csv"
        traj.to_csv(path)
        failures += [f"T={T}: {m}" for m in row.check()]
        if max(traj.norm_drift) > 1e-8:
            failures.append(f"T={T}: norm drift {max(traj.norm_drift):.2e}")
        print(f"{path} eps_adia={row.eps_adia:.6e}")
    return _report(failures)


def cmd_scan(args) -> int:
    cfg = _merged(args, {"family": "disc_pm", "grid": ex.DEFAULT_DISC})
    ec = _experiment(cfg)
    out = Path(ec.out)
    if ec.model == "toric":
        res = ex.logical_map(ec)
    else:
        res = ex.run(ec, with_reference=True)
    stem = f"{ec.model}_{ec.family}_scan"
    res.write_csv(out / f"{stem}.csv")
    res.write_manifest(out / f"{stem}_manifest.json")
    failures = res.failures()
    if ec.model == "toric":
        for r in res.rows:
            p = r.probes
            if abs(p["zbar1"] - p["zbar2"]) > 1e-8 or abs(p["xbar1"] - p["xbar2"]) > 1e-8:
                failures.append(f"{r.coords}: logical symmetry identity violated")
    if getattr(args, "perturbed", False):
        rows = ex.perturbed_ground_comparison(ec)
        with open(out / f"{stem}_perturbed.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*res.coord_names, "overlap", "gap", "degenerate"])
            for r in rows:
                w.writerow([*(f"{c:.12g}" for c in r.coords), f"{r.overlap:.12g}", f"{r.gap:.12g}", int(r.degenerate)])
    print(out / f"{stem}.csv")
    return _report(failures)


def cmd_sweff(args) -> int:
    from . import sw

    cfg = _merged(args, {"model": "toric"})
    model = cfg["model"]
    eps = float(cfg.get("eps", 1e-3))
    failures = []
    if model == "majorana":
        from .majorana import ChainSpec, exact_parity_effective

        rep = exact_parity_effective(ChainSpec(int(cfg.get("chain_length", 6))), eps)
        print(f"L={rep.L} eps={eps} E0={rep.E0:.12g} E1={rep.E1:.12g} alpha={rep.alpha:.12g} beta={rep.beta:.12g} parity_residual={rep.parity_residual:.2e}")
        if rep.parity_residual > 1e-8:
            failures.append("effective Hamiltonian is not diagonal in the parity basis")
        return _report(failures)
    if model == "chain":
        from .anyon_chain import chain_effective

        cat = load_category("fibonacci")
        L = int(args.L or 4)
        rep = chain_effective(cat, L, [0.0, 1.0], {1: 1.0}, {1: 1.0})
        print(f"L={L} order={rep.order} f_L={rep.coeffs} residual={rep.residual:.2e} lower={rep.lower_order_deviation:.2e}")
        if rep.residual > 1e-8 or rep.lower_order_deviation > 1e-8:
            failures.append("order-L chain term is not a string-operator combination")
        return _report(failures)
    setup = ex.model_setup(model)
    axis = (args.axis or cfg.get("axis", "z")).lower()
    nvec = {"x": [1.0, 0.0, 0.0], "y": [0.0, 1.0, 0.0], "z": [0.0, 0.0, 1.0]}[axis]
    V, _ = build_field_hamiltonian(nvec, setup.n_sites)
    ex_sw = sw.exact_sw(setup.H_top, V, eps, ground=setup.ground)
    cluster = sw.cluster_energies(setup.H_top, V, eps, setup.ground.degeneracy)
    dev = float(np.abs(np.sort(ex_sw.eigenvalues) - cluster).max())
    print(f"model={model} V=sum {axis.upper()} eps={eps} exact_sw_vs_cluster={dev:.2e}")
    if dev > 1e-8:
        failures.append(f"exact SW spectrum deviates by {dev:.2e}")
    if args.L:
        ctx = sw.SWContext.build(setup.H_top, V, int(args.L), ground=setup.ground)
        rep = sw.leading_order_check(ctx, int(args.L))
        print(rep.as_text())
        if not rep.lower_orders_scalar or rep.angle > 1e-6:
            failures.append("lowest nontrivial order is not proportional to the self-energy term")
    return _report(failures)


def cmd_tomography(args) -> int:
    cfg = _merged(args, {"model": "doubled_fibonacci"})
    model = cfg["model"]
    out = Path(cfg.get("out", "results"))
    out.mkdir(parents=True, exist_ok=True)
    setup = ex.model_setup(model)
    ref = ex.reference_state(model, float(cfg.get("dt", 0.1)))
    rows = []
    for loop in setup.lattice.minimal_dual_loops:
        tag = "-".join(str(e + 1) for e in loop)
        tm = flux_tomography(model, loop, setup.ground, ref)
        rows += [(model, tag, s, v) for s, v in tm.expectations.items()]
    if model != "toric":
        st = analytic_effective_ground_state(load_category(model))
        eig = loop_eigenvalues(single_layer(model), 1).real
        for v in sorted(set(np.round(eig, 8)), reverse=True):
            sel = np.abs(eig - v) < 1e-8
            names = "+".join(l for l, k in zip(st.labels, sel) if k)
            rows.append((model, "effective", names, float(st.probabilities[sel].sum())))
    path = out / f"{model}_tomography.csv"
    write_tomography_csv(rows, path)
    for r in rows:
        print(*r)
    return 0


def cmd_figures(args) -> int:
    fig = args.figure
    if fig not in ex.FIGURES:
        log.error("unknown figure id %s", fig)
        return 2
    model, _ = ex.FIGURES[fig]
    cfg = _merged(args, {"model": model})
    out = Path(cfg.get("out", "results"))
    dt = float(cfg.get("dt", 0.1))
    if fig == "fib_instant":
        Ts = [float(t) for t in cfg.get("T", [320.0, 1280.0])]
        trajs = {T: ex.instantaneous_run(model, T, dt) for T in Ts}
        path = ex.emit_figure_data(fig, out, trajs)
    elif fig == "tc_groundspaceoverlap":
        grid = cfg.get("grid", [0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi])
        ec = ex.ExperimentConfig(model, "theta", tuple(grid), tuple(cfg.get("T", [10.0, 40.0, 120.0])), dt)
        res = ex.run(ec)
        path = ex.emit_figure_data(fig, out, res)
        if any(abs(r.eps_adia - 1) > 1e-6 for r in res.rows if r.coords[0] == 0.0):
            return _report(["theta=0 row is not pinned at 1"])
    else:
        ec = ex.ExperimentConfig(model, "disc_pm", int(cfg.get("grid", ex.DEFAULT_DISC)), (120.0,), dt, sign=-1)
        res = ex.run(ec, with_reference=True)
        path = ex.emit_figure_data(fig, out, res)
        print(path)
        return _report(res.failures())
    print(path)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topoprep", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML file with any of the flags below")
        sp.add_argument("--model", choices=ex.MODELS + ("chain",))
        sp.add_argument("--family", choices=ex.FAMILIES)
        sp.add_argument("--grid", type=_grid, help="angles (comma separated) or disc resolution")
        sp.add_argument("--T", type=_floats, help="total evolution time(s), comma separated")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--kappa", type=float)
        sp.add_argument("--sign", type=int, choices=(-1, 1))
        sp.add_argument("--eps", type=float)
        sp.add_argument("--out")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--chain-length", dest="chain_length", type=int)
        return sp

    common(sub.add_parser("simulate", help="single interpolation with instantaneous sampling")).set_defaults(func=cmd_simulate)
    scan = common(sub.add_parser("scan", help="grid scan of final-state observables"))
    scan.add_argument("--perturbed", action="store_true", help="also compare with perturbed ground states")
    scan.set_defaults(func=cmd_scan)
    sweff = common(sub.add_parser("sweff", help="effective Hamiltonian checks"))
    sweff.add_argument("--axis", choices=("x", "y", "z"))
    sweff.add_argument("--L", type=int, help="order of the lowest nontrivial term")
    sweff.set_defaults(func=cmd_sweff)
    common(sub.add_parser("tomography", help="flux-sector expectations of the reference state")).set_defaults(func=cmd_tomography)
    figs = common(sub.add_parser("figures", help="figure-ready CSV data"))
    figs.add_argument("--figure", required=True, choices=sorted(ex.FIGURES))
    figs.set_defaults(func=cmd_figures)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return int(args.func(args))
    except (ValueError, ex.BudgetError) as err:
        log.error("%s", err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
