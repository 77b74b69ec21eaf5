"""Command-line experiment driver.

Subcommands: generate, metrics, compile, solve, simulate, mixture, and
experiment (run a bundled preset or a config file end to end, emitting the
CSV artifacts the plotting component consumes). Worker count for ensembles
comes from the HCMSIR_WORKERS environment variable.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import netgen, odesolve
from .compiler import assemble_system
from .config import (ConfigError, ExperimentConfig, load_config, load_preset,
                     parse_subgraph, preset_names)
from .gillespie import NoOutbreaksError, resolve_workers, run_ensemble
from .pgf import MixtureInfeasibleError, build_pgf, moments, solve_mixture


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for reporting."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")


def _load(path_or_none, preset_ok=False):
    if path_or_none is None:
        raise StageError("config", "a --config file is required")
    p = Path(path_or_none)
    if preset_ok and not p.exists() and "/" not in str(path_or_none):
        return load_preset(str(path_or_none))
    return load_config(p)


def _single_model(cfg: ExperimentConfig):
    if len(cfg.models) != 1:
        raise StageError(
            "config", f"this command needs exactly one model, got "
            f"{sorted(cfg.models)}")
    return next(iter(cfg.models.items()))


def _write_metrics_csv(path: Path, rows: list[dict]):
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)


def _metrics_rows(name: str, model, net: netgen.Network | None):
    mom = moments(model)
    row = {"model": name, "source": "target",
           "mean_degree": mom.mean_degree,
           "degree_variance": mom.degree_variance,
           "triangles_per_node": mom.triangles_per_node,
           "global_clustering": mom.global_clustering}
    rows = [row]
    if net is not None:
        m = netgen.measure(net)
        rows.append({"model": name, "source": "realised",
                     "mean_degree": m.mean_degree,
                     "degree_variance": m.degree_variance,
                     "triangles_per_node": 3 * m.triangle_count / net.n_nodes,
                     "global_clustering": m.global_clustering})
    return rows


def cmd_generate(args):
    cfg = _load(args.config)
    name, model = _single_model(cfg)
    n = args.n_nodes or cfg.n_nodes
    seed = cfg.seed if args.seed is None else args.seed
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    net = netgen.generate_network(model, n, np.random.default_rng(seed))
    netgen.save_edgelist(net, out / "network.edgelist")
    _write_metrics_csv(out / "metrics.csv", _metrics_rows(name, model, net))
    print(f"wrote {out / 'network.edgelist'} "
          f"({net.n_nodes} nodes, {len(net.edges)} edges)")


def cmd_metrics(args):
    net = netgen.load_edgelist(args.edgelist)
    m = netgen.measure(net)
    w = csv.writer(sys.stdout)
    w.writerow(["mean_degree", "degree_variance", "triangle_count",
                "path2_count", "global_clustering"])
    w.writerow([m.mean_degree, m.degree_variance, m.triangle_count,
                m.path2_count, m.global_clustering])


def cmd_compile(args):
    cfg = _load(args.config)
    name, model = _single_model(cfg)
    system = assemble_system(build_pgf(model), cfg.params)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "system_dump.txt").write_text(system.dump_equations() + "\n")
    (out / "z_matrix.csv").write_text(system.dump_z_csv())
    print(f"{name}: {system.n_equations} equations; wrote "
          f"{out / 'system_dump.txt'} and {out / 'z_matrix.csv'}")


def cmd_solve(args):
    cfg = _load(args.config)
    name, model = _single_model(cfg)
    system = assemble_system(build_pgf(model), cfg.params)
    trace = odesolve.integrate(system, t_end=cfg.t_end, h_out=cfg.h_out)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ode_trace.csv").write_text(trace.to_csv())
    print(f"{name}: integrated to t = {cfg.t_end}; "
          f"wrote {out / 'ode_trace.csv'}")


def cmd_simulate(args):
    cfg = _load(args.config)
    name, model = _single_model(cfg)
    n = args.n_nodes or cfg.n_nodes
    result = run_ensemble(model, cfg.protocol, n, t_end=cfg.t_end,
                          h_out=cfg.h_out, workers=args.workers)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sim_mean.csv").write_text(result.mean_trace().to_csv())
    (out / "sim_meta.json").write_text(
        json.dumps(result.sidecar(), indent=2) + "\n")
    print(f"{name}: {result.n_retained} retained / "
          f"{result.n_discarded} discarded; wrote {out / 'sim_mean.csv'}")


def cmd_mixture(args):
    subgraphs = [parse_subgraph({"id": s, "library": s})
                 for s in args.subgraph]
    fixed = {}
    for pin in args.fix or []:
        sid, _, val = pin.partition("=")
        fixed[sid] = float(val)
    rates = solve_mixture(subgraphs,
                          (args.mean_degree, args.degree_variance,
                           args.triangles), fixed or None)
    w = csv.writer(sys.stdout)
    w.writerow(["subgraph", "rate"])
    for s, r in zip(subgraphs, rates):
        w.writerow([s.id, f"{r:.12g}"])


def _run_experiment(cfg: ExperimentConfig, out: Path,
                    workers: int | None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "config": cfg.raw,
        "seed": cfg.seed,
        "n_nodes": cfg.n_nodes,
        "workers": resolve_workers(workers),
        "versions": {"hcmsir": metadata.version("hcmsir"),
                     "numpy": np.__version__},
        "models": {},
    }
    series = []
    model_seeds = np.random.SeedSequence(cfg.seed).spawn(len(cfg.models))
    for (name, model), mseed in zip(cfg.models.items(), model_seeds):
        mdir = out / name
        mdir.mkdir(exist_ok=True)
        files = {}
        try:
            system = assemble_system(build_pgf(model), cfg.params)
            (mdir / "system_dump.txt").write_text(
                system.dump_equations() + "\n")
            files["system_dump"] = f"{name}/system_dump.txt"

            trace = odesolve.integrate(system, t_end=cfg.t_end,
                                       h_out=cfg.h_out)
            (mdir / "ode_trace.csv").write_text(trace.to_csv())
            files["ode_trace"] = f"{name}/ode_trace.csv"
        except Exception as exc:
            raise StageError(f"compile/solve:{name}", str(exc)) from exc
        try:
            net_seed = int(mseed.generate_state(1)[0])
            net = netgen.generate_network(model, cfg.n_nodes,
                                          np.random.default_rng(net_seed))
            _write_metrics_csv(mdir / "metrics.csv",
                               _metrics_rows(name, model, net))
            files["metrics"] = f"{name}/metrics.csv"
        except Exception as exc:
            raise StageError(f"generate:{name}", str(exc)) from exc
        try:
            proto = cfg.protocol.__class__(
                **{**cfg.protocol.__dict__, "seed": net_seed})
            result = run_ensemble(model, proto, cfg.n_nodes,
                                  t_end=cfg.t_end, h_out=cfg.h_out,
                                  workers=workers)
            (mdir / "sim_mean.csv").write_text(result.mean_trace().to_csv())
            (mdir / "sim_meta.json").write_text(
                json.dumps(result.sidecar(), indent=2) + "\n")
            files["sim_mean"] = f"{name}/sim_mean.csv"
        except NoOutbreaksError as exc:
            raise StageError(f"simulate:{name}", str(exc)) from exc
        manifest["models"][name] = files
        series.append({"file": files["sim_mean"], "role": "line",
                       "label": f"{name} simulation"})
        series.append({"file": files["ode_trace"], "role": "marker",
                       "label": f"{name} ODE"})
    figure_spec = {"series": series, "column": "I",
                   "x_label": "time",
                   "y_label": "infectious prevalence",
                   "marker_every": 25,
                   "output": "figure.png"}
    (out / "figure_spec.json").write_text(
        json.dumps(figure_spec, indent=2) + "\n")
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def cmd_experiment(args):
    cfg = _load(args.config, preset_ok=True)
    if args.seed is not None or args.n_nodes:
        doc = dict(cfg.raw)
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.n_nodes:
            doc.setdefault("network", {})
            doc["network"] = {**doc.get("network", {}),
                              "n_nodes": args.n_nodes}
        from .config import parse_config
        cfg = parse_config(doc)
    _run_experiment(cfg, Path(args.output_dir), args.workers)
    print(f"experiment complete; artifacts in {args.output_dir}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hcmsir",
        description="Networks from subgraph compositions: generation, "
                    "mean-field ODE compilation, stochastic simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n_nodes=True):
        sp.add_argument("-c", "--config", help="experiment config JSON")
        sp.add_argument("-o", "--output-dir", default=".",
                        help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        if n_nodes:
            sp.add_argument("-N", "--n-nodes", type=int, default=None)

    sp = sub.add_parser("generate", help="sample a network, write edge list")
    common(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("metrics", help="measure an edge-list file")
    sp.add_argument("edgelist")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("compile", help="dump the ODE system and Z matrices")
    common(sp, n_nodes=False)
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("solve", help="integrate the mean-field ODEs")
    common(sp, n_nodes=False)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="run a Gillespie ensemble")
    common(sp)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("mixture",
                        help="solve subgraph rates for metric targets")
    sp.add_argument("--subgraph", action="append", required=True,
                    help="library subgraph name (repeatable)")
    sp.add_argument("--mean-degree", type=float, required=True)
    sp.add_argument("--degree-variance", type=float, required=True)
    sp.add_argument("--triangles", type=float, required=True)
    sp.add_argument("--fix", action="append", metavar="ID=RATE")
    sp.set_defaults(func=cmd_mixture)

    sp = sub.add_parser(
        "experiment",
        help=f"run a preset ({', '.join(preset_names())}) or config file")
    sp.add_argument("config", help="preset name or config JSON path")
    sp.add_argument("-o", "--output-dir", default=".")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("-N", "--n-nodes", type=int, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, StageError, MixtureInfeasibleError,
            NoOutbreaksError, FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
