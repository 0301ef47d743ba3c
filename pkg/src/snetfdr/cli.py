"""Command-line entry point.

Exit status: 0 on success, 2 on a configuration error, 3 on a numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as E
from .config import ConfigError, load_config, override
from .distributions import parse_density
from .experiments import ExperimentConfig, NumericFailure
from .metrics import default_jobs
from .transform import DomainTransform, ProfileError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

CSV_NOTE = """\
CSV output (comma separated, header row, LF line endings):
  simulate        trials.csv      {trials}
                  aggregate.csv   {aggregate}
                  map_trial0.csv  x,y,label,observation,selected
  transform-dump  transform.csv   breakpoint,fhat
  sweep           sweep.csv       {sweep}
  reproduce       fig2.csv        sparsity,procedure,mean_errors,stderr_errors,trials
                  fig10.csv       sparsity,procedure,mean_power,stderr_power,mean_fdp,stderr_fdp,trials
                  fig11.csv       sparsity,procedure,mean_detections,stderr_detections,mean_power,mean_fdp,mean_messages,trials
                  fig12.csv/fig13.csv
                                  figure,procedure,budget,grid,objects,trials,mean_detections,mean_true_detections,
                                  frac_trials_detecting,mean_fdp,pooled_fdp,mean_messages,mean_m1
                  figNN_field.csv x,y,label,observation
                  figNN_<proc>_budget<B>.csv  x,y,label,observation,selected
""".format(
    trials=",".join(E.TRIAL_COLUMNS), aggregate=",".join(E.AGGREGATE_COLUMNS), sweep=",".join(E.SWEEP_COLUMNS)
)


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="snetfdr",
        description="FDR-controlled detection in simulated sensor fields.",
        epilog=CSV_NOTE,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=True):
        sp.add_argument("--gamma", type=float, help="FDR level in (0, 1)")
        if trials:
            sp.add_argument("--trials", type=_positive_int)
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--jobs", type=_positive_int, default=None, help="worker processes (default: all cores)")

    s = sub.add_parser("simulate", help="run one configured experiment", epilog=CSV_NOTE,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--config", help="INI file with [scenario] and [experiment] sections")
    s.add_argument("--procedure", choices=E.PROCEDURES)
    s.add_argument("--budget", type=int)
    s.add_argument("--k-preset", type=int)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--scale", type=float, help="shrink the field to round(100*sqrt(scale)) per side")
    common(s)

    t = sub.add_parser("transform-dump", help="tabulate the level-set transform of an alternative")
    t.add_argument("--alternative", default="triangular(0,0.5,1)", help="alternative density (p-domain unless --null)")
    t.add_argument("--null", help="null observation density; then the alternative is an observation law")
    t.add_argument("--resolution", type=int)
    t.add_argument("--out", default="out")

    w = sub.add_parser("sweep", help="FDR of adjusted-level DTBH over an epsilon grid")
    w.add_argument("--epsilons", default="0,0.05,0.1,0.2,0.3")
    w.add_argument("--shape", choices=("smooth", "extremal"), default="extremal")
    common(w)

    r = sub.add_parser("reproduce", help="emit the data behind one figure")
    r.add_argument("figure", choices=E.FIGURES)
    r.add_argument("--scale", type=float, default=1.0)
    r.add_argument("--budget", type=int, help="single budget for fig12/fig13 (default: scaled 150 and 200)")
    r.add_argument("--k-preset", type=int, help="preset rounds for fig11 (default 0)")
    common(r)
    return p


def _simulate(a) -> dict:
    cfg = load_config(a.config) if a.config else ExperimentConfig()
    sc = cfg.scenario
    if a.scale is not None:
        if not 0 < a.scale <= 1:
            raise ConfigError("--scale must lie in (0, 1]")
        side = max(10, round(100 * a.scale**0.5))
        from dataclasses import replace

        sc = replace(sc, grid_width=side, grid_height=side, num_objects=max(1, round(sc.num_objects * a.scale)),
                     object_positions=None)
    cfg = override(cfg, scenario=sc, procedure=a.procedure, gamma=a.gamma, trials=a.trials, master_seed=a.seed,
                   budget=a.budget, k_preset=a.k_preset, epsilon=a.epsilon, output_path=a.out,
                   jobs=a.jobs)
    summary = E.run_experiment(cfg)
    print(",".join(E.AGGREGATE_COLUMNS))
    print(",".join(str(summary[k]) for k in E.AGGREGATE_COLUMNS))
    return summary


def _transform_dump(a) -> None:
    try:
        alt = parse_density(a.alternative)
        null = parse_density(a.null) if a.null else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if null is not None:
        T = E.cached_transform(null, alt, a.resolution)
    else:
        T = DomainTransform.build(alt, a.resolution)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    T.table.to_csv(out / "transform.csv")
    print(out / "transform.csv")


def _sweep(a) -> None:
    try:
        eps = [float(v) for v in a.epsilons.split(",")]
    except ValueError:
        raise ConfigError(f"bad --epsilons {a.epsilons!r}") from None
    kw = {k: v for k, v in (("gamma", a.gamma), ("trials", a.trials), ("seed", a.seed)) if v is not None}
    try:
        rows = E.epsilon_sweep(eps, shape=a.shape, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    E.write_rows(Path(a.out) / "sweep.csv", rows)
    _print_rows(rows)


def _reproduce(a) -> None:
    if not 0 < a.scale <= 1:
        raise ConfigError("--scale must lie in (0, 1]")
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = {} if a.seed is None else {"seed": a.seed}
    gamma = {} if a.gamma is None else {"gamma": a.gamma}
    fig = a.figure
    if fig in ("fig12", "fig13"):
        budgets = (a.budget,) if a.budget is not None else None
        rows = E.map_runs(fig, a.scale, trials=a.trials, budgets=budgets, out=out, **seed, **gamma)
    elif a.trials is not None or gamma or a.k_preset is not None:
        fn = {"fig2": E.fig2_curves, "fig10": E.fig10_curves, "fig11": E.fig11_curves}[fig]
        trials = a.trials or {"fig2": 10_000, "fig10": 10_000, "fig11": 1_000}[fig]
        extra = {"k_preset": a.k_preset} if fig == "fig11" and a.k_preset is not None else {}
        rows = fn(trials, **seed, **gamma, **extra)
    else:
        rows = E.reproduce(fig, a.scale, out, a.seed)
    E.write_rows(out / f"{fig}.csv", rows)
    _print_rows(rows)


def _print_rows(rows) -> None:
    if rows:
        print(",".join(rows[0]))
        for r in rows:
            print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in r.values()))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(a, "jobs", 1) is None:
        a.jobs = default_jobs()
    try:
        {"simulate": _simulate, "transform-dump": _transform_dump, "sweep": _sweep, "reproduce": _reproduce}[a.command](a)
    except (ConfigError, ProfileError) as exc:
        tag = "numeric failure" if isinstance(exc, ProfileError) else "config error"
        print(f"snetfdr: {tag}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc, ProfileError) else EXIT_CONFIG
    except (NumericFailure, ArithmeticError, FloatingPointError) as exc:
        print(f"snetfdr: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"snetfdr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
