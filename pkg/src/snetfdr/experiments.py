"""Experiment harness: scenario trials, aggregate CSVs and figure recipes."""

from __future__ import annotations

import csv
import functools
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .distributions import DensityModel, Gaussian, PValueLaw
from .metrics import (
    ConfusionCounts,
    MonteCarloSummary,
    TrialOutcome,
    monte_carlo_estimate,
    tally,
)
from .procedures import bayes_oracle_select, bh_cutoff_batch, bh_select, dtbh_select, uncorrected_select
from .protocol import ProtocolConfig, run_distributed, run_dynamic
from .pvalues import PValueVector, survival_pvalue
from .robustness import adjusted_level
from .snet import FieldRealization, Scenario, Sensing, simulate
from .transform import DomainTransform

PROCEDURES = ("bh", "dtbh", "uncorrected", "oracle", "distributed", "distributed_dynamic")

AGGREGATE_COLUMNS = ["procedure", "gamma", "m", "m1", "trials", "mean_fdp", "stderr_fdp", "mean_power", "mean_messages"]
TRIAL_COLUMNS = ["trial", "m", "m0", "m1", "R", "V", "S", "T", "U", "fdp", "power", "messages"]


class NumericFailure(RuntimeError):
    """A quadrature or table construction produced unusable values."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    procedure: str = "dtbh"
    gamma: float = 0.15
    epsilon: float | None = None
    k_preset: int = 0
    budget: int | None = None
    transform: bool = True  # distributed procedures: transform p-values first
    trials: int = 1
    master_seed: int = 0
    output_path: str = "out"
    jobs: int = 1

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise ValueError(f"procedure must be one of {', '.join(PROCEDURES)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")

    @property
    def level(self) -> float:
        return self.gamma if self.epsilon is None else adjusted_level(self.gamma, self.epsilon)


@functools.lru_cache(maxsize=32)
def cached_transform(null: DensityModel, alternative: DensityModel, resolution: int | None = None) -> DomainTransform:
    """Level-set transform for survival p-values of ``null`` against ``alternative``."""
    t = DomainTransform.build(PValueLaw(null, alternative), resolution)
    if not np.all(np.isfinite(t.table.cdf)) or abs(t.table.cdf[-1] - 1) > 1e-6:
        raise NumericFailure("transform table does not integrate to one")
    return t


def scenario_transform(scenario: Scenario) -> DomainTransform:
    return cached_transform(scenario.null_noise, scenario.nominal_alternative())


def trial_rngs(master_seed: int, trial: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(field stream, transform-randomisation stream) for one trial."""
    a, b = np.random.SeedSequence([master_seed, trial]).spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def select_on_field(config: ExperimentConfig, fld: FieldRealization, rng_t: np.random.Generator):
    """Run the configured procedure on one realisation; returns (selected ids, messages)."""
    sc = config.scenario
    ids = np.arange(fld.labels.size)
    p = PValueVector(survival_pvalue(sc.null_noise, fld.observations), ids)
    proc, level = config.procedure, config.level
    if proc == "bh":
        return bh_select(p, level).selected, 0
    if proc == "dtbh":
        return dtbh_select(p, scenario_transform(sc), level, rng_t).selected, 0
    if proc == "uncorrected":
        return uncorrected_select(p, level).selected, 0
    if proc == "oracle":
        prior = min(max(fld.m1 / fld.labels.size, 1e-9), 1 - 1e-9)
        return bayes_oracle_select(fld.observations, sc.null_noise, sc.nominal_alternative(), prior).selected, 0
    if config.transform:
        p = PValueVector(scenario_transform(sc)(p.values, rng_t), ids)
    pc = ProtocolConfig(level, config.k_preset, config.budget, dynamic=proc == "distributed_dynamic")
    runner = run_dynamic if pc.dynamic else run_distributed
    sel, trace = runner(p, pc)
    return sel, trace.messages


def run_trial(config: ExperimentConfig, trial: int):
    rng_f, rng_t = trial_rngs(config.master_seed, trial)
    fld = simulate(config.scenario, rng_f)
    sel, msgs = select_on_field(config, fld, rng_t)
    return TrialOutcome(tally(fld.labels, sel), msgs), fld, sel


def _outcome_only(config: ExperimentConfig, trial: int) -> TrialOutcome:
    return run_trial(config, trial)[0]


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_detection_map(path: Path, fld: FieldRealization, selected) -> None:
    flags = np.zeros(fld.labels.size, dtype=int)
    flags[np.asarray(selected, dtype=int)] = 1
    rows = [(int(x), int(y), int(lab), float(obs), int(f)) for (x, y), lab, obs, f in zip(fld.coords, fld.labels, fld.observations, flags)]
    _write_csv(path, ["x", "y", "label", "observation", "selected"], rows)


def _trial_row(t: int, o: TrialOutcome):
    c = o.counts
    pw = c.S / c.m1 if c.m1 else float("nan")
    return [t, c.m, c.m0, c.m1, c.R, c.V, c.S, c.T, c.U, (c.V / c.R if c.R else 0.0), pw, o.messages]


def run_experiment(config: ExperimentConfig) -> dict:
    """Run ``config.trials`` realisations; write per-trial, aggregate and first-trial map CSVs."""
    out = Path(config.output_path)
    outcomes = []
    first = None
    if config.jobs > 1 and config.trials > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(functools.partial(_outcome_only, config), range(config.trials)))
        _, fld, sel = run_trial(config, 0)
        first = (fld, sel)
    else:
        for t in range(config.trials):
            o, fld, sel = run_trial(config, t)
            outcomes.append(o)
            if t == 0:
                first = (fld, sel)
    rows = [_trial_row(t, o) for t, o in enumerate(outcomes)]
    _write_csv(out / "trials.csv", TRIAL_COLUMNS, rows)
    fdps = np.array([r[9] for r in rows], dtype=float)
    pws = np.array([r[10] for r in rows], dtype=float)
    n = len(rows)
    summary = {
        "procedure": config.procedure,
        "gamma": config.level,
        "m": config.scenario.m,
        "m1": float(np.mean([r[3] for r in rows])),
        "trials": n,
        "mean_fdp": float(fdps.mean()),
        "stderr_fdp": float(fdps.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "mean_power": float(np.nanmean(pws)) if np.any(~np.isnan(pws)) else float("nan"),
        "mean_messages": float(np.mean([r[11] for r in rows])),
    }
    _write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, [[summary[k] for k in AGGREGATE_COLUMNS]])
    write_detection_map(out / "map_trial0.csv", *first)
    return summary


# ---------------------------------------------------------------------------
# Figure recipes
# ---------------------------------------------------------------------------

SPARSITY_GRID = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
FIG2_GAMMA = 0.2
FIG10_GAMMA = 0.1
FIG11_GAMMA = 0.05


def _scaled_trials(full: int, scale: float, floor: int = 50) -> int:
    return max(floor, int(round(full * scale)))


def _mixture_pvalues(rng, g0, g1, m, m1, trials):
    """(trials, m) observations with exactly m1 alternatives per row (the first m1 columns)."""
    y = np.empty((trials, m))
    y[:, :m1] = g1.sample(rng, trials * m1).reshape(trials, m1)
    y[:, m1:] = g0.sample(rng, trials * (m - m1)).reshape(trials, m - m1)
    return y


def _batch_counts(sel: np.ndarray, m1: int):
    S = sel[:, :m1].sum(1)
    V = sel[:, m1:].sum(1)
    return V, S


def _stats(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def fig2_curves(trials: int, seed: int = 2, m: int = 100, gamma: float = FIG2_GAMMA,
                uncorrected_level: float | None = None, grid=SPARSITY_GRID):
    """Average total errors (V + T) versus sparsity for four rules.

    ``knowledge_bh`` is BH after the level-set transform built from the known
    alternative; ``bh`` and ``uncorrected`` work on the raw survival p-values;
    ``oracle`` is the Bayes rule with the true prior.  The uncorrected rule
    tests every sensor at ``gamma`` unless ``uncorrected_level`` is given.
    """
    uncorrected_level = gamma if uncorrected_level is None else uncorrected_level
    g0, g1 = Gaussian(0, 1), Gaussian(0, 3)
    T = cached_transform(g0, g1)
    rows = []
    for k, frac in enumerate(grid):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        m1 = int(round(frac * m))
        y = _mixture_pvalues(rng, g0, g1, m, m1, trials)
        p = g0.sf(y.ravel()).reshape(y.shape)
        res = {}
        _, sel = bh_cutoff_batch(p, gamma)
        res["bh"] = sel
        tp = T(p.ravel(), rng).reshape(p.shape)
        _, sel = bh_cutoff_batch(tp, gamma)
        res["knowledge_bh"] = sel
        res["uncorrected"] = p <= uncorrected_level
        prior = m1 / m
        res["oracle"] = np.log(prior) + g1.logpdf(y.ravel()).reshape(y.shape) > np.log1p(-prior) + g0.logpdf(y.ravel()).reshape(y.shape)
        for name, sel in res.items():
            V, S = _batch_counts(sel, m1)
            err = V + (m1 - S)
            mean, se = _stats(err)
            rows.append({"sparsity": frac, "procedure": name, "mean_errors": mean, "stderr_errors": se, "trials": trials})
    return rows


def fig10_curves(trials: int, seed: int = 10, m: int = 100, gamma: float = FIG10_GAMMA, grid=SPARSITY_GRID,
                 g0: DensityModel | None = None, g1: DensityModel | None = None):
    """Detection power of BH and DTBH versus sparsity."""
    g0 = g0 or Gaussian(0, 1)
    g1 = g1 or Gaussian(0, 3)
    T = cached_transform(g0, g1)
    rows = []
    for k, frac in enumerate(grid):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        m1 = max(1, int(round(frac * m)))
        y = _mixture_pvalues(rng, g0, g1, m, m1, trials)
        p = g0.sf(y.ravel()).reshape(y.shape)
        for name, q in (("bh", p), ("dtbh", T(p.ravel(), rng).reshape(p.shape))):
            _, sel = bh_cutoff_batch(q, gamma)
            V, S = _batch_counts(sel, m1)
            R = V + S
            fd = np.where(R > 0, V / np.maximum(R, 1), 0.0)
            pw, pw_se = _stats(S / m1)
            f, f_se = _stats(fd)
            rows.append({"sparsity": frac, "procedure": name, "mean_power": pw, "stderr_power": pw_se,
                         "mean_fdp": f, "stderr_fdp": f_se, "trials": trials})
    return rows


def fig11_curves(trials: int, seed: int = 11, m: int = 100, gamma: float = FIG11_GAMMA, grid=SPARSITY_GRID,
                 k_preset: int = 0):
    """Static versus dynamic-threshold distributed DTBH on the narrow-alternative example."""
    g0, g1 = Gaussian(0, 1), Gaussian(0, 0.01)
    T = cached_transform(g0, g1)
    rows = []
    for k, frac in enumerate(grid):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        m1 = max(1, int(round(frac * m)))
        y = _mixture_pvalues(rng, g0, g1, m, m1, trials)
        tp = T(g0.sf(y.ravel()), rng).reshape(y.shape)
        for name, dyn in (("distributed", False), ("distributed_dynamic", True)):
            cfg = ProtocolConfig(gamma, k_preset=k_preset, dynamic=dyn)
            det, pw, fd, msg = [], [], [], []
            for row in tp:
                sel, trace = run_distributed(row, cfg)
                S = int(np.sum(sel < m1))
                V = sel.size - S
                det.append(sel.size)
                pw.append(S / m1)
                fd.append(V / sel.size if sel.size else 0.0)
                msg.append(trace.messages)
            md, md_se = _stats(det)
            rows.append({"sparsity": frac, "procedure": name, "mean_detections": md, "stderr_detections": md_se,
                         "mean_power": float(np.mean(pw)), "mean_fdp": float(np.mean(fd)),
                         "mean_messages": float(np.mean(msg)), "trials": trials})
    return rows


def map_scenario(figure: str, scale: float) -> Scenario:
    side = max(10, int(round(100 * math.sqrt(scale))))
    objects = max(1, int(round(10 * scale)))
    sensing = Sensing.IDEAL if figure == "fig12" else Sensing.NONIDEAL
    return Scenario(grid_width=side, grid_height=side, num_objects=objects, sensing=sensing)


def map_budgets(scenario: Scenario, full=(150, 200)) -> tuple[int, ...]:
    """Budgets scaled by the expected number of H1 sensors (proportional to the object count)."""
    return tuple(max(1, int(round(b * scenario.num_objects / 10))) for b in full)


def null_epsilon(scenario: Scenario, x_lo: float | None = None, grid: int = 512) -> float:
    """Band width of the non-ideal null p-value law over ``x >= x_lo`` (default gamma-free floor 1/m).

    The law is the survival p-value of ``xi + n`` with ``xi`` uniform on the
    offset range, computed by quadrature over ``xi``.
    """
    lo_xi, hi_xi = scenario.nonideal_xi_range
    x_lo = x_lo or 1.0 / scenario.m
    xs = np.geomspace(x_lo, 1.0, grid)
    xi = np.linspace(lo_xi, hi_xi, 201)
    g0 = scenario.null_noise
    y = g0.isf(xs)
    F = np.mean([g0.sf(y - s) for s in xi], axis=0)
    return float(np.max(np.abs(F - xs) / xs))


def map_runs(figure: str, scale: float = 1.0, trials: int | None = None, seed: int = 12, gamma: float = 0.15,
             budgets: tuple[int, ...] | None = None, out: Path | None = None):
    """Distributed BH and DTBH under message budgets on the field scenario.

    Every trial draws a fresh field; maps of trial 0 are written when ``out`` is
    given.  ``k_preset = m`` so that only the budget can stop a run early.
    """
    sc = map_scenario(figure, scale)
    budgets = budgets or map_budgets(sc)
    trials = trials or max(3, int(round(20 * scale)))
    T = scenario_transform(sc)
    rows = []
    stats = {(proc, b): [] for proc in ("bh", "dtbh") for b in budgets}
    for t in range(trials):
        rng_f, rng_t = trial_rngs(seed, t)
        fld = simulate(sc, rng_f)
        p = survival_pvalue(sc.null_noise, fld.observations)
        tp = T(p, rng_t)
        if out is not None and t == 0:
            fld.to_csv(out / f"{figure}_field.csv")
        for b in budgets:
            cfg = ProtocolConfig(gamma, k_preset=sc.m, budget=b)
            for proc, q in (("bh", p), ("dtbh", tp)):
                sel, trace = run_distributed(q, cfg)
                c = tally(fld.labels, sel)
                stats[(proc, b)].append((c, trace.messages))
                if out is not None and t == 0:
                    write_detection_map(out / f"{figure}_{proc}_budget{b}.csv", fld, sel)
    for (proc, b), lst in stats.items():
        det = np.array([c.R for c, _ in lst], dtype=float)
        tru = np.array([c.S for c, _ in lst], dtype=float)
        fd = np.array([c.V / c.R if c.R else 0.0 for c, _ in lst])
        msg = np.array([mm for _, mm in lst], dtype=float)
        rows.append({
            "figure": figure, "procedure": proc, "budget": b, "grid": sc.grid_width, "objects": sc.num_objects,
            "trials": len(lst), "mean_detections": float(det.mean()), "mean_true_detections": float(tru.mean()),
            "frac_trials_detecting": float(np.mean(det > 0)), "mean_fdp": float(fd.mean()),
            "pooled_fdp": float(sum(c.V for c, _ in lst) / max(1, sum(c.R for c, _ in lst))),
            "mean_messages": float(msg.mean()), "mean_m1": float(np.mean([c.m1 for c, _ in lst])),
        })
    return rows


def write_rows(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    header = list(rows[0].keys())
    _write_csv(path, header, [[r[k] for k in header] for r in rows])


FIGURES = ("fig2", "fig10", "fig11", "fig12", "fig13")


def reproduce(figure: str, scale: float = 1.0, out: str | os.PathLike = "out", seed: int | None = None) -> list[dict]:
    """Emit the data behind one figure as CSV under ``out``; returns the summary rows."""
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    if not 0 < scale <= 1:
        raise ValueError("scale must lie in (0, 1]")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    kw = {} if seed is None else {"seed": seed}
    if figure == "fig2":
        rows = fig2_curves(_scaled_trials(10_000, scale), **kw)
    elif figure == "fig10":
        rows = fig10_curves(_scaled_trials(10_000, scale), **kw)
    elif figure == "fig11":
        rows = fig11_curves(_scaled_trials(1_000, scale), **kw)
    else:
        rows = map_runs(figure, scale, out=out, **kw)
    write_rows(out / f"{figure}.csv", rows)
    return rows


# ---------------------------------------------------------------------------
# Robustness sweep
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ["epsilon", "gamma_adjusted", "empirical_fdr", "detections"]


def epsilon_sweep(epsilons, gamma: float = 0.1, trials: int = 2000, seed: int = 4, m: int = 100, m1: int = 20,
                  shape: str = "extremal", alternative: DensityModel | None = None) -> list[dict]:
    """DTBH at the adjusted level with nulls from an epsilon-family.

    Null p-values come from the family; alternative p-values from
    ``alternative`` (default: triangular peaked at 1/2).  The level-set map of
    the alternative is applied to all p-values before the step-up rule.
    """
    from .distributions import Triangular
    from .robustness import EpsilonFamily

    alt = alternative or Triangular(0.0, 0.5, 1.0)
    T = DomainTransform.build(alt)
    rows = []
    for k, eps in enumerate(epsilons):
        fam = EpsilonFamily(float(eps), shape)
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        p = np.empty((trials, m))
        p[:, :m1] = alt.sample(rng, trials * m1).reshape(trials, m1)
        p[:, m1:] = fam.sample(rng, trials * (m - m1)).reshape(trials, m - m1)
        tp = T(p.ravel(), rng).reshape(p.shape)
        g2 = adjusted_level(gamma, float(eps))
        _, sel = bh_cutoff_batch(tp, g2)
        V, S = _batch_counts(sel, m1)
        R = V + S
        fd = np.where(R > 0, V / np.maximum(R, 1), 0.0)
        rows.append({"epsilon": float(eps), "gamma_adjusted": g2, "empirical_fdr": float(fd.mean()),
                     "detections": float(R.mean())})
    return rows
