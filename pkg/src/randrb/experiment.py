"""Config-driven experiment runner.

A config is a flat ``key = value`` text file with namespaced keys::

    problem.name = example2
    problem.mesh = 40
    rb.n_t = 15
    rb.k = 13
    rb.tol = 1e-8
    dist.rhs.kind = leverage
    dist.rhs.data = rhs
    dist.rhs.rank = 3
    dist.rhs.count = 10
    run.realizations = 200
    run.seed = 0
    run.out = out/example2
    baseline.pod.n_steps = 165

Every seed ``run.seed + k`` for ``k < run.realizations`` builds one basis,
evaluates its ROM against the full solution and writes its error report.
"""
from __future__ import annotations

import configparser
import csv
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .io import save_basis, write_singular_values
from .linalg import LinalgError
from .problems import builtin_problem
from .rbgen import RbParams, generate, pod_baseline
from .rom import evaluate
from .sampling import (build_data_matrix, leverage_score_dist, squared_norm_dist,
                       uniform_dist)
from .timestep import Discretization, solve_trajectory

QUANTILE_LEVELS = (("min", 0.0), ("5", 5.0), ("25", 25.0), ("50", 50.0), ("75", 75.0),
                   ("90", 90.0), ("95", 95.0), ("97", 97.0), ("98", 98.0), ("99", 99.0),
                   ("max", 100.0))
DIST_KINDS = ("uniform", "squared_norm", "leverage")
_SECTION = "config"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DistRecipe:
    label: str
    kind: str
    data: str = "rhs"
    rank: int = 1
    count: int = 0
    randomized: bool = False

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise ConfigError(f"dist.{self.label}.kind must be one of {DIST_KINDS}")
        if self.data not in ("rhs", "kappa"):
            raise ConfigError(f"dist.{self.label}.data must be 'rhs' or 'kappa'")
        if self.count < 0:
            raise ConfigError(f"dist.{self.label}.count must be nonnegative")


@dataclass(frozen=True)
class PodBaseline:
    n_steps: int
    tol: float = 1e-8
    window: Optional[tuple] = None


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    problem_params: dict = field(default_factory=dict)
    rb: RbParams = field(default_factory=RbParams)
    dists: tuple = ()
    realizations: int = 1
    seed: int = 0
    out: str = "out"
    threads: int = 1
    save_bases: bool = False
    pod: Optional[PodBaseline] = None

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigError("run.realizations must be at least 1")
        if self.threads < 1:
            raise ConfigError("run.threads must be at least 1")

    def seeds(self) -> list:
        return [self.seed + k for k in range(self.realizations)]


def _value(text: str):
    """Parse an int, float or bool literal; anything else stays a string."""
    low = text.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip()


def parse_config_text(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return {k: v for k, v in parser[_SECTION].items()}


def load_config(path) -> ExperimentConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text()))


def config_from_mapping(raw: dict) -> ExperimentConfig:
    raw = {k: _value(v) if isinstance(v, str) else v for k, v in raw.items()}
    known = {"problem", "rb", "dist", "run", "baseline"}
    for key in raw:
        if key.split(".", 1)[0] not in known or "." not in key:
            raise ConfigError(f"unknown or unnamespaced key {key!r}")
    if "problem.name" not in raw:
        raise ConfigError("problem.name is required")
    problem_params = {k[len("problem."):]: v for k, v in raw.items()
                      if k.startswith("problem.") and k != "problem.name"}

    rb_kw = {k[len("rb."):]: v for k, v in raw.items() if k.startswith("rb.")}
    fields = set(RbParams.__dataclass_fields__)
    bad = set(rb_kw) - fields
    if bad:
        raise ConfigError(f"unknown rb keys {sorted(bad)}")
    try:
        rb = RbParams(**rb_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    labels = {}
    for key, v in raw.items():
        if key.startswith("dist."):
            parts = key.split(".")
            if len(parts) != 3:
                raise ConfigError(f"dist keys look like dist.<label>.<field>, got {key!r}")
            labels.setdefault(parts[1], {})[parts[2]] = v
    dists = []
    for label in sorted(labels):
        spec = labels[label]
        if "kind" not in spec:
            raise ConfigError(f"dist.{label}.kind is required")
        try:
            dists.append(DistRecipe(label, **spec))
        except TypeError as exc:
            raise ConfigError(f"dist.{label}: {exc}") from exc

    pod = None
    if "baseline.pod.n_steps" in raw:
        window = raw.get("baseline.pod.window")
        if window is not None:
            window = tuple(float(x) for x in str(window).split(","))
            if len(window) != 2 or not window[0] < window[1]:
                raise ConfigError("baseline.pod.window must be 'a,b' with a < b")
        pod = PodBaseline(int(raw["baseline.pod.n_steps"]),
                          float(raw.get("baseline.pod.tol", rb.tol)), window)

    return ExperimentConfig(
        problem=str(raw["problem.name"]),
        problem_params=problem_params,
        rb=rb,
        dists=tuple(dists),
        realizations=int(raw.get("run.realizations", 1)),
        seed=int(raw.get("run.seed", 0)),
        out=str(raw.get("run.out", "out")),
        threads=int(raw.get("run.threads", 1)),
        save_bases=bool(raw.get("run.save_bases", False)),
        pod=pod,
    )


def build_distribution(disc: Discretization, recipe: DistRecipe, seed: int = 0):
    if recipe.kind == "uniform":
        return uniform_dist(disc.n_times)
    B = build_data_matrix(disc, recipe.data)
    if recipe.kind == "squared_norm":
        return squared_norm_dist(B)
    return leverage_score_dist(B, recipe.rank, randomized=recipe.randomized,
                               rng=np.random.default_rng([seed, 2]))


def nearest_rank(values, level: float) -> float:
    """Nearest-rank quantile: the ``ceil(level/100 * n)``-th smallest value
    (the minimum for ``level = 0``)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("no values")
    if not 0.0 <= level <= 100.0:
        raise ValueError("level must lie in [0, 100]")
    rank = max(1, math.ceil(level / 100.0 * v.size))
    return float(v[rank - 1])


def quantile_table(values) -> list:
    return [(name, nearest_rank(values, q)) for name, q in QUANTILE_LEVELS]


def write_quantiles(path, metric: str, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "level", "value"])
        for name, v in quantile_table(values):
            w.writerow([metric, name, f"{v:.17g}"])


# state shared with forked workers
_STATE: dict = {}


def _run_seed(seed: int):
    disc, full, cfg, dists = (_STATE[k] for k in ("disc", "full", "cfg", "dists"))
    params = RbParams(**{**asdict(cfg.rb), "seed": seed})
    try:
        basis = generate(disc, params, dists)
        report = evaluate(disc, basis.U, full)
    except (LinalgError, ArithmeticError, ValueError, RuntimeError) as exc:
        return seed, None, None, f"{type(exc).__name__}: {exc}"
    return seed, basis, report, None


@dataclass
class RunResult:
    out: Path
    seeds: list
    failed: dict
    rel_l2h1: dict
    dims: dict


def run_experiment(cfg: ExperimentConfig, log=None) -> RunResult:
    """Run all seeds of ``cfg`` and write the output files into ``cfg.out``."""
    log = log or (lambda msg: None)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = builtin_problem(cfg.problem, **cfg.problem_params)
    disc = Discretization(problem)
    full = solve_trajectory(disc, 0, problem.n_times - 1, disc.u0)
    dists = [(build_distribution(disc, r, cfg.seed), r.count) for r in cfg.dists]
    for recipe, (dist, _) in zip(cfg.dists, dists):
        dist.to_csv(out / f"dist_{recipe.label}.csv")
    _STATE.update(disc=disc, full=full, cfg=cfg, dists=dists)

    seeds = cfg.seeds()
    if cfg.threads > 1 and len(seeds) > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(cfg.threads, mp_context=ctx) as pool:
            results = list(pool.map(_run_seed, seeds))
    else:
        results = [_run_seed(s) for s in seeds]

    times = problem.times
    failed, errs, dims, l2t, steps = {}, {}, {}, {}, {}
    for seed, basis, report, err in results:
        if err is not None:
            failed[seed] = err
            log(f"seed {seed} failed: {err}")
            continue
        errs[seed], dims[seed], l2t[seed] = report.rel_l2h1, report.dim, report.rel_l2t
        steps[seed] = (len(basis.windows), basis.n_steps)
        report.to_csv(out / f"errors_seed{seed}.csv", times)
        write_singular_values(out / f"singular_values_seed{seed}.csv", basis.singular_values)
        if cfg.save_bases:
            save_basis(out / f"basis_seed{seed}.bin", basis, sidecar=False)

    if errs:
        write_quantiles(out / "quantiles_rel_l2h1.csv", "rel_l2h1", list(errs.values()))
        write_quantiles(out / "quantiles_dim.csv", "dim", list(dims.values()))

    pod_summary = None
    if cfg.pod is not None:
        pod_summary = _pod_comparison(out, disc, full, cfg.pod, l2t, times)

    _write_manifest(out / "manifest.txt", cfg, problem, disc, seeds, failed, steps, pod_summary)
    log(f"{len(errs)} of {len(seeds)} seeds succeeded; outputs in {out}")
    return RunResult(out, seeds, failed, errs, dims)


def _pod_comparison(out, disc, full, pod_cfg, l2t, times):
    pod = pod_baseline(disc, pod_cfg.n_steps, pod_cfg.tol)
    report = evaluate(disc, pod.U, full)
    write_singular_values(out / "singular_values_pod.csv", pod.singular_values)
    stack = np.array([l2t[s] for s in sorted(l2t)]) if l2t else None
    with open(out / "pod_comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_index", "time", "pod_rel_l2t", "rand_q5", "rand_q50", "rand_q95"])
        for l, t in enumerate(times):
            row = [l, f"{t:.17g}", f"{report.rel_l2t[l]:.17g}"]
            if stack is not None and np.all(np.isfinite(stack[:, l])):
                row += [f"{nearest_rank(stack[:, l], q):.17g}" for q in (5.0, 50.0, 95.0)]
            else:
                row += ["nan"] * 3
            w.writerow(row)
    summary = {"pod_dim": report.dim, "pod_rel_l2h1": report.rel_l2h1}
    if pod_cfg.window is not None and stack is not None:
        a, b = pod_cfg.window
        sel = (times > a) & (times < b)
        pod_mean = float(np.nanmean(report.rel_l2t[sel]))
        rand_med = nearest_rank(np.nanmean(stack[:, sel], axis=1), 50.0)
        summary.update(window=f"{a:g},{b:g}", pod_window_mean=pod_mean,
                       rand_window_mean_median=rand_med)
    return summary


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_manifest(path, cfg, problem, disc, seeds, failed, steps, pod_summary):
    lines = ["# randrb run manifest", f"kernel_backend = {kernels.BACKEND}",
             f"problem.name = {cfg.problem}"]
    lines += [f"problem.{k} = {_fmt(v)}" for k, v in sorted(cfg.problem_params.items())]
    lines += [f"problem.n_dofs = {disc.n_dofs}", f"problem.n_times = {problem.n_times}",
              f"problem.T = {_fmt(float(problem.T))}"]
    lines += [f"rb.{k} = {_fmt(v)}" for k, v in asdict(cfg.rb).items() if k != "seed"]
    for r in cfg.dists:
        lines += [f"dist.{r.label}.{k} = {_fmt(v)}" for k, v in asdict(r).items() if k != "label"]
    lines += [f"run.realizations = {cfg.realizations}", f"run.seed = {cfg.seed}",
              f"run.threads = {cfg.threads}"]
    if cfg.pod is not None:
        lines += [f"baseline.pod.n_steps = {cfg.pod.n_steps}",
                  f"baseline.pod.tol = {_fmt(cfg.pod.tol)}"]
        if cfg.pod.window is not None:
            lines.append("baseline.pod.window = " + ",".join(f"{x:g}" for x in cfg.pod.window))
        for k, v in (pod_summary or {}).items():
            lines.append(f"result.pod.{k} = {_fmt(v)}")
    lines.append("# seed,status,windows,steps")
    for s in seeds:
        if s in failed:
            lines.append(f"seed {s},failed,{failed[s]}")
        else:
            w, n = steps[s]
            lines.append(f"seed {s},ok,{w},{n}")
    Path(path).write_text("\n".join(lines) + "\n")


def export_distribution(cfg: ExperimentConfig, kind: str, path=None, data: str = "rhs",
                        rank: int = 1):
    """Build the distribution named by a config label or a kind and write it
    as CSV to ``path`` (or return the CSV text when ``path`` is None)."""
    problem = builtin_problem(cfg.problem, **cfg.problem_params)
    disc = Discretization(problem)
    recipe = next((r for r in cfg.dists if r.label == kind), None)
    if recipe is None:
        recipe = DistRecipe(kind, kind, data=data, rank=rank)
    dist = build_distribution(disc, recipe, cfg.seed)
    if path is not None:
        dist.to_csv(path)
        return None
    rows = ["time_index,probability"] + [f"{i},{p:.17g}" for i, p in enumerate(dist.p)]
    return "\n".join(rows) + "\n"
