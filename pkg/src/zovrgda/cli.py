"""Command-line front end.

    zovrgda run --config exp.cfg [--seed N] [--algo NAME] [--profile P] [--budget Q] [--out PATH]
    zovrgda compare --target L a.csv b.csv ...

Config files are flat ``key = value`` lines; ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import warnings
from dataclasses import dataclass, fields
from importlib import resources
from typing import Dict, List, Optional

import numpy as np

from .baselines import BaselineParams, baseline_batches, zo_sgda_run, zo_sgdmsa_run
from .dro import DroInstance, load_libsvm, parse_libsvm, subsample_unbalanced
from .errors import InvalidArgument, OracleFailure, ParseError, UnsupportedDiagnostic
from .estimators import QueryCounter, SmoothingConfig
from .isarah import FULL_SUM, LARGE_BATCH, estimate_grad0, isarah_defaults, isarah_run
from .problems import QuadraticSaddle
from .trace import Evaluator, named_streams
from .vrgda import PRACTICAL, THEORY, vrgda_defaults, vrgda_run, with_overrides

CSV_HEADER = ["iter", "queries", "phi", "grad_phi_norm", "delta_t", "Delta_t"]
ALGORITHMS = ("zo-vrgda", "zo-isarah", "zo-sgda", "zo-sgdmsa")
BUILTIN_PREFIX = "builtin:"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    problem: str = "quadratic"
    algorithm: str = "zo-vrgda"
    profile: str = PRACTICAL
    eps: float = 0.1
    seed: int = 0
    query_budget: int = 10**6
    eval_every: int = 1
    output_path: str = "trace.csv"
    # quadratic saddle
    d1: int = 10
    d2: int = 10
    kappa: float = 5.0
    sigma: float = 0.1
    lipschitz: float = 1.0
    n: Optional[int] = None
    nonconvex: bool = True
    problem_seed: int = 0
    x0_scale: float = 1.0
    # dro
    dataset: str = BUILTIN_PREFIX + "mushrooms_like"
    minority_count: int = 10
    ratio: int = 4
    minority_label: int = 1
    reg_weight: float = 10.0
    # optional algorithm overrides (None keeps the profile value)
    phi_gap: float = 1.0
    max_batch: Optional[int] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    epoch_len: Optional[int] = None
    inner_len: Optional[int] = None
    snapshot_batch: Optional[int] = None
    snapshot_mode: Optional[str] = None
    batch_x: Optional[int] = None
    batch_y: Optional[int] = None
    outer_len: Optional[int] = None
    smoothing: Optional[float] = None
    y_init: str = "isarah"
    eta: float = 0.01
    kappa_pow3: float = 10.0
    msa_inner_len: int = 10
    batch_c: float = 0.1

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}")
        if self.query_budget <= 0:
            raise ConfigError("query_budget must be > 0")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {', '.join(ALGORITHMS)}")
        if self.profile not in (THEORY, PRACTICAL):
            raise ConfigError("profile must be theory or practical")
        if self.problem not in ("quadratic", "dro"):
            raise ConfigError("problem must be quadratic or dro")
        if self.y_init not in ("isarah", "centroid"):
            raise ConfigError("y_init must be isarah or centroid")
        if self.snapshot_mode not in (None, LARGE_BATCH, FULL_SUM):
            raise ConfigError(f"snapshot_mode must be {LARGE_BATCH} or {FULL_SUM}")


def _convert(name, raw: str, typ):
    text = raw.strip()
    optional = "Optional" in str(typ)
    if optional and text.lower() in ("", "none"):
        return None
    base = str(typ).replace("Optional[", "").rstrip("]")
    try:
        if base == "bool":
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if base == "int":
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        if base == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {base}") from None
    return text


def parse_config(text: str, overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """Build a config from ``key = value`` text plus string overrides."""
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    values: Dict[str, object] = {}
    items = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        items.append((key.strip(), raw))
    items += list((overrides or {}).items())
    for key, raw in items:
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _convert(key, str(raw), types[key])
    try:
        return ExperimentConfig(**values)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None


def build_problem(cfg: ExperimentConfig):
    """Problem instance and starting point; both depend only on ``problem_seed``."""
    rng = np.random.default_rng(cfg.problem_seed)
    if cfg.problem == "quadratic":
        prob = QuadraticSaddle.random(cfg.d1, cfg.d2, cfg.kappa, cfg.sigma, rng, n=cfg.n,
                                      l=cfg.lipschitz, nonconvex=cfg.nonconvex)
        x0 = cfg.x0_scale * rng.standard_normal(cfg.d1) / math.sqrt(cfg.d1)
        return prob, x0
    if cfg.dataset.startswith(BUILTIN_PREFIX):
        name = cfg.dataset[len(BUILTIN_PREFIX):] + ".libsvm"
        try:
            text = resources.files("zovrgda").joinpath("data", name).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"no builtin dataset {name}") from None
        ds = parse_libsvm(text)
    else:
        try:
            ds = load_libsvm(cfg.dataset)
        except OSError as exc:
            raise ConfigError(f"cannot read dataset: {exc}") from None
    ds = subsample_unbalanced(ds, cfg.minority_count, cfg.ratio, rng, cfg.minority_label)
    inst = DroInstance(ds, cfg.reg_weight)
    return inst, np.zeros(inst.d1)


def _smoothing(cfg, default: SmoothingConfig) -> SmoothingConfig:
    if cfg.smoothing is None:
        return default
    r = cfg.smoothing
    return SmoothingConfig(mu1=r, mu2=r, tau=r, delta=r)


def vrgda_params(cfg: ExperimentConfig, problem):
    params = vrgda_defaults(problem.lipschitz_l, problem.strong_concavity_mu, problem.variance_sigma,
                            problem.d1, problem.d2, cfg.eps, cfg.phi_gap, cfg.profile,
                            n=problem.n, max_batch=cfg.max_batch)
    params = with_overrides(params, alpha=cfg.alpha, beta=cfg.beta, epoch_len=cfg.epoch_len,
                            inner_len=cfg.inner_len, snapshot_batch=cfg.snapshot_batch,
                            snapshot_mode=cfg.snapshot_mode, batch_x=cfg.batch_x,
                            batch_y=cfg.batch_y, outer_len=cfg.outer_len)
    return with_overrides(params, smoothing=_smoothing(cfg, params.smoothing))


def baseline_params(cfg: ExperimentConfig, problem) -> BaselineParams:
    """Baseline batches are always batch_c * d / eps^2; batch_x/batch_y only size ZO-VRGDA."""
    bx, by = baseline_batches(problem.d1, problem.d2, cfg.eps, cfg.batch_c)
    default = SmoothingConfig(mu1=1e-4, mu2=1e-4, tau=1e-4, delta=1e-4)
    return BaselineParams(
        eta=cfg.eta,
        batch_x=bx,
        batch_y=by,
        smoothing=_smoothing(cfg, default),
        outer_len=cfg.outer_len or 10**9,
        kappa_pow3=cfg.kappa_pow3,
        msa_inner_len=cfg.msa_inner_len,
    )


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


class CsvTrace:
    """Append-only CSV writer flushed after every row."""

    def __init__(self, path):
        self.fh = open(path, "w", encoding="utf-8", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(CSV_HEADER)
        self.fh.flush()

    def row(self, t, queries, phi=None, grad_phi_norm=None, delta_t=None, Delta_t=None):
        self.writer.writerow([t, queries, _fmt(phi), _fmt(grad_phi_norm), _fmt(delta_t), _fmt(Delta_t)])
        self.fh.flush()

    def record(self, rec):
        self.row(rec.t, rec.queries, rec.phi, rec.grad_phi_norm, rec.delta_t, rec.Delta_t)

    def close(self):
        self.fh.close()


def _run_isarah(cfg, problem, x0, out: CsvTrace):
    """ZO-iSARAH on w -> -F(x0, w); rows report ||grad_y f(x0, y_t)||^2 as delta_t."""
    streams = named_streams(cfg.seed)
    objective = problem.inner_objective(x0)
    counter = QueryCounter()
    l_y = max(problem.y_lipschitz, problem.strong_concavity_mu)
    mode = cfg.snapshot_mode or (FULL_SUM if problem.n is not None and cfg.profile == THEORY else LARGE_BATCH)
    eps = cfg.eps
    probe = isarah_defaults(l_y, problem.strong_concavity_mu, problem.variance_sigma, problem.d2, eps, 1.0, mode)
    w0 = problem.default_y0()
    g0 = estimate_grad0(objective, w0, probe.delta, probe.snapshot_batch, streams["init"], counter,
                        mode == FULL_SUM)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = isarah_defaults(l_y, problem.strong_concavity_mu, problem.variance_sigma,
                                 problem.d2, eps, max(g0, 1e-300), mode)
    per_outer = params.queries_per_outer(problem.d2, problem.n)
    affordable = (cfg.query_budget - counter.total) // per_outer
    if cfg.outer_len is not None:
        affordable = min(affordable, cfg.outer_len)
    if affordable < 1:
        return
    params.outer_len = int(min(params.outer_len, affordable))
    g = objective.true_grad(w0) if objective.has_true_grad else None
    out.row(0, counter.total, delta_t=None if g is None else float(g @ g))
    result = isarah_run(objective, w0, params, streams["inner"], counter)
    for t, grad_sq, queries in result.trace:
        out.row(t, queries, delta_t=grad_sq)


def run_experiment(cfg: ExperimentConfig) -> int:
    problem, x0 = build_problem(cfg)
    out = CsvTrace(cfg.output_path)
    evaluator = Evaluator(problem, cfg.eval_every, on_record=out.record)
    trace = None
    try:
        if cfg.algorithm == "zo-isarah":
            _run_isarah(cfg, problem, x0, out)
            return EXIT_OK
        if cfg.algorithm == "zo-vrgda":
            params = vrgda_params(cfg, problem)
            y0 = problem.default_y0() if cfg.y_init == "centroid" else None
            trace = vrgda_run(problem, x0, params, cfg.seed, evaluator, y0=y0,
                              query_budget=cfg.query_budget)
        else:
            run = zo_sgda_run if cfg.algorithm == "zo-sgda" else zo_sgdmsa_run
            trace = run(problem, x0, baseline_params(cfg, problem), cfg.seed,
                        evaluator=evaluator, query_budget=cfg.query_budget)
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    finally:
        out.close()
        with open(cfg.output_path + ".eval_queries", "w", encoding="utf-8") as fh:
            fh.write(f"{evaluator.eval_queries}\n")
    if trace is not None and not trace.records:
        print("warning: budget exhausted before the first iteration", file=sys.stderr)
    return EXIT_OK


def read_trace(path) -> List[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(CSV_HEADER)}")
        rows = []
        for line in reader:
            if len(line) != len(CSV_HEADER):
                raise ConfigError(f"{path}: row with {len(line)} fields")
            rows.append({k: (v if v != "" else None) for k, v in zip(CSV_HEADER, line)})
        return rows


def queries_to_target(rows: List[dict], target: float) -> Optional[int]:
    for row in rows:
        if row["phi"] is not None and float(row["phi"]) <= target:
            return int(row["queries"])
    return None


def compare(paths: List[str], target: float) -> List[tuple]:
    return [(p, queries_to_target(read_trace(p), target)) for p in paths]


def _overrides(args) -> Dict[str, str]:
    mapping = {"seed": "seed", "algo": "algorithm", "profile": "profile",
               "budget": "query_budget", "out": "output_path"}
    result = {}
    for attr, key in mapping.items():
        value = getattr(args, attr)
        if value is not None:
            result[key] = str(value)
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        result[key.strip()] = value
    return result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zovrgda")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write a CSV trace")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--algo", choices=ALGORITHMS)
    run.add_argument("--profile", choices=(THEORY, PRACTICAL))
    run.add_argument("--budget", type=int)
    run.add_argument("--out")
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    cmp_ = sub.add_parser("compare", help="queries needed to reach a target loss")
    cmp_.add_argument("--target", type=float, required=True)
    cmp_.add_argument("files", nargs="+")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            cfg = parse_config(text, _overrides(args))
            return run_experiment(cfg)
        width = max(len(p) for p in args.files)
        for path, q in compare(args.files, args.target):
            print(f"{path:<{width}}  {q if q is not None else 'not reached'}")
        return EXIT_OK
    except (ConfigError, InvalidArgument, ParseError, UnsupportedDiagnostic) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
