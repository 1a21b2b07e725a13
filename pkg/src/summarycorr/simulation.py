"""Monte Carlo harness: summary-level data generation, scenario grids, metrics.

Each replicate draws from its own random stream derived from
``(scenario.base_seed, replicate_index)``, so replicates can be computed in
any order or in parallel and still aggregate to bit-identical results.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy
from scipy import stats

from . import __version__
from .baselines import delta_metric, naive_pearson, weighted_pearson
from .errors import DegenerateInputError, DomainError, SummaryCorrError
from .estimator import estimate_full, profile_likelihood
from .model import MIN_STUDY_SIZE, PooledParams, StudySummary
from .special import one_sided_t_test_mean_lt_zero

__all__ = [
    "DEFAULT_SEED",
    "Scenario",
    "ReplicateRecord",
    "ScenarioResult",
    "replicate_rng",
    "generate_study",
    "generate_studies",
    "run_replicate",
    "summarize",
    "run_scenario",
    "run_grid",
    "paper_scenario_grid",
    "write_replicate_csv",
    "write_aggregate_csv",
    "write_metadata",
    "REPLICATE_COLUMNS",
    "AGGREGATE_COLUMNS",
]

DEFAULT_SEED = 20240601

SMALL_N = (100, 200)
LARGE_N = (800, 1000)
EXTREME_N = (2000, 5000)
PAPER_K = (10, 20, 30, 40, 50)


@dataclass(frozen=True)
class Scenario:
    """One simulation cell."""

    rho_true: float
    k: int
    n_min: int
    n_max: int
    mu_x: float = 0.0
    mu_y: float = 0.0
    sigma_x: float = 1.0
    sigma_y: float = 1.0
    replicates: int = 1000
    base_seed: int = DEFAULT_SEED
    alpha: float = 0.05
    label: str = ""

    def __post_init__(self):
        if not MIN_STUDY_SIZE <= self.n_min <= self.n_max:
            raise DomainError(f"need {MIN_STUDY_SIZE} <= n_min <= n_max, got {self.n_min}, {self.n_max}")
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")
        if self.replicates < 1:
            raise DomainError(f"replicates must be >= 1, got {self.replicates}")
        if not -1.0 < self.rho_true < 1.0:
            raise DomainError(f"rho_true must lie in (-1, 1), got {self.rho_true}")
        if not 0 <= self.base_seed < 2**64:
            raise DomainError("base_seed must be an unsigned 64-bit integer")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        PooledParams(self.mu_x, self.mu_y, self.sigma_x, self.sigma_y, self.rho_true)

    @property
    def scenario_id(self) -> str:
        return self.label or f"rho{self.rho_true:g}_k{self.k}_n{self.n_min}-{self.n_max}"

    @property
    def params(self) -> PooledParams:
        return PooledParams(self.mu_x, self.mu_y, self.sigma_x, self.sigma_y, self.rho_true)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**data)


def replicate_rng(base_seed: int, replicate_index: int) -> np.random.Generator:
    """Independent PCG64 stream for one replicate."""
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(replicate_index),))
    return np.random.default_rng(seq)


def _summaries(sizes: np.ndarray, params: PooledParams, rng: np.random.Generator) -> list[StudySummary]:
    # one contiguous draw; study i consumes the next 2 n_i standard normals,
    # first its n_i X-innovations then its n_i Y-innovations
    sizes = np.asarray(sizes, dtype=np.int64)
    if np.any(sizes < MIN_STUDY_SIZE):
        raise DomainError(f"study sizes must be >= {MIN_STUDY_SIZE}")
    z = rng.standard_normal(2 * int(sizes.sum()))
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    idx = np.arange(sizes.sum()) + np.repeat(offsets, sizes)
    z1, z2 = z[idx], z[idx + np.repeat(sizes, sizes)]
    # lower-triangular factor of Σ: [[σx, 0], [ρσy, σy√(1-ρ²)]]
    x = params.mu_x + params.sigma_x * z1
    y = params.mu_y + params.sigma_y * (params.rho * z1 + math.sqrt(1.0 - params.rho**2) * z2)
    mean_x = np.add.reduceat(x, offsets) / sizes
    mean_y = np.add.reduceat(y, offsets) / sizes
    var_x = np.add.reduceat((x - np.repeat(mean_x, sizes)) ** 2, offsets) / (sizes - 1)
    var_y = np.add.reduceat((y - np.repeat(mean_y, sizes)) ** 2, offsets) / (sizes - 1)
    return [
        StudySummary(int(n), float(a), float(b), float(c), float(d))
        for n, a, b, c, d in zip(sizes, mean_x, mean_y, var_x, var_y)
    ]


def generate_study(n: int, params: PooledParams, rng: np.random.Generator) -> StudySummary:
    """Draw ``n`` bivariate normal pairs and return their sample means and
    unbiased sample variances."""
    return _summaries(np.array([n]), params, rng)[0]


def generate_studies(
    k: int, n_min: int, n_max: int, params: PooledParams, rng: np.random.Generator
) -> list[StudySummary]:
    """``k`` studies with sizes drawn from DiscUnif{n_min, ..., n_max}.

    Equivalent to drawing the sizes and then calling :func:`generate_study`
    ``k`` times on the same generator.
    """
    sizes = rng.integers(n_min, n_max, size=k, endpoint=True)
    return _summaries(sizes, params, rng)


@dataclass
class ReplicateRecord:
    scenario_id: str
    replicate: int
    rho_hat: float = math.nan
    se: float = math.nan
    wald_lo: float = math.nan
    wald_hi: float = math.nan
    lrt_lo: float = math.nan
    lrt_hi: float = math.nan
    rho_naive: float = math.nan
    rho_weighted: float = math.nan
    delta_naive: float = math.nan
    delta_weighted: float = math.nan
    covered_wald: bool | None = None
    covered_lrt: bool | None = None
    olver_studies: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


REPLICATE_COLUMNS = [
    "scenario_id",
    "replicate",
    "rho_hat",
    "se",
    "wald_lo",
    "wald_hi",
    "lrt_lo",
    "lrt_hi",
    "rho_naive",
    "rho_weighted",
    "delta_naive",
    "delta_weighted",
    "covered_wald",
    "covered_lrt",
    "olver_studies",
    "error",
]


def run_replicate(scenario: Scenario, replicate_index: int) -> ReplicateRecord:
    """Simulate one dataset and run every estimator on it.

    Failures are captured in ``error`` rather than raised.
    """
    rec = ReplicateRecord(scenario.scenario_id, int(replicate_index))
    rng = replicate_rng(scenario.base_seed, replicate_index)
    studies = generate_studies(scenario.k, scenario.n_min, scenario.n_max, scenario.params, rng)
    rho0 = scenario.rho_true
    try:
        params, est = estimate_full(studies, scenario.alpha)
        if not math.isfinite(est.loglik_at_max):
            raise SummaryCorrError("non-finite log-likelihood at the estimate")
        rec.rho_hat = est.rho_hat
        rec.olver_studies = int(profile_likelihood(studies).olver_mask(est.rho_hat).sum())
        if est.se is not None:
            rec.se = est.se
            rec.wald_lo, rec.wald_hi = est.ci_wald
            rec.covered_wald = est.ci_wald.contains(rho0)
        if est.ci_lrt is not None:
            rec.lrt_lo, rec.lrt_hi = est.ci_lrt
            rec.covered_lrt = est.ci_lrt.contains(rho0)
        if scenario.k >= 2:
            rec.rho_naive = naive_pearson(studies)
            rec.rho_weighted = weighted_pearson(studies)
            rec.delta_naive = delta_metric(rec.rho_hat, rec.rho_naive, rho0)
            rec.delta_weighted = delta_metric(rec.rho_hat, rec.rho_weighted, rho0)
    except (SummaryCorrError, FloatingPointError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


@dataclass
class ScenarioResult:
    scenario: Scenario
    records: list[ReplicateRecord]
    mean_abs_dev: float
    mc_se_abs_dev: float
    mean_bias: float
    mc_se_bias: float
    sd_rho_hat: float
    coverage_wald: float
    coverage_lrt: float
    n_wald: int
    width_wald: float
    width_lrt: float
    mean_se: float
    mean_delta_naive: float
    mean_delta_weighted: float
    t_pvalue_naive: float
    t_pvalue_weighted: float
    skewness: float
    excess_kurtosis: float
    excluded_replicates: int
    olver_replicates: int
    rho_hats: list[float] = field(repr=False)
    se_bias_samples: list[float] = field(repr=False)
    failures: list[str] = field(default_factory=list, repr=False)


def _mean(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.mean()) if values.size else math.nan


def _t_pvalue(deltas: np.ndarray) -> float:
    deltas = deltas[np.isfinite(deltas)]
    try:
        return one_sided_t_test_mean_lt_zero(deltas)[1]
    except DegenerateInputError:
        return math.nan


def summarize(scenario: Scenario, records: Sequence[ReplicateRecord]) -> ScenarioResult:
    """Aggregate replicate records (ordered by replicate index) into metrics."""
    records = sorted(records, key=lambda r: r.replicate)
    good = [r for r in records if r.ok]
    rho0 = scenario.rho_true
    rho_hats = np.array([r.rho_hat for r in good])
    m = rho_hats.size
    abs_dev = np.abs(rho_hats - rho0)
    sd = float(np.std(rho_hats, ddof=1)) if m > 1 else math.nan

    wald = [r for r in good if r.covered_wald is not None]
    lrt = [r for r in good if r.covered_lrt is not None]
    ses = np.array([r.se for r in good])
    if m > 2:
        skew = float(stats.skew(rho_hats))
        kurt = float(stats.kurtosis(rho_hats))
    else:
        skew = kurt = math.nan

    return ScenarioResult(
        scenario=scenario,
        records=list(records),
        mean_abs_dev=_mean(abs_dev),
        mc_se_abs_dev=float(np.std(abs_dev, ddof=1) / math.sqrt(m)) if m > 1 else math.nan,
        mean_bias=_mean(rho_hats - rho0),
        mc_se_bias=sd / math.sqrt(m) if m > 1 else math.nan,
        sd_rho_hat=sd,
        coverage_wald=_mean([r.covered_wald for r in wald]),
        coverage_lrt=_mean([r.covered_lrt for r in lrt]),
        n_wald=len(wald),
        width_wald=_mean([r.wald_hi - r.wald_lo for r in wald]),
        width_lrt=_mean([r.lrt_hi - r.lrt_lo for r in lrt]),
        mean_se=float(np.nanmean(ses)) if np.isfinite(ses).any() else math.nan,
        mean_delta_naive=_mean([r.delta_naive for r in good]),
        mean_delta_weighted=_mean([r.delta_weighted for r in good]),
        t_pvalue_naive=_t_pvalue(np.array([r.delta_naive for r in good])),
        t_pvalue_weighted=_t_pvalue(np.array([r.delta_weighted for r in good])),
        skewness=skew,
        excess_kurtosis=kurt,
        excluded_replicates=len(records) - m,
        olver_replicates=sum(1 for r in good if r.olver_studies > 0),
        rho_hats=rho_hats.tolist(),
        se_bias_samples=(ses - sd).tolist(),
        failures=[f"{r.replicate}: {r.error}" for r in records if not r.ok],
    )


def _run_chunk(args):
    scenario, indices = args
    return [run_replicate(scenario, i) for i in indices]


def _chunks(scenario: Scenario, size: int):
    idx = list(range(scenario.replicates))
    return [(scenario, idx[i : i + size]) for i in range(0, len(idx), size)]


def run_scenario(scenario: Scenario, workers: int = 1) -> ScenarioResult:
    """Run every replicate of ``scenario`` and aggregate."""
    return run_grid([scenario], workers=workers)[0]


def run_grid(scenarios: Iterable[Scenario], workers: int = 1, chunk_size: int = 50) -> list[ScenarioResult]:
    """Run several scenarios, parallelising replicate chunks across processes."""
    scenarios = list(scenarios)
    tasks = [task for sc in scenarios for task in _chunks(sc, chunk_size)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_chunk, tasks))
    else:
        chunks = [_run_chunk(t) for t in tasks]
    by_id: dict[int, list[ReplicateRecord]] = {i: [] for i in range(len(scenarios))}
    pos = 0
    for i, sc in enumerate(scenarios):
        n_tasks = len(_chunks(sc, chunk_size))
        for chunk in chunks[pos : pos + n_tasks]:
            by_id[i].extend(chunk)
        pos += n_tasks
    return [summarize(sc, by_id[i]) for i, sc in enumerate(scenarios)]


def _cell_seed(seed: int, cell: int) -> int:
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(cell,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def paper_scenario_grid(which: str = "main", seed: int = DEFAULT_SEED, replicates: int = 1000) -> list[Scenario]:
    """Scenario cells of the published simulation study.

    ``main`` is 3 correlations x 5 study counts x 2 size ranges (30 cells);
    ``large_n`` is 2 correlations x 5 study counts with sizes in [2000, 5000].
    """
    if which == "main":
        layout = [(n, rho) for n in (SMALL_N, LARGE_N) for rho in (0.9, 0.5, 0.1)]
        offset = 0
    elif which == "large_n":
        layout = [(EXTREME_N, rho) for rho in (0.5, 0.9)]
        offset = 1000
    else:
        raise DomainError(f"unknown grid {which!r}; expected 'main' or 'large_n'")
    cells = []
    for n_range, rho in layout:
        for k in PAPER_K:
            cells.append(
                Scenario(
                    rho_true=rho,
                    k=k,
                    n_min=n_range[0],
                    n_max=n_range[1],
                    replicates=replicates,
                    base_seed=_cell_seed(seed, offset + len(cells)),
                )
            )
    return cells


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def write_replicate_csv(path, records: Sequence[ReplicateRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(REPLICATE_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, col)) for col in REPLICATE_COLUMNS])


AGGREGATE_COLUMNS = [
    "scenario_id",
    "rho_true",
    "k",
    "n_min",
    "n_max",
    "replicates",
    "excluded_replicates",
    "mean_abs_dev",
    "mc_se_abs_dev",
    "mean_bias",
    "mc_se_bias",
    "sd_rho_hat",
    "mean_se",
    "coverage_wald",
    "coverage_lrt",
    "n_wald",
    "width_wald",
    "width_lrt",
    "mean_delta_naive",
    "mean_delta_weighted",
    "t_pvalue_naive",
    "t_pvalue_weighted",
    "skewness",
    "excess_kurtosis",
    "olver_replicates",
]


def write_aggregate_csv(path, results: Sequence[ScenarioResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(AGGREGATE_COLUMNS)
        for res in results:
            sc = res.scenario
            row = []
            for col in AGGREGATE_COLUMNS:
                if col == "scenario_id":
                    row.append(sc.scenario_id)
                elif hasattr(sc, col):
                    row.append(_fmt(getattr(sc, col)))
                else:
                    row.append(_fmt(getattr(res, col)))
            writer.writerow(row)


def write_metadata(path, scenarios: Sequence[Scenario], seed: int, **extra) -> None:
    meta = {
        "package": "summarycorr",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": int(seed),
        "rng": "PCG64 via SeedSequence(entropy=base_seed, spawn_key=(replicate,))",
        "scenarios": [sc.to_dict() | {"scenario_id": sc.scenario_id} for sc in scenarios],
        **extra,
    }
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
