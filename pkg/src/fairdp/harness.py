"""Experiment orchestration: synthetic data, sweeps over (epsilon, lambda,
seed) grids, multi-seed aggregation, and CSV emission of tradeoff tables.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, fields

import numpy as np

from .classifier import ModelParams, predict_label, proba_lipschitz_bound
from .dataset import TabularDataset, load_csv, sensitive_stats, train_test_split
from .exceptions import CalibrationError, DegenerateConditionalError, DivergenceError
from .fairness import (
    DEMOGRAPHIC_PARITY,
    EQUALIZED_ODDS,
    FermiConfig,
    dp_violation,
    eo_violation,
    ermi_hard,
)
from .optimizer import LAST, SgdaConfig, dp_fermi_train
from .privacy import (
    NoiseScales,
    PrivacyBudget,
    calibrate_all_features,
    calibrate_sensitive_only,
    min_iterations,
)

SENSITIVE_ONLY = "sensitive_only"
ALL_FEATURES = "all_features"
NO_PRIVACY = "none"
GRANULARITIES = (SENSITIVE_ONLY, ALL_FEATURES, NO_PRIVACY)


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian mixture data with group-dependent label bias.

    Labels start uniform and independent of the group; each sample is then
    flipped to its group's preferred class with probability
    bias * (s - 1) / (k - 1), so bias = 0 keeps labels independent of the
    groups and larger bias monotonically increases the demographic-parity
    violation of an accuracy-maximizing classifier. Features are drawn
    around per-class means (norm 2, distinct axes/signs per class) with the
    given noise scale, and the last coordinate additionally carries a unit
    group offset. That offset mirrors tabular data whose features correlate
    with the sensitive attribute; without it, predictions could depend on
    the group only through the label, and no classifier could trade
    violation against accuracy at a realistic rate.
    """

    n: int
    d_x: int
    k: int = 2
    l: int = 2
    bias: float = 0.0
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d_x < 1:
            raise ValueError("n and d_x must be positive")
        if self.k < 2 or self.l < 2:
            raise ValueError("need k >= 2 and l >= 2")
        if not 0.0 <= self.bias <= 1.0:
            raise ValueError("bias must lie in [0, 1]")
        if self.noise_scale <= 0:
            raise ValueError("noise_scale must be positive")

    @property
    def dataset_id(self) -> str:
        return f"synth_n{self.n}_d{self.d_x}_k{self.k}_l{self.l}_b{self.bias}_s{self.seed}"


def _class_means(l: int, d_x: int) -> np.ndarray:
    means = np.zeros((l, d_x))
    for j in range(l):
        means[j, (j // 2) % d_x] = 2.0 if j % 2 == 0 else -2.0
    return means


def synth_dataset(spec: SyntheticSpec) -> TabularDataset:
    """Deterministic synthetic dataset per the SyntheticSpec recipe."""
    rng = np.random.default_rng(spec.seed)
    s = rng.integers(1, spec.k + 1, size=spec.n)
    y = rng.integers(1, spec.l + 1, size=spec.n)
    preferred = ((s - 1) % spec.l) + 1
    flip_prob = spec.bias * (s - 1) / (spec.k - 1)
    y = np.where(rng.random(spec.n) < flip_prob, preferred, y)
    features = _class_means(spec.l, spec.d_x)[y - 1] + spec.noise_scale * rng.standard_normal(
        (spec.n, spec.d_x)
    )
    features[:, -1] += 2.0 * (2.0 * (s - 1) / (spec.k - 1) - 1.0)  # group offset in [-2, 2]
    return TabularDataset(features, y, s, spec.l, spec.k)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a dataset source, a fairness notion, and the run grid."""

    dataset: str | SyntheticSpec
    notion: str = DEMOGRAPHIC_PARITY
    lambdas: tuple[float, ...] = (0.0,)
    epsilons: tuple[float, ...] = (1.0,)
    delta: float = 1e-5
    trials: int = 1
    granularity: str = SENSITIVE_ONLY
    eta_theta: float = 0.01
    eta_w: float = 0.01
    epochs: int = 200
    batch_size: int = 1024
    box_radius: float = 1.0
    clip_theta: float | None = 1.0
    iterate_rule: str = LAST
    master_seed: int = 0
    test_fraction: float = 0.25
    label_col: str = "label"
    sensitive_col: str = "sensitive"

    def __post_init__(self):
        if any(lam < 0 for lam in self.lambdas) or not self.lambdas:
            raise ValueError("lambda values must be nonnegative and nonempty")
        if any(eps <= 0 for eps in self.epsilons) or not self.epsilons:
            raise ValueError("epsilon values must be positive and nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be one of {GRANULARITIES}")
        if self.notion not in (DEMOGRAPHIC_PARITY, EQUALIZED_ODDS):
            raise ValueError(f"unknown fairness notion {self.notion!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass(frozen=True)
class TradeoffRecord:
    """One training run's position in the fairness-accuracy-privacy space."""

    dataset_id: str
    seed: int
    epsilon: float
    delta: float
    lam: float
    notion: str
    T: int
    m: int
    sigma_theta_sq: float
    sigma_w_sq: float
    train_error: float
    test_error: float
    dp_violation: float
    eo_violation: float
    ermi_hard: float
    status: str = "ok"


RECORD_COLUMNS = [f.name for f in fields(TradeoffRecord)]
AGGREGATE_FIELDS = (
    "T",
    "m",
    "sigma_theta_sq",
    "sigma_w_sq",
    "train_error",
    "test_error",
    "dp_violation",
    "eo_violation",
    "ermi_hard",
)


def load_experiment_dataset(config: ExperimentConfig) -> TabularDataset:
    if isinstance(config.dataset, SyntheticSpec):
        return synth_dataset(config.dataset)
    return load_csv(config.dataset, config.label_col, config.sensitive_col)


def _dataset_id(config: ExperimentConfig) -> str:
    if isinstance(config.dataset, SyntheticSpec):
        return config.dataset.dataset_id
    return os.path.basename(str(config.dataset))


def evaluate_metrics(theta: ModelParams, ds: TabularDataset) -> dict:
    """Error rate and fairness violations of hard predictions on a dataset."""
    preds = predict_label(theta, ds.features)
    metrics = {
        "error": float((preds != ds.labels).mean()),
        "dp_violation": dp_violation(preds, ds.sensitive, k=ds.k),
        "ermi_hard": ermi_hard(preds, ds.sensitive, k=ds.k, l=ds.l),
    }
    try:
        metrics["eo_violation"] = eo_violation(preds, ds.sensitive, ds.labels, k=ds.k, l=ds.l)
    except DegenerateConditionalError:
        metrics["eo_violation"] = math.nan
    return metrics


def calibrate_for_run(
    granularity: str,
    epsilon: float,
    delta: float,
    T: int,
    n: int,
    m: int,
    rho: float,
    L_theta: float,
    D: float,
    l: int,
) -> NoiseScales:
    """Noise for one run at the requested privacy granularity.

    Raises CalibrationError if T is below the iteration floor the closed
    forms require.
    """
    if granularity == NO_PRIVACY:
        return NoiseScales.none()
    budget = PrivacyBudget(epsilon, delta)
    floor = min_iterations(n, m, epsilon)
    if T < floor:
        raise CalibrationError(
            f"T={T} is below the required minimum {floor} for n={n}, m={m}, eps={epsilon}"
        )
    if granularity == SENSITIVE_ONLY:
        return calibrate_sensitive_only(budget, T, n, rho, L_theta, D)
    return calibrate_all_features(budget, T, n, rho, L_theta, D, l)


def run_sweep(config: ExperimentConfig) -> list[TradeoffRecord]:
    """Train and evaluate every (epsilon, lambda, trial) cell of the grid.

    Each cell owns a random stream derived deterministically from
    (master_seed, epsilon index, lambda index, trial). Diverged runs are
    recorded with status "diverged" and NaN metrics rather than dropped.
    """
    ds = load_experiment_dataset(config)
    train, test = train_test_split(ds, config.test_fraction, config.master_seed)
    m = min(config.batch_size, train.n)
    T = config.epochs * math.ceil(train.n / m)
    rho = sensitive_stats(train).rho
    L_theta = proba_lipschitz_bound(train.features)
    dataset_id = _dataset_id(config)
    theta0 = ModelParams.zeros(train.l, train.d_x)

    records = []
    for e_idx, epsilon in enumerate(config.epsilons):
        noise = calibrate_for_run(
            config.granularity,
            epsilon,
            config.delta,
            T,
            train.n,
            m,
            rho,
            L_theta,
            config.box_radius,
            train.l,
        )
        for l_idx, lam in enumerate(config.lambdas):
            fermi = FermiConfig(lam, config.notion)
            for trial in range(config.trials):
                rng = np.random.default_rng(
                    np.random.SeedSequence((config.master_seed, e_idx, l_idx, trial))
                )
                sgda = SgdaConfig(
                    eta_theta=config.eta_theta,
                    eta_w=config.eta_w,
                    T=T,
                    m=m,
                    box_radius=config.box_radius,
                    clip_theta=config.clip_theta,
                    iterate_rule=config.iterate_rule,
                )
                base = dict(
                    dataset_id=dataset_id,
                    seed=trial,
                    epsilon=epsilon,
                    delta=config.delta,
                    lam=lam,
                    notion=config.notion,
                    T=T,
                    m=m,
                    sigma_theta_sq=noise.sigma_theta_sq,
                    sigma_w_sq=noise.sigma_w_sq,
                )
                try:
                    result = dp_fermi_train(train, theta0, fermi, sgda, noise, rng)
                    train_metrics = evaluate_metrics(result.params, train)
                    test_metrics = evaluate_metrics(result.params, test)
                    records.append(
                        TradeoffRecord(
                            **base,
                            train_error=train_metrics["error"],
                            test_error=test_metrics["error"],
                            dp_violation=test_metrics["dp_violation"],
                            eo_violation=test_metrics["eo_violation"],
                            ermi_hard=test_metrics["ermi_hard"],
                            status="ok",
                        )
                    )
                except DivergenceError:
                    records.append(
                        TradeoffRecord(
                            **base,
                            train_error=math.nan,
                            test_error=math.nan,
                            dp_violation=math.nan,
                            eo_violation=math.nan,
                            ermi_hard=math.nan,
                            status="diverged",
                        )
                    )
    return records


def aggregate(records: list[TradeoffRecord]) -> list[dict]:
    """Per-(epsilon, lambda) mean and population std of every numeric field.

    NaNs from diverged runs propagate into the aggregates on purpose.
    """
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict[tuple[float, float], list[TradeoffRecord]] = {}
    for rec in records:
        groups.setdefault((rec.epsilon, rec.lam), []).append(rec)
    rows = []
    for (epsilon, lam) in sorted(groups):
        members = groups[(epsilon, lam)]
        row = {"epsilon": epsilon, "lam": lam, "runs": len(members)}
        for name in AGGREGATE_FIELDS:
            values = np.array([getattr(rec, name) for rec in members], dtype=np.float64)
            row[f"{name}_mean"] = float(values.mean())
            row[f"{name}_std"] = float(values.std())
        rows.append(row)
    return rows


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit_csv(rows, path) -> None:
    """Write records or aggregate rows with a fixed column order.

    Reals carry 6 significant digits; a header line is always present, so
    an empty record list produces a header-only file.
    """
    rows = list(rows)
    if rows and isinstance(rows[0], dict):
        columns = list(rows[0].keys())
        dicts = rows
    else:
        columns = RECORD_COLUMNS
        dicts = [{name: getattr(rec, name) for name in columns} for rec in rows]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["lambda" if c == "lam" else c for c in columns]
        writer.writerow(header)
        for row in dicts:
            writer.writerow([_format_cell(row[c]) for c in columns])
