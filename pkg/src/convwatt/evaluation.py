"""Accuracy metrics, train/test splits and cross-validation."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .energy_trace import EnergyDataset
from .regression import fit_ols

DEFAULT_SEED = 42


class EvaluationError(ValueError):
    pass


class Metric(enum.Enum):
    REL_ACC = "relacc"
    RMSPE_ACC = "rmspe"


def relative_accuracy(predicted: float, measured: float) -> float:
    """``100 - |predicted - measured| / measured * 100``, not clamped."""
    if not measured > 0:
        raise EvaluationError(f"measured energy must be positive, got {measured}")
    return 100.0 - abs(predicted - measured) / measured * 100.0


def rmspe_accuracy(pairs: Iterable[tuple[float, float]]) -> float:
    """``100`` minus the root-mean-square percentage error of ``(predicted, measured)`` pairs."""
    pairs = list(pairs)
    if not pairs:
        raise EvaluationError("rmspe_accuracy needs at least one pair")
    arr = np.asarray(pairs, dtype=float)
    pred, meas = arr[:, 0], arr[:, 1]
    if np.any(meas <= 0):
        raise EvaluationError("measured energies must be positive")
    return float(100.0 - 100.0 * np.sqrt(np.mean(((pred - meas) / meas) ** 2)))


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample (n-1) standard deviation; the std of one value is 0."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EvaluationError("no values")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


# ---------------------------------------------------------------------------
# Splitting


class SplitMode(enum.Enum):
    RANDOM_LAYERS = "random"
    LEAVE_NETWORKS_OUT = "networks"


@dataclass(frozen=True)
class SplitPlan:
    """How to form train/test folds.

    ``RANDOM_LAYERS`` draws ``repeats`` independent splits with a ``ratio``
    share of rows in training. ``LEAVE_NETWORKS_OUT`` shuffles the network
    names and cuts them into ``folds`` disjoint test groups of
    ``networks_per_fold``; ``test_networks`` instead pins a single fold.
    """

    mode: SplitMode = SplitMode.RANDOM_LAYERS
    ratio: float = 0.8
    repeats: int = 10
    networks_per_fold: int = 3
    folds: int | None = None
    test_networks: tuple[str, ...] | None = None
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if not 0.0 < self.ratio < 1.0:
            raise EvaluationError(f"train ratio must lie in (0, 1), got {self.ratio}")
        if self.repeats < 1 or self.networks_per_fold < 1:
            raise EvaluationError("repeats and networks_per_fold must be positive")
        if self.folds is not None and self.folds < 1:
            raise EvaluationError("folds must be positive")

    @classmethod
    def random_layers(cls, ratio: float = 0.8, repeats: int = 10, seed: int = DEFAULT_SEED) -> SplitPlan:
        return cls(SplitMode.RANDOM_LAYERS, ratio=ratio, repeats=repeats, seed=seed)

    @classmethod
    def leave_networks_out(
        cls,
        networks_per_fold: int = 3,
        folds: int | None = None,
        seed: int = DEFAULT_SEED,
        test_networks: Sequence[str] | None = None,
    ) -> SplitPlan:
        return cls(
            SplitMode.LEAVE_NETWORKS_OUT,
            networks_per_fold=networks_per_fold,
            folds=folds,
            seed=seed,
            test_networks=tuple(test_networks) if test_networks is not None else None,
        )

    def describe(self) -> str:
        if self.mode is SplitMode.RANDOM_LAYERS:
            return f"random ratio={self.ratio:g} repeats={self.repeats} seed={self.seed}"
        if self.test_networks is not None:
            return f"networks test={'+'.join(self.test_networks)} seed={self.seed}"
        return f"networks per_fold={self.networks_per_fold} folds={self.folds or 'all'} seed={self.seed}"


@dataclass(frozen=True)
class Fold:
    train: tuple[int, ...]
    test: tuple[int, ...]


def make_folds(dataset: EnergyDataset, plan: SplitPlan) -> list[Fold]:
    """Row-index folds for ``plan``; identical inputs give identical folds."""
    n = len(dataset)
    if plan.mode is SplitMode.RANDOM_LAYERS:
        n_test = int(round(n * (1.0 - plan.ratio)))
        if n_test < 1 or n - n_test < 1:
            raise EvaluationError(f"{n} rows cannot be split {plan.ratio:g}:{1 - plan.ratio:g}")
        folds = []
        for r in range(plan.repeats):
            perm = np.random.default_rng([plan.seed, r]).permutation(n)
            folds.append(Fold(tuple(sorted(perm[n_test:].tolist())), tuple(sorted(perm[:n_test].tolist()))))
        return folds

    networks = dataset.networks
    if plan.test_networks is not None:
        missing = set(plan.test_networks) - set(networks)
        if missing:
            raise EvaluationError(f"test networks not in dataset: {sorted(missing)}")
        groups = [list(plan.test_networks)]
    else:
        per = plan.networks_per_fold
        folds_n = plan.folds if plan.folds is not None else len(networks) // per
        if folds_n < 1 or len(networks) < folds_n * per:
            raise EvaluationError(
                f"{len(networks)} networks cannot form {folds_n} folds of {per} test networks"
            )
        order = np.random.default_rng(plan.seed).permutation(len(networks))
        shuffled = [networks[i] for i in order]
        groups = [shuffled[f * per : (f + 1) * per] for f in range(folds_n)]

    out = []
    for group in groups:
        test_set = set(group)
        test = tuple(i for i, r in enumerate(dataset.rows) if r.network in test_set)
        train = tuple(i for i, r in enumerate(dataset.rows) if r.network not in test_set)
        if not test or not train:
            raise EvaluationError("degenerate fold: empty train or test set")
        out.append(Fold(train, test))
    return out


# ---------------------------------------------------------------------------
# Cross-validation

Predictor = Callable[[EnergyDataset], np.ndarray]
Recipe = Callable[[EnergyDataset], Predictor]


@dataclass(frozen=True)
class EvalReport:
    fold_accuracies: tuple[float, ...]
    mean: float
    std: float
    metric: Metric
    seed: int
    plan: str = ""
    fold_units: tuple[int, ...] = field(default=())

    @classmethod
    def from_folds(cls, accuracies: Sequence[float], metric: Metric, seed: int, plan: str = "", units=()) -> EvalReport:
        mean, std = mean_std(accuracies)
        return cls(tuple(float(a) for a in accuracies), mean, std, metric, seed, plan, tuple(units))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "fold", "test_units", "accuracy_pct"])
        units = self.fold_units or (0,) * len(self.fold_accuracies)
        for i, (acc, u) in enumerate(zip(self.fold_accuracies, units)):
            w.writerow([self.metric.value, i, u, f"{acc:.6f}"])
        w.writerow([self.metric.value, "mean", "", f"{self.mean:.6f}"])
        w.writerow([self.metric.value, "std", "", f"{self.std:.6f}"])
        return buf.getvalue()

    def format_table(self) -> str:
        name = "Rel. accuracy" if self.metric is Metric.REL_ACC else "100-RMSPE"
        lines = [f"{name} ({self.plan})"]
        for i, acc in enumerate(self.fold_accuracies):
            lines.append(f"  fold {i:>2}: {acc:8.2f} %")
        lines.append(f"  mean   : {self.mean:8.2f} % +/- {self.std:.2f}")
        return "\n".join(lines)


def _unit_pairs(test: EnergyDataset, predicted: np.ndarray, by_network: bool) -> list[tuple[float, float]]:
    measured = test.energies
    if not by_network:
        return list(zip(predicted.tolist(), measured.tolist()))
    sums: dict[str, list[float]] = {}
    for row, p, m in zip(test.rows, predicted, measured):
        acc = sums.setdefault(row.network, [0.0, 0.0])
        acc[0] += p
        acc[1] += m
    return [(p, m) for p, m in sums.values()]


def cross_validate(
    dataset: EnergyDataset,
    plan: SplitPlan,
    recipe: Recipe,
    metric: Metric = Metric.REL_ACC,
) -> EvalReport:
    """Train ``recipe`` on each fold's training rows and score the test rows.

    With random splits each test row is scored on its own. With
    leave-networks-out splits a network's row predictions are summed into a
    whole-inference estimate and scored against its summed measurement. Fold
    accuracy is the mean relative accuracy of those units, or 100-RMSPE over
    them.
    """
    by_network = plan.mode is SplitMode.LEAVE_NETWORKS_OUT
    accuracies = []
    units = []
    for fold in make_folds(dataset, plan):
        predictor = recipe(dataset.subset(fold.train))
        test = dataset.subset(fold.test)
        predicted = np.asarray(predictor(test), dtype=float)
        pairs = _unit_pairs(test, predicted, by_network)
        if metric is Metric.REL_ACC:
            accuracies.append(math.fsum(relative_accuracy(p, m) for p, m in pairs) / len(pairs))
        else:
            accuracies.append(rmspe_accuracy(pairs))
        units.append(len(pairs))
    return EvalReport.from_folds(accuracies, metric, plan.seed, plan.describe(), units)


def feature_recipe(features: Sequence[str]) -> Recipe:
    """Individual-layer recipe: one OLS model over ``features`` for all rows."""
    names = tuple(features)

    def train(ds: EnergyDataset) -> Predictor:
        model = fit_ols(ds.matrix(names), ds.energies, names)
        return lambda test: model.predict(test.matrix(names))

    return train
