"""Least-squares fitting, BIC scoring and feature-subset selection."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

RSS_FLOOR = 1e-12
MAX_EXHAUSTIVE = 15


class RegressionError(ValueError):
    pass


def bic_score(n: int, rss: float, k_coeffs: int) -> float:
    """Deviance-form BIC, ``n*ln(rss/n) + k*ln(n)``; lower is better.

    ``k_coeffs`` counts every fitted coefficient including the intercept.
    ``rss`` is floored at 1e-12 so perfect fits stay finite.
    """
    if n <= 0:
        raise RegressionError("BIC needs at least one observation")
    if rss < 0:
        raise RegressionError("negative residual sum of squares")
    return n * math.log(max(rss, RSS_FLOOR) / n) + k_coeffs * math.log(n)


@dataclass(frozen=True)
class RegressionModel:
    """A fitted ``energy ~ intercept + sum(coef * feature)`` model."""

    feature_names: tuple[str, ...]
    coefficients: tuple[float, ...]
    intercept: float
    n_train: int
    rss: float
    bic: float
    degree: int = 1

    def __post_init__(self) -> None:
        if len(self.coefficients) != len(self.feature_names):
            raise RegressionError("one coefficient per feature required")

    @property
    def complexity(self) -> int:
        return len(self.feature_names)

    def recomputed_bic(self) -> float:
        return bic_score(self.n_train, self.rss, self.complexity + 1)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.complexity:
            raise RegressionError(f"expected {self.complexity} feature columns, got {X.shape[1]}")
        return self.intercept + X @ np.asarray(self.coefficients, dtype=float)


def _lstsq_centered(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-norm least squares with an unpenalised intercept.

    Columns are centred and scaled to unit RMS before an SVD solve; the
    minimum-norm choice among tied solutions is made in that scaled basis.
    """
    n, m = X.shape
    y_mean = y.mean()
    if m == 0:
        return np.zeros(0), float(y_mean)
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    scale = np.sqrt(np.mean(Xc * Xc, axis=0))
    scale[scale == 0] = 1.0
    Xs = Xc / scale
    beta_s, *_ = np.linalg.lstsq(Xs, y - y_mean, rcond=max(n, m) * np.finfo(float).eps)
    beta = beta_s / scale
    return beta, float(y_mean - x_mean @ beta)


def fit_ols(
    X,
    y,
    feature_names: Sequence[str] | None = None,
    degree: int = 1,
) -> RegressionModel:
    """Fit ordinary least squares with an intercept.

    Parameters
    ----------
    X : array-like, shape (n, m)
        Feature matrix; ``m`` may be 0 for an intercept-only fit.
    y : array-like, shape (n,)
        Measured energies.
    feature_names : sequence of str, optional
        Column names, defaulting to ``x0, x1, ...``.

    Returns
    -------
    RegressionModel
        Coefficients in the original feature units. With linearly dependent
        columns the minimum-norm solution is returned.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = y.shape[0]
    if n == 0:
        raise RegressionError("cannot fit with zero observations")
    if X.shape[0] != n:
        raise RegressionError(f"X has {X.shape[0]} rows but y has {n}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise RegressionError("non-finite values in X or y")
    m = X.shape[1]
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{i}" for i in range(m))
    if len(names) != m:
        raise RegressionError("feature_names length does not match X")

    beta, intercept = _lstsq_centered(X, y)
    resid = y - intercept - X @ beta
    rss = float(resid @ resid)
    return RegressionModel(
        feature_names=names,
        coefficients=tuple(float(b) for b in beta),
        intercept=intercept,
        n_train=n,
        rss=rss,
        bic=bic_score(n, rss, m + 1),
        degree=degree,
    )


# ---------------------------------------------------------------------------
# Subset selection


@dataclass(frozen=True)
class SubsetEntry:
    size: int
    features: tuple[str, ...]
    bic: float
    rss: float


@dataclass
class SelectionPath:
    """Best subset found at each size, and the overall BIC minimiser.

    For forward stepwise, ``accepted`` is the number of leading entries whose
    addition lowered BIC; later entries are recorded for plotting only.
    """

    entries: list[SubsetEntry]
    method: str
    accepted: int | None = None
    candidates: tuple[str, ...] = field(default=())

    @property
    def selected(self) -> SubsetEntry:
        pool = self.entries if self.accepted is None else self.entries[: max(self.accepted, 1)]
        return min(pool, key=lambda e: (e.bic, e.size, e.features))

    def to_csv(self) -> str:
        lines = ["size,bic,rss,selected,features"]
        best = self.selected
        for e in self.entries:
            lines.append(
                f"{e.size},{e.bic!r},{e.rss!r},{int(e is best)},{' '.join(e.features)}"
            )
        return "\n".join(lines) + "\n"


def _prepare(X, y, names) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    names = tuple(names)
    if len(names) != X.shape[1]:
        raise RegressionError("one name per candidate column required")
    if len(set(names)) != len(names):
        raise RegressionError("duplicate candidate names")
    # Canonical column order makes results independent of the caller's order.
    order = sorted(range(len(names)), key=lambda i: names[i])
    return X[:, order], y, tuple(names[i] for i in order)


def _default_max_size(n: int, m: int, max_size: int | None) -> int:
    if max_size is not None:
        return min(max_size, m)
    # Keep more observations than coefficients.
    return max(1, min(m, n - 2))


def _subset_rss(X: np.ndarray, y: np.ndarray, cols: tuple[int, ...]) -> float:
    beta, intercept = _lstsq_centered(X[:, cols], y)
    resid = y - intercept - X[:, cols] @ beta
    return float(resid @ resid)


def best_subset_exhaustive(X, y, names: Sequence[str], max_size: int | None = None) -> SelectionPath:
    """Fit every subset of up to ``max_size`` candidates and keep the best per size.

    Ties are broken towards the lexicographically smallest feature tuple.

    Raises
    ------
    RegressionError
        With more than 15 candidates; use :func:`forward_stepwise` instead.
    """
    X, y, names = _prepare(X, y, names)
    n, m = X.shape
    if m > MAX_EXHAUSTIVE:
        raise RegressionError(
            f"{m} candidates exceeds the exhaustive limit of {MAX_EXHAUSTIVE}; use forward_stepwise"
        )
    if m == 0:
        raise RegressionError("no candidate features")
    top = _default_max_size(n, m, max_size)
    entries = []
    for k in range(1, top + 1):
        best: SubsetEntry | None = None
        for cols in itertools.combinations(range(m), k):
            rss = _subset_rss(X, y, cols)
            entry = SubsetEntry(k, tuple(names[c] for c in cols), bic_score(n, rss, k + 1), rss)
            if best is None or (entry.bic, entry.features) < (best.bic, best.features):
                best = entry
        entries.append(best)
    return SelectionPath(entries, "exhaustive", candidates=names)  # type: ignore[arg-type]


def forward_stepwise(X, y, names: Sequence[str], max_size: int | None = None) -> SelectionPath:
    """Greedy forward selection by BIC.

    Starting from the intercept-only model, each step adds the candidate
    giving the lowest BIC. The path continues to ``max_size`` so that the
    whole curve can be plotted; ``accepted`` marks where BIC first stopped
    improving.
    """
    X, y, names = _prepare(X, y, names)
    n, m = X.shape
    if m == 0:
        raise RegressionError("no candidate features")
    top = _default_max_size(n, m, max_size)
    chosen: list[int] = []
    remaining = list(range(m))
    current = bic_score(n, _subset_rss(X, y, ()), 1)
    entries: list[SubsetEntry] = []
    accepted: int | None = None
    for k in range(1, top + 1):
        best: SubsetEntry | None = None
        best_col = -1
        for c in remaining:
            cols = tuple(sorted(chosen + [c]))
            rss = _subset_rss(X, y, cols)
            entry = SubsetEntry(k, tuple(names[i] for i in cols), bic_score(n, rss, k + 1), rss)
            if best is None or (entry.bic, names[c]) < (best.bic, names[best_col]):
                best, best_col = entry, c
        assert best is not None
        if accepted is None and not best.bic < current:
            accepted = k - 1
        entries.append(best)
        current = best.bic
        chosen.append(best_col)
        remaining.remove(best_col)
    if accepted is None:
        accepted = top
    return SelectionPath(entries, "stepwise", accepted=accepted, candidates=names)


def select_features(X, y, names: Sequence[str], method: str = "auto", max_size: int | None = None) -> SelectionPath:
    """Dispatch to exhaustive (up to 15 candidates under ``auto``) or stepwise search."""
    if method == "auto":
        method = "exhaustive" if len(names) <= MAX_EXHAUSTIVE else "stepwise"
    if method == "exhaustive":
        return best_subset_exhaustive(X, y, names, max_size)
    if method == "stepwise":
        return forward_stepwise(X, y, names, max_size)
    raise RegressionError(f"unknown selection method {method!r}")
