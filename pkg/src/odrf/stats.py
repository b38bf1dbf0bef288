"""Rank-based comparison of several models over several datasets.

Friedman omnibus statistic with its F correction, Nemenyi critical
difference, and the win/tie/loss sign test.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

# Studentized range quantile / sqrt(2) at alpha = 0.05, infinite df, by number of models.
Q_ALPHA_05 = {
    2: 1.960, 3: 2.344, 4: 2.569, 5: 2.728, 6: 2.850, 7: 2.948, 8: 3.031, 9: 3.102,
    10: 3.164, 11: 3.219, 12: 3.268, 13: 3.313, 14: 3.354, 15: 3.391, 16: 3.426,
    17: 3.458, 18: 3.489, 19: 3.517, 20: 3.544,
}


class DegenerateStatistic(ValueError):
    pass


@dataclass(frozen=True)
class RankTable:
    model_names: list[str]
    ranks: np.ndarray  # (N datasets, K models); 1 = best
    avg_ranks: np.ndarray

    @property
    def n_datasets(self) -> int:
        return self.ranks.shape[0]


@dataclass(frozen=True)
class TestReport:
    chi2_f: float
    f_f: float
    df1: int
    df2: int
    cd: float
    q_alpha: float
    avg_ranks: np.ndarray
    pairwise_significant: np.ndarray
    model_names: list[str]

    def to_dict(self) -> dict:
        return {
            "chi2_f": self.chi2_f, "f_f": self.f_f, "df1": self.df1, "df2": self.df2,
            "cd": self.cd, "q_alpha": self.q_alpha,
            "model_names": list(self.model_names),
            "avg_ranks": [float(r) for r in self.avg_ranks],
            "pairwise_significant": self.pairwise_significant.astype(bool).tolist(),
        }


def rank_accuracies(table, model_names=None, higher_is_better=True) -> RankTable:
    """Rank the models on every dataset; tied scores share their average rank."""
    A = np.asarray(table, dtype=float)
    if A.ndim != 2 or A.shape[0] < 2 or A.shape[1] < 2:
        raise ValueError(f"need at least a 2x2 score table, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("score table has non-finite entries")
    ranks = rankdata(-A if higher_is_better else A, method="average", axis=1)
    names = list(model_names) if model_names is not None else [f"m{j}" for j in range(A.shape[1])]
    if len(names) != A.shape[1]:
        raise ValueError("model_names length does not match table columns")
    return RankTable(names, ranks, ranks.mean(axis=0))


def friedman_statistics(avg_ranks, n_datasets) -> tuple[float, float]:
    """(chi2_F, F_F) from the K average ranks over N datasets."""
    R = np.asarray(avg_ranks, dtype=float)
    K, N = R.size, int(n_datasets)
    if K < 2 or N < 2:
        raise ValueError("Friedman test needs K >= 2 models and N >= 2 datasets")
    chi2 = 12.0 * N / (K * (K + 1)) * (np.sum(R ** 2) - K * (K + 1) ** 2 / 4.0)
    chi2 = max(float(chi2), 0.0)
    denom = N * (K - 1) - chi2
    if denom <= 0:
        raise DegenerateStatistic("chi2_F reaches N(K-1); the F statistic is undefined")
    return chi2, (N - 1) * chi2 / denom


def q_alpha_for(K: int) -> float:
    if K not in Q_ALPHA_05:
        raise ValueError(f"no built-in q_alpha for {K} models; pass q_alpha explicitly")
    return Q_ALPHA_05[K]


def nemenyi_cd(K: int, N: int, q_alpha: float) -> float:
    if K < 2 or N < 2 or q_alpha <= 0:
        raise ValueError("need K, N >= 2 and q_alpha > 0")
    return q_alpha * math.sqrt(K * (K + 1) / (6.0 * N))


def nemenyi_pairs(avg_ranks, cd) -> np.ndarray:
    R = np.asarray(avg_ranks, dtype=float)
    sig = np.abs(R[:, None] - R[None, :]) >= cd
    np.fill_diagonal(sig, False)
    return sig


def friedman_from_ranks(avg_ranks, n_datasets, model_names=None, q_alpha=None) -> TestReport:
    R = np.asarray(avg_ranks, dtype=float)
    K, N = R.size, int(n_datasets)
    chi2, ff = friedman_statistics(R, N)
    q = q_alpha if q_alpha is not None else q_alpha_for(K)
    cd = nemenyi_cd(K, N, q)
    names = list(model_names) if model_names is not None else [f"m{j}" for j in range(K)]
    return TestReport(chi2, ff, K - 1, (K - 1) * (N - 1), cd, q, R, nemenyi_pairs(R, cd), names)


def friedman(table: RankTable, q_alpha=None) -> TestReport:
    return friedman_from_ranks(table.avg_ranks, table.n_datasets, table.model_names, q_alpha)


def sign_test(wins: int, ties: int, losses: int, alpha: float = 0.05, n: int | None = None) -> str:
    """Win/tie/loss sign test between a row model and a column model.

    Ties are shared evenly (an odd one is dropped). A side is significantly
    better when its wins reach ``N/2 + z * sqrt(N)/2``.

    Returns:
        ``"row_better"``, ``"column_better"`` or ``"no_difference"``.
    """
    if min(wins, ties, losses) < 0:
        raise ValueError("win/tie/loss counts must be non-negative")
    total = wins + ties + losses
    N = total if n is None else n
    if N < 1 or N != total:
        raise ValueError(f"wins + ties + losses = {total} does not match N = {N}")
    thr = sign_test_threshold(N, alpha)
    half = ties // 2
    if wins + half >= thr:
        return "row_better"
    if losses + half >= thr:
        return "column_better"
    return "no_difference"


def sign_test_threshold(n: int, alpha: float = 0.05) -> float:
    z = 1.96 if alpha == 0.05 else float(norm.ppf(1 - alpha / 2))
    return n / 2 + z * math.sqrt(n) / 2


def read_score_table(text: str) -> tuple[list[str], list[str], np.ndarray]:
    """Parse a CSV score matrix (rows datasets, columns models).

    A leading non-numeric column (e.g. ``dataset``) is taken as row labels.
    Returns ``(model_names, row_labels, scores)``.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise ValueError("score table needs a header and at least one row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]

    def numeric(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    label_col = not all(numeric(r[0]) for r in body)
    start = 1 if label_col else 0
    names = header[start:]
    labels = [r[0] for r in body] if label_col else [str(i) for i in range(len(body))]
    try:
        scores = np.array([[float(c) for c in r[start:]] for r in body])
    except ValueError as exc:
        raise ValueError(f"non-numeric score: {exc}") from exc
    if scores.ndim != 2 or scores.shape[1] != len(names):
        raise ValueError("ragged score table")
    return names, labels, scores
