"""Rate functions, per-bicluster statistics, and the criterion F.

The criterion for labels (g, h) is

    F(g, h) = m * n * sum_kl  p_k * q_l * f(Xbar_kl)
            = sum_kl  N_kl * f(S_kl / N_kl),

where S_kl and N_kl are the within-bicluster sum and size, and f is one of
the three convex rate functions (bernoulli, poisson, gaussian).  The scale
used at fit time is always 1; any true generative scale lives only in the
generator spec.

Sums of rate terms use math.fsum so F is exactly invariant under
relabeling permutations of the classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PartitionError
from .model import DataMatrix, LabelAssignment

RATE_KINDS = ("bernoulli", "poisson", "gaussian")

#: absolute tolerance below which two move deltas count as tied
TIE_TOL = 1e-12


@dataclass(frozen=True)
class RateFunction:
    """One of the three convex rate functions, vectorized over means.

    Boundary conventions: x*log(x) -> 0 as x -> 0, so the bernoulli rate is
    0 at both endpoints and the poisson rate is 0 at zero.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in RATE_KINDS:
            raise ValueError(f"unknown rate kind {self.kind!r}")

    @property
    def domain(self) -> str:
        return {"bernoulli": "[0, 1]", "poisson": "[0, inf)", "gaussian": "(-inf, inf)"}[
            self.kind
        ]

    def check_domain(self, mu) -> None:
        mu = np.asarray(mu, dtype=np.float64)
        if self.kind == "bernoulli":
            bad = (mu < 0) | (mu > 1)
        elif self.kind == "poisson":
            bad = mu < 0
        else:
            return
        if np.any(bad):
            offending = float(np.asarray(mu)[bad][0]) if mu.ndim else float(mu)
            raise DomainError(
                f"mean {offending} outside {self.kind} rate domain {self.domain}"
            )

    def evaluate(self, mu):
        """f(mu), elementwise; raises DomainError outside the domain."""
        mu = np.asarray(mu, dtype=np.float64)
        self.check_domain(mu)
        if self.kind == "gaussian":
            out = 0.5 * mu * mu
        elif self.kind == "poisson":
            out = np.zeros_like(mu)
            pos = mu > 0
            mp = mu[pos]
            out[pos] = mp * np.log(mp) - mp
        else:
            out = np.zeros_like(mu)
            inner = (mu > 0) & (mu < 1)
            mi = mu[inner]
            out[inner] = mi * np.log(mi) + (1.0 - mi) * np.log1p(-mi)
        return out if out.ndim else float(out)

    __call__ = evaluate


def rate_function(kind: str) -> RateFunction:
    return RateFunction(kind)


@dataclass(frozen=True)
class BlockStats:
    """Per-bicluster sums and sizes for a labeled matrix.

    N_kl = row_counts[k] * col_counts[l] by construction.
    """

    S: np.ndarray
    row_counts: np.ndarray
    col_counts: np.ndarray

    @property
    def N(self) -> np.ndarray:
        return np.outer(self.row_counts, self.col_counts)

    def means(self) -> np.ndarray:
        """Xbar_kl = S_kl / N_kl; NaN where a bicluster is empty."""
        N = self.N
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(N > 0, self.S / np.maximum(N, 1), np.nan)


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


def block_stats(X: DataMatrix, labels: LabelAssignment) -> BlockStats:
    """Exact within-bicluster sums and class counts."""
    if labels.m != X.m or labels.n != X.n:
        raise ValueError(
            f"label dimensions ({labels.m}, {labels.n}) do not match matrix "
            f"({X.m}, {X.n})"
        )
    R = X.values @ _one_hot(labels.col_labels, labels.L)  # (m, L)
    S = np.zeros((labels.K, labels.L))
    np.add.at(S, labels.row_labels, R)
    return BlockStats(
        S=S, row_counts=labels.row_counts(), col_counts=labels.col_counts()
    )


def criterion_value(stats: BlockStats, f: RateFunction) -> float:
    """F = sum_kl N_kl * f(S_kl / N_kl).  Requires a nontrivial partition."""
    if stats.row_counts.min() == 0 or stats.col_counts.min() == 0:
        raise PartitionError("criterion undefined: some row or column class is empty")
    N = stats.N
    terms = N * f.evaluate(stats.S / N)
    return math.fsum(terms.ravel().tolist())


def _axis_term(S_line: np.ndarray, count: int, other_counts: np.ndarray,
               f: RateFunction) -> float:
    """Criterion contribution of one row class (or column class) line."""
    if count == 0:
        return 0.0
    N = count * other_counts
    return math.fsum((N * f.evaluate(S_line / N)).tolist())


def line_sums(X: DataMatrix, labels: LabelAssignment, axis: str, index: int) -> np.ndarray:
    """Sums of one row against column classes (axis='row'), or vice versa."""
    if axis == "row":
        return np.bincount(
            labels.col_labels, weights=X.values[index], minlength=labels.L
        )
    if axis == "col":
        return np.bincount(
            labels.row_labels, weights=X.values[:, index], minlength=labels.K
        )
    raise ValueError(f"axis must be 'row' or 'col', got {axis!r}")


def move_delta(stats: BlockStats, X: DataMatrix, labels: LabelAssignment,
               axis: str, index: int, new_label: int, f: RateFunction) -> float:
    """F(after) - F(before) for a single-label move, touching only the two
    affected classes."""
    if axis == "row":
        old = labels.row_labels[index]
        if new_label == old:
            return 0.0
        if new_label < 0 or new_label >= labels.K:
            raise ValueError("new_label out of range")
        if stats.row_counts[old] <= 1:
            raise PartitionError(
                f"moving row {index} would empty row class {old}"
            )
        r = line_sums(X, labels, "row", index)
        cnt, other = stats.row_counts, stats.col_counts
        S_old, S_new = stats.S[old], stats.S[new_label]
        before = _axis_term(S_old, cnt[old], other, f) + _axis_term(
            S_new, cnt[new_label], other, f
        )
        after = _axis_term(S_old - r, cnt[old] - 1, other, f) + _axis_term(
            S_new + r, cnt[new_label] + 1, other, f
        )
        return after - before
    if axis == "col":
        old = labels.col_labels[index]
        if new_label == old:
            return 0.0
        if new_label < 0 or new_label >= labels.L:
            raise ValueError("new_label out of range")
        if stats.col_counts[old] <= 1:
            raise PartitionError(
                f"moving column {index} would empty column class {old}"
            )
        c = line_sums(X, labels, "col", index)
        cnt, other = stats.col_counts, stats.row_counts
        S_old, S_new = stats.S[:, old], stats.S[:, new_label]
        before = _axis_term(S_old, cnt[old], other, f) + _axis_term(
            S_new, cnt[new_label], other, f
        )
        after = _axis_term(S_old - c, cnt[old] - 1, other, f) + _axis_term(
            S_new + c, cnt[new_label] + 1, other, f
        )
        return after - before
    raise ValueError(f"axis must be 'row' or 'col', got {axis!r}")
