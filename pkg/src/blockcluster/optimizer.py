"""Criterion maximization: k-means initialization plus greedy label sweeps.

A sweep follows the Kernighan-Lin discipline:

1. for every row and column, score the best single-label move against the
   frozen current labeling;
2. apply the recorded moves in decreasing order of their step-1 score,
   skipping any move that has become illegal (would shrink a class below
   the minimum size), tracking the running criterion;
3. keep the prefix of applied moves with the highest running criterion
   (possibly the empty prefix).

Each item moves at most once per sweep, so a sweep never decreases the
criterion.  The running criterion is maintained incrementally; the state is
rebuilt from scratch at the start of every sweep, which cancels any
accumulated floating-point drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .criterion import (
    TIE_TOL,
    RateFunction,
    block_stats,
    criterion_value,
    rate_function,
)
from .errors import PartitionError
from .model import DataMatrix, LabelAssignment, derived_rng, derived_seed


@dataclass
class FitConfig:
    K: int
    L: int
    rate: str
    restarts: int = 1
    max_sweeps: int = 100
    min_frac: float = 0.0
    kmeans_iters: int = 50
    seed: int = 0
    tol: float = 1e-9  # relative criterion-improvement stopping threshold

    def __post_init__(self):
        if self.K < 1 or self.L < 1:
            raise ValueError("K and L must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if not 0.0 <= self.min_frac < 0.5:
            raise ValueError("min_frac must lie in [0, 0.5)")
        if self.kmeans_iters < 1:
            raise ValueError("kmeans_iters must be >= 1")


@dataclass
class FitResult:
    labels: LabelAssignment
    criterion: float
    sweep_trajectory: list[float] = field(default_factory=list)
    restart_index: int = 0
    converged: bool = False
    moves_applied: int = 0


def _min_count(frac: float, size: int) -> int:
    return max(1, int(math.ceil(frac * size)))


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n_points, n_centers)."""
    pp = np.einsum("ij,ij->i", points, points)
    cc = np.einsum("ij,ij->i", centers, centers)
    d = pp[:, None] - 2.0 * points @ centers.T + cc[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _kmeans_labels(points: np.ndarray, k: int, rng: np.random.Generator,
                   iters: int, starts: int = 10) -> np.ndarray:
    """Best of ``starts`` runs of Lloyd's algorithm (by within-cluster sum
    of squares), each with k-means++ seeding and empty-cluster repair."""
    best_labels, best_inertia = None, np.inf
    for _ in range(starts):
        labels = _kmeans_single(points, k, rng, iters)
        inertia = 0.0
        for j in range(k):
            cluster = points[labels == j]
            inertia += float(((cluster - cluster.mean(axis=0)) ** 2).sum())
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels


def _kmeans_single(points: np.ndarray, k: int, rng: np.random.Generator,
                   iters: int) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centers[:1]).ravel()
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[j] = points[idx]
        np.minimum(closest, _sq_dists(points, centers[j : j + 1]).ravel(), out=closest)

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        d = _sq_dists(points, centers)
        labels = d.argmin(axis=1)
        own = d[np.arange(n), labels]
        for j in range(k):
            if not np.any(labels == j):
                # re-seed the emptied centroid at the point farthest from
                # its current centroid
                idx = int(own.argmax())
                centers[j] = points[idx]
                labels[idx] = j
                own[idx] = 0.0
        new_centers = np.empty_like(centers)
        for j in range(k):
            new_centers[j] = points[labels == j].mean(axis=0)
        if np.array_equal(new_centers, centers):
            break
        centers = new_centers
    return labels


def kmeans_init(X: DataMatrix, K: int, L: int, seed: int, iters: int = 50,
                starts: int = 10) -> LabelAssignment:
    """k-means applied separately to the rows and to the columns of X."""
    if K > X.m or L > X.n:
        raise ValueError("K (L) may not exceed the number of rows (columns)")
    g = _kmeans_labels(X.values, K, derived_rng(seed, 0), iters, starts)
    h = _kmeans_labels(
        np.ascontiguousarray(X.values.T), L, derived_rng(seed, 1), iters, starts
    )
    return LabelAssignment(row_labels=g, col_labels=h, K=K, L=L)


class _SweepState:
    """Incremental bookkeeping for one sweep: bicluster sums, class counts,
    and row/column line sums against the opposite partition."""

    def __init__(self, X: DataMatrix, labels: LabelAssignment, f: RateFunction,
                 min_frac: float):
        self.X = X.values
        self.f = f
        self.K, self.L = labels.K, labels.L
        self.g = labels.row_labels.copy()
        self.h = labels.col_labels.copy()
        self.rcnt = labels.row_counts()
        self.ccnt = labels.col_counts()
        self.min_rows = _min_count(min_frac, labels.m)
        self.min_cols = _min_count(min_frac, labels.n)
        if self.rcnt.min() < self.min_rows or self.ccnt.min() < self.min_cols:
            raise PartitionError(
                "input labeling violates the minimum class-size constraint"
            )
        H = np.zeros((labels.n, self.L))
        H[np.arange(labels.n), self.h] = 1.0
        self.R = self.X @ H  # (m, L) row sums by column class
        G = np.zeros((labels.m, self.K))
        G[np.arange(labels.m), self.g] = 1.0
        self.C = G.T @ self.X  # (K, n) column sums by row class
        self.S = np.zeros((self.K, self.L))
        np.add.at(self.S, self.g, self.R)

    def _class_terms(self, lines: np.ndarray, count: int,
                     other_counts: np.ndarray) -> np.ndarray:
        """Criterion contribution of one class with the given line sums;
        lines has shape (t, len(other_counts))."""
        if count == 0:
            return np.zeros(lines.shape[0])
        N = (count * other_counts)[None, :]
        return (N * self.f.evaluate(lines / N)).sum(axis=1)

    def best_row_moves(self):
        """(best_label, delta) per row under the frozen labeling; staying
        put wins ties within TIE_TOL, then the smallest label index."""
        m = self.g.size
        d = np.full((m, self.K), -np.inf)
        for a in range(self.K):
            rows = np.where(self.g == a)[0]
            if rows.size == 0:
                continue
            d[rows, a] = 0.0
            if self.rcnt[a] - 1 < self.min_rows:
                continue
            Ra = self.R[rows]
            base_a = self._class_terms(self.S[a][None, :], self.rcnt[a], self.ccnt)[0]
            term_a = self._class_terms(self.S[a][None, :] - Ra, self.rcnt[a] - 1, self.ccnt)
            for k in range(self.K):
                if k == a:
                    continue
                base_k = self._class_terms(
                    self.S[k][None, :], self.rcnt[k], self.ccnt
                )[0]
                term_k = self._class_terms(
                    self.S[k][None, :] + Ra, self.rcnt[k] + 1, self.ccnt
                )
                d[rows, k] = term_a + term_k - base_a - base_k
        return self._pick(d, self.g)

    def best_col_moves(self):
        n = self.h.size
        d = np.full((n, self.L), -np.inf)
        for b in range(self.L):
            cols = np.where(self.h == b)[0]
            if cols.size == 0:
                continue
            d[cols, b] = 0.0
            if self.ccnt[b] - 1 < self.min_cols:
                continue
            Cb = self.C[:, cols].T  # (nb, K)
            base_b = self._class_terms(self.S[:, b][None, :], self.ccnt[b], self.rcnt)[0]
            term_b = self._class_terms(self.S[:, b][None, :] - Cb, self.ccnt[b] - 1, self.rcnt)
            for l in range(self.L):
                if l == b:
                    continue
                base_l = self._class_terms(
                    self.S[:, l][None, :], self.ccnt[l], self.rcnt
                )[0]
                term_l = self._class_terms(
                    self.S[:, l][None, :] + Cb, self.ccnt[l] + 1, self.rcnt
                )
                d[cols, l] = term_b + term_l - base_b - base_l
        return self._pick(d, self.h)

    @staticmethod
    def _pick(d: np.ndarray, current: np.ndarray):
        idx = np.arange(d.shape[0])
        best = d.max(axis=1)
        near = d >= (best - TIE_TOL)[:, None]
        choice = near.argmax(axis=1)
        keep = near[idx, current]
        label = np.where(keep, current, choice)
        delta = np.where(label == current, 0.0, best)
        return label, delta

    def row_move_legal(self, i: int) -> bool:
        return self.rcnt[self.g[i]] - 1 >= self.min_rows

    def col_move_legal(self, j: int) -> bool:
        return self.ccnt[self.h[j]] - 1 >= self.min_cols

    def apply_row_move(self, i: int, k: int) -> float:
        """Move row i to class k; returns the exact criterion delta."""
        a = self.g[i]
        r = self.R[i]
        before = (
            self._class_terms(self.S[a][None, :], self.rcnt[a], self.ccnt)[0]
            + self._class_terms(self.S[k][None, :], self.rcnt[k], self.ccnt)[0]
        )
        after = (
            self._class_terms(self.S[a][None, :] - r, self.rcnt[a] - 1, self.ccnt)[0]
            + self._class_terms(self.S[k][None, :] + r, self.rcnt[k] + 1, self.ccnt)[0]
        )
        self.S[a] -= r
        self.S[k] += r
        self.rcnt[a] -= 1
        self.rcnt[k] += 1
        self.C[a] -= self.X[i]
        self.C[k] += self.X[i]
        self.g[i] = k
        return after - before

    def apply_col_move(self, j: int, l: int) -> float:
        b = self.h[j]
        c = self.C[:, j]
        before = (
            self._class_terms(self.S[:, b][None, :], self.ccnt[b], self.rcnt)[0]
            + self._class_terms(self.S[:, l][None, :], self.ccnt[l], self.rcnt)[0]
        )
        after = (
            self._class_terms(self.S[:, b][None, :] - c, self.ccnt[b] - 1, self.rcnt)[0]
            + self._class_terms(self.S[:, l][None, :] + c, self.ccnt[l] + 1, self.rcnt)[0]
        )
        self.S[:, b] -= c
        self.S[:, l] += c
        self.ccnt[b] -= 1
        self.ccnt[l] += 1
        self.R[:, b] -= self.X[:, j]
        self.R[:, l] += self.X[:, j]
        self.h[j] = l
        return after - before


def _sweep(X: DataMatrix, labels: LabelAssignment, f: RateFunction,
           min_frac: float):
    """One full sweep; returns (labels, gain, moves_kept)."""
    state = _SweepState(X, labels, f, min_frac)
    f0 = criterion_value(block_stats(X, labels), f)

    row_label, row_delta = state.best_row_moves()
    col_label, col_delta = state.best_col_moves()
    items = [
        (row_delta[i], 0, i, row_label[i])
        for i in np.where(row_label != state.g)[0]
    ] + [
        (col_delta[j], 1, j, col_label[j])
        for j in np.where(col_label != state.h)[0]
    ]
    items.sort(key=lambda t: (-t[0], t[1], t[2]))

    g0, h0 = labels.row_labels, labels.col_labels
    applied: list[tuple[int, int, int]] = []
    running = f0
    best_f, best_t = f0, 0
    for _, axis, idx, target in items:
        if axis == 0:
            if not state.row_move_legal(idx):
                continue
            running += state.apply_row_move(idx, target)
        else:
            if not state.col_move_legal(idx):
                continue
            running += state.apply_col_move(idx, target)
        applied.append((axis, idx, target))
        if running > best_f:
            best_f, best_t = running, len(applied)

    if best_t == 0:
        return labels, 0.0, 0
    g, h = g0.copy(), h0.copy()
    for axis, idx, target in applied[:best_t]:
        if axis == 0:
            g[idx] = target
        else:
            h[idx] = target
    new_labels = LabelAssignment(row_labels=g, col_labels=h, K=labels.K, L=labels.L)
    gain = criterion_value(block_stats(X, new_labels), f) - f0
    if gain < 0.0:
        return labels, 0.0, 0
    return new_labels, gain, best_t


def kl_sweep(X: DataMatrix, labels: LabelAssignment, f: RateFunction,
             min_frac: float = 0.0):
    """One greedy sweep over all rows and columns; returns (labels, gain)."""
    new_labels, gain, _ = _sweep(X, labels, f, min_frac)
    return new_labels, gain


def _perturb(labels: LabelAssignment, rng: np.random.Generator, frac: float,
             min_rows: int, min_cols: int) -> LabelAssignment:
    """Randomly relabel a fraction of items, keeping class sizes legal."""
    for _ in range(20):
        g = labels.row_labels.copy()
        h = labels.col_labels.copy()
        nr = max(1, int(frac * g.size))
        nc = max(1, int(frac * h.size))
        g[rng.choice(g.size, size=nr, replace=False)] = rng.integers(labels.K, size=nr)
        h[rng.choice(h.size, size=nc, replace=False)] = rng.integers(labels.L, size=nc)
        if (
            np.bincount(g, minlength=labels.K).min() >= min_rows
            and np.bincount(h, minlength=labels.L).min() >= min_cols
        ):
            return LabelAssignment(row_labels=g, col_labels=h, K=labels.K, L=labels.L)
    return labels


def fit(X: DataMatrix, config: FitConfig, init: LabelAssignment | None = None) -> FitResult:
    """Maximize the criterion with random restarts; deterministic given config.

    ``init`` overrides the restart-0 initialization (used when several rate
    functions must share one k-means start).
    """
    f = rate_function(config.rate)
    min_rows = _min_count(config.min_frac, X.m)
    min_cols = _min_count(config.min_frac, X.n)
    best: FitResult | None = None
    for r in range(config.restarts):
        if r == 0 and init is not None:
            labels = init
        else:
            labels = kmeans_init(
                X, config.K, config.L,
                seed=derived_seed(config.seed, r),
                iters=config.kmeans_iters,
            )
        if r > 0:
            labels = _perturb(
                labels, derived_rng(config.seed, r, 1), 0.2, min_rows, min_cols
            )
        try:
            value = criterion_value(block_stats(X, labels), f)
        except PartitionError as exc:
            raise PartitionError(f"restart {r}: {exc}") from exc
        trajectory: list[float] = []
        moves = 0
        converged = False
        for _ in range(config.max_sweeps):
            labels, gain, kept = _sweep(X, labels, f, config.min_frac)
            value += gain
            moves += kept
            trajectory.append(value)
            if gain <= config.tol * max(1.0, abs(value)):
                converged = True
                break
        final = criterion_value(block_stats(X, labels), f)
        result = FitResult(
            labels=labels,
            criterion=final,
            sweep_trajectory=trajectory,
            restart_index=r,
            converged=converged,
            moves_applied=moves,
        )
        if best is None or result.criterion > best.criterion:
            best = result
    return best
