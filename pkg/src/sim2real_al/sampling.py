"""Batch selection strategies for pool-based active learning.

Implements the proposed uniform-subsample-then-TopN selection next to
the usual baselines: random, plain TopN, greedy k-center (coreset),
BALD/BatchBALD mutual information, and an uncertainty-weighted k-means
(CLUE-style) diversity selector.

All selectors are deterministic given their seed and return exactly B
distinct ids from the pool.  Ties break toward the smaller id.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

STRATEGIES = ("random", "topn", "subsample_topn", "coreset", "batchbald", "clue")


@dataclass
class SelectionConfig:
    strategy: str = "subsample_topn"
    batch_size: int = 20
    subsample_fraction: float = 0.5
    mc_count: int = 100

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; "
                             f"expected one of {STRATEGIES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 < self.subsample_fraction <= 1.0):
            raise ValueError("subsample_fraction must lie in (0, 1]")
        if self.mc_count < 1:
            raise ValueError("mc_count must be >= 1")


def select_random(pool_ids, b: int, seed) -> list:
    """Uniform sample of b pool ids without replacement."""
    pool_ids = list(pool_ids)
    if b > len(pool_ids):
        raise ValueError(f"batch size {b} exceeds pool size {len(pool_ids)}")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(pool_ids), size=b, replace=False)
    return [pool_ids[i] for i in picked]


def select_topn(scores, b: int) -> list:
    """Ids of the b largest scores, sorted by descending score.

    scores: iterable of (id, score) pairs.  Equal scores break toward
    the smaller id.
    """
    scores = list(scores)
    if b > len(scores):
        raise ValueError(f"batch size {b} exceeds candidate count {len(scores)}")
    ranked = sorted(scores, key=lambda item: (-item[1], item[0]))
    return [item[0] for item in ranked[:b]]


def subsample_size(p: float, pool_size: int) -> int:
    return math.ceil(p * pool_size)


def select_subsample_topn(pool_ids, score_fn, p: float, b: int, seed) -> list:
    """Uniformly sub-sample ceil(p * |pool|) ids, then TopN among them.

    Only the sub-sampled ids are scored (score_fn(id) -> real), so the
    selected label distribution follows the pool distribution instead
    of concentrating on whatever the raw scores favor.
    """
    pool_ids = list(pool_ids)
    m = subsample_size(p, len(pool_ids))
    if b > m:
        raise ValueError("sub-sample too small for batch")
    rng = np.random.default_rng(seed)
    drawn = rng.choice(len(pool_ids), size=m, replace=False)
    candidates = [(pool_ids[i], score_fn(pool_ids[i])) for i in drawn]
    return select_topn(candidates, b)


def select_coreset(pool_features, labeled_features, b: int) -> list[int]:
    """Greedy k-center selection over Euclidean feature distances.

    Repeatedly picks the pool point farthest from its nearest
    already-covered point (labeled set plus picks so far).  With an
    empty labeled set the first pick maximizes distance to the pool
    centroid.  Returned ids are row indices into pool_features.
    """
    pool = np.atleast_2d(np.asarray(pool_features, dtype=float))
    if pool.shape[0] == 0:
        raise ValueError("pool must be nonempty")
    if b > pool.shape[0]:
        raise ValueError(f"batch size {b} exceeds pool size {pool.shape[0]}")
    labeled = np.asarray(labeled_features, dtype=float)
    picked: list[int] = []
    if labeled.size:
        labeled = np.atleast_2d(labeled)
        if labeled.shape[1] != pool.shape[1]:
            raise ValueError("pool and labeled feature dimensions differ")
        min_dist = cdist(pool, labeled).min(axis=1)
    else:
        # no covered points yet: first pick is farthest from the pool centroid
        centroid = pool.mean(axis=0, keepdims=True)
        first = int(np.argmax(cdist(pool, centroid)[:, 0]))
        picked.append(first)
        min_dist = cdist(pool, pool[first:first + 1])[:, 0]
        min_dist[first] = -np.inf

    while len(picked) < b:
        idx = int(np.argmax(min_dist))  # first max = smallest id on ties
        picked.append(idx)
        dist_new = cdist(pool, pool[idx:idx + 1])[:, 0]
        min_dist = np.minimum(min_dist, dist_new)
        min_dist[idx] = -np.inf
    return picked


def covering_radius(pool_features, center_ids, labeled_features=None) -> float:
    """Max over pool points of the distance to its nearest center.

    Used as the k-center objective; centers are pool rows given by id
    plus any labeled features.
    """
    pool = np.atleast_2d(np.asarray(pool_features, dtype=float))
    centers = [pool[list(center_ids)]] if len(center_ids) else []
    if labeled_features is not None and np.asarray(labeled_features).size:
        centers.append(np.atleast_2d(np.asarray(labeled_features, dtype=float)))
    if not centers:
        raise ValueError("need at least one center")
    stacked = np.vstack(centers)
    return float(cdist(pool, stacked).min(axis=1).max())


def bald_scores(prob_samples) -> np.ndarray:
    """Mutual information H(mean_t p) - mean_t H(p) per item.

    prob_samples: (N, T, C) stochastic predictive distributions.
    """
    probs = np.asarray(prob_samples, dtype=float)
    mean = probs.mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        h_mean = -np.where(mean > 0, mean * np.log(mean), 0.0).sum(axis=-1)
        h_each = -np.where(probs > 0, probs * np.log(probs), 0.0).sum(axis=-1)
    return h_mean - h_each.mean(axis=1)


def select_batchbald(prob_samples, b: int, mc_count: int = 100, seed=0) -> list[int]:
    """Greedy batch selection by joint mutual information.

    prob_samples: per-id (N, T, C) predictive samples sharing the same
    T posterior draws.  The first pick uses the exact BALD score; later
    picks estimate the joint entropy of the grown batch with mc_count
    Monte-Carlo configuration draws of the already-selected items and
    an exact sum over the candidate's classes.
    """
    probs = np.asarray(prob_samples, dtype=float)
    if probs.ndim != 3:
        raise ValueError("prob_samples must be (N, T, C)")
    n, t, c = probs.shape
    if t < 2:
        raise ValueError("mutual information undefined")
    if b > n:
        raise ValueError(f"batch size {b} exceeds pool size {n}")

    with np.errstate(divide="ignore", invalid="ignore"):
        h_cond = -np.where(probs > 0, probs * np.log(probs), 0.0).sum(axis=-1).mean(axis=1)

    rng = np.random.default_rng(seed)
    selected: list[int] = []
    available = np.ones(n, dtype=bool)

    first = bald_scores(probs)
    first[~available] = -np.inf
    pick = int(np.argmax(first))
    selected.append(pick)
    available[pick] = False

    while len(selected) < b:
        # sample mc_count label configurations of the selected batch from
        # the plug-in joint (1/T) sum_t prod_i p_it
        k = mc_count
        t_draws = rng.integers(0, t, size=k)
        log_w = np.zeros((k, t))
        for i in selected:
            cdf = probs[i, t_draws].cumsum(axis=1)  # (k, C)
            y = (cdf < rng.random(k)[:, None]).sum(axis=1)
            y = np.minimum(y, c - 1)
            with np.errstate(divide="ignore"):
                log_w += np.log(probs[i][:, y].T)  # (k, t)
        # posterior weights over t given each sampled configuration
        log_joint = np.logaddexp.reduce(log_w, axis=1) - np.log(t)
        w = np.exp(log_w - log_w.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        h_batch = float(-log_joint.mean())

        # candidate conditional entropy H(y_c | batch config), exact in y_c
        cond_probs = np.einsum("kt,ntc->nkc", w, probs)
        with np.errstate(divide="ignore", invalid="ignore"):
            h_c_given = -np.where(cond_probs > 0,
                                  cond_probs * np.log(cond_probs),
                                  0.0).sum(axis=-1).mean(axis=1)
        joint_mi = h_batch + h_c_given - (h_cond[list(selected)].sum() + h_cond)
        joint_mi[~available] = -np.inf
        pick = int(np.argmax(joint_mi))
        selected.append(pick)
        available[pick] = False
    return selected


def select_clue(pool_features, uncertainties, b: int, seed=0,
                max_iter: int = 50) -> list[int]:
    """Uncertainty-weighted k-means selection (diversity + uncertainty).

    Runs weighted k-means with k = b (k-means++-style seeding, weights
    given by the uncertainties) and returns the pool id nearest each
    final centroid, deduplicated by next-nearest.  All-zero weights
    fall back to unweighted k-means with a warning.
    """
    pool = np.atleast_2d(np.asarray(pool_features, dtype=float))
    weights = np.asarray(uncertainties, dtype=float)
    n = pool.shape[0]
    if n == 0:
        raise ValueError("pool must be nonempty")
    if weights.shape[0] != n:
        raise ValueError("need one uncertainty per pool point")
    if np.any(weights < 0):
        raise ValueError("uncertainties must be >= 0")
    if b > n:
        raise ValueError(f"batch size {b} exceeds pool size {n}")
    if weights.sum() == 0:
        warnings.warn("all-zero uncertainties; falling back to unweighted k-means")
        weights = np.ones(n)

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(pool, weights, b, rng)
    for _ in range(max_iter):
        assign = cdist(pool, centroids).argmin(axis=1)
        new_centroids = centroids.copy()
        for j in range(b):
            mask = assign == j
            if not mask.any():
                continue
            w = weights[mask]
            if w.sum() > 0:
                new_centroids[j] = (pool[mask] * w[:, None]).sum(axis=0) / w.sum()
            else:
                new_centroids[j] = pool[mask].mean(axis=0)
        if np.allclose(new_centroids, centroids):
            centroids = new_centroids
            break
        centroids = new_centroids

    picked: list[int] = []
    taken = np.zeros(n, dtype=bool)
    for j in range(b):
        dist = cdist(pool, centroids[j:j + 1])[:, 0]
        dist[taken] = np.inf
        idx = int(np.argmin(dist))
        picked.append(idx)
        taken[idx] = True
    return picked


def _kmeanspp_init(pool, weights, k, rng):
    """k-means++ seeding with sample weights."""
    n = pool.shape[0]
    centroids = np.empty((k, pool.shape[1]))
    p = weights / weights.sum()
    first = rng.choice(n, p=p)
    centroids[0] = pool[first]
    min_sq = cdist(pool, centroids[0:1])[:, 0] ** 2
    for j in range(1, k):
        mass = weights * min_sq
        total = mass.sum()
        if total <= 0:
            # remaining points coincide with chosen centroids; spread by weight
            idx = rng.choice(n, p=p)
        else:
            idx = rng.choice(n, p=mass / total)
        centroids[j] = pool[idx]
        min_sq = np.minimum(min_sq, cdist(pool, centroids[j:j + 1])[:, 0] ** 2)
    return centroids
