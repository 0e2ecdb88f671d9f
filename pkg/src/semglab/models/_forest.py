"""Histogram-based random forest core, JIT-compiled.

Features are pre-quantised to at most 64 bins (per-feature training-set
quantiles); candidate thresholds are bin edges.  Trees are grown depth-first
with an explicit stack, Gini impurity, bootstrap resampling, and a fixed
number of candidate features per split.  All randomness comes from a
splitmix64 stream keyed by (seed, tree), so training is deterministic and
safe to parallelise over trees.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

N_BINS = 64

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _next_u64(state):
    s = state + _GOLDEN
    z = s
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return s, z


@njit(cache=True)
def _grow_tree(Xb, y, n_classes, tree_seed, max_depth, min_leaf, mtry,
               feat, thr, left, right, leaf):
    """Grow one tree in place; returns the number of nodes used."""
    n_total, d = Xb.shape
    state = tree_seed

    # Bootstrap sample of row indices.
    idx = np.empty(n_total, np.int64)
    for i in range(n_total):
        state, z = _next_u64(state)
        idx[i] = np.int64(z % np.uint64(n_total))

    max_nodes = feat.shape[0]
    stack_node = np.empty(max_nodes, np.int32)
    stack_lo = np.empty(max_nodes, np.int64)
    stack_hi = np.empty(max_nodes, np.int64)
    stack_depth = np.empty(max_nodes, np.int32)

    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n_total
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    tot = np.empty(n_classes, np.int64)
    cl = np.empty(n_classes, np.int64)
    feat_pool = np.empty(d, np.int64)
    hist = np.empty((mtry, N_BINS, n_classes), np.int64)
    scratch = np.empty(n_total, np.int64)

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        m = hi - lo

        for k in range(n_classes):
            tot[k] = 0
        for ii in range(lo, hi):
            tot[y[idx[ii]]] += 1
        best_k = 0
        best_c = tot[0]
        for k in range(1, n_classes):
            if tot[k] > best_c:
                best_c = tot[k]
                best_k = k

        if depth >= max_depth or m < 2 * min_leaf or best_c == m:
            feat[node] = -1
            leaf[node] = best_k
            continue

        # Candidate features: partial Fisher-Yates over all d.
        for j in range(d):
            feat_pool[j] = j
        for j in range(mtry):
            state, z = _next_u64(state)
            r = j + np.int64(z % np.uint64(d - j))
            tmp = feat_pool[j]
            feat_pool[j] = feat_pool[r]
            feat_pool[r] = tmp

        for fj in range(mtry):
            for b in range(N_BINS):
                for k in range(n_classes):
                    hist[fj, b, k] = 0
        for ii in range(lo, hi):
            s = idx[ii]
            c = y[s]
            for fj in range(mtry):
                hist[fj, Xb[s, feat_pool[fj]], c] += 1

        ssq_tot = 0.0
        for k in range(n_classes):
            ssq_tot += float(tot[k]) * float(tot[k])
        parent_score = ssq_tot / m

        best_gain = 1e-12
        best_f = -1
        best_b = -1
        for fj in range(mtry):
            nl = 0
            ssql = 0.0
            ssqr = ssq_tot
            for k in range(n_classes):
                cl[k] = 0
            for b in range(N_BINS - 1):
                for k in range(n_classes):
                    h = hist[fj, b, k]
                    if h > 0:
                        cr_old = tot[k] - cl[k]
                        ssql += float(2 * cl[k] * h + h * h)
                        ssqr += float(-2 * cr_old * h + h * h)
                        cl[k] += h
                        nl += h
                if nl < min_leaf:
                    continue
                nr = m - nl
                if nr < min_leaf:
                    break
                gain = ssql / nl + ssqr / nr - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_f = fj
                    best_b = b

        if best_f < 0:
            feat[node] = -1
            leaf[node] = best_k
            continue

        split_feature = feat_pool[best_f]
        # Stable partition of idx[lo:hi] around the chosen bin.
        n_left = 0
        for ii in range(lo, hi):
            if Xb[idx[ii], split_feature] <= best_b:
                n_left += 1
        pl = 0
        pr = n_left
        for ii in range(lo, hi):
            s = idx[ii]
            if Xb[s, split_feature] <= best_b:
                scratch[pl] = s
                pl += 1
            else:
                scratch[pr] = s
                pr += 1
        for ii in range(m):
            idx[lo + ii] = scratch[ii]

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        feat[node] = split_feature
        thr[node] = best_b
        left[node] = left_id
        right[node] = right_id

        stack_node[top] = left_id
        stack_lo[top] = lo
        stack_hi[top] = lo + n_left
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = right_id
        stack_lo[top] = lo + n_left
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1

    return n_nodes


@njit(cache=True, parallel=True)
def grow_forest(Xb, y, n_classes, n_trees, seed, max_depth, min_leaf, mtry,
                feat, thr, left, right, leaf, node_counts):
    for t in prange(n_trees):
        tree_seed = (np.uint64(seed) + np.uint64(t + 1) * _GOLDEN) | np.uint64(1)
        node_counts[t] = _grow_tree(Xb, y, n_classes, tree_seed, max_depth, min_leaf,
                                    mtry, feat[t], thr[t], left[t], right[t], leaf[t])


@njit(cache=True, parallel=True)
def forest_votes(Xb, feat, thr, left, right, leaf, offsets, n_classes):
    n = Xb.shape[0]
    n_trees = offsets.shape[0] - 1
    votes = np.zeros((n, n_classes), np.int32)
    for i in prange(n):
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feat[base + node] >= 0:
                if Xb[i, feat[base + node]] <= thr[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            votes[i, leaf[base + node]] += 1
    return votes


def compute_bin_edges(X: np.ndarray, n_bins: int = N_BINS) -> np.ndarray:
    """Per-feature quantile edges, padded with +inf to a fixed width."""
    qs = np.linspace(0, 1, n_bins + 1)[1:-1]
    edges = np.quantile(X, qs, axis=0).T  # (d, n_bins - 1)
    out = np.full((X.shape[1], n_bins - 1), np.inf)
    for f in range(X.shape[1]):
        e = np.unique(edges[f])
        out[f, : e.size] = e
    return out


def bin_features(X: np.ndarray, edges: np.ndarray) -> np.ndarray:
    codes = np.empty(X.shape, np.uint8)
    for f in range(X.shape[1]):
        codes[:, f] = np.searchsorted(edges[f], X[:, f], side="right")
    return codes


def fit_forest(X: np.ndarray, y_idx: np.ndarray, n_classes: int, n_trees: int,
               seed: int, max_depth: int, min_leaf: int) -> dict:
    n, d = X.shape
    mtry = max(1, int(np.sqrt(d)))
    edges = compute_bin_edges(X)
    Xb = bin_features(X, edges)
    max_nodes = 2 * n + 3
    feat = np.full((n_trees, max_nodes), -1, np.int32)
    thr = np.zeros((n_trees, max_nodes), np.uint8)
    left = np.zeros((n_trees, max_nodes), np.int32)
    right = np.zeros((n_trees, max_nodes), np.int32)
    leaf = np.zeros((n_trees, max_nodes), np.int32)
    node_counts = np.zeros(n_trees, np.int64)
    grow_forest(Xb, y_idx.astype(np.int64), n_classes, n_trees, seed,
                max_depth, min_leaf, mtry, feat, thr, left, right, leaf, node_counts)
    # Compact the per-tree arrays into one concatenated block.
    offsets = np.zeros(n_trees + 1, np.int64)
    offsets[1:] = np.cumsum(node_counts)
    total = int(offsets[-1])
    cfeat = np.empty(total, np.int32)
    cthr = np.empty(total, np.uint8)
    cleft = np.empty(total, np.int32)
    cright = np.empty(total, np.int32)
    cleaf = np.empty(total, np.int32)
    for t in range(n_trees):
        a, b = offsets[t], offsets[t + 1]
        cnt = int(node_counts[t])
        cfeat[a:b] = feat[t, :cnt]
        cthr[a:b] = thr[t, :cnt]
        cleft[a:b] = left[t, :cnt]
        cright[a:b] = right[t, :cnt]
        cleaf[a:b] = leaf[t, :cnt]
    return {
        "edges": edges,
        "feat": cfeat,
        "thr": cthr,
        "left": cleft,
        "right": cright,
        "leaf": cleaf,
        "offsets": offsets,
    }


def forest_predict_idx(params: dict, X: np.ndarray, n_classes: int) -> np.ndarray:
    Xb = bin_features(X, params["edges"])
    votes = forest_votes(Xb, params["feat"], params["thr"], params["left"],
                         params["right"], params["leaf"], params["offsets"], n_classes)
    return np.argmax(votes, axis=1)
