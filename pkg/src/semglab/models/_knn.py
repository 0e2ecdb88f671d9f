"""Brute-force k-nearest-neighbour search with deterministic tie handling."""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True, fastmath=True)
def knn_search(train, test, k):
    """Indices and squared distances of the k nearest training rows.

    Neighbours are ordered by (distance, training index), so exact distance
    ties resolve to the earlier training row.
    """
    n_train, d = train.shape
    n_test = test.shape[0]
    idx = np.empty((n_test, k), np.int64)
    dist = np.empty((n_test, k), np.float64)
    for i in prange(n_test):
        best_d = np.full(k, np.inf)
        best_i = np.full(k, -1, np.int64)
        for j in range(n_train):
            s = 0.0
            for c in range(d):
                diff = test[i, c] - train[j, c]
                s += diff * diff
            if s < best_d[k - 1] or (s == best_d[k - 1] and j < best_i[k - 1]):
                # Insertion sort by (distance, index).
                p = k - 1
                while p > 0 and (best_d[p - 1] > s or (best_d[p - 1] == s and best_i[p - 1] > j)):
                    best_d[p] = best_d[p - 1]
                    best_i[p] = best_i[p - 1]
                    p -= 1
                best_d[p] = s
                best_i[p] = j
        for p in range(k):
            idx[i, p] = best_i[p]
            dist[i, p] = best_d[p]
    return idx, dist
