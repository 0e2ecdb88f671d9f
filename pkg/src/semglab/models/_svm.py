"""Pegasos-style sub-gradient training for the linear hinge loss."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def pegasos_train(X, ybin, lam, perm):
    """One binary one-vs-rest weight vector.

    X includes the bias column; perm is an (epochs, n) array of visit orders;
    the step size at global step t is 1 / (lam * t).
    """
    n, d = X.shape
    w = np.zeros(d)
    t = 1.0
    epochs = perm.shape[0]
    for e in range(epochs):
        for jj in range(n):
            i = perm[e, jj]
            eta = 1.0 / (lam * t)
            margin = 0.0
            for c in range(d):
                margin += w[c] * X[i, c]
            margin *= ybin[i]
            decay = 1.0 - eta * lam
            if margin < 1.0:
                step = eta * ybin[i]
                for c in range(d):
                    w[c] = w[c] * decay + step * X[i, c]
            else:
                for c in range(d):
                    w[c] = w[c] * decay
            t += 1.0
    return w
