"""Pure NumPy versions of the routines in ``_core.pyx``."""
from __future__ import annotations

import numpy as np


def sqdist_ard(X1: np.ndarray, X2: np.ndarray, inv_ls: np.ndarray) -> np.ndarray:
    if X2.shape[1] != X1.shape[1] or inv_ls.shape[0] != X1.shape[1]:
        raise ValueError("dimension mismatch")
    out = np.zeros((X1.shape[0], X2.shape[0]))
    for k in range(X1.shape[1]):
        t = (X1[:, k, None] - X2[None, :, k]) * inv_ls[k]
        out += t * t
    return out


def ard_contract(X: np.ndarray, inv_ls: np.ndarray, M: np.ndarray) -> np.ndarray:
    n, d = X.shape
    if M.shape != (n, n) or inv_ls.shape[0] != d:
        raise ValueError("dimension mismatch")
    out = np.empty(d)
    for k in range(d):
        t = (X[:, k, None] - X[None, :, k]) * inv_ls[k]
        out[k] = np.sum(M * (t * t))
    return out


def ou_recurse(
    x0: np.ndarray, mu: float, decay: float, scale: float, Z: np.ndarray
) -> np.ndarray:
    if x0.shape[0] != Z.shape[0]:
        raise ValueError("dimension mismatch")
    out = np.empty(Z.shape)
    x = np.array(x0, dtype=float)
    for k in range(Z.shape[1]):
        x = mu + (x - mu) * decay + scale * Z[:, k]
        out[:, k] = x
    return out
