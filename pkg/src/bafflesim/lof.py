"""Local Outlier Factor of a query point against a fixed reference set.

Distances are Euclidean. The k-distance of a point counts duplicates as
separate neighbors, and its neighborhood keeps every point tied at the
k-distance; distances within a relative ``TIE_RTOL`` of it count as ties so
that summation order in the distance kernel cannot split a tie. Local reachability densities are capped at ``1 / EPS`` so that
stacks of identical points give a finite density and an LOF of exactly 1.
"""
import numpy as np

from .exceptions import ConfigurationError
from .kernels import pairwise_distances

EPS = 1e-12
TIE_RTOL = 1e-10


def lof_score(query, neighbors, k):
    """LOF_k of ``query`` given reference points ``neighbors`` (query excluded)."""
    S = np.ascontiguousarray(np.atleast_2d(np.asarray(neighbors, dtype=np.float64)))
    q = np.ascontiguousarray(np.asarray(query, dtype=np.float64).reshape(1, -1))
    m = S.shape[0]
    if m < 2:
        raise ConfigurationError("LOF needs at least two reference points")
    if q.shape[1] != S.shape[1]:
        raise ConfigurationError("query and neighbors differ in dimension")
    if not 1 <= k <= m:
        raise ConfigurationError(f"k={k} outside [1, {m}]")

    dist = pairwise_distances(S, S)
    # a reference point only has m-1 others to rank
    k_ref = min(k, m - 1)
    masked = dist.copy()
    np.fill_diagonal(masked, np.inf)
    kdist = np.sort(masked, axis=1)[:, k_ref - 1]

    neigh = masked <= kdist[:, None] * (1 + TIE_RTOL)
    reach = np.maximum(kdist[None, :], dist)
    mean_reach = (reach * neigh).sum(axis=1) / neigh.sum(axis=1)
    lrd = 1.0 / np.maximum(mean_reach, EPS)

    dq = pairwise_distances(q, S)[0]
    kdist_q = np.sort(dq)[k - 1]
    nq = dq <= kdist_q * (1 + TIE_RTOL)
    lrd_q = 1.0 / max(float(np.mean(np.maximum(kdist[nq], dq[nq]))), EPS)
    return float(np.mean(lrd[nq]) / lrd_q)
