"""Derived quantities: order parameter, entropy bounds, scaling fits, and
quench-scan summaries.

The zigzag order parameter averages connected diagonal correlations over
the bulk doublets and is 1 for an equal mixture of the two zigzag
patterns, 0 for the symmetric superposition state and for the MIS.
Scaling fits are straight lines to log(P) with inverse-variance weights,
matching the convention P = p * b^(N - N0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import AtomArray, blockade_graph, DEFAULT_C6
from .model import diagonal_bulk_pairs


def order_parameter(source, L: int) -> float:
    """Connected diagonal doublet correlator from a state or a ShotSet.

    Accepts a DenseState, an MPS-like object exposing expectation_n /
    correlation_nn, or a ShotSet (empirical means).
    """
    pairs = diagonal_bulk_pairs(L)
    if hasattr(source, "bitstrings"):  # ShotSet
        bits = source.bitstrings.astype(float)
        n = bits.mean(axis=0)
        connected = [
            (bits[:, i] * bits[:, j]).mean() - n[i] * n[j] for i, j in pairs
        ]
    elif hasattr(source, "correlation_nn"):  # MPS
        n = source.expectation_n()
        connected = [source.correlation_nn(i, j) - n[i] * n[j] for i, j in pairs]
    else:  # DenseState
        from .dyn_dense import expectation_n, pair_correlations

        n = expectation_n(source)
        nn = pair_correlations(source, pairs)
        connected = [nn[k] - n[i] * n[j] for k, (i, j) in enumerate(pairs)]
    return float(4.0 / (L - 7) * np.sum(connected))


def entropy_upper_bound(
    array: AtomArray, cut: int, c6: float = DEFAULT_C6, omega: float = 1.0
) -> float:
    """Hard-core bound on the bipartite entropy at a chain-site cut.

    The entropy across the cut can never exceed the log of the smaller
    half's constrained Hilbert dimension, counted as the number of
    independent sets of the induced blockade subgraph.
    """
    from .dyn_dense import left_atom_count
    from .spectra import count_independent_sets

    L = array.chain_length
    if L is None:
        raise ValueError("entropy bound needs a chain geometry")
    m = left_atom_count(L, cut)
    graph = blockade_graph(array, c6, omega)
    d_left = count_independent_sets(graph, range(m))
    d_right = count_independent_sets(graph, range(m, array.n_atoms))
    return float(np.log(min(d_left, d_right)))


@dataclass(frozen=True)
class ScalingFit:
    """Exponential fit P = prefactor * base^(N - n0) on log-probabilities."""

    sizes: np.ndarray
    probabilities: np.ndarray
    errors: np.ndarray | None
    prefactor: float
    base: float
    n0: int
    residuals: np.ndarray  # log P - fit, per point

    def to_json(self) -> str:
        return json.dumps(
            {
                "sizes": self.sizes.tolist(),
                "probabilities": self.probabilities.tolist(),
                "errors": None if self.errors is None else self.errors.tolist(),
                "prefactor": self.prefactor,
                "base": self.base,
                "n0": self.n0,
                "residuals": self.residuals.tolist(),
            }
        )


def scaling_fit(sizes, probs, errors=None, n0: int = 13) -> ScalingFit:
    """Weighted least squares of log(P) against N - n0.

    Weights are inverse variances of log(P), i.e. (P/err)^2; zero or
    missing errors fall back to an unweighted fit.  Nonpositive
    probabilities are rejected (they carry no log-domain information).
    """
    sizes = np.asarray(sizes, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if sizes.size < 2:
        raise ValueError("need at least two points")
    if np.any(np.diff(sizes) <= 0):
        raise ValueError("sizes must be strictly increasing")
    if np.any(probs <= 0):
        raise ValueError("nonpositive probabilities cannot be fit in the log domain")
    y = np.log(probs)
    x = sizes - n0
    if errors is not None:
        errors = np.asarray(errors, dtype=float)
        if np.any(errors < 0):
            raise ValueError("errors must be nonnegative")
        w = np.where(errors > 0, (probs / np.where(errors > 0, errors, 1.0)) ** 2, 0.0)
        if not np.any(w > 0):
            w = np.ones_like(y)
        elif np.any(w == 0):
            w = np.where(w > 0, w, w[w > 0].max())
    else:
        w = np.ones_like(y)
    A = np.column_stack([np.ones_like(x), x])
    wa = A * w[:, None]
    coeff = np.linalg.solve(A.T @ wa, A.T @ (w * y))
    log_p, log_b = coeff
    residuals = y - A @ coeff
    err_arr = None if errors is None else errors
    return ScalingFit(sizes, probs, err_arr, float(np.exp(log_p)), float(np.exp(log_b)),
                      n0, residuals)


@dataclass(frozen=True)
class QuenchScan:
    """Summary of a P(T_q) trace: first revival and overall optimum."""

    t_q: np.ndarray
    p: np.ndarray
    errors: np.ndarray | None
    first_revival_t: float
    first_revival_p: float
    argmax_t: float
    max_p: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "t_q": self.t_q.tolist(),
                "p": self.p.tolist(),
                "errors": None if self.errors is None else self.errors.tolist(),
                "first_revival_t": self.first_revival_t,
                "first_revival_p": self.first_revival_p,
                "argmax_t": self.argmax_t,
                "max_p": self.max_p,
            }
        )


def quench_scan_summary(t_q, p, errors=None) -> QuenchScan:
    """Locate the first revival and the optimal quench duration.

    The first revival is the first interior 3-point local maximum lying
    above the short-quench baseline p[0]; no smoothing is applied.  Raises
    if the trace is monotone (no local maximum).
    """
    t_q = np.asarray(t_q, dtype=float)
    p = np.asarray(p, dtype=float)
    if t_q.size != p.size or t_q.size < 3:
        raise ValueError("need aligned grids with at least three points")
    if np.any(np.diff(t_q) <= 0):
        raise ValueError("t_q grid must be strictly increasing")
    first = None
    for k in range(1, p.size - 1):
        if p[k] >= p[k - 1] and p[k] >= p[k + 1] and p[k] > p[0]:
            first = k
            break
    if first is None:
        raise ValueError("no local maximum above the baseline: trace has no revival")
    k_max = int(np.argmax(p))
    err_arr = None if errors is None else np.asarray(errors, dtype=float)
    return QuenchScan(
        t_q,
        p,
        err_arr,
        float(t_q[first]),
        float(p[first]),
        float(t_q[k_max]),
        float(p[k_max]),
    )
