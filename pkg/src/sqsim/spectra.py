"""Low-lying spectra, ground-state scans, gap location, and overlap maps.

Eigenpairs come from a dense solver below a size threshold and from
Lanczos (ARPACK, shift-free, full residual check) above it.  Degenerate
pairs are re-orthogonalized deterministically and each eigenvector is
fixed to have its largest-magnitude amplitude positive real, so overlap
maps are reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .geometry import AtomArray, BlockadeGraph
from .model import (
    BasisSet,
    BudgetExceededError,
    HamiltonianOperator,
    build_hamiltonian,
    mis_config,
    named_state,
    zigzag_configs,
)

DENSE_CUTOFF = 2000
RESIDUAL_TOL = 1e-8


class EigenConvergenceError(RuntimeError):
    """The iterative eigensolver failed to reach the residual tolerance."""


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for k in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, k])))
        pivot = out[i, k]
        if pivot != 0:
            out[:, k] *= abs(pivot) / pivot
    return out


def _orthonormalize_degenerate(energies, vecs, tol=1e-9):
    """Gram-Schmidt inside (near-)degenerate clusters, in index order."""
    out = vecs.copy()
    k = 0
    n = len(energies)
    while k < n:
        m = k + 1
        while m < n and abs(energies[m] - energies[k]) < tol * max(1.0, abs(energies[k])):
            m += 1
        for a in range(k, m):
            for b in range(k, a):
                out[:, a] -= np.vdot(out[:, b], out[:, a]) * out[:, b]
            out[:, a] /= np.linalg.norm(out[:, a])
        k = m
    return out


def low_eigs(
    hamiltonian: HamiltonianOperator,
    k: int = 1,
    omega: float | None = None,
    delta: float | None = None,
):
    """k lowest eigenpairs of H(omega, delta); residuals checked to 1e-8."""
    if k < 1:
        raise ValueError("k must be >= 1")
    dim = hamiltonian.dim
    if k >= dim:
        k = dim
    if dim <= DENSE_CUTOFF or k >= dim - 1:
        h = hamiltonian.dense(omega, delta)
        energies, vecs = np.linalg.eigh(h)
        energies, vecs = energies[:k], vecs[:, :k]
    else:
        mat = hamiltonian.matrix(omega, delta)
        for attempt in range(10):
            try:
                energies, vecs = spla.eigsh(
                    mat, k=k, which="SA", tol=1e-12, maxiter=dim * (10 + 10 * attempt)
                )
                break
            except spla.ArpackNoConvergence:
                continue
        else:
            raise EigenConvergenceError("Lanczos did not converge within restart budget")
        order = np.argsort(energies)
        energies, vecs = energies[order], vecs[:, order]
        residual = np.linalg.norm(mat @ vecs - vecs * energies, axis=0)
        if np.any(residual > RESIDUAL_TOL):
            raise EigenConvergenceError(f"residual {residual.max():.2e} above tolerance")
    vecs = _orthonormalize_degenerate(energies, vecs.astype(complex))
    return energies, _fix_phases(vecs)


@dataclass
class SpectrumScan:
    """Per-detuning low-lying energies, target overlaps, and ground-state
    observables over a scan grid."""

    deltas: np.ndarray
    energies: np.ndarray  # (n_grid, k)
    overlap_mis: np.ndarray  # (n_grid, k)
    overlap_zigzag: np.ndarray  # (n_grid, k)
    n_total: np.ndarray  # (n_grid,)
    n_per_atom: np.ndarray  # (n_grid, n_atoms)
    p_mis: np.ndarray  # (n_grid,)
    order: np.ndarray  # (n_grid,)

    def to_csv(self) -> str:
        k = self.energies.shape[1]
        header = (
            ["delta"]
            + [f"E{j}" for j in range(k)]
            + [f"ovl_mis_{j}" for j in range(k)]
            + [f"ovl_zz_{j}" for j in range(k)]
            + ["n_total", "P_mis", "O"]
        )
        lines = [",".join(header)]
        for i in range(self.deltas.size):
            row = (
                [self.deltas[i]]
                + list(self.energies[i])
                + list(self.overlap_mis[i])
                + list(self.overlap_zigzag[i])
                + [self.n_total[i], self.p_mis[i], self.order[i]]
            )
            lines.append(",".join(f"{x:.17g}" for x in row))
        return "\n".join(lines) + "\n"


def ground_scan(
    array: AtomArray,
    basis: BasisSet,
    interactions: np.ndarray,
    deltas,
    k: int = 2,
    omega: float = 1.0,
) -> SpectrumScan:
    """Ground state and low-lying structure across a detuning grid."""
    from .dyn_dense import DenseState, expectation_n, order_parameter_dense, state_probability

    h = build_hamiltonian(array, basis, interactions, omega=omega)
    L = array.chain_length
    mis = mis_config(L) if L else None
    zz = zigzag_configs(L) if (L or 0) >= 9 else None

    deltas = np.asarray(deltas, dtype=float)
    n_grid = deltas.size
    energies = np.zeros((n_grid, k))
    ovl_mis = np.zeros((n_grid, k))
    ovl_zz = np.zeros((n_grid, k))
    n_total = np.zeros(n_grid)
    n_per_atom = np.zeros((n_grid, array.n_atoms))
    p_mis = np.zeros(n_grid)
    order = np.zeros(n_grid)

    for i, d in enumerate(deltas):
        e, v = low_eigs(h, k=k, delta=d)
        energies[i] = e[:k]
        gs = DenseState(basis, v[:, 0])
        n_vec = expectation_n(gs)
        n_per_atom[i] = n_vec
        n_total[i] = n_vec.sum()
        if mis is not None:
            idx = basis.index_of(mis)
            ovl_mis[i] = np.abs(v[idx, :k]) ** 2
            p_mis[i] = state_probability(gs, mis)
        if zz is not None:
            iz, izb = basis.index_of(zz[0]), basis.index_of(zz[1])
            ovl_zz[i] = np.abs(v[iz, :k]) ** 2 + np.abs(v[izb, :k]) ** 2
            order[i] = order_parameter_dense(gs, L)
    return SpectrumScan(deltas, energies, ovl_mis, ovl_zz, n_total, n_per_atom, p_mis, order)


def gap_at(hamiltonian: HamiltonianOperator, delta: float, omega: float = 1.0) -> float:
    e, _ = low_eigs(hamiltonian, k=2, omega=omega, delta=delta)
    return float(e[1] - e[0])


def min_gap(
    array: AtomArray,
    basis: BasisSet,
    interactions: np.ndarray,
    delta_window: tuple[float, float],
    n_coarse: int = 17,
    resolution: float = 1e-4,
    omega: float = 1.0,
) -> tuple[float, float]:
    """Location and value of the minimum gap E1 - E0 inside a window.

    A coarse grid brackets the minimum and golden-section search refines
    the bracket down to the requested detuning resolution.
    """
    h = build_hamiltonian(array, basis, interactions, omega=omega)
    lo, hi = delta_window
    grid = np.linspace(lo, hi, n_coarse)
    gaps = np.array([gap_at(h, d, omega) for d in grid])
    i = int(np.argmin(gaps))
    if i == 0 or i == n_coarse - 1:
        raise ValueError("no interior gap minimum in the window")
    a, b = grid[i - 1], grid[i + 1]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = gap_at(h, c, omega), gap_at(h, d, omega)
    while (b - a) > resolution:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = gap_at(h, c, omega)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = gap_at(h, d, omega)
    mid = 0.5 * (a + b)
    return float(mid), float(gap_at(h, mid, omega))


def instantaneous_overlaps(checkpoints, hamiltonian: HamiltonianOperator, k: int = 6):
    """Overlap-squared of checkpointed states with the k lowest eigenstates
    of the instantaneous Hamiltonian at each checkpoint's (omega, delta).

    Returns (times, overlaps) with overlaps of shape (n_checkpoints, k);
    rows sum to at most 1 (exactly 1 when k equals the basis dimension).
    """
    if not checkpoints:
        raise ValueError("no checkpoints supplied")
    times = np.array([c.t for c in checkpoints])
    out = np.zeros((len(checkpoints), min(k, hamiltonian.dim)))
    for i, c in enumerate(checkpoints):
        _, vecs = low_eigs(hamiltonian, k=min(k, hamiltonian.dim), omega=c.omega, delta=c.delta)
        out[i] = np.abs(vecs.conj().T @ c.amplitudes) ** 2
    return times, out


def count_independent_sets(graph: BlockadeGraph, subset=None, max_states: int = 1 << 20) -> int:
    """Exact number of independent sets of the induced subgraph.

    Runs a frontier dynamic program over the vertex order (the
    transfer-matrix sweep for chain-like graphs, where the frontier stays
    a few vertices wide); an overly wide frontier exceeds the state budget
    and raises.
    """
    verts = sorted(subset) if subset is not None else list(range(graph.n_vertices))
    n = len(verts)
    if n == 0:
        return 1
    masks = graph.adjacency_masks()
    nbrs = {v: {u for u in verts if (masks[v] >> u) & 1} for v in verts}
    index = {v: i for i, v in enumerate(verts)}
    # a placed vertex can retire once its last neighbour has been placed
    last_needed = {
        v: max((index[u] for u in nbrs[v]), default=index[v]) for v in verts
    }

    states: dict[tuple, int] = {(): 1}  # selected frontier vertices -> count
    frontier: set[int] = set()
    for i, v in enumerate(verts):
        prev_nbrs = nbrs[v] & frontier
        new: dict[tuple, int] = {}
        for sel, cnt in states.items():
            new[sel] = new.get(sel, 0) + cnt  # v not selected
            if not prev_nbrs.intersection(sel):
                key = tuple(sorted(sel + (v,)))
                new[key] = new.get(key, 0) + cnt
        frontier.add(v)
        retire = {u for u in frontier if last_needed[u] <= i}
        if retire:
            frontier -= retire
            merged: dict[tuple, int] = {}
            for sel, cnt in new.items():
                key = tuple(u for u in sel if u not in retire)
                merged[key] = merged.get(key, 0) + cnt
            new = merged
        if len(new) > max_states:
            raise BudgetExceededError("independent-set DP frontier exceeds budget")
        states = new
    return sum(states.values())
