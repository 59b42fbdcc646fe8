"""Computational bases, the driven Rydberg Hamiltonian, and special states.

Configurations are stored as integers with bit i = atom i excited, so the
fixed atom order of :mod:`sqsim.geometry` (sites ascending, doublet top
before bottom) doubles as the bit order.  The Hamiltonian, in units of
Omega with times in 2*pi/Omega,

    H = (Omega/2) * sum_i k_i sigma_x_i - Delta * sum_i n_i
        + sum_{i<j} V_ij n_i n_j,

is kept as a Delta-independent sparse flip part plus two diagonal vectors
(occupation count and interaction energy) so the detuning can be swept
without re-enumerating anything.

In the blockade-constrained basis the blocked pairs never co-occur, so
their pair energies drop out exactly (hard-core limit); longer-ranged
entries of the interaction matrix survive as diagonal terms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import AtomArray, BlockadeGraph, doublet_chain_sites


class BudgetExceededError(RuntimeError):
    """An enumeration or search outgrew its configured budget."""


# ---------------------------------------------------------------------------
# basis enumeration


@dataclass(frozen=True)
class BasisSet:
    """Ordered enumeration of computational configurations.

    configs are sorted ascending by integer value; the blockade variant
    contains exactly the independent sets of its graph.
    """

    configs: np.ndarray  # (dim,) uint64, sorted ascending
    n_atoms: int
    constraint: str  # "full" | "blockade"

    def __post_init__(self):
        cfg = np.asarray(self.configs, dtype=np.uint64)
        cfg.flags.writeable = False
        object.__setattr__(self, "configs", cfg)

    @property
    def dim(self) -> int:
        return self.configs.shape[0]

    def index_of(self, config: int) -> int:
        """Position of a configuration; raises KeyError if absent."""
        i = int(np.searchsorted(self.configs, np.uint64(config)))
        if i >= self.dim or int(self.configs[i]) != int(config):
            raise KeyError(f"config {config:#x} not in basis")
        return i

    def indices_of(self, configs) -> np.ndarray:
        idx = np.searchsorted(self.configs, np.asarray(configs, dtype=np.uint64))
        idx = np.minimum(idx, self.dim - 1)
        bad = self.configs[idx] != np.asarray(configs, dtype=np.uint64)
        if np.any(bad):
            raise KeyError("some configs not in basis")
        return idx

    def contains(self, config: int) -> bool:
        i = int(np.searchsorted(self.configs, np.uint64(config)))
        return i < self.dim and int(self.configs[i]) == int(config)

    def occupations(self) -> np.ndarray:
        """(dim, n_atoms) 0/1 matrix of per-atom occupations."""
        bits = (self.configs[:, None] >> np.arange(self.n_atoms, dtype=np.uint64)) & np.uint64(1)
        return bits.astype(np.int8)

    def bitstring(self, config: int) -> str:
        return "".join("1" if (int(config) >> i) & 1 else "0" for i in range(self.n_atoms))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_atoms": self.n_atoms,
                "constraint": self.constraint,
                "configs": [self.bitstring(c) for c in self.configs],
            }
        )

    def content_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(f"{self.n_atoms}:{self.constraint}:".encode())
        h.update(np.ascontiguousarray(self.configs).tobytes())
        return h.hexdigest()[:16]


def enumerate_basis(
    graph: BlockadeGraph, constraint: str = "blockade", max_configs: int = 2**22
) -> BasisSet:
    """Enumerate the full 2^N basis or the independent sets of the graph.

    Independent sets are generated by backtracking over atoms with
    neighbour bitmasks; the count is cross-checkable against the
    transfer-matrix count in :func:`sqsim.spectra.count_independent_sets`.
    """
    n = graph.n_vertices
    if constraint == "full":
        if 2**n > max_configs:
            raise BudgetExceededError(f"full basis 2^{n} exceeds budget {max_configs}")
        return BasisSet(np.arange(2**n, dtype=np.uint64), n, "full")
    if constraint != "blockade":
        raise ValueError(f"unknown constraint {constraint!r}")

    adj = graph.adjacency_masks()
    out: list[int] = []

    def rec(i: int, config: int, blocked: int):
        if i == n:
            out.append(config)
            if len(out) > max_configs:
                raise BudgetExceededError(f"blockade basis exceeds budget {max_configs}")
            return
        rec(i + 1, config, blocked)
        if not (blocked >> i) & 1:
            rec(i + 1, config | (1 << i), blocked | adj[i])

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, n + 100))
    try:
        rec(0, 0, 0)
    finally:
        sys.setrecursionlimit(old)
    return BasisSet(np.sort(np.array(out, dtype=np.uint64)), n, "blockade")


# ---------------------------------------------------------------------------
# Hamiltonian


@dataclass
class HamiltonianOperator:
    """Sparse applicable H over a BasisSet, diagonal split from flips.

    ``coupling`` stores the sigma_x part divided by Omega (entries
    rabi_scale_i / 2, symmetric), so ``apply`` only scales it;
    the diagonal is reassembled per (Omega-independent) interaction and
    occupation vectors for any Delta.
    """

    basis: BasisSet
    occupancy: np.ndarray  # (dim,) float
    interaction_diag: np.ndarray  # (dim,) float, units of Omega
    coupling: sp.csr_matrix  # symmetric, coefficient of Omega
    omega: float = 1.0
    delta: float = 0.0

    @property
    def dim(self) -> int:
        return self.basis.dim

    def diagonal(self, delta: float | None = None) -> np.ndarray:
        d = self.delta if delta is None else delta
        return self.interaction_diag - d * self.occupancy

    def apply(self, vec: np.ndarray, omega: float | None = None, delta: float | None = None):
        w = self.omega if omega is None else omega
        out = self.coupling.dot(vec)
        if w != 1.0:
            out *= w
        out += self.diagonal(delta) * vec
        return out

    def matrix(self, omega: float | None = None, delta: float | None = None) -> sp.csr_matrix:
        w = self.omega if omega is None else omega
        return (self.coupling * w + sp.diags(self.diagonal(delta))).tocsr()

    def dense(self, omega: float | None = None, delta: float | None = None) -> np.ndarray:
        return self.matrix(omega, delta).toarray()

    def gershgorin_bound(self, omega: float | None = None, delta: float | None = None) -> float:
        """Cheap upper bound on the spectral radius at (Omega, Delta)."""
        w = abs(self.omega if omega is None else omega)
        row_sums = np.asarray(abs(self.coupling).sum(axis=1)).ravel()
        return float(np.max(np.abs(self.diagonal(delta)) + w * row_sums))

    def offdiagonal_entries(self):
        """Iterate (a, b, coefficient-of-Omega) with a < b, each pair once."""
        coo = sp.triu(self.coupling, k=1).tocoo()
        for a, b, x in zip(coo.row, coo.col, coo.data):
            yield int(a), int(b), float(x)

    def to_json(self) -> str:
        entries = [[a, b, x] for a, b, x in self.offdiagonal_entries()]
        return json.dumps(
            {
                "basis": json.loads(self.basis.to_json()),
                "occupancy": self.occupancy.tolist(),
                "interaction_diag": self.interaction_diag.tolist(),
                "offdiagonal": entries,
                "omega": self.omega,
                "delta": self.delta,
            }
        )


def build_hamiltonian(
    array: AtomArray,
    basis: BasisSet,
    interactions: np.ndarray,
    omega: float = 1.0,
    delta: float = 0.0,
) -> HamiltonianOperator:
    """Assemble the Hamiltonian over ``basis`` with the given pair energies."""
    n = array.n_atoms
    if basis.n_atoms != n:
        raise ValueError("basis and array disagree on atom count")
    v = np.asarray(interactions, dtype=float)
    if v.shape != (n, n):
        raise ValueError("interaction matrix shape mismatch")

    occ_bits = basis.occupations().astype(float)
    occupancy = occ_bits.sum(axis=1)
    interaction_diag = 0.5 * np.einsum("ci,ij,cj->c", occ_bits, v, occ_bits)

    rows, cols, vals = [], [], []
    configs = basis.configs
    for i in range(n):
        flipped = configs ^ np.uint64(1 << i)
        idx = np.searchsorted(configs, flipped)
        idx = np.minimum(idx, basis.dim - 1)
        ok = configs[idx] == flipped
        src = np.nonzero(ok)[0]
        dst = idx[ok]
        keep = src < dst  # store each unordered pair once
        rows.append(src[keep])
        cols.append(dst[keep])
        vals.append(np.full(keep.sum(), array.rabi_scale[i] / 2.0))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    x = np.concatenate(vals)
    upper = sp.coo_matrix((x, (r, c)), shape=(basis.dim, basis.dim))
    coupling = (upper + upper.T).tocsr()
    return HamiltonianOperator(basis, occupancy, interaction_diag, coupling, omega, delta)


def classical_energy(config: int, interactions: np.ndarray, delta: float) -> float:
    """Diagonal energy -Delta * popcount + sum of pair energies, Omega units."""
    v = np.asarray(interactions, dtype=float)
    n = v.shape[0]
    bits = np.array([(int(config) >> i) & 1 for i in range(n)], dtype=float)
    return float(-delta * bits.sum() + 0.5 * bits @ v @ bits)


# ---------------------------------------------------------------------------
# named states of the doublet chain


NAMED_KINDS = ("MIS", "S", "Z", "Zbar", "ZigzagMix")


@dataclass(frozen=True)
class NamedState:
    """A distinguished doublet-chain state expressed over a BasisSet."""

    kind: str
    basis: BasisSet
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError("named state must be normalized")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)


def chain_config(L: int, excited_atoms) -> int:
    """Config integer with the listed atom indices excited."""
    c = 0
    for a in excited_atoms:
        c |= 1 << a
    return c


def mis_config(L: int) -> int:
    """All odd sites of the doublet chain excited (the unique MIS)."""
    sites = doublet_chain_sites(L)
    return chain_config(L, [sites[j - 1][0] for j in range(1, L + 1, 2)])


def _bulk_even_sites(L: int) -> list[int]:
    # even sites excluding the boundary doublets at sites 2 and L-1
    return list(range(4, L - 2, 2))


def zigzag_configs(L: int) -> tuple[int, int]:
    """The two zigzag configurations: boundary singles excited, bulk even
    doublets alternating top/bottom starting top (resp. bottom) at site 4."""
    if L < 9:
        raise ValueError("zigzag patterns need L >= 9")
    sites = doublet_chain_sites(L)
    base = [sites[0][0], sites[L - 1][0]]
    z, zbar = list(base), list(base)
    for m, j in enumerate(_bulk_even_sites(L)):
        top, bottom = sites[j - 1]
        z.append(top if m % 2 == 0 else bottom)
        zbar.append(bottom if m % 2 == 0 else top)
    return chain_config(L, z), chain_config(L, zbar)


def diagonal_bulk_pairs(L: int) -> list[tuple[int, int]]:
    """Atom pairs entering the zigzag order parameter: the L - 7 diagonal
    next-nearest-neighbour pairs between bulk even sites (top of one
    doublet with bottom of the doublet two sites over, and vice versa)."""
    if L < 9:
        raise ValueError("order parameter needs L >= 9")
    sites = doublet_chain_sites(L)
    pairs = []
    bulk = _bulk_even_sites(L)
    for j in bulk:
        if j + 2 in bulk:
            top_a, bot_a = sites[j - 1]
            top_b, bot_b = sites[j + 1]
            pairs.append((top_a, bot_b))
            pairs.append((bot_a, top_b))
    return pairs


def named_state(kind: str, L: int, basis: BasisSet) -> NamedState:
    """Construct MIS, |S>, |Z>, |Zbar>, or the zigzag mix (|Z>+|Zbar>)/sqrt(2)."""
    if kind not in NAMED_KINDS:
        raise ValueError(f"unknown named state {kind!r}")
    if L < 3 or L % 2 == 0:
        raise ValueError("doublet chain needs odd L >= 3")
    n = (3 * L - 1) // 2
    if basis.n_atoms != n:
        raise ValueError("basis atom count does not match chain length")
    amp = np.zeros(basis.dim, dtype=complex)
    if kind == "MIS":
        amp[basis.index_of(mis_config(L))] = 1.0
    elif kind in ("Z", "Zbar"):
        z, zbar = zigzag_configs(L)
        amp[basis.index_of(z if kind == "Z" else zbar)] = 1.0
    elif kind == "ZigzagMix":
        z, zbar = zigzag_configs(L)
        amp[basis.index_of(z)] = 1.0 / np.sqrt(2.0)
        amp[basis.index_of(zbar)] = 1.0 / np.sqrt(2.0)
    else:  # S
        if L < 9:
            raise ValueError("the symmetric state needs L >= 9")
        sites = doublet_chain_sites(L)
        base = [sites[0][0], sites[L - 1][0]]
        bulk = _bulk_even_sites(L)
        weight = 1.0 / np.sqrt(2.0 ** len(bulk))
        for pattern in range(2 ** len(bulk)):
            atoms = list(base)
            for m, j in enumerate(bulk):
                top, bottom = sites[j - 1]
                atoms.append(top if (pattern >> m) & 1 == 0 else bottom)
            amp[basis.index_of(chain_config(L, atoms))] = weight
    return NamedState(kind, basis, amp)


# ---------------------------------------------------------------------------
# exact maximum independent set


def exact_mis(
    graph: BlockadeGraph, node_budget: int = 5_000_000, max_solutions: int = 100_000
):
    """Exact MIS size and the complete set of maximizers, by branch and bound.

    Branches on the highest-degree vertex of the candidate subgraph; the
    bound is a greedy clique cover, and connected components are solved
    independently.  Intended for up to a few tens of vertices.
    """
    n = graph.n_vertices
    adj = graph.adjacency_masks()
    all_mask = (1 << n) - 1
    nodes_visited = 0

    def components(mask: int) -> list[int]:
        comps = []
        left = mask
        while left:
            seed = left & -left
            comp, frontier = 0, seed
            while frontier:
                comp |= frontier
                nxt = 0
                m = frontier
                while m:
                    v = (m & -m).bit_length() - 1
                    m &= m - 1
                    nxt |= adj[v] & mask
                frontier = nxt & ~comp
            comps.append(comp)
            left &= ~comp
        return comps

    def clique_cover_bound(mask: int) -> int:
        # greedy partition into cliques: each clique contributes at most 1
        cliques: list[tuple[int, int]] = []  # (members, common neighbourhood)
        m = mask
        while m:
            v = (m & -m).bit_length() - 1
            m &= m - 1
            for k, (members, common) in enumerate(cliques):
                if (common >> v) & 1:
                    cliques[k] = (members | (1 << v), common & adj[v])
                    break
            else:
                cliques.append((1 << v, adj[v]))
        return len(cliques)

    def solve(mask: int) -> tuple[int, list[int]]:
        """Best size and all maximum sets within the induced subgraph."""
        nonlocal nodes_visited
        nodes_visited += 1
        if nodes_visited > node_budget:
            raise BudgetExceededError("exact_mis node budget exceeded")
        if mask == 0:
            return 0, [0]
        comps = components(mask)
        if len(comps) > 1:
            size, sets = 0, [0]
            for comp in comps:
                csize, csets = solve(comp)
                size += csize
                if len(sets) * len(csets) > max_solutions:
                    raise BudgetExceededError("exact_mis solution budget exceeded")
                sets = [s | cs for s in sets for cs in csets]
            return size, sets
        # isolated-free connected component: branch on max-degree vertex
        deg_best, v_best = -1, -1
        m = mask
        while m:
            v = (m & -m).bit_length() - 1
            m &= m - 1
            deg = bin(adj[v] & mask).count("1")
            if deg > deg_best:
                deg_best, v_best = deg, v
        if deg_best == 0:
            # independent component: take everything
            return bin(mask).count("1"), [mask]
        v = v_best
        # include v
        inc_size, inc_sets = solve(mask & ~((1 << v) | adj[v]))
        inc_size += 1
        inc_sets = [s | (1 << v) for s in inc_sets]
        # exclude v (prune if it cannot reach inc_size)
        rem = mask & ~(1 << v)
        best_size, best_sets = inc_size, inc_sets
        if clique_cover_bound(rem) >= inc_size:
            exc_size, exc_sets = solve(rem)
            if exc_size > best_size:
                best_size, best_sets = exc_size, exc_sets
            elif exc_size == best_size:
                best_sets = best_sets + exc_sets
                if len(best_sets) > max_solutions:
                    raise BudgetExceededError("exact_mis solution budget exceeded")
        return best_size, best_sets

    size, sets = solve(all_mask)
    return size, sorted(set(sets))
