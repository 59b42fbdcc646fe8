"""Matrix-product-state evolution by time-evolving block decimation.

The state is held in right-canonical form with the Schmidt values of every
bond alongside (Vidal-style), so entropies and perfect sampling are always
available.  One second-order step applies half a layer of exact single-site
gates, then every diagonal interaction gate (the pair terms all commute),
then the second half layer.  Pairs beyond nearest MPS neighbours are
reached by transporting the left atom rightward with swap gates, fusing
each swap with the phase gate it passes.

Truncation keeps the smallest set of Schmidt values whose discarded
squared weight stays below the cutoff, then applies the bond-dimension
cap; the product of kept weight fractions over all truncations is the
``cumulative_kept_norm`` fidelity proxy.

For the doublet chain the atom order (sites ascending, top before bottom)
is the snake path through the chain, which keeps all retained
interactions within a few positions of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import AtomArray
from .measure import ShotSet, _shot_rng
from .model import NamedState
from .trajectory import ObservableSpec, TrajectoryRecorder, Trajectory

_N_DIAG = np.array([0.0, 1.0])


class TebdConvergenceError(RuntimeError):
    """Imaginary-time search did not converge within its sweep budget."""


@dataclass
class MPSState:
    """Right-canonical site tensors with per-bond Schmidt values.

    tensors[p] has shape (chi_left, 2, chi_right); schmidt has length
    n_sites + 1 with trivial ends.  position_of_atom maps atom index to
    MPS position (identity for chain geometries, whose atom order already
    snakes through the chain).
    """

    tensors: list[np.ndarray]
    schmidt: list[np.ndarray]
    position_of_atom: tuple[int, ...]
    cumulative_kept_norm: float = 1.0

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def atom_of_position(self) -> list[int]:
        out = [0] * self.n_sites
        for atom, pos in enumerate(self.position_of_atom):
            out[pos] = atom
        return out

    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MPSState":
        return MPSState(
            [t.copy() for t in self.tensors],
            [s.copy() for s in self.schmidt],
            self.position_of_atom,
            self.cumulative_kept_norm,
        )

    def entropy(self, bond: int) -> float:
        """Von Neumann entropy (nats) at an MPS bond in 1..n_sites-1."""
        from .dyn_dense import schmidt_entropy

        if not (1 <= bond <= self.n_sites - 1):
            raise ValueError("bond out of range")
        return schmidt_entropy(self.schmidt[bond])

    def norm(self) -> float:
        env = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            env = np.einsum("lm,lar,mas->rs", env, t.conj(), t)
        return float(math.sqrt(abs(np.real(env[0, 0]))))

    def expectation_local(self, pos: int, op: np.ndarray) -> float:
        t = self.schmidt[pos][:, None, None] * self.tensors[pos]
        return float(np.real(np.einsum("lar,ab,lbr->", t.conj(), op, t)))

    def expectation_n(self) -> np.ndarray:
        """Per-atom Rydberg occupation."""
        n_op = np.diag(_N_DIAG)
        per_pos = [self.expectation_local(p, n_op) for p in range(self.n_sites)]
        return np.array([per_pos[self.position_of_atom[a]] for a in range(self.n_sites)])

    def correlation_nn(self, atom_i: int, atom_j: int) -> float:
        """<n_i n_j> between two atoms."""
        p, q = sorted((self.position_of_atom[atom_i], self.position_of_atom[atom_j]))
        if p == q:
            return self.expectation_local(p, np.diag(_N_DIAG))
        t = self.schmidt[p][:, None, None] * self.tensors[p]
        env = np.einsum("lar,a,las->rs", t.conj(), _N_DIAG, t)
        for k in range(p + 1, q):
            b = self.tensors[k]
            env = np.einsum("rap,rs,saq->pq", b.conj(), env, b)
        b = self.tensors[q]
        return float(np.real(np.einsum("rat,rs,a,sat->", b.conj(), env, _N_DIAG, b)))

    def amplitude(self, config: int) -> complex:
        """Overlap with a product basis configuration (bit i = atom i)."""
        atoms = self.atom_of_position
        v = np.ones(1, dtype=complex)
        for pos in range(self.n_sites):
            bit = (int(config) >> atoms[pos]) & 1
            v = v @ self.tensors[pos][:, bit, :]
        return complex(v[0])


def mps_from_product(array: AtomArray, config: int) -> MPSState:
    """Bond-dimension-1 MPS for a single configuration."""
    n = array.n_atoms
    tensors = []
    for atom in range(n):
        bit = (int(config) >> atom) & 1
        t = np.zeros((1, 2, 1), dtype=complex)
        t[0, bit, 0] = 1.0
        tensors.append(t)
    schmidt = [np.array([1.0]) for _ in range(n + 1)]
    return MPSState(tensors, schmidt, tuple(range(n)), 1.0)


# ---------------------------------------------------------------------------
# gates and updates


def _truncate(s: np.ndarray, chi_max: int, eps: float) -> int:
    """Number of Schmidt values to keep under the weight cutoff and cap."""
    w = s**2
    total = w.sum()
    if total == 0:
        return 1
    keep = s.size
    if eps > 0:
        tail = np.cumsum(w[::-1])[::-1] / total  # tail[k] = discarded weight if keep k
        while keep > 1 and tail[keep - 1] <= eps:
            keep -= 1
    keep = max(1, keep - np.sum(s[:keep] < s[0] * 1e-14))
    if chi_max > 0:
        keep = min(keep, chi_max)
    return int(keep)


def _apply_two_site(mps: MPSState, p: int, gate: np.ndarray, chi_max: int, eps: float,
                    renormalize: bool = True) -> None:
    """Apply a (2,2,2,2) gate at positions (p, p+1) with truncation."""
    lam = mps.schmidt[p]
    theta = np.einsum("l,lam,mbr->labr", lam, mps.tensors[p], mps.tensors[p + 1])
    theta = np.einsum("abcd,lcdr->labr", gate, theta)
    chi_l, _, _, chi_r = theta.shape
    mat = theta.reshape(chi_l * 2, 2 * chi_r)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    keep = _truncate(s, chi_max, eps)
    total = float((s**2).sum())
    kept = float((s[:keep] ** 2).sum())
    if total > 0:
        mps.cumulative_kept_norm *= kept / total
    s_new = s[:keep]
    if renormalize:
        s_new = s_new / np.linalg.norm(s_new)
    inv = np.where(lam > 1e-13, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
    u3 = u[:, :keep].reshape(chi_l, 2, keep)
    mps.tensors[p] = inv[:, None, None] * u3 * s_new[None, None, :]
    mps.tensors[p + 1] = vh[:keep].reshape(keep, 2, chi_r)
    mps.schmidt[p + 1] = s_new


def _apply_single_site(mps: MPSState, pos: int, u2: np.ndarray) -> None:
    mps.tensors[pos] = np.einsum("xy,lyr->lxr", u2, mps.tensors[pos])


def _local_gate(rabi: float, omega: float, delta: float, tau: complex) -> np.ndarray:
    """exp(tau * h) for the one-atom h = (rabi*omega/2) sx - delta * n."""
    g = rabi * omega / 2.0
    h = np.array([[0.0, g], [g, -delta]])
    lam, u = np.linalg.eigh(h)
    return (u * np.exp(tau * lam)) @ u.conj().T


def _phase_gate(phase: complex) -> np.ndarray:
    """Two-site gate exp(phase * n (x) n), diagonal in the pair basis."""
    g = np.eye(4, dtype=complex)
    g[3, 3] = np.exp(phase)
    return g.reshape(2, 2, 2, 2)


_SWAP = np.zeros((2, 2, 2, 2))
for _a in range(2):
    for _b in range(2):
        _SWAP[_b, _a, _a, _b] = 1.0


def _swap_phase_gate(phase: complex) -> np.ndarray:
    """Interact then swap, as a single fused gate."""
    g = _SWAP.astype(complex).copy()
    g[:, :, 1, 1] *= np.exp(phase)
    return g


def _position_pairs(mps: MPSState, interactions: np.ndarray):
    """Interaction entries mapped to MPS position pairs, grouped by the
    left position: {p: [(q, v), ...]} with q ascending."""
    n = interactions.shape[0]
    grouped: dict[int, list[tuple[int, float]]] = {}
    for i in range(n):
        for j in range(i + 1, n):
            v = interactions[i, j]
            if v != 0.0:
                p, q = sorted((mps.position_of_atom[i], mps.position_of_atom[j]))
                grouped.setdefault(p, []).append((q, float(v)))
    for p in grouped:
        grouped[p].sort()
    return grouped


def _interaction_layer(mps: MPSState, grouped: dict, tau: complex, chi_max: int, eps: float,
                       renormalize: bool = True) -> None:
    """Apply exp(tau * sum V n n): commuting diagonal gates, swaps for range.

    The left atom of each group is carried rightward; every swap on the way
    out is fused with the phase gate of the partner it passes.
    """
    swap = _SWAP.astype(complex)
    for p in sorted(grouped):
        partners = grouped[p]
        values = dict(partners)
        q_max = partners[-1][0]
        if q_max == p + 1:
            _apply_two_site(mps, p, _phase_gate(tau * values[p + 1]), chi_max, eps, renormalize)
            continue
        for m in range(p, q_max - 1):
            v = values.get(m + 1)
            gate = _swap_phase_gate(tau * v) if v is not None else swap
            _apply_two_site(mps, m, gate, chi_max, eps, renormalize)
        _apply_two_site(mps, q_max - 1, _phase_gate(tau * values[q_max]), chi_max, eps,
                        renormalize)
        for m in range(q_max - 1, p, -1):
            _apply_two_site(mps, m - 1, swap, chi_max, eps, renormalize)


def max_interaction_range(array: AtomArray, interactions: np.ndarray,
                          position_of_atom=None) -> int:
    pos = position_of_atom or tuple(range(array.n_atoms))
    n = array.n_atoms
    best = 0
    for i in range(n):
        for j in range(i + 1, n):
            if interactions[i, j] != 0.0:
                best = max(best, abs(pos[i] - pos[j]))
    return best


def _trotter_step(mps: MPSState, array: AtomArray, grouped: dict, omega: float, delta: float,
                  tau: complex, chi_max: int, eps: float, renormalize: bool = True) -> None:
    """Second-order step: half local layer, pair layer, half local layer."""
    atoms = mps.atom_of_position
    gates = {}
    for pos in range(mps.n_sites):
        k = array.rabi_scale[atoms[pos]]
        if k not in gates:
            gates[k] = _local_gate(k, omega, delta, tau / 2.0)
        _apply_single_site(mps, pos, gates[k])
    _interaction_layer(mps, grouped, tau, chi_max, eps, renormalize)
    for pos in range(mps.n_sites):
        _apply_single_site(mps, pos, gates[array.rabi_scale[atoms[pos]]])


# ---------------------------------------------------------------------------
# observables and recording


def mps_entropy(mps: MPSState, bond: int) -> float:
    """Entropy at an MPS bond; for chain-site cuts see cut_to_bond."""
    return mps.entropy(bond)


def cut_to_bond(L: int, cut: int) -> int:
    """MPS bond index corresponding to a chain-site bipartition."""
    from .dyn_dense import left_atom_count

    return left_atom_count(L, cut)


def mps_state_probability(mps: MPSState, target) -> float:
    """Probability of a config, a config set, or a NamedState."""
    if isinstance(target, NamedState):
        if target.kind == "ZigzagMix":
            support = np.nonzero(np.abs(target.amplitudes) > 0)[0]
            return float(
                sum(abs(mps.amplitude(int(target.basis.configs[k]))) ** 2 for k in support)
            )
        support = np.nonzero(np.abs(target.amplitudes) > 0)[0]
        ovl = sum(
            np.conj(target.amplitudes[k]) * mps.amplitude(int(target.basis.configs[k]))
            for k in support
        )
        return float(abs(ovl) ** 2)
    if isinstance(target, (int, np.integer)):
        return float(abs(mps.amplitude(int(target))) ** 2)
    return float(sum(abs(mps.amplitude(int(c))) ** 2 for c in target))


def _record_mps(rec: TrajectoryRecorder, spec: ObservableSpec, mps: MPSState,
                array: AtomArray, interactions: np.ndarray,
                t: float, omega: float, delta: float):
    values = {
        "omega": omega,
        "delta": delta,
        "norm": mps.norm(),
        "energy": mps_energy(mps, array, interactions, omega, delta),
        "bond_dim_max": float(max(mps.bond_dims() or [1])),
        "kept_norm": mps.cumulative_kept_norm,
    }
    for name, target in spec.targets.items():
        values[f"P_{name}"] = mps_state_probability(mps, target)
    if spec.order and spec.chain_length is not None:
        from .analysis import order_parameter

        values["order"] = order_parameter(mps, spec.chain_length)
    if spec.entropy_cuts and spec.chain_length is None:
        raise ValueError("entropy cuts need ObservableSpec.chain_length")
    for cut in spec.entropy_cuts:
        values[f"entropy_s{cut}"] = mps.entropy(cut_to_bond(spec.chain_length, cut))
    n_vec = mps.expectation_n() if spec.track_n else None
    rec.push(t, values, n_vec)


def tebd_evolve(
    mps: MPSState,
    array: AtomArray,
    interactions: np.ndarray,
    waveform,
    n_steps: int = 1000,
    chi_max: int = 0,
    svd_cutoff: float = 1e-8,
    observables: ObservableSpec | None = None,
    swap_budget: int = 6,
) -> Trajectory:
    """Real-time TEBD along a waveform; chi_max = 0 leaves chi uncapped.

    Interactions must stay within ``swap_budget`` positions in the MPS
    order.  The trajectory carries the same records as the dense engine
    plus bond_dim_max and kept_norm; the evolved MPSState is
    trajectory.final_state.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng_range = max_interaction_range(array, interactions, mps.position_of_atom)
    if rng_range > swap_budget:
        raise ValueError(
            f"interaction range {rng_range} exceeds swap budget {swap_budget}"
        )
    spec = observables or ObservableSpec()
    state = mps.copy()
    grouped = _position_pairs(state, np.asarray(interactions, dtype=float))
    total = waveform.total_duration
    dt = total / n_steps

    rec = TrajectoryRecorder()
    omega0, delta0 = waveform.sample(0.0)
    v_matrix = np.asarray(interactions, dtype=float)
    _record_mps(rec, spec, state, array, v_matrix, 0.0, omega0, delta0)
    for k in range(n_steps):
        omega, delta = waveform.sample((k + 0.5) * dt)
        tau = -2j * math.pi * dt
        _trotter_step(state, array, grouped, omega, delta, tau, chi_max, svd_cutoff)
        is_last = k == n_steps - 1
        if is_last or (k + 1) % spec.stride == 0:
            t = (k + 1) * dt
            omega_r, delta_r = waveform.sample(min(t, total))
            _record_mps(rec, spec, state, array, v_matrix, t, omega_r, delta_r)
    return rec.build(final_state=state, meta={"engine": "mps", "n_steps": n_steps,
                                              "chi_max": chi_max, "svd_cutoff": svd_cutoff})


# ---------------------------------------------------------------------------
# sampling


def mps_sample(mps: MPSState, shots: int, seed: int, array_hash: str = "") -> ShotSet:
    """Perfect sequential sampling, exact for the represented state."""
    if shots < 1:
        raise ValueError("need at least one shot")
    atoms = mps.atom_of_position
    n = mps.n_sites
    bits = np.zeros((shots, n), dtype=np.uint8)
    for s in range(shots):
        rng = _shot_rng(seed, s)
        v = np.ones(1, dtype=complex)
        for pos in range(n):
            w0 = v @ mps.tensors[pos][:, 0, :]
            p0 = float(np.real(np.vdot(w0, w0)))
            if rng.random() < p0:
                v = w0 / math.sqrt(max(p0, 1e-300))
            else:
                w1 = v @ mps.tensors[pos][:, 1, :]
                p1 = float(np.real(np.vdot(w1, w1)))
                v = w1 / math.sqrt(max(p1, 1e-300))
                bits[s, atoms[pos]] = 1
    return ShotSet(bits, seed=seed, provenance="raw", array_hash=array_hash)


# ---------------------------------------------------------------------------
# imaginary-time ground-state search


def canonicalize(mps: MPSState) -> None:
    """Restore right-canonical form and refresh every Schmidt spectrum."""
    n = mps.n_sites
    # left QR sweep (left-canonical A tensors)
    a_tensors = []
    carry = np.ones((1, 1), dtype=complex)
    for pos in range(n):
        t = np.einsum("lm,mar->lar", carry, mps.tensors[pos])
        chi_l, _, chi_r = t.shape
        q, r = np.linalg.qr(t.reshape(chi_l * 2, chi_r))
        a_tensors.append(q.reshape(chi_l, 2, q.shape[1]))
        carry = r
    # right SVD sweep, accumulating Schmidt values
    t = np.einsum("lar,rm->lam", a_tensors[-1], carry) / np.linalg.norm(carry)
    for pos in range(n - 1, 0, -1):
        chi_l, _, chi_r = t.shape
        u, s, vh = np.linalg.svd(t.reshape(chi_l, 2 * chi_r), full_matrices=False)
        s_norm = np.linalg.norm(s)
        s = s / s_norm
        mps.tensors[pos] = vh.reshape(s.size, 2, chi_r)
        mps.schmidt[pos] = s
        t = np.einsum("lam,mk->lak", a_tensors[pos - 1], u * (s * s_norm)[None, :])
    t_norm = np.linalg.norm(t)
    mps.tensors[0] = t / t_norm
    mps.schmidt[0] = np.array([1.0])
    mps.schmidt[n] = np.array([1.0])


def mps_energy(mps: MPSState, array: AtomArray, interactions: np.ndarray,
               omega: float, delta: float) -> float:
    """<H> from local expectations and pair correlators."""
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    n_op = np.diag(_N_DIAG)
    e = 0.0
    for atom in range(array.n_atoms):
        pos = mps.position_of_atom[atom]
        e += (array.rabi_scale[atom] * omega / 2.0) * mps.expectation_local(pos, sx)
        e -= delta * mps.expectation_local(pos, n_op)
    v = np.asarray(interactions, dtype=float)
    for i in range(array.n_atoms):
        for j in range(i + 1, array.n_atoms):
            if v[i, j] != 0.0:
                e += v[i, j] * mps.correlation_nn(i, j)
    return float(e)


def imaginary_time_ground(
    array: AtomArray,
    interactions: np.ndarray,
    delta: float,
    chi_max: int = 50,
    svd_cutoff: float = 1e-10,
    tol: float = 1e-7,
    omega: float = 1.0,
    initial_config: int = 0,
    dtau_schedule=(0.2, 0.1, 0.05, 0.02, 0.01),
    max_sweeps_per_dtau: int = 400,
) -> MPSState:
    """Approximate ground state of H(omega, delta) by imaginary-time TEBD.

    Step sizes decrease along ``dtau_schedule``; within each the evolution
    runs until the energy change per step falls below tol (relative).
    The state is re-canonicalized after every step because the non-unitary
    gates degrade the canonical form.
    """
    mps = mps_from_product(array, initial_config)
    # seed every atom with a little transverse mixing so no sector is dead
    mix = _local_gate(1.0, 1.0, 0.0, -0.3)
    for pos in range(mps.n_sites):
        _apply_single_site(mps, pos, mix.astype(complex))
    canonicalize(mps)
    grouped = _position_pairs(mps, np.asarray(interactions, dtype=float))

    energy = mps_energy(mps, array, interactions, omega, delta)
    for dtau in dtau_schedule:
        for _ in range(max_sweeps_per_dtau):
            _trotter_step(mps, array, grouped, omega, delta, -2.0 * math.pi * dtau,
                          chi_max, svd_cutoff)
            canonicalize(mps)
            new_energy = mps_energy(mps, array, interactions, omega, delta)
            change = abs(new_energy - energy) / max(1.0, abs(new_energy))
            energy = new_energy
            if change < tol * dtau:
                break
        else:
            raise TebdConvergenceError(
                f"imaginary-time energy not converged at dtau={dtau}"
            )
    mps.cumulative_kept_norm = 1.0
    return mps
