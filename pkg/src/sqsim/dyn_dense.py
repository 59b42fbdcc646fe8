"""Exact state-vector evolution under a waveform, with observables.

The propagator freezes the Hamiltonian at the midpoint of each of n_steps
equal time slices (second-order accurate in the slice width) and applies
exp(-i * 2*pi * H * dt) with H in units of Omega and dt in units of
2*pi/Omega.  Two integrators are available: an adaptive Lanczos/Krylov
exponential (default) and classical RK4 with substeps chosen to meet a
norm-drift budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BasisSet, HamiltonianOperator, NamedState, diagonal_bulk_pairs
from .trajectory import Checkpoint, ObservableSpec, TrajectoryRecorder, Trajectory


@dataclass
class DenseState:
    """Normalized complex amplitude vector over a BasisSet."""

    basis: BasisSet
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.basis.dim,):
            raise ValueError("amplitude vector does not match basis dimension")
        self.amplitudes = amp

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "DenseState":
        return DenseState(self.basis, self.amplitudes.copy())


def initial_state(
    basis: BasisSet,
    mode: str = "all_ground",
    hamiltonian: HamiltonianOperator | None = None,
    omega: float = 1.0,
    delta: float | None = None,
) -> DenseState:
    """All-atoms-ground product state, or the exact ground state of H.

    ``exact_ground`` diagonalizes the supplied Hamiltonian at (omega,
    delta); pass the detuning the protocol starts from.
    """
    if mode == "all_ground":
        amp = np.zeros(basis.dim, dtype=complex)
        amp[basis.index_of(0)] = 1.0
        return DenseState(basis, amp)
    if mode != "exact_ground":
        raise ValueError(f"unknown initial state mode {mode!r}")
    if hamiltonian is None:
        raise ValueError("exact_ground needs a HamiltonianOperator")
    from .spectra import low_eigs

    _, vecs = low_eigs(hamiltonian, k=1, omega=omega, delta=delta)
    return DenseState(basis, vecs[:, 0].astype(complex))


# ---------------------------------------------------------------------------
# integrators


def krylov_expm_apply(apply_h, v: np.ndarray, dt_phase: float, tol: float = 1e-10,
                      m_max: int = 30) -> np.ndarray:
    """exp(-1j * dt_phase * H) @ v for Hermitian H given as a matvec.

    Lanczos with full reorthogonalization; the subspace grows until the
    standard residual estimate drops below tol (relative to |v|), and the
    step is split recursively if m_max is not enough.
    """
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return v.copy()
    V = [v / beta0]
    alphas: list[float] = []
    betas: list[float] = []
    for j in range(m_max):
        w = apply_h(V[j])
        a = float(np.real(np.vdot(V[j], w)))
        alphas.append(a)
        w = w - a * V[j]
        if j > 0:
            w = w - betas[-1] * V[j - 1]
        for u in V:  # full reorthogonalization
            w = w - np.vdot(u, w) * u
        b = float(np.linalg.norm(w))
        T = np.diag(alphas)
        if betas:
            off = np.array(betas)
            T = T + np.diag(off, 1) + np.diag(off, -1)
        lam, U = np.linalg.eigh(T)
        y = U @ (np.exp(-1j * dt_phase * lam) * U[0].conj())
        err = abs(dt_phase) * b * abs(y[-1])
        if b < 1e-14 or err < tol:
            return beta0 * (np.column_stack(V) @ y)
        betas.append(b)
        V.append(w / b)
    # subspace cap hit: halve the step
    half = krylov_expm_apply(apply_h, v, dt_phase / 2.0, tol / 2.0, m_max)
    return krylov_expm_apply(apply_h, half, dt_phase / 2.0, tol / 2.0, m_max)


def rk4_expm_apply(apply_h, v: np.ndarray, dt_phase: float, h_bound: float,
                   drift_budget: float) -> np.ndarray:
    """RK4 integration of psi' = -i H psi over a phase interval dt_phase.

    The substep count is set from the spectral bound so the accumulated
    norm drift of the step stays within drift_budget (the RK4 stability
    function satisfies | R(i t) |^2 - 1 ~ t^6 / 72).
    """
    theta_total = abs(dt_phase) * h_bound
    if theta_total == 0:
        n_sub = 1
    else:
        theta = (72.0 * drift_budget / max(theta_total, 1e-30)) ** 0.2
        theta = min(theta, 0.5)
        n_sub = max(1, int(math.ceil(theta_total / theta)))
    h = dt_phase / n_sub
    psi = v
    for _ in range(n_sub):
        k1 = -1j * apply_h(psi)
        k2 = -1j * apply_h(psi + 0.5 * h * k1)
        k3 = -1j * apply_h(psi + 0.5 * h * k2)
        k4 = -1j * apply_h(psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


# ---------------------------------------------------------------------------
# observables


def expectation_n(state: DenseState) -> np.ndarray:
    """Per-atom Rydberg occupation <n_i>."""
    p = np.abs(state.amplitudes) ** 2
    return p @ state.basis.occupations().astype(float)


def expectation_n_by_site(state: DenseState, L: int) -> np.ndarray:
    """<n> summed over the atoms of each chain site (doublets together)."""
    from .geometry import doublet_chain_sites

    per_atom = expectation_n(state)
    return np.array([sum(per_atom[a] for a in atoms) for atoms in doublet_chain_sites(L)])


def state_probability(state: DenseState, target) -> float:
    """Probability of a config, a set of configs, or a NamedState.

    For the zigzag mix the reported value is P(Z) + P(Zbar), the chance of
    finding either zigzag pattern; other NamedStates use the squared
    overlap.
    """
    amp = state.amplitudes
    if isinstance(target, NamedState):
        if target.kind == "ZigzagMix":
            return float(np.sum(np.abs(amp[np.abs(target.amplitudes) > 0]) ** 2))
        return float(abs(np.vdot(target.amplitudes, amp)) ** 2)
    if isinstance(target, (int, np.integer)):
        return float(abs(amp[state.basis.index_of(int(target))]) ** 2)
    idx = state.basis.indices_of(list(target))
    return float(np.sum(np.abs(amp[idx]) ** 2))


def pair_correlations(state: DenseState, pairs) -> np.ndarray:
    """<n_i n_j> for a list of atom pairs."""
    p = np.abs(state.amplitudes) ** 2
    occ = state.basis.occupations().astype(float)
    return np.array([p @ (occ[:, i] * occ[:, j]) for i, j in pairs])


def order_parameter_dense(state: DenseState, L: int) -> float:
    """Connected diagonal doublet-doublet correlator, averaged over the bulk."""
    pairs = diagonal_bulk_pairs(L)
    n = expectation_n(state)
    nn = pair_correlations(state, pairs)
    connected = nn - np.array([n[i] * n[j] for i, j in pairs])
    return float(4.0 / (L - 7) * connected.sum())


def left_atom_count(L: int, cut: int) -> int:
    """Number of atoms on chain sites <= cut (atoms are site-ordered)."""
    if not (1 <= cut <= L - 1):
        raise ValueError("cut must lie between 1 and L-1")
    from .geometry import doublet_chain_sites

    return sum(len(atoms) for atoms in doublet_chain_sites(L)[:cut])


def entanglement_entropy(state: DenseState, cut: int, L: int) -> float:
    """Von Neumann entropy (nats) across a chain-site bipartition.

    Configurations are grouped by their substrings left/right of the cut
    and the singular values of the resulting amplitude matrix are the
    Schmidt coefficients.
    """
    m = left_atom_count(L, cut)
    configs = state.basis.configs
    left = (configs & np.uint64((1 << m) - 1)).astype(np.int64)
    right = (configs >> np.uint64(m)).astype(np.int64)
    lk, li = np.unique(left, return_inverse=True)
    rk, ri = np.unique(right, return_inverse=True)
    mat = np.zeros((lk.size, rk.size), dtype=complex)
    mat[li, ri] = state.amplitudes
    sv = np.linalg.svd(mat, compute_uv=False)
    return schmidt_entropy(sv)


def schmidt_entropy(singular_values: np.ndarray) -> float:
    """-sum s^2 ln s^2 over normalized Schmidt coefficients."""
    p = np.asarray(singular_values, dtype=float) ** 2
    total = p.sum()
    if total <= 0:
        return 0.0
    p = p / total
    p = p[p > 1e-300]
    return float(-(p * np.log(p)).sum())


# ---------------------------------------------------------------------------
# evolution


def _record_dense(rec: TrajectoryRecorder, spec: ObservableSpec, state: DenseState,
                  hamiltonian: HamiltonianOperator, t: float, omega: float, delta: float,
                  checkpoint: bool):
    values = {"omega": omega, "delta": delta, "norm": state.norm()}
    values["energy"] = float(
        np.real(np.vdot(state.amplitudes, hamiltonian.apply(state.amplitudes, omega, delta)))
    )
    for name, target in spec.targets.items():
        values[f"P_{name}"] = state_probability(state, target)
    if spec.order and spec.chain_length is not None:
        values["order"] = order_parameter_dense(state, spec.chain_length)
    if spec.entropy_cuts and spec.chain_length is None:
        raise ValueError("entropy cuts need ObservableSpec.chain_length")
    for cut in spec.entropy_cuts:
        values[f"entropy_s{cut}"] = entanglement_entropy(state, cut, spec.chain_length)
    n_vec = expectation_n(state) if spec.track_n else None
    rec.push(t, values, n_vec)
    if checkpoint:
        rec.checkpoints.append(
            Checkpoint(t, omega, delta, state.amplitudes.copy(), state.basis.content_hash())
        )


def evolve(
    state: DenseState,
    hamiltonian: HamiltonianOperator,
    waveform,
    n_steps: int = 1000,
    method: str = "krylov",
    observables: ObservableSpec | None = None,
    krylov_tol: float = 1e-10,
    krylov_max_dim: int = 30,
    norm_drift_target: float = 1e-9,
) -> Trajectory:
    """Evolve a DenseState along a waveform; returns the sampled Trajectory.

    Within each slice the Hamiltonian is frozen at the midpoint sample of
    the waveform.  The final state is available as trajectory.final_state.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if method not in ("krylov", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    spec = observables or ObservableSpec()
    total = waveform.total_duration
    dt = total / n_steps
    coupling = hamiltonian.coupling
    psi = state.amplitudes.astype(complex).copy()

    rec = TrajectoryRecorder()
    omega0, delta0 = waveform.sample(0.0)
    cur = DenseState(state.basis, psi)
    _record_dense(rec, spec, cur, hamiltonian, 0.0, omega0, delta0,
                  checkpoint=spec.checkpoint_stride > 0)

    for k in range(n_steps):
        omega, delta = waveform.sample((k + 0.5) * dt)
        diag = hamiltonian.diagonal(delta)

        def apply_h(x, _w=omega, _d=diag):
            out = coupling.dot(x)
            if _w != 1.0:
                out *= _w
            out += _d * x
            return out

        if method == "krylov":
            psi = krylov_expm_apply(apply_h, psi, 2.0 * math.pi * dt, krylov_tol, krylov_max_dim)
        else:
            bound = hamiltonian.gershgorin_bound(omega, delta)
            psi = rk4_expm_apply(apply_h, psi, 2.0 * math.pi * dt, bound,
                                 norm_drift_target / n_steps)

        is_last = k == n_steps - 1
        if is_last or (k + 1) % spec.stride == 0:
            t = (k + 1) * dt
            t_eval = min(t, total)
            omega_r, delta_r = waveform.sample(t_eval)
            cur = DenseState(state.basis, psi)
            ckpt = spec.checkpoint_stride > 0 and (
                is_last or (k + 1) % spec.checkpoint_stride == 0
            )
            _record_dense(rec, spec, cur, hamiltonian, t, omega_r, delta_r, ckpt)

    final = DenseState(state.basis, psi)
    return rec.build(final_state=final, meta={"method": method, "n_steps": n_steps, "dt": dt})
