"""Shot sampling, the detection-error channel, and blockade repair.

Shots are bitstring records in the fixed atom order.  Randomness is
always seeded, and anything applied per shot derives an independent
substream from (seed, shot index), so results do not depend on the order
shots are processed in.

The repair step mirrors the hardware postprocessing: repeatedly flip the
Rydberg atom with the most blockade violations back to ground (random
tie-break), then promote random unblockaded ground atoms until the
configuration is a maximal independent set.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .geometry import BlockadeGraph
from .model import mis_config, zigzag_configs

PROVENANCE_ORDER = ("raw", "noisy", "postprocessed")


@dataclass(frozen=True)
class ShotSet:
    """Bitstring measurement records with provenance.

    bitstrings -- (n_shots, n_atoms) 0/1 array in shot order
    provenance -- raw | noisy | postprocessed (only ever moves forward)
    all_loaded -- postselection flag for ingested external data; the
                  simulator always starts fully loaded
    """

    bitstrings: np.ndarray
    seed: int
    provenance: str = "raw"
    array_hash: str = ""
    all_loaded: bool = True

    def __post_init__(self):
        bits = np.asarray(self.bitstrings, dtype=np.uint8)
        if bits.ndim != 2:
            raise ValueError("bitstrings must be a (shots, atoms) array")
        if self.provenance not in PROVENANCE_ORDER:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        bits.flags.writeable = False
        object.__setattr__(self, "bitstrings", bits)

    @property
    def n_shots(self) -> int:
        return self.bitstrings.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.bitstrings.shape[1]

    def configs(self) -> np.ndarray:
        """Shot configurations as integers (bit i = atom i)."""
        weights = np.uint64(1) << np.arange(self.n_atoms, dtype=np.uint64)
        return (self.bitstrings.astype(np.uint64) * weights).sum(axis=1)

    def counts(self) -> Counter:
        return Counter(int(c) for c in self.configs())

    def with_provenance(self, provenance: str, bitstrings: np.ndarray) -> "ShotSet":
        if PROVENANCE_ORDER.index(provenance) < PROVENANCE_ORDER.index(self.provenance):
            raise ValueError(f"provenance cannot move back from {self.provenance}")
        return replace(self, bitstrings=bitstrings, provenance=provenance)

    def to_lines(self) -> str:
        return "\n".join("".join(str(b) for b in row) for row in self.bitstrings) + "\n"

    def sidecar(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "provenance": self.provenance,
                "array_hash": self.array_hash,
                "n_shots": self.n_shots,
                "n_atoms": self.n_atoms,
                "all_loaded": self.all_loaded,
            }
        )


def write_shots(path, shots: ShotSet) -> None:
    """One 0/1 line per shot plus a JSON sidecar alongside."""
    from pathlib import Path

    p = Path(path)
    p.write_text(shots.to_lines())
    p.with_suffix(p.suffix + ".json").write_text(shots.sidecar() + "\n")


def read_shots(path) -> ShotSet:
    from pathlib import Path

    p = Path(path)
    lines = [ln for ln in p.read_text().splitlines() if ln]
    bits = np.array([[int(c) for c in ln] for ln in lines], dtype=np.uint8)
    sidecar_path = p.with_suffix(p.suffix + ".json")
    meta = json.loads(sidecar_path.read_text()) if sidecar_path.exists() else {}
    return ShotSet(
        bits,
        seed=meta.get("seed", 0),
        provenance=meta.get("provenance", "raw"),
        array_hash=meta.get("array_hash", ""),
        all_loaded=meta.get("all_loaded", True),
    )


def _shot_rng(seed: int, shot_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, shot_index]))


def sample_dense(state, shots: int, seed: int, array_hash: str = "") -> ShotSet:
    """Sample basis configurations by cumulative-probability inversion."""
    if shots < 1:
        raise ValueError("need at least one shot")
    p = np.abs(np.asarray(state.amplitudes)) ** 2
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    idx = rng.choice(p.size, size=shots, p=p)
    n = state.basis.n_atoms
    configs = state.basis.configs[idx]
    bits = ((configs[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(np.uint8)
    return ShotSet(bits, seed=seed, provenance="raw", array_hash=array_hash)


def detection_channel(
    shots: ShotSet, p_r_to_g: float = 0.08, p_g_to_r: float = 0.01, seed: int = 0
) -> ShotSet:
    """Independent per-atom misdetection flips; provenance becomes noisy.

    A Rydberg atom reads out as ground with probability p_r_to_g and a
    ground atom as Rydberg with probability p_g_to_r.  Setting
    p_g_to_r = 0 reproduces the bare r-to-g rescaling picture.
    """
    for p in (p_r_to_g, p_g_to_r):
        if not 0.0 <= p <= 1.0:
            raise ValueError("flip probabilities must lie in [0, 1]")
    out = np.empty_like(shots.bitstrings)
    for s in range(shots.n_shots):
        rng = _shot_rng(seed, s)
        u = rng.random(shots.n_atoms)
        row = shots.bitstrings[s]
        flip = np.where(row == 1, u < p_r_to_g, u < p_g_to_r)
        out[s] = row ^ flip.astype(np.uint8)
    return shots.with_provenance("noisy", out)


def _violations(bits: np.ndarray, adj: list[int]) -> np.ndarray:
    """Per-atom count of excited blockaded neighbours (0 for ground atoms)."""
    n = bits.size
    counts = np.zeros(n, dtype=int)
    excited = [i for i in range(n) if bits[i]]
    for i in excited:
        counts[i] = sum(1 for j in excited if (adj[i] >> j) & 1)
    return counts


def postprocess_algorithm1(
    bits: np.ndarray,
    graph: BlockadeGraph,
    seed: int = 0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Repair one shot into a maximal independent set of the blockade graph.

    Phase one strips violations (most-violating Rydberg atom first, random
    tie-break); phase two promotes random unblockaded ground atoms until
    none remain.  Both loops strictly shrink the violation count or grow
    the set, so termination is guaranteed.
    """
    rng = rng if rng is not None else np.random.default_rng(seed)
    adj = graph.adjacency_masks()
    out = np.array(bits, dtype=np.uint8).copy()
    while True:
        viol = _violations(out, adj)
        worst = viol.max()
        if worst == 0:
            break
        candidates = np.nonzero(viol == worst)[0]
        out[rng.choice(candidates)] = 0
    while True:
        excited_mask = 0
        for i in range(out.size):
            if out[i]:
                excited_mask |= 1 << i
        free = [i for i in range(out.size) if not out[i] and not (adj[i] & excited_mask)]
        if not free:
            break
        out[rng.choice(np.array(free))] = 1
    return out


def postprocess_shots(shots: ShotSet, graph: BlockadeGraph, seed: int = 0) -> ShotSet:
    """Apply the repair to every shot with per-shot derived substreams."""
    out = np.empty_like(shots.bitstrings)
    for s in range(shots.n_shots):
        out[s] = postprocess_algorithm1(shots.bitstrings[s], graph, rng=_shot_rng(seed, s))
    return shots.with_provenance("postprocessed", out)


@dataclass(frozen=True)
class Estimate:
    """Empirical probability with its binomial standard error.

    ``degenerate`` flags p in {0, 1}, where the plug-in standard error
    collapses to zero and understates the uncertainty.
    """

    probability: float
    standard_error: float
    hits: int
    shots: int

    @property
    def degenerate(self) -> bool:
        return self.hits in (0, self.shots)


def estimate(shots: ShotSet, targets) -> Estimate:
    """Fraction of shots landing in a target config set, with its error.

    targets: a config integer, an iterable of config integers, or a
    callable mapping a bitstring row to bool.
    """
    if shots.n_shots == 0:
        raise ValueError("empty shot set")
    if callable(targets):
        hits = sum(bool(targets(row)) for row in shots.bitstrings)
    else:
        if isinstance(targets, (int, np.integer)):
            targets = [targets]
        wanted = {int(t) for t in targets}
        hits = sum(1 for c in shots.configs() if int(c) in wanted)
    p = hits / shots.n_shots
    se = float(np.sqrt(p * (1.0 - p) / shots.n_shots))
    return Estimate(p, se, hits, shots.n_shots)


def mis_targets(L: int) -> list[int]:
    return [mis_config(L)]


def zigzag_targets(L: int) -> list[int]:
    return list(zigzag_configs(L))
