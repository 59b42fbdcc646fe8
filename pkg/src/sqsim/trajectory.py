"""Observable records shared by the dense and tensor-network engines.

A Trajectory is a table of sample times with per-sample observables
(per-atom occupations, target-state probabilities, order parameter,
entanglement entropies, norm, energy) plus optional checkpointed dense
states.  Export formats: CSV (one row per sample, 17 significant digits)
and JSON; checkpoints as little-endian complex64 blobs behind a one-line
JSON header.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ObservableSpec:
    """What to record along an evolution and how often.

    targets maps a name to either a config integer, a list of config
    integers (probabilities summed), or a NamedState.  entropy_cuts are
    chain-site bipartitions and require chain_length; order enables the
    doublet-chain order parameter.  checkpoint_stride > 0 stores dense
    states.
    """

    stride: int = 10
    track_n: bool = True
    targets: dict = field(default_factory=dict)
    entropy_cuts: tuple[int, ...] = ()
    chain_length: int | None = None
    order: bool = False
    checkpoint_stride: int = 0


@dataclass
class Checkpoint:
    t: float
    omega: float
    delta: float
    amplitudes: np.ndarray
    basis_hash: str


@dataclass
class Trajectory:
    times: np.ndarray
    columns: dict[str, np.ndarray]
    n_expect: np.ndarray | None = None  # (n_samples, n_atoms)
    checkpoints: list[Checkpoint] = field(default_factory=list)
    final_state: object = None
    meta: dict = field(default_factory=dict)

    def column_names(self) -> list[str]:
        return list(self.columns)

    def to_csv(self) -> str:
        header = ["t"] + list(self.columns)
        cols = [self.times] + [self.columns[k] for k in self.columns]
        if self.n_expect is not None:
            header += [f"n_{i}" for i in range(self.n_expect.shape[1])]
            cols += [self.n_expect[:, i] for i in range(self.n_expect.shape[1])]
        lines = [",".join(header)]
        for row in zip(*cols):
            lines.append(",".join(f"{x:.17g}" for x in row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "times": self.times.tolist(),
            "columns": {k: v.tolist() for k, v in self.columns.items()},
            "meta": self.meta,
        }
        if self.n_expect is not None:
            payload["n_expect"] = self.n_expect.tolist()
        return json.dumps(payload)


class TrajectoryRecorder:
    """Accumulates rows; engines push one record per sampled time."""

    def __init__(self):
        self.times: list[float] = []
        self.rows: list[dict] = []
        self.n_rows: list[np.ndarray] = []
        self.checkpoints: list[Checkpoint] = []

    def push(self, t: float, values: dict, n_vec=None):
        if self.times and t <= self.times[-1]:
            raise ValueError("sample times must be strictly increasing")
        self.times.append(t)
        self.rows.append(values)
        if n_vec is not None:
            self.n_rows.append(np.asarray(n_vec, dtype=float))

    def build(self, final_state=None, meta=None) -> Trajectory:
        keys = list(self.rows[0]) if self.rows else []
        columns = {k: np.array([r[k] for r in self.rows], dtype=float) for k in keys}
        n_expect = np.array(self.n_rows) if self.n_rows else None
        return Trajectory(
            times=np.array(self.times),
            columns=columns,
            n_expect=n_expect,
            checkpoints=self.checkpoints,
            final_state=final_state,
            meta=meta or {},
        )


def write_checkpoint(path, checkpoint: Checkpoint) -> None:
    """One-line JSON header, then raw little-endian complex64 amplitudes."""
    header = {
        "t": checkpoint.t,
        "omega": checkpoint.omega,
        "delta": checkpoint.delta,
        "basis_hash": checkpoint.basis_hash,
        "dtype": "complex64-le",
        "n": int(checkpoint.amplitudes.shape[0]),
    }
    with open(path, "wb") as f:
        f.write((json.dumps(header) + "\n").encode())
        f.write(checkpoint.amplitudes.astype("<c8").tobytes())


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode())
        raw = f.read()
    amp = np.frombuffer(raw, dtype="<c8", count=header["n"]).astype(np.complex128)
    return Checkpoint(header["t"], header["omega"], header["delta"], amp, header["basis_hash"])
