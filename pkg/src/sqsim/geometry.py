"""Atom array construction and van der Waals interaction structure.

Positions are in micrometers.  All energies are expressed in units of the
global Rabi frequency Omega, so an interaction coefficient ``c6`` has units
of Omega * um^6 and a pair of atoms at distance ``r`` interacts with
strength ``c6 / r**6`` (in units of Omega).

The main geometry is the doublet chain: single atoms on odd sites
alternating with two-atom doublets on even sites, every nearest-neighbour
pair at the same distance in the equilateral parameterization.  A 2D
variant decorates a square grid with diagonal doublets on every second
cell.  Two reduced 1D chains (a zigzag chain and a chain with enhanced
Rabi frequency on even sites) isolate the classical and quantum gap
mechanisms respectively.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# kind_of_atom labels for chain geometries
SINGLE = "single"
DOUBLET_TOP = "doublet-top"
DOUBLET_BOTTOM = "doublet-bottom"
# kind_of_atom labels for 2D grids (doublet atoms ordered low, then high,
# along the (1,1) diagonal)
GRID_SINGLE = "grid-single"
GRID_DOUBLET_LOW = "grid-doublet-low"
GRID_DOUBLET_HIGH = "grid-doublet-high"

CHAIN_KINDS = (SINGLE, DOUBLET_TOP, DOUBLET_BOTTOM)

#: Nearest-neighbour interaction used for calibration when no c6 is given,
#: in units of Omega, at the reference spacing ``DEFAULT_R_NN`` (um).
DEFAULT_V_NN = 12.5
DEFAULT_R_NN = 5.5


def calibrate_c6(v_nn: float = DEFAULT_V_NN, r_nn: float = DEFAULT_R_NN) -> float:
    """Interaction coefficient c6 (Omega * um^6) from a pair (V_nn, r_nn)."""
    if v_nn <= 0 or r_nn <= 0:
        raise ValueError("calibration pair must be positive")
    return v_nn * r_nn**6


DEFAULT_C6 = calibrate_c6()


@dataclass(frozen=True)
class AtomArray:
    """Immutable set of atom positions with per-atom metadata.

    positions     -- (N, 2) array, um
    rabi_scale    -- (N,) dimensionless multiplier of the global Omega
    site_of_atom  -- 1-based chain-site (or grid-cell) label per atom
    kind_of_atom  -- one of the kind labels above, per atom
    chain_length  -- number of chain sites L for chain geometries, else None
    grid_shape    -- (rows, cols) for 2D grids, else None
    """

    positions: np.ndarray
    rabi_scale: np.ndarray
    site_of_atom: tuple[int, ...]
    kind_of_atom: tuple[str, ...]
    chain_length: int | None = None
    grid_shape: tuple[int, int] | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        scale = np.asarray(self.rabi_scale, dtype=float).reshape(-1)
        if scale.shape[0] != pos.shape[0]:
            raise ValueError("rabi_scale length must match atom count")
        if np.any(scale <= 0):
            raise ValueError("rabi_scale entries must be positive")
        d = distance_matrix_of(pos)
        if np.any(d[np.triu_indices(pos.shape[0], k=1)] <= 0):
            raise ValueError("coincident atoms are not allowed")
        pos.flags.writeable = False
        scale.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "rabi_scale", scale)
        object.__setattr__(self, "site_of_atom", tuple(int(s) for s in self.site_of_atom))
        object.__setattr__(self, "kind_of_atom", tuple(self.kind_of_atom))

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    def distance_matrix(self) -> np.ndarray:
        return distance_matrix_of(self.positions)

    def content_hash(self) -> str:
        """Stable hex digest of positions and metadata, for provenance."""
        import hashlib

        payload = json.dumps(
            {
                "positions": [[round(x, 12), round(y, 12)] for x, y in self.positions],
                "rabi_scale": [round(k, 12) for k in self.rabi_scale],
                "site": list(self.site_of_atom),
                "kind": list(self.kind_of_atom),
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_json(self) -> str:
        """Serialize as ``{atoms: [{x, y, rabi_scale, site, kind}], units: "um"}``."""
        atoms = [
            {
                "x": float(x),
                "y": float(y),
                "rabi_scale": float(k),
                "site": site,
                "kind": kind,
            }
            for (x, y), k, site, kind in zip(
                self.positions, self.rabi_scale, self.site_of_atom, self.kind_of_atom
            )
        ]
        return json.dumps({"atoms": atoms, "units": "um"}, indent=1)


def distance_matrix_of(positions: np.ndarray) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def array_from_json(text: str) -> AtomArray:
    """Inverse of :meth:`AtomArray.to_json`.

    Chain length is recovered from the site labels when every atom carries
    a chain kind; grid shape is not recoverable from the JSON schema.
    """
    data = json.loads(text)
    if data.get("units") != "um":
        raise ValueError("geometry JSON must declare units 'um'")
    atoms = data["atoms"]
    positions = np.array([[a["x"], a["y"]] for a in atoms], dtype=float)
    rabi = np.array([a.get("rabi_scale", 1.0) for a in atoms], dtype=float)
    sites = tuple(int(a["site"]) for a in atoms)
    kinds = tuple(a["kind"] for a in atoms)
    chain_length = max(sites) if all(k in CHAIN_KINDS for k in kinds) else None
    return AtomArray(positions, rabi, sites, kinds, chain_length=chain_length)


@dataclass(frozen=True)
class BlockadeGraph:
    """Simple undirected graph of blockaded atom pairs."""

    n_vertices: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        norm = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError("self-loops are not allowed")
            if not (0 <= i < self.n_vertices and 0 <= j < self.n_vertices):
                raise ValueError("edge endpoint out of range")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    def adjacency_masks(self) -> list[int]:
        """Per-vertex neighbour bitmask (bit j set iff edge (i, j))."""
        masks = [0] * self.n_vertices
        for i, j in self.edges:
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return masks

    def neighbors(self, i: int) -> set[int]:
        return {j for a, b in self.edges for j in (a, b) if (a == i or b == i) and j != i}


def _chain_site_positions(L: int, s_x: float, s_y: float):
    """Atom layout of a doublet chain: odd sites single, even sites doublet.

    The horizontal step between consecutive sites is s_x / 2, so s_x is the
    distance between same-row atoms two sites apart; s_y is the full
    doublet height.  Atom order: sites ascending, top before bottom.
    """
    dx = s_x / 2.0
    positions, sites, kinds = [], [], []
    for j in range(1, L + 1):
        x = (j - 1) * dx
        if j % 2 == 1:
            positions.append((x, 0.0))
            sites.append(j)
            kinds.append(SINGLE)
        else:
            positions.append((x, +s_y / 2.0))
            sites.append(j)
            kinds.append(DOUBLET_TOP)
            positions.append((x, -s_y / 2.0))
            sites.append(j)
            kinds.append(DOUBLET_BOTTOM)
    return positions, sites, kinds


def build_doublet_chain(L: int, s_x: float, s_y: float) -> AtomArray:
    """Doublet chain of L sites (odd), general horizontal/vertical spacing.

    N = (3L - 1) / 2 atoms.  ``s_x`` is the horizontal next-nearest
    neighbour distance (consecutive sites sit s_x/2 apart), ``s_y`` the
    doublet height.
    """
    if L < 3 or L % 2 == 0:
        raise ValueError("doublet chain needs odd L >= 3")
    if s_x <= 0 or s_y <= 0:
        raise ValueError("spacings must be positive")
    positions, sites, kinds = _chain_site_positions(L, s_x, s_y)
    n = len(positions)
    return AtomArray(np.array(positions), np.ones(n), tuple(sites), tuple(kinds), chain_length=L)


def equilateral_doublet_chain(L: int, s: float = DEFAULT_R_NN) -> AtomArray:
    """Doublet chain with every nearest-neighbour pair at distance s."""
    if s <= 0:
        raise ValueError("side length must be positive")
    return build_doublet_chain(L, s_x=s * math.sqrt(3.0), s_y=s)


def doublet_chain_sites(L: int) -> list[list[int]]:
    """Atom indices per 1-based chain site, in the fixed atom order."""
    out, idx = [], 0
    for j in range(1, L + 1):
        if j % 2 == 1:
            out.append([idx])
            idx += 1
        else:
            out.append([idx, idx + 1])
            idx += 2
    return out


def build_2d_doublet_grid(rows: int, cols: int, a: float, d: float) -> AtomArray:
    """Square grid with spacing a; cells with odd (row+col) carry a doublet.

    Doublet atoms sit at the cell center displaced by +-(d/2) along the
    (1,1) diagonal, low corner first.  Site labels are 1-based cell indices
    in row-major order.
    """
    if rows < 2 or cols < 2:
        raise ValueError("grid needs rows, cols >= 2")
    if not (a > d > 0):
        raise ValueError("need a > d > 0")
    off = d / (2.0 * math.sqrt(2.0))
    positions, sites, kinds = [], [], []
    for r in range(rows):
        for c in range(cols):
            cell = r * cols + c + 1
            x, y = c * a, r * a
            if (r + c) % 2 == 0:
                positions.append((x, y))
                sites.append(cell)
                kinds.append(GRID_SINGLE)
            else:
                positions.append((x - off, y - off))
                sites.append(cell)
                kinds.append(GRID_DOUBLET_LOW)
                positions.append((x + off, y + off))
                sites.append(cell)
                kinds.append(GRID_DOUBLET_HIGH)
    n = len(positions)
    return AtomArray(
        np.array(positions), np.ones(n), tuple(sites), tuple(kinds), grid_shape=(rows, cols)
    )


def build_zigzag_chain(L: int, s: float, offset: float) -> AtomArray:
    """True 1D chain perturbed into a zigzag: atoms alternate y = +-offset/2.

    Consecutive atoms are kept at distance s, so the horizontal spacing is
    sqrt(s^2 - offset^2); offset >= s leaves no real x-spacing.
    """
    if L < 2:
        raise ValueError("chain needs L >= 2")
    if s <= 0 or offset < 0:
        raise ValueError("need s > 0 and offset >= 0")
    if offset >= s:
        raise ValueError("offset >= s leaves the x-spacing undefined")
    dx = math.sqrt(s**2 - offset**2)
    positions = [((i * dx), (offset / 2.0 if i % 2 == 0 else -offset / 2.0)) for i in range(L)]
    sites = tuple(range(1, L + 1))
    kinds = tuple(SINGLE for _ in range(L))
    return AtomArray(np.array(positions), np.ones(L), sites, kinds, chain_length=L)


def build_enhanced_rabi_chain(L: int, s: float, k: float) -> AtomArray:
    """Straight chain with spacing s and rabi_scale k on even (1-based) sites."""
    if L < 2:
        raise ValueError("chain needs L >= 2")
    if s <= 0:
        raise ValueError("spacing must be positive")
    if k <= 0:
        raise ValueError("enhancement factor must be positive")
    positions = np.array([(i * s, 0.0) for i in range(L)])
    rabi = np.array([k if (i + 1) % 2 == 0 else 1.0 for i in range(L)])
    sites = tuple(range(1, L + 1))
    kinds = tuple(SINGLE for _ in range(L))
    return AtomArray(positions, rabi, sites, kinds, chain_length=L)


def blockade_graph(array: AtomArray, c6: float = DEFAULT_C6, omega: float = 1.0) -> BlockadeGraph:
    """Graph of pairs with interaction >= omega, i.e. r <= (c6/omega)^(1/6).

    The boundary is inclusive: a pair exactly at the blockade radius is
    connected.
    """
    if c6 <= 0 or omega <= 0:
        raise ValueError("c6 and omega must be positive")
    r_b = (c6 / omega) ** (1.0 / 6.0)
    d = array.distance_matrix()
    n = array.n_atoms
    edges = {
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if d[i, j] <= r_b
    }
    return BlockadeGraph(n, frozenset(edges))


def interaction_matrix(
    array: AtomArray,
    c6: float = DEFAULT_C6,
    truncation: str = "full",
    omega: float = 1.0,
) -> np.ndarray:
    """Symmetric matrix of pair energies c6 / r^6 in units of Omega.

    truncation:
      "full" -- every pair;
      "nn"   -- only blockade-graph edges (at the given omega);
      "nnn"  -- blockade edges plus pairs of chain sites exactly two apart
                (horizontal and diagonal); chain geometries only.
    """
    if truncation not in ("full", "nn", "nnn"):
        raise ValueError(f"unknown truncation {truncation!r}")
    d = array.distance_matrix()
    n = array.n_atoms
    with np.errstate(divide="ignore"):
        v = np.where(d > 0, c6 / np.where(d > 0, d, 1.0) ** 6, 0.0)
    np.fill_diagonal(v, 0.0)
    if truncation == "full":
        return v
    keep = np.zeros((n, n), dtype=bool)
    for i, j in blockade_graph(array, c6, omega).edges:
        keep[i, j] = keep[j, i] = True
    if truncation == "nnn":
        if array.chain_length is None:
            raise ValueError("nnn truncation needs chain-site labels")
        site = np.array(array.site_of_atom)
        two_apart = np.abs(site[:, None] - site[None, :]) == 2
        keep |= two_apart
    return np.where(keep, v, 0.0)
