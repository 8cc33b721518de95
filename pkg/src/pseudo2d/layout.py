"""Surface-code qubit grids and their fold onto a bi-linear (two-rail) array.

The pre-fold grid has ``M = 2d - 1`` rows.  Logical blocks of ``M`` columns are
separated by single spacer columns, so a row holds ``N*M + (N - 1)`` sites.

Folding puts even columns on rail 0 and odd columns on rail 1, keeping the row
order inside each column.  Column pair ``(2k, 2k+1)`` shares the rail slots
``[k*M, (k+1)*M)``, so the couplers between them are straight rungs, while the
couplers from column ``2k+1`` to ``2k+2`` run diagonally to the next slot range
and cross rungs on the way.  Each crossing needs a single airbridge, carried by
one of the two resonators (see :func:`crossing_pairs`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator

import numpy as np


class ValidationError(ValueError):
    """Raised for out-of-contract inputs (bad code distance, unfolded layouts...)."""


class Encoding(str, Enum):
    SQUARE = "square"
    ROTATED = "rotated"


class Role(str, Enum):
    DATA = "data"
    SYNDROME_X = "syndrome_x"
    SYNDROME_Z = "syndrome_z"


@dataclass(frozen=True)
class SurfaceCodeSpec:
    d: int
    N: int = 1
    encoding: Encoding = Encoding.SQUARE

    def __post_init__(self) -> None:
        if isinstance(self.d, bool) or not isinstance(self.d, (int, np.integer)):
            raise ValidationError(f"code distance must be an integer, got {self.d!r}")
        if self.d < 3 or self.d % 2 == 0:
            raise ValidationError(f"code distance must be odd and >= 3, got {self.d}")
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValidationError(f"logical qubit count must be an integer >= 1, got {self.N!r}")
        object.__setattr__(self, "encoding", Encoding(self.encoding))

    @property
    def M(self) -> int:
        return 2 * self.d - 1

    @property
    def columns(self) -> int:
        return self.N * self.M + (self.N - 1)

    def block_of_column(self, col: int) -> int | None:
        """Logical block index of a grid column, or None for a spacer column."""
        k, local = divmod(col, self.M + 1)
        return None if local == self.M else k


@dataclass
class QubitNode:
    id: int
    role: Role
    grid_pos: tuple[int, int]
    folded_pos: tuple[int, int] | None = None
    spacer: bool = False


@dataclass
class ResonatorEdge:
    endpoints: tuple[int, int]
    crossings: int = 0
    frequency: float | None = None
    active: bool = True


@dataclass
class PhysicalLayout:
    spec: SurfaceCodeSpec
    qubits: list[QubitNode] = field(default_factory=list)
    resonators: list[ResonatorEdge] = field(default_factory=list)

    @property
    def is_folded(self) -> bool:
        return bool(self.qubits) and all(q.folded_pos is not None for q in self.qubits)

    def qubit_by_id(self) -> dict[int, QubitNode]:
        return {q.id: q for q in self.qubits}

    def edge_set(self) -> set[tuple[int, int]]:
        return {tuple(sorted(r.endpoints)) for r in self.resonators}

    def to_dict(self) -> dict:
        return {
            "spec": {"d": self.spec.d, "N": self.spec.N, "encoding": self.spec.encoding.value},
            "qubits": [
                {
                    "id": q.id,
                    "role": q.role.value,
                    "grid_pos": list(q.grid_pos),
                    "folded_pos": None if q.folded_pos is None else list(q.folded_pos),
                    "spacer": q.spacer,
                }
                for q in self.qubits
            ],
            "resonators": [
                {
                    "endpoints": list(r.endpoints),
                    "crossings": r.crossings,
                    "frequency": r.frequency,
                    "active": r.active,
                }
                for r in self.resonators
            ],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> PhysicalLayout:
        try:
            spec = SurfaceCodeSpec(**data["spec"])
            qubits = [
                QubitNode(
                    id=int(q["id"]),
                    role=Role(q["role"]),
                    grid_pos=tuple(q["grid_pos"]),
                    folded_pos=None if q.get("folded_pos") is None else tuple(q["folded_pos"]),
                    spacer=bool(q.get("spacer", False)),
                )
                for q in data["qubits"]
            ]
            resonators = [
                ResonatorEdge(
                    endpoints=tuple(r["endpoints"]),
                    crossings=int(r.get("crossings", 0)),
                    frequency=r.get("frequency"),
                    active=bool(r.get("active", True)),
                )
                for r in data["resonators"]
            ]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed layout document: {exc}") from exc
        return cls(spec=spec, qubits=qubits, resonators=resonators)

    @classmethod
    def from_json(cls, text: str) -> PhysicalLayout:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ResourceSummary:
    M: int
    columns: int
    total_qubits: int
    max_airbridges_per_resonator: int
    qubits_per_logical_block: int


# ---------------------------------------------------------------------------
# Tilings
# ---------------------------------------------------------------------------

def square_block_role(row: int, col: int) -> Role:
    """Planar-code role of a site in a (2d-1)x(2d-1) block (data on even parity)."""
    if (row + col) % 2 == 0:
        return Role.DATA
    return Role.SYNDROME_X if row % 2 == 1 else Role.SYNDROME_Z


def rotated_block_sites(d: int) -> dict[tuple[int, int], Role]:
    """Sites of a rotated patch embedded as a diamond in a (2d-1)x(2d-1) block.

    Data qubit (i, j) of the d x d patch sits at (i + j, j - i + d - 1); the
    plaquette with top-left data corner (i, j) sits directly below it.  X-type
    weight-two checks close the top and bottom edges, Z-type the left and
    right edges.
    """
    sites: dict[tuple[int, int], Role] = {}
    for i in range(d):
        for j in range(d):
            sites[(i + j, j - i + d - 1)] = Role.DATA

    def plaquette(i: int, j: int) -> None:
        role = Role.SYNDROME_X if (i + j) % 2 == 0 else Role.SYNDROME_Z
        sites[(i + j + 1, j - i + d - 1)] = role

    for i in range(d - 1):
        for j in range(d - 1):
            plaquette(i, j)
    for j in range(d - 1):
        if (j - 1) % 2 == 0:
            plaquette(-1, j)
        if (d - 1 + j) % 2 == 0:
            plaquette(d - 1, j)
    for i in range(d - 1):
        if (i - 1) % 2 == 1:
            plaquette(i, -1)
        if (i + d - 1) % 2 == 1:
            plaquette(i, d - 1)
    return sites


def _grid_sites(spec: SurfaceCodeSpec) -> dict[tuple[int, int], tuple[Role, bool]]:
    M = spec.M
    if spec.encoding is Encoding.SQUARE:
        block = {(r, c): square_block_role(r, c) for r in range(M) for c in range(M)}
    else:
        block = rotated_block_sites(spec.d)
    sites: dict[tuple[int, int], tuple[Role, bool]] = {}
    for k in range(spec.N):
        offset = k * (M + 1)
        for (r, c), role in block.items():
            sites[(r, offset + c)] = (role, False)
        if k < spec.N - 1:
            for r in range(M):
                sites[(r, offset + M)] = (Role.DATA, True)
    return sites


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def build_grid(spec: SurfaceCodeSpec) -> PhysicalLayout:
    """Pre-fold layout: qubits with row-major ids and all nearest-neighbour couplers.

    Couplers touching a spacer qubit are kept but marked inactive.
    """
    sites = _grid_sites(spec)
    order = sorted(sites)
    ids = {pos: n for n, pos in enumerate(order)}
    qubits = [
        QubitNode(id=ids[pos], role=sites[pos][0], grid_pos=pos, spacer=sites[pos][1])
        for pos in order
    ]
    resonators = []
    for r, c in order:
        for nb in ((r, c + 1), (r + 1, c)):
            if nb in ids:
                active = not (sites[(r, c)][1] or sites[nb][1])
                resonators.append(ResonatorEdge(endpoints=(ids[(r, c)], ids[nb]), active=active))
    return PhysicalLayout(spec=spec, qubits=qubits, resonators=resonators)


def folded_position(spec: SurfaceCodeSpec, grid_pos: tuple[int, int]) -> tuple[int, int]:
    r, c = grid_pos
    return c % 2, (c // 2) * spec.M + r


def grid_position(spec: SurfaceCodeSpec, folded_pos: tuple[int, int]) -> tuple[int, int]:
    rail, index = folded_pos
    block, r = divmod(index, spec.M)
    return r, 2 * block + rail


def _segments(layout: PhysicalLayout) -> Iterator[tuple[int, int, int, int, int]]:
    """Yield (resonator index, left column, row, x on rail 0, x on rail 1) for rail-crossing couplers."""
    by_id = layout.qubit_by_id()
    for n, res in enumerate(layout.resonators):
        a, b = (by_id[e] for e in res.endpoints)
        if a.folded_pos is None or b.folded_pos is None:
            raise ValidationError("layout is not folded")
        if a.folded_pos[0] == b.folded_pos[0]:
            continue  # intra-column coupler runs along its rail
        top, bottom = (a, b) if a.folded_pos[0] == 0 else (b, a)
        left_col = min(a.grid_pos[1], b.grid_pos[1])
        yield n, left_col, a.grid_pos[0], top.folded_pos[1], bottom.folded_pos[1]


def crossing_pairs(layout: PhysicalLayout) -> list[tuple[int, int, int]]:
    """All crossing resonator pairs of a folded layout as ``(i, j, bridged)``.

    Couplers are straight segments between the rails; two cross when their
    endpoint order flips between rail 0 and rail 1.  Found by a sweep over the
    segments' x-extents.  The airbridge for a crossing goes on the coupler with
    the smaller left column when the two rows differ by an odd amount and on
    the other coupler otherwise, which spreads the bridges evenly: an interior
    coupler meets ``2(d-1)`` others and carries exactly ``d-1`` bridges.
    """
    segs = sorted(_segments(layout), key=lambda s: (min(s[3], s[4]), s[0]))
    endpoints = {n: set(layout.resonators[n].endpoints) for n, *_ in segs}
    pairs = []
    for a in range(len(segs)):
        i, ci, ri, ti, bi = segs[a]
        hi = max(ti, bi)
        for b in range(a + 1, len(segs)):
            j, cj, rj, tj, bj = segs[b]
            if min(tj, bj) > hi:
                break
            if (ti - tj) * (bi - bj) >= 0 or endpoints[i] & endpoints[j]:
                continue
            if ci == cj:
                bridged = min(i, j)
            else:
                lower, upper = (i, j) if ci < cj else (j, i)
                bridged = lower if abs(ri - rj) % 2 == 1 else upper
            pairs.append((min(i, j), max(i, j), bridged))
    pairs.sort()
    return pairs


def fold(layout: PhysicalLayout) -> PhysicalLayout:
    """Assign rail positions and airbridge counts; the coupler set is untouched."""
    spec = layout.spec
    qubits = [replace(q, folded_pos=folded_position(spec, q.grid_pos)) for q in layout.qubits]
    resonators = [replace(r, crossings=0) for r in layout.resonators]
    folded = PhysicalLayout(spec=spec, qubits=qubits, resonators=resonators)
    for _, _, bridged in crossing_pairs(folded):
        resonators[bridged].crossings += 1
    return folded


def unfold(layout: PhysicalLayout) -> PhysicalLayout:
    if not layout.is_folded:
        raise ValidationError("unfold needs a folded layout (missing folded_pos)")
    spec = layout.spec
    qubits = [
        replace(q, grid_pos=grid_position(spec, q.folded_pos), folded_pos=None)
        for q in layout.qubits
    ]
    resonators = [replace(r, crossings=0) for r in layout.resonators]
    return PhysicalLayout(spec=spec, qubits=qubits, resonators=resonators)


def resource_estimate(spec: SurfaceCodeSpec) -> ResourceSummary:
    d, N, M = spec.d, spec.N, spec.M
    if spec.encoding is Encoding.SQUARE:
        per_block = M * M
        total = M * (2 * d * N - 1)
    else:
        per_block = 2 * d * d - 1
        total = N * per_block + (N - 1) * M
    return ResourceSummary(
        M=M,
        columns=spec.columns,
        total_qubits=total,
        max_airbridges_per_resonator=d - 1,
        qubits_per_logical_block=per_block,
    )
