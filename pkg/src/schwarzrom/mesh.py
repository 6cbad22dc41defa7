"""Structured triangular grids and overlapping rectangular decompositions.

The monolithic domain is a uniform nx-by-ny cell rectangle whose cells are
split along the lower-left -> upper-right diagonal into P1 triangles.
Subdomains are rectangular cell windows of the parent grid; their meshes
reuse the parent node coordinates bit-for-bit, so all couplings below are
conformal by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"
    BOTTOM = "bottom"
    TOP = "top"


class Layout(Enum):
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"
    FOUR_SQUARES = "four_squares"
    MONOLITHIC = "monolithic"


@dataclass(frozen=True)
class StructuredGrid:
    """Uniform triangulated rectangle.

    nodes are ordered row-major with x varying fastest:
    ``index = iy * (nx + 1) + ix``.  Triangle vertices are CCW, so every
    signed area is positive.  ``side_of`` maps boundary node index -> Side,
    with corner nodes resolved in favor of TOP/BOTTOM.
    """

    nx: int
    ny: int
    bounds: tuple[float, float, float, float]  # (x0, x1, y0, y1)
    hx: float
    hy: float
    nodes: np.ndarray  # (n_nodes, 2)
    triangles: np.ndarray  # (2*nx*ny, 3) int
    side_of: dict[int, Side]

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    def node_index(self, ix: int, iy: int) -> int:
        return iy * (self.nx + 1) + ix

    def node_ij(self, index: int) -> tuple[int, int]:
        return index % (self.nx + 1), index // (self.nx + 1)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.array(sorted(self.side_of), dtype=np.int64)

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[list(self.side_of)] = False
        return np.flatnonzero(mask)


def _side_tags(nx: int, ny: int) -> dict[int, Side]:
    """Boundary tags for an nx-by-ny cell rectangle, TOP/BOTTOM win corners."""
    tags: dict[int, Side] = {}
    stride = nx + 1
    for iy in range(ny + 1):
        tags[iy * stride] = Side.LEFT
        tags[iy * stride + nx] = Side.RIGHT
    for ix in range(nx + 1):
        tags[ix] = Side.BOTTOM
        tags[ny * stride + ix] = Side.TOP
    return tags


def _triangulate(nx: int, ny: int) -> np.ndarray:
    """Split every cell along the lower-left -> upper-right diagonal."""
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    stride = nx + 1
    k = 0
    for iy in range(ny):
        base = iy * stride
        for ix in range(nx):
            n00 = base + ix
            n10 = n00 + 1
            n01 = n00 + stride
            n11 = n01 + 1
            tris[k] = (n00, n10, n11)
            tris[k + 1] = (n00, n11, n01)
            k += 2
    return tris


def build_grid(nx: int, ny: int, bounds: Sequence[float]) -> StructuredGrid:
    """Build the uniform triangulated grid on the rectangle ``bounds``.

    Args:
        nx, ny: cell counts per axis, at least 1.
        bounds: (x0, x1, y0, y1) with x0 < x1 and y0 < y1.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive, got nx={nx}, ny={ny}")
    x0, x1, y0, y1 = map(float, bounds)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"invalid bounds {bounds!r}: need x0 < x1 and y0 < y1")
    hx = (x1 - x0) / nx
    hy = (y1 - y0) / ny
    xs = x0 + hx * np.arange(nx + 1)
    ys = y0 + hy * np.arange(ny + 1)
    xx, yy = np.meshgrid(xs, ys)  # row-major: y outer, x inner
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    return StructuredGrid(
        nx=nx,
        ny=ny,
        bounds=(x0, x1, y0, y1),
        hx=hx,
        hy=hy,
        nodes=nodes,
        triangles=_triangulate(nx, ny),
        side_of=_side_tags(nx, ny),
    )


@dataclass(frozen=True)
class DecompositionConfig:
    layout: Layout
    overlap: int = 0

    def __post_init__(self):
        if self.overlap < 0:
            raise ValueError(f"overlap must be non-negative, got {self.overlap}")

    def validate(self, grid: StructuredGrid) -> None:
        if self.overlap >= min(grid.nx, grid.ny):
            raise ValueError(
                f"overlap {self.overlap} must be < min(nx, ny) = {min(grid.nx, grid.ny)}"
            )
        if self.layout in (Layout.VERTICAL, Layout.FOUR_SQUARES) and grid.nx % 2:
            raise ValueError(f"layout {self.layout.value} needs even nx, got {grid.nx}")
        if self.layout in (Layout.HORIZONTAL, Layout.FOUR_SQUARES) and grid.ny % 2:
            raise ValueError(f"layout {self.layout.value} needs even ny, got {grid.ny}")


@dataclass(frozen=True)
class GammaEdge:
    """One complete transmission edge of a subdomain.

    ``nodes`` are the local indices lying on this edge whose parent node is
    strictly inside the global domain, ordered along the edge.  A corner node
    shared by two edges appears in both lists.
    """

    side: Side
    neighbor: int
    nodes: np.ndarray


@dataclass(frozen=True)
class Subdomain:
    """Rectangular cell window of a parent grid with node classification."""

    index: int
    cell_range: tuple[int, int, int, int]  # (ix_lo, ix_hi, iy_lo, iy_hi), hi exclusive
    local_grid: StructuredGrid
    parent_of: np.ndarray  # local node -> parent node
    interior: np.ndarray
    physical_bnd: np.ndarray
    gamma_edges: tuple[GammaEdge, ...]
    center: tuple[float, float]
    _local_of_parent: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def schwarz_bnd(self) -> np.ndarray:
        """All transmission nodes, deduplicated, ascending."""
        if not self.gamma_edges:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([e.nodes for e in self.gamma_edges]))

    def boundary_ordering(self) -> np.ndarray:
        """Local boundary nodes: physical first, then Gamma edge-by-edge.

        Edges are taken in ascending neighbor order; a corner shared by two
        edges is listed once (at its first appearance).
        """
        seen = set(self.physical_bnd.tolist())
        order = list(self.physical_bnd)
        for edge in sorted(self.gamma_edges, key=lambda e: e.neighbor):
            for n in edge.nodes:
                if n not in seen:
                    seen.add(n)
                    order.append(n)
        return np.array(order, dtype=np.int64)

    def local_of_parent(self, n_parent_nodes: int) -> np.ndarray:
        """Inverse of parent_of as a dense array (-1 where absent)."""
        key = n_parent_nodes
        if key not in self._local_of_parent:
            inv = np.full(n_parent_nodes, -1, dtype=np.int64)
            inv[self.parent_of] = np.arange(len(self.parent_of))
            self._local_of_parent[key] = inv
        return self._local_of_parent[key]


def _window_split(n: int, overlap: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Half-open low/high windows around the midline sharing ``overlap`` cells."""
    half = n // 2
    hi = half + math.ceil(overlap / 2)
    lo = half - overlap // 2
    if hi >= n or lo <= 0:
        raise ValueError(
            f"overlap {overlap} too large for {n} cells: windows would cover the full axis"
        )
    return (0, hi), (lo, n)


def _carve(grid: StructuredGrid, index: int, window: tuple[int, int, int, int]) -> dict:
    """Build the local grid and parent map for one cell window."""
    ix_lo, ix_hi, iy_lo, iy_hi = window
    nxs, nys = ix_hi - ix_lo, iy_hi - iy_lo
    stride = grid.nx + 1
    lx, ly = np.meshgrid(np.arange(nxs + 1), np.arange(nys + 1))
    parent_of = ((iy_lo + ly) * stride + (ix_lo + lx)).ravel()
    nodes = grid.nodes[parent_of]
    x0, y0 = grid.nodes[grid.node_index(ix_lo, iy_lo)]
    x1, y1 = grid.nodes[grid.node_index(ix_hi, iy_hi)]
    local = StructuredGrid(
        nx=nxs,
        ny=nys,
        bounds=(x0, x1, y0, y1),
        hx=grid.hx,
        hy=grid.hy,
        nodes=nodes,
        triangles=_triangulate(nxs, nys),
        side_of=_side_tags(nxs, nys),
    )
    return {
        "index": index,
        "cell_range": window,
        "local_grid": local,
        "parent_of": parent_of,
        "center": ((x0 + x1) / 2.0, (y0 + y1) / 2.0),
    }


def _gamma_sides(window, grid) -> list[Side]:
    """Local sides of the window that do not lie on the global boundary."""
    ix_lo, ix_hi, iy_lo, iy_hi = window
    sides = []
    if ix_lo > 0:
        sides.append(Side.LEFT)
    if ix_hi < grid.nx:
        sides.append(Side.RIGHT)
    if iy_lo > 0:
        sides.append(Side.BOTTOM)
    if iy_hi < grid.ny:
        sides.append(Side.TOP)
    return sides


def _side_line(window, side: Side) -> tuple[str, int, int, int]:
    """(axis, fixed line, span lo, span hi) of one window side, in parent cells."""
    ix_lo, ix_hi, iy_lo, iy_hi = window
    if side is Side.LEFT:
        return "x", ix_lo, iy_lo, iy_hi
    if side is Side.RIGHT:
        return "x", ix_hi, iy_lo, iy_hi
    if side is Side.BOTTOM:
        return "y", iy_lo, ix_lo, ix_hi
    return "y", iy_hi, ix_lo, ix_hi


def _edge_neighbor(windows, i: int, side: Side) -> int:
    """Subdomain supplying the complete edge ``side`` of subdomain ``i``."""
    axis, line, lo, hi = _side_line(windows[i], side)
    candidates = []
    for j, w in enumerate(windows):
        if j == i:
            continue
        jx_lo, jx_hi, jy_lo, jy_hi = w
        if axis == "x":
            covers = jy_lo <= lo and hi <= jy_hi
            inside = jx_lo < line < jx_hi
            touches = jx_lo <= line <= jx_hi
        else:
            covers = jx_lo <= lo and hi <= jx_hi
            inside = jy_lo < line < jy_hi
            touches = jy_lo <= line <= jy_hi
        if covers and inside:
            candidates.append((0, j))
        elif covers and touches:
            candidates.append((1, j))
    if not candidates:
        raise ValueError(f"no neighbor shares the complete {side.value} edge of subdomain {i}")
    candidates.sort()
    return candidates[0][1]


def _classify(grid: StructuredGrid, carved: dict, windows) -> dict:
    """Partition local nodes into interior / physical / Gamma-edge groups."""
    local = carved["local_grid"]
    parent_of = carved["parent_of"]
    on_parent_bnd = np.zeros(grid.n_nodes, dtype=bool)
    on_parent_bnd[list(grid.side_of)] = True

    local_bnd = np.array(sorted(local.side_of), dtype=np.int64)
    physical = local_bnd[on_parent_bnd[parent_of[local_bnd]]]

    edges = []
    i = carved["index"]
    nxs, nys = local.nx, local.ny
    for side in _gamma_sides(carved["cell_range"], grid):
        if side is Side.LEFT:
            line = [local.node_index(0, iy) for iy in range(nys + 1)]
        elif side is Side.RIGHT:
            line = [local.node_index(nxs, iy) for iy in range(nys + 1)]
        elif side is Side.BOTTOM:
            line = [local.node_index(ix, 0) for ix in range(nxs + 1)]
        else:
            line = [local.node_index(ix, nys) for ix in range(nxs + 1)]
        line = np.array(line, dtype=np.int64)
        line = line[~on_parent_bnd[parent_of[line]]]
        neighbor = _edge_neighbor(windows, i, side)
        edges.append(GammaEdge(side=side, neighbor=neighbor, nodes=line))

    gamma_all = (
        np.unique(np.concatenate([e.nodes for e in edges]))
        if edges
        else np.empty(0, dtype=np.int64)
    )
    in_gamma = np.zeros(local.n_nodes, dtype=bool)
    in_gamma[gamma_all] = True
    in_physical = np.zeros(local.n_nodes, dtype=bool)
    in_physical[physical] = True
    interior = np.flatnonzero(~in_gamma & ~in_physical)
    return {"interior": interior, "physical_bnd": physical, "gamma_edges": tuple(edges)}


def decompose(grid: StructuredGrid, cfg: DecompositionConfig) -> list[Subdomain]:
    """Carve the grid into overlapping subdomains per the layout.

    Numbering follows the layout figures: VERTICAL is left/right,
    HORIZONTAL is bottom/top, FOUR_SQUARES is bottom-left, bottom-right,
    top-left, top-right.  Diagonal neighbors are never connected.
    """
    cfg.validate(grid)
    if cfg.layout is Layout.MONOLITHIC:
        windows = [(0, grid.nx, 0, grid.ny)]
    elif cfg.layout is Layout.VERTICAL:
        (a0, a1), (b0, b1) = _window_split(grid.nx, cfg.overlap)
        windows = [(a0, a1, 0, grid.ny), (b0, b1, 0, grid.ny)]
    elif cfg.layout is Layout.HORIZONTAL:
        (a0, a1), (b0, b1) = _window_split(grid.ny, cfg.overlap)
        windows = [(0, grid.nx, a0, a1), (0, grid.nx, b0, b1)]
    else:
        (xl, xr) = _window_split(grid.nx, cfg.overlap)
        (yb, yt) = _window_split(grid.ny, cfg.overlap)
        windows = [
            (xl[0], xl[1], yb[0], yb[1]),
            (xr[0], xr[1], yb[0], yb[1]),
            (xl[0], xl[1], yt[0], yt[1]),
            (xr[0], xr[1], yt[0], yt[1]),
        ]

    subdomains = []
    for i, window in enumerate(windows):
        carved = _carve(grid, i, window)
        parts = _classify(grid, carved, windows)
        subdomains.append(Subdomain(**carved, **parts))
    return subdomains


def classify_nodes(sub: Subdomain, grid: StructuredGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Recompute the (interior, physical, schwarz) partition of a subdomain.

    Physical Dirichlet wins over Gamma: any local boundary node whose parent
    lies on the global boundary is physical; the remaining local boundary
    nodes are transmission nodes.
    """
    on_parent_bnd = np.zeros(grid.n_nodes, dtype=bool)
    on_parent_bnd[list(grid.side_of)] = True
    local_bnd = np.array(sorted(sub.local_grid.side_of), dtype=np.int64)
    physical = local_bnd[on_parent_bnd[sub.parent_of[local_bnd]]]
    schwarz = local_bnd[~on_parent_bnd[sub.parent_of[local_bnd]]]
    in_bnd = np.zeros(sub.local_grid.n_nodes, dtype=bool)
    in_bnd[local_bnd] = True
    interior = np.flatnonzero(~in_bnd)
    return interior, physical, schwarz


def dump_nodes_csv(grid: StructuredGrid, path) -> None:
    """Debug dump: node index, x, y, side tag (empty when interior)."""
    with open(path, "w") as fh:
        fh.write("node,x,y,tag\n")
        for i, (x, y) in enumerate(grid.nodes):
            tag = grid.side_of.get(i)
            fh.write(f"{i},{x!r},{y!r},{tag.value if tag else ''}\n")
