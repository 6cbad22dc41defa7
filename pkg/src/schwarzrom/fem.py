"""P1 finite elements and backward-Euler time stepping for the heat equation.

Dirichlet data is enforced strongly by lifting: the assembled operators are
split into interior/boundary blocks and known boundary values enter the
right-hand side.  On the uniform structured grids used here all triangles
fall into two congruence classes, so element matrices are computed once per
class from the cell spacings; this keeps the assembled operators invariant
under exact translations of the domain.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import Side, StructuredGrid, Subdomain
from .pod import SnapshotSet

BoundaryValue = Union[float, Callable[[float], float]]


def sine_forcing(mu: float) -> Callable[[float], float]:
    """The time-varying Dirichlet profile 1 + 0.5*sin(2*pi*mu*t)."""

    def q(t: float) -> float:
        return 1.0 + 0.5 * math.sin(2.0 * math.pi * mu * t)

    return q


@dataclass(frozen=True)
class BoundaryCondition:
    """Per-side Dirichlet data: a constant or a callable of time."""

    values: dict[Side, BoundaryValue]

    def value(self, side: Side, t: float) -> float:
        v = self.values[side]
        return v(t) if callable(v) else v

    def fill(self, out: np.ndarray, groups: Sequence[tuple[Side, np.ndarray]], t: float) -> None:
        """Write bc values at time t into ``out`` at the grouped positions."""
        for side, positions in groups:
            out[positions] = self.value(side, t)


def group_side_positions(sides: Sequence[Side]) -> list[tuple[Side, np.ndarray]]:
    """Group positions of a side-tag sequence by side, for vectorized fills."""
    groups = []
    arr = np.array([s.value for s in sides])
    for side in Side:
        positions = np.flatnonzero(arr == side.value)
        if positions.size:
            groups.append((side, positions))
    return groups


def p1_stiffness(coords: np.ndarray) -> np.ndarray:
    """Local P1 stiffness of a triangle with vertex rows ``coords`` (3x2)."""
    x, y = coords[:, 0], coords[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    area2 = x[0] * b[0] + x[1] * b[1] + x[2] * b[2]  # twice the signed area
    if area2 <= 0:
        raise ValueError(f"degenerate or inverted triangle, doubled area {area2}")
    return (np.outer(b, b) + np.outer(c, c)) / (2.0 * area2)


def p1_mass(coords: np.ndarray) -> np.ndarray:
    """Local consistent P1 mass matrix: area/12 * [[2,1,1],[1,2,1],[1,1,2]]."""
    x, y = coords[:, 0], coords[:, 1]
    area2 = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0])
    if area2 <= 0:
        raise ValueError(f"degenerate or inverted triangle, doubled area {area2}")
    base = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
    return (area2 / 24.0) * base


@dataclass
class FemOperators:
    """Assembled interior/boundary blocks for one mesh.

    The boundary ordering is physical nodes first, then transmission nodes
    edge-by-edge; ``boundary_sides`` carries the global side tag of each
    physical position (None at transmission positions).
    """

    grid: StructuredGrid
    M_ii: sp.csr_matrix
    A_ii: sp.csr_matrix
    M_ib: sp.csr_matrix
    A_ib: sp.csr_matrix
    interior_map: np.ndarray
    boundary_map: np.ndarray
    boundary_sides: list
    _solvers: dict = field(default_factory=dict, repr=False)

    @property
    def n_interior(self) -> int:
        return len(self.interior_map)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_map)

    def stepper(self, dt: float):
        """LU factorization of (M_ii + dt*A_ii), computed once per dt."""
        if dt <= 0:
            raise ValueError(f"time step must be positive, got {dt}")
        if dt not in self._solvers:
            system = (self.M_ii + dt * self.A_ii).tocsc()
            self._solvers[dt] = splu(system)
        return self._solvers[dt]

    def physical_groups(self) -> list[tuple[Side, np.ndarray]]:
        """Per-side position groups of the physical boundary entries."""
        groups = []
        arr = np.array([s.value if s is not None else "" for s in self.boundary_sides])
        for side in Side:
            positions = np.flatnonzero(arr == side.value)
            if positions.size:
                groups.append((side, positions))
        return groups


def _validate_uniform(grid: StructuredGrid) -> None:
    if grid.hx <= 0 or grid.hy <= 0:
        raise ValueError(f"non-positive cell spacing ({grid.hx}, {grid.hy})")
    p = grid.nodes[grid.triangles]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 2, 0] - p[:, 0, 0]
    ) * (p[:, 1, 1] - p[:, 0, 1])
    if area2.min() <= 0:
        raise ValueError(
            f"degenerate triangle in grid: min doubled area {area2.min()}"
        )
    scale = max(abs(v) for v in grid.bounds) + 1.0
    ix = np.arange(grid.nx + 1)
    iy = np.arange(grid.ny + 1)
    xs = grid.bounds[0] + grid.hx * ix
    ys = grid.bounds[2] + grid.hy * iy
    expect_x = np.tile(xs, grid.ny + 1)
    expect_y = np.repeat(ys, grid.nx + 1)
    if (
        np.abs(grid.nodes[:, 0] - expect_x).max() > 1e-12 * scale
        or np.abs(grid.nodes[:, 1] - expect_y).max() > 1e-12 * scale
    ):
        raise ValueError("grid nodes are not a uniform lattice; assembly assumes one")


def _assemble_full(grid: StructuredGrid) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Full nodal mass and stiffness via the two triangle congruence classes."""
    _validate_uniform(grid)
    hx, hy = grid.hx, grid.hy
    lower = np.array([[0.0, 0.0], [hx, 0.0], [hx, hy]])
    upper = np.array([[0.0, 0.0], [hx, hy], [0.0, hy]])
    K_class = np.stack([p1_stiffness(lower), p1_stiffness(upper)])
    M_class = np.stack([p1_mass(lower), p1_mass(upper)])

    tris = grid.triangles
    n_tri = len(tris)
    which = np.arange(n_tri) % 2  # even = lower, odd = upper (triangulation order)
    Ke = K_class[which]
    Me = M_class[which]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = grid.n_nodes
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return M, A


def assemble(
    grid: StructuredGrid,
    interior: np.ndarray,
    boundary: np.ndarray,
    boundary_sides: list | None = None,
) -> FemOperators:
    """Assemble and block-split mass/stiffness for one node partition."""
    M, A = _assemble_full(grid)
    interior = np.asarray(interior, dtype=np.int64)
    boundary = np.asarray(boundary, dtype=np.int64)
    M_i = M[interior]
    A_i = A[interior]
    if boundary_sides is None:
        boundary_sides = [grid.side_of.get(int(n)) for n in boundary]
    return FemOperators(
        grid=grid,
        M_ii=M_i[:, interior].tocsr(),
        A_ii=A_i[:, interior].tocsr(),
        M_ib=M_i[:, boundary].tocsr(),
        A_ib=A_i[:, boundary].tocsr(),
        interior_map=interior,
        boundary_map=boundary,
        boundary_sides=boundary_sides,
    )


def assemble_monolithic(grid: StructuredGrid) -> FemOperators:
    return assemble(grid, grid.interior_nodes, grid.boundary_nodes)


def assemble_subdomain(sub: Subdomain, grid: StructuredGrid) -> FemOperators:
    """Operators on a subdomain mesh, boundary ordered physical-then-Gamma.

    Physical positions are tagged with the PARENT side so global Dirichlet
    data can be evaluated; transmission positions carry None.
    """
    boundary = sub.boundary_ordering()
    n_phys = len(sub.physical_bnd)
    sides: list = [grid.side_of[int(p)] for p in sub.parent_of[boundary[:n_phys]]]
    sides += [None] * (len(boundary) - n_phys)
    return assemble(sub.local_grid, sub.interior, boundary, sides)


def backward_euler_step(
    ops: FemOperators, x_n: np.ndarray, g_next: np.ndarray, dt: float
) -> np.ndarray:
    """One implicit step: (M_ii + dt*A_ii) x = M_ii x_n - dt*A_ib g_next."""
    if x_n.shape != (ops.n_interior,):
        raise ValueError(f"state has shape {x_n.shape}, expected ({ops.n_interior},)")
    if g_next.shape != (ops.n_boundary,):
        raise ValueError(
            f"boundary vector has shape {g_next.shape}, expected ({ops.n_boundary},)"
        )
    rhs = ops.M_ii @ x_n - dt * (ops.A_ib @ g_next)
    x = ops.stepper(dt).solve(rhs)
    if not np.all(np.isfinite(x)):
        raise RuntimeError("backward Euler solve produced non-finite values")
    return x


def interpolate_ic(grid: StructuredGrid, ic) -> np.ndarray:
    """Nodal interpolation of the initial condition (constant or f(x, y))."""
    if callable(ic):
        vals = np.asarray(ic(grid.nodes[:, 0], grid.nodes[:, 1]), dtype=float)
        return np.broadcast_to(vals, (grid.n_nodes,)).copy()
    return np.full(grid.n_nodes, float(ic))


def time_grid(dt: float, T: float) -> np.ndarray:
    """Uniform time stamps 0..T; T must be an integer multiple of dt."""
    if dt <= 0 or T <= 0:
        raise ValueError(f"need dt > 0 and T > 0, got dt={dt}, T={T}")
    steps = round(T / dt)
    if abs(steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return dt * np.arange(steps + 1)


def solve_monolithic_timed(
    grid: StructuredGrid, bc: BoundaryCondition, ic, dt: float, T: float
) -> tuple[SnapshotSet, float]:
    """March the full-order model; returns snapshots and online seconds.

    Snapshot column p holds the interior state at t_p; the parallel boundary
    history holds the interpolated initial condition at t=0 and the Dirichlet
    data afterwards.  Assembly and factorization are excluded from the timer.
    """
    times = time_grid(dt, T)
    ops = assemble_monolithic(grid)
    ops.stepper(dt)
    groups = ops.physical_groups()
    ic_full = interpolate_ic(grid, ic)

    n_steps = len(times) - 1
    X = np.empty((ops.n_interior, n_steps + 1))
    G = np.empty((ops.n_boundary, n_steps + 1))
    X[:, 0] = ic_full[ops.interior_map]
    G[:, 0] = ic_full[ops.boundary_map]

    g = np.empty(ops.n_boundary)
    start = time.perf_counter()
    for p in range(1, n_steps + 1):
        bc.fill(g, groups, times[p])
        X[:, p] = backward_euler_step(ops, X[:, p - 1], g, dt)
        G[:, p] = g
    seconds = time.perf_counter() - start

    snaps = SnapshotSet(
        X=X,
        times=times,
        boundary_history=G,
        interior_nodes=ops.interior_map,
        boundary_nodes=ops.boundary_map,
    )
    return snaps, seconds


def solve_monolithic(
    grid: StructuredGrid, bc: BoundaryCondition, ic, dt: float, T: float
) -> SnapshotSet:
    snaps, _ = solve_monolithic_timed(grid, bc, ic, dt, T)
    return snaps


def write_snapshot_csv(matrix: np.ndarray, times: np.ndarray, path) -> None:
    """One row per node, one column per time; header row of time stamps."""
    header = ",".join(f"{t:.17g}" for t in times)
    np.savetxt(path, matrix, fmt="%.17g", delimiter=",", header=header, comments="")


def read_snapshot_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        times = np.array([float(v) for v in fh.readline().split(",")])
    matrix = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if matrix.shape[1] != len(times):
        raise ValueError(
            f"snapshot file {path}: {matrix.shape[1]} columns vs {len(times)} time stamps"
        )
    return matrix, times
