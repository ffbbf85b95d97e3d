"""Uniform grids, nodal fields, cell quadrature, and discrete operators.

Discretization in one place so every module shares the same calculus:

* Fields live at nodes of a uniform Cartesian grid over a box; an optional
  cell mask carves the active body out of the box (balls, annuli, split
  domains).
* Gradients are evaluated at cell centers as the gradient of the multilinear
  (trilinear in 3D) interpolant: along each axis, the average of the 2^(d-1)
  forward differences across the cell.  Exact for affine fields, O(h^2) at
  cell centers otherwise.
* Integration is midpoint quadrature: sum of cell values times cell volume.
* The nodal divergence is defined as the negative adjoint of the cell-center
  gradient with respect to the cell quadrature (cells) and the lumped nodal
  volumes (nodes).  Summation by parts

      sum_cells T : Dh vol + sum_nodes Div(T) . h vol_node = 0

  then holds to round-off for every nodal h, which is what ties weak
  residuals, strong residuals, and the minimizer's gradient together.

Plane-strain convention (dim = 2): u keeps all three components with the
third frozen at zero, the deformation gradient gets a unit out-of-plane
column, and descriptor gradients carry a zero third column.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InteriorNodeSelectedError, ShapeMismatchError
from .manifolds import Manifold


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product grid on a box; resolution counts cells per axis."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lo) == len(self.hi) == len(self.cells)):
            raise ShapeMismatchError("lo, hi, cells must have equal length")
        if self.dim not in (2, 3):
            raise ShapeMismatchError(f"only dim 2 or 3 supported, got {self.dim}")
        if any(c < 1 for c in self.cells):
            raise ShapeMismatchError("need at least one cell per axis")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ShapeMismatchError("box must have positive extent")

    @classmethod
    def cube(cls, resolution: int, lo: float = 0.0, hi: float = 1.0, dim: int = 3) -> "Grid":
        return cls((lo,) * dim, (hi,) * dim, (resolution,) * dim)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((h - l) / c for l, h, c in zip(self.lo, self.hi, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def node_coords(self) -> np.ndarray:
        axes = [np.linspace(l, h, n) for l, h, n in zip(self.lo, self.hi, self.nodes)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def cell_centers(self) -> np.ndarray:
        axes = [
            np.linspace(l + s / 2, h - s / 2, c)
            for l, h, s, c in zip(self.lo, self.hi, self.spacing, self.cells)
        ]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def cell_centers3(self) -> np.ndarray:
        """Cell centers padded to 3 components (plane problems get x3 = 0)."""
        x = self.cell_centers()
        if self.dim == 3:
            return x
        pad = np.zeros(x.shape[:-1] + (1,))
        return np.concatenate([x, pad], axis=-1)


def _corner_offsets(dim: int):
    return list(itertools.product((0, 1), repeat=dim))


def _corner_view(w: np.ndarray, offsets, cells):
    sls = tuple(slice(s, s + c) for s, c in zip(offsets, cells))
    return w[sls]


@dataclass
class FieldState:
    """Nodal deformation u (always 3-valued) and descriptor nu on a grid.

    pinned masks mark Dirichlet nodes whose values are held by the data in
    u / nu; active marks the cells that belong to the body.
    """

    grid: Grid
    u: np.ndarray
    nu: np.ndarray
    pinned_u: np.ndarray
    pinned_nu: np.ndarray
    active: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        nodes = self.grid.nodes
        if self.u.shape != nodes + (3,):
            raise ShapeMismatchError(f"u must be {nodes + (3,)}, got {self.u.shape}")
        if self.nu.ndim != self.grid.dim + 1 or self.nu.shape[: self.grid.dim] != nodes:
            raise ShapeMismatchError(f"nu must be {nodes} x embed, got {self.nu.shape}")
        for name, m in (("pinned_u", self.pinned_u), ("pinned_nu", self.pinned_nu)):
            if m.shape != nodes or m.dtype != bool:
                raise ShapeMismatchError(f"{name} must be a bool mask of shape {nodes}")
        if self.active is None:
            self.active = np.ones(self.grid.cells, dtype=bool)
        if self.active.shape != self.grid.cells or self.active.dtype != bool:
            raise ShapeMismatchError(f"active must be a bool cell mask {self.grid.cells}")

    @property
    def embed_dim(self) -> int:
        return self.nu.shape[-1]

    def copy(self) -> "FieldState":
        return FieldState(
            grid=self.grid,
            u=self.u.copy(),
            nu=self.nu.copy(),
            pinned_u=self.pinned_u.copy(),
            pinned_nu=self.pinned_nu.copy(),
            active=self.active.copy(),
        )

    def constraint_violation(self, manifold: Manifold) -> float:
        """Worst nodal constraint violation over nodes touching active cells."""
        mask = incident_node_mask(self.grid, self.active)
        viol = manifold.constraint_violation(self.nu)
        return float(viol[mask].max()) if mask.any() else 0.0


def identity_state(grid: Grid, manifold: Manifold, nu0: np.ndarray) -> FieldState:
    """Reference state: u = x (third component zero in plane problems),
    descriptor constant at nu0 projected onto the manifold."""
    coords = grid.node_coords()
    u = np.zeros(grid.nodes + (3,))
    u[..., : grid.dim] = coords
    nu0 = manifold.project(np.asarray(nu0, dtype=float))
    nu = np.broadcast_to(nu0, grid.nodes + (manifold.embed_dim,)).copy()
    return FieldState(
        grid=grid,
        u=u,
        nu=nu,
        pinned_u=np.zeros(grid.nodes, dtype=bool),
        pinned_nu=np.zeros(grid.nodes, dtype=bool),
    )


@dataclass
class GradientField:
    """Cell-centered kinematic data: positions, averages, gradients."""

    x: np.ndarray      # (cells..., 3) cell centers, padded in 2D
    u_bar: np.ndarray  # (cells..., 3)
    F: np.ndarray      # (cells..., 3, 3)
    nu_bar: np.ndarray # (cells..., embed)
    N: np.ndarray      # (cells..., embed, 3)


def cell_average(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Average of the 2^d corner values per cell."""
    offs = _corner_offsets(grid.dim)
    acc = sum(_corner_view(w, o, grid.cells) for o in offs)
    return acc / len(offs)


def cell_gradient(w: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell-center gradient (..., comp, 3) of a nodal field (..., comp).

    Column j holds the derivative along axis j; in 2D the third column is
    zero and the caller decides its convention.
    """
    comp = w.shape[grid.dim :]
    out = np.zeros(grid.cells + comp + (3,))
    offs = _corner_offsets(grid.dim)
    for axis in range(grid.dim):
        h = grid.spacing[axis]
        scale = 1.0 / (2 ** (grid.dim - 1) * h)
        acc = np.zeros(grid.cells + comp)
        for o in offs:
            sign = 1.0 if o[axis] == 1 else -1.0
            acc += sign * _corner_view(w, o, grid.cells)
        out[..., axis] = acc * scale
    return out


def gradients(state: FieldState) -> GradientField:
    """Assemble the cell-centered kinematic data for a state."""
    grid = state.grid
    F = cell_gradient(state.u, grid)
    N = cell_gradient(state.nu, grid)
    if grid.dim == 2:
        # frozen out-of-plane column
        F[..., :, 2] = 0.0
        F[..., 2, 2] = 1.0
        N[..., :, 2] = 0.0
    return GradientField(
        x=grid.cell_centers3(),
        u_bar=cell_average(state.u, grid),
        F=F,
        nu_bar=cell_average(state.nu, grid),
        N=N,
    )


def integrate_cells(values: np.ndarray, grid: Grid, active: np.ndarray | None = None) -> float:
    """Midpoint quadrature of a cell field over the active region."""
    values = np.asarray(values)
    if values.shape != grid.cells:
        raise ShapeMismatchError(f"cell field must be {grid.cells}, got {values.shape}")
    if active is None:
        return float(values.sum() * grid.cell_volume)
    return float(values[active].sum() * grid.cell_volume)


# ---------------------------------------------------------------------------
# adjoint scatter machinery: divergence, lumped volumes, energy gradients
# ---------------------------------------------------------------------------

def node_volumes(grid: Grid, active: np.ndarray | None = None) -> np.ndarray:
    """Lumped nodal volume: each active cell spreads vol/2^d to its corners."""
    if active is None:
        active = np.ones(grid.cells, dtype=bool)
    out = np.zeros(grid.nodes)
    share = grid.cell_volume / (2 ** grid.dim)
    contrib = np.where(active, share, 0.0)
    for o in _corner_offsets(grid.dim):
        sls = tuple(slice(s, s + c) for s, c in zip(o, grid.cells))
        out[sls] += contrib
    return out


def scatter_cell_average_adjoint(v: np.ndarray, grid: Grid, active: np.ndarray | None = None) -> np.ndarray:
    """Adjoint of cell_average weighted by cell volume: nodal accumulation of
    sum_cells vol * v[cell] * (d avg / d node)."""
    comp = v.shape[len(grid.cells) :]
    out = np.zeros(grid.nodes + comp)
    w = v * grid.cell_volume / (2 ** grid.dim)
    if active is not None:
        w = np.where(active[(...,) + (None,) * len(comp)], w, 0.0)
    for o in _corner_offsets(grid.dim):
        sls = tuple(slice(s, s + c) for s, c in zip(o, grid.cells))
        out[sls] += w
    return out


def scatter_gradient_adjoint(T: np.ndarray, grid: Grid, active: np.ndarray | None = None) -> np.ndarray:
    """Adjoint of cell_gradient weighted by cell volume.

    T has shape (cells..., comp..., 3); the result (nodes..., comp...) is
    sum_cells vol * T[cell] : (d cell_gradient / d node), the exact transpose
    of the forward stencil.
    """
    comp = T.shape[len(grid.cells) : -1]
    out = np.zeros(grid.nodes + comp)
    offs = _corner_offsets(grid.dim)
    for axis in range(grid.dim):
        h = grid.spacing[axis]
        w = T[..., axis] * (grid.cell_volume / (2 ** (grid.dim - 1) * h))
        if active is not None:
            w = np.where(active[(...,) + (None,) * len(comp)], w, 0.0)
        for o in offs:
            sign = 1.0 if o[axis] == 1 else -1.0
            sls = tuple(slice(s, s + c) for s, c in zip(o, grid.cells))
            out[sls] += sign * w
    return out


def divergence(T: np.ndarray, grid: Grid, active: np.ndarray | None = None) -> np.ndarray:
    """Nodal divergence of a cell tensor field (cells..., comp..., 3).

    Defined so that sum_cells T : Dh vol = -sum_nodes Div(T) . h vol_node for
    every nodal field h (summation by parts, exact).  Interior consistency is
    O(h^2); values on nodes touching the boundary of the active set absorb
    the flux terms and are not consistent pointwise.
    """
    vols = node_volumes(grid, active)
    raw = scatter_gradient_adjoint(T, grid, active)
    comp_axes = raw.ndim - len(grid.nodes)
    denom = vols[(...,) + (None,) * comp_axes]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(denom > 0, -raw / np.where(denom > 0, denom, 1.0), 0.0)
    return out


def cell_to_node_average(v: np.ndarray, grid: Grid, active: np.ndarray | None = None) -> np.ndarray:
    """Volume-weighted average of adjacent cell values at each node."""
    vols = node_volumes(grid, active)
    raw = scatter_cell_average_adjoint(v, grid, active)
    comp_axes = raw.ndim - len(grid.nodes)
    denom = vols[(...,) + (None,) * comp_axes]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, raw / np.where(denom > 0, denom, 1.0), 0.0)


# ---------------------------------------------------------------------------
# node classification and Dirichlet data
# ---------------------------------------------------------------------------

def incident_node_mask(grid: Grid, active: np.ndarray | None = None) -> np.ndarray:
    """Nodes touching at least one active cell."""
    if active is None:
        active = np.ones(grid.cells, dtype=bool)
    out = np.zeros(grid.nodes, dtype=bool)
    for o in _corner_offsets(grid.dim):
        sls = tuple(slice(s, s + c) for s, c in zip(o, grid.cells))
        out[sls] |= active
    return out


def interior_node_mask(grid: Grid, active: np.ndarray | None = None, margin: int = 1) -> np.ndarray:
    """Nodes whose full (2*margin)^d cell neighborhood is active and in range."""
    if active is None:
        active = np.ones(grid.cells, dtype=bool)
    m = margin
    padded = np.zeros(tuple(c + 2 * m for c in grid.cells), dtype=bool)
    core = tuple(slice(m, m + c) for c in grid.cells)
    padded[core] = active
    win = np.lib.stride_tricks.sliding_window_view(padded, (2 * m,) * grid.dim)
    return win.all(axis=tuple(range(-grid.dim, 0)))


def boundary_node_mask(grid: Grid, active: np.ndarray | None = None) -> np.ndarray:
    """Nodes carrying degrees of freedom that sit on the body boundary."""
    return incident_node_mask(grid, active) & ~interior_node_mask(grid, active, margin=1)


def apply_dirichlet(
    state: FieldState,
    which: str,
    region,
    values,
    manifold: Manifold | None = None,
) -> FieldState:
    """Pin boundary nodes selected by ``region`` to ``values``.

    region: vectorized predicate on node coordinates (nodes..., dim) -> bool.
    values: constant array or vectorized callable on coordinates.  Descriptor
    values are projected onto the manifold when one is passed.  Selecting a
    node interior to the active body raises InteriorNodeSelectedError.
    """
    if which not in ("u", "nu"):
        raise ShapeMismatchError(f"which must be 'u' or 'nu', got {which!r}")
    grid = state.grid
    coords = grid.node_coords()
    sel = np.asarray(region(coords), dtype=bool)
    if sel.shape != grid.nodes:
        raise ShapeMismatchError("region predicate must return a nodal bool mask")
    relevant = sel & incident_node_mask(grid, state.active)
    bad = relevant & interior_node_mask(grid, state.active, margin=1)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise InteriorNodeSelectedError(f"region selected interior node {idx}")
    if callable(values):
        vals = np.asarray(values(coords), dtype=float)
    else:
        vals = np.broadcast_to(np.asarray(values, dtype=float), coords.shape[:-1] + (np.shape(values)[-1],))
    target = state.u if which == "u" else state.nu
    if vals.shape != target.shape:
        raise ShapeMismatchError(f"values shaped {vals.shape}, field needs {target.shape}")
    if which == "nu" and manifold is not None:
        vals = manifold.project(vals)
    target[relevant] = vals[relevant]
    if which == "u":
        state.pinned_u |= relevant
    else:
        state.pinned_nu |= relevant
    return state


def ball_mask(grid: Grid, center: tuple[float, ...] | None = None, radius: float | None = None) -> np.ndarray:
    """Cells whose centers lie inside a ball; default: largest centered ball."""
    centers = grid.cell_centers()
    if center is None:
        center = tuple((l + h) / 2 for l, h in zip(grid.lo, grid.hi))
    if radius is None:
        radius = min((h - l) / 2 for l, h in zip(grid.lo, grid.hi))
    d2 = np.sum((centers - np.asarray(center)) ** 2, axis=-1)
    return d2 < radius**2
