"""
Discrete realization of -c(x)Δ as the symmetric pencil (S, M).

S is the piecewise-linear stiffness of the bilinear form
``∫ ∇u·∇v dx (+ 1/α ∫_∂Ω u v dσ for Robin)``; M is the lumped mass of the
weighted product ``∫ u v c⁻¹ dx``. The speed only enters through M.
Dirichlet conditions are imposed by eliminating boundary nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IllConditionedError, ProvenanceError
from .grid import DomainGrid, SpeedField

COND_LIMIT = 1e14


@dataclass(frozen=True)
class BcFlavor:
    """Robin(alpha) when ``alpha`` is set, Dirichlet when it is None."""

    alpha: Optional[float] = None

    def __post_init__(self):
        if self.alpha is not None:
            a = float(self.alpha)
            if not np.isfinite(a) or a <= 0.0:
                raise ValueError(f"Robin alpha must be > 0, got {self.alpha!r}")
            object.__setattr__(self, "alpha", a)

    @property
    def is_robin(self) -> bool:
        return self.alpha is not None

    @property
    def name(self) -> str:
        return "robin" if self.is_robin else "dirichlet"

    def __str__(self) -> str:
        return f"Robin(alpha={self.alpha:g})" if self.is_robin else "Dirichlet"


def Robin(alpha: float) -> BcFlavor:
    return BcFlavor(alpha)


DIRICHLET = BcFlavor(None)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    stiffness: sp.csr_matrix  # on the active set
    mass: np.ndarray  # diagonal of M on the active set
    bc: BcFlavor
    active: np.ndarray  # node ids carrying unknowns
    grid: DomainGrid = field(repr=False)
    speed: SpeedField = field(repr=False)
    _factor: object = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.active)

    @property
    def provenance(self) -> tuple:
        return (self.grid.fingerprint, self.speed.fingerprint)

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[self.active]

    def extend(self, active_values: np.ndarray) -> np.ndarray:
        """Zero-extend an active-set vector (or column stack) to all nodes."""
        active_values = np.asarray(active_values)
        out = np.zeros((self.grid.n_nodes,) + active_values.shape[1:], dtype=active_values.dtype)
        out[self.active] = active_values
        return out


def _stiffness_1d(n_cells: int, h: float) -> sp.csr_matrix:
    main = np.full(n_cells + 1, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(n_cells, -1.0 / h)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def full_stiffness(grid: DomainGrid, alpha: Optional[float]) -> sp.csr_matrix:
    """Stiffness on all nodes, with the Robin boundary term when alpha is set."""
    if grid.dim == 1:
        S = _stiffness_1d(grid.shape[0], grid.spacing[0])
    else:
        nx, ny = grid.shape
        hx, hy = grid.spacing
        wx = sp.diags(np.full(nx + 1, hx) * np.r_[0.5, np.ones(nx - 1), 0.5])
        wy = sp.diags(np.full(ny + 1, hy) * np.r_[0.5, np.ones(ny - 1), 0.5])
        # x-fastest ordering: kron(A_y, B_x)
        S = sp.kron(wy, _stiffness_1d(nx, hx)) + sp.kron(_stiffness_1d(ny, hy), wx)
        S = S.tocsr()
    if alpha is not None:
        robin = np.zeros(grid.n_nodes)
        robin[grid.boundary.node_ids] = grid.boundary.surface_weights / alpha
        S = (S + sp.diags(robin)).tocsr()
    return S


def assemble(grid: DomainGrid, speed: SpeedField, bc: BcFlavor) -> DiscreteOperator:
    """Assemble the pencil (S, M) for the given boundary condition."""
    if speed.values.shape != (grid.n_nodes,) or speed.grid_fingerprint != grid.fingerprint:
        raise ProvenanceError(
            f"speed ({speed.values.size} values) was not sampled on this grid "
            f"({grid.n_nodes} nodes)"
        )
    S = full_stiffness(grid, bc.alpha)
    mass = grid.volume_weights / speed.values
    if bc.is_robin:
        active = np.arange(grid.n_nodes)
    else:
        active = grid.interior_ids
        S = S[active][:, active].tocsr()
        mass = mass[active]
    S.sort_indices()
    factor = _factorize(S)
    return DiscreteOperator(
        stiffness=S, mass=mass, bc=bc, active=active, grid=grid, speed=speed, _factor=factor
    )


def _factorize(S: sp.csr_matrix):
    try:
        lu = spla.splu(S.tocsc(), permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
    except RuntimeError as exc:  # exactly singular
        raise IllConditionedError(f"stiffness factorization failed: {exc}") from exc
    solve_op = spla.LinearOperator(S.shape, matvec=lu.solve, rmatvec=lu.solve, dtype=float)
    cond = spla.norm(S, 1) * spla.onenormest(solve_op)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(f"stiffness condition estimate {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return lu


def _check_dim(op: DiscreteOperator, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != op.size:
        raise ValueError(f"vector has length {v.shape[0]}, operator active set has {op.size}")
    return v


def apply(op: DiscreteOperator, values: np.ndarray) -> np.ndarray:
    """Discrete -cΔ on the active set: M⁻¹ S v."""
    v = _check_dim(op, values)
    Sv = op.stiffness @ v
    return Sv / op.mass if v.ndim == 1 else Sv / op.mass[:, None]


def solve_elliptic(op: DiscreteOperator, f: np.ndarray) -> np.ndarray:
    """The solution operator T: solve S u = M f."""
    f = _check_dim(op, f)
    rhs = op.mass * f if f.ndim == 1 else op.mass[:, None] * f
    u = op._factor.solve(rhs)
    res = np.linalg.norm(op.stiffness @ u - rhs)
    scale = np.linalg.norm(rhs)
    if res > 1e-10 * scale:
        # one step of iterative refinement before giving up
        u = u + op._factor.solve(rhs - op.stiffness @ u)
        res = np.linalg.norm(op.stiffness @ u - rhs)
        if res > 1e-10 * scale:
            raise IllConditionedError(f"elliptic residual {res:.3e} exceeds 1e-10 * {scale:.3e}")
    return u


def mass_inner(op: DiscreteOperator, u: np.ndarray, v: np.ndarray) -> float:
    """⟨u, v⟩_M on the active set."""
    return float(np.dot(u * op.mass, v))
