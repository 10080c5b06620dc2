"""
Eigenbases of -c(x)Δ under Robin or Dirichlet conditions, orthonormal in
the weighted product ⟨f, g⟩ = ∫ f g c⁻¹ dx, and the boundary quantities that
connect the two bases.

Eigenpairs come from a dense symmetric solve of M^{-1/2} S M^{-1/2} and are
then polished by a few mixed-precision correction steps (residuals in long
double, corrections through a bordered float64 solve). The polish brings
eigenvectors from ~eps·‖S‖/gap accuracy down to roundoff, which matters when
inner products that vanish by symmetry are compared against tight floors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EigenSolverError, ProvenanceError
from .grid import DomainGrid, SpeedField
from .operator import BcFlavor, DiscreteOperator

CLUSTER_RTOL = 1e-6
# long double is plain double on some platforms; the polish then only
# reaches float64 residual levels
REFINE_RTOL = 1e-12 if np.finfo(np.longdouble).eps < 1e-18 else 1e-9


@dataclass(frozen=True, eq=False)
class EigenBasis:
    bc: BcFlavor
    lambda_sq: np.ndarray  # ascending, shape (K,)
    modes: np.ndarray  # (n_nodes, K), zero-extended for Dirichlet
    grid: DomainGrid = field(repr=False)
    speed: SpeedField = field(repr=False)

    @property
    def lam(self) -> np.ndarray:
        return np.sqrt(self.lambda_sq)

    @property
    def size(self) -> int:
        return self.modes.shape[1]

    @property
    def provenance(self) -> tuple:
        return (self.grid.fingerprint, self.speed.fingerprint)

    def mode(self, index: int) -> np.ndarray:
        """Mode by 1-based index, as in φ_1, φ_2, ..."""
        if not 1 <= index <= self.size:
            raise IndexError(f"mode index {index} outside 1..{self.size}")
        return self.modes[:, index - 1]

    def boundary_values(self) -> np.ndarray:
        return self.modes[self.grid.boundary.node_ids]

    def normal_derivatives(self) -> np.ndarray:
        return normal_derivative_trace(self.modes, self.grid)


# ---------------------------------------------------------------- eigensolve


def compute_basis(op: DiscreteOperator, num_modes: int, refine: bool = True) -> EigenBasis:
    """The ``num_modes`` smallest eigenpairs of the pencil (S, M)."""
    n = op.size
    if not 1 <= num_modes <= n:
        raise ValueError(f"num_modes must be in 1..{n}, got {num_modes}")
    scale = 1.0 / np.sqrt(op.mass)
    A = op.stiffness.toarray()
    A *= scale[:, None]
    A *= scale[None, :]

    count = min(n, num_modes + 4)
    while True:
        try:
            mu, Y = sla.eigh(A, subset_by_index=[0, count - 1], driver="evr")
        except (sla.LinAlgError, ValueError) as exc:
            raise EigenSolverError(f"dense eigensolve failed for modes 1..{count}: {exc}") from exc
        clusters = _clusters(mu)
        # a cluster cut by the subset boundary cannot be polished; widen
        if count < n and clusters[-1][0] < num_modes:
            count = min(n, count + 8)
            continue
        break

    V = Y * scale[:, None]
    if refine:
        mu, V = _polish(op, mu, V, clusters, keep=num_modes)
    mu, V = mu[:num_modes], V[:, :num_modes]
    for k in range(num_modes):
        if not mu[k] > 0.0:
            raise EigenSolverError(f"mode {k + 1} has non-positive eigenvalue {mu[k]!r}")

    full = op.extend(V)
    interior = op.grid.interior_ids
    for k in range(num_modes):
        col = full[interior, k]
        big = np.flatnonzero(np.abs(col) > 1e-8 * np.abs(col).max())
        if col[big[0]] < 0.0:
            full[:, k] = -full[:, k]
    full.setflags(write=False)
    mu.setflags(write=False)
    return EigenBasis(bc=op.bc, lambda_sq=mu, modes=full, grid=op.grid, speed=op.speed)


def _clusters(mu: np.ndarray) -> list:
    groups = [[0]]
    for i in range(1, len(mu)):
        if mu[i] - mu[i - 1] <= CLUSTER_RTOL * abs(mu[i]):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _polish(op, mu, V, clusters, keep, iters=4):
    LD = np.longdouble
    coo = op.stiffness.tocoo()
    rows, cols, vals = coo.row, coo.col, coo.data.astype(LD)
    mass_ld = op.mass.astype(LD)
    S = op.stiffness.tocsc()
    Mdiag = sp.diags(op.mass, format="csc")

    def matvec(X):
        Y = np.zeros_like(X)
        np.add.at(Y, rows, vals[:, None] * X[cols])
        return Y

    mu_out = mu.astype(float).copy()
    V_out = V.copy()
    for group in clusters:
        if group[0] >= keep:
            break
        Phi = V[:, group].astype(LD)
        for it in range(iters + 1):
            Phi = _m_orthonormalize(Phi, mass_ld)
            SPhi = matvec(Phi)
            if len(group) > 1:
                H = Phi.T @ SPhi
                _, Q = np.linalg.eigh(((H + H.T) / 2).astype(float))
                Phi = Phi @ Q.astype(LD)
                SPhi = matvec(Phi)
            lam = np.einsum("ij,ij->j", Phi, SPhi)
            MPhi = mass_ld[:, None] * Phi
            R = SPhi - MPhi * lam
            rel = np.sqrt((R * R).sum(0)) / (np.abs(lam) * np.sqrt((MPhi * MPhi).sum(0)))
            if rel.max() < 1e-15 or it == iters:
                break
            border = sp.csc_matrix(MPhi.astype(float))
            for c in range(len(group)):
                K = sp.bmat(
                    [[S - float(lam[c]) * Mdiag, border], [border.T, None]], format="csc"
                )
                rhs = np.concatenate([-R[:, c].astype(float), np.zeros(len(group))])
                try:
                    z = spla.spsolve(K, rhs)
                except RuntimeError as exc:
                    raise EigenSolverError(f"polish of mode {group[c] + 1} failed: {exc}") from exc
                Phi[:, c] += z[: op.size].astype(LD)
        if rel.max() > REFINE_RTOL:
            bad = group[int(np.argmax(rel))]
            raise EigenSolverError(
                f"mode {bad + 1} did not converge (relative residual {float(rel.max()):.2e})"
            )
        mu_out[group] = lam.astype(float)
        V_out[:, group] = Phi.astype(float)
    order = np.argsort(mu_out[:keep], kind="stable")
    return mu_out[order], V_out[:, order]


def _m_orthonormalize(Phi, mass):
    Phi = Phi.copy()
    for i in range(Phi.shape[1]):
        for j in range(i):
            Phi[:, i] -= np.sum(Phi[:, j] * mass * Phi[:, i]) * Phi[:, j]
        Phi[:, i] /= np.sqrt(np.sum(Phi[:, i] * mass * Phi[:, i]))
    return Phi


# ---------------------------------------------------------------- queries


def weighted_inner(f, g, grid: DomainGrid, speed: SpeedField):
    """Σ_i f_i g_i w_i / c_i. Column stacks give the full Gram block."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape[0] != grid.n_nodes or g.shape[0] != grid.n_nodes:
        raise ValueError(
            f"fields of length {f.shape[0]} and {g.shape[0]} on a grid of {grid.n_nodes} nodes"
        )
    w = grid.volume_weights / speed.values
    if f.ndim == 1 and g.ndim == 1:
        return float(np.dot(f * w, g))
    f2 = f.reshape(grid.n_nodes, -1)
    g2 = g.reshape(grid.n_nodes, -1)
    out = (f2 * w[:, None]).T @ g2
    if f.ndim == 1:
        return out[0]
    if g.ndim == 1:
        return out[:, 0]
    return out


def boundary_trace(phi, grid: DomainGrid) -> np.ndarray:
    return np.asarray(phi)[grid.boundary.node_ids]


def normal_derivative_trace(phi, grid: DomainGrid) -> np.ndarray:
    """One-sided second-order ∂_ν φ at each boundary node.

    Along the inward normal line b, b1, b2 with spacing h:
    ∂_ν φ(b) ≈ (3 φ_b − 4 φ_b1 + φ_b2) / (2h), exact for linear φ.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != grid.n_nodes:
        raise ValueError(f"field of length {phi.shape[0]} on a grid of {grid.n_nodes} nodes")
    if min(grid.shape) < 2:
        raise ValueError("need at least 3 nodes along every normal line")
    bd = grid.boundary
    h = bd.normal_spacing if phi.ndim == 1 else bd.normal_spacing[:, None]
    return (3.0 * phi[bd.node_ids] - 4.0 * phi[bd.inward[:, 0]] + phi[bd.inward[:, 1]]) / (2.0 * h)


def _check_pair(basis_r: EigenBasis, basis_d: EigenBasis) -> None:
    if basis_r.provenance != basis_d.provenance:
        raise ProvenanceError("bases were computed on different grids or speeds")
    if not basis_r.bc.is_robin or basis_d.bc.is_robin:
        raise ValueError("expected (Robin basis, Dirichlet basis)")


def cross_gram(basis_r: EigenBasis, basis_d: EigenBasis) -> np.ndarray:
    """G[l, k] = ⟨φ_l^R, φ_k^D⟩."""
    _check_pair(basis_r, basis_d)
    return np.atleast_2d(weighted_inner(basis_r.modes, basis_d.modes, basis_r.grid, basis_r.speed))


def boundary_pairing(basis_r: EigenBasis, basis_d: EigenBasis) -> np.ndarray:
    """P[l, k] = Σ_b σ_b φ_l^R(b) ∂_ν φ_k^D(b) (boundary side of the identity)."""
    _check_pair(basis_r, basis_d)
    sigma = basis_r.grid.boundary.surface_weights
    return (basis_r.boundary_values() * sigma[:, None]).T @ basis_d.normal_derivatives()


def lemma_residual(
    basis_r: EigenBasis, basis_d: EigenBasis, floor: float = 1e-8
) -> np.ndarray:
    """Relative mismatch of (λ_R² − λ_D²)⟨φ^R, φ^D⟩ against the boundary pairing.

    Entries that vanish on both sides (e.g. by symmetry) are measured against
    ``floor`` times the largest pairing entry instead of their own size.
    """
    volume = np.subtract.outer(basis_r.lambda_sq, basis_d.lambda_sq) * cross_gram(basis_r, basis_d)
    surface = boundary_pairing(basis_r, basis_d)
    denom = np.maximum(np.maximum(np.abs(volume), np.abs(surface)), floor * np.abs(surface).max())
    return np.abs(volume - surface) / denom


# ---------------------------------------------------------------- export


def export_basis(basis: EigenBasis, directory, stem: Optional[str] = None) -> Path:
    """Write ``<stem>.json`` plus ``<stem>_modes.csv`` (one mode per column)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or basis.bc.name
    modes_file = f"{stem}_modes.csv"
    np.savetxt(
        directory / modes_file,
        basis.modes,
        fmt="%.17g",
        delimiter=",",
        header=f"{basis.bc.name} modes, one column per mode, {basis.grid.n_nodes} nodes",
    )
    meta = {
        "bc": basis.bc.name,
        "lambdas": [float(v) for v in basis.lam],
        "lambda_sq": [float(v) for v in basis.lambda_sq],
        "modes_file": modes_file,
        "n_nodes": basis.grid.n_nodes,
        "grid": {
            "kind": basis.grid.kind,
            "extents": list(basis.grid.extents),
            "cells": list(basis.grid.shape),
        },
    }
    if basis.bc.is_robin:
        meta = {"bc": meta.pop("bc"), "alpha": basis.bc.alpha, **meta}
    path = directory / f"{stem}.json"
    path.write_text(json.dumps(meta, indent=2) + "\n")
    return path


def load_basis(path, grid: DomainGrid, speed: SpeedField) -> EigenBasis:
    path = Path(path)
    meta = json.loads(path.read_text())
    modes = np.loadtxt(path.parent / meta["modes_file"], delimiter=",", ndmin=2)
    if modes.shape[0] != grid.n_nodes:
        raise ProvenanceError(f"{path}: modes have {modes.shape[0]} rows, grid has {grid.n_nodes} nodes")
    bc = BcFlavor(meta.get("alpha")) if meta["bc"] == "robin" else BcFlavor(None)
    return EigenBasis(
        bc=bc, lambda_sq=np.asarray(meta["lambda_sq"]), modes=modes, grid=grid, speed=speed
    )
