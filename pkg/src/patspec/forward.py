"""
Wave-forward operators by spectral synthesis.

For f = Σ c_l φ_l with zero initial velocity the solution is
p(x, t) = Σ c_l φ_l(x) cos(λ_l t). The two measurement types are the
boundary trace of the Robin solution and the normal-derivative trace of
the Dirichlet solution, sampled on a uniform time grid.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .eigenbasis import EigenBasis, normal_derivative_trace, weighted_inner
from .errors import ConfigError, SpanError
from .grid import BoundaryDescriptor

log = logging.getLogger(__name__)

ROBIN_TRACE = "RobinTrace"
DIRICHLET_NORMAL_DERIV = "DirichletNormalDeriv"
SPAN_RTOL = 1e-6
MIN_SAMPLES_PER_PERIOD = 20


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError(f"n_steps must be an integer >= 2, got {self.n_steps!r}")
        # plain Python scalars keep reprs (CSV headers, JSON) numpy-free
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def duration(self) -> float:
        return self.dt * self.n_steps

    def max_resolved_frequency(self) -> float:
        return 2.0 * math.pi / (MIN_SAMPLES_PER_PERIOD * self.dt)

    def check_resolves(self, lam_max: float) -> None:
        if lam_max > self.max_resolved_frequency() * (1 + 1e-12):
            raise ValueError(
                f"dt={self.dt:.6g} gives fewer than {MIN_SAMPLES_PER_PERIOD} samples per period "
                f"of frequency {lam_max:.6g}"
            )

    @classmethod
    def covering(cls, lam_max: float, duration: float, samples_per_period: int = 40) -> "TimeGrid":
        """Uniform grid resolving ``lam_max`` and reaching at least ``duration``."""
        if samples_per_period < MIN_SAMPLES_PER_PERIOD:
            raise ValueError(f"samples_per_period must be >= {MIN_SAMPLES_PER_PERIOD}")
        dt = 2.0 * math.pi / (samples_per_period * lam_max)
        n = int(math.ceil(duration / dt))
        return cls(dt=dt, n_steps=n + n % 2)


@dataclass(frozen=True, eq=False)
class BoundaryData:
    kind: str
    values: np.ndarray  # (n_boundary, n_steps + 1)
    timegrid: TimeGrid
    boundary: BoundaryDescriptor = field(repr=False)
    provenance: tuple = ()
    lam_max: float = 0.0  # highest frequency present, when known

    def __post_init__(self):
        if self.kind not in (ROBIN_TRACE, DIRICHLET_NORMAL_DERIV):
            raise ValueError(f"unknown boundary data kind {self.kind!r}")
        if self.values.shape != (self.boundary.size, self.timegrid.n_steps + 1):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"({self.boundary.size}, {self.timegrid.n_steps + 1})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("boundary data contains non-finite values")


# ---------------------------------------------------------------- spectral ops


def expand(f, basis: EigenBasis) -> np.ndarray:
    """Coefficients ⟨f, φ_l⟩ for every mode of the basis."""
    f = np.asarray(f, dtype=float)
    if f.shape != (basis.grid.n_nodes,):
        raise ValueError(f"field of shape {f.shape} on a grid of {basis.grid.n_nodes} nodes")
    return np.asarray(weighted_inner(basis.modes, f, basis.grid, basis.speed))


def synthesize(coeffs, basis: EigenBasis) -> np.ndarray:
    """Σ_l c_l φ_l; fewer coefficients than modes are padded with zeros."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if coeffs.size > basis.size:
        raise ValueError(f"{coeffs.size} coefficients for a basis of {basis.size} modes")
    return basis.modes[:, : coeffs.size] @ coeffs


def span_coefficients(f, basis: EigenBasis, rtol: float = SPAN_RTOL) -> np.ndarray:
    """Expansion coefficients of f, rejecting f outside the basis span."""
    coeffs = expand(f, basis)
    norm = math.sqrt(max(weighted_inner(f, f, basis.grid, basis.speed), 0.0))
    if norm == 0.0:
        return coeffs
    resid = np.asarray(f, dtype=float) - synthesize(coeffs, basis)
    rel = math.sqrt(max(weighted_inner(resid, resid, basis.grid, basis.speed), 0.0)) / norm
    if rel > rtol:
        raise SpanError(
            f"initial function is not in the span of the {basis.size} {basis.bc.name} modes "
            f"(relative projection residual {rel:.3e} > {rtol:.0e})"
        )
    return coeffs


def _synthesize_boundary(traces, coeffs, lam, tg: TimeGrid) -> np.ndarray:
    active = np.flatnonzero(coeffs)
    amps = traces[:, active] * coeffs[active]
    if active.size == 0:
        return np.zeros((traces.shape[0], tg.n_steps + 1))
    return _kernels.cosine_synthesis(amps, lam[active], tg.dt, tg.n_steps)


def forward_robin(f, basis_r: EigenBasis, tg: TimeGrid) -> BoundaryData:
    """Boundary trace of W_R f on the time grid."""
    if not basis_r.bc.is_robin:
        raise ValueError("forward_robin needs a Robin basis")
    coeffs = span_coefficients(f, basis_r)
    lam_max = float(basis_r.lam[np.flatnonzero(coeffs)].max()) if np.any(coeffs) else 0.0
    tg.check_resolves(lam_max)
    values = _synthesize_boundary(basis_r.boundary_values(), coeffs, basis_r.lam, tg)
    return BoundaryData(
        ROBIN_TRACE, values, tg, basis_r.grid.boundary, basis_r.provenance, lam_max
    )


def forward_dirichlet(f, basis_d: EigenBasis, tg: TimeGrid) -> BoundaryData:
    """Normal-derivative trace of W_D f on the time grid."""
    if basis_d.bc.is_robin:
        raise ValueError("forward_dirichlet needs a Dirichlet basis")
    coeffs = span_coefficients(f, basis_d)
    lam_max = float(basis_d.lam[np.flatnonzero(coeffs)].max()) if np.any(coeffs) else 0.0
    tg.check_resolves(lam_max)
    values = _synthesize_boundary(basis_d.normal_derivatives(), coeffs, basis_d.lam, tg)
    return BoundaryData(
        DIRICHLET_NORMAL_DERIV, values, tg, basis_d.grid.boundary, basis_d.provenance, lam_max
    )


def interior_field(f, basis: EigenBasis, t: float) -> np.ndarray:
    """W f(·, t) on all nodes."""
    coeffs = span_coefficients(f, basis)
    return basis.modes @ (coeffs * np.cos(basis.lam * t))


# ---------------------------------------------------------------- CSV I/O


def write_boundary_csv(data: BoundaryData, path, grid=None) -> Path:
    """Write ``boundary_id, t, value`` rows plus a ``.json`` sidecar of node geometry."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tg = data.timegrid
    nb, nt = data.values.shape
    projected = nb * nt * 40
    if projected > 1 << 30:
        log.warning("boundary CSV projected at %.1f GB", projected / 2**30)
    ids = np.repeat(np.arange(nb), nt)
    t = np.tile(tg.times, nb)
    table = np.column_stack([ids, t, data.values.ravel()])
    header = (
        f"kind={data.kind}, dt={tg.dt!r}, n_steps={tg.n_steps}, n_boundary={nb}\n"
        "boundary_id,t,value"
    )
    np.savetxt(path, table, fmt=["%d", "%.17g", "%.17g"], delimiter=",", header=header)

    bd = data.boundary
    side = {
        "kind": data.kind,
        "dt": tg.dt,
        "n_steps": tg.n_steps,
        "lam_max": data.lam_max,
        "boundary": [
            {
                "boundary_id": b,
                "node_id": int(bd.node_ids[b]),
                "coords": [float(v) for v in grid.nodes[bd.node_ids[b]]] if grid is not None else None,
                "normal": [float(v) for v in bd.normals[b]],
                "surface_weight": float(bd.surface_weights[b]),
            }
            for b in range(nb)
        ],
    }
    path.with_suffix(".json").write_text(json.dumps(side, indent=1) + "\n")
    return path


def _parse_header(line: str) -> dict:
    out = {}
    for item in line.lstrip("#").split(","):
        key, eq, val = item.partition("=")
        if eq:
            out[key.strip()] = val.strip()
    return out


def read_boundary_csv(path, boundary: BoundaryDescriptor, provenance: tuple = ()) -> BoundaryData:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    meta = _parse_header(first)
    try:
        kind = meta["kind"]
        tg = TimeGrid(float(meta["dt"]), int(meta["n_steps"]))
        nb = int(meta["n_boundary"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed boundary-data header {first.strip()!r}") from exc
    if nb != boundary.size:
        raise ConfigError(f"{path}: {nb} boundary nodes, grid has {boundary.size}")
    table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    values = np.zeros((nb, tg.n_steps + 1))
    ids = table[:, 0].astype(int)
    steps = np.rint(table[:, 1] / tg.dt).astype(int)
    values[ids, steps] = table[:, 2]
    lam_max = 0.0
    side = path.with_suffix(".json")
    if side.exists():
        lam_max = float(json.loads(side.read_text()).get("lam_max", 0.0))
    return BoundaryData(kind, values, tg, boundary, provenance, lam_max)
