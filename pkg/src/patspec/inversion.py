"""
Coefficient recovery from boundary time series.

Robin-trace data g = W_R f|∂Ω gives the Dirichlet coefficients

    ⟨f, φ_k^D⟩ = -(1/λ_{D,k}) lim_{ε→0} ∫_0^∞ e^{-εt} sin(λ_{D,k} t) Σ_b σ_b g(b, t) ∂_ν φ_k^D(b) dt

and normal-derivative data h = ∂_ν W_D f|∂Ω gives the Robin coefficients

    ⟨f, φ_l^R⟩ = +(1/λ_{R,l}) lim_{ε→0} ∫_0^∞ e^{-εt} sin(λ_{R,l} t) Σ_b σ_b h(b, t) φ_l^R(b) dt.

For each ε the time integral is a composite Simpson sum truncated where
e^{-εt} drops below the tail cut; the limit is taken by extrapolating the
values I(ε_j) to ε = 0 in the variable ε². For data that is a finite sum of
cosines, I is a sum of simple poles in ε² (see ``bateman_kernel``), so the
default extrapolant is rational rather than polynomial.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .eigenbasis import EigenBasis, weighted_inner
from .errors import HorizonError, ProvenanceError
from .forward import DIRICHLET_NORMAL_DERIV, ROBIN_TRACE, BoundaryData, TimeGrid, span_coefficients
from .forward import synthesize

# prefactor signs of the two inversion formulas
ROBIN_DATA_SIGN = -1.0
DIRICHLET_DATA_SIGN = 1.0

RESONANCE_TOL = 1e-8
REL_ERR_FLOOR = 1e-12


@dataclass(frozen=True)
class DampingSchedule:
    eps_values: tuple = (0.4, 0.2, 0.1, 0.05)
    tail_cut: float = 1e-10
    extrapolation_degree: int = 3
    method: str = "rational"

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_values)
        object.__setattr__(self, "eps_values", eps)
        if len(eps) < 2:
            raise ValueError("damping schedule needs at least two eps values")
        if any(e <= 0.0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError(f"eps values must be positive and strictly decreasing: {eps}")
        if not 0.0 < self.tail_cut <= 1e-6:
            raise ValueError(f"tail_cut must lie in (0, 1e-6], got {self.tail_cut!r}")
        if not 0 <= self.extrapolation_degree <= len(eps) - 1:
            raise ValueError(
                f"extrapolation_degree must be in 0..{len(eps) - 1}, got {self.extrapolation_degree}"
            )
        if self.method not in ("rational", "polynomial"):
            raise ValueError(f"unknown extrapolation method {self.method!r}")

    def horizon(self, eps: float) -> float:
        """T(ε) = ln(1/δ)/ε, where the damping factor falls to the tail cut."""
        return math.log(1.0 / self.tail_cut) / eps

    @property
    def max_horizon(self) -> float:
        return self.horizon(self.eps_values[-1])

    def to_dict(self) -> dict:
        return {
            "eps_values": list(self.eps_values),
            "tail_cut": self.tail_cut,
            "extrapolation_degree": self.extrapolation_degree,
            "method": self.method,
        }


@dataclass(eq=False)
class CoefficientReport:
    target_bc: str
    lambdas: np.ndarray
    coeffs: np.ndarray
    eps_values: tuple
    per_eps: np.ndarray  # (K, J) raw damped integrals
    schedule: dict = field(default_factory=dict)
    reference: Optional[np.ndarray] = None
    rel_err: Optional[np.ndarray] = None

    def attach_reference(self, reference, floor: float = REL_ERR_FLOOR) -> "CoefficientReport":
        ref = np.asarray(reference, dtype=float)[: len(self.coeffs)]
        self.reference = ref
        self.rel_err = np.abs(self.coeffs - ref) / np.maximum(np.abs(ref), floor)
        return self

    def to_dict(self) -> dict:
        modes = []
        for k, (lam, c) in enumerate(zip(self.lambdas, self.coeffs)):
            entry = {
                "index": k + 1,
                "lambda": float(lam),
                "coeff": float(c),
                "per_eps": [[float(e), float(v)] for e, v in zip(self.eps_values, self.per_eps[k])],
            }
            if self.reference is not None:
                entry["ref"] = float(self.reference[k])
                entry["rel_err"] = float(self.rel_err[k])
            modes.append(entry)
        return {"target_bc": self.target_bc, "modes": modes, "schedule": self.schedule}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientReport":
        modes = d["modes"]
        eps = tuple(e for e, _ in modes[0]["per_eps"]) if modes else ()
        rep = cls(
            target_bc=d["target_bc"],
            lambdas=np.array([m["lambda"] for m in modes]),
            coeffs=np.array([m["coeff"] for m in modes]),
            eps_values=eps,
            per_eps=np.array([[v for _, v in m["per_eps"]] for m in modes]),
            schedule=d.get("schedule", {}),
        )
        if modes and "ref" in modes[0]:
            rep.reference = np.array([m["ref"] for m in modes])
            rep.rel_err = np.array([m["rel_err"] for m in modes])
        return rep


# ---------------------------------------------------------------- scalar pieces


def bateman_kernel(a, b, eps):
    """Closed form of ∫_0^∞ e^{-εt} sin(at) cos(bt) dt (vectorized)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0.0):
        raise ValueError("eps must be positive")
    s, d, e2 = a + b, a - b, eps * eps
    out = s / (2.0 * (e2 + s * s)) + d / (2.0 * (e2 + d * d))
    return float(out) if out.ndim == 0 else out


def bateman_limit(a, b):
    """ε → 0 limit of ``bateman_kernel``: a / (a² − b²) for a ≠ b, 1/(4a) at a = b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s, d = a + b, a - b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s != 0, 0.5 / np.where(s != 0, s, 1.0), 0.0) + np.where(
            d != 0, 0.5 / np.where(d != 0, d, 1.0), 0.0
        )
    return float(out) if out.ndim == 0 else out


def _interval_count(schedule_horizon: float, tg: TimeGrid, eps: float) -> int:
    m = int(math.ceil(schedule_horizon / tg.dt - 1e-9))
    m += m % 2
    if m > tg.n_steps:
        raise HorizonError(
            f"eps={eps:g} needs data up to t={schedule_horizon:.6g} "
            f"but the time grid ends at t={tg.duration:.6g}"
        )
    return m


def damped_time_integral(series, lam: float, eps: float, tg: TimeGrid, tail_cut: float = 1e-10) -> float:
    """Simpson value of ∫_0^{T(ε)} e^{-εt} g(t) sin(λt) dt with T(ε) = ln(1/δ)/ε."""
    series = np.asarray(series, dtype=float)
    if series.shape != (tg.n_steps + 1,):
        raise ValueError(f"series of shape {series.shape} on a grid of {tg.n_steps + 1} samples")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    tg.check_resolves(lam)
    m = _interval_count(math.log(1.0 / tail_cut) / eps, tg, eps)
    return float(_kernels.damped_sine_simpson(series[None, :], [lam], [eps], tg.dt, [m])[0, 0])


def _polynomial_at_zero(x, y, degree):
    V = np.vander(x / x.max(), degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    return float(coef[0])


def _rational_at_zero(x, y):
    """Value at 0 of the type [ν−1/ν] (or [ν/ν]) rational interpolant in x.

    Returns None when the fit is unusable: a denominator root inside
    [0, max x] cannot belong to I(ε), whose poles sit at x = −(a ± b)².
    """
    n = len(x)
    nu = n // 2
    mu = n - 1 - nu
    xs = x / x.max()
    A = np.hstack([np.vander(xs, mu + 1, increasing=True), -y[:, None] * np.vander(xs, nu + 1, increasing=True)[:, 1:]])
    scale = np.abs(A).max(axis=0)
    scale[scale == 0.0] = 1.0
    sol, *_ = np.linalg.lstsq(A / scale, y, rcond=None)
    sol = sol / scale
    q = np.r_[1.0, sol[mu + 1 :]]
    roots = np.roots(q[::-1]) if np.any(q[1:]) else np.array([])
    real = roots[np.abs(roots.imag) <= 1e-9 * np.maximum(1.0, np.abs(roots))].real
    if np.any((real >= 0.0) & (real <= 1.0)) or not np.isfinite(sol[0]):
        return None
    return float(sol[0])


def extrapolate_to_zero(pairs: Sequence, method: str = "rational", degree: Optional[int] = None) -> float:
    """Limit ε → 0 from samples (ε_j, I_j), extrapolating in the variable ε².

    ``method="rational"`` interpolates with numerator/denominator degrees
    (n/2 − 1, n/2) for even n, exact for one cosine against one sine.
    ``method="polynomial"`` fits a polynomial of ``degree`` (default n − 1).
    The rational fit falls back to the polynomial one if it develops a
    pole between the samples and zero.
    """
    pairs = [(float(e), float(v)) for e, v in pairs]
    if len(pairs) < 2:
        raise ValueError("need at least two (eps, value) pairs")
    eps = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    x = eps * eps
    if len(np.unique(x)) != len(x):
        raise ValueError("eps values must be distinct")
    if np.all(y == y[0]):
        return float(y[0])
    if degree is None:
        degree = len(x) - 1
    if method == "rational":
        value = _rational_at_zero(x, y)
        if value is not None:
            return value
    elif method != "polynomial":
        raise ValueError(f"unknown extrapolation method {method!r}")
    return _polynomial_at_zero(x, y, degree)


# ---------------------------------------------------------------- theorems


def _check_target(data: BoundaryData, basis: EigenBasis, kind: str, want_robin: bool) -> None:
    if data.kind != kind:
        raise ValueError(f"expected {kind} data, got {data.kind}")
    if basis.bc.is_robin != want_robin:
        raise ValueError(f"target basis must be {'Robin' if want_robin else 'Dirichlet'}")
    if data.provenance and data.provenance != basis.provenance:
        raise ProvenanceError("boundary data and target basis come from different grids/speeds")
    if data.values.shape[0] != basis.grid.boundary.size:
        raise ProvenanceError("boundary data does not match the basis boundary nodes")


def _invert(data, weights, lam, sign, sched: DampingSchedule, target_bc: str) -> CoefficientReport:
    tg = data.timegrid
    tg.check_resolves(max(float(lam.max()), data.lam_max))
    m = [_interval_count(sched.horizon(e), tg, e) for e in sched.eps_values]
    series = weights.T @ data.values  # (K, n_steps + 1)
    per_eps = _kernels.damped_sine_simpson(series, lam, sched.eps_values, tg.dt, m)
    limits = np.array(
        [
            extrapolate_to_zero(zip(sched.eps_values, row), sched.method, sched.extrapolation_degree)
            for row in per_eps
        ]
    )
    return CoefficientReport(
        target_bc=target_bc,
        lambdas=lam.copy(),
        coeffs=sign * limits / lam,
        eps_values=sched.eps_values,
        per_eps=per_eps,
        schedule=sched.to_dict(),
    )


def robin_to_dirichlet_coeffs(
    data: BoundaryData,
    basis_d: EigenBasis,
    sched: DampingSchedule = DampingSchedule(),
    k_max: Optional[int] = None,
) -> CoefficientReport:
    """⟨f, φ_k^D⟩, k = 1..k_max, from the Robin boundary trace of W_R f."""
    _check_target(data, basis_d, ROBIN_TRACE, want_robin=False)
    K = basis_d.size if k_max is None else min(k_max, basis_d.size)
    sigma = basis_d.grid.boundary.surface_weights
    weights = sigma[:, None] * basis_d.normal_derivatives()[:, :K]
    return _invert(data, weights, basis_d.lam[:K], ROBIN_DATA_SIGN, sched, "dirichlet")


def dirichlet_to_robin_coeffs(
    data: BoundaryData,
    basis_r: EigenBasis,
    sched: DampingSchedule = DampingSchedule(),
    k_max: Optional[int] = None,
) -> CoefficientReport:
    """⟨f, φ_l^R⟩, l = 1..k_max, from the normal-derivative trace of W_D f."""
    _check_target(data, basis_r, DIRICHLET_NORMAL_DERIV, want_robin=True)
    K = basis_r.size if k_max is None else min(k_max, basis_r.size)
    sigma = basis_r.grid.boundary.surface_weights
    weights = sigma[:, None] * basis_r.boundary_values()[:, :K]
    return _invert(data, weights, basis_r.lam[:K], DIRICHLET_DATA_SIGN, sched, "robin")


@dataclass(frozen=True, eq=False)
class ModalComponent:
    """One cosine in synthetic boundary data: coeff * trace(b) * cos(lam t)."""

    coeff: float
    lam: float
    trace: np.ndarray
    phi: Optional[np.ndarray] = None


def modal_components(f, basis: EigenBasis) -> list:
    """Modal decomposition of the boundary data that ``f`` generates."""
    coeffs = span_coefficients(f, basis)
    traces = basis.boundary_values() if basis.bc.is_robin else basis.normal_derivatives()
    return [
        ModalComponent(float(c), float(basis.lam[i]), traces[:, i], basis.modes[:, i])
        for i, c in enumerate(coeffs)
        if c != 0.0
    ]


def analytic_limit_oracle(modal_data: Sequence[ModalComponent], target: EigenBasis, k_max: Optional[int] = None) -> np.ndarray:
    """Coefficients from the exact ε → 0 limit, with no time quadrature.

    Each cosine of frequency λ_s against target mode frequency λ_t contributes
    c_s · Σ_b σ_b trace_s(b) w_t(b) / (λ_R² − λ_D²), where w_t is ∂_ν φ^D for a
    Dirichlet target and φ^R for a Robin target. Near-resonant pairs use the
    inner product of the stored source mode instead of the quotient.
    """
    K = target.size if k_max is None else min(k_max, target.size)
    sigma = target.grid.boundary.surface_weights
    w = (target.boundary_values() if target.bc.is_robin else target.normal_derivatives())[:, :K]
    lam_t = target.lam[:K]
    out = np.zeros(K)
    for comp in modal_data:
        pairing = (sigma * comp.trace) @ w
        if target.bc.is_robin:
            gap = lam_t**2 - comp.lam**2
        else:
            gap = comp.lam**2 - lam_t**2
        near = np.abs(gap) < RESONANCE_TOL
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = np.where(near, 0.0, pairing / np.where(near, 1.0, gap))
        if np.any(near):
            if comp.phi is None:
                raise ValueError("near-resonant mode pair and no source mode to fall back on")
            idx = np.flatnonzero(near)
            direct = weighted_inner(target.modes[:, idx], comp.phi, target.grid, target.speed)
            contrib[idx] = np.atleast_1d(direct)
        out += comp.coeff * contrib
    return out


def reconstruct(report: CoefficientReport, basis: EigenBasis) -> np.ndarray:
    """Σ_k coeff_k φ_k over the basis the report targets."""
    if report.target_bc != basis.bc.name:
        raise ValueError(f"report targets the {report.target_bc} basis, got a {basis.bc.name} basis")
    if len(report.coeffs) > basis.size:
        raise ValueError("report has more coefficients than the basis has modes")
    return synthesize(report.coeffs, basis)
