"""Orchestration behind the CLI: build the problem, run the stages, write files."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig
from .eigenbasis import EigenBasis, compute_basis, export_basis, weighted_inner
from .errors import ConfigError, PatspecError
from .forward import (
    BoundaryData,
    TimeGrid,
    expand,
    forward_dirichlet,
    forward_robin,
    read_boundary_csv,
    synthesize,
    write_boundary_csv,
)
from .grid import INTERVAL, DomainGrid, SpeedField, build_interval, build_rectangle, sample_speed
from .inversion import (
    CoefficientReport,
    dirichlet_to_robin_coeffs,
    reconstruct,
    robin_to_dirichlet_coeffs,
)
from .operator import DIRICHLET, Robin, assemble

log = logging.getLogger(__name__)

ROBIN_DATA_FILE = "robin_trace.csv"
DIRICHLET_DATA_FILE = "dirichlet_normal_deriv.csv"


class StageError(PatspecError):
    """A pipeline stage failed; ``stage`` names it for the exit message."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage={stage}: {cause}")
        self.stage = stage
        self.cause = cause


class ToleranceExceeded(PatspecError):
    pass


class _stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None or isinstance(exc, (StageError, ConfigError)):
            return False
        if isinstance(exc, Exception):
            raise StageError(self.name, exc) from exc
        return False


@dataclass
class Problem:
    config: RunConfig
    grid: DomainGrid
    speed: SpeedField
    robin: EigenBasis
    dirichlet: EigenBasis

    def timegrid(self) -> TimeGrid:
        cfg = self.config
        lam_max = max(self.robin.lam.max(), self.dirichlet.lam.max())
        horizon = cfg.schedule.max_horizon
        if cfg.dt is not None:
            n = cfg.n_steps if cfg.n_steps is not None else int(math.ceil(horizon / cfg.dt))
            tg = TimeGrid(cfg.dt, n + n % 2)
        else:
            tg = TimeGrid.covering(lam_max, horizon, cfg.samples_per_period)
            if cfg.n_steps is not None:
                tg = TimeGrid(tg.dt, cfg.n_steps)
        projected = self.grid.boundary.size * (tg.n_steps + 1) * 8
        if projected > 1 << 30:
            log.warning("boundary data projected at %.1f GB", projected / 2**30)
        return tg


def build_grid(cfg: RunConfig) -> DomainGrid:
    try:
        if cfg.kind == INTERVAL:
            return build_interval(cfg.extents[0], cfg.cells[0])
        return build_rectangle(cfg.extents[0], cfg.extents[1], cfg.cells[0], cfg.cells[1])
    except ValueError as exc:
        raise ConfigError(f"[domain] {exc}") from exc


def build_problem(cfg: RunConfig, num_modes: Optional[int] = None) -> Problem:
    grid = build_grid(cfg)
    try:
        speed = sample_speed(grid, cfg.speed)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"[speed] speed = {cfg.speed!r}: {exc}") from exc
    n = num_modes or cfg.num_modes
    with _stage("eigen"):
        robin = compute_basis(assemble(grid, speed, Robin(cfg.alpha)), n)
        dirichlet = compute_basis(assemble(grid, speed, DIRICHLET), n)
    return Problem(cfg, grid, speed, robin, dirichlet)


def phantom(items, basis: EigenBasis) -> np.ndarray:
    """Σ amplitude · φ_index over 1-based (index, amplitude) pairs."""
    f = np.zeros(basis.grid.n_nodes)
    for idx, amp in items:
        f = f + amp * basis.mode(idx)
    return f


def relative_l2_error(f_true, f_rec, grid: DomainGrid, speed: SpeedField) -> float:
    """‖f_true − f_rec‖ / ‖f_true‖ in L²(Ω, c⁻¹dx); absolute ‖f_rec‖ if f_true = 0."""
    f_true = np.asarray(f_true, dtype=float)
    f_rec = np.asarray(f_rec, dtype=float)
    if f_true.shape != f_rec.shape:
        raise ValueError(f"shape mismatch {f_true.shape} vs {f_rec.shape}")
    diff = f_true - f_rec
    num = math.sqrt(max(weighted_inner(diff, diff, grid, speed), 0.0))
    den = math.sqrt(max(weighted_inner(f_true, f_true, grid, speed), 0.0))
    if den == 0.0:
        return math.sqrt(max(weighted_inner(f_rec, f_rec, grid, speed), 0.0))
    return num / den


def _fmt9(v: float) -> str:
    return f"{v:.9g}"


def print_lambda_table(basis: EigenBasis, echo=print) -> None:
    echo(f"{basis.bc} eigenvalues")
    echo(f"{'mode':>5}  {'lambda':>16}  {'lambda^2':>16}")
    for k, (lam, lsq) in enumerate(zip(basis.lam, basis.lambda_sq), start=1):
        echo(f"{k:>5}  {_fmt9(lam):>16}  {_fmt9(lsq):>16}")


# ---------------------------------------------------------------- subcommands


def run_eigen(cfg: RunConfig, echo=print) -> dict:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prob = build_problem(cfg)
    paths = {}
    for basis in (prob.robin, prob.dirichlet):
        paths[basis.bc.name] = export_basis(basis, out)
        print_lambda_table(basis, echo)
    return paths


def _theorems(which: str) -> tuple:
    return ("4", "5") if which == "both" else (which,)


def _phantom_problem(cfg: RunConfig, theorems) -> tuple:
    """Problem with the configured bases, plus phantoms built on a basis wide
    enough to hold every requested mode (so out-of-range phantoms reach the
    forward span check instead of failing here)."""
    prob = build_problem(cfg)
    need = max(
        [i for i, _ in cfg.phantom_robin] * ("4" in theorems)
        + [i for i, _ in cfg.phantom_dirichlet] * ("5" in theorems)
        + [0]
    )
    phantoms = {}
    wide = prob
    if need > cfg.num_modes:
        if need > prob.grid.interior_ids.size:
            raise ConfigError(f"[phantom] mode index {need} exceeds the number of grid modes")
        wide = build_problem(cfg, num_modes=need)
    if "4" in theorems:
        phantoms["4"] = phantom(cfg.phantom_robin, wide.robin)
    if "5" in theorems:
        phantoms["5"] = phantom(cfg.phantom_dirichlet, wide.dirichlet)
    return prob, phantoms


def _forward(prob: Problem, theorem: str, f, tg: TimeGrid) -> BoundaryData:
    with _stage("forward"):
        if theorem == "4":
            return forward_robin(f, prob.robin, tg)
        return forward_dirichlet(f, prob.dirichlet, tg)


def run_forward(cfg: RunConfig, theorem: Optional[str] = None, echo=print) -> dict:
    out = Path(cfg.out_dir)
    theorems = _theorems(theorem or cfg.theorem)
    prob, phantoms = _phantom_problem(cfg, theorems)
    tg = prob.timegrid()
    paths = {}
    for th in theorems:
        data = _forward(prob, th, phantoms[th], tg)
        name = ROBIN_DATA_FILE if th == "4" else DIRICHLET_DATA_FILE
        with _stage("write"):
            paths[th] = write_boundary_csv(data, out / name, prob.grid)
        echo(f"wrote {paths[th]} ({data.kind}, {tg.n_steps + 1} samples, dt={_fmt9(tg.dt)})")
    return paths


def _invert(prob: Problem, theorem: str, data: BoundaryData) -> tuple:
    cfg = prob.config
    with _stage("invert"):
        if theorem == "4":
            report = robin_to_dirichlet_coeffs(data, prob.dirichlet, cfg.schedule, cfg.k_max)
            target = prob.dirichlet
        else:
            report = dirichlet_to_robin_coeffs(data, prob.robin, cfg.schedule, cfg.k_max)
            target = prob.robin
    with _stage("reconstruct"):
        f_rec = reconstruct(report, target)
    return report, target, f_rec


def _write_reconstruction(path: Path, grid: DomainGrid, f_true, f_rec) -> None:
    coords = grid.nodes
    cols = ["node"] + (["x"] if grid.dim == 1 else ["x", "y"]) + ["f_true", "f_rec"]
    if f_true is None:
        f_true = np.full(grid.n_nodes, np.nan)
    table = np.column_stack([np.arange(grid.n_nodes), coords, f_true, f_rec])
    fmt = ["%d"] + ["%.17g"] * (table.shape[1] - 1)
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=",".join(cols), comments="")


def _outputs(cfg: RunConfig, theorem: str, prob: Problem, report, f_true, f_rec, echo) -> Optional[float]:
    out = Path(cfg.out_dir)
    tag = f"theorem{theorem}"
    report.write(out / f"{tag}_report.json")
    _write_reconstruction(out / f"{tag}_reconstruction.csv", prob.grid, f_true, f_rec)
    if f_true is None:
        return None
    err = relative_l2_error(f_true, f_rec, prob.grid, prob.speed)
    echo(f"{tag} rel_l2_error={err:.9g}")
    return err


def run_invert(cfg: RunConfig, data_paths: Optional[dict] = None, theorem: Optional[str] = None, echo=print) -> dict:
    """Invert boundary-data CSVs (written by ``run_forward``) from the output directory."""
    out = Path(cfg.out_dir)
    theorems = _theorems(theorem or cfg.theorem)
    prob, phantoms = _phantom_problem(cfg, theorems)
    errors = {}
    for th in theorems:
        default = out / (ROBIN_DATA_FILE if th == "4" else DIRICHLET_DATA_FILE)
        path = Path((data_paths or {}).get(th, default))
        with _stage("read"):
            source = prob.robin if th == "4" else prob.dirichlet
            data = read_boundary_csv(path, prob.grid.boundary, source.provenance)
        report, target, f_rec = _invert(prob, th, data)
        f_true = phantoms[th]
        report.attach_reference(expand(f_true, target)[: len(report.coeffs)])
        errors[th] = _outputs(cfg, th, prob, report, f_true, f_rec, echo)
    return errors


def run_roundtrip(cfg: RunConfig, theorem: Optional[str] = None, max_error: Optional[float] = None, echo=print) -> dict:
    """forward -> invert -> reconstruct; raises ToleranceExceeded past ``max_error``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    theorems = _theorems(theorem or cfg.theorem)
    threshold = cfg.max_error if max_error is None else max_error
    prob, phantoms = _phantom_problem(cfg, theorems)
    tg = prob.timegrid()
    errors = {}
    for th in theorems:
        f_true = phantoms[th]
        data = _forward(prob, th, f_true, tg)
        with _stage("write"):
            write_boundary_csv(data, out / (ROBIN_DATA_FILE if th == "4" else DIRICHLET_DATA_FILE), prob.grid)
        report, target, f_rec = _invert(prob, th, data)
        report.attach_reference(expand(f_true, target)[: len(report.coeffs)])
        errors[th] = _outputs(cfg, th, prob, report, f_true, f_rec, echo)
    worst = max(errors.values())
    echo(f"rel_l2_error={worst:.9g}")
    if not worst <= threshold:
        raise ToleranceExceeded(f"rel_l2_error={worst:.9g} exceeds max_error={threshold:g}")
    return errors
