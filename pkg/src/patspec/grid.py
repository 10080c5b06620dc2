"""
Uniform grids on an interval or an axis-aligned rectangle, their boundary
descriptors, and nodal sampling of the variable speed coefficient c(x).

Node ordering for rectangles is x-fastest: node id = i + j * (nx + 1).
Quadrature is trapezoid everywhere (volume and boundary).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

MIN_CELLS = 8

INTERVAL = "interval"
RECTANGLE = "rectangle"


@dataclass(frozen=True, eq=False)
class BoundaryDescriptor:
    """Boundary nodes with outward normals and trapezoid surface weights.

    ``inward`` holds, per boundary node, the ids of the first and second
    nodes along the inward normal line; ``normal_spacing`` is the mesh
    width along that line. Both feed the one-sided normal derivative.
    """

    node_ids: np.ndarray
    normals: np.ndarray
    surface_weights: np.ndarray
    inward: np.ndarray
    normal_spacing: np.ndarray

    @property
    def size(self) -> int:
        return len(self.node_ids)

    @property
    def measure(self) -> float:
        return float(self.surface_weights.sum())


@dataclass(frozen=True, eq=False)
class DomainGrid:
    kind: str
    extents: tuple
    shape: tuple  # cells per axis
    nodes: np.ndarray  # (n_nodes, dim)
    spacing: tuple
    volume_weights: np.ndarray
    boundary: BoundaryDescriptor
    fingerprint: str = field(default="", repr=False)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    @property
    def interior_ids(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary.node_ids] = False
        return np.flatnonzero(mask)

    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary.node_ids] = True
        return mask


def _fingerprint(*parts) -> str:
    h = hashlib.sha1()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p).tobytes())
        else:
            h.update(repr(p).encode())
    return h.hexdigest()[:16]


def _trapezoid_weights(n_cells: int, h: float) -> np.ndarray:
    w = np.full(n_cells + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _check_extent(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite length, got {value!r}")
    return value


def _check_cells(name: str, value: int) -> int:
    if int(value) != value or value < MIN_CELLS:
        raise ValueError(
            f"{name} must be an integer >= {MIN_CELLS} (grid too coarse for "
            f"second-order stencils), got {value!r}"
        )
    return int(value)


def build_interval(length: float, n_cells: int) -> DomainGrid:
    """Uniform grid on [0, length] with ``n_cells + 1`` nodes."""
    length = _check_extent("length", length)
    n_cells = _check_cells("n_cells", n_cells)
    h = length / n_cells
    x = np.linspace(0.0, length, n_cells + 1)
    boundary = BoundaryDescriptor(
        node_ids=np.array([0, n_cells]),
        normals=np.array([[-1.0], [1.0]]),
        surface_weights=np.array([1.0, 1.0]),
        inward=np.array([[1, 2], [n_cells - 1, n_cells - 2]]),
        normal_spacing=np.array([h, h]),
    )
    return DomainGrid(
        kind=INTERVAL,
        extents=(length,),
        shape=(n_cells,),
        nodes=x[:, None],
        spacing=(h,),
        volume_weights=_trapezoid_weights(n_cells, h),
        boundary=boundary,
        fingerprint=_fingerprint(INTERVAL, length, n_cells),
    )


def build_rectangle(
    lx: float, ly: float, nx: int, ny: int, corner_normal: str = "x"
) -> DomainGrid:
    """Tensor grid on [0, lx] x [0, ly].

    Corner nodes are listed once, carry surface weight hx/2 + hy/2 and take
    the normal of the x-facing edge (``corner_normal="y"`` switches to the
    y-facing edge; used to check that the choice is immaterial).
    """
    lx = _check_extent("lx", lx)
    ly = _check_extent("ly", ly)
    nx = _check_cells("nx", nx)
    ny = _check_cells("ny", ny)
    if corner_normal not in ("x", "y"):
        raise ValueError("corner_normal must be 'x' or 'y'")
    hx, hy = lx / nx, ly / ny
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # shape (ny+1, nx+1): row j, column i
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    wx = _trapezoid_weights(nx, hx)
    wy = _trapezoid_weights(ny, hy)
    volume_weights = np.outer(wy, wx).ravel()

    def nid(i, j):
        return i + j * (nx + 1)

    ids, normals, sw, inward, spacing = [], [], [], [], []
    for j in range(ny + 1):
        for i in range(nx + 1):
            on_x = i in (0, nx)
            on_y = j in (0, ny)
            if not (on_x or on_y):
                continue
            weight = 0.0
            if on_x:
                weight += 0.5 * hy if on_y else hy
            if on_y:
                weight += 0.5 * hx if on_x else hx
            use_x = on_x and (not on_y or corner_normal == "x")
            if use_x:
                s = -1 if i == 0 else 1
                normals.append((float(s), 0.0))
                inward.append((nid(i - s, j), nid(i - 2 * s, j)))
                spacing.append(hx)
            else:
                s = -1 if j == 0 else 1
                normals.append((0.0, float(s)))
                inward.append((nid(i, j - s), nid(i, j - 2 * s)))
                spacing.append(hy)
            ids.append(nid(i, j))
            sw.append(weight)

    boundary = BoundaryDescriptor(
        node_ids=np.array(ids),
        normals=np.array(normals),
        surface_weights=np.array(sw),
        inward=np.array(inward),
        normal_spacing=np.array(spacing),
    )
    return DomainGrid(
        kind=RECTANGLE,
        extents=(lx, ly),
        shape=(nx, ny),
        nodes=nodes,
        spacing=(hx, hy),
        volume_weights=volume_weights,
        boundary=boundary,
        fingerprint=_fingerprint(RECTANGLE, lx, ly, nx, ny, corner_normal),
    )


# --------------------------------------------------------------------------
# speed field
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpeedField:
    values: np.ndarray
    c_min: float
    c_max: float
    fingerprint: str = field(default="", repr=False)
    grid_fingerprint: str = field(default="", repr=False)


@dataclass(frozen=True)
class SpeedSpec:
    """Parsed form of a speed description.

    kind is one of ``constant`` (params: value), ``sine`` (params: amp, base),
    ``file`` (params: path) or ``values`` (explicit nodal list).
    """

    kind: str
    params: tuple = ()
    values: tuple = ()

    def param(self, name: str, default=None):
        return dict(self.params).get(name, default)

    def to_text(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.param('value')!r}"
        if self.kind == "sine":
            return f"sine:amp={self.param('amp')!r},base={self.param('base')!r}"
        if self.kind == "file":
            return f"file:{self.param('path')}"
        raise ValueError("explicit nodal values have no text form")


def parse_speed_spec(text: str) -> SpeedSpec:
    """Parse ``constant:1.0``, ``sine:amp=0.5,base=1.0`` or ``file:<path>``."""
    text = text.strip().strip('"').strip("'")
    head, sep, rest = text.partition(":")
    head = head.strip().lower()
    if not sep:
        raise ValueError(f"speed spec {text!r} lacks a '<kind>:' prefix")
    if head == "constant":
        return SpeedSpec("constant", (("value", float(rest)),))
    if head == "sine":
        params = {"amp": 0.0, "base": 1.0}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, val = item.partition("=")
            key = key.strip()
            if not eq or key not in params:
                raise ValueError(f"bad sine parameter {item!r}; expected amp=, base=")
            params[key] = float(val)
        return SpeedSpec("sine", (("amp", params["amp"]), ("base", params["base"])))
    if head == "file":
        if not rest.strip():
            raise ValueError("file speed spec needs a path")
        return SpeedSpec("file", (("path", rest.strip()),))
    raise ValueError(f"unknown speed kind {head!r}")


SpeedLike = Union[SpeedSpec, str, float, Sequence[float], np.ndarray]


def _evaluate_spec(grid: DomainGrid, spec: SpeedSpec) -> np.ndarray:
    if spec.kind == "constant":
        return np.full(grid.n_nodes, float(spec.param("value")))
    if spec.kind == "sine":
        # base + amp * prod_d sin(pi x_d / L_d): vanishes-to-base on the boundary
        prof = np.ones(grid.n_nodes)
        for d, L in enumerate(grid.extents):
            prof *= np.sin(np.pi * grid.nodes[:, d] / L)
        return spec.param("base") + spec.param("amp") * prof
    if spec.kind == "file":
        vals = np.loadtxt(Path(spec.param("path")), ndmin=1, dtype=float)
        return vals
    if spec.kind == "values":
        return np.asarray(spec.values, dtype=float)
    raise ValueError(f"unknown speed kind {spec.kind!r}")


def sample_speed(grid: DomainGrid, speed_spec: SpeedLike) -> SpeedField:
    """Nodal samples of c(x) with their min/max as certified bounds."""
    if isinstance(speed_spec, SpeedSpec):
        values = _evaluate_spec(grid, speed_spec)
    elif isinstance(speed_spec, str):
        values = _evaluate_spec(grid, parse_speed_spec(speed_spec))
    elif np.isscalar(speed_spec):
        values = np.full(grid.n_nodes, float(speed_spec))
    else:
        values = np.asarray(speed_spec, dtype=float).ravel()

    if values.shape != (grid.n_nodes,):
        raise ValueError(
            f"speed has {values.size} values but the grid has {grid.n_nodes} nodes"
        )
    bad = np.flatnonzero(~(values > 0.0) | ~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"speed must be positive and finite; node {i} at "
            f"{tuple(grid.nodes[i])} has c={values[i]!r}"
        )
    values = values.copy()
    values.setflags(write=False)
    return SpeedField(
        values=values,
        c_min=float(values.min()),
        c_max=float(values.max()),
        fingerprint=_fingerprint(grid.fingerprint, values),
        grid_fingerprint=grid.fingerprint,
    )
