"""
Run configuration: flat ``key = value`` text with sections

    [domain] [speed] [bc] [basis] [phantom] [time] [damping] [output]

Lengths accept simple arithmetic in ``pi`` (``pi``, ``2*pi``, ``pi/2``).
"""

from __future__ import annotations

import ast
import configparser
import math
import operator as _op
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .grid import INTERVAL, RECTANGLE, parse_speed_spec
from .inversion import DampingSchedule

THEOREMS = ("4", "5", "both")

_BINOPS = {ast.Add: _op.add, ast.Sub: _op.sub, ast.Mult: _op.mul, ast.Div: _op.truediv}


def _eval_number(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(f"unsupported expression {text!r}")

    return ev(ast.parse(text.strip(), mode="eval"))


def parse_phantom(text: str) -> tuple:
    """``"1:1.0, 3:0.5"`` -> ((1, 1.0), (3, 0.5)); indices are 1-based."""
    items = []
    for chunk in filter(None, (c.strip() for c in text.strip().strip('"').split(","))):
        idx, sep, amp = chunk.partition(":")
        if not sep:
            raise ValueError(f"phantom entry {chunk!r} is not '<mode>:<amplitude>'")
        i = int(idx)
        if i < 1:
            raise ValueError(f"phantom mode index must be >= 1, got {i}")
        items.append((i, float(amp)))
    return tuple(items)


def _phantom_text(items) -> str:
    return ", ".join(f"{i}:{a!r}" for i, a in items)


@dataclass(frozen=True)
class RunConfig:
    kind: str = INTERVAL
    extents: tuple = (math.pi,)
    cells: tuple = (400,)
    speed: str = "constant:1.0"
    alpha: float = 1.0
    num_modes: int = 10
    k_max: int = 10
    phantom_robin: tuple = ((1, 1.0),)
    phantom_dirichlet: tuple = ((1, 1.0),)
    samples_per_period: int = 40
    dt: Optional[float] = None
    n_steps: Optional[int] = None
    schedule: DampingSchedule = field(default_factory=DampingSchedule)
    out_dir: str = "out"
    max_error: float = 5e-2
    theorem: str = "both"

    def with_out(self, out_dir) -> "RunConfig":
        return replace(self, out_dir=str(out_dir))

    def to_text(self) -> str:
        lines = ["[domain]", f"kind = {self.kind}"]
        if self.kind == INTERVAL:
            lines += [f"length = {self.extents[0]!r}", f"cells = {self.cells[0]}"]
        else:
            lines += [
                f"lx = {self.extents[0]!r}",
                f"ly = {self.extents[1]!r}",
                f"nx = {self.cells[0]}",
                f"ny = {self.cells[1]}",
            ]
        lines += ["", "[speed]", f'speed = "{self.speed}"']
        lines += ["", "[bc]", f"alpha = {self.alpha!r}"]
        lines += ["", "[basis]", f"num_modes = {self.num_modes}", f"k_max = {self.k_max}"]
        lines += [
            "",
            "[phantom]",
            f'robin = "{_phantom_text(self.phantom_robin)}"',
            f'dirichlet = "{_phantom_text(self.phantom_dirichlet)}"',
        ]
        lines += ["", "[time]", f"samples_per_period = {self.samples_per_period}"]
        if self.dt is not None:
            lines.append(f"dt = {self.dt!r}")
        if self.n_steps is not None:
            lines.append(f"n_steps = {self.n_steps}")
        s = self.schedule
        lines += [
            "",
            "[damping]",
            "eps = " + ", ".join(repr(e) for e in s.eps_values),
            f"tail_cut = {s.tail_cut!r}",
            f"degree = {s.extrapolation_degree}",
            f"method = {s.method}",
        ]
        lines += [
            "",
            "[output]",
            f"dir = {self.out_dir}",
            f"max_error = {self.max_error!r}",
            f"theorem = {self.theorem}",
        ]
        return "\n".join(lines) + "\n"


class _Reader:
    def __init__(self, parser: configparser.ConfigParser):
        self.p = parser

    def raw(self, section, key, default=None):
        if not self.p.has_option(section, key):
            if default is None:
                raise ConfigError(f"[{section}] {key}: missing")
            return default
        return self.p.get(section, key).strip().strip('"').strip("'")

    def get(self, section, key, conv, default=None):
        text = self.raw(section, key, default if default is None else str(default))
        try:
            return conv(text)
        except (ValueError, TypeError, SyntaxError) as exc:
            raise ConfigError(f"[{section}] {key} = {text!r}: {exc}") from exc

    def opt(self, section, key, conv):
        if not self.p.has_option(section, key):
            return None
        return self.get(section, key, conv)


def _int(text: str) -> int:
    v = _eval_number(text)
    if v != int(v):
        raise ValueError("expected an integer")
    return int(v)


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    r = _Reader(parser)
    d = RunConfig()

    kind = r.raw("domain", "kind", INTERVAL).lower()
    if kind == INTERVAL:
        extents = (r.get("domain", "length", _eval_number),)
        cells = (r.get("domain", "cells", _int),)
    elif kind == RECTANGLE:
        extents = (r.get("domain", "lx", _eval_number), r.get("domain", "ly", _eval_number))
        cells = (r.get("domain", "nx", _int), r.get("domain", "ny", _int))
    else:
        raise ConfigError(f"[domain] kind = {kind!r}: expected interval or rectangle")
    for e in extents:
        if not e > 0:
            raise ConfigError(f"[domain] extents must be positive, got {extents}")

    speed = r.raw("speed", "speed", d.speed)
    try:
        parse_speed_spec(speed)
    except ValueError as exc:
        raise ConfigError(f"[speed] speed = {speed!r}: {exc}") from exc

    alpha = r.get("bc", "alpha", _eval_number, d.alpha)
    if not alpha > 0:
        raise ConfigError(f"[bc] alpha = {alpha!r}: Robin alpha must be > 0")

    num_modes = r.get("basis", "num_modes", _int, d.num_modes)
    k_max = r.get("basis", "k_max", _int, num_modes)
    if num_modes < 1 or k_max < 1:
        raise ConfigError("[basis] num_modes and k_max must be >= 1")

    phantom_robin = r.get("phantom", "robin", parse_phantom, _phantom_text(d.phantom_robin))
    phantom_dirichlet = r.get(
        "phantom", "dirichlet", parse_phantom, _phantom_text(d.phantom_dirichlet)
    )

    spp = r.get("time", "samples_per_period", _int, d.samples_per_period)
    dt = r.opt("time", "dt", _eval_number)
    n_steps = r.opt("time", "n_steps", _int)

    eps_text = r.raw("damping", "eps", ", ".join(repr(e) for e in d.schedule.eps_values))
    try:
        schedule = DampingSchedule(
            eps_values=tuple(_eval_number(e) for e in eps_text.split(",") if e.strip()),
            tail_cut=r.get("damping", "tail_cut", float, d.schedule.tail_cut),
            extrapolation_degree=r.get("damping", "degree", _int, d.schedule.extrapolation_degree),
            method=r.raw("damping", "method", d.schedule.method),
        )
    except ValueError as exc:
        raise ConfigError(f"[damping] {exc}") from exc

    theorem = r.raw("output", "theorem", d.theorem)
    if theorem not in THEOREMS:
        raise ConfigError(f"[output] theorem = {theorem!r}: expected one of {THEOREMS}")

    return RunConfig(
        kind=kind,
        extents=extents,
        cells=cells,
        speed=speed,
        alpha=alpha,
        num_modes=num_modes,
        k_max=k_max,
        phantom_robin=phantom_robin,
        phantom_dirichlet=phantom_dirichlet,
        samples_per_period=spp,
        dt=dt,
        n_steps=n_steps,
        schedule=schedule,
        out_dir=r.raw("output", "dir", d.out_dir),
        max_error=r.get("output", "max_error", float, d.max_error),
        theorem=theorem,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
