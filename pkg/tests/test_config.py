import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patspec.config import RunConfig, load_config, parse_config, parse_phantom
from patspec.errors import ConfigError
from patspec.inversion import DampingSchedule

A1_TEXT = """
[domain]
kind = interval
length = pi
cells = 400

[speed]
speed = "sine:amp=0.5,base=1.0"

[bc]
alpha = 1.0

[phantom]
robin = "1:1.0, 3:0.5"
dirichlet = "2:1.0, 4:-0.3"

[output]
dir = out/a1
"""


def test_parse_a1():
    cfg = parse_config(A1_TEXT)
    assert cfg.extents == (math.pi,)
    assert cfg.cells == (400,)
    assert cfg.alpha == 1.0
    assert cfg.num_modes == 10 and cfg.k_max == 10
    assert cfg.phantom_robin == ((1, 1.0), (3, 0.5))
    assert cfg.phantom_dirichlet == ((2, 1.0), (4, -0.3))
    assert cfg.schedule == DampingSchedule()
    assert cfg.out_dir == "out/a1"


def test_rectangle_section():
    cfg = parse_config("[domain]\nkind = rectangle\nlx = 1\nly = 2*pi\nnx = 24\nny = 30\n")
    assert cfg.extents == (1.0, 2 * math.pi)
    assert cfg.cells == (24, 30)


@pytest.mark.parametrize(
    "text,match",
    [
        ("[domain]\nlength = pi\ncells = 100\n[bc]\nalpha = 0\n", "alpha"),
        ("[domain]\nlength = pi\ncells = 100\n[bc]\nalpha = -2\n", "alpha"),
        ("[domain]\nlength = pi\n", "cells"),
        ("[domain]\nkind = disk\n", "kind"),
        ("[domain]\nlength = -1\ncells = 10\n", "positive"),
        ("[domain]\nlength = pi\ncells = 10.5\n", "integer"),
        ("[domain]\nlength = __import__('os')\ncells = 10\n", "length"),
        ("[domain]\nlength = pi\ncells = 10\n[speed]\nspeed = wobble:1\n", "speed"),
        ("[domain]\nlength = pi\ncells = 10\n[phantom]\nrobin = 0:1.0\n", "phantom"),
        ("[domain]\nlength = pi\ncells = 10\n[damping]\neps = 0.1, 0.2\n", "damping"),
        ("[domain]\nlength = pi\ncells = 10\n[output]\ntheorem = 6\n", "theorem"),
        ("not an ini file", "unreadable"),
    ],
)
def test_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")


def test_parse_phantom():
    assert parse_phantom('"1:1.0, 3:0.5"') == ((1, 1.0), (3, 0.5))
    assert parse_phantom("") == ()
    with pytest.raises(ValueError):
        parse_phantom("1=2")


def test_default_round_trip():
    cfg = RunConfig()
    assert parse_config(cfg.to_text()) == cfg


eps_lists = st.lists(st.floats(0.01, 2.0), min_size=2, max_size=6, unique=True).map(
    lambda xs: tuple(sorted(xs, reverse=True))
)
phantoms = st.lists(st.tuples(st.integers(1, 20), st.floats(-10, 10, allow_nan=False)), max_size=4).map(tuple)


@st.composite
def configs(draw):
    rect = draw(st.booleans())
    eps = draw(eps_lists)
    sched = DampingSchedule(
        eps_values=eps,
        tail_cut=draw(st.sampled_from([1e-6, 1e-8, 1e-10, 1e-12])),
        extrapolation_degree=draw(st.integers(0, len(eps) - 1)),
        method=draw(st.sampled_from(["rational", "polynomial"])),
    )
    speed = draw(
        st.one_of(
            st.floats(0.1, 5.0).map(lambda v: f"constant:{v!r}"),
            st.tuples(st.floats(0.0, 0.9), st.floats(1.0, 3.0)).map(lambda p: f"sine:amp={p[0]!r},base={p[1]!r}"),
        )
    )
    n = draw(st.integers(1, 30))
    return RunConfig(
        kind="rectangle" if rect else "interval",
        extents=tuple(draw(st.floats(0.1, 10.0)) for _ in range(2 if rect else 1)),
        cells=tuple(draw(st.integers(8, 500)) for _ in range(2 if rect else 1)),
        speed=speed,
        alpha=draw(st.floats(1e-3, 1e3)),
        num_modes=n,
        k_max=draw(st.integers(1, n)),
        phantom_robin=draw(phantoms),
        phantom_dirichlet=draw(phantoms),
        samples_per_period=draw(st.integers(20, 100)),
        dt=draw(st.one_of(st.none(), st.floats(1e-4, 1.0))),
        n_steps=draw(st.one_of(st.none(), st.integers(2, 10**6))),
        schedule=sched,
        out_dir=draw(st.sampled_from(["out", "runs/a1", "/tmp/x y"])),
        max_error=draw(st.floats(0.0, 1.0)),
        theorem=draw(st.sampled_from(["4", "5", "both"])),
    )


@settings(max_examples=60, deadline=None)
@given(configs())
def test_round_trip(cfg):
    parsed = parse_config(cfg.to_text())
    assert parsed == cfg
    assert parse_config(parsed.to_text()) == parsed
