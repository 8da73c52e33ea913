from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subdiffwr.config import ALGORITHMS, ConfigError, ExperimentConfig, load_config, parse_config

FULL = """\
algorithm = "nnwr"

[problem]
alpha = 0.3
sigma = 1e-4
horizon = 2.0
domain = [-4.0, 4.0]
target = { file = "target.csv" }

[discretization]
mesh = "one_sided"
intervals = 40
dx = 0.1

[decomposition]
breakpoints = [-4.0, -3.0, 1.0, 4.0]
kappas = [0.25, 1.0, 0.25]

[relaxation]
theta = [0.2, 0.3]
phi = "auto"

[control]
tol = 1e-8
max_iter = 30
"""


def test_defaults():
    cfg = parse_config('algorithm = "dnwr"\n')
    assert cfg.problem.alpha == 0.5 and cfg.problem.sigma == 1e-6 and cfg.problem.horizon == 1.0
    assert cfg.discretization.dx == 0.05 and cfg.discretization.intervals == 100
    assert cfg.control.tol == 1e-10
    assert cfg.relaxation.theta == "auto"


def test_full_config_parses():
    cfg = parse_config(FULL)
    assert cfg.algorithm == "nnwr"
    assert cfg.problem.target == {"file": "target.csv"}
    assert cfg.decomposition.kappas == [0.25, 1.0, 0.25]
    assert cfg.relaxation.theta == [0.2, 0.3]
    assert cfg.control.max_iter == 30


def test_round_trip_is_byte_stable():
    cfg = parse_config(FULL)
    text = cfg.to_toml()
    again = parse_config(text)
    assert again == cfg
    assert again.to_toml() == text


@settings(max_examples=40, deadline=None)
@given(
    algo=st.sampled_from([a for a in ALGORITHMS if a != "monodomain"]),
    alpha=st.floats(0.05, 1.0),
    sigma=st.floats(1e-9, 1e3),
    tol=st.floats(1e-14, 1e-2),
    intervals=st.integers(2, 400),
    split=st.floats(-0.9, 0.9),
)
def test_round_trip_property(algo, alpha, sigma, tol, intervals, split):
    cfg = ExperimentConfig.from_dict({
        "algorithm": algo,
        "problem": {"alpha": alpha, "sigma": sigma},
        "discretization": {"intervals": intervals},
        "decomposition": {"breakpoints": [-1.0, split, 1.0]},
        "control": {"tol": tol},
    })
    text = cfg.to_toml()
    assert parse_config(text).to_toml() == text


def test_empty_config_lists_required_keys():
    with pytest.raises(ConfigError, match="algorithm") as exc:
        parse_config("")
    assert exc.value.key == "<root>"


@pytest.mark.parametrize("text, key", [
    ('[problem]\nalpha = 0.5\n', "algorithm"),
    ('algorithm = "schwarz"\n', "algorithm"),
    ('algorithm = "dnwr"\nfoo = 1\n', "foo"),
    ('algorithm = "dnwr"\n[problem]\nalpha = 1.5\n', "problem.alpha"),
    ('algorithm = "dnwr"\n[problem]\nalpha = "half"\n', "problem.alpha"),
    ('algorithm = "dnwr"\n[problem]\nsigma = 0\n', "problem.sigma"),
    ('algorithm = "dnwr"\n[problem]\nbeta = 1\n', "problem.beta"),
    ('algorithm = "dnwr"\n[problem]\ntarget = "other"\n', "problem.target"),
    ('algorithm = "dnwr"\n[problem]\ntarget = { path = "x" }\n', "problem.target.path"),
    ('algorithm = "dnwr"\n[discretization]\nmesh = "log"\n', "discretization.mesh"),
    ('algorithm = "dnwr"\n[discretization]\nintervals = 1\n', "discretization.intervals"),
    ('algorithm = "dnwr"\n[discretization]\nintervals = 2.5\n', "discretization.intervals"),
    ('algorithm = "dnwr"\n[decomposition]\nkappas = [1.0]\n', "decomposition.kappas"),
    ('algorithm = "dnwr"\n[decomposition]\nbreakpoints = [-1.0, 0.0, 2.0]\n', "decomposition.breakpoints"),
    ('algorithm = "dnwr"\n[relaxation]\ntheta = 1.0\n', "relaxation.theta"),
    ('algorithm = "dnwr"\n[control]\ntol = -1.0\n', "control.tol"),
    ('algorithm = "dnwr"\n[control]\nmax_iter = 0\n', "control.max_iter"),
    ('algorithm = "dnwr"\nproblem = 3\n', "problem"),
    ('algorithm = "dnwr\n', "<toml>"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.key == key
    assert key in str(exc.value)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(tmp_path / "absent.toml")
    assert exc.value.key == "<file>"


def test_load_config_reads_file(tmp_path):
    p = tmp_path / "exp.toml"
    p.write_text(FULL)
    assert load_config(p) == parse_config(FULL)
