import json
import math

import numpy as np
import pytest

from stochiso.errors import ConfigError
from stochiso.grid import build_grid
from stochiso.model import (BUILTIN_NAMES, Domain, builtin_model, diffusion_arrays, eval_diffusion,
                            eval_drift, load_model_config, make_model, model_from_dict)


def test_spiral_sink_defaults():
    m = builtin_model("spiral-sink")
    p = m.parameters
    assert (p["a11"], p["a12"], p["a21"], p["a22"]) == (0.1598, -0.52, 0.7227, -0.319)
    assert p["D"] == 1.25e-3
    assert m.domain == Domain(-0.6, 0.6, -0.6, 0.6)
    assert m.boundary == "truncated"
    np.testing.assert_allclose(eval_diffusion(m, (0.3, -0.2)), 1.25e-3 * np.eye(2), rtol=1e-14)


def test_stuart_landau_defaults():
    m = builtin_model("stuart-landau")
    assert dict(m.parameters) == {"a": 1.0, "b": 2.0, "Dx": 0.1, "Dy": 0.1}
    assert m.domain == Domain.square(1.75)


def test_heteroclinic_defaults():
    m = builtin_model("heteroclinic")
    assert dict(m.parameters) == {"alpha": 0.1, "D": 0.1}
    assert m.domain == Domain.square(math.pi / 2)
    assert m.boundary == "reflecting"


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        builtin_model("van-der-pol")


def test_unknown_override_is_error():
    with pytest.raises(ConfigError, match="Dz"):
        builtin_model("stuart-landau", {"Dz": 1.0})


@pytest.mark.parametrize("name, point, expected", [
    ("heteroclinic", (0.0, 0.0), (0.0, 0.0)),
    ("spiral-sink", (1.0, 0.0), (0.1598, 0.7227)),
    ("stuart-landau", (1.0, 0.0), (0.0, 3.0)),
])
def test_eval_drift(name, point, expected):
    assert eval_drift(builtin_model(name), point) == pytest.approx(expected, abs=1e-15)


def test_anisotropic_diffusion():
    m = builtin_model("stuart-landau", {"Dy": 2.5e-4})
    np.testing.assert_allclose(eval_diffusion(m, (0.1, 0.2)), np.diag([0.1, 2.5e-4]), rtol=1e-14)


def test_zero_noise_gives_zero_diffusion():
    m = make_model("z", ["x", "y"], [["0"], ["0"]], {}, Domain.square(1))
    assert np.all(eval_diffusion(m, (0.5, 0.5)) == 0)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_diffusion_psd_on_grid(name):
    m = builtin_model(name)
    g = build_grid(m.domain, 21, 21)
    X, Y = g.mesh()
    D = diffusion_arrays(m, X, Y)
    assert np.allclose(D, np.swapaxes(D, -1, -2))
    assert np.all(np.linalg.eigvalsh(D) >= -1e-15)


def test_heteroclinic_odd_symmetry(rng):
    m = builtin_model("heteroclinic")
    for x, y in rng.uniform(-math.pi / 2, math.pi / 2, size=(100, 2)):
        f = np.array(eval_drift(m, (x, y)))
        g = np.array(eval_drift(m, (-x, -y)))
        np.testing.assert_allclose(g, -f, atol=1e-15)


def test_noise_matrix_may_be_rectangular():
    m = make_model("r", ["-x", "-y"], [["s", "0", "s"], ["0", "s", "0"]], {"s": 1.0}, Domain.square(1))
    assert m.noise_dim == 3
    np.testing.assert_allclose(eval_diffusion(m, (0, 0)), [[1.0, 0.0], [0.0, 0.5]])


@pytest.mark.parametrize("kwargs, match", [
    (dict(drift=["x"]), "drift"),
    (dict(noise=[["1"], ["1", "2"]]), "noise"),
    (dict(boundary="periodic"), "boundary"),
    (dict(drift=["k*x", "y"]), "k"),
])
def test_invalid_models(kwargs, match):
    base = dict(name="m", drift=["x", "y"], noise=[["1", "0"], ["0", "1"]], parameters={},
                domain=Domain.square(1), boundary="truncated")
    base.update(kwargs)
    with pytest.raises(ConfigError, match=match):
        make_model(**base)


def test_degenerate_domain():
    with pytest.raises(ConfigError):
        Domain(0, 0, 0, 1)


def test_config_round_trip(tmp_path):
    m = builtin_model("heteroclinic", {"D": 0.01125})
    path = tmp_path / "het.json"
    path.write_text(json.dumps(m.to_dict()))
    back = load_model_config(path)
    assert back.to_dict() == m.to_dict()
    assert set(m.to_dict()) == {"name", "drift", "noise", "parameters", "domain", "boundary"}
    assert load_model_config(path, {"alpha": 0.2}).parameters["alpha"] == 0.2


def test_config_unknown_key():
    d = builtin_model("spiral-sink").to_dict()
    d["solver"] = "x"
    with pytest.raises(ConfigError, match="solver"):
        model_from_dict(d)


def test_config_unreadable(tmp_path):
    with pytest.raises(ConfigError):
        load_model_config(tmp_path / "missing.json")
