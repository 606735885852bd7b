from fractions import Fraction

import numpy as np
import pytest

from petcsched import config as config_mod
from petcsched.errors import InputError
from conftest import BATCH_REACTOR

LOOP = """
  - id: a
    A: [[-1.0]]
    B: [[1.0]]
    h: "0.1"
    k_bar: 5
"""


def test_batch_reactor_config(br_config):
    assert [lc.id for lc in br_config.loops] == ["loop1", "loop2"]
    lc = br_config.loops[0]
    assert lc.h == Fraction(1, 100) and lc.k_bar == 20 and lc.rho == 0.8
    np.testing.assert_array_equal(lc.R, 0.1 * np.eye(2))
    assert br_config.delta == 1 and br_config.earliness.E == 2


def test_round_trip_is_identity():
    text = open(BATCH_REACTOR).read()
    once = config_mod.dumps(config_mod.loads(text))
    assert config_mod.dumps(config_mod.loads(once)) == once


def test_round_trip_with_explicit_gain(tmp_path):
    text = "name: x\nbase_tick: 1/20\nloops:" + LOOP + "    K: [[-1.0]]\n    Q_trig: [[1, 0], [0, -1]]\n"
    cfg = config_mod.loads(text)
    assert cfg.base_tick == Fraction(1, 20)
    path = tmp_path / "c.yaml"
    config_mod.dump(cfg, path)
    assert config_mod.dumps(config_mod.load(path)) == config_mod.dumps(cfg)
    loop, P = cfg.loops[0].design()
    assert loop.K[0, 0] == -1.0 and P[0, 0] == pytest.approx(0.25)


@pytest.mark.parametrize("extra", [
    "",                                                    # neither K nor LQR weights
    "    K: [[-1.0]]\n    lqr: {Q: [[1]], R: [[1]]}\n    rho: 0.5\n",   # both
    "    K: [[-1.0]]\n",                                   # no triggering design
    "    K: [[-1.0]]\n    rho: 0.5\n    Q_trig: [[1, 0], [0, 0]]\n",
    "    lqr: {Q: [[1]]}\n    rho: 0.5\n",                 # incomplete LQR weights
    "    K: [[-1.0]]\n    rho: 0.5\n    initial_state: [1, 2]\n",
])
def test_invalid_loops(extra):
    with pytest.raises(InputError):
        config_mod.loads("loops:" + LOOP + extra)


def test_invalid_documents():
    with pytest.raises(InputError):
        config_mod.loads("loops: [")
    with pytest.raises(InputError):
        config_mod.loads("- 1\n- 2\n")
    with pytest.raises(InputError):
        config_mod.loads("name: x\n")
    with pytest.raises(InputError):
        config_mod.loads("loops:" + LOOP + "    K: [[-1.0]]\n    rho: 0.5\nsimulation: {speed: 2}\n")
    dup = "loops:" + (LOOP + "    K: [[-1.0]]\n    rho: 0.5\n") * 2
    with pytest.raises(InputError):
        config_mod.loads(dup)
