import math

import numpy as np
import pytest

from hasqoe.backbone import PooledStats
from hasqoe.errors import ContainerError
from hasqoe.gru import GruParams, default_gru_params, gru_fuse, load_gru, save_gru


def zero_params():
    z = np.zeros((4, 8))
    b = np.zeros(4)
    return GruParams(w_update=z, b_update=b, w_reset=z.copy(), b_reset=b.copy(),
                     w_candidate=z.copy(), b_candidate=b.copy())


def stats(l1, l2, l3, l4):
    return PooledStats(l1=l1, l2=l2, l3=l3, l4=l4)


def test_zero_parameters_yield_zero_state():
    # candidate = tanh(0) = 0, so every convex combination of h=0 and 0 is 0
    params = zero_params()
    sequence = [stats(5.0, -1.0, 2.0, 0.5), stats(100.0, 3.0, 9.0, 1.0), stats(0, 0, 0, 0)]
    out = gru_fuse(sequence, params)
    assert np.array_equal(out, np.zeros(4))


def test_single_step_fixture():
    # Update/reset gates have zero weights and biases -> z = r = 1/2.
    # Candidate weights pick out the input identically, so after one step
    # h = (1 - z) * tanh(x) = tanh(x) / 2.
    w_candidate = np.hstack([np.eye(4), np.zeros((4, 4))])
    params = GruParams(
        w_update=np.zeros((4, 8)), b_update=np.zeros(4),
        w_reset=np.zeros((4, 8)), b_reset=np.zeros(4),
        w_candidate=w_candidate, b_candidate=np.zeros(4),
    )
    x = (0.5, -0.25, 0.1, 0.0)
    out = gru_fuse([stats(*x)], params)
    expected = [0.5 * math.tanh(v) for v in x]
    assert out == pytest.approx(expected, abs=1e-12)


def naive_gru_step(x, h, params):
    """Scalar-loop reference step, independent of the vectorized path."""
    def gate(w, b, inputs):
        out = []
        for row, bias in zip(w, b):
            acc = bias
            for weight, value in zip(row, inputs):
                acc += weight * value
            out.append(acc)
        return out

    xh = list(x) + list(h)
    z = [1.0 / (1.0 + math.exp(-v)) for v in gate(params.w_update, params.b_update, xh)]
    r = [1.0 / (1.0 + math.exp(-v)) for v in gate(params.w_reset, params.b_reset, xh)]
    xrh = list(x) + [ri * hi for ri, hi in zip(r, h)]
    n = [math.tanh(v) for v in gate(params.w_candidate, params.b_candidate, xrh)]
    return [(1.0 - zi) * ni + zi * hi for zi, ni, hi in zip(z, n, h)]


def test_matches_naive_reference_on_random_params():
    rng = np.random.default_rng(11)
    for _ in range(10):
        params = GruParams(
            w_update=rng.uniform(-1, 1, (4, 8)), b_update=rng.uniform(-1, 1, 4),
            w_reset=rng.uniform(-1, 1, (4, 8)), b_reset=rng.uniform(-1, 1, 4),
            w_candidate=rng.uniform(-1, 1, (4, 8)), b_candidate=rng.uniform(-1, 1, 4),
        )
        sequence = [stats(*rng.uniform(-3, 3, 4)) for _ in range(6)]
        h = [0.0, 0.0, 0.0, 0.0]
        for s in sequence:
            h = naive_gru_step(s.as_array(), h, params)
        got = gru_fuse(sequence, params)
        assert got == pytest.approx(h, abs=1e-12)


def test_determinism_and_empty_sequence():
    params = default_gru_params(seed=4)
    sequence = [stats(1.0, 0.0, 0.5, 0.2), stats(2.0, -1.0, 0.0, 0.1)]
    assert np.array_equal(gru_fuse(sequence, params), gru_fuse(sequence, params))
    with pytest.raises(ValueError, match="empty"):
        gru_fuse([], params)


def test_default_params_seeded():
    a = default_gru_params(seed=0)
    b = default_gru_params(seed=0)
    c = default_gru_params(seed=1)
    assert np.array_equal(a.w_update, b.w_update)
    assert not np.array_equal(a.w_update, c.w_update)


def test_shape_validation():
    with pytest.raises(ValueError, match="w_update"):
        GruParams(
            w_update=np.zeros((4, 7)), b_update=np.zeros(4),
            w_reset=np.zeros((4, 8)), b_reset=np.zeros(4),
            w_candidate=np.zeros((4, 8)), b_candidate=np.zeros(4),
        )


def test_container_round_trip(tmp_path):
    params = default_gru_params(seed=2)
    path = tmp_path / "gru.bin"
    save_gru(params, path)
    loaded = load_gru(path)
    sequence = [stats(0.5, 0.1, 0.3, 0.05)]
    assert gru_fuse(sequence, loaded) == pytest.approx(gru_fuse(sequence, params), abs=1e-6)
    with pytest.raises(ContainerError):
        load_gru(tmp_path / "missing.bin")
