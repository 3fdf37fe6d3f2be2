"""The compiled kernels agree with the numpy reference implementation."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrt import _pykernels, kernels

needs_ext = pytest.mark.skipif("cython" not in kernels.available_backends(),
                               reason="compiled extension not built")


@pytest.fixture
def ck():
    from nrt import _ckernels
    return _ckernels


def _state(rng, d=7, b=3):
    return (rng.normal(size=(d, b)) * 3, rng.normal(size=(d, b)) * 3,
            np.tanh(rng.normal(size=(d, b))))


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


@needs_ext
def test_set_backend_rebinds():
    before = kernels.BACKEND
    try:
        kernels.set_backend("python")
        assert kernels.sigmoid is _pykernels.sigmoid
        kernels.set_backend("cython")
        assert kernels.sigmoid is not _pykernels.sigmoid
    finally:
        kernels.set_backend(before)


@needs_ext
def test_gru_kernels_agree(ck):
    rng = np.random.default_rng(0)
    a_r, a_z, h = _state(rng)
    for out_c, out_p in zip(ck.gru_gates(a_r, a_z, h), _pykernels.gru_gates(a_r, a_z, h)):
        np.testing.assert_allclose(out_c, out_p, rtol=1e-14, atol=1e-15)
    r, z, _ = _pykernels.gru_gates(a_r, a_z, h)
    a_g = rng.normal(size=h.shape)
    for out_c, out_p in zip(ck.gru_blend(a_g, z, h), _pykernels.gru_blend(a_g, z, h)):
        np.testing.assert_allclose(out_c, out_p, rtol=1e-14, atol=1e-15)
    g, _ = _pykernels.gru_blend(a_g, z, h)
    dh = rng.normal(size=h.shape)
    for out_c, out_p in zip(ck.gru_blend_backward(dh, h, z, g),
                            _pykernels.gru_blend_backward(dh, h, z, g)):
        np.testing.assert_allclose(out_c, out_p, rtol=1e-14, atol=1e-15)
    for out_c, out_p in zip(ck.gru_reset_backward(dh, h, r), _pykernels.gru_reset_backward(dh, h, r)):
        np.testing.assert_allclose(out_c, out_p, rtol=1e-14, atol=1e-15)


@needs_ext
def test_softmax_kernels_agree(ck):
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(11, 4)) * 50
    np.testing.assert_allclose(ck.softmax_cols(logits), _pykernels.softmax_cols(logits), rtol=1e-13)
    np.testing.assert_allclose(ck.log_softmax_cols(logits), _pykernels.log_softmax_cols(logits),
                               rtol=1e-13, atol=1e-13)
    targets = np.array([3, -1, 0, 10], dtype=np.int64)
    pc, nc = ck.softmax_xent_cols(logits, targets)
    pp, npy = _pykernels.softmax_xent_cols(logits, targets)
    np.testing.assert_allclose(pc, pp, rtol=1e-13)
    np.testing.assert_allclose(nc, npy, rtol=1e-13)
    assert nc[1] == 0.0


@needs_ext
@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 4), max_size=25), st.lists(st.integers(0, 4), max_size=25))
def test_lcs_agrees(a, b):
    from nrt import _ckernels
    a = np.array(a, dtype=np.int64)
    b = np.array(b, dtype=np.int64)
    assert _ckernels.lcs_length(a, b) == _pykernels.lcs_length(a, b)


@pytest.mark.parametrize("a,b,expected", [([], [], 0), ([1, 2, 3], [1, 4, 3], 2),
                                          ([1, 2, 3, 4], [2, 4], 2), ([5], [6], 0)])
def test_lcs_reference(a, b, expected):
    assert _pykernels.lcs_length(np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)) == expected


def test_sigmoid_reference_extremes():
    x = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
    s = _pykernels.sigmoid(x)
    assert np.all(np.isfinite(s)) and s[2] == 0.5
    np.testing.assert_allclose(s + _pykernels.sigmoid(-x), 1.0, atol=1e-15)
