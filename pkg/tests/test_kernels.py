import importlib

import numpy as np
import pytest

from hbgfdi import kernels
from hbgfdi.kernels import _tanks_py

try:
    from hbgfdi.kernels import _tanks_cy
except ImportError:  # extension not built
    _tanks_cy = None

needs_cy = pytest.mark.skipif(_tanks_cy is None, reason="compiled kernel not built")


def _random_case(seed, n=800):
    rng = np.random.default_rng(seed)
    params = np.broadcast_to(rng.uniform(0.5, 2.0, 7), (n, 3, 7)).copy()
    params[n // 2:, :, 4] *= 4.0  # a mid-run R12 fault
    inputs = np.repeat(rng.uniform(0, 2.0, (n // 100, 2)), 100, axis=0)
    return np.zeros(3), params, inputs


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_override(monkeypatch):
    monkeypatch.setenv("HBGFDI_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("HBGFDI_PURE_PYTHON")
        importlib.reload(kernels)


@needs_cy
@pytest.mark.parametrize("seed", range(5))
def test_integrator_parity(seed):
    h0, params, inputs = _random_case(seed)
    a = _tanks_py.integrate_tanks(h0, params, inputs, 0.01, (0.5, 0.7))
    b = _tanks_cy.integrate_tanks(h0, params, inputs, 0.01, (0.5, 0.7))
    np.testing.assert_allclose(b[0], a[0], rtol=0, atol=1e-12)
    np.testing.assert_array_equal(b[1], a[1])
    assert a[2] == b[2] == -1


@needs_cy
@pytest.mark.parametrize("window", [1, 3, 7])
def test_persistence_parity(window):
    rng = np.random.default_rng(window)
    exceed = (rng.random((2000, 3)) < 0.6).astype(np.uint8)
    np.testing.assert_array_equal(_tanks_py.persistence_mask(exceed, window),
                                  _tanks_cy.persistence_mask(exceed, window))


def test_persistence_semantics():
    exceed = np.array([[1], [1], [0], [1], [1], [1], [1]], dtype=np.uint8)
    assert kernels.persistence_mask(exceed, 3)[:, 0].tolist() == [0, 0, 0, 0, 0, 1, 1]
