import math

import numpy as np
import pytest

from linepaint.xdog import XdogParams, gaussian_blur, gaussian_kernel1d, xdog_filter


def reference_xdog(grey, params):
    """Independent scalar implementation: dense 2D kernels, explicit loops,
    mirror-symmetric borders.  Slow, used as the oracle on small images."""

    def kernel2d(sigma, radius):
        xs = np.arange(-radius, radius + 1, dtype=np.float64)
        one = np.exp(-(xs ** 2) / (2 * sigma * sigma))
        one /= one.sum()
        return np.outer(one, one)

    radius = math.ceil(3 * params.sigma * params.kappa)
    k_narrow = kernel2d(params.sigma, radius)
    k_wide = kernel2d(params.sigma * params.kappa, radius)
    padded = np.pad(grey.astype(np.float64), radius, mode="symmetric")
    h, w = grey.shape
    out = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            window = padded[i:i + 2 * radius + 1, j:j + 2 * radius + 1]
            s = (window * k_narrow).sum() - params.tau * (window * k_wide).sum()
            if s >= params.epsilon_t:
                out[i, j] = 1.0
            else:
                out[i, j] = min(max(1.0 + math.tanh(params.phi * (s - params.epsilon_t)), 0.0), 1.0)
    return out


@pytest.mark.parametrize("sigma,tau,phi", [(0.4, 0.95, 1e9), (0.5, 0.9, 200.0)])
def test_matches_scalar_reference(sigma, tau, phi):
    rng = np.random.default_rng(12)
    grey = rng.random((24, 20)).astype(np.float32)
    params = XdogParams(sigma=sigma, tau=tau, phi=phi)
    got = xdog_filter(grey, params)
    want = reference_xdog(grey, params)
    assert got.shape == grey.shape
    assert got.dtype == np.float32
    assert np.allclose(got, want, atol=1e-6)


def test_all_white_input_stays_all_white_exactly():
    params = XdogParams()
    out = xdog_filter(np.ones((16, 16), dtype=np.float32), params)
    assert np.array_equal(out, np.ones((16, 16), dtype=np.float32))


def test_constant_inputs_produce_no_lines():
    # blur of a constant is the constant, so the response is c*(1 - tau) >= 0
    params = XdogParams()
    for level in (0.0, 0.3, 1.0):
        out = xdog_filter(np.full((12, 12), level, dtype=np.float32), params)
        assert np.array_equal(out, np.ones((12, 12), dtype=np.float32))


def test_step_edge_yields_dark_line_on_dark_side():
    params = XdogParams(phi=1e9)
    grey = np.ones((32, 32), dtype=np.float32)
    grey[:, :16] = 0.2  # dark half on the left
    out = xdog_filter(grey, params)
    # hard threshold: output is binary
    assert set(np.unique(out)) <= {0.0, 1.0}
    dark_cols = np.where((out == 0.0).any(axis=0))[0]
    assert dark_cols.size > 0
    # the line hugs the dark side of the step
    assert dark_cols.max() < 16
    # far field is untouched white
    assert np.all(out[:, :8] == 1.0) and np.all(out[:, 24:] == 1.0)


def test_steep_ramp_is_binary_on_texture():
    rng = np.random.default_rng(13)
    grey = rng.random((40, 40)).astype(np.float32)
    out = xdog_filter(grey, XdogParams(phi=1e9))
    near_binary = (np.abs(out) <= 1e-3) | (np.abs(out - 1.0) <= 1e-3)
    assert near_binary.all()


def test_accepts_channel_dim_and_preserves_it():
    rng = np.random.default_rng(14)
    grey = rng.random((1, 18, 22)).astype(np.float32)
    out = xdog_filter(grey, XdogParams())
    assert out.shape == (1, 18, 22)
    flat = xdog_filter(grey[0], XdogParams())
    assert np.array_equal(out[0], flat)


def test_kernel_is_normalized_and_symmetric():
    kernel = gaussian_kernel1d(0.8, 5)
    assert kernel.shape == (11,)
    assert abs(kernel.sum() - 1.0) < 1e-12
    assert np.allclose(kernel, kernel[::-1])


def test_blur_preserves_mean_of_constant():
    arr = np.full((9, 9), 0.37, dtype=np.float64)
    out = gaussian_blur(arr, sigma=1.1, radius=4)
    assert np.allclose(out, 0.37, atol=1e-12)


def test_radius_follows_wide_kernel():
    params = XdogParams(sigma=0.4, kappa=4.5)
    assert params.radius == math.ceil(3 * 0.4 * 4.5)
    assert XdogParams(sigma=1.0, kappa=2.0).radius == 6


def test_parameter_validation():
    with pytest.raises(ValueError):
        XdogParams(sigma=0.0)
    with pytest.raises(ValueError):
        XdogParams(kappa=1.0)
    with pytest.raises(ValueError):
        XdogParams(phi=-1.0)
    with pytest.raises(ValueError):
        xdog_filter(np.full((4, 4), np.nan, dtype=np.float32), XdogParams())
