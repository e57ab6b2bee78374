"""Extended difference-of-Gaussians line extraction.

The filter response is S = G_sigma(x) - tau * G_{kappa*sigma}(x) on the
grey image; the output is 1 where S >= epsilon_t and
1 + tanh(phi * (S - epsilon_t)) clamped to [0, 1] elsewhere.  With a very
steep ramp (phi ~ 1e9) this degenerates to a hard step: white on flat
paper, black along boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d


@dataclass(frozen=True)
class XdogParams:
    """Filter configuration.

    sigma: blur scale in pixels of the narrow Gaussian.
    kappa: ratio between the wide and narrow blur scales (> 1).
    tau: mixing weight of the wide blur.
    phi: sharpness of the thresholding ramp.
    epsilon_t: threshold level on the filter response.
    """

    sigma: float = 0.4
    kappa: float = 4.5
    tau: float = 0.95
    phi: float = 1e9
    epsilon_t: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.kappa > 1:
            raise ValueError(f"kappa must be > 1, got {self.kappa}")
        if not self.phi > 0:
            raise ValueError(f"phi must be > 0, got {self.phi}")

    @property
    def radius(self) -> int:
        """Truncation radius of both Gaussian kernels."""
        return math.ceil(3.0 * self.sigma * self.kappa)


def gaussian_kernel1d(sigma: float, radius: int) -> np.ndarray:
    """Normalized 1-D Gaussian kernel truncated at `radius` taps each side."""
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_blur(image: np.ndarray, sigma: float, radius: int) -> np.ndarray:
    """Separable Gaussian blur of a 2-D array with reflected borders."""
    kernel = gaussian_kernel1d(sigma, radius)
    out = correlate1d(image, kernel, axis=0, mode="reflect")
    return correlate1d(out, kernel, axis=1, mode="reflect")


def xdog_filter(grey: np.ndarray, params: XdogParams = XdogParams()) -> np.ndarray:
    """Apply the filter to a grey image in [0, 1].

    Accepts (H, W) or (1, H, W) and preserves the input shape.  Raises
    ValueError on non-finite pixels.
    """
    squeeze = grey.ndim == 3
    img = grey[0] if squeeze else grey
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D grey image, got shape {grey.shape}")
    if not np.isfinite(img).all():
        raise ValueError("line extraction input contains non-finite pixels")

    img = img.astype(np.float64)
    radius = params.radius
    narrow = gaussian_blur(img, params.sigma, radius)
    wide = gaussian_blur(img, params.kappa * params.sigma, radius)
    response = narrow - params.tau * wide

    ramp = 1.0 + np.tanh(params.phi * (response - params.epsilon_t))
    out = np.where(response >= params.epsilon_t, 1.0, np.clip(ramp, 0.0, 1.0))
    out = out.astype(np.float32)
    return out[None] if squeeze else out


__all__ = ["XdogParams", "gaussian_kernel1d", "gaussian_blur", "xdog_filter"]
