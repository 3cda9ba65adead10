"""Sensed-contact-frame model, SSIM deformation measure, synthetic tactile images.

The contact-orientation estimator is abstracted as a configurable bias/noise
rotation of the true contact frame, held between updates (zero-order hold).
Contact deformation is measured by e_ssim = 1 - SSIM against a reference
image; a deterministic pin-grid generator provides stand-in tactile imagery.
"""

import math
from dataclasses import dataclass

import numpy as np

from .contact import ContactFrame
from .errors import DimensionMismatch
from .spatial import normalize, rotation_about

SSIM_WINDOW = 11
SSIM_C1 = (0.01 * 1.0) ** 2
SSIM_C2 = (0.03 * 1.0) ** 2


@dataclass
class SensorErrorModel:
    """Per-finger orientation bias/noise about a tangent axis, plus hold period."""

    bias_axis: tuple = ("t_x", "t_x")
    bias_angle: tuple = (0.0, 0.0)   # rad
    noise_std: tuple = (0.0, 0.0)    # rad
    period: float = 0.0              # s; 0 = update every query
    seed: int = 0

    def __post_init__(self):
        for ax in self.bias_axis:
            if ax not in ("t_x", "t_y"):
                raise ValueError("bias axis must be 't_x' or 't_y'")
        for a in self.bias_angle:
            if not -math.pi / 2 < a < math.pi / 2:
                raise ValueError("bias angle must lie in (-pi/2, pi/2)")
        if any(s < 0 for s in self.noise_std):
            raise ValueError("noise std must be nonnegative")
        if self.period < 0:
            raise ValueError("update period must be nonnegative")


def sense_frame(true_frame, axis_name, angle):
    """Rotate the true triad by `angle` about its own tangent axis.

    Returns a re-orthonormalized ContactFrame at the same contact point.
    """
    axis = true_frame.t_x if axis_name == "t_x" else true_frame.t_y
    R = rotation_about(axis, angle)
    t_x = R @ true_frame.t_x
    n_z = R @ true_frame.n_z
    # Gram-Schmidt against drift from repeated float rotations
    t_x = normalize(t_x - (t_x @ n_z) * n_z)
    n_z = normalize(n_z)
    t_y = np.cross(n_z, t_x)
    return ContactFrame(true_frame.p_c, t_x, t_y, n_z)


class FrameSensor:
    """Zero-order-hold sensed-frame stream for one finger."""

    def __init__(self, model, finger_index, rng):
        self.model = model
        self.i = finger_index
        self.rng = rng
        self._held = None
        self._last_t = None

    def sense(self, true_frame, t):
        due = (
            self._held is None
            or self.model.period == 0.0
            or t - self._last_t >= self.model.period - 1e-12
        )
        if due:
            angle = self.model.bias_angle[self.i]
            std = self.model.noise_std[self.i]
            if std > 0:
                angle += float(self.rng.normal(0.0, std))
            self._held = sense_frame(true_frame, self.model.bias_axis[self.i], angle)
            self._last_t = t
        return self._held


@dataclass
class TactileImage:
    pixels: np.ndarray  # (height, width), grayscale in [0, 1]

    def __post_init__(self):
        self.pixels = np.clip(np.asarray(self.pixels, dtype=float), 0.0, 1.0)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


def _window_means(img, w):
    from numpy.lib.stride_tricks import sliding_window_view

    return sliding_window_view(img, (w, w)).mean(axis=(2, 3))


def ssim(image, reference, window=SSIM_WINDOW):
    """Mean structural similarity over all valid uniform windows."""
    if image.pixels.shape != reference.pixels.shape:
        raise DimensionMismatch(
            f"image {image.pixels.shape} vs reference {reference.pixels.shape}"
        )
    x = image.pixels
    y = reference.pixels
    if min(x.shape) < window:
        raise DimensionMismatch(f"image smaller than the {window}x{window} window")
    mu_x = _window_means(x, window)
    mu_y = _window_means(y, window)
    var_x = _window_means(x * x, window) - mu_x * mu_x
    var_y = _window_means(y * y, window) - mu_y * mu_y
    cov = _window_means(x * y, window) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(num / den))


def e_ssim(image, reference, window=SSIM_WINDOW):
    """Deformation measure: 1 - ssim, in [0, 2]."""
    return 1.0 - ssim(image, reference, window)


def synth_tactile_image(
    indentation_mm,
    center_offset_mm=(0.0, 0.0),
    width=240,
    height=135,
    grid=8,
    px_per_mm=8.0,
):
    """Deterministic pin-grid tactile image.

    Pins are Gaussian blobs on a regular grid; contact displaces each pin
    radially away from the contact center, with magnitude proportional to the
    indentation and attenuated with distance from the center.
    """
    if not 0.0 <= indentation_mm <= 2.5:
        raise ValueError("indentation must lie in [0, 2.5] mm")
    margin = 12.0
    gx = np.linspace(margin, width - margin, grid)
    gy = np.linspace(margin, height - margin, grid)
    px, py = np.meshgrid(gx, gy)
    cx = width / 2.0 + center_offset_mm[0] * px_per_mm
    cy = height / 2.0 + center_offset_mm[1] * px_per_mm
    dx = px - cx
    dy = py - cy
    dist = np.hypot(dx, dy) + 1e-9
    falloff_px = 30.0
    gain_px_per_mm = 6.0
    disp = gain_px_per_mm * indentation_mm * np.exp(-0.5 * (dist / falloff_px) ** 2)
    px = px + disp * dx / dist
    py = py + disp * dy / dist

    xs = np.arange(width)[None, :]
    ys = np.arange(height)[:, None]
    sigma = 2.5
    img = np.zeros((height, width))
    for x0, y0 in zip(px.ravel(), py.ravel()):
        img += np.exp(-((xs - x0) ** 2 + (ys - y0) ** 2) / (2 * sigma * sigma))
    return TactileImage(img)


def detect_contact(e, threshold):
    """Contact is declared once the deformation measure reaches the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return e >= threshold
