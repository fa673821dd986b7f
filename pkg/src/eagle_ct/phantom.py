"""Ellipse phantoms on the normalized square ``[-1, 1]^2``."""
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class EllipseSpec:
    center_x: float
    center_y: float
    semi_axis_a: float
    semi_axis_b: float
    rotation: float  # radians, counter-clockwise
    intensity_delta: float

    def contains(self, x, y):
        dx = np.asarray(x) - self.center_x
        dy = np.asarray(y) - self.center_y
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.semi_axis_a) ** 2 + (v / self.semi_axis_b) ** 2 <= 1.0


# (delta, a, b, x0, y0, rotation in degrees); modified (Toft) intensities
_MODIFIED_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)

SHEPP_LOGAN_ELLIPSES = tuple(
    EllipseSpec(x0, y0, a, b, np.deg2rad(phi), delta)
    for delta, a, b, x0, y0, phi in _MODIFIED_SHEPP_LOGAN
)


def pixel_coordinates(size):
    """Normalized ``(x, y)`` of pixel centres; ``y`` points up the image."""
    centre = 0.5 * (size - 1)
    ticks = (np.arange(size) - centre) / (0.5 * size)
    return np.meshgrid(ticks, -ticks)


def render(ellipses, size):
    x, y = pixel_coordinates(size)
    img = np.zeros((size, size))
    for e in ellipses:
        img[e.contains(x, y)] += e.intensity_delta
    return img


def shepp_logan(size=128):
    """Modified Shepp-Logan phantom sampled at pixel centres, values in [0, 1]."""
    if int(size) != size or size < 32:
        raise ParameterError(f"size must be an integer >= 32, got {size!r}")
    return np.clip(render(SHEPP_LOGAN_ELLIPSES, int(size)), 0.0, 1.0)


def random_ellipses(num_ellipses, seed):
    if int(num_ellipses) != num_ellipses or num_ellipses < 1:
        raise ParameterError(f"num_ellipses must be >= 1, got {num_ellipses!r}")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(int(num_ellipses)):
        radius = 0.7 * np.sqrt(rng.uniform())
        phi = rng.uniform(0, 2 * np.pi)
        a = rng.uniform(0.04, 0.3)
        b = rng.uniform(0.04, 0.3)
        out.append(EllipseSpec(radius * np.cos(phi), radius * np.sin(phi), a, b,
                               rng.uniform(0, np.pi), rng.uniform(-0.4, 0.6)))
    return out


def random_phantom(size=128, num_ellipses=8, seed=0):
    """A body-like ellipse with ``num_ellipses`` random inserts, clamped to [0, 1].

    Insert centres lie within radius 0.7, so every ellipse stays inside the
    unit disc for the sampled axis lengths.
    """
    if int(size) != size or size < 1:
        raise ParameterError(f"size must be a positive integer, got {size!r}")
    body = EllipseSpec(0.0, 0.0, 0.85, 0.75, 0.0, 0.3)
    img = render([body, *random_ellipses(num_ellipses, seed)], int(size))
    return np.clip(img, 0.0, 1.0)
