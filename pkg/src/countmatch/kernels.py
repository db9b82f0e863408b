"""Anisotropic Gaussian kernel synthesis with verified analytic gradients.

A kernel is parameterized by a base standard deviation ``sigma`` in
[1, 10], sub-pixel center offsets ``dx, dy`` in [-2, 2], and positive
axial scales ``sx, sy`` that turn the base deviation into anisotropic
widths sigma_x = sx * sigma and sigma_y = sy * sigma. On an odd-sized
grid of integer offsets (u, v) from the center pixel (y axis pointing
down, image convention) the kernel value is

    K(u, v) = exp(-(u - dx)^2 / (2 sigma_x^2)
              -(v - dy)^2 / (2 sigma_y^2)) / (2 pi sigma_x sigma_y)

whose integral over the continuous plane is exactly 1.

Raw, unconstrained parameters are mapped into their ranges by smooth
squashing functions (logistic, tanh, exp) rather than clamping, so that
gradients never vanish at the range boundaries. Closed-form partial
derivatives with respect to all five parameters are provided and are
checked against central finite differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SIGMA_MIN = 1.0
SIGMA_MAX = 10.0
OFFSET_LIMIT = 2.0


def logistic(x):
    """Numerically stable standard logistic, elementwise on arrays."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def squash_sigma(raw):
    """Map an unconstrained raw value into the open interval (1, 10)."""
    return SIGMA_MIN + (SIGMA_MAX - SIGMA_MIN) * logistic(raw)


def squash_offset(raw):
    """Map an unconstrained raw value into the open interval (-2, 2)."""
    return OFFSET_LIMIT * np.tanh(np.asarray(raw, dtype=np.float64))


@dataclass(frozen=True)
class KernelParams:
    """Validated kernel parameter bundle.

    sigma in [1, 10], dx and dy in [-2, 2] (pixels), sx and sy strictly
    positive. The derived anisotropic widths are exposed as properties.
    """

    sigma: float
    dx: float = 0.0
    dy: float = 0.0
    sx: float = 1.0
    sy: float = 1.0

    def __post_init__(self) -> None:
        vals = (self.sigma, self.dx, self.dy, self.sx, self.sy)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"kernel parameters must be finite, got {vals}")
        if not SIGMA_MIN <= self.sigma <= SIGMA_MAX:
            raise ValueError(f"sigma must lie in [{SIGMA_MIN}, {SIGMA_MAX}], got {self.sigma}")
        if abs(self.dx) > OFFSET_LIMIT or abs(self.dy) > OFFSET_LIMIT:
            raise ValueError(f"offsets must lie in [-{OFFSET_LIMIT}, {OFFSET_LIMIT}]")
        if self.sx <= 0 or self.sy <= 0:
            raise ValueError("axial scales must be positive")

    @property
    def sigma_x(self) -> float:
        return self.sx * self.sigma

    @property
    def sigma_y(self) -> float:
        return self.sy * self.sigma


@dataclass(frozen=True)
class Kernel:
    """A synthesized kernel grid together with its parameters."""

    values: np.ndarray
    params: KernelParams
    renormalized: bool = False

    def __post_init__(self) -> None:
        self.values.setflags(write=False)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class KernelGradients:
    """Partial derivatives of the raw kernel grid, one grid per parameter."""

    d_sigma: np.ndarray
    d_dx: np.ndarray
    d_dy: np.ndarray
    d_sx: np.ndarray
    d_sy: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"sigma": self.d_sigma, "dx": self.d_dx, "dy": self.d_dy,
                "sx": self.d_sx, "sy": self.d_sy}


def squash_params(raw: Sequence[float]) -> KernelParams:
    """Map five unconstrained reals onto a valid parameter bundle.

    sigma = 1 + 9 * logistic(r0), dx = 2 tanh(r1), dy = 2 tanh(r2),
    sx = exp(r3), sy = exp(r4). Each map is smooth, strictly monotone,
    and invertible on the open target range; a raw vector of zeros lands
    on (sigma=5.5, dx=dy=0, sx=sy=1).
    """
    r = np.asarray(raw, dtype=np.float64).reshape(-1)
    if r.shape[0] != 5:
        raise ValueError(f"expected 5 raw parameters, got {r.shape[0]}")
    if not np.all(np.isfinite(r)):
        raise ValueError("raw parameters must be finite")
    with np.errstate(over="raise"):
        try:
            sx = float(np.exp(r[3]))
            sy = float(np.exp(r[4]))
        except FloatingPointError as exc:
            raise ValueError("axial scale exponent overflows") from exc
    return KernelParams(
        sigma=float(squash_sigma(r[0])),
        dx=float(squash_offset(r[1])),
        dy=float(squash_offset(r[2])),
        sx=sx,
        sy=sy,
    )


def _validate_size(size: int) -> int:
    if not isinstance(size, (int, np.integer)) or isinstance(size, bool):
        raise ValueError(f"kernel size must be an integer, got {size!r}")
    if size < 3 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 3, got {size}")
    return int(size)


def _offset_grids(size: int) -> tuple[np.ndarray, np.ndarray]:
    half = size // 2
    offs = np.arange(-half, half + 1, dtype=np.float64)
    return offs[None, :], offs[:, None]  # u along columns, v along rows


def synthesize_kernel(params: KernelParams, size: int, renormalize: bool = False) -> Kernel:
    """Evaluate the kernel formula on a size x size grid of integer offsets.

    ``values[v + half, u + half]`` holds K(u, v). With ``renormalize`` the
    grid is divided by its discrete sum, which makes constant signals
    invariant under convolution; the default emits the raw formula values,
    whose discrete sum approaches 1 as the grid covers the Gaussian mass.
    """
    size = _validate_size(size)
    u, v = _offset_grids(size)
    sx2 = 2.0 * params.sigma_x ** 2
    sy2 = 2.0 * params.sigma_y ** 2
    norm = 1.0 / (2.0 * math.pi * params.sigma_x * params.sigma_y)
    values = norm * np.exp(-((u - params.dx) ** 2) / sx2 - ((v - params.dy) ** 2) / sy2)
    if renormalize:
        values = values / values.sum()
    return Kernel(values=values, params=params, renormalized=renormalize)


def kernel_gradients(params: KernelParams, size: int) -> KernelGradients:
    """Closed-form partials of the raw kernel grid.

    With a = (u - dx) / sigma_x and b = (v - dy) / sigma_y:

        dK/d(dx)    = K * (u - dx) / sigma_x^2
        dK/d(dy)    = K * (v - dy) / sigma_y^2
        dK/d(sigma) = K * (a^2 + b^2 - 2) / sigma
        dK/d(sx)    = K * (a^2 - 1) / sx
        dK/d(sy)    = K * (b^2 - 1) / sy

    The sigma/scale forms follow from sigma_x = sx * sigma and
    sigma_y = sy * sigma by the chain rule.
    """
    size = _validate_size(size)
    u, v = _offset_grids(size)
    k = synthesize_kernel(params, size).values
    ax = (u - params.dx) / params.sigma_x
    by = (v - params.dy) / params.sigma_y
    ax2 = ax * ax
    by2 = by * by
    return KernelGradients(
        d_sigma=k * (ax2 + by2 - 2.0) / params.sigma,
        d_dx=k * (u - params.dx) / params.sigma_x ** 2,
        d_dy=k * (v - params.dy) / params.sigma_y ** 2,
        d_sx=k * (ax2 - 1.0) / params.sx,
        d_sy=k * (by2 - 1.0) / params.sy,
    )
