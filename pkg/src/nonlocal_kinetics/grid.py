"""Uniform tensor grids and trapezoid quadrature on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform 2D grid, one ``(min, max, points)`` triple per axis."""

    x1: tuple[float, float, int] = (-1.0, 1.0, 201)
    x2: tuple[float, float, int] = (-1.0, 1.0, 201)

    def __post_init__(self):
        for name in ("x1", "x2"):
            lo, hi, n = getattr(self, name)
            if not hi > lo:
                raise ValueError(f"{name}: max must exceed min, got ({lo}, {hi})")
            if int(n) != n or n < 2:
                raise ValueError(f"{name}: need an integer point count >= 2, got {n}")
            object.__setattr__(self, name, (float(lo), float(hi), int(n)))

    @classmethod
    def square(cls, half_width: float, points: int) -> "GridSpec":
        return cls((-half_width, half_width, points), (-half_width, half_width, points))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x1[2], self.x2[2])

    @property
    def spacing(self) -> tuple[float, float]:
        return tuple((hi - lo) / (n - 1) for lo, hi, n in (self.x1, self.x2))

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.linspace(lo, hi, n) for lo, hi, n in (self.x1, self.x2))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``indexing='ij'`` mesh, so ``field[i, j]`` sits at ``(x1[i], x2[j])``."""
        return np.meshgrid(*self.axes(), indexing="ij")


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def integrate(values: np.ndarray, grid: GridSpec) -> float:
    """Tensor-product trapezoid rule of ``values`` sampled on ``grid``."""
    h1, h2 = grid.spacing
    w1 = trapezoid_weights(grid.x1[2], h1)
    w2 = trapezoid_weights(grid.x2[2], h2)
    return float(w1 @ values @ w2)


def integrate_with_error(values: np.ndarray, grid: GridSpec) -> tuple[float, float]:
    """Trapezoid integral plus a Richardson error estimate from the 2h sub-grid.

    The sub-grid uses every other node, which requires an odd point count per
    axis; otherwise the estimate is ``nan``.
    """
    fine = integrate(values, grid)
    n1, n2 = grid.shape
    if n1 % 2 == 0 or n2 % 2 == 0 or n1 < 3 or n2 < 3:
        return fine, float("nan")
    coarse_grid = GridSpec((grid.x1[0], grid.x1[1], (n1 + 1) // 2),
                           (grid.x2[0], grid.x2[1], (n2 + 1) // 2))
    coarse = integrate(values[::2, ::2], coarse_grid)
    return fine, abs(fine - coarse) / 3.0
