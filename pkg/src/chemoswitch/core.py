"""Grid, field, parameter and state containers shared by solvers and diagnostics.

Fields are cell-centred on the rectangle ``[0, lx] x [0, ly]`` and stored
row-major with flat index ``i + nx * j``; ``Field.array`` exposes the same
buffer as a ``(ny, nx)`` view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self) -> None:
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("nx and ny must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2x2 cells, got {self.nx}x{self.ny}")
        if not (math.isfinite(self.lx) and math.isfinite(self.ly)) or self.lx <= 0 or self.ly <= 0:
            raise ValueError(f"domain lengths must be positive, got lx={self.lx}, ly={self.ly}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two ``(ny, nx)`` arrays."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)


def make_grid(nx: int, ny: int, lx: float, ly: float) -> Grid:
    return Grid(int(nx), int(ny), float(lx), float(ly))


class Field:
    """Cell-centred scalar on a grid. Values are copied and checked on ingest."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values) -> None:
        arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
        if arr.size != grid.size:
            raise ValueError(f"expected {grid.size} values for a {grid.nx}x{grid.ny} grid, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field contains NaN or Inf")
        self.grid = grid
        self.values = arr

    @classmethod
    def constant(cls, grid: Grid, value: float) -> Field:
        return cls(grid, np.full(grid.size, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> Field:
        x, y = grid.centers()
        return cls(grid, np.broadcast_to(fn(x, y), grid.shape))

    @classmethod
    def _wrap(cls, grid: Grid, arr: np.ndarray) -> Field:
        # Trusted constructor for solver internals; arr must be finite float64.
        obj = cls.__new__(cls)
        obj.grid = grid
        obj.values = np.ascontiguousarray(arr, dtype=np.float64).reshape(-1)
        return obj

    @property
    def array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def copy(self) -> Field:
        return Field._wrap(self.grid, self.values.copy())

    def __repr__(self) -> str:
        return f"Field({self.grid.nx}x{self.grid.ny}, min={self.values.min():.6g}, max={self.values.max():.6g})"


def integrate(f: Field) -> float:
    """Midpoint-rule integral over the domain."""
    return float(f.grid.cell_area * np.sum(f.values))


def norm_lp(f: Field, p: float) -> float:
    if p < 1:
        raise ValueError(f"norm_lp needs p >= 1, got {p}")
    a = np.abs(f.values)
    if p == 1:
        return float(f.grid.cell_area * a.sum())
    if p == 2:
        return math.sqrt(f.grid.cell_area * float(np.dot(a, a)))
    return float((f.grid.cell_area * np.sum(a**p)) ** (1.0 / p))


def norm_linf(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def grad_sq_norm(f: Field) -> float:
    """Squared L2 norm of the face gradient (Neumann faces contribute nothing)."""
    a = f.array
    g = f.grid
    gx = (a[:, 1:] - a[:, :-1]) / g.hx
    gy = (a[1:, :] - a[:-1, :]) / g.hy
    return g.cell_area * (float(np.sum(gx * gx)) + float(np.sum(gy * gy)))


def norm_w12(f: Field) -> float:
    return math.sqrt(norm_lp(f, 2) ** 2 + grad_sq_norm(f))


@dataclass(frozen=True)
class Params:
    """Physical constants and time-stepping controls.

    ``d_w`` is the chemoattractant diffusivity, ``alpha`` its decay rate,
    ``theta`` the switching equilibrium ratio (u = theta * v at equilibrium)
    and ``gamma`` the switching rate. ``gamma`` may be ``inf`` for the
    limit system.
    """

    d_w: float = 1.0
    alpha: float = 1.0
    theta: float = 1.0
    gamma: float = 1.0
    dt: float = 1e-3
    t_end: float = 1.0
    cfl_safety: float = 0.25
    diag_every: int = 1

    def __post_init__(self) -> None:
        for name in ("d_w", "alpha", "theta", "gamma", "dt", "t_end"):
            val = getattr(self, name)
            if not (val > 0) or math.isnan(val):
                raise ValueError(f"{name} must be positive, got {val}")
        for name in ("d_w", "alpha", "theta", "dt", "t_end"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not (0 < self.cfl_safety <= 1):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if int(self.diag_every) != self.diag_every or self.diag_every < 1:
            raise ValueError(f"diag_every must be a positive integer, got {self.diag_every}")

    @property
    def kappa(self) -> float:
        """theta / (1 + theta): diffusion and sensitivity of the limit system."""
        return self.theta / (1.0 + self.theta)

    def replace(self, **changes) -> Params:
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(changes)
        return Params(**vals)


def _check_nonneg(name: str, f: Field) -> None:
    if f.values.min() < 0:
        raise ValueError(f"{name} has negative entries (min {f.values.min():.3e})")


@dataclass(frozen=True)
class StateFull:
    t: float
    u: Field
    v: Field
    w: Field

    def __post_init__(self) -> None:
        if not (self.u.grid == self.v.grid == self.w.grid):
            raise ValueError("u, v, w must share a grid")
        for name in ("u", "v", "w"):
            _check_nonneg(name, getattr(self, name))

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass(frozen=True)
class StateLimit:
    t: float
    n: Field
    w: Field

    def __post_init__(self) -> None:
        if self.n.grid != self.w.grid:
            raise ValueError("n and w must share a grid")
        _check_nonneg("n", self.n)
        _check_nonneg("w", self.w)

    @property
    def grid(self) -> Grid:
        return self.n.grid


DIAG_COLUMNS = (
    "t",
    "mass_n",
    "l2_u",
    "l2_v",
    "l2_n",
    "w12_w",
    "linf_n",
    "entropy_u",
    "entropy_v",
    "liapunov",
    "dissipation",
    "e_l2",
    "p_gamma",
)


@dataclass(frozen=True)
class DiagRecord:
    t: float
    mass_n: float
    l2_u: float
    l2_v: float
    l2_n: float
    w12_w: float
    linf_n: float
    entropy_u: float
    entropy_v: float
    liapunov: float
    dissipation: float
    e_l2: float
    p_gamma: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in DIAG_COLUMNS)


@dataclass
class StepReport:
    dt_used: float
    cg_iters_u: int
    cg_iters_w: int
    max_n: float
    cfl_limit: float
