"""Discrete design parameter space for wall thicknesses.

Each parameter varies on a regular grid between a lower and an upper bound.
Grid membership is handled through integer step indices so that repeated
increment/decrement actions never accumulate floating-point drift.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterator

import numpy as np

INCREMENT = 1
DECREMENT = -1

_REL_TOL = 1e-9


class ArityError(ValueError):
    """A thickness vector's length does not match the design space."""


class GridSizeError(ValueError):
    """Grid enumeration refused because the grid exceeds the configured cap."""


@dataclass(frozen=True)
class ParameterSpec:
    """One wall-thickness parameter: bounds and step size, all in mm."""

    name: str
    min: float
    max: float
    step: float

    def __post_init__(self):
        if not self.min < self.max:
            raise ValueError(f"{self.name}: min {self.min} must be < max {self.max}")
        if self.step <= 0:
            raise ValueError(f"{self.name}: step must be positive, got {self.step}")
        span = self.max - self.min
        k = round(span / self.step)
        if k < 1 or abs(span - k * self.step) > _REL_TOL * max(abs(span), 1.0):
            raise ValueError(
                f"{self.name}: range ({self.min}, {self.max}) is not an integer "
                f"multiple of step {self.step}"
            )

    @property
    def levels(self) -> int:
        """Number of grid points, endpoints included."""
        return round((self.max - self.min) / self.step) + 1

    def value_at(self, index: int) -> float:
        return self.min + index * self.step

    def index_of(self, value: float) -> int:
        """Grid index of ``value``; raises if it is not on the grid."""
        k = round((value - self.min) / self.step)
        if k < 0 or k >= self.levels or abs(self.value_at(k) - value) > _REL_TOL * max(
            abs(value), 1.0
        ):
            raise ValueError(f"{self.name}: {value} is not a grid point")
        return k


@dataclass(frozen=True)
class ThicknessVector:
    """Immutable wall-thickness assignment, one value per parameter (mm)."""

    values: tuple[float, ...]

    @classmethod
    def of(cls, values) -> "ThicknessVector":
        return cls(tuple(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class DesignAction:
    """Move one parameter up or down by its step size."""

    param_index: int
    direction: int  # INCREMENT or DECREMENT

    def __post_init__(self):
        if self.direction not in (INCREMENT, DECREMENT):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")


@dataclass(frozen=True)
class DesignSpace:
    """Ordered collection of parameters; order is fixed everywhere."""

    params: tuple[ParameterSpec, ...]

    @classmethod
    def of(cls, params) -> "DesignSpace":
        return cls(tuple(params))

    def __len__(self):
        return len(self.params)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def grid_size(self) -> int:
        n = 1
        for p in self.params:
            n *= p.levels
        return n

    def _check_arity(self, t: ThicknessVector):
        if len(t) != len(self.params):
            raise ArityError(
                f"expected {len(self.params)} thickness values, got {len(t)}"
            )

    def validate(self, t: ThicknessVector) -> bool:
        """True iff every component lies within its parameter's bounds."""
        self._check_arity(t)
        return all(p.min <= v <= p.max for p, v in zip(self.params, t.values))

    def clamp(self, t: ThicknessVector) -> ThicknessVector:
        """Clip each component into its bounds; in-range components unchanged."""
        self._check_arity(t)
        return ThicknessVector(
            tuple(min(max(v, p.min), p.max) for p, v in zip(self.params, t.values))
        )

    def is_grid_aligned(self, t: ThicknessVector) -> bool:
        self._check_arity(t)
        try:
            self.indices_of(t)
        except ValueError:
            return False
        return True

    def indices_of(self, t: ThicknessVector) -> tuple[int, ...]:
        self._check_arity(t)
        return tuple(p.index_of(v) for p, v in zip(self.params, t.values))

    def vector_at(self, indices) -> ThicknessVector:
        if len(indices) != len(self.params):
            raise ArityError(
                f"expected {len(self.params)} grid indices, got {len(indices)}"
            )
        for p, k in zip(self.params, indices):
            if not 0 <= k < p.levels:
                raise ValueError(f"{p.name}: grid index {k} out of range")
        return ThicknessVector(
            tuple(p.value_at(int(k)) for p, k in zip(self.params, indices))
        )

    def snap(self, t: ThicknessVector) -> ThicknessVector:
        """Nearest grid point (per component, after clamping into bounds)."""
        c = self.clamp(t)
        idx = [
            min(p.levels - 1, max(0, round((v - p.min) / p.step)))
            for p, v in zip(self.params, c.values)
        ]
        return self.vector_at(idx)

    def random_grid_sample(self, seed=None) -> ThicknessVector:
        """Uniform draw over the grid; deterministic for a fixed seed."""
        rng = np.random.default_rng(seed)
        idx = [int(rng.integers(p.levels)) for p in self.params]
        return self.vector_at(idx)

    def apply_action(self, t: ThicknessVector, action: DesignAction) -> ThicknessVector:
        """Move one component by one step, saturating at the bounds.

        A move that would exit the range returns the vector unchanged rather
        than failing, so the action space stays fixed at 2 * len(space).
        """
        if not 0 <= action.param_index < len(self.params):
            raise ArityError(f"param_index {action.param_index} out of range")
        idx = list(self.indices_of(t))
        p = self.params[action.param_index]
        k = idx[action.param_index] + action.direction
        if 0 <= k < p.levels:
            idx[action.param_index] = k
        return self.vector_at(idx)

    def enumerate_grid(self, cap: int = 10**6) -> Iterator[ThicknessVector]:
        """Yield every grid point exactly once, in lexicographic order.

        Refuses up front when the grid has more than ``cap`` points.
        """
        n = self.grid_size
        if n > cap:
            raise GridSizeError(f"grid has {n} points, exceeding the cap of {cap}")
        ranges = [range(p.levels) for p in self.params]
        for idx in itertools.product(*ranges):
            yield self.vector_at(idx)

    def normalize(self, t: ThicknessVector) -> np.ndarray:
        """Affinely map each component to [0, 1] over its bounds."""
        self._check_arity(t)
        return np.array(
            [(v - p.min) / (p.max - p.min) for p, v in zip(self.params, t.values)]
        )

    def midpoint(self) -> ThicknessVector:
        return ThicknessVector(tuple((p.min + p.max) / 2 for p in self.params))

    def to_json_obj(self) -> list:
        return [
            {"name": p.name, "min": p.min, "max": p.max, "step": p.step}
            for p in self.params
        ]

    @classmethod
    def from_json_obj(cls, obj) -> "DesignSpace":
        return cls(
            tuple(
                ParameterSpec(d["name"], float(d["min"]), float(d["max"]), float(d["step"]))
                for d in obj
            )
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_obj(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "DesignSpace":
        with open(path, encoding="utf-8") as f:
            return cls.from_json_obj(json.load(f))


def default_space() -> DesignSpace:
    """The seven-wall side sill space shipped with the package."""
    text = resources.files("sillopt.data").joinpath("default_space.json").read_text()
    return DesignSpace.from_json_obj(json.loads(text))


def reduced_space(levels: int = 5) -> DesignSpace:
    """Small three-wall space with ``levels`` grid points per parameter.

    Coarsened steps keep the grid tiny so brute-force enumeration stays cheap;
    used for optimizer cross-checks against exhaustive search.  The wall
    ranges span wide min/max ratios so the saturating energy law pushes the
    optimal trade-off away from the all-max corner, as in the full space.
    """
    specs = []
    for name, lo, hi in (("t1", 1.5, 3.0), ("t4", 1.0, 3.0), ("t5", 1.5, 3.5)):
        specs.append(ParameterSpec(name, lo, hi, (hi - lo) / (levels - 1)))
    return DesignSpace(tuple(specs))
