"""Uniform midpoint discretization of the time interval [0, t).

A `TimeGrid` carries cell midpoints and cell widths; the weighted sum of
nodal values is the composite midpoint rule, which is what every discrete
pairing in this package uses.  Midpoints avoid evaluating anything at the
interval endpoints, so indicator functions on [a, b) and the kinked kernel
of the double-integral operator have no boundary ambiguity.

All pairings are bilinear (no complex conjugation): ``pair(i*f, i*g)`` is
``-pair(f, g)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridMismatch, InvalidParameter


@lru_cache(maxsize=64)
def _grid_arrays(t_end: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    h = t_end / n
    nodes = (np.arange(n) + 0.5) * h
    weights = np.full(n, h)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@dataclass(frozen=True)
class TimeGrid:
    """Uniform midpoint grid with `n` cells on [0, t_end)."""

    t_end: float
    n: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.t_end) or self.t_end <= 0:
            raise InvalidParameter(f"t_end must be positive and finite, got {self.t_end}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidParameter(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "t_end", float(self.t_end))

    @property
    def h(self) -> float:
        return self.t_end / self.n

    @property
    def nodes(self) -> np.ndarray:
        return _grid_arrays(self.t_end, self.n)[0]

    @property
    def weights(self) -> np.ndarray:
        return _grid_arrays(self.t_end, self.n)[1]


def build_grid(t_end: float, n: int) -> TimeGrid:
    """Construct the uniform midpoint grid on [0, t_end) with n cells."""
    return TimeGrid(t_end, n)


@dataclass(frozen=True)
class DiscreteFunction:
    """Complex-valued function known at the grid nodes."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n,):
            raise InvalidParameter(
                f"values must have shape ({self.grid.n},), got {values.shape}"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __add__(self, other: "DiscreteFunction") -> "DiscreteFunction":
        _require_same_grid(self.grid, other.grid)
        return DiscreteFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "DiscreteFunction") -> "DiscreteFunction":
        _require_same_grid(self.grid, other.grid)
        return DiscreteFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> "DiscreteFunction":
        return DiscreteFunction(self.grid, self.values * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class PhaseFunction:
    """Pair (f_x, f_p) of discrete functions on one grid.

    The x slot is the space test direction, the p slot the momentum one;
    block operators act on the pair.
    """

    fx: DiscreteFunction
    fp: DiscreteFunction

    def __post_init__(self) -> None:
        _require_same_grid(self.fx.grid, self.fp.grid)

    @property
    def grid(self) -> TimeGrid:
        return self.fx.grid

    def __add__(self, other: "PhaseFunction") -> "PhaseFunction":
        return PhaseFunction(self.fx + other.fx, self.fp + other.fp)

    def __sub__(self, other: "PhaseFunction") -> "PhaseFunction":
        return PhaseFunction(self.fx - other.fx, self.fp - other.fp)

    def __mul__(self, scalar: complex) -> "PhaseFunction":
        return PhaseFunction(self.fx * scalar, self.fp * scalar)

    __rmul__ = __mul__


def _require_same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if a != b:
        raise GridMismatch(f"grids differ: {a} vs {b}")


def zero_function(grid: TimeGrid) -> DiscreteFunction:
    return DiscreteFunction(grid, np.zeros(grid.n, dtype=complex))


def zero_phase(grid: TimeGrid) -> PhaseFunction:
    z = zero_function(grid)
    return PhaseFunction(z, z)


def phase_from_values(grid: TimeGrid, fx: np.ndarray, fp: np.ndarray) -> PhaseFunction:
    return PhaseFunction(DiscreteFunction(grid, fx), DiscreteFunction(grid, fp))


def indicator(grid: TimeGrid, a: float, b: float) -> DiscreteFunction:
    """Indicator of [a, b) sampled at the nodes; a node belongs iff a <= node < b."""
    if a > b:
        raise InvalidParameter(f"indicator needs a <= b, got a={a}, b={b}")
    nodes = grid.nodes
    values = ((nodes >= a) & (nodes < b)).astype(complex)
    return DiscreteFunction(grid, values)


def pair(f: DiscreteFunction, g: DiscreteFunction) -> complex:
    """Bilinear midpoint pairing sum_i w_i f_i g_i (no conjugation)."""
    _require_same_grid(f.grid, g.grid)
    return complex(np.sum(f.grid.weights * f.values * g.values))


def pair_phase(f: PhaseFunction, g: PhaseFunction) -> complex:
    """Bilinear pairing on pairs: pair(fx, gx) + pair(fp, gp)."""
    return pair(f.fx, g.fx) + pair(f.fp, g.fp)


def norm2_abs(f: PhaseFunction) -> float:
    """Real squared norm sum_i w_i (|fx_i|^2 + |fp_i|^2)."""
    w = f.grid.weights
    return float(np.sum(w * (np.abs(f.fx.values) ** 2 + np.abs(f.fp.values) ** 2)))


@dataclass(frozen=True)
class BumpTerm:
    """One Gaussian bump a * exp(-b (s - c)^2) with b > 0."""

    a: complex
    b: float
    c: float

    def __post_init__(self) -> None:
        if not (self.b > 0):
            raise InvalidParameter(f"bump width parameter b must be positive, got {self.b}")


@dataclass(frozen=True)
class TestFunctionSpec:
    """Finite sum of Gaussian bumps, the package's smooth test functions."""

    terms: tuple[BumpTerm, ...] = ()

    @staticmethod
    def from_dict(data: dict) -> "TestFunctionSpec":
        try:
            raw = data["terms"]
        except (TypeError, KeyError) as exc:
            raise InvalidParameter("test function spec must have a 'terms' list") from exc
        terms = []
        for item in raw:
            try:
                a = complex(float(item.get("a_re", 0.0)), float(item.get("a_im", 0.0)))
                term = BumpTerm(a=a, b=float(item["b"]), c=float(item["c"]))
            except (TypeError, KeyError, ValueError) as exc:
                raise InvalidParameter(f"malformed bump term {item!r}") from exc
            terms.append(term)
        return TestFunctionSpec(tuple(terms))

    def to_dict(self) -> dict:
        return {
            "terms": [
                {"a_re": t.a.real, "a_im": t.a.imag, "b": t.b, "c": t.c}
                for t in self.terms
            ]
        }

    @staticmethod
    def from_json_file(path: str) -> "TestFunctionSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return TestFunctionSpec.from_dict(json.load(fh))


def evaluate_test_function(spec: TestFunctionSpec, points: np.ndarray) -> np.ndarray:
    """Evaluate the bump sum at arbitrary real points."""
    points = np.asarray(points, dtype=float)
    out = np.zeros(points.shape, dtype=complex)
    for term in spec.terms:
        out += term.a * np.exp(-term.b * (points - term.c) ** 2)
    return out


def sample_test_function(grid: TimeGrid, spec: TestFunctionSpec) -> DiscreteFunction:
    """Sample the bump sum at the grid nodes; the empty spec gives zero."""
    return DiscreteFunction(grid, evaluate_test_function(spec, grid.nodes))


def gaussian_bump(a: complex = 1.0, b: float = 1.0, c: float = 0.5) -> TestFunctionSpec:
    """Convenience single-term spec."""
    return TestFunctionSpec((BumpTerm(complex(a), b, c),))
