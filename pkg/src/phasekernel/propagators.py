"""Free-particle and harmonic-oscillator momentum-space propagators.

Free particle (initial momentum p0, final p1, hbar = m = 1): the kernel
has the kinetic blocks, drift (0, (p0/t)(s - t)), constant phase
-i p0^2 t / 2 and the momentum pin (0, 1/t) at value p1 - p0.  The pin
self-pairing vanishes under the exact inverse, so the inverse's pp block is
shifted by eps > 0 (the shift is applied to the INVERSE, and the shifted
operator itself is never needed).  The regularized expectation is

    sqrt(t / (2 pi eps)) exp(-t (p1-p0)^2 / (2 eps)) exp(-i p0^2 t / 2)
      * exp(-(eps p0^2 / (2 t^2)) * t^3/3)
      * exp((p0^2 eps / (2 t^3)) * (t^2/2)^2)
      * exp(-i (p0/t)(p1-p0) t^2/2),

a Gaussian family in p1 that tends weakly to delta(p1 - p0) times the
action phase as eps -> 0: the free particle conserves momentum.

Harmonic oscillator (V(x) = k x^2 / 2, p0 = 0): with omega = sqrt(k) and
away from the caustic times t = (2m-1) pi / (2 omega),

    G(p1, t) = sqrt(1 / (2 pi i omega sin(omega t)))
               * exp(i p1^2 / (2 omega tan(omega t))),

which is the momentum-space Green's function of

    i dG/dt = (p^2 / 2) G - (k / 2) d^2G/dp^2,

the Schrodinger equation with x^2 acting as -d^2/dp^2.  The transform at
general f combines this closed prefactor with grid pairings; at f = 0 the
grid drops out entirely, so the expectation equals the closed form to
machine precision (the prefactor identity is cos * tan = sin, all principal
branches on the first caustic window).
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CausticBranchWarning, GridMismatch, InvalidParameter
from .gausskernel import GaussKernelSpec, TTransformValue, t_transform
from .operators import (
    BlockOperator,
    assemble_K_free,
    assemble_L_ho,
    caustic_branch,
    closed_inverse_free,
    closed_inverse_ho,
    require_nonsingular,
)
from .oracle import weak_delta_pairing
from .timegrid import (
    DiscreteFunction,
    PhaseFunction,
    TestFunctionSpec,
    TimeGrid,
    build_grid,
    evaluate_test_function,
    indicator,
    pair_phase,
    zero_function,
    zero_phase,
)

DEFAULT_GRID_N = 500


@dataclass(frozen=True)
class FreeParams:
    """Free particle: initial momentum p0, final p1, time t, regularization eps."""

    p0: float
    p1: float
    t: float
    eps: float

    def __post_init__(self) -> None:
        if not (self.t > 0):
            raise InvalidParameter(f"t must be positive, got {self.t}")
        if not (self.eps > 0):
            raise InvalidParameter(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class HOParams:
    """Oscillator: strength k in V = k x^2 / 2, time t, final momentum p1.

    The initial momentum is fixed to zero.  Construction rejects caustic
    times.
    """

    k: float
    t: float
    p1: float

    def __post_init__(self) -> None:
        if not (self.k > 0):
            raise InvalidParameter(f"k must be positive, got {self.k}")
        if not (self.t > 0):
            raise InvalidParameter(f"t must be positive, got {self.t}")
        require_nonsingular(self.k, self.t)


def momentum_pin(grid: TimeGrid) -> PhaseFunction:
    """Pin direction (0, 1/t) that fixes the final momentum."""
    ind = indicator(grid, 0.0, grid.t_end)
    return PhaseFunction(zero_function(grid), (1.0 / grid.t_end) * ind)


def free_drift(grid: TimeGrid, p0: float) -> PhaseFunction:
    """Drift (0, (p0/t)(s - t)) produced by expanding the kinetic action."""
    t = grid.t_end
    gp = (p0 / t) * (grid.nodes - t)
    return PhaseFunction(zero_function(grid), DiscreteFunction(grid, gp.astype(complex)))


def free_spec(grid: TimeGrid, params: FreeParams) -> GaussKernelSpec:
    return GaussKernelSpec(
        K=assemble_K_free(grid),
        L=BlockOperator.zero(grid),
        g=free_drift(grid, params.p0),
        c=-0.5j * params.p0**2 * params.t,
        pins=((momentum_pin(grid), params.p1 - params.p0),),
    )


@lru_cache(maxsize=8)
def _free_inverse_eps(t: float, n: int, eps: float) -> BlockOperator:
    return closed_inverse_free(build_grid(t, n)).with_pp_shift(eps)


def free_t_transform_eps(params: FreeParams, f: PhaseFunction) -> TTransformValue:
    """Transform of the eps-regularized free kernel at f (det factor 1)."""
    grid = f.grid
    if grid.t_end != params.t:
        raise GridMismatch(
            f"f lives on [0, {grid.t_end}) but the particle runs to t = {params.t}"
        )
    spec = free_spec(grid, params)
    ninv = _free_inverse_eps(grid.t_end, grid.n, params.eps)
    return t_transform(spec, ninv, 1.0 + 0j, f)


def free_expectation_eps(params: FreeParams, grid_n: int = DEFAULT_GRID_N) -> complex:
    """Generalized expectation: the transform at f = 0 (same code path)."""
    grid = build_grid(params.t, grid_n)
    return free_t_transform_eps(params, zero_phase(grid)).value


def free_expectation_reference(params: FreeParams) -> complex:
    """Factored closed form of the expectation with the elementary integrals
    int (s-t) ds = -t^2/2 and int (s-t)^2 ds = t^3/3 done analytically."""
    p0, p1, t, eps = params.p0, params.p1, params.t, params.eps
    dp = p1 - p0
    amp = math.sqrt(t / (2 * math.pi * eps)) * math.exp(-t * dp**2 / (2 * eps))
    damping = math.exp(-(eps / (2 * t**2)) * p0**2 * (t**3 / 3.0))
    recoil = math.exp((p0**2 * eps / (2 * t**3)) * (t**2 / 2.0) ** 2)
    phase = cmath.exp(-0.5j * p0**2 * t) * cmath.exp(-1j * (p0 / t) * dp * (t**2 / 2.0))
    return amp * damping * recoil * phase


def _warn_caustic(k: float, t: float) -> None:
    branch = caustic_branch(k, t)
    if branch > 0:
        warnings.warn(
            f"t = {t} lies past caustic {branch}; principal-branch value returned, "
            "accumulated caustic phase not tracked",
            CausticBranchWarning,
            stacklevel=3,
        )


def ho_closed_pin_gram(k: float, t: float) -> complex:
    """Closed form i sqrt(k) tan(sqrt(k) t) of the pin self-pairing."""
    w = math.sqrt(k)
    return 1j * w * math.tan(w * t)


def ho_detfactor(k: float, t: float) -> complex:
    """det(Id + L (Id+K)^{-1})^{-1/2} = cos(sqrt(k) t)^{-1/2}, principal branch."""
    return 1.0 / np.sqrt(complex(require_nonsingular(k, t)))


def ho_t_transform(params: HOParams, f: PhaseFunction) -> TTransformValue:
    """Oscillator transform at f.

    The pin Gram element and the determinant factor are taken in closed form
    (their product is the displayed prefactor sqrt(1/(2 pi i sqrt(k)
    sin(sqrt(k) t)))); the f-dependence enters through grid pairings with
    the closed-form inverse.  At f = 0 this reduces to `ho_propagator`
    exactly.
    """
    grid = f.grid
    if grid.t_end != params.t:
        raise GridMismatch(
            f"f lives on [0, {grid.t_end}) but the oscillator runs to t = {params.t}"
        )
    k, t = params.k, params.t
    _warn_caustic(k, t)
    detfactor = ho_detfactor(k, t)
    m = ho_closed_pin_gram(k, t)
    ninv = closed_inverse_ho(grid, k)
    nf = ninv.apply(f)
    quad = cmath.exp(-0.5 * pair_phase(f, nf))
    u = 1j * params.p1 + pair_phase(momentum_pin(grid), nf)
    pin = 1.0 / np.sqrt(2 * np.pi * m) * cmath.exp(0.5 * u**2 / m)
    value = detfactor * quad * pin
    return TTransformValue(
        value=complex(value),
        det_factor=complex(detfactor),
        quad_factor=quad,
        pin_factor=complex(pin),
        const_factor=1.0 + 0j,
        pin_matrix=np.array([[m]], dtype=complex),
    )


def ho_spec(grid: TimeGrid, params: HOParams) -> GaussKernelSpec:
    """Grid-level kernel spec of the oscillator (for cross-checks)."""
    return GaussKernelSpec(
        K=assemble_K_free(grid),
        L=assemble_L_ho(grid, params.k),
        g=zero_phase(grid),
        c=0j,
        pins=((momentum_pin(grid), params.p1),),
    )


def _ho_values(k: float, t: float, p: np.ndarray) -> np.ndarray:
    w = math.sqrt(k)
    pref = np.sqrt(1.0 / (2 * np.pi * 1j * w * math.sin(w * t)))
    return pref * np.exp(1j * np.asarray(p) ** 2 / (2 * w * math.tan(w * t)))


def ho_propagator(params: HOParams) -> complex:
    """Closed form sqrt(1/(2 pi i w sin(w t))) exp(i p1^2 / (2 w tan(w t)))."""
    require_nonsingular(params.k, params.t)
    _warn_caustic(params.k, params.t)
    return complex(_ho_values(params.k, params.t, np.array(params.p1)))


def schrodinger_residual(params: HOParams, h_t: float, h_p: float) -> float:
    """|i dG/dt - (p^2/2) G + (k/2) d2G/dp2| by second-order central stencils.

    Both stencil times t +/- h_t must stay off the caustics.
    """
    if h_t <= 0 or h_p <= 0:
        raise InvalidParameter("stencil steps must be positive")
    k, t, p = params.k, params.t, params.p1
    require_nonsingular(k, t - h_t)
    require_nonsingular(k, t + h_t)
    g0 = complex(_ho_values(k, t, np.array(p)))
    dgdt = (
        complex(_ho_values(k, t + h_t, np.array(p)))
        - complex(_ho_values(k, t - h_t, np.array(p)))
    ) / (2 * h_t)
    d2gdp2 = (
        complex(_ho_values(k, t, np.array(p + h_p)))
        - 2 * g0
        + complex(_ho_values(k, t, np.array(p - h_p)))
    ) / h_p**2
    return abs(1j * dgdt - 0.5 * p**2 * g0 + 0.5 * k * d2gdp2)


def ho_free_limit(params: HOParams, test: TestFunctionSpec) -> complex:
    """Weak pairing of the oscillator propagator against a test function.

    For sqrt(k) t << 1 the propagator is a Fresnel delta family of width
    ~ sqrt(k t) around p = 0; the pairing therefore tends to test(0).  The
    quadrature window is +/- 6 (k t^2)^{1/4}, wide on the oscillation scale,
    and the step count tracks the edge phase so the oscillatory tails cancel
    in quadrature.
    """
    k, t = params.k, params.t
    if math.sqrt(k) * t >= 0.1:
        raise InvalidParameter("free-limit check needs sqrt(k) t < 0.1")
    window = 6.0 * (k * t**2) ** 0.25
    cycles = window**2 / (2 * math.pi * k * t) + 1
    steps = int(min(max(4096, 64 * math.ceil(cycles)), 2**18))

    def amplitude(p: np.ndarray) -> np.ndarray:
        return _ho_values(k, t, p)

    def testf(p: np.ndarray) -> np.ndarray:
        return evaluate_test_function(test, p)

    return weak_delta_pairing(amplitude, testf, -window, window, steps)
