"""T-transforms of generalized Gauss kernels with drift, phase and delta pins.

A kernel is specified by block operators K and L, a drift g, a constant
phase exponent c and a list of pins (eta_j, y_j).  Writing N = Id + K + L
and M_ij = (eta_i, N^{-1} eta_j) for the pin Gram matrix, the transform at a
test pair f is

    T(f) = detfactor * (2 pi)^{-J/2} det(M)^{-1/2}
           * exp(-1/2 ((f+g), N^{-1} (f+g)))
           * exp(+1/2 u^T M^{-1} u) * exp(c),

    u_j  = i y_j + (eta_j, N^{-1} (f+g)),

where detfactor = det(Id + L (Id + K)^{-1})^{-1/2} is supplied by the
caller.  Sign convention: the pin exponent carries a PLUS sign.  Completing
the square in the defining lambda-integral of a delta pin,

    (1/2pi) int exp(-i lambda y) exp(-m lambda^2 / 2 - a lambda) d lambda
        = (2 pi m)^{-1/2} exp(+ (a + i y)^2 / (2 m)),

and the same convention reproduces both the closed-form delta transform
(`donsker_t_transform`, where the square appears as -(i<eta,f> - y)^2 =
+u^2) and the decaying Gaussian envelope of the free-particle expectation.
The finite-dimensional oracle adjudicates the sign independently.

All complex square roots take the principal branch (argument in (-pi, pi]),
in particular i^{-1/2} = exp(-i pi / 4).

The normalized exponential behind detfactor is never materialized as a
function of the noise; it exists here only through this formula.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BranchCrossing,
    DegenerateDeterminant,
    GridMismatch,
    InvalidParameter,
    PinDegenerate,
)
from .operators import BlockOperator
from .timegrid import PhaseFunction, norm2_abs, pair_phase, zero_phase

_PIN_ORTHO_TOL = 1e-10
_ADMISSIBLE_TOL = 1e-12


@dataclass(frozen=True)
class GaussKernelSpec:
    """Data of one generalized Gauss kernel with pins.

    Pins must be pairwise orthogonal under the bilinear pairing and nonzero;
    non-orthogonal input is rejected rather than orthogonalized silently.
    """

    K: BlockOperator
    L: BlockOperator
    g: PhaseFunction
    c: complex = 0j
    pins: tuple[tuple[PhaseFunction, float], ...] = ()

    def __post_init__(self) -> None:
        grid = self.K.grid
        for other in (self.L.grid, self.g.grid, *(eta.grid for eta, _ in self.pins)):
            if other != grid:
                raise GridMismatch("all members of a kernel spec must share one grid")
        etas = [eta for eta, _ in self.pins]
        norms = [abs(pair_phase(eta, eta)) for eta in etas]
        for j, nrm in enumerate(norms):
            if nrm <= _PIN_ORTHO_TOL:
                raise InvalidParameter(f"pin {j} is numerically zero")
        for i in range(len(etas)):
            for j in range(i + 1, len(etas)):
                cross = abs(pair_phase(etas[i], etas[j]))
                if cross > _PIN_ORTHO_TOL * max(1.0, norms[i], norms[j]):
                    raise InvalidParameter(
                        f"pins {i} and {j} are not orthogonal (pairing {cross:.3e})"
                    )
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "pins", tuple((eta, float(y)) for eta, y in self.pins))

    @property
    def grid(self):
        return self.K.grid


@dataclass(frozen=True)
class TTransformValue:
    """One transform evaluation with its factor breakdown.

    value = det_factor * quad_factor * pin_factor * const_factor, exactly as
    multiplied; const_factor is exp(c).
    """

    value: complex
    det_factor: complex
    quad_factor: complex
    pin_factor: complex
    const_factor: complex
    pin_matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=complex))


def _check_admissible(m: np.ndarray) -> None:
    """Admissibility from the existence result: Re M positive definite, or
    Re M = 0 with a nonzero (invertible) imaginary part."""
    j = m.shape[0]
    scale = max(1.0, float(np.abs(m).max()))
    re = m.real
    if np.abs(re).max() <= _ADMISSIBLE_TOL * scale:
        if np.abs(m.imag).max() <= _ADMISSIBLE_TOL * scale:
            raise PinDegenerate("pin matrix vanishes; no Gaussian pin factor exists")
        if abs(np.linalg.det(m)) <= (_ADMISSIBLE_TOL * scale) ** j:
            raise PinDegenerate("purely imaginary pin matrix is singular")
        return
    sym = (re + re.T) / 2
    if np.linalg.eigvalsh(sym).min() <= 0:
        raise PinDegenerate("real part of the pin matrix is not positive definite")


def pin_matrix(spec: GaussKernelSpec, ninv: BlockOperator) -> np.ndarray:
    """Gram matrix M_ij = (eta_i, N^{-1} eta_j); raises if inadmissible."""
    if ninv.grid != spec.grid:
        raise GridMismatch("inverse operator lives on a different grid")
    etas = [eta for eta, _ in spec.pins]
    j = len(etas)
    m = np.empty((j, j), dtype=complex)
    images = [ninv.apply(eta) for eta in etas]
    for a in range(j):
        for b in range(j):
            m[a, b] = pair_phase(etas[a], images[b])
    if j:
        _check_admissible(m)
    return m


def t_transform(
    spec: GaussKernelSpec,
    ninv: BlockOperator,
    detfactor: complex,
    f: PhaseFunction,
) -> TTransformValue:
    """Evaluate the transform at f; see the module formula.

    `ninv` must invert Id + K + L and `detfactor` must be the square-rooted
    reciprocal determinant consistent with K, L (1 when L = 0).
    """
    if detfactor == 0:
        raise DegenerateDeterminant("determinant prefactor is zero")
    if f.grid != spec.grid or ninv.grid != spec.grid:
        raise GridMismatch("f and the inverse must live on the spec's grid")
    h = f + spec.g
    nh = ninv.apply(h)
    quad = cmath.exp(-0.5 * pair_phase(h, nh))
    pins = spec.pins
    if pins:
        m = pin_matrix(spec, ninv)
        u = np.array(
            [1j * y + pair_phase(eta, nh) for eta, y in pins], dtype=complex
        )
        det_m = np.linalg.det(m)
        pin = (
            (2 * np.pi) ** (-len(pins) / 2)
            / np.sqrt(det_m)
            * cmath.exp(0.5 * complex(u @ np.linalg.solve(m, u)))
        )
    else:
        m = np.zeros((0, 0), dtype=complex)
        pin = 1.0 + 0j
    const = cmath.exp(spec.c)
    value = complex(detfactor) * quad * pin * const
    return TTransformValue(
        value=value,
        det_factor=complex(detfactor),
        quad_factor=quad,
        pin_factor=complex(pin),
        const_factor=const,
        pin_matrix=m,
    )


def donsker_t_transform(eta: PhaseFunction, x: float, f: PhaseFunction) -> complex:
    """Closed-form transform of the delta pin delta(<eta, .> - x):

    (2 pi <eta,eta>)^{-1/2} exp(-(i<eta,f> - x)^2 / (2<eta,eta>) - <f,f>/2).
    """
    m = pair_phase(eta, eta)
    if abs(m) <= _ADMISSIBLE_TOL:
        raise PinDegenerate("pin direction has vanishing self-pairing")
    a = pair_phase(eta, f)
    return (
        1.0
        / np.sqrt(2 * np.pi * m)
        * cmath.exp(-((1j * a - x) ** 2) / (2 * m) - 0.5 * pair_phase(f, f))
    )


@dataclass(frozen=True)
class RayFit:
    """Quadratic fit of log T along one ray, with the max fit residual."""

    c0: complex
    c1: complex
    c2: complex
    residual: float


def ray_restriction(
    spec: GaussKernelSpec,
    ninv: BlockOperator,
    detfactor: complex,
    f: PhaseFunction,
    g2: PhaseFunction,
    samples: int,
) -> RayFit:
    """Fit log T(f + lambda g2) over real lambda in [-1, 1] to a quadratic.

    The exponent of the transform is quadratic in f, so the residual is
    machine-level for every admissible spec; a large residual or a phase
    step above pi/2 between adjacent samples signals that the continuous
    branch of the logarithm was lost.
    """
    if samples < 4:
        raise InvalidParameter(f"need at least 4 samples, got {samples}")
    lams = np.linspace(-1.0, 1.0, samples)
    values = np.array(
        [t_transform(spec, ninv, detfactor, f + float(lam) * g2).value for lam in lams]
    )
    mags = np.abs(values)
    if np.any(mags == 0):
        raise BranchCrossing("transform vanished along the ray")
    phases = np.unwrap(np.angle(values))
    if np.abs(np.diff(phases)).max() > np.pi / 2:
        raise BranchCrossing(
            "phase step above pi/2 between adjacent ray samples; "
            "increase samples or shorten the ray"
        )
    logs = np.log(mags) + 1j * phases
    coeffs = np.polyfit(lams, logs, 2)
    residual = float(np.abs(np.polyval(coeffs, lams) - logs).max())
    return RayFit(c0=complex(coeffs[2]), c1=complex(coeffs[1]), c2=complex(coeffs[0]), residual=residual)


def growth_fit(
    spec: GaussKernelSpec,
    ninv: BlockOperator,
    detfactor: complex,
    g2: PhaseFunction,
    samples: int,
) -> tuple[float, float]:
    """Constants (C, D) with |T(z g2)| <= C exp(D |z|^2 ||g2||^2).

    From the exact quadratic log T(lambda g2) = c0 + c1 lambda + c2 lambda^2:
    |T| <= exp(Re c0 + |c1||z| + |c2||z|^2) and |c1||z| <= |c1|(1 + |z|^2)/2,
    so C = exp(Re c0 + |c1|/2) and D = (|c2| + |c1|/2) / ||g2||^2 with the
    real squared norm of g2.
    """
    fit = ray_restriction(spec, ninv, detfactor, zero_phase(spec.grid), g2, samples)
    nrm = norm2_abs(g2)
    if nrm == 0:
        raise InvalidParameter("growth direction g2 is zero")
    big_c = math.exp(fit.c0.real + abs(fit.c1) / 2)
    big_d = (abs(fit.c2) + abs(fit.c1) / 2) / nrm
    return big_c, big_d
