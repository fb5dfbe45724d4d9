"""The double-integral operator, block operators, inverses and determinants.

The central object is the operator

    (A f)(s) = int_s^t int_0^tau f(r) dr dtau,       s in [0, t),

whose bilinear form is int_0^t (int_0^tau f)(int_0^tau g) dtau, i.e. the
accumulated product of running integrals.  Its kernel is t - max(s, r), its
eigenfunctions are cos((m - 1/2) pi s / t) and its eigenvalues are

    lam_m = (t / ((m - 1/2) pi))^2,   m = 1, 2, ...

Everything downstream is built from A on the grid:

  * the kinetic block operator  [[-1, i], [i, -1 + (i/t^2) A]],
  * the quadratic-potential block  [[i k t^2, 0], [0, 0]],
  * closed-form inverses of (Id + K) and (Id + K + L),
  * the determinant  det(Id + L (Id + K)^{-1}) = prod_m (1 - k lam_m)
    = cos(sqrt(k) t), which diverges at the caustic times
    t = (2m - 1) pi / (2 sqrt(k)).

Discretization: `apply_A` uses cumulative midpoint sums; `matrix_A` is the
exact matrix of that linear map, which equals the Nystrom matrix of the
kernel t - max(s_i, s_j) with the diagonal lowered by h^2/4.  The weighted
matrix is symmetric positive definite, so the discrete spectrum is real and
the bilinear-form identity holds exactly at the discrete level.

Off-interval behaviour: on the complement of [0, t) all the operators act
as the identity.  That part is never materialized; every function this
package handles is supported on the grid, where the off-interval identity
contributes nothing beyond the plain Gaussian factor already present in the
transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GridMismatch, InvalidParameter, SingularTime
from .timegrid import DiscreteFunction, PhaseFunction, TimeGrid

# |cos(sqrt(k) t)| at or below this counts as a caustic.  This is the
# artifact's working definition of "near-singular"; exact caustics are the
# only mathematically excluded times.
SINGULAR_COS_TOL = 1e-7


def _require_same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if a != b:
        raise GridMismatch(f"grids differ: {a} vs {b}")


# ---------------------------------------------------------------------------
# the operator A
# ---------------------------------------------------------------------------

def apply_A(grid: TimeGrid, f: DiscreteFunction) -> DiscreteFunction:
    """Apply A by cumulative midpoint sums.

    Inner running integral at node j:  F_j = h * sum_{r<j} f_r + (h/2) f_j;
    outer integral from node i to t:   h * sum_{j>i} F_j + (h/2) F_i.
    With these half-cell end corrections, pair(f, apply_A(g)) equals
    sum_j w_j F_j G_j exactly, hence is symmetric and positive for real f=g.
    """
    _require_same_grid(grid, f.grid)
    h = grid.h
    v = f.values
    inner = h * np.cumsum(v) - (h / 2) * v
    rev = np.cumsum(inner[::-1])[::-1]
    out = h * rev - (h / 2) * inner
    return DiscreteFunction(grid, out)


@lru_cache(maxsize=16)
def _matrix_A_real(t_end: float, n: int) -> np.ndarray:
    h = t_end / n
    s = (np.arange(n) + 0.5) * h
    m = h * (t_end - np.maximum.outer(s, s)) - (h * h / 4.0) * np.eye(n)
    m.flags.writeable = False
    return m


def matrix_A(grid: TimeGrid) -> np.ndarray:
    """Exact matrix of apply_A, as a complex n x n array.

    Satisfies pair(f, apply_A(g)) = f^T diag(w) M g for all f, g, and
    diag(w) M is symmetric.
    """
    return _matrix_A_real(grid.t_end, grid.n).astype(complex)


def analytic_eigenvalue(t_end: float, m: int) -> float:
    """m-th eigenvalue (t / ((m - 1/2) pi))^2, 1-based."""
    return (t_end / ((m - 0.5) * math.pi)) ** 2


@dataclass(frozen=True)
class SpectralData:
    """Leading eigenpairs of A on a grid.

    Eigenvalues are decreasing and positive; eigenfunctions are orthonormal
    under the weighted pairing with real conjugation, with sign fixed so each
    starts positive at the left end.
    """

    grid: TimeGrid
    eigenvalues: np.ndarray
    eigenfunctions: tuple[DiscreteFunction, ...]

    def __post_init__(self) -> None:
        lam = np.asarray(self.eigenvalues, dtype=float)
        if np.any(lam <= 0) or np.any(np.diff(lam) > 0):
            raise InvalidParameter("eigenvalues must be positive and decreasing")
        vecs = np.stack([e.values.real for e in self.eigenfunctions])
        gram = (vecs * self.grid.weights) @ vecs.T
        if np.abs(gram - np.eye(len(self.eigenfunctions))).max() > 1e-8:
            raise InvalidParameter("eigenfunctions are not orthonormal under the weighted pairing")


@lru_cache(maxsize=16)
def _eigh_A(t_end: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    lam, vecs = np.linalg.eigh(_matrix_A_real(t_end, n))
    lam.flags.writeable = False
    vecs.flags.writeable = False
    return lam, vecs


def spectrum_A(grid: TimeGrid, count: int) -> SpectralData:
    """Leading `count` eigenpairs of the discretized A, largest first."""
    if count < 1 or count > grid.n:
        raise InvalidParameter(f"count must be in 1..{grid.n}, got {count}")
    lam, vecs = _eigh_A(grid.t_end, grid.n)
    order = np.argsort(lam)[::-1][:count]
    sqrt_h = math.sqrt(grid.h)
    funcs = []
    for idx in order:
        v = vecs[:, idx] / sqrt_h
        if v[0] < 0:
            v = -v
        funcs.append(DiscreteFunction(grid, v.astype(complex)))
    return SpectralData(grid, lam[order].copy(), tuple(funcs))


# ---------------------------------------------------------------------------
# block operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockOperator:
    """2 x 2 block of n x n complex matrices acting on (f_x, f_p) values.

    Blocks are action matrices: integral blocks already contain the
    quadrature weights, identity blocks are plain identities.  When
    `symmetric` is set, construction checks xx and pp symmetric and
    xp = px^T to 1e-12 relative, which makes the weighted bilinear form
    pair_phase(f, op(g)) symmetric on a uniform grid.
    """

    grid: TimeGrid
    xx: np.ndarray
    xp: np.ndarray
    px: np.ndarray
    pp: np.ndarray
    symmetric: bool = field(default=False)

    def __post_init__(self) -> None:
        n = self.grid.n
        blocks = {}
        for name in ("xx", "xp", "px", "pp"):
            blk = np.asarray(getattr(self, name), dtype=complex)
            if blk.shape != (n, n):
                raise InvalidParameter(f"block {name} must be {n} x {n}, got {blk.shape}")
            blk = blk.copy()
            blk.flags.writeable = False
            blocks[name] = blk
            object.__setattr__(self, name, blk)
        if self.symmetric:
            scale = max(np.abs(b).max() for b in blocks.values()) or 1.0
            tol = 1e-12 * scale
            if (
                np.abs(blocks["xx"] - blocks["xx"].T).max() > tol
                or np.abs(blocks["pp"] - blocks["pp"].T).max() > tol
                or np.abs(blocks["xp"] - blocks["px"].T).max() > tol
            ):
                raise InvalidParameter("blocks violate the declared symmetry")

    def apply(self, f: PhaseFunction) -> PhaseFunction:
        _require_same_grid(self.grid, f.grid)
        x, p = f.fx.values, f.fp.values
        return PhaseFunction(
            DiscreteFunction(self.grid, self.xx @ x + self.xp @ p),
            DiscreteFunction(self.grid, self.px @ x + self.pp @ p),
        )

    def with_pp_shift(self, eps: complex) -> "BlockOperator":
        """Return a copy with eps * Id added to the pp block."""
        return BlockOperator(
            self.grid,
            self.xx,
            self.xp,
            self.px,
            self.pp + eps * np.eye(self.grid.n),
            symmetric=self.symmetric,
        )

    def as_matrix(self) -> np.ndarray:
        """Dense 2n x 2n matrix in (x, p) block order."""
        return np.block([[self.xx, self.xp], [self.px, self.pp]])

    @staticmethod
    def zero(grid: TimeGrid) -> "BlockOperator":
        z = np.zeros((grid.n, grid.n), dtype=complex)
        return BlockOperator(grid, z, z, z, z, symmetric=True)

    @staticmethod
    def identity(grid: TimeGrid) -> "BlockOperator":
        eye = np.eye(grid.n, dtype=complex)
        z = np.zeros((grid.n, grid.n), dtype=complex)
        return BlockOperator(grid, eye, z, z, eye, symmetric=True)


def assemble_K_free(grid: TimeGrid) -> BlockOperator:
    """Kinetic block operator [[-1, i], [i, -1 + (i/t^2) A]] on the grid."""
    n = grid.n
    eye = np.eye(n, dtype=complex)
    a = matrix_A(grid)
    return BlockOperator(
        grid,
        xx=-eye,
        xp=1j * eye,
        px=1j * eye,
        pp=-eye + (1j / grid.t_end**2) * a,
        symmetric=True,
    )


def assemble_L_ho(grid: TimeGrid, k: float) -> BlockOperator:
    """Quadratic-potential block [[i k t^2, 0], [0, 0]]; k >= 0."""
    if k < 0:
        raise InvalidParameter(f"oscillator strength k must be >= 0, got {k}")
    n = grid.n
    z = np.zeros((n, n), dtype=complex)
    return BlockOperator(
        grid,
        xx=1j * k * grid.t_end**2 * np.eye(n, dtype=complex),
        xp=z,
        px=z,
        pp=z,
        symmetric=True,
    )


def closed_inverse_free(grid: TimeGrid) -> BlockOperator:
    """Closed-form inverse of (Id + K): i * [[A/t^2, -1], [-1, 0]] on the grid.

    The product identity (Id + K) N^{-1} = Id holds exactly at the matrix
    level, whatever the discretization of A.  The pin direction (0, 1/t)
    pairs to zero against its image, which is why the free case needs the
    eps-shifted copy (`with_pp_shift`).
    """
    n = grid.n
    eye = np.eye(n, dtype=complex)
    a = matrix_A(grid)
    return BlockOperator(
        grid,
        xx=1j * a / grid.t_end**2,
        xp=-1j * eye,
        px=-1j * eye,
        pp=np.zeros((n, n), dtype=complex),
        symmetric=True,
    )


def singular_cos(k: float, t: float) -> float:
    """cos(sqrt(k) t), whose zeros are the caustic times."""
    return math.cos(math.sqrt(k) * t)


def require_nonsingular(k: float, t: float) -> float:
    c = singular_cos(k, t)
    if abs(c) <= SINGULAR_COS_TOL:
        raise SingularTime(
            f"singular time: |cos(sqrt(k) t)| = {abs(c):.3e} <= {SINGULAR_COS_TOL} "
            f"at k={k}, t={t} (caustics at t = (2m-1) pi / (2 sqrt(k)))"
        )
    return c


def caustic_branch(k: float, t: float) -> int:
    """Number of caustic times below t; 0 on the principal window."""
    if k <= 0:
        return 0
    return int(math.floor(math.sqrt(k) * t / math.pi + 0.5))


@lru_cache(maxsize=16)
def _resolvent_kA(t_end: float, n: int, k: float) -> np.ndarray:
    """(k A - Id)^{-1} in the spectral basis of the discrete A."""
    lam, vecs = _eigh_A(t_end, n)
    r = (vecs * (1.0 / (k * lam - 1.0))) @ vecs.T
    r.flags.writeable = False
    return r


def closed_inverse_ho(grid: TimeGrid, k: float) -> BlockOperator:
    """Closed-form inverse of (Id + K + L) for oscillator strength k > 0.

    Built from R = (k A - 1)^{-1} in the spectral basis of A:
    N^{-1} = (1/i) [[A R / t^2, -R], [-R, k t^2 R]].  R exists away from the
    caustic times, where some k * lam_m crosses 1.
    """
    if k <= 0:
        raise InvalidParameter(f"oscillator strength k must be positive, got {k}")
    require_nonsingular(k, grid.t_end)
    t = grid.t_end
    r = _resolvent_kA(t, grid.n, k).astype(complex)
    a = matrix_A(grid)
    return BlockOperator(
        grid,
        xx=-1j * (a @ r) / t**2,
        xp=1j * r,
        px=1j * r,
        pp=-1j * k * t**2 * r,
        symmetric=True,
    )


# ---------------------------------------------------------------------------
# determinants and spectral sums
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FredholmDeterminant:
    """Reciprocal determinant 1 / det(Id + L (Id + K)^{-1}) both ways.

    `value` is the truncated eigenvalue product with its analytic tail
    correction, `closed_form` is 1 / cos(sqrt(k) t), `discrepancy` their
    relative difference.
    """

    value: complex
    closed_form: complex
    discrepancy: float

    def __complex__(self) -> complex:
        return complex(self.value)


def fredholm_det(k: float, t: float, terms: int) -> FredholmDeterminant:
    """Truncated product prod_{m<=terms} (1 - k lam_m), tail-corrected, inverted.

    The omitted log-tail is sum_{m>terms} log(1 - k lam_m) ~ -k sum lam_m,
    summed in closed form to -k t^2 / (pi^2 (terms - 1/2)).  The product
    terms decay like m^-2, so raw truncation alone converges far too slowly;
    with the correction, 1e5 terms agree with 1/cos(sqrt(k) t) to ~1e-10.
    """
    if k < 0:
        raise InvalidParameter(f"k must be >= 0, got {k}")
    if t <= 0:
        raise InvalidParameter(f"t must be positive, got {t}")
    if terms < 1:
        raise InvalidParameter(f"terms must be >= 1, got {terms}")
    closed = 1.0 / require_nonsingular(k, t)
    if k == 0:
        return FredholmDeterminant(1.0 + 0j, complex(closed), abs(1.0 - closed) / abs(closed))
    m = np.arange(1, terms + 1)
    factors = 1.0 - k * (t / ((m - 0.5) * np.pi)) ** 2
    product = float(np.prod(factors))
    tail_log = -k * t**2 / (np.pi**2 * (terms - 0.5))
    corrected = product * math.exp(tail_log)
    value = complex(1.0 / corrected)
    discrepancy = abs(value - closed) / abs(closed)
    return FredholmDeterminant(value, complex(closed), discrepancy)


def pin_gram_spectral(k: float, t: float, terms: int) -> complex:
    """Spectral-sum route to the momentum-pin self-pairing (eta, N^{-1} eta).

    Sums i (k/t^2) <e_m, 1>^2 / (1 - k lam_m) over the analytic eigenbasis
    with a closed-form tail, converging to i sqrt(k) tan(sqrt(k) t).
    """
    if k < 0:
        raise InvalidParameter(f"k must be >= 0, got {k}")
    if t <= 0:
        raise InvalidParameter(f"t must be positive, got {t}")
    if terms < 1:
        raise InvalidParameter(f"terms must be >= 1, got {terms}")
    if k == 0:
        return 0j
    require_nonsingular(k, t)
    m = np.arange(1, terms + 1)
    lam = (t / ((m - 0.5) * np.pi)) ** 2
    coeff2 = 2 * t / ((m - 0.5) * np.pi) ** 2  # <e_m, 1>^2
    partial = float(np.sum(coeff2 / (1.0 - k * lam)))
    # tail: terms behave like (2t/pi^2) (m - 1/2)^{-2} (1 + k lam_m + ...)
    s2 = 1.0 / (terms - 0.5)
    s4 = 1.0 / (3.0 * (terms - 0.5) ** 3)
    tail = (2 * t / np.pi**2) * (s2 + (k * t**2 / np.pi**2) * s4)
    return 1j * (k / t**2) * (partial + tail)
