"""Operator space: density states, the two real forms on L(H), and the
state-dependent statistics (means, covariances, commutator forms) built on them.

Everything works in reduced units ``HBAR = KB = 1``. Operators are plain
complex ``numpy`` arrays; :func:`hermitian` validates and symmetrizes them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeEigenvalue,
    NotHermitian,
    NotUnitTrace,
    ZeroSpread,
)

HBAR = 1.0
KB = 1.0

EIG_TOL = 1e-12
HERM_TOL = 1e-12
TRACE_TOL = 1e-6


def _square(a, name="operator"):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _check_dims(*ops):
    n = ops[0].shape[0]
    for op in ops[1:]:
        if op.shape != (n, n):
            raise DimensionMismatch(f"expected {n}x{n} operator, got {op.shape}")


def hermitian(a, name="operator") -> np.ndarray:
    """Return ``(a + a^dagger)/2`` after checking ``a`` is Hermitian to HERM_TOL.

    The tolerance is relative to the largest entry (floored at 1).
    """
    a = _square(a, name)
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.conj().T).max() > HERM_TOL * scale:
        raise NotHermitian(f"{name} is not Hermitian")
    return (a + a.conj().T) / 2


def projector(n: int, index: int) -> np.ndarray:
    """``|index><index|`` on an n-dimensional space."""
    p = np.zeros((n, n), dtype=complex)
    p[index, index] = 1.0
    return p


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


@dataclass(frozen=True)
class DensityState:
    """Unit-trace nonnegative density operator with cached spectral data.

    Eigenvalues below ``EIG_TOL`` are stored as exact zeros, so the range
    projector, the square root and the entropy operator all agree on which
    directions are populated.
    """

    rho: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sqrt_rho: np.ndarray
    range_projector: np.ndarray
    diagonal: bool = field(default=False, compare=False)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues))

    @property
    def is_pure(self) -> bool:
        return self.rank == 1

    @classmethod
    def _from_spectrum(cls, w, v, diagonal=False):
        w = np.where(w < EIG_TOL, 0.0, w)
        w = w / w.sum()
        if diagonal:
            rho = np.diag(w).astype(complex)
            sq = np.diag(np.sqrt(w)).astype(complex)
            rp = np.diag((w > 0).astype(float)).astype(complex)
        else:
            vh = v.conj().T
            rho = (v * w) @ vh
            rho = (rho + rho.conj().T) / 2
            sq = (v * np.sqrt(w)) @ vh
            rp = (v * (w > 0)) @ vh
        for arr in (rho, sq, rp, w, v):
            arr.setflags(write=False)
        return cls(rho, w, v, sq, rp, diagonal)

    @classmethod
    def from_probabilities(cls, p) -> "DensityState":
        """Diagonal state with eigenvalues ``p`` in the computational basis."""
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise DimensionMismatch("probabilities must be a non-empty vector")
        if abs(p.sum() - 1.0) > TRACE_TOL:
            raise NotUnitTrace(f"probabilities sum to {p.sum()}")
        if p.min() < -EIG_TOL:
            raise NegativeEigenvalue(f"negative probability {p.min()}")
        return cls._from_spectrum(p.copy(), np.eye(p.size, dtype=complex), diagonal=True)


def make_state(rho_raw) -> DensityState:
    """Validate a raw density matrix and cache its spectral decomposition."""
    rho = hermitian(rho_raw, "rho")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise NotUnitTrace(f"trace is {tr}")
    w, v = np.linalg.eigh(rho)
    if w.min() < -EIG_TOL:
        raise NegativeEigenvalue(f"eigenvalue {w.min():.3e} below -{EIG_TOL}")
    return DensityState._from_spectrum(w, v)


def as_state(x) -> DensityState:
    """Accept a DensityState, a probability vector or a density matrix."""
    if isinstance(x, DensityState):
        return x
    arr = np.asarray(x)
    if arr.ndim == 1:
        return DensityState.from_probabilities(arr)
    return make_state(arr)


# -- real forms on L(H) ------------------------------------------------------


def inner_product(F, G) -> float:
    """``(F|G) = Tr(F^dagger G + G^dagger F)/2``."""
    F = _square(F)
    G = _square(G)
    _check_dims(F, G)
    return float(np.vdot(F, G).real)


def bilinear_form(F, G) -> float:
    """``(F\\G) = i Tr(F^dagger G - G^dagger F)/2``, equal to ``(F|iG)``."""
    F = _square(F)
    G = _square(G)
    _check_dims(F, G)
    return float(-np.vdot(F, G).imag)


# -- state functionals -------------------------------------------------------


def _is_diag(a):
    return not np.any(a - np.diag(np.diagonal(a)))


def mean_value(state: DensityState, F) -> float:
    """``Tr(rho F)``."""
    F = hermitian(F)
    _check_dims(state.rho, F)
    if state.diagonal and _is_diag(F):
        return float(state.eigenvalues @ np.diagonal(F).real)
    return float(np.einsum("ij,ji->", state.rho, F).real)


def deviation_vector(state: DensityState, F) -> np.ndarray:
    """``sqrt(rho) (F - <F> I)``, the vector whose norm is the spread of F."""
    F = hermitian(F)
    _check_dims(state.rho, F)
    dF = F - mean_value(state, F) * np.eye(state.dim)
    if state.diagonal:
        return np.sqrt(state.eigenvalues)[:, None] * dF
    return state.sqrt_rho @ dF


def covariance(state: DensityState, F, G) -> float:
    """``Tr(rho {dF, dG})/2`` evaluated as ``(sqrt(rho) dF | sqrt(rho) dG)``."""
    return float(np.vdot(deviation_vector(state, F), deviation_vector(state, G)).real)


def commutator_form(state: DensityState, F, G) -> float:
    """``Tr(rho [F, G])/2i``."""
    return float(-np.vdot(deviation_vector(state, F), deviation_vector(state, G)).imag)


def spread(state: DensityState, F) -> float:
    return float(np.sqrt(max(covariance(state, F, F), 0.0)))


def correlation_coefficients(state: DensityState, F, G) -> tuple[float, float]:
    """Return ``(r_FG, c_FG)``: covariance and commutator form over the spreads."""
    xf = deviation_vector(state, F)
    xg = deviation_vector(state, G)
    vf = np.vdot(xf, xf).real
    vg = np.vdot(xg, xg).real
    if vf < EIG_TOL or vg < EIG_TOL:
        raise ZeroSpread(f"variances {vf:.3e}, {vg:.3e} below {EIG_TOL}")
    k = np.vdot(xf, xg)
    norm = np.sqrt(vf * vg)
    return float(k.real / norm), float(-k.imag / norm)


def moment_matrices(state: DensityState, ops):
    """Covariance and commutator-form matrices for a list of Hermitian operators.

    One Gram product over the stacked deviation vectors; entry ``[a, b]``
    equals ``covariance(state, ops[a], ops[b])`` (resp. ``commutator_form``).
    """
    X = np.stack([deviation_vector(state, op).ravel() for op in ops])
    K = X.conj() @ X.T
    return K.real.copy(), -K.imag.copy()


def entropy_operator(state: DensityState) -> np.ndarray:
    """``S = -KB P_{rho>0} ln(rho)``; zero eigenvalues contribute zero blocks."""
    w = state.eigenvalues
    logw = np.zeros_like(w)
    pos = w > 0
    logw[pos] = np.log(w[pos])
    if state.diagonal:
        return np.diag(-KB * logw).astype(complex)
    v = state.eigenvectors
    S = (v * (-KB * logw)) @ v.conj().T
    return (S + S.conj().T) / 2


def entropy(state: DensityState) -> float:
    """Von Neumann entropy ``-KB Tr(rho ln rho)`` from the cached spectrum."""
    w = state.eigenvalues[state.eigenvalues > 0]
    return float(-KB * np.sum(w * np.log(w)))
