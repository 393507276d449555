"""Truncated number-basis numerics used only to check closed-form results.

Nothing here is fast or clever on purpose: dense matrices, matrix exponentials
and Hermitian eigendecompositions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import InvalidParameterError, TailMassError

TRACE_DEFICIT_TOL = 1e-8
EIG_FLOOR = 1e-14
SUPPORT_TOL = 1e-8
NEG_EIG_TOL = 1e-8


@dataclass(frozen=True)
class FockDensityMatrix:
    """Density matrix on levels ``0..cutoff``.

    States built by :func:`build_displaced_thermal` also carry their matrix
    logarithm and ``Tr rho ln rho``, both obtained from the known spectrum in the
    padded construction space.  Tiny eigenvalues of a truncated thermal state are
    far below what a dense eigensolver resolves, so this matters for
    ``ln sigma`` whenever ``sigma`` is colder than ``rho``.
    """

    cutoff: int
    matrix: np.ndarray
    log_matrix: np.ndarray | None = None
    entropy_term: float | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.cutoff + 1, self.cutoff + 1):
            raise InvalidParameterError("matrix shape does not match cutoff")
        m = 0.5 * (m + m.conj().T)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        if self.log_matrix is not None:
            lm = np.asarray(self.log_matrix, dtype=complex)
            lm = 0.5 * (lm + lm.conj().T)
            lm.flags.writeable = False
            object.__setattr__(self, "log_matrix", lm)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def photon_number_distribution(self) -> np.ndarray:
        return np.diag(self.matrix).real.copy()

    def mean_photon_number(self) -> float:
        return float(np.arange(self.cutoff + 1) @ self.photon_number_distribution())

    def normalized(self) -> "FockDensityMatrix":
        return FockDensityMatrix(self.cutoff, self.matrix / self.trace)


def default_cutoff(nbar: float, alpha: complex) -> int:
    return math.ceil(10 * (nbar + abs(alpha) ** 2 + 1)) + 30


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def displacement_operator(alpha: complex, dim: int) -> np.ndarray:
    a = annihilation(dim)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def build_displaced_thermal(
    nbar: float, alpha: complex, cutoff: int | None = None, pad: int = 40
) -> FockDensityMatrix:
    """Displaced thermal state on levels ``0..cutoff``.

    The displacement is exponentiated in a space ``pad`` levels larger and then
    projected, so the retained block is free of edge artefacts from truncation.
    """
    if nbar < 0:
        raise InvalidParameterError("nbar must be >= 0")
    if cutoff is None:
        cutoff = default_cutoff(nbar, alpha)
    if cutoff < 1:
        raise InvalidParameterError("cutoff must be >= 1")
    dim = cutoff + 1 + pad
    n = np.arange(dim)
    if nbar == 0:
        weights = (n == 0).astype(float)
    else:
        weights = np.exp(n * math.log(nbar / (nbar + 1.0))) / (nbar + 1.0)
    D = displacement_operator(complex(alpha), dim)
    keep = slice(0, cutoff + 1)
    rho = ((D * weights) @ D.conj().T)[keep, keep]
    deficit = 1.0 - float(np.trace(rho).real)
    if deficit > TRACE_DEFICIT_TOL:
        raise TailMassError(f"cutoff {cutoff} discards {deficit:.2e} of the trace")
    if nbar == 0:
        return FockDensityMatrix(cutoff, rho, None, 0.0)
    log_w = n * math.log(nbar / (nbar + 1.0)) - math.log1p(nbar)
    log_rho = ((D * log_w) @ D.conj().T)[keep, keep]
    return FockDensityMatrix(cutoff, rho, log_rho, float(np.sum(weights * log_w)))


def numeric_relative_entropy(rho: FockDensityMatrix, sigma: FockDensityMatrix) -> float:
    """``Tr rho (ln rho - ln sigma)`` with ``0 ln 0 = 0``; ``inf`` off the support of ``sigma``."""
    if rho.cutoff != sigma.cutoff:
        raise InvalidParameterError("states must share a cutoff")
    if rho.entropy_term is not None:
        s_term = rho.entropy_term
    else:
        wr = np.linalg.eigvalsh(rho.matrix)
        keep = wr > EIG_FLOOR
        s_term = float(np.sum(wr[keep] * np.log(wr[keep])))

    if sigma.log_matrix is not None:
        cross = float(np.real(np.sum(rho.matrix * sigma.log_matrix.T)))
        return s_term - cross

    ws, vs = np.linalg.eigh(sigma.matrix)
    support = ws > EIG_FLOOR
    # weight of rho on the numerical kernel of sigma
    diag = np.real(np.einsum("ij,jk,ki->i", vs.conj().T, rho.matrix, vs))
    leak = float(np.sum(diag[~support]))
    if leak > SUPPORT_TOL:
        warnings.warn(
            f"rho has weight {leak:.2e} outside the support of sigma; divergence is infinite",
            RuntimeWarning,
            stacklevel=2,
        )
        return math.inf
    cross = float(np.sum(diag[support] * np.log(ws[support])))
    return s_term - cross


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w.min() < -NEG_EIG_TOL:
        raise InvalidParameterError(f"matrix has eigenvalue {w.min():.2e} below tolerance")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def numeric_fidelity(rho: FockDensityMatrix, sigma: FockDensityMatrix) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    Evaluated as the squared nuclear norm of ``sqrt(rho) sqrt(sigma)``: rounding
    noise then enters through singular values linearly, whereas square roots of
    noise-level eigenvalues (~1e-17 -> ~3e-9 each) would swamp ``1 - sqrt F``
    for nearby states.
    """
    if rho.cutoff != sigma.cutoff:
        raise InvalidParameterError("states must share a cutoff")
    prod = _sqrtm_psd(rho.matrix) @ _sqrtm_psd(sigma.matrix)
    return float(np.sum(np.linalg.svd(prod, compute_uv=False))) ** 2


def fidelity_qfi(state_at, theta: float, delta: float = 1e-4, cutoff: int | None = None) -> float:
    """QFI from the Bures expansion ``8 (1 - sqrt F) / delta^2``, centered at ``theta``.

    ``state_at(theta)`` returns ``(nbar, alpha)``.
    """
    n0, a0 = state_at(theta - delta / 2)
    n1, a1 = state_at(theta + delta / 2)
    if cutoff is None:
        nmax = max(n0, n1)
        tail = 0 if nmax == 0 else math.ceil(math.log(1e-16) / math.log(nmax / (nmax + 1.0)))
        cutoff = max(default_cutoff(nmax, max(abs(a0), abs(a1))), tail + 20)
    r0 = build_displaced_thermal(n0, a0, cutoff).normalized()
    r1 = build_displaced_thermal(n1, a1, cutoff).normalized()
    fid = numeric_fidelity(r0, r1)
    return 8.0 * (1.0 - math.sqrt(fid)) / delta**2
