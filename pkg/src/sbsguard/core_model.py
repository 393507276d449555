"""Fiber segments under linearized SBS as single-mode Gaussian channels.

A phase-insensitive channel acts on quadrature means and covariances as

    d -> X d,        V -> X V X^T + Y

with vacuum variance 1/2.  Channels built here have X in rotation-scaling form
(one complex gain ``mu``) and isotropic noise ``Y = y I``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import constants

from .errors import InvalidParameterError, NonPhysicalChannelError

PSD_TOL = 1e-9
VACUUM_SNAP = 1e-12


class Convention(enum.Enum):
    """How a channel's output covariance is mapped to a thermal photon number.

    ``PAPER_LITERAL`` identifies the thermal number with the added-noise scalar
    (``nbar_out = y + |mu|^2 nbar_in``).  ``PHYSICAL`` uses ``nbar = V - 1/2``.
    """

    PAPER_LITERAL = "PaperLiteral"
    PHYSICAL = "Physical"

    @classmethod
    def parse(cls, value: "str | Convention") -> "Convention":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if member.value.lower() == key:
                return member
        raise InvalidParameterError(f"unknown convention {value!r}")


@dataclass(frozen=True)
class DisplacedThermalState:
    """Thermal state of mean photon number ``nbar`` displaced by ``alpha``."""

    nbar: float
    alpha: complex = 0j

    def __post_init__(self):
        if not math.isfinite(self.nbar) or self.nbar < 0:
            raise InvalidParameterError(f"nbar must be finite and >= 0, got {self.nbar}")
        if not cmath.isfinite(self.alpha):
            raise InvalidParameterError("displacement must be finite")
        object.__setattr__(self, "alpha", complex(self.alpha))

    @property
    def mean_photons(self) -> float:
        return self.nbar + abs(self.alpha) ** 2


@dataclass(frozen=True)
class SegmentPhysical:
    """Physical parameters of one fiber segment.

    Frequencies in rad/s.  ``g_tilde`` carries whatever units make
    ``|g|^2 chi dz`` and ``g sqrt(gamma) chi dz`` dimensionless.
    """

    eta: float
    g_tilde: complex
    gamma: float
    omega: float
    omega_b: float
    delta_z: float
    n_th: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise InvalidParameterError(f"eta must lie in (0, 1], got {self.eta}")
        if not self.gamma > 0:
            raise InvalidParameterError(f"gamma must be > 0, got {self.gamma}")
        if not self.delta_z > 0:
            raise InvalidParameterError(f"delta_z must be > 0, got {self.delta_z}")
        if not self.n_th >= 0:
            raise InvalidParameterError(f"n_th must be >= 0, got {self.n_th}")
        object.__setattr__(self, "g_tilde", complex(self.g_tilde))


@dataclass(frozen=True)
class GaussianChannel:
    """Single-mode Gaussian channel ``(X, Y)`` acting on quadratures."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float).reshape(2, 2)
        Y = np.array(self.Y, dtype=float).reshape(2, 2)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidParameterError("channel matrices must be finite")
        if abs(Y[0, 1] - Y[1, 0]) > PSD_TOL * max(1.0, np.abs(Y).max()):
            raise InvalidParameterError("noise matrix Y must be symmetric")
        if np.linalg.eigvalsh(0.5 * (Y + Y.T)).min() < -PSD_TOL:
            raise InvalidParameterError("noise matrix Y must be positive semidefinite")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def from_scalars(cls, mu: complex, y: float) -> "GaussianChannel":
        mu = complex(mu)
        X = [[mu.real, -mu.imag], [mu.imag, mu.real]]
        return cls(X, y * np.eye(2))

    @classmethod
    def identity(cls) -> "GaussianChannel":
        return cls.from_scalars(1.0, 0.0)

    @classmethod
    def attenuator(cls, eta: float) -> "GaussianChannel":
        return cls.from_scalars(math.sqrt(eta), (1.0 - eta) / 2)

    @classmethod
    def beam_splitter(cls, tau: float, n_env: float = 0.0) -> "GaussianChannel":
        """Transmissivity-``tau`` coupling to a thermal environment of occupation ``n_env``."""
        return cls.from_scalars(math.sqrt(tau), (1.0 - tau) * (n_env + 0.5))

    @property
    def mu(self) -> complex:
        """Complex gain; meaningful for rotation-scaling X."""
        return complex(self.X[0, 0], self.X[1, 0])

    @property
    def y(self) -> float:
        """Isotropic added noise; meaningful when Y is proportional to the identity."""
        return float(self.Y[0, 0])

    def is_phase_insensitive(self, tol: float = 1e-12) -> bool:
        X, Y = self.X, self.Y
        scale = max(1.0, np.abs(X).max(), np.abs(Y).max())
        return (
            abs(X[0, 0] - X[1, 1]) <= tol * scale
            and abs(X[0, 1] + X[1, 0]) <= tol * scale
            and abs(Y[0, 0] - Y[1, 1]) <= tol * scale
            and abs(Y[0, 1]) <= tol * scale
        )


@dataclass(frozen=True)
class CascadeResult:
    """Matrix fold of a cascade together with its scalar (mu_tot, y_tot) form."""

    channel: GaussianChannel
    mu_tot: complex
    y_tot: float


def susceptibility(omega: float, omega_b: float, gamma: float) -> complex:
    """Local Brillouin susceptibility ``1 / (gamma/2 + i (omega - omega_b))``."""
    if not gamma > 0:
        raise InvalidParameterError(f"gamma must be > 0, got {gamma}")
    return 1.0 / complex(gamma / 2.0, omega - omega_b)


def bose_occupation(omega_b: float, temperature: float) -> float:
    """Thermal phonon occupation at angular frequency ``omega_b`` and temperature (K)."""
    if not omega_b > 0 or not temperature > 0:
        raise InvalidParameterError("omega_b and temperature must be > 0")
    x = constants.hbar * omega_b / (constants.k * temperature)
    return 1.0 / math.expm1(x) if x < 700 else 0.0


def segment_gain_params(seg: SegmentPhysical) -> tuple[complex, complex, complex]:
    """Return ``(mu, kappa, nu)`` for one segment."""
    chi = susceptibility(seg.omega, seg.omega_b, seg.gamma)
    kappa = abs(seg.g_tilde) ** 2 * chi * seg.delta_z
    nu = -1j * seg.g_tilde * math.sqrt(seg.gamma) * chi * seg.delta_z
    mu = math.sqrt(seg.eta) + kappa
    return mu, kappa, nu


def segment_noise(eta: float, nu: complex, n_th: float) -> float:
    """Added noise ``(n_th + 1/2)|nu|^2 + (1 - eta)/2`` of a segment."""
    return (n_th + 0.5) * abs(nu) ** 2 + (1.0 - eta) / 2.0


def segment_channel(seg: SegmentPhysical) -> GaussianChannel:
    mu, _, nu = segment_gain_params(seg)
    return GaussianChannel.from_scalars(mu, segment_noise(seg.eta, nu, seg.n_th))


def compose(second: GaussianChannel, first: GaussianChannel) -> GaussianChannel:
    """Channel applying ``first`` then ``second``."""
    X2 = second.X
    return GaussianChannel(X2 @ first.X, X2 @ first.Y @ X2.T + second.Y)


def cascade(segments: Sequence[GaussianChannel]) -> CascadeResult:
    """Fold an ordered list of channels; element 0 sits at the probe-input end."""
    segments = list(segments)
    if not segments:
        raise InvalidParameterError("cascade needs at least one channel")
    total = segments[0]
    for ch in segments[1:]:
        total = compose(ch, total)

    # scalar form: mu_tot = prod mu_k, y_tot = sum_k (prod_{j>k} |mu_j|^2) y_k
    mu_tot = 1.0 + 0j
    y_tot = 0.0
    for ch in segments:
        mu_tot *= ch.mu
        y_tot = abs(ch.mu) ** 2 * y_tot + ch.y
    return CascadeResult(total, mu_tot, y_tot)


def apply_channel(
    channel: GaussianChannel,
    state: DisplacedThermalState,
    convention: Convention | str = Convention.PAPER_LITERAL,
) -> DisplacedThermalState:
    """Propagate a displaced thermal state through a phase-insensitive channel."""
    convention = Convention.parse(convention)
    if not channel.is_phase_insensitive(tol=1e-9):
        raise InvalidParameterError("apply_channel needs a phase-insensitive channel")
    mu, y = channel.mu, channel.y
    gain = abs(mu) ** 2
    alpha = mu * state.alpha
    if convention is Convention.PAPER_LITERAL:
        return DisplacedThermalState(y + gain * state.nbar, alpha)
    variance = gain * (state.nbar + 0.5) + y
    nbar = variance - 0.5
    if abs(nbar) <= VACUUM_SNAP * variance:
        # rounding left over from cascading many segments: the output is at vacuum level
        nbar = 0.0
    if nbar < -PSD_TOL:
        raise NonPhysicalChannelError(
            f"output variance {nbar + 0.5:.3e} below vacuum level 1/2"
        )
    return DisplacedThermalState(max(nbar, 0.0), alpha)
