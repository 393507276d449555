"""Error exponents for tap detection and the scaling laws derived from them.

All exponents are in nats per probe.  The first argument of every divergence
is the tapped ("disturbed") state, the second the clean one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .attack import (
    AttackScenario,
    clean_output,
    disturbed_output,
    signal_energy,
)
from .core_model import Convention, DisplacedThermalState
from .errors import InfeasibleError, InvalidParameterError
from .optimize import grid_golden_max

DP_GRID_POINTS = 2001
DP_S_MIN = -40.0
DP_TOL = 1e-12
DPI_TOL = 1e-9


@dataclass(frozen=True)
class ExponentTriple:
    d_quantum: float
    d_photon: float
    d_heterodyne: float

    def __post_init__(self):
        for name in ("d_quantum", "d_photon", "d_heterodyne"):
            if not getattr(self, name) >= 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if self.d_photon > self.d_quantum + DPI_TOL or self.d_heterodyne > self.d_quantum + DPI_TOL:
            raise InvalidParameterError(
                f"data-processing violated: D={self.d_quantum}, D_P={self.d_photon}, "
                f"D_H={self.d_heterodyne}"
            )


@dataclass(frozen=True)
class ScalingInputs:
    p: float
    lam: float
    k: int
    capacity: float = 0.0
    t_L: float = 0.0

    def __post_init__(self):
        if not 0 < self.p < 1 or not 0 < self.lam < 1:
            raise InvalidParameterError("p and lambda must lie in (0, 1)")
        if int(self.k) != self.k or self.k < 1:
            raise InvalidParameterError("k must be a positive integer")
        if self.capacity < 0 or self.t_L < 0:
            raise InvalidParameterError("capacity and t_L must be >= 0")


@dataclass(frozen=True)
class SweepRow:
    rho: float
    exponents: ExponentTriple
    clean: DisplacedThermalState
    disturbed: DisplacedThermalState

    @property
    def delta(self) -> float:
        return abs(self.disturbed.alpha - self.clean.alpha) ** 2

    @property
    def dp_ratio(self) -> float:
        d = self.exponents.d_quantum
        return self.exponents.d_photon / d if d > 0 else 0.0

    @property
    def dh_ratio(self) -> float:
        d = self.exponents.d_quantum
        return self.exponents.d_heterodyne / d if d > 0 else 0.0


def g_entropy(x: float) -> float:
    """Von Neumann entropy of a thermal state, ``(x+1) ln(x+1) - x ln x``."""
    if x < 0:
        raise InvalidParameterError(f"g_entropy needs x >= 0, got {x}")
    if x == 0:
        return 0.0
    return (x + 1.0) * math.log1p(x) - x * math.log(x)


def _log_ratio(M: float) -> float:
    """``ln((M+1)/M)``."""
    return math.log1p(1.0 / M)


def relative_entropy(numerator: DisplacedThermalState, denominator: DisplacedThermalState) -> float:
    """Quantum relative entropy ``D(numerator || denominator)`` of displaced thermal states."""
    N, M = numerator.nbar, denominator.nbar
    gap = abs(numerator.alpha - denominator.alpha) ** 2
    if M == 0:
        return 0.0 if (N == 0 and gap == 0) else math.inf
    if N == M and gap == 0:
        return 0.0
    d = -g_entropy(N) + math.log1p(M) + _log_ratio(M) * (N + gap)
    return max(d, 0.0)


def stein_exponent(sc: AttackScenario) -> float:
    return relative_entropy(disturbed_output(sc), clean_output(sc))


def reverse_stein_exponent(sc: AttackScenario) -> float:
    """``D(clean || disturbed)``, the exponent behind the false-acceptance condition."""
    return relative_entropy(clean_output(sc), disturbed_output(sc))


def stein_exponent_expanded(sc: AttackScenario) -> float:
    """Stein exponent written directly in the scenario parameters.

    Independent of the state constructors; used to cross-check them.
    """
    if sc.convention is not Convention.PAPER_LITERAL:
        raise InvalidParameterError("expanded form is defined for the PaperLiteral convention")
    eta, L, i = sc.eta, sc.L, sc.segment_index
    nu2 = sc.nu.real**2 + sc.nu.imag**2
    base = 0.5 - 0.5 * eta**L
    M = base + eta ** (L - i) * (sc.n_th + 0.5) * nu2
    N = base + eta ** (L - i) * (
        sc.tau_E * (sc.n_th + 0.5) * nu2 + (1.0 - sc.tau_E) * (sc.n_E + 0.5)
    )
    amp = math.sqrt(eta) + sc.kappa
    gap = eta ** (L - 1) * (math.sqrt(sc.tau_E) - 1.0) ** 2 * (amp.real**2 + amp.imag**2) * sc.E
    if M == 0:
        return 0.0 if (N == 0 and gap == 0) else math.inf
    gN = 0.0 if N == 0 else (N + 1) * math.log(N + 1) - N * math.log(N)
    d = -gN + math.log(M + 1) + math.log((M + 1) / M) * (N + gap)
    return max(d, 0.0)


def _detection_strength(sc: AttackScenario) -> float:
    """``ln((M+1)/M) eta^(L-1) |sqrt(eta)+kappa|^2 E``; weak-attack exponent per rho^2/4."""
    M = clean_output(sc).nbar
    energy = signal_energy(sc)
    if energy == 0:
        return 0.0
    if M == 0:
        return math.inf
    return _log_ratio(M) * energy


def weak_attack_exponent(sc: AttackScenario, rho: float) -> float:
    """Leading-order Stein exponent ``(rho^2/4) ln((M+1)/M) eta^(L-1)|sqrt(eta)+kappa|^2 E``."""
    if not 0 <= rho < 1:
        raise InvalidParameterError(f"rho must lie in [0, 1), got {rho}")
    if rho == 0:
        return 0.0
    return rho**2 / 4.0 * _detection_strength(sc)


def rho_min(sc: AttackScenario, p: float, k: int) -> float:
    """Weakest tap detectable with miss probability ``p`` from ``k`` probes."""
    if not 0 < p < 1:
        raise InvalidParameterError("p must lie in (0, 1)")
    if k < 1:
        raise InvalidParameterError("k must be >= 1")
    strength = _detection_strength(sc)
    if strength == 0:
        raise InfeasibleError("zero probe energy reaches the receiver; no tap is detectable")
    return 2.0 * math.sqrt(math.log(1.0 / p) / (k * strength))


def k_min(sc: AttackScenario, lam: float, rho: float) -> float:
    """Probes needed so that a tap of strength ``rho`` meets security parameter ``lam``."""
    if not 0 < lam < 1:
        raise InvalidParameterError("lambda must lie in (0, 1)")
    if not 0 <= rho < 1:
        raise InvalidParameterError("rho must lie in [0, 1)")
    strength = _detection_strength(sc)
    if rho == 0 or strength == 0:
        raise InfeasibleError("a zero-strength tap or zero probe energy is undetectable")
    return 4.0 * math.log(1.0 / lam) / (rho**2 * strength)


def scan_time(sc: AttackScenario, inputs: ScalingInputs, rho: float) -> float:
    return inputs.t_L * k_min(sc, inputs.lam, rho)


def stolen_bits(sc: AttackScenario, inputs: ScalingInputs, rho: float) -> float:
    """Bits a tap of strength ``rho`` can siphon off during one full scan."""
    return inputs.capacity * scan_time(sc, inputs, rho)


def _dp_objective(s, M: float, N: float, delta: float):
    es = np.exp(s)
    den = N + 1.0 - N * es
    return s * M + np.log(den) + delta * (1.0 - es) / den


def photon_threshold_exponent(
    clean: DisplacedThermalState,
    disturbed: DisplacedThermalState,
    dp_mean_includes_displacement: bool = False,
) -> float:
    """Photon-count threshold exponent ``sup_{s<=0} [sM + ln(N+1-Ne^s) + Delta(1-e^s)/(N+1-Ne^s)]``.

    With ``dp_mean_includes_displacement`` the threshold uses ``M + |alpha|^2``
    in place of ``M``.
    """
    M = clean.nbar + (abs(clean.alpha) ** 2 if dp_mean_includes_displacement else 0.0)
    N = disturbed.nbar
    delta = abs(disturbed.alpha - clean.alpha) ** 2
    _, value = grid_golden_max(
        lambda s: _dp_objective(s, M, N, delta),
        DP_S_MIN,
        0.0,
        DP_GRID_POINTS,
        DP_TOL,
        vectorized=True,
    )
    # the objective is exactly 0 at s = 0; anything below its rounding floor is that optimum
    floor = 8 * np.finfo(float).eps * (1.0 + M + N + delta)
    return value if value > floor else 0.0


def heterodyne_pdf(z: complex, state: DisplacedThermalState) -> float:
    """Heterodyne (Husimi) outcome density ``exp(-|z-gamma|^2/(n+1)) / (pi (n+1))``."""
    s = state.nbar + 1.0
    return math.exp(-abs(z - state.alpha) ** 2 / s) / (math.pi * s)


def heterodyne_exponent(clean: DisplacedThermalState, disturbed: DisplacedThermalState) -> float:
    """Classical relative entropy of the heterodyne outcome densities."""
    M1 = clean.nbar + 1.0
    N1 = disturbed.nbar + 1.0
    delta = abs(disturbed.alpha - clean.alpha) ** 2
    d = math.log(M1 / N1) + N1 / M1 - 1.0 + delta / M1
    return max(d, 0.0)


def exponent_row(sc: AttackScenario, rho: float, dp_mean_includes_displacement: bool = False) -> SweepRow:
    sc_rho = sc.with_rho(rho)
    clean = clean_output(sc_rho)
    disturbed = disturbed_output(sc_rho)
    triple = ExponentTriple(
        relative_entropy(disturbed, clean),
        photon_threshold_exponent(clean, disturbed, dp_mean_includes_displacement),
        heterodyne_exponent(clean, disturbed),
    )
    return SweepRow(rho, triple, clean, disturbed)


def exponent_sweep(
    sc: AttackScenario, rho_grid: Iterable[float], dp_mean_includes_displacement: bool = False
) -> list[SweepRow]:
    return [exponent_row(sc, float(r), dp_mean_includes_displacement) for r in rho_grid]
