"""Clean and tapped end-to-end output states of a probed fiber."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .core_model import (
    Convention,
    DisplacedThermalState,
    GaussianChannel,
    SegmentPhysical,
    apply_channel,
    cascade,
    segment_gain_params,
    segment_noise,
)
from .errors import InvalidParameterError

# Figure reproduction defaults for the unpublished SBS response at the probed
# segment.  On resonance both are real; only |nu|^2 enters any formula.
DEFAULT_KAPPA = 0.02
DEFAULT_NU_ABS2 = 0.04


@dataclass(frozen=True)
class AttackScenario:
    """Uniform-loss fiber of ``L`` segments probed at segment ``segment_index``.

    The tap is a beam splitter of transmissivity ``tau_E`` acting right after
    the SBS interaction in that segment, injecting thermal noise ``n_E``.
    """

    L: int = 100
    eta: float = 0.98
    segment_index: int = 50
    E: float = 5.0
    kappa: complex = DEFAULT_KAPPA
    nu: complex = math.sqrt(DEFAULT_NU_ABS2)
    n_th: float = 1.0
    tau_E: float = 1.0
    n_E: float = 0.5
    convention: Convention = Convention.PAPER_LITERAL

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise InvalidParameterError(f"L must be a positive integer, got {self.L}")
        object.__setattr__(self, "L", int(self.L))
        if not (0.0 < self.eta <= 1.0):
            raise InvalidParameterError(f"eta must lie in (0, 1], got {self.eta}")
        if int(self.segment_index) != self.segment_index or not 1 <= self.segment_index <= self.L:
            raise InvalidParameterError(
                f"segment_index must be an integer in [1, {self.L}], got {self.segment_index}"
            )
        object.__setattr__(self, "segment_index", int(self.segment_index))
        if not self.E >= 0:
            raise InvalidParameterError(f"E must be >= 0, got {self.E}")
        if not self.n_th >= 0 or not self.n_E >= 0:
            raise InvalidParameterError("thermal occupations must be >= 0")
        if not (0.0 < self.tau_E <= 1.0):
            raise InvalidParameterError(f"tau_E must lie in (0, 1], got {self.tau_E}")
        object.__setattr__(self, "kappa", complex(self.kappa))
        object.__setattr__(self, "nu", complex(self.nu))
        object.__setattr__(self, "convention", Convention.parse(self.convention))

    @property
    def rho(self) -> float:
        """Tapped power fraction ``1 - tau_E``."""
        return 1.0 - self.tau_E

    def with_rho(self, rho: float) -> "AttackScenario":
        if not (0.0 <= rho < 1.0):
            raise InvalidParameterError(f"rho must lie in [0, 1), got {rho}")
        return replace(self, tau_E=1.0 - rho)

    @classmethod
    def from_segment(cls, seg: SegmentPhysical, **kwargs) -> "AttackScenario":
        """Take ``kappa``, ``nu``, ``eta`` and ``n_th`` from a physical segment."""
        _, kappa, nu = segment_gain_params(seg)
        kwargs.setdefault("eta", seg.eta)
        kwargs.setdefault("n_th", seg.n_th)
        return cls(kappa=kappa, nu=nu, **kwargs)

    def to_dict(self) -> dict:
        """Flat key-value form used by config files and dataset provenance."""
        return {
            "L": self.L,
            "eta": self.eta,
            "segment_index": self.segment_index,
            "E": self.E,
            "kappa_re": self.kappa.real,
            "kappa_im": self.kappa.imag,
            "nu_abs2": abs(self.nu) ** 2,
            "n_th": self.n_th,
            "tau_E": self.tau_E,
            "n_E": self.n_E,
            "convention": self.convention.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttackScenario":
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, value in d.items():
            if key in ("kappa_re", "kappa_im", "nu_abs2"):
                continue
            if key not in known:
                raise InvalidParameterError(f"unknown scenario key {key!r}")
            kw[key] = value
        for key in ("L", "segment_index"):
            if key in kw:
                kw[key] = int(float(kw[key]))
        for key in ("eta", "E", "n_th", "tau_E", "n_E"):
            if key in kw:
                kw[key] = float(kw[key])
        if "kappa_re" in d or "kappa_im" in d:
            kw["kappa"] = complex(float(d.get("kappa_re", 0.0)), float(d.get("kappa_im", 0.0)))
        if "nu_abs2" in d:
            nu2 = float(d["nu_abs2"])
            if nu2 < 0:
                raise InvalidParameterError("nu_abs2 must be >= 0")
            kw["nu"] = math.sqrt(nu2)
        return cls(**kw)


def _baseline_noise(L: int, eta: float) -> float:
    return (1.0 - eta**L) / 2.0


def _probe_gain(sc: AttackScenario) -> complex:
    """End-to-end complex gain of the clean fiber, ``eta^((L-1)/2) (sqrt(eta) + kappa)``."""
    return sc.eta ** ((sc.L - 1) / 2.0) * (math.sqrt(sc.eta) + sc.kappa)


def pure_loss_output(L: int, eta: float, E: float) -> DisplacedThermalState:
    """Output of the pump-free fiber for a coherent probe of mean photon number ``E``."""
    return DisplacedThermalState(_baseline_noise(L, eta), eta ** (L / 2.0) * math.sqrt(E))


def fiber_channels(sc: AttackScenario, tapped: bool) -> list[GaussianChannel]:
    """Per-segment channel list, with the tap inserted after segment ``i`` if requested."""
    loss = GaussianChannel.attenuator(sc.eta)
    active = GaussianChannel.from_scalars(
        math.sqrt(sc.eta) + sc.kappa, segment_noise(sc.eta, sc.nu, sc.n_th)
    )
    chans = [loss] * (sc.segment_index - 1) + [active]
    if tapped:
        chans.append(GaussianChannel.beam_splitter(sc.tau_E, sc.n_E))
    chans += [loss] * (sc.L - sc.segment_index)
    return chans


def _via_cascade(sc: AttackScenario, tapped: bool) -> DisplacedThermalState:
    probe = DisplacedThermalState(0.0, math.sqrt(sc.E))
    total = cascade(fiber_channels(sc, tapped)).channel
    return apply_channel(total, probe, Convention.PHYSICAL)


def clean_output(sc: AttackScenario) -> DisplacedThermalState:
    if sc.convention is Convention.PHYSICAL:
        return _via_cascade(sc, tapped=False)
    M = _baseline_noise(sc.L, sc.eta) + sc.eta ** (sc.L - sc.segment_index) * (
        sc.n_th + 0.5
    ) * abs(sc.nu) ** 2
    return DisplacedThermalState(M, _probe_gain(sc) * math.sqrt(sc.E))


def disturbed_output(sc: AttackScenario) -> DisplacedThermalState:
    if sc.tau_E == 1.0:
        return clean_output(sc)  # bit-identical, not merely equal up to rounding
    if sc.convention is Convention.PHYSICAL:
        return _via_cascade(sc, tapped=True)
    tau = sc.tau_E
    local = tau * (sc.n_th + 0.5) * abs(sc.nu) ** 2 + (1.0 - tau) * (sc.n_E + 0.5)
    N = _baseline_noise(sc.L, sc.eta) + sc.eta ** (sc.L - sc.segment_index) * local
    beta = math.sqrt(tau) * _probe_gain(sc) * math.sqrt(sc.E)
    return DisplacedThermalState(N, beta)


def signal_energy(sc: AttackScenario) -> float:
    """``eta^(L-1) |sqrt(eta) + kappa|^2 E``, the clean output coherent energy."""
    return sc.eta ** (sc.L - 1) * abs(math.sqrt(sc.eta) + sc.kappa) ** 2 * sc.E


def displacement_gap(sc: AttackScenario) -> float:
    """``|beta - alpha|^2 = eta^(L-1) (sqrt(tau_E) - 1)^2 |sqrt(eta) + kappa|^2 E``."""
    return (math.sqrt(sc.tau_E) - 1.0) ** 2 * signal_energy(sc)
