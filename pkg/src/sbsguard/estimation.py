"""Estimability of the tap strength rho: QFI, Cramer-Rao floors, SLD-optimal
photon counting, receiver Fisher information and Monte Carlo MLE variance."""

from __future__ import annotations

import enum
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attack import AttackScenario, clean_output, disturbed_output
from .core_model import Convention
from .errors import (
    DegeneratePovmError,
    InfeasibleError,
    InvalidParameterError,
    TailMassError,
)
from .optimize import golden_section_max

PNR_TAIL_TOL = 1e-10
FI_TAIL_TOL = 1e-14
FD_STEP = 1e-6
MLE_RHO_MAX = 1.0 - 1e-6
MLE_GRID_POINTS = 64
MLE_TOL = 1e-9
# the SLD center diverges as rho -> 1; pilots above this place the POVM as if at it
PILOT_RHO_MAX = 0.95


@dataclass(frozen=True)
class RhoDerivatives:
    d_beta: complex
    d_nbar: float


@dataclass(frozen=True)
class SldSpec:
    """Coefficients of the SLD ``A* b + A b^dag + (lambda/2)(b^dag b - N)``, ``b = a - beta``.

    Its eigenbasis is the Fock basis displaced to ``center = beta - 2A/lambda``.
    """

    a_coeff: complex
    lambda_coeff: float
    beta: complex

    @property
    def center(self) -> complex:
        if self.lambda_coeff == 0:
            raise DegeneratePovmError(
                "lambda = 0: the SLD is linear; use homodyne along the displacement direction"
            )
        return self.beta - 2.0 * self.a_coeff / self.lambda_coeff


class SchemeKind(enum.Enum):
    HETERODYNE = "Heterodyne"
    PHOTON_COUNTING = "PhotonCounting"
    SLD_AT_TRUTH = "SldOptimalAtTruth"
    ADAPTIVE_SLD = "AdaptiveSld"


@dataclass(frozen=True)
class MeasurementScheme:
    kind: SchemeKind
    pilot_fraction: float | None = None

    def __post_init__(self):
        if self.kind is SchemeKind.ADAPTIVE_SLD:
            if self.pilot_fraction is None or not 0 < self.pilot_fraction < 1:
                raise InvalidParameterError("AdaptiveSld needs a pilot fraction in (0, 1)")
        elif self.pilot_fraction is not None:
            raise InvalidParameterError(f"{self.kind.value} takes no pilot fraction")

    @classmethod
    def heterodyne(cls):
        return cls(SchemeKind.HETERODYNE)

    @classmethod
    def photon_counting(cls):
        return cls(SchemeKind.PHOTON_COUNTING)

    @classmethod
    def sld_at_truth(cls):
        return cls(SchemeKind.SLD_AT_TRUTH)

    @classmethod
    def adaptive_sld(cls, pilot_fraction: float = 0.1):
        return cls(SchemeKind.ADAPTIVE_SLD, pilot_fraction)

    @classmethod
    def parse(cls, text: str) -> "MeasurementScheme":
        """Parse ``Heterodyne``, ``PhotonCounting``, ``SldOptimalAtTruth`` or ``AdaptiveSld(0.1)``."""
        m = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*([0-9.eE+-]+)\s*\))?\s*", text)
        if not m:
            raise InvalidParameterError(f"cannot parse scheme {text!r}")
        name, arg = m.groups()
        for kind in SchemeKind:
            if kind.value.lower() == name.lower():
                if kind is SchemeKind.ADAPTIVE_SLD:
                    return cls(kind, 0.1 if arg is None else float(arg))
                if arg is not None:
                    raise InvalidParameterError(f"{kind.value} takes no argument")
                return cls(kind)
        raise InvalidParameterError(f"unknown scheme {name!r}")

    @property
    def label(self) -> str:
        if self.kind is SchemeKind.ADAPTIVE_SLD:
            return f"{self.kind.value}({self.pilot_fraction:g})"
        return self.kind.value


@dataclass(frozen=True)
class StateFamily:
    """Tapped output state as a function of rho: ``N = n0 + rho * d_nbar``, ``beta = sqrt(1-rho) alpha0``."""

    n0: float
    d_nbar: float
    alpha0: complex

    @classmethod
    def from_scenario(cls, sc: AttackScenario) -> "StateFamily":
        clean = clean_output(sc)
        return cls(clean.nbar, _d_nbar(sc), clean.alpha)

    def nbar(self, rho):
        return self.n0 + rho * self.d_nbar

    def beta(self, rho):
        return np.sqrt(1.0 - rho) * self.alpha0


def _local_noise(sc: AttackScenario) -> float:
    """Noise variance the tap replaces, as counted by the scenario's convention."""
    sbs = (sc.n_th + 0.5) * abs(sc.nu) ** 2
    if sc.convention is Convention.PAPER_LITERAL:
        return sbs
    # coherent input keeps vacuum variance 1/2 through the upstream loss
    return abs(math.sqrt(sc.eta) + sc.kappa) ** 2 / 2.0 + sbs + (1.0 - sc.eta) / 2.0


def _d_nbar(sc: AttackScenario) -> float:
    return sc.eta ** (sc.L - sc.segment_index) * ((sc.n_E + 0.5) - _local_noise(sc))


def rho_derivatives(sc: AttackScenario, rho: float) -> RhoDerivatives:
    if not 0 <= rho < 1:
        raise InvalidParameterError(f"rho must lie in [0, 1), got {rho}")
    if 1.0 - rho < 1e-12:
        raise InfeasibleError("d beta / d rho diverges as rho -> 1")
    beta = disturbed_output(sc.with_rho(rho)).alpha
    return RhoDerivatives(-beta / (2.0 * (1.0 - rho)), _d_nbar(sc))


def _displaced_thermal_qfi(N: float, d_beta: complex, d_nbar: float) -> float:
    disp = 4.0 * abs(d_beta) ** 2 / (2.0 * N + 1.0)
    if d_nbar == 0:
        return disp
    if N == 0:
        return math.inf
    return disp + d_nbar**2 / (N * (N + 1.0))


def qfi(sc: AttackScenario, rho: float) -> float:
    """Quantum Fisher information of the tapped output state with respect to rho."""
    der = rho_derivatives(sc, rho)
    N = disturbed_output(sc.with_rho(rho)).nbar
    return _displaced_thermal_qfi(N, der.d_beta, der.d_nbar)


def qfi_gaussian_general(cov, d_cov, purity: float, d_purity: float, d_disp) -> float:
    """Single-mode Gaussian QFI from covariance, purity, displacement and their derivatives.

    ``F = tr[(S^-1 dS)^2] / (2(1+P^2)) + 2 dP^2/(1-P^4) + dx^T S^-1 dx``.
    """
    cov = np.asarray(cov, dtype=float).reshape(2, 2)
    d_cov = np.asarray(d_cov, dtype=float).reshape(2, 2)
    d_disp = np.asarray(d_disp, dtype=float).reshape(2)
    if abs(np.linalg.det(cov)) < 1e-300:
        raise InvalidParameterError("covariance matrix is singular")
    inv = np.linalg.inv(cov)
    m = inv @ d_cov
    term_cov = 0.5 * np.trace(m @ m) / (1.0 + purity**2)
    if d_purity == 0:
        term_pur = 0.0
    elif abs(1.0 - purity**4) < 1e-15:
        raise InfeasibleError("purity derivative of a pure state: the QFI diverges")
    else:
        term_pur = 2.0 * d_purity**2 / (1.0 - purity**4)
    return float(term_cov + term_pur + d_disp @ inv @ d_disp)


def isotropic_gaussian_inputs(nbar: float, d_nbar: float, d_beta: complex):
    """Arguments of :func:`qfi_gaussian_general` for a displaced thermal state family."""
    cov = (nbar + 0.5) * np.eye(2)
    d_cov = d_nbar * np.eye(2)
    purity = 1.0 / (2.0 * nbar + 1.0)
    d_purity = -2.0 * d_nbar / (2.0 * nbar + 1.0) ** 2
    d_disp = math.sqrt(2.0) * np.array([d_beta.real, d_beta.imag])
    return cov, d_cov, purity, d_purity, d_disp


def crb(k: int, fisher: float) -> float:
    """Cramer-Rao variance floor ``1 / (k F)``."""
    if not fisher > 0:
        raise InfeasibleError(f"Fisher information must be > 0, got {fisher}")
    if k < 1:
        raise InvalidParameterError("k must be >= 1")
    return 1.0 / (k * fisher)


def sld_spec(sc: AttackScenario, rho: float) -> SldSpec:
    """SLD coefficients at ``rho``; raises if the eigenbasis construction degenerates."""
    der = rho_derivatives(sc, rho)
    state = disturbed_output(sc.with_rho(rho))
    return _sld_from(state.nbar, state.alpha, der.d_beta, der.d_nbar, sc)


def _sld_from(N, beta, d_beta, d_nbar, sc=None) -> SldSpec:
    scale = 1.0 if sc is None else sc.eta ** (sc.L - sc.segment_index) * (sc.n_E + 0.5)
    if abs(d_nbar) <= 1e-12 * scale:
        raise DegeneratePovmError(
            "noise-matched tap (d N / d rho = 0): the SLD is linear; "
            "use homodyne along the displacement direction"
        )
    if N <= 0:
        raise InfeasibleError("SLD noise term diverges for N = 0")
    A = 2.0 * d_beta / (2.0 * N + 1.0)
    lam = 2.0 * d_nbar / (N * (N + 1.0))
    return SldSpec(complex(A), float(lam), complex(beta))


# --- photon-number statistics -------------------------------------------------


def _log_pnr_recurrence(nbar, d2, n_max: int) -> np.ndarray:
    """Log photon-number probabilities of displaced thermal states for n = 0..n_max.

    Broadcasts over ``nbar`` and ``d2 = |d|^2``; returns shape ``(..., n_max+1)``.
    Runs the Laguerre three-term recurrence with the geometric and exponential
    factors folded in, on values rescaled whenever they grow large, so far-displaced
    states whose low-n probabilities underflow are still handled.
    """
    nbar = np.asarray(nbar, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    nbar, d2 = np.broadcast_arrays(nbar, d2)
    q = nbar / (nbar + 1.0)
    y = d2 / (nbar + 1.0) ** 2
    out = np.empty(nbar.shape + (n_max + 1,))
    log_scale = -d2 / (nbar + 1.0) - np.log1p(nbar)
    prev = np.zeros(nbar.shape)
    cur = np.ones(nbar.shape)
    out[..., 0] = log_scale
    with np.errstate(divide="ignore"):
        if n_max >= 1:
            prev, cur = cur, (q + y) * cur
            out[..., 1] = np.log(cur) + log_scale
        for n in range(1, n_max):
            prev, cur = cur, (((2 * n + 1) * q + y) * cur - n * q * q * prev) / (n + 1)
            big = cur > 1e200
            if np.any(big):
                c = np.where(big, cur, 1.0)
                prev, cur = prev / c, cur / c
                log_scale = log_scale + np.log(c)
            out[..., n + 1] = np.log(np.clip(cur, 0.0, None)) + log_scale
    return out


def _pnr_recurrence(nbar, d2, n_max: int) -> np.ndarray:
    """Photon-number probabilities, ``exp`` of :func:`_log_pnr_recurrence`."""
    return np.exp(_log_pnr_recurrence(nbar, d2, n_max))


def _auto_n_max(nbar: float, d2: float, tail_tol: float) -> int:
    """Smallest tried ``n_max`` whose recurrence leaves tail mass below ``tail_tol``.

    Starts from a moment/geometric estimate and grows it; the displaced tail is
    heavier than the geometric factor alone suggests.
    """
    mean = nbar + d2
    sd = math.sqrt(nbar * (nbar + 1) + d2 * (2 * nbar + 1))
    n = int(mean + 12 * sd + 20)
    if nbar > 0:
        n = max(n, int(math.log(tail_tol) / math.log(nbar / (nbar + 1.0))) + 20)
    for _ in range(8):
        if 1.0 - math.fsum(_pnr_recurrence(nbar, d2, n)) <= tail_tol:
            return n
        n = int(1.25 * n) + 10
    raise TailMassError(f"no n_max up to {n} reaches tail mass {tail_tol:.0e} (nbar={nbar}, |d|^2={d2})")


def displaced_thermal_pnr(
    nbar: float, d: complex, n_max: int | None = None, tail_tol: float = PNR_TAIL_TOL
) -> np.ndarray:
    """``P(n)`` for a thermal state of mean ``nbar`` displaced by ``d``, n = 0..n_max."""
    if nbar < 0:
        raise InvalidParameterError("nbar must be >= 0")
    d2 = abs(d) ** 2
    if n_max is None:
        n_max = _auto_n_max(nbar, d2, tail_tol)
    p = _pnr_recurrence(nbar, d2, int(n_max))
    tail = 1.0 - math.fsum(p)
    if tail > tail_tol:
        raise TailMassError(f"n_max={n_max} leaves tail mass {tail:.2e} > {tail_tol:.0e}")
    return p


# --- Fisher information of concrete receivers ---------------------------------


def heterodyne_fisher_info(fam: StateFamily, rho: float) -> float:
    """Per-probe Fisher information of the complex Gaussian outcome ``z ~ CN(beta, N+1)``."""
    N = fam.nbar(rho)
    d_beta = -fam.beta(rho) / (2.0 * (1.0 - rho))
    s = N + 1.0
    return 2.0 * abs(d_beta) ** 2 / s + (fam.d_nbar / s) ** 2


def homodyne_fisher_info(fam: StateFamily, rho: float) -> float:
    """Homodyne along the displacement direction; the fallback when the SLD POVM degenerates."""
    N = fam.nbar(rho)
    d_beta = -fam.beta(rho) / (2.0 * (1.0 - rho))
    v = N + 0.5
    return 2.0 * abs(d_beta) ** 2 / v + fam.d_nbar**2 / (2.0 * v**2)


def _counting_probs(fam: StateFamily, rho, center: complex, n_max: int) -> np.ndarray:
    d2 = np.abs(fam.beta(rho) - center) ** 2
    return _pnr_recurrence(fam.nbar(rho), d2, n_max)


def _counting_log_probs(fam: StateFamily, rho, center: complex, n_max: int) -> np.ndarray:
    d2 = np.abs(fam.beta(rho) - center) ** 2
    return _log_pnr_recurrence(fam.nbar(rho), d2, n_max)


def counting_fisher_info(fam: StateFamily, rho: float, center: complex = 0j) -> float:
    """Fisher information of photon counting after displacing the state by ``-center``.

    The score uses a finite-difference derivative of the outcome probabilities.
    """
    N = fam.nbar(rho)
    d2 = abs(fam.beta(rho) - center) ** 2
    n_max = _auto_n_max(N, d2, FI_TAIL_TOL)
    h = FD_STEP
    if rho - h >= 0 and rho + h <= MLE_RHO_MAX:
        p_lo, p_hi = (_counting_probs(fam, r, center, n_max) for r in (rho - h, rho + h))
        dp = (p_hi - p_lo) / (2 * h)
    else:
        sign = 1.0 if rho - h < 0 else -1.0
        p0, p1, p2 = (_counting_probs(fam, rho + sign * j * h, center, n_max) for j in range(3))
        dp = sign * (-3 * p0 + 4 * p1 - p2) / (2 * h)
    p = _counting_probs(fam, rho, center, n_max)
    mask = p > 0
    return float(np.sum(dp[mask] ** 2 / p[mask]))


def classical_fisher_info(sc: AttackScenario, rho: float, scheme: MeasurementScheme) -> float:
    """Per-probe Fisher information of a receiver at tap strength ``rho``.

    For AdaptiveSld this is the asymptotic mix ``f F_het + (1-f) F_sld``, i.e.
    the pilot estimate is taken to have converged to the truth.
    """
    if not 0 <= rho < 1:
        raise InvalidParameterError(f"rho must lie in [0, 1), got {rho}")
    fam = StateFamily.from_scenario(sc)
    kind = scheme.kind
    if kind is SchemeKind.HETERODYNE:
        return heterodyne_fisher_info(fam, rho)
    if kind is SchemeKind.PHOTON_COUNTING:
        return counting_fisher_info(fam, rho)
    center = sld_spec(sc, rho).center
    f_sld = counting_fisher_info(fam, rho, center)
    if kind is SchemeKind.SLD_AT_TRUTH:
        return f_sld
    f = scheme.pilot_fraction
    return f * heterodyne_fisher_info(fam, rho) + (1.0 - f) * f_sld


# --- Monte Carlo maximum likelihood -------------------------------------------


@dataclass(frozen=True)
class McResult:
    variance: float
    stderr: float
    mean: float
    failed_trials: int
    estimates: np.ndarray


def _het_loglik(fam: StateFamily, rho, k: int, sum_z: complex, sum_abs2: float):
    s = fam.nbar(rho) + 1.0
    beta = fam.beta(rho)
    sq = sum_abs2 - 2.0 * np.real(np.conj(beta) * sum_z) + k * np.abs(beta) ** 2
    return -k * np.log(np.pi * s) - sq / s


def _count_loglik(fam: StateFamily, rho, center: complex, hist: np.ndarray):
    rho = np.atleast_1d(rho)
    logp = _counting_log_probs(fam, rho, center, len(hist) - 1)
    nz = hist > 0
    return logp[..., nz] @ hist[nz]


def _maximize(loglik) -> float:
    """Grid plus golden-section MLE over ``rho in [0, 1 - 1e-6]``."""
    grid = np.linspace(0.0, MLE_RHO_MAX, MLE_GRID_POINTS)
    values = np.asarray(loglik(grid), dtype=float)
    if not np.any(np.isfinite(values)):
        return math.nan
    values = np.where(np.isnan(values), -np.inf, values)
    j = int(np.argmax(values))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, MLE_GRID_POINTS - 1)]
    x, fx = golden_section_max(lambda r: float(np.atleast_1d(loglik(np.array([r])))[0]), lo, hi, MLE_TOL)
    if not math.isfinite(fx):
        return math.nan
    return x


def _sample_heterodyne(rng, fam: StateFamily, rho: float, n: int) -> np.ndarray:
    sd = math.sqrt((fam.nbar(rho) + 1.0) / 2.0)
    g = rng.standard_normal((n, 2))
    return fam.beta(rho) + sd * (g[:, 0] + 1j * g[:, 1])


def _sample_counts(rng, fam: StateFamily, rho: float, center: complex, n: int) -> np.ndarray:
    """Photon counts after displacing by ``-center``.

    A displaced thermal state is a Gaussian mixture of coherent states, so each
    count is Poisson with the squared modulus of a complex Gaussian amplitude.
    """
    sd = math.sqrt(fam.nbar(rho) / 2.0)
    g = rng.standard_normal((n, 2))
    amp = (fam.beta(rho) - center) + sd * (g[:, 0] + 1j * g[:, 1])
    return rng.poisson(np.abs(amp) ** 2)


def _het_estimate(fam: StateFamily, z: np.ndarray) -> float:
    k, sz, sa = len(z), complex(z.sum()), float(np.sum(np.abs(z) ** 2))
    return _maximize(lambda r: _het_loglik(fam, r, k, sz, sa))


@dataclass(frozen=True)
class _TrialSpec:
    fam: StateFamily
    rho_true: float
    scheme: MeasurementScheme
    k: int
    seed: int
    truth_center: complex | None
    sc: AttackScenario


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one trial; probes are drawn in order from it."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def _run_trial(spec: _TrialSpec, trial: int) -> float:
    rng = trial_rng(spec.seed, trial)
    fam, rho, k = spec.fam, spec.rho_true, spec.k
    kind = spec.scheme.kind
    try:
        if kind is SchemeKind.HETERODYNE:
            return _het_estimate(fam, _sample_heterodyne(rng, fam, rho, k))
        if kind in (SchemeKind.PHOTON_COUNTING, SchemeKind.SLD_AT_TRUTH):
            center = 0j if kind is SchemeKind.PHOTON_COUNTING else spec.truth_center
            hist = np.bincount(_sample_counts(rng, fam, rho, center, k)).astype(float)
            return _maximize(lambda r: _count_loglik(fam, r, center, hist))

        k1 = min(max(1, round(spec.scheme.pilot_fraction * k)), k - 1)
        z = _sample_heterodyne(rng, fam, rho, k1)
        pilot = _het_estimate(fam, z)
        if not math.isfinite(pilot):
            return math.nan
        pilot = min(pilot, PILOT_RHO_MAX)
        d_beta = -fam.beta(pilot) / (2.0 * (1.0 - pilot))
        center = _sld_from(fam.nbar(pilot), fam.beta(pilot), d_beta, fam.d_nbar, spec.sc).center
        hist = np.bincount(_sample_counts(rng, fam, rho, center, k - k1)).astype(float)
        sz, sa = complex(z.sum()), float(np.sum(np.abs(z) ** 2))
        return _maximize(
            lambda r: _het_loglik(fam, r, k1, sz, sa) + _count_loglik(fam, r, center, hist)
        )
    except (DegeneratePovmError, InfeasibleError, TailMassError, FloatingPointError):
        return math.nan


def _run_chunk(args) -> list[float]:
    spec, trials = args
    return [_run_trial(spec, t) for t in trials]


def _variance_stats(est: np.ndarray) -> tuple[float, float, float]:
    n = len(est)
    if n < 2:
        return math.nan, math.nan, math.nan
    mean = float(np.mean(est))
    dev = est - mean
    var = float(np.sum(dev**2) / (n - 1))
    m2 = float(np.mean(dev**2))
    m4 = float(np.mean(dev**4))
    se2 = max(m4 - m2**2 * (n - 3) / (n - 1), 0.0) / n
    return var, math.sqrt(se2), mean


def mc_estimator_variance(
    sc: AttackScenario,
    rho_true: float,
    scheme: MeasurementScheme,
    k: int,
    trials: int,
    seed: int,
    workers: int = 1,
) -> McResult:
    """Sample variance of the MLE of rho over ``trials`` experiments of ``k`` probes each.

    Trial ``t`` draws from its own stream keyed by ``(seed, t)``, so results are
    identical for any ``workers``.  Trials whose estimate could not be formed are
    counted in ``failed_trials`` and left out of the statistics.
    """
    if k < 10:
        raise InvalidParameterError("k must be >= 10")
    if trials < 100:
        raise InvalidParameterError("trials must be >= 100")
    if not 0 <= rho_true < 1:
        raise InvalidParameterError("rho_true must lie in [0, 1)")
    fam = StateFamily.from_scenario(sc)
    center = sld_spec(sc, rho_true).center if scheme.kind is SchemeKind.SLD_AT_TRUTH else None
    spec = _TrialSpec(fam, rho_true, scheme, int(k), int(seed), center, sc)

    if workers <= 1:
        estimates = [_run_trial(spec, t) for t in range(trials)]
    else:
        n_chunks = min(trials, 4 * workers)
        bounds = np.linspace(0, trials, n_chunks + 1).astype(int)
        chunks = [(spec, range(bounds[j], bounds[j + 1])) for j in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            estimates = [e for part in pool.map(_run_chunk, chunks) for e in part]

    est = np.array(estimates, dtype=float)
    ok = np.isfinite(est)
    var, se, mean = _variance_stats(est[ok])
    return McResult(var, se, mean, int((~ok).sum()), est)
