import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbsguard.core_model import (
    Convention,
    DisplacedThermalState,
    GaussianChannel,
    SegmentPhysical,
    apply_channel,
    bose_occupation,
    cascade,
    compose,
    segment_channel,
    segment_gain_params,
    susceptibility,
)
from sbsguard.errors import InvalidParameterError, NonPhysicalChannelError
from scipy import constants


def random_channel(rng):
    mu = complex(rng.uniform(0.5, 1.1), rng.uniform(-0.2, 0.2))
    return GaussianChannel.from_scalars(mu, rng.uniform(0, 0.3))


def test_susceptibility_examples():
    assert susceptibility(5, 5, 2) == pytest.approx(1.0 + 0j, abs=1e-15)
    assert susceptibility(6, 5, 2) == pytest.approx(0.5 - 0.5j, abs=1e-15)
    assert susceptibility(5 + 2, 5, 2) == pytest.approx(0.2 - 0.4j, abs=1e-15)


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_susceptibility_rejects_nonpositive_linewidth(gamma):
    with pytest.raises(InvalidParameterError):
        susceptibility(1.0, 1.0, gamma)


def test_susceptibility_peaks_on_resonance():
    omegas = np.linspace(-10, 10, 2001)
    mags = [abs(susceptibility(w, 0.0, 1.3)) for w in omegas]
    assert omegas[int(np.argmax(mags))] == pytest.approx(0.0, abs=1e-12)


def _omega_for(ratio, temperature=300.0):
    return ratio * constants.k * temperature / constants.hbar


def test_bose_occupation():
    assert bose_occupation(_omega_for(math.log(2)), 300.0) == pytest.approx(1.0, rel=1e-12)
    assert bose_occupation(_omega_for(math.log(1.5)), 300.0) == pytest.approx(2.0, rel=1e-12)
    assert bose_occupation(_omega_for(60.0), 300.0) < 1e-12
    with pytest.raises(InvalidParameterError):
        bose_occupation(0.0, 300.0)
    with pytest.raises(InvalidParameterError):
        bose_occupation(1e10, -1.0)


def test_segment_gain_no_pump():
    seg = SegmentPhysical(eta=0.9, g_tilde=0, gamma=1, omega=3, omega_b=2, delta_z=0.1)
    mu, kappa, nu = segment_gain_params(seg)
    assert mu == pytest.approx(math.sqrt(0.9))
    assert kappa == 0 and nu == 0


def test_segment_gain_on_resonance():
    seg = SegmentPhysical(eta=1.0, g_tilde=1.0, gamma=2.0, omega=5, omega_b=5, delta_z=0.01, n_th=1)
    mu, kappa, nu = segment_gain_params(seg)
    assert kappa == pytest.approx(0.01, abs=1e-15)
    assert mu == pytest.approx(1.01, abs=1e-15)
    assert nu == pytest.approx(-1j * math.sqrt(2) * 0.01, abs=1e-15)
    ch = segment_channel(seg)
    np.testing.assert_allclose(ch.X, 1.01 * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(ch.Y, 3e-4 * np.eye(2), atol=1e-15)


@given(g=st.complex_numbers(min_magnitude=1e-3, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_on_resonance_kappa_real_positive(g):
    seg = SegmentPhysical(eta=0.9, g_tilde=g, gamma=1.5, omega=2, omega_b=2, delta_z=0.2)
    _, kappa, _ = segment_gain_params(seg)
    assert kappa.imag == 0 and kappa.real > 0


@pytest.mark.parametrize("eta", [0.98, 1.0, 0.5])
def test_attenuation_segment(eta):
    seg = SegmentPhysical(eta=eta, g_tilde=0, gamma=1, omega=0, omega_b=0, delta_z=1)
    ch = segment_channel(seg)
    np.testing.assert_allclose(ch.X, math.sqrt(eta) * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(ch.Y, (1 - eta) / 2 * np.eye(2), atol=1e-15)
    ref = GaussianChannel.attenuator(eta)
    np.testing.assert_array_equal(ch.X, ref.X)
    np.testing.assert_array_equal(ch.Y, ref.Y)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(eta=0.0), dict(eta=1.2), dict(gamma=0.0), dict(delta_z=0.0), dict(n_th=-1.0),
    ],
)
def test_segment_invariants(kwargs):
    base = dict(eta=0.9, g_tilde=0.1, gamma=1.0, omega=0, omega_b=0, delta_z=1.0)
    base.update(kwargs)
    with pytest.raises(InvalidParameterError):
        SegmentPhysical(**base)


def test_channel_rejects_bad_noise():
    with pytest.raises(InvalidParameterError):
        GaussianChannel(np.eye(2), [[1, 0.5], [0.2, 1]])
    with pytest.raises(InvalidParameterError):
        GaussianChannel(np.eye(2), -np.eye(2))


def test_compose_identity_and_losses():
    rng = np.random.default_rng(3)
    c = random_channel(rng)
    ident = GaussianChannel.identity()
    for out in (compose(ident, c), compose(c, ident)):
        np.testing.assert_allclose(out.X, c.X, atol=1e-15)
        np.testing.assert_allclose(out.Y, c.Y, atol=1e-15)
    e1, e2 = 0.7, 0.4
    out = compose(GaussianChannel.attenuator(e2), GaussianChannel.attenuator(e1))
    np.testing.assert_allclose(out.X, math.sqrt(e1 * e2) * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(out.Y, (1 - e1 * e2) / 2 * np.eye(2), atol=1e-15)


def test_compose_associative():
    rng = np.random.default_rng(11)
    for _ in range(50):
        c1, c2, c3 = (random_channel(rng) for _ in range(3))
        a = compose(c3, compose(c2, c1))
        b = compose(compose(c3, c2), c1)
        np.testing.assert_allclose(a.X, b.X, atol=1e-12)
        np.testing.assert_allclose(a.Y, b.Y, atol=1e-12)


def test_cascade_pure_loss_closed_form():
    res = cascade([GaussianChannel.attenuator(0.98)] * 100)
    assert res.mu_tot == pytest.approx(0.98**50, rel=1e-13)
    assert res.mu_tot.real == pytest.approx(0.36417, abs=5e-6)
    # geometric sum of (1-eta)/2 eta^j, j = 0..99
    geometric = math.fsum(0.01 * 0.98**j for j in range(100))
    assert res.y_tot == pytest.approx(geometric, abs=1e-14)
    assert res.y_tot == pytest.approx((1 - 0.98**100) / 2, abs=1e-14)
    np.testing.assert_allclose(res.channel.X, 0.98**50 * np.eye(2), atol=1e-14)
    np.testing.assert_allclose(res.channel.Y, res.y_tot * np.eye(2), atol=1e-14)


def test_cascade_single_and_empty():
    seg = SegmentPhysical(eta=0.95, g_tilde=0.3 + 0.1j, gamma=1, omega=0.4, omega_b=0, delta_z=0.1, n_th=2)
    res = cascade([segment_channel(seg)])
    np.testing.assert_array_equal(res.channel.X, segment_channel(seg).X)
    np.testing.assert_array_equal(res.channel.Y, segment_channel(seg).Y)
    with pytest.raises(InvalidParameterError):
        cascade([])


def test_cascade_scalar_form_matches_fold_1000_random_segments():
    rng = np.random.default_rng(2024)
    segs = []
    for _ in range(1000):
        seg = SegmentPhysical(
            eta=rng.uniform(0.995, 1.0),
            g_tilde=complex(rng.normal(0, 0.1), rng.normal(0, 0.1)),
            gamma=rng.uniform(0.5, 2),
            omega=rng.uniform(-1, 1),
            omega_b=0.0,
            delta_z=0.01,
            n_th=rng.uniform(0, 3),
        )
        segs.append(segment_channel(seg))
    res = cascade(segs)
    assert res.channel.is_phase_insensitive(tol=1e-12)
    mu, y = res.mu_tot, res.y_tot
    X = [[mu.real, -mu.imag], [mu.imag, mu.real]]
    np.testing.assert_allclose(res.channel.X, X, atol=1e-12)
    np.testing.assert_allclose(res.channel.Y, y * np.eye(2), atol=1e-12)


@settings(max_examples=50)
@given(
    st.lists(
        st.tuples(st.floats(0.3, 1.0), st.floats(-0.5, 0.5), st.floats(0, 1), st.floats(0, 2)),
        min_size=1,
        max_size=12,
    )
)
def test_constructed_channels_are_phase_insensitive(params):
    chans = [
        segment_channel(SegmentPhysical(eta=e, g_tilde=g, gamma=1.0, omega=w, omega_b=0, delta_z=0.3, n_th=n))
        for e, g, w, n in params
    ]
    res = cascade(chans)
    for ch in chans + [res.channel]:
        assert ch.is_phase_insensitive(tol=1e-12)
        assert ch.y >= 0


def test_apply_channel_pure_loss_conventions():
    E = 5.0
    total = cascade([GaussianChannel.attenuator(0.98)] * 100).channel
    probe = DisplacedThermalState(0.0, math.sqrt(E))
    lit = apply_channel(total, probe, Convention.PAPER_LITERAL)
    assert lit.nbar == pytest.approx((1 - 0.98**100) / 2, abs=1e-12)
    assert lit.alpha == pytest.approx(0.98**50 * math.sqrt(E), abs=1e-12)
    phys = apply_channel(total, probe, Convention.PHYSICAL)
    assert phys.nbar == 0.0
    assert phys.alpha == lit.alpha


@pytest.mark.parametrize("conv", list(Convention))
def test_apply_identity(conv):
    s = DisplacedThermalState(0.7, 0.3 - 1.1j)
    out = apply_channel(GaussianChannel.identity(), s, conv)
    assert out.nbar == pytest.approx(s.nbar, abs=1e-15)
    assert out.alpha == s.alpha


@settings(max_examples=60)
@given(st.lists(st.floats(0.05, 1.0), min_size=1, max_size=30), st.floats(0, 10))
def test_physical_coherent_through_loss_stays_coherent(etas, E):
    res = cascade([GaussianChannel.attenuator(e) for e in etas])
    out = apply_channel(res.channel, DisplacedThermalState(0.0, math.sqrt(E)), "Physical")
    assert out.nbar == 0.0


def test_physical_rejects_sub_vacuum_output():
    lossy = GaussianChannel.from_scalars(0.5, 0.0)  # attenuation without vacuum admixture
    with pytest.raises(NonPhysicalChannelError):
        apply_channel(lossy, DisplacedThermalState(0.0, 1.0), Convention.PHYSICAL)


def test_convention_parse():
    assert Convention.parse("paperliteral") is Convention.PAPER_LITERAL
    assert Convention.parse("Physical") is Convention.PHYSICAL
    with pytest.raises(InvalidParameterError):
        Convention.parse("other")


def test_state_invariants():
    with pytest.raises(InvalidParameterError):
        DisplacedThermalState(-0.1, 0)
    with pytest.raises(InvalidParameterError):
        DisplacedThermalState(0.1, complex(math.inf, 0))
    assert cmath.isclose(DisplacedThermalState(1, 2).alpha, 2 + 0j)
