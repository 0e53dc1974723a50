import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hfepr.constants import CONSTANTS
from hfepr.errors import DomainError, UnsupportedModelError
from hfepr.pulses import PulseSpec, b1_for_angle, excitation_window_mt
from hfepr.sequences import (
    SequenceSpec,
    default_echo_times,
    echo_decay_curve,
    echo_window_fwhm_mt,
    endor_lines,
    endor_spectrum,
    gaussian_ensemble,
    hahn_echo_transient,
    mims_efficiency,
    stimulated_echo_amplitude,
)
from hfepr.spinsys import ElectronSpin, NuclearSpecies


def _pulse(duration_s, angle, g=2.0023):
    return PulseSpec(
        duration_s=duration_s,
        b1_mt=b1_for_angle(angle, duration_s, g, "circular"),
        polarization_mode="circular",
    )


def _hahn(tau_s=1.5e-6, t1=650e-9, t2=650e-9, a1=math.pi / 2, a2=math.pi):
    return SequenceSpec(kind="hahn", tau_s=tau_s, pulses=(_pulse(t1, a1), _pulse(t2, a2)))


# --- spec validation ---------------------------------------------------------

def test_sequence_validation():
    p = _pulse(100e-9, math.pi / 2)
    with pytest.raises(DomainError):
        SequenceSpec(kind="hahn", tau_s=1e-6, pulses=(p, p, p))
    with pytest.raises(DomainError):
        SequenceSpec(kind="stimulated", tau_s=1e-6, pulses=(p, p))
    with pytest.raises(DomainError):
        SequenceSpec(kind="mims", tau_s=1e-6, pulses=(p, p, p), t_wait_s=1e-4)  # no rf
    with pytest.raises(DomainError):
        SequenceSpec(kind="carr", tau_s=1e-6, pulses=(p, p))
    SequenceSpec(kind="mims", tau_s=1e-6, pulses=(p, p, p), t_wait_s=1e-4,
                 rf=(17.0, 150e-6, 10.0))


def test_echo_window_gated_by_longest_pulse():
    g = 2.0023
    seq = SequenceSpec(kind="hahn", tau_s=1e-6,
                       pulses=(_pulse(200e-9, 0.3), _pulse(650e-9, 0.5)))
    assert echo_window_fwhm_mt(seq, g) == excitation_window_mt(650e-9, g)


def test_default_echo_times_centered():
    seq = _hahn()
    times = default_echo_times(seq, n=257)
    assert times.size == 257
    assert np.all(np.diff(times) > 0)
    assert times[128] == pytest.approx(2.0 * seq.tau_s, rel=1e-12)


def test_gaussian_ensemble_normalization():
    offsets, weights = gaussian_ensemble(1.0, 4001, 5.0)
    assert offsets.size == weights.size == 4001
    assert np.allclose(offsets, -offsets[::-1], atol=1e-12)
    # Sum approximates the unit integral over +-5 sigma-ish span
    assert weights.sum() == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        gaussian_ensemble(-1.0, 100, 5.0)


# --- two-pulse transient ------------------------------------------------------

def _broadline_ensemble(n=801):
    # 38 mT line dwarfs the 0.041 mT window: offsets effectively uniform.
    return gaussian_ensemble(38.0, n, 0.2)


def test_echo_peaks_at_twice_tau():
    offsets, weights = _broadline_ensemble()
    seq = _hahn(a1=2 * math.pi / 3, a2=2 * math.pi / 3)
    times, v = hahn_echo_transient(offsets, weights, seq, 1.49e-6, 2.0059333333333333)
    assert times[np.argmax(np.abs(v))] == pytest.approx(2.0 * seq.tau_s, rel=1e-9)


def test_echo_width_is_fourier_pair_of_excited_slice():
    # 650 ns pulses excite kappa/t = 1.154 MHz; the echo envelope FWHM is
    # (4 ln2 / pi) / dnu = 765 ns, not the pulse length itself.
    offsets, weights = _broadline_ensemble(3201)
    seq = _hahn(a1=2 * math.pi / 3, a2=2 * math.pi / 3)
    times, v = hahn_echo_transient(
        offsets, weights, seq, 1.49e-6, 2.0059333333333333,
        times_s=default_echo_times(seq, n=4097),
    )
    env = np.abs(v)
    above = times[env >= env.max() / 2.0]
    fwhm_ns = (above[-1] - above[0]) * 1e9
    predicted = (4.0 * math.log(2.0) / math.pi) / (0.75 / 650e-9) * 1e9
    assert predicted == pytest.approx(765.0, abs=1.0)
    assert fwhm_ns == pytest.approx(predicted, rel=0.1)
    # Sanity band required of the width: within 1.5x of the pulse length.
    assert 650.0 / 1.5 <= fwhm_ns <= 650.0 * 1.5


def test_echo_amplitude_flip_angle_factors():
    offsets, weights = _broadline_ensemble()
    g, t2 = 2.0023, 1.49e-6  # pulses below are calibrated at this same g
    _, v_ref = hahn_echo_transient(offsets, weights, _hahn(), t2, g)
    _, v_half = hahn_echo_transient(offsets, weights, _hahn(a2=math.pi / 2), t2, g)
    # sin^2(pi/2 / 2) / sin^2(pi / 2) = 1/2
    ratio = np.abs(v_half).max() / np.abs(v_ref).max()
    assert ratio == pytest.approx(0.5, rel=1e-9)


def test_echo_amplitude_t2_decay():
    offsets, weights = _broadline_ensemble()
    g, t2 = 2.0, 1.49e-6
    _, v1 = hahn_echo_transient(offsets, weights, _hahn(tau_s=1.0e-6), t2, g)
    _, v2 = hahn_echo_transient(offsets, weights, _hahn(tau_s=2.0e-6), t2, g)
    expected = math.exp(-2.0 * (2.0e-6 - 1.0e-6) / t2)
    assert np.abs(v2).max() / np.abs(v1).max() == pytest.approx(expected, rel=1e-9)


def test_transient_input_validation():
    seq = _hahn()
    with pytest.raises(DomainError):
        hahn_echo_transient(np.array([]), np.array([]), seq, 1e-6, 2.0)
    with pytest.raises(DomainError):
        hahn_echo_transient(np.zeros(3), np.zeros(2), seq, 1e-6, 2.0)
    mims = SequenceSpec(kind="mims", tau_s=1e-6,
                        pulses=(_pulse(1e-7, 1.0),) * 3, t_wait_s=1e-4,
                        rf=(17.0, 1e-4, 10.0))
    with pytest.raises(DomainError):
        hahn_echo_transient(np.zeros(3), np.ones(3) / 3, mims, 1e-6, 2.0)


# --- analytic amplitudes ------------------------------------------------------

def test_echo_decay_curve_formula():
    taus = np.array([0.0, 1e-6, 2e-6])
    out = echo_decay_curve(taus, 1.49e-6, amplitude0=3.0)
    assert np.allclose(out, 3.0 * np.exp(-2.0 * taus / 1.49e-6), rtol=1e-12)


@given(st.floats(1e-8, 1e-5), st.floats(1e-6, 1e-2), st.floats(1e-5, 1e-1),
       st.floats(1e-7, 1e-4))
def test_stimulated_echo_formula(tau, t_wait, t1, t2):
    amp = stimulated_echo_amplitude(tau, t_wait, t1, t2)
    assert math.isclose(
        amp, 0.5 * math.exp(-2.0 * tau / t2) * math.exp(-t_wait / t1), rel_tol=1e-12
    )
    assert 0.0 <= amp <= 0.5


def test_mims_efficiency_extremes():
    # Maximum exactly 1/2 at A tau = 1/2, blind spots at integer A tau.
    assert mims_efficiency(1.0, 500e-9) == 0.5
    assert mims_efficiency(0.5 / 0.6, 600e-9) == 0.5
    for n in range(1, 6):
        a_mhz = n / 600e-9 / 1e6
        assert abs(mims_efficiency(a_mhz, 600e-9)) < 1e-9


@given(st.floats(-300.0, 300.0), st.floats(1e-8, 1e-5))
def test_mims_efficiency_bounds(a_mhz, tau_s):
    eff = mims_efficiency(a_mhz, tau_s)
    assert 0.0 <= eff <= 0.5


# --- ENDOR --------------------------------------------------------------------

def _potassium(multiplicity=8):
    spread_a = (0.0, 0.03, -0.03, 0.06, -0.06, 0.09, -0.09, 0.12)[:multiplicity]
    spread_p = (0.0, 0.02, -0.02, 0.04, -0.04, 0.06, -0.06, 0.08)[:multiplicity]
    return NuclearSpecies(
        label="39K", i=1.5, gn=0.2609, a_mhz=0.85, p_mhz=0.22,
        multiplicity=multiplicity,
        site_spread=tuple(zip(spread_a, spread_p)),
    )


def _electron_half(g=1.9878):
    return ElectronSpin(s=0.5, g_principal=(g,) * 3, t1_s=10e-3, t2_s=5e-6)


def test_endor_requires_spin_half():
    elec = ElectronSpin(s=1.5, g_principal=(2.0,) * 3)
    with pytest.raises(UnsupportedModelError):
        endor_lines(elec, (_potassium(1),), 8.626, 240.0, 600e-9, 5.0)


def test_endor_line_count_and_structure():
    lines = endor_lines(_electron_half(), (_potassium(),), 8.626, 240.0, 600e-9, 5.0)
    # 8 sites x 2 electron manifolds x (2I = 3) nuclear transitions
    assert len(lines) == 48
    per_site = {}
    for line in lines:
        per_site.setdefault(line.site_index, []).append(line)
    assert len(per_site) == 8
    for site_lines in per_site.values():
        by_ms = {}
        for line in site_lines:
            by_ms.setdefault(line.manifold_ms, []).append(line.freq_mhz)
        assert set(by_ms) == {-0.5, +0.5}
        for freqs in by_ms.values():
            assert len(freqs) == 3


def test_endor_nuclear_larmor_anchor():
    # 39K at 8.626 T: gn muN B / h = 17.155 MHz; zero couplings collapse
    # all lines onto it.
    bare = NuclearSpecies(label="39K", i=1.5, gn=0.2609, a_mhz=0.0)
    lines = endor_lines(_electron_half(), (bare,), 8.626, 240.0, 600e-9, 5.0)
    nu_n = 0.2609 * CONSTANTS.nuclear_hz_per_t * 8.626 * 1e-6
    assert nu_n == pytest.approx(17.1548, abs=2e-3)
    for line in lines:
        assert line.freq_mhz == pytest.approx(nu_n, abs=1e-9)


def test_endor_quadrupole_triplet_spacing():
    nuc = NuclearSpecies(label="q", i=1.5, gn=0.2609, a_mhz=0.85, p_mhz=0.22)
    lines = endor_lines(_electron_half(), (nuc,), 8.626, 240.0, 600e-9, 5.0)
    lower = sorted(l.freq_mhz for l in lines if l.manifold_ms == -0.5)
    gaps = np.diff(lower)
    assert np.allclose(gaps, 3.0 * 0.22, atol=1e-9)


def test_endor_sign_flip_with_polarization():
    nuc = _potassium()
    cold = endor_lines(_electron_half(), (nuc,), 8.626, 240.0, 600e-9, 5.0)
    warm = endor_lines(_electron_half(), (nuc,), 8.626, 240.0, 600e-9, 300.0)
    cold_by_ms = {ms: [l.amplitude for l in cold if l.manifold_ms == ms]
                  for ms in (-0.5, 0.5)}
    assert all(a > 0 for a in cold_by_ms[-0.5])
    assert all(a < 0 for a in cold_by_ms[+0.5])
    assert all(l.amplitude > 0 for l in warm)


def test_endor_mirror_under_hyperfine_negation():
    nuc = _potassium()
    flipped = NuclearSpecies(
        label=nuc.label, i=nuc.i, gn=nuc.gn, a_mhz=-nuc.a_mhz, p_mhz=nuc.p_mhz,
        multiplicity=nuc.multiplicity,
        site_spread=tuple((-da, dp) for da, dp in nuc.site_spread),
    )
    elec = _electron_half()
    nu_n = nuc.gn * CONSTANTS.nuclear_hz_per_t * 8.626 * 1e-6
    base = endor_lines(elec, (nuc,), 8.626, 240.0, 600e-9, 5.0)
    mirror = endor_lines(elec, (flipped,), 8.626, 240.0, 600e-9, 5.0)
    got = sorted(round(2.0 * nu_n - l.freq_mhz, 9) for l in mirror)
    want = sorted(round(l.freq_mhz, 9) for l in base)
    assert got == pytest.approx(want, abs=1e-9)


def test_endor_rf_scale_scales_amplitudes():
    nuc = _potassium(1)
    full = endor_lines(_electron_half(), (nuc,), 8.626, 240.0, 600e-9, 300.0)
    half = endor_lines(_electron_half(), (nuc,), 8.626, 240.0, 600e-9, 300.0,
                       rf_scale=0.5)
    for a, b in zip(full, half):
        assert b.amplitude == pytest.approx(0.5 * a.amplitude, rel=1e-12)
    with pytest.raises(DomainError):
        endor_lines(_electron_half(), (nuc,), 8.626, 240.0, 600e-9, 300.0, rf_scale=1.5)


def test_endor_spectrum_grid_and_composition():
    elec = _electron_half()
    nuc = NuclearSpecies(label="x", i=0.5, gn=0.2609, a_mhz=1.0 / 1.2)  # A tau = 1/2
    grid = np.linspace(14.0, 20.0, 2401)
    lines, effect = endor_spectrum(elec, (nuc,), 8.626, 240.0, 600e-9, 300.0, grid)
    # Single line per manifold at this temperature: peak equals the stick
    # amplitude at the line position (grid quantization costs a few 1e-3).
    for line in lines:
        idx = np.abs(grid - line.freq_mhz).argmin()
        assert effect[idx] == pytest.approx(line.amplitude, rel=5e-3)
    with pytest.raises(DomainError):
        endor_spectrum(elec, (nuc,), 8.626, 240.0, 600e-9, 300.0, grid[::-1])


def test_endor_spectrum_overlap_saturates():
    # Two coincident sites: composed effect 1 - (1 - e)^2, not 2e.
    nuc = NuclearSpecies(label="x", i=0.5, gn=0.2609, a_mhz=1.0 / 1.2,
                         multiplicity=2, site_spread=((0.0, 0.0), (0.0, 0.0)))
    elec = _electron_half()
    grid = np.linspace(16.0, 19.0, 1201)
    lines, effect = endor_spectrum(elec, (nuc,), 8.626, 240.0, 600e-9, 300.0, grid)
    single = [l.amplitude for l in lines if l.manifold_ms == -0.5][0]
    idx = np.abs(grid - lines[0].freq_mhz).argmin()
    composed = 1.0 - (1.0 - single) ** 2
    assert effect[idx] == pytest.approx(composed, rel=1e-3)
    assert effect.max() <= 1.0
