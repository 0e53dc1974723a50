"""Pulse sequences: Hahn echo, stimulated echo, Mims ENDOR.

Echo transients use the parametric picture: each offset packet contributes a
real excitation-window amplitude and the phase factor exp(i dw (t - 2 tau)),
scaled overall by sin(theta1) sin^2(theta2 / 2) and exp(-2 tau / T2).  This
keeps the echo maximum exactly at 2 tau and the transient conjugate-symmetric
about it; anyone needing the true rectangular-pulse profile can build it from
pulses.propagate_pulse.

ENDOR lines follow the first-order S = 1/2 expressions
    nu = | nu_n - mS A_k - (3/2) P_k (2m - 1) |
with Mims tau-dependence F = (1/2) sin^2(pi A tau) and a polarization sign
model (1 - Pe) + s Pe, s = +1 for the branch fed by the lower-energy electron
manifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS
from .errors import DomainError, UnsupportedModelError
from .pulses import BANDWIDTH_KAPPA, PulseSpec, flip_angle
from .spinsys import ElectronSpin, NuclearSpecies
from .thermal import two_level_polarization

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class SequenceSpec:
    """A pulse sequence: 'hahn' (2 pulses) or 'stimulated'/'mims' (3 pulses).

    tau_s is the first interpulse delay, t_wait_s the storage interval of
    three-pulse sequences.  rf describes the ENDOR radiofrequency pulse as
    (freq_mhz, duration_s, power_w) and is required for kind='mims'.
    """

    kind: str
    tau_s: float
    pulses: tuple[PulseSpec, ...]
    t_wait_s: float = 0.0
    rf: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("hahn", "stimulated", "mims"):
            raise DomainError(f"unknown sequence kind {self.kind!r}")
        if self.tau_s <= 0:
            raise DomainError("tau must be positive")
        n_expected = 2 if self.kind == "hahn" else 3
        if len(self.pulses) != n_expected:
            raise DomainError(f"{self.kind} sequence needs {n_expected} pulses")
        if self.kind != "hahn" and self.t_wait_s <= 0:
            raise DomainError("three-pulse sequences need a positive t_wait")
        if self.kind == "mims" and self.rf is None:
            raise DomainError("mims sequence needs an rf pulse")


@dataclass(frozen=True)
class EndorLine:
    """One first-order ENDOR line."""

    site_index: int
    manifold_ms: float
    freq_mhz: float
    amplitude: float


def echo_window_fwhm_mt(seq: SequenceSpec, g_eff: float) -> float:
    """Effective excitation window (mT FWHM): the longest pulse gates it."""
    t_longest = max(p.duration_s for p in seq.pulses)
    width_t = CONSTANTS.h * (BANDWIDTH_KAPPA / t_longest) / (g_eff * CONSTANTS.muB)
    return width_t * 1e3


def gaussian_ensemble(fwhm_mt: float, n: int, span_mt: float) -> tuple[np.ndarray, np.ndarray]:
    """Offset packets sampling a Gaussian line: (offsets_mt, weights).

    Weights carry the line amplitude at each packet times the grid spacing,
    so integrals over the sampled span are approximated by plain sums.
    """
    if fwhm_mt <= 0 or span_mt <= 0 or n < 1:
        raise DomainError("line width, span and packet count must be positive")
    offsets = np.linspace(-span_mt, span_mt, n)
    sigma = fwhm_mt * _FWHM_TO_SIGMA
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    weights = norm * np.exp(-0.5 * (offsets / sigma) ** 2)
    if n > 1:
        weights = weights * (offsets[1] - offsets[0])
    return offsets, weights


def default_echo_times(seq: SequenceSpec, n: int = 257, halfspan_factor: float = 4.0) -> np.ndarray:
    """Observation grid centered on 2 tau, spanning a few pulse durations."""
    t_longest = max(p.duration_s for p in seq.pulses)
    half = halfspan_factor * t_longest
    return 2.0 * seq.tau_s + np.linspace(-half, half, n)


def hahn_echo_transient(
    offsets_mt: np.ndarray,
    weights: np.ndarray,
    seq: SequenceSpec,
    t2_s: float,
    g_eff: float,
    times_s: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Complex two-pulse echo transient V(t) for an offset ensemble.

    Returns (times_s, v) with
    V(t) = sin(th1) sin^2(th2/2) e^(-2 tau / T2)
           * sum_i w_i A(dB_i) exp(i dw_i (t - 2 tau))
    where A is the Gaussian excitation window of the longest pulse.
    """
    if seq.kind != "hahn":
        raise DomainError("hahn_echo_transient needs a hahn sequence")
    if t2_s <= 0 or g_eff <= 0:
        raise DomainError("T2 and g must be positive")
    offsets_mt = np.asarray(offsets_mt, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if offsets_mt.size == 0 or offsets_mt.shape != weights.shape:
        raise DomainError("need a non-empty ensemble with matching weights")
    if times_s is None:
        times_s = default_echo_times(seq)

    th1 = flip_angle(seq.pulses[0], g_eff)
    th2 = flip_angle(seq.pulses[1], g_eff)
    scale = math.sin(th1) * math.sin(th2 / 2.0) ** 2 * math.exp(-2.0 * seq.tau_s / t2_s)

    window_sigma_mt = echo_window_fwhm_mt(seq, g_eff) * _FWHM_TO_SIGMA
    window = np.exp(-0.5 * (offsets_mt / window_sigma_mt) ** 2)
    dw = 2.0 * math.pi * g_eff * CONSTANTS.electron_hz_per_t * (offsets_mt * 1e-3)

    dt = times_s - 2.0 * seq.tau_s
    v = (weights * window) @ np.exp(1j * np.outer(dw, dt))
    return times_s, scale * v


def echo_decay_curve(taus_s: np.ndarray, t2_s: float, amplitude0: float = 1.0) -> np.ndarray:
    """Two-pulse echo amplitude A0 exp(-2 tau / T2) over a tau grid."""
    if t2_s <= 0:
        raise DomainError("T2 must be positive")
    taus_s = np.asarray(taus_s, dtype=float)
    if np.any(taus_s < 0):
        raise DomainError("tau must be non-negative")
    return amplitude0 * np.exp(-2.0 * taus_s / t2_s)


def stimulated_echo_amplitude(tau_s: float, t_wait_s: float, t1_s: float, t2_s: float) -> float:
    """Three-pulse echo amplitude (1/2) e^(-2 tau/T2) e^(-t_wait/T1)."""
    if tau_s < 0 or t_wait_s < 0:
        raise DomainError("delays must be non-negative")
    if t1_s <= 0 or t2_s <= 0:
        raise DomainError("T1 and T2 must be positive")
    return 0.5 * math.exp(-2.0 * tau_s / t2_s) * math.exp(-t_wait_s / t1_s)


def mims_efficiency(a_mhz: float, tau_s: float) -> float:
    """Mims ENDOR efficiency (1/2) sin^2(pi A tau); blind at A tau = n."""
    if tau_s <= 0:
        raise DomainError("tau must be positive")
    return 0.5 * math.sin(math.pi * a_mhz * 1e6 * tau_s) ** 2


def _branch_sign(ms: float, manifold_energies: dict[float, float]) -> float:
    """+1 for the branch fed by the lower-energy electron manifold."""
    lower_ms = min(manifold_energies, key=manifold_energies.get)
    return 1.0 if ms == lower_ms else -1.0


def endor_lines(
    electron: ElectronSpin,
    nuclei: tuple[NuclearSpecies, ...],
    b0_t: float,
    carrier_ghz: float,
    tau_s: float,
    temperature_k: float,
    *,
    rf_scale: float = 1.0,
) -> list[EndorLine]:
    """First-order Mims ENDOR stick spectrum for an S = 1/2 electron.

    Line amplitudes are fractional stimulated-echo changes: Mims efficiency
    times the polarization sign model, times an rf nutation scale in [0, 1].
    """
    if electron.s != 0.5:
        raise UnsupportedModelError("first-order ENDOR expressions require S = 1/2")
    if b0_t <= 0:
        raise DomainError("static field must be positive")
    if not 0.0 <= rf_scale <= 1.0:
        raise DomainError("rf scale must lie in [0, 1]")

    pe = two_level_polarization(carrier_ghz, temperature_k)
    # Electron Zeeman dominates: level energy tracks +mS for g > 0.
    manifold_energies = {-0.5: -1.0, +0.5: +1.0}

    lines: list[EndorLine] = []
    site = 0
    for nuc in nuclei:
        nu_n_mhz = nuc.gn * CONSTANTS.nuclear_hz_per_t * b0_t * 1e-6
        for a_mhz, p_mhz in nuc.site_couplings():
            eff = mims_efficiency(a_mhz, tau_s)
            for ms in (-0.5, +0.5):
                sign = _branch_sign(ms, manifold_energies)
                amp = eff * ((1.0 - pe) + sign * pe) * rf_scale
                m_upper = np.arange(nuc.i, -nuc.i, -1.0)  # m of the upper state of each pair
                for m in m_upper:
                    nu = abs(nu_n_mhz - ms * a_mhz - 1.5 * p_mhz * (2.0 * m - 1.0))
                    lines.append(EndorLine(site_index=site, manifold_ms=ms, freq_mhz=nu, amplitude=amp))
            site += 1
    return lines


def endor_spectrum(
    electron: ElectronSpin,
    nuclei: tuple[NuclearSpecies, ...],
    b0_t: float,
    carrier_ghz: float,
    tau_s: float,
    temperature_k: float,
    rf_grid_mhz: np.ndarray,
    *,
    linewidth_mhz: float = 0.05,
    rf_scale: float = 1.0,
) -> tuple[list[EndorLine], np.ndarray]:
    """Stick lines plus the composed fractional echo change on an rf grid.

    Each line suppresses (or at low temperature possibly enhances) the echo
    independently, one nucleus at a time, so the local effects e_k compose
    as a product: the returned spectrum is 1 - prod_k (1 - e_k).  A plain
    sum would overshoot past full suppression wherever many sites overlap.
    """
    rf_grid_mhz = np.asarray(rf_grid_mhz, dtype=float)
    if rf_grid_mhz.ndim != 1 or rf_grid_mhz.size < 2:
        raise DomainError("rf grid must be a 1-d array with at least two points")
    if np.any(np.diff(rf_grid_mhz) <= 0):
        raise DomainError("rf grid must be strictly ascending")
    if linewidth_mhz <= 0:
        raise DomainError("line width must be positive")

    lines = endor_lines(
        electron, nuclei, b0_t, carrier_ghz, tau_s, temperature_k, rf_scale=rf_scale
    )
    sigma = linewidth_mhz * _FWHM_TO_SIGMA
    untouched = np.ones_like(rf_grid_mhz)
    for line in lines:
        local = line.amplitude * np.exp(-0.5 * ((rf_grid_mhz - line.freq_mhz) / sigma) ** 2)
        untouched *= 1.0 - local
    return lines, 1.0 - untouched
