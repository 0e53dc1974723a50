"""Sweep engine: field sweeps, 2-D maps, ENDOR sweeps, time budgeting.

Every sweep point is measured through the same chain as the real receiver:
noise-free echo trace -> per-shot phase + noise -> per-shot magnitude ->
average -> amplitude readout, with the known Rayleigh floor subtracted by
default.  Per-point randomness is seeded from (master_seed, point index,
shot index) only, so results are bitwise reproducible and independent of
evaluation order; a thread pool can evaluate points concurrently without
changing a single bit of the output.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
import warnings

import numpy as np
from scipy.optimize import curve_fit

from .constants import CONSTANTS
from .detection import (
    NoiseModel,
    average_shots,
    derive_seed,
    detect_shot,
    echo_energy_amplitude,
    quadrature_magnitude,
    rayleigh_floor,
)
from .errors import DomainError, SimulationWarning
from .pulses import flip_angle
from .sequences import SequenceSpec, echo_window_fwhm_mt, endor_spectrum, mims_efficiency
from .spinsys import (
    SpinSystem,
    build_hamiltonian,
    effective_g,
    eigensystem,
    electron_sx,
    transition_table,
)
from .thermal import thermal_populations, two_level_polarization

MAGNET_MAX_T = 12.5

# Detector units per spin.  Keeps echo amplitudes for realistic samples
# (1e13..1e15 spins) far below the mixer safe level, so overload warnings
# fire only for genuinely pathological inputs.
SIGNAL_PER_SPIN = 1e-12

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
_GAUSS_LN2 = 4.0 * math.log(2.0)

# Echo trace sampling: 97 points from -4 to +2 echo widths around 2 tau puts
# the maximum exactly on a sample and leaves the leading third signal-free
# for the baseline estimate.
_TRACE_N = 97
_TRACE_SPAN = (-4.0, 2.0)


@dataclass(frozen=True)
class Axis:
    name: str
    unit: str
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise DomainError("axis needs a 1-d grid with at least one point")
        if vals.size > 1 and np.any(np.diff(vals) <= 0):
            raise DomainError(f"axis {self.name!r} grid must be strictly ascending")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class Dataset:
    """Axes, a matching value array, and enough metadata to re-run it."""

    axes: tuple[Axis, ...]
    values: np.ndarray
    metadata: dict

    def __post_init__(self) -> None:
        shape = tuple(len(ax.values) for ax in self.axes)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != shape:
            raise DomainError(f"values shape {vals.shape} does not match axes {shape}")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SweepPlan:
    """Acquisition geometry: grids, shots, timing, master seed."""

    axis1: Axis
    axis2: Axis | None = None
    shots_per_point: int = 1
    repetition_time_s: float = 1e-3
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.shots_per_point < 1:
            raise DomainError("shots_per_point must be >= 1")
        if self.repetition_time_s <= 0:
            raise DomainError("repetition time must be positive")

    def check_repetition_time(self, t1_s: float) -> None:
        if self.repetition_time_s < 3.0 * t1_s:
            warnings.warn(
                f"repetition time {self.repetition_time_s:.3g} s is below 3*T1 = "
                f"{3 * t1_s:.3g} s; echoes will be partially saturated",
                SimulationWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class SensitivityInput:
    spins_count: float
    excited_fraction: float
    snr_single_shot: float
    tau_s: float
    t2_s: float

    def __post_init__(self) -> None:
        if self.spins_count <= 0 or self.excited_fraction <= 0:
            raise DomainError("spin count and excited fraction must be positive")
        if not 0 < self.excited_fraction <= 1:
            raise DomainError("excited fraction must lie in (0, 1]")
        if self.snr_single_shot <= 0:
            raise DomainError("SNR must be positive")
        if self.tau_s < 0 or self.t2_s <= 0:
            raise DomainError("tau must be >= 0 and T2 > 0")


def sensitivity(inp: SensitivityInput) -> float:
    """Detectable-spin figure (N * f / SNR) * exp(-2 tau / T2).

    The echo paid the 2 tau decoherence penalty before it was measured, so
    the detectable-spin figure must include it.
    """
    return (
        inp.spins_count
        * inp.excited_fraction
        / inp.snr_single_shot
        * math.exp(-2.0 * inp.tau_s / inp.t2_s)
    )


def shot_plan(
    n_points: int,
    shots_per_point: int,
    repetition_time_s: float,
    t1_s: float | None = None,
    overhead_per_point_s: float = 0.0,
) -> float:
    """Wall-clock estimate of a sweep in seconds."""
    if n_points < 1 or shots_per_point < 1:
        raise DomainError("points and shots must be >= 1")
    if repetition_time_s <= 0 or overhead_per_point_s < 0:
        raise DomainError("repetition time must be positive, overhead non-negative")
    if t1_s is not None and repetition_time_s < 3.0 * t1_s:
        warnings.warn(
            f"repetition time {repetition_time_s:.3g} s is below 3*T1 = {3 * t1_s:.3g} s",
            SimulationWarning,
            stacklevel=2,
        )
    return n_points * (shots_per_point * repetition_time_s + overhead_per_point_s)


def _check_field_grid(grid: np.ndarray) -> None:
    if np.any(grid < 0) or np.any(grid > MAGNET_MAX_T):
        raise DomainError(f"field grid must stay within [0, {MAGNET_MAX_T}] T")


def ese_spectrum_amplitude(
    system: SpinSystem,
    carrier_ghz: float,
    fields_t: np.ndarray,
    seq: SequenceSpec,
    temperature_k: float,
    *,
    orientations: np.ndarray | None = None,
    orientation_weights: np.ndarray | None = None,
) -> np.ndarray:
    """Noise-free echo amplitude over a field grid.

    Per orientation and transition: moment * weight * Gaussian overlap of the
    transition with the carrier, the Gaussian combining the inhomogeneous
    linewidth with the excitation window.  Scaled to detector units by
    spins_count * SIGNAL_PER_SPIN, the nominal flip-angle echo factor and
    exp(-2 tau / T2(offset)).
    """
    fields_t = np.asarray(fields_t, dtype=float)
    _check_field_grid(fields_t)
    elec = system.electron
    if orientations is None:
        orientations = np.zeros((1, 3))
        orientation_weights = np.ones(1)
    orientations = np.atleast_2d(np.asarray(orientations, dtype=float))
    if orientation_weights is None:
        orientation_weights = np.full(len(orientations), 1.0 / len(orientations))
    orientation_weights = np.asarray(orientation_weights, dtype=float)

    sx = electron_sx(system)
    amp = np.zeros_like(fields_t)
    for orient, ow in zip(orientations, orientation_weights):
        g_eff = effective_g(elec.g_principal, elec.g_orientation, orient)
        th1 = flip_angle(seq.pulses[0], g_eff)
        th2 = flip_angle(seq.pulses[1], g_eff)
        echo_factor = math.sin(th1) * math.sin(th2 / 2.0) ** 2
        window_mt = echo_window_fwhm_mt(seq, g_eff)
        fwhm_mt = math.hypot(elec.linewidth_fwhm_mt, window_mt)
        sigma_mt = fwhm_mt * _FWHM_TO_SIGMA
        mt_per_ghz = 1e12 * CONSTANTS.h / (g_eff * CONSTANTS.muB)  # mT per GHz detuning
        b_center_t = carrier_ghz * 1e9 * CONSTANTS.h / (g_eff * CONSTANTS.muB)

        for i, b in enumerate(fields_t):
            h_mhz = build_hamiltonian(system, float(b), orient)
            levels, states = eigensystem(h_mhz)
            pops = thermal_populations(levels, temperature_k)
            point = 0.0
            for tr in transition_table(levels, states, sx, pops):
                offset_mt = (tr.freq_ghz - carrier_ghz) * mt_per_ghz
                overlap = math.exp(-0.5 * (offset_mt / sigma_mt) ** 2)
                if overlap > 1e-12:
                    point += tr.moment * tr.weight * overlap
            t2 = elec.t2_at((b - b_center_t) * 1e3)
            decay = math.exp(-2.0 * seq.tau_s / t2)
            amp[i] += ow * echo_factor * decay * point
    return system.spins_count * SIGNAL_PER_SPIN * amp


def _echo_trace(peak_amplitude: float, seq: SequenceSpec, g_eff: float) -> tuple[np.ndarray, np.ndarray, slice]:
    """Synthetic complex echo trace, its time grid and the echo window."""
    window_fwhm_hz = (
        g_eff * CONSTANTS.electron_hz_per_t * echo_window_fwhm_mt(seq, g_eff) * 1e-3
    )
    echo_fwhm_s = _GAUSS_LN2 / (math.pi * window_fwhm_hz)
    rel = np.linspace(_TRACE_SPAN[0], _TRACE_SPAN[1], _TRACE_N)
    center = 2.0 * seq.tau_s
    times = center + rel * echo_fwhm_s
    shape = np.exp(-_GAUSS_LN2 * rel**2)
    lo = int(np.searchsorted(rel, -1.2))
    hi = int(np.searchsorted(rel, 1.2, side="right"))
    return times, peak_amplitude * shape.astype(complex), slice(lo, hi)


def _sequence_span_s(seq: SequenceSpec) -> float:
    if seq.kind == "hahn":
        return 2.0 * seq.tau_s
    return 2.0 * seq.tau_s + seq.t_wait_s


def _measure_point(
    peak_amplitude: float,
    seq: SequenceSpec,
    g_eff: float,
    noise: NoiseModel,
    master_seed: int,
    point_index: int,
    shots: int,
    subtract_floor: bool,
    estimator: str,
) -> float:
    """Push one sweep point through the detection chain."""
    _times, trace, echo_win = _echo_trace(peak_amplitude, seq, g_eff)
    span = _sequence_span_s(seq)
    mags = []
    for k in range(shots):
        seed = derive_seed(master_seed, point_index, k)
        shot = detect_shot(trace, noise, seed, sequence_span_s=span)
        mags.append(quadrature_magnitude(shot))
    mean, _snr = average_shots(mags)
    if estimator == "peak":
        value = float(mean.max())
        if subtract_floor:
            value -= rayleigh_floor(noise.sigma)
        return value
    if estimator == "energy":
        # Energy estimator on the averaged trace; the per-sample noise power
        # after averaging N magnitude traces is 2 sigma^2 / N only for the
        # quadratures, so correct with the single-shot term scaled by 1/N.
        sigma_eff = noise.sigma / math.sqrt(len(mags))
        return echo_energy_amplitude(mean, sigma_eff if subtract_floor else 0.0, echo_win)
    raise DomainError(f"unknown estimator {estimator!r}")


def _map_points(worker, n_points: int, workers: int) -> list[float]:
    if workers <= 1:
        return [worker(i) for i in range(n_points)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, range(n_points)))


def _base_metadata(
    kind: str,
    system: SpinSystem,
    carrier_ghz: float,
    plan: SweepPlan,
    seq: SequenceSpec,
    noise: NoiseModel,
    temperature_k: float,
    subtract_floor: bool,
    estimator: str,
) -> dict:
    meta = {
        "kind": kind,
        "system": asdict(system),
        "carrier_ghz": carrier_ghz,
        "temperature_k": temperature_k,
        "sequence": asdict(seq),
        "noise": asdict(noise),
        "shots_per_point": plan.shots_per_point,
        "repetition_time_s": plan.repetition_time_s,
        "master_seed": plan.master_seed,
        "subtract_floor": subtract_floor,
        "rayleigh_floor": rayleigh_floor(noise.sigma),
        "estimator": estimator,
    }
    # Normalize tuples to lists so metadata compares equal across a
    # serialize/deserialize round trip.
    return json.loads(json.dumps(meta))


def field_sweep_ese(
    system: SpinSystem,
    carrier_ghz: float,
    plan: SweepPlan,
    seq: SequenceSpec,
    noise: NoiseModel,
    temperature_k: float,
    *,
    subtract_floor: bool = True,
    estimator: str = "peak",
    orientations: np.ndarray | None = None,
    orientation_weights: np.ndarray | None = None,
    workers: int = 1,
) -> Dataset:
    """Echo-detected field sweep at fixed carrier."""
    if plan.axis1.name != "field":
        raise DomainError("field sweep needs axis1 named 'field'")
    plan.check_repetition_time(system.electron.t1_s)
    fields = plan.axis1.values
    amp = ese_spectrum_amplitude(
        system,
        carrier_ghz,
        fields,
        seq,
        temperature_k,
        orientations=orientations,
        orientation_weights=orientation_weights,
    )
    g_eff = system.electron.g_iso

    def worker(i: int) -> float:
        return _measure_point(
            float(amp[i]), seq, g_eff, noise, plan.master_seed, i,
            plan.shots_per_point, subtract_floor, estimator,
        )

    values = np.array(_map_points(worker, len(fields), workers))
    meta = _base_metadata(
        "field_sweep_ese", system, carrier_ghz, plan, seq, noise,
        temperature_k, subtract_floor, estimator,
    )
    return Dataset(axes=(plan.axis1,), values=values, metadata=meta)


def decay_sweep(
    system: SpinSystem,
    carrier_ghz: float,
    b0_t: float,
    plan: SweepPlan,
    seq: SequenceSpec,
    noise: NoiseModel,
    temperature_k: float,
    *,
    subtract_floor: bool = True,
    estimator: str = "energy",
    workers: int = 1,
) -> Dataset:
    """Echo amplitude versus tau at fixed field.

    The energy estimator is the default readout here: a plain peak reading
    picks up the Rician bias at the low-amplitude tail and skews T2 fits.
    """
    if plan.axis1.name != "tau":
        raise DomainError("decay sweep needs axis1 named 'tau'")
    _check_field_grid(np.array([b0_t]))
    plan.check_repetition_time(system.electron.t1_s)
    taus = plan.axis1.values
    if np.any(taus <= 0):
        raise DomainError("tau grid must be positive")
    amp0 = float(
        ese_spectrum_amplitude(
            system, carrier_ghz, np.array([b0_t]),
            _with_tau(seq, float(taus[0])), temperature_k,
        )[0]
    )
    g_eff = system.electron.g_iso
    t2 = system.electron.t2_at(_field_offset_mt(system, carrier_ghz, b0_t))
    scale0 = math.exp(-2.0 * float(taus[0]) / t2)

    def worker(i: int) -> float:
        tau = float(taus[i])
        seq_i = _with_tau(seq, tau)
        peak = amp0 / scale0 * math.exp(-2.0 * tau / t2)
        return _measure_point(
            peak, seq_i, g_eff, noise, plan.master_seed, i,
            plan.shots_per_point, subtract_floor, estimator,
        )

    values = np.array(_map_points(worker, len(taus), workers))
    meta = _base_metadata(
        "decay_sweep", system, carrier_ghz, plan, seq, noise,
        temperature_k, subtract_floor, estimator,
    )
    meta["b0_t"] = b0_t
    return Dataset(axes=(plan.axis1,), values=values, metadata=meta)


def scan_2d(
    system: SpinSystem,
    carrier_ghz: float,
    plan: SweepPlan,
    seq: SequenceSpec,
    noise: NoiseModel,
    temperature_k: float,
    *,
    subtract_floor: bool = True,
    estimator: str = "peak",
    orientations: np.ndarray | None = None,
    orientation_weights: np.ndarray | None = None,
    workers: int = 1,
) -> Dataset:
    """Field x tau echo map: each row a tau decay, each column a spectrum."""
    if plan.axis2 is None:
        raise DomainError("scan_2d needs a second axis")
    if plan.axis1.name != "field" or plan.axis2.name != "tau":
        raise DomainError("scan_2d needs axis1 'field' and axis2 'tau'")
    plan.check_repetition_time(system.electron.t1_s)
    fields = plan.axis1.values
    taus = plan.axis2.values
    if np.any(taus <= 0):
        raise DomainError("tau grid must be positive")

    # The tau dependence separates from the spectrum, so diagonalize per
    # field once with the T2 decay stripped, then rescale per (field, tau).
    seq_ref = _with_tau(seq, float(taus[0]))
    amp_ref = ese_spectrum_amplitude(
        system, carrier_ghz, fields, seq_ref, temperature_k,
        orientations=orientations, orientation_weights=orientation_weights,
    )
    g_eff = system.electron.g_iso
    b_center_t = carrier_ghz * 1e9 * CONSTANTS.h / (g_eff * CONSTANTS.muB)
    t2_row = np.array([system.electron.t2_at((b - b_center_t) * 1e3) for b in fields])
    base_row = amp_ref / np.exp(-2.0 * float(taus[0]) / t2_row)

    n_tau = len(taus)

    def worker(idx: int) -> float:
        i, j = divmod(idx, n_tau)
        tau = float(taus[j])
        peak = float(base_row[i] * math.exp(-2.0 * tau / t2_row[i]))
        return _measure_point(
            peak, _with_tau(seq, tau), g_eff, noise, plan.master_seed, idx,
            plan.shots_per_point, subtract_floor, estimator,
        )

    flat = np.array(_map_points(worker, len(fields) * n_tau, workers))
    meta = _base_metadata(
        "scan_2d", system, carrier_ghz, plan, seq, noise,
        temperature_k, subtract_floor, estimator,
    )
    return Dataset(
        axes=(plan.axis1, plan.axis2),
        values=flat.reshape(len(fields), n_tau),
        metadata=meta,
    )


def endor_sweep(
    system: SpinSystem,
    carrier_ghz: float,
    b0_t: float,
    plan: SweepPlan,
    seq: SequenceSpec,
    noise: NoiseModel,
    temperature_k: float,
    *,
    linewidth_mhz: float = 0.05,
    rf_scale: float = 1.0,
    subtract_floor: bool = True,
    workers: int = 1,
) -> Dataset:
    """Mims ENDOR sweep: fractional stimulated-echo change vs rf frequency.

    The reference echo (rf far off resonance) is measured through the same
    chain with its own seeds, and the reported values are
    (reference - echo(rf)) / reference.
    """
    if seq.kind != "mims":
        raise DomainError("ENDOR sweep needs a mims sequence")
    if plan.axis1.name != "rf":
        raise DomainError("ENDOR sweep needs axis1 named 'rf'")
    _check_field_grid(np.array([b0_t]))
    plan.check_repetition_time(system.electron.t1_s)
    grid = plan.axis1.values
    if grid.size < 2:
        raise DomainError("rf grid needs at least two points")

    _lines, effect = endor_spectrum(
        system.electron, system.nuclei, b0_t, carrier_ghz, seq.tau_s,
        temperature_k, grid, linewidth_mhz=linewidth_mhz, rf_scale=rf_scale,
    )
    elec = system.electron
    echo0 = (
        system.spins_count
        * SIGNAL_PER_SPIN
        * 0.5
        * math.exp(-2.0 * seq.tau_s / elec.t2_at(_field_offset_mt(system, carrier_ghz, b0_t)))
        * math.exp(-seq.t_wait_s / elec.t1_s)
    )
    g_eff = elec.g_iso
    n_points = len(grid)

    def measure(idx: int, amplitude: float) -> float:
        return _measure_point(
            amplitude, seq, g_eff, noise, plan.master_seed, idx,
            plan.shots_per_point, subtract_floor, "peak",
        )

    reference = measure(n_points, echo0)  # off-resonance reference point
    if reference <= 0:
        raise DomainError("reference echo vanished; cannot normalize ENDOR sweep")

    def worker(i: int) -> float:
        meas = measure(i, echo0 * (1.0 - float(effect[i])))
        return (reference - meas) / reference

    values = np.array(_map_points(worker, n_points, workers))
    meta = _base_metadata(
        "endor_sweep", system, carrier_ghz, plan, seq, noise,
        temperature_k, subtract_floor, "peak",
    )
    meta["b0_t"] = b0_t
    meta["linewidth_mhz"] = linewidth_mhz
    meta["rf_scale"] = rf_scale
    return Dataset(axes=(plan.axis1,), values=values, metadata=meta)


def _with_tau(seq: SequenceSpec, tau_s: float) -> SequenceSpec:
    return SequenceSpec(
        kind=seq.kind, tau_s=tau_s, pulses=seq.pulses, t_wait_s=seq.t_wait_s, rf=seq.rf
    )


def _field_offset_mt(system: SpinSystem, carrier_ghz: float, b0_t: float) -> float:
    g_eff = system.electron.g_iso
    b_center_t = carrier_ghz * 1e9 * CONSTANTS.h / (g_eff * CONSTANTS.muB)
    return (b0_t - b_center_t) * 1e3


def fit_t2(taus_s: np.ndarray, amplitudes: np.ndarray) -> tuple[float, float]:
    """Fit A0 exp(-2 tau / T2); returns (t2_s, a0)."""
    taus_s = np.asarray(taus_s, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    if taus_s.shape != amplitudes.shape or taus_s.size < 3:
        raise DomainError("need at least three matching (tau, amplitude) points")
    positive = amplitudes > 0
    if positive.sum() < 3:
        raise DomainError("need at least three positive amplitudes to seed the fit")
    slope, intercept = np.polyfit(2.0 * taus_s[positive], np.log(amplitudes[positive]), 1)
    t2_guess = -1.0 / slope if slope < 0 else taus_s.max()
    a0_guess = math.exp(intercept)
    popt, _ = curve_fit(
        lambda t, a0, t2: a0 * np.exp(-2.0 * t / t2),
        taus_s,
        amplitudes,
        p0=(a0_guess, t2_guess),
        maxfev=10000,
    )
    return float(popt[1]), float(popt[0])
