"""Superheterodyne quadrature detection with magnitude processing.

The source phase is not locked shot-to-shot, so the receiver computes the
magnitude sqrt(I^2 + Q^2) per shot BEFORE averaging; averaging the raw
quadratures would cancel the signal along with the noise.  The price is a
Rayleigh noise floor of sigma sqrt(pi/2) on empty traces, which is known
exactly from the configured sigma and can be subtracted downstream.

All randomness flows through numpy Generators seeded by derive_seed, a pure
function of the caller's key tuple, so every shot is reproducible in
isolation and under any execution order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MixerOverloadWarning

RAYLEIGH_MEAN = math.sqrt(math.pi / 2.0)
RAYLEIGH_STD = math.sqrt(2.0 - math.pi / 2.0)

# Leakage of the transmit pulse into the receiver, after the isolation
# chain; the receiver is blanked for DEAD_TIME after each pulse.
BREAKTHROUGH_ATTENUATION_DB = 25.0
DEAD_TIME_S = 500e-9

# Input level above which the subharmonic mixer is at risk.
MIXER_SAFE_LEVEL = 1e6


@dataclass(frozen=True)
class NoiseModel:
    """Per-quadrature Gaussian noise and the shot-phase model.

    phase_mode:
      fixed          - every shot at fixed_phase_rad
      uniform_random - independent U[0, 2 pi) carrier phase per shot
      random_walk    - uniform carrier phase plus a Gaussian increment of
                       variance walk_rate_rad2_per_s * span accumulated over
                       the sequence span
    """

    sigma: float = 0.0
    phase_mode: str = "uniform_random"
    walk_rate_rad2_per_s: float = 0.0
    fixed_phase_rad: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise DomainError("noise sigma must be non-negative")
        if self.phase_mode not in ("fixed", "uniform_random", "random_walk"):
            raise DomainError(f"unknown phase mode {self.phase_mode!r}")
        if self.walk_rate_rad2_per_s < 0:
            raise DomainError("walk rate must be non-negative")


@dataclass(frozen=True)
class ShotRecord:
    """Raw I/Q of a single shot plus the phase and seed that made it."""

    v_i: np.ndarray
    v_q: np.ndarray
    shot_phase_rad: float
    seed: int


def derive_seed(*keys: int) -> int:
    """Deterministic 64-bit seed from an integer key tuple."""
    if not keys:
        raise DomainError("need at least one key")
    return int(np.random.SeedSequence(tuple(int(k) for k in keys)).generate_state(1, np.uint64)[0])


def detect_shot(
    signal: np.ndarray,
    noise: NoiseModel,
    seed: int,
    *,
    sequence_span_s: float = 0.0,
) -> ShotRecord:
    """One acquisition: rotate the complex signal by the shot phase, add noise.

    sequence_span_s is the dephasing span (2 tau for a two-pulse echo) used
    by the random_walk phase mode.
    """
    signal = np.asarray(signal, dtype=complex)
    if signal.ndim != 1:
        raise DomainError("signal must be a 1-d complex array")
    peak = np.abs(signal).max() if signal.size else 0.0
    if peak > MIXER_SAFE_LEVEL:
        warnings.warn(
            f"input level {peak:.3g} exceeds the safe mixer level {MIXER_SAFE_LEVEL:.3g}",
            MixerOverloadWarning,
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    if noise.phase_mode == "fixed":
        phase = noise.fixed_phase_rad
    elif noise.phase_mode == "uniform_random":
        phase = rng.uniform(0.0, 2.0 * math.pi)
    else:  # random_walk
        phase = rng.uniform(0.0, 2.0 * math.pi)
        walk_std = math.sqrt(noise.walk_rate_rad2_per_s * max(sequence_span_s, 0.0))
        phase += rng.normal(0.0, walk_std)
    rotated = signal * np.exp(1j * phase)
    v_i = rotated.real + rng.normal(0.0, noise.sigma, signal.size)
    v_q = rotated.imag + rng.normal(0.0, noise.sigma, signal.size)
    return ShotRecord(v_i=v_i, v_q=v_q, shot_phase_rad=float(phase), seed=int(seed))


def quadrature_magnitude(shot: ShotRecord) -> np.ndarray:
    """Phase-insensitive per-shot magnitude sqrt(I^2 + Q^2)."""
    return np.hypot(shot.v_i, shot.v_q)


def rayleigh_floor(sigma: float) -> float:
    """Mean magnitude of signal-free noise: sigma sqrt(pi/2)."""
    if sigma < 0:
        raise DomainError("sigma must be non-negative")
    return sigma * RAYLEIGH_MEAN


def amplitude_for_snr(snr: float, sigma: float = 1.0) -> float:
    """Echo amplitude that yields a given single-shot magnitude SNR.

    Inverts SNR = (A + sigma^2/(2A) - sigma*sqrt(pi/2)) / (sigma*sqrt(2-pi/2))
    (Rician peak mean over the Rayleigh baseline) for A.
    """
    if snr <= 0 or sigma <= 0:
        raise DomainError("SNR and sigma must be positive")
    c = snr * RAYLEIGH_STD + RAYLEIGH_MEAN
    if c * c < 2.0:
        raise DomainError("requested SNR is below the magnitude-detection floor")
    return sigma * (c + math.sqrt(c * c - 2.0)) / 2.0


def average_shots(
    magnitudes: list[np.ndarray] | np.ndarray,
    baseline: slice | None = None,
) -> tuple[np.ndarray, float]:
    """Average magnitude traces and report SNR.

    SNR = (trace max - baseline mean) / baseline std, with the baseline
    window defaulting to the leading third of the trace.  Infinite when the
    baseline has zero spread (noise-free runs).
    """
    stack = np.asarray(magnitudes, dtype=float)
    if stack.ndim == 1:
        stack = stack[None, :]
    if stack.ndim != 2 or stack.size == 0:
        raise DomainError("need one or more equal-length magnitude traces")
    mean = stack.mean(axis=0)
    if baseline is None:
        baseline = slice(0, max(2, stack.shape[1] // 3))
    base = mean[baseline]
    if base.size < 2:
        raise DomainError("baseline window must contain at least two samples")
    spread = base.std()
    if spread == 0.0:
        return mean, math.inf
    return mean, float((mean.max() - base.mean()) / spread)


def echo_energy_amplitude(magnitude: np.ndarray, sigma: float, window: slice) -> float:
    """Bias-corrected echo amplitude from one magnitude trace.

    E|z|^2 = A^2 + 2 sigma^2 per sample, so summing (m^2 - 2 sigma^2) over
    the echo window estimates the echo energy without the Rician bias that
    skews peak readings near the noise floor.
    """
    m = np.asarray(magnitude, dtype=float)[window]
    if m.size == 0:
        raise DomainError("echo window is empty")
    energy = float(np.sum(m**2) - 2.0 * sigma**2 * m.size)
    return math.sqrt(max(energy, 0.0))


def diode_detect(amplitude: np.ndarray, lowpass_tau_s: float = 0.0, dt_s: float = 1.0) -> np.ndarray:
    """Square-law (tunnel diode) detection: output tracks input power.

    A single-pole low-pass with time constant lowpass_tau_s models the video
    bandwidth when nonzero.
    """
    amplitude = np.asarray(amplitude, dtype=float)
    if np.any(amplitude < 0):
        raise DomainError("diode input is an envelope and must be non-negative")
    power = amplitude**2
    if lowpass_tau_s <= 0.0:
        return power
    if dt_s <= 0.0:
        raise DomainError("sample interval must be positive")
    alpha = math.exp(-dt_s / lowpass_tau_s)
    out = np.empty_like(power)
    acc = power[0]
    for i, p in enumerate(power):
        acc = alpha * acc + (1.0 - alpha) * p
        out[i] = acc
    return out


def pulse_breakthrough(
    times_s: np.ndarray,
    pulse_starts_s: list[float],
    pulse_durations_s: list[float],
    pulse_amplitude: float,
    *,
    attenuation_db: float = BREAKTHROUGH_ATTENUATION_DB,
    dead_time_s: float = DEAD_TIME_S,
) -> tuple[np.ndarray, np.ndarray]:
    """Transmit leakage at the receiver plus the dead-time blanking mask.

    Returns (leak, open_mask): leak is the attenuated pulse envelope sampled
    on times_s and open_mask is False while the receiver is blanked (during
    each pulse and for dead_time_s after it).
    """
    if len(pulse_starts_s) != len(pulse_durations_s):
        raise DomainError("pulse start and duration lists must match")
    if attenuation_db < 0 or dead_time_s < 0:
        raise DomainError("attenuation and dead time must be non-negative")
    times_s = np.asarray(times_s, dtype=float)
    leak = np.zeros_like(times_s)
    open_mask = np.ones(times_s.shape, dtype=bool)
    gain = 10.0 ** (-attenuation_db / 20.0)
    for start, dur in zip(pulse_starts_s, pulse_durations_s):
        if dur <= 0:
            raise DomainError("pulse durations must be positive")
        inside = (times_s >= start) & (times_s < start + dur)
        leak[inside] += pulse_amplitude * gain
        open_mask &= ~((times_s >= start) & (times_s < start + dur + dead_time_s))
    return leak, open_mask
