"""Microwave pulses: flip angles, excitation bandwidth, propagators.

Flip angle follows theta = g muB b1_eff t / hbar with b1_eff the rotating-
frame component: the nominal amplitude for circular polarization, nominal
over sqrt(2) for linear, where half the linear field counter-rotates.

The excitation window uses the kappa = 0.75 bandwidth convention,
delta_nu = 0.75 / t_p, mapped to field units through g.  The exact
rectangular-pulse profile is available by sweeping carrier_offset_mhz through
propagate_pulse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS
from .errors import DomainError
from .spinsys import spin_operators

# Fraction of 1/t_p counted as usefully excited bandwidth.
BANDWIDTH_KAPPA = 0.75

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PulseSpec:
    """A rectangular microwave pulse.

    b1_mt is the nominal oscillating-field amplitude at the spin;
    carrier_offset_mhz is the pulse carrier relative to the rotating frame.
    """

    duration_s: float
    b1_mt: float
    phase_rad: float = 0.0
    carrier_offset_mhz: float = 0.0
    polarization_mode: str = "circular"

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise DomainError("pulse duration must be positive")
        if self.b1_mt < 0:
            raise DomainError("b1 must be non-negative")
        if self.polarization_mode not in ("circular", "linear"):
            raise DomainError(f"unknown polarization mode {self.polarization_mode!r}")

    @property
    def b1_eff_mt(self) -> float:
        if self.polarization_mode == "linear":
            return self.b1_mt / _SQRT2
        return self.b1_mt


def flip_angle(pulse: PulseSpec, g_eff: float) -> float:
    """Nominal on-resonance flip angle (rad)."""
    if g_eff <= 0:
        raise DomainError("g must be positive")
    theta = g_eff * CONSTANTS.muB * (pulse.b1_mt * 1e-3) * pulse.duration_s / CONSTANTS.hbar
    # Polarization penalty applied last so linear == circular / sqrt(2) bitwise.
    if pulse.polarization_mode == "linear":
        theta = theta / _SQRT2
    return theta


def b1_for_angle(angle_rad: float, duration_s: float, g_eff: float, polarization_mode: str = "circular") -> float:
    """Nominal b1 (mT) that produces a given flip angle in a given duration."""
    if angle_rad <= 0 or duration_s <= 0 or g_eff <= 0:
        raise DomainError("angle, duration and g must be positive")
    b1_t = angle_rad * CONSTANTS.hbar / (g_eff * CONSTANTS.muB * duration_s)
    if polarization_mode == "linear":
        b1_t = b1_t * _SQRT2
    return b1_t * 1e3


def duration_for_angle(angle_rad: float, b1_mt: float, g_eff: float, polarization_mode: str = "circular") -> float:
    """Pulse duration (s) for a given flip angle at fixed b1."""
    if angle_rad <= 0 or b1_mt <= 0 or g_eff <= 0:
        raise DomainError("angle, b1 and g must be positive")
    b1_eff_t = b1_mt * 1e-3 / (_SQRT2 if polarization_mode == "linear" else 1.0)
    return angle_rad * CONSTANTS.hbar / (g_eff * CONSTANTS.muB * b1_eff_t)


def excitation_window_mt(duration_s: float, g_eff: float) -> float:
    """Excited field window (mT FWHM): h (kappa / t_p) / (g muB)."""
    if duration_s <= 0 or g_eff <= 0:
        raise DomainError("duration and g must be positive")
    width_t = CONSTANTS.h * (BANDWIDTH_KAPPA / duration_s) / (g_eff * CONSTANTS.muB)
    return width_t * 1e3


def excitation_fraction(duration_s: float, g_eff: float, line_fwhm_mt: float) -> float:
    """Fraction of an inhomogeneous line covered by one pulse bandwidth."""
    if line_fwhm_mt <= 0:
        raise DomainError("line width must be positive")
    return excitation_window_mt(duration_s, g_eff) / line_fwhm_mt


def _check_density_matrix(rho: np.ndarray, dim: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise DomainError(f"density matrix must be {dim}x{dim}")
    if np.abs(rho - rho.conj().T).max() > 1e-9:
        raise DomainError("density matrix must be Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-9:
        raise DomainError("density matrix must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise DomainError("density matrix must be positive semidefinite")
    return rho


def rotation_generator(j: float, axis: str) -> np.ndarray:
    jx, jy, jz = spin_operators(j)
    try:
        return {"x": jx, "y": jy, "z": jz}[axis]
    except KeyError:
        raise DomainError(f"axis must be x, y or z, got {axis!r}") from None


def ideal_rotation(rho: np.ndarray, axis: str, angle_rad: float, j: float = 0.5) -> np.ndarray:
    """Instantaneous rotation exp(-i angle J_axis) applied to rho."""
    gen = rotation_generator(j, axis)
    rho = _check_density_matrix(rho, gen.shape[0])
    u = _expm_hermitian(gen, angle_rad)
    return u @ rho @ u.conj().T


def pulse_propagator(pulse: PulseSpec, g_eff: float, j: float = 0.5) -> np.ndarray:
    """Rotating-frame propagator of a rectangular pulse.

    U = exp(-i (dw Jz + w1 (Jx cos phi + Jy sin phi)) t) with
    w1 = g muB b1_eff / hbar and dw = 2 pi * carrier offset.
    """
    if g_eff <= 0:
        raise DomainError("g must be positive")
    jx, jy, jz = spin_operators(j)
    dw = 2.0 * math.pi * pulse.carrier_offset_mhz * 1e6
    w1 = g_eff * CONSTANTS.muB * (pulse.b1_eff_mt * 1e-3) / CONSTANTS.hbar
    gen = dw * jz + w1 * (math.cos(pulse.phase_rad) * jx + math.sin(pulse.phase_rad) * jy)
    return _expm_hermitian(gen, pulse.duration_s)


def propagate_pulse(rho: np.ndarray, pulse: PulseSpec, g_eff: float, j: float = 0.5) -> np.ndarray:
    """Apply a rectangular pulse to a density matrix: U rho U+."""
    u = pulse_propagator(pulse, g_eff, j)
    rho = _check_density_matrix(rho, u.shape[0])
    return u @ rho @ u.conj().T


def _expm_hermitian(gen: np.ndarray, t: float) -> np.ndarray:
    """exp(-i gen t) for Hermitian gen via its eigensystem."""
    vals, vecs = np.linalg.eigh(gen)
    phases = np.exp(-1j * vals * t)
    return (vecs * phases) @ vecs.conj().T
