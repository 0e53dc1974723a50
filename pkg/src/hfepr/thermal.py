"""Thermal populations and polarization.

At 336 GHz and liquid-helium temperatures the high-temperature approximation
fails badly (h nu / kT > 3 at 5 K), so populations are always computed from
the full Boltzmann factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS
from .errors import DomainError


@dataclass(frozen=True)
class ThermalState:
    temperature_k: float
    populations: np.ndarray


def thermal_populations(levels_mhz: np.ndarray, temperature_k: float) -> np.ndarray:
    """Boltzmann populations of energy levels given in MHz.

    Energies are referenced to the lowest level before exponentiation so the
    result is overflow-safe at any field/temperature combination.
    """
    if temperature_k <= 0:
        raise DomainError("temperature must be positive")
    levels_mhz = np.asarray(levels_mhz, dtype=float)
    if levels_mhz.size == 0:
        raise DomainError("need at least one level")
    rel_j = (levels_mhz - levels_mhz.min()) * 1e6 * CONSTANTS.h
    weights = np.exp(-rel_j / (CONSTANTS.kB * temperature_k))
    return weights / weights.sum()


def two_level_polarization(freq_ghz: float, temperature_k: float) -> float:
    """Electron polarization tanh(h nu / 2 kT) for a two-level splitting."""
    if temperature_k <= 0:
        raise DomainError("temperature must be positive")
    if freq_ghz < 0:
        raise DomainError("splitting frequency must be non-negative")
    x = CONSTANTS.h * freq_ghz * 1e9 / (2.0 * CONSTANTS.kB * temperature_k)
    return math.tanh(x)
