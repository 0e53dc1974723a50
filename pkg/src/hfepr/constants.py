"""Physical constants used throughout the simulator.

Values are CODATA-2018 and are frozen at import time so that results do not
drift when the environment's scipy version changes its constant tables.
hbar is derived from h rather than quoted, keeping h/(2*pi) consistent to
machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA-2018 constants in SI units."""

    h: float = 6.62607015e-34          # Planck constant, J s (exact)
    muB: float = 9.2740100783e-24      # Bohr magneton, J/T
    muN: float = 5.0507837461e-27      # nuclear magneton, J/T
    kB: float = 1.380649e-23           # Boltzmann constant, J/K (exact)
    mu0: float = 1.25663706212e-6      # vacuum permeability, T m/A
    c: float = 299792458.0             # speed of light, m/s (exact)

    @property
    def hbar(self) -> float:
        return self.h / (2.0 * math.pi)

    @property
    def electron_hz_per_t(self) -> float:
        """muB/h: electron Zeeman frequency per tesla at g = 1 (Hz/T)."""
        return self.muB / self.h

    @property
    def nuclear_hz_per_t(self) -> float:
        """muN/h: nuclear Zeeman frequency per tesla at g_n = 1 (Hz/T)."""
        return self.muN / self.h


CONSTANTS = PhysicalConstants()
