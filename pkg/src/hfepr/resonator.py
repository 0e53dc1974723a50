"""Semiconfocal Fabry-Perot resonator model.

The mirror spacing holds n half-wavelengths; the mode volume is approximated
by a Gaussian beam of fixed waist, V = pi w0^2 L / 4.  The loaded Q follows
from the coupling-mesh transmission plus a lumped residual loss per round
trip, Q = 2 pi n / (T_mesh + other_loss).

b1_from_power returns the rotating-frame field: for a linearly polarized
mode only half the oscillating field co-rotates, hence the 1/sqrt(2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .constants import CONSTANTS
from .errors import DomainError, SimulationWarning

_SQRT2 = math.sqrt(2.0)

# Soft design bands: outside these the model still computes, but warns.
N_HALFWAVES_BAND = (5, 8)
MESH_TRANSMISSION_BAND = (0.002, 0.01)

# Travel of the distance fine-tune actuator.
PIEZO_RANGE_M = 100e-6

DEFAULT_BEAM_WAIST_M = 1.5e-3
DEFAULT_MESH_TRANSMISSION = 0.005
DEFAULT_OTHER_LOSS = 0.07


def mode_geometry(freq_ghz: float, n_halfwaves: int) -> tuple[float, float]:
    """Mirror spacing (m) and free spectral range (GHz) of the n-th mode."""
    if freq_ghz <= 0:
        raise DomainError("frequency must be positive")
    if n_halfwaves < 1:
        raise DomainError("mode index must be >= 1")
    if not N_HALFWAVES_BAND[0] <= n_halfwaves <= N_HALFWAVES_BAND[1]:
        warnings.warn(
            f"n_halfwaves = {n_halfwaves} outside the usual {N_HALFWAVES_BAND} design band",
            SimulationWarning,
            stacklevel=2,
        )
    wavelength_m = CONSTANTS.c / (freq_ghz * 1e9)
    length_m = n_halfwaves * wavelength_m / 2.0
    fsr_ghz = freq_ghz / n_halfwaves
    return length_m, fsr_ghz


def quality_factor(n_halfwaves: int, mesh_transmission: float, other_loss: float = DEFAULT_OTHER_LOSS) -> float:
    """Loaded Q = 2 pi n / (T_mesh + other_loss)."""
    if n_halfwaves < 1:
        raise DomainError("mode index must be >= 1")
    if mesh_transmission <= 0 or other_loss < 0:
        raise DomainError("losses must be positive (mesh) and non-negative (other)")
    total = mesh_transmission + other_loss
    if total >= 1.0:
        raise DomainError("total round-trip loss must stay below 1")
    if not MESH_TRANSMISSION_BAND[0] <= mesh_transmission <= MESH_TRANSMISSION_BAND[1]:
        warnings.warn(
            f"mesh transmission {mesh_transmission} outside the usual "
            f"{MESH_TRANSMISSION_BAND} band",
            SimulationWarning,
            stacklevel=2,
        )
    return 2.0 * math.pi * n_halfwaves / total


def piezo_fine_tune_only(freq_ghz: float, piezo_range_m: float = PIEZO_RANGE_M) -> bool:
    """True when one half-wavelength exceeds the piezo travel.

    In that regime the piezo can only fine-tune a mode; hopping between
    modes needs the coarse mechanical drive.
    """
    wavelength_m = CONSTANTS.c / (freq_ghz * 1e9)
    return wavelength_m / 2.0 > piezo_range_m


@dataclass(frozen=True)
class ResonatorModel:
    """A tuned Fabry-Perot resonator driving the sample.

    Length, FSR and Q are derived from the inputs at construction.
    """

    freq_ghz: float
    n_halfwaves: int = 6
    beam_waist_m: float = DEFAULT_BEAM_WAIST_M
    mesh_transmission: float = DEFAULT_MESH_TRANSMISSION
    other_loss: float = DEFAULT_OTHER_LOSS
    incident_power_w: float = 0.03
    polarization_mode: str = "linear"

    def __post_init__(self) -> None:
        if self.beam_waist_m <= 0:
            raise DomainError("beam waist must be positive")
        if self.incident_power_w < 0:
            raise DomainError("power must be non-negative")
        if self.polarization_mode not in ("circular", "linear"):
            raise DomainError(f"unknown polarization mode {self.polarization_mode!r}")
        # Validate through the derivation paths.
        mode_geometry(self.freq_ghz, self.n_halfwaves)
        quality_factor(self.n_halfwaves, self.mesh_transmission, self.other_loss)

    @property
    def length_m(self) -> float:
        return mode_geometry(self.freq_ghz, self.n_halfwaves)[0]

    @property
    def fsr_ghz(self) -> float:
        return mode_geometry(self.freq_ghz, self.n_halfwaves)[1]

    @property
    def q(self) -> float:
        return quality_factor(self.n_halfwaves, self.mesh_transmission, self.other_loss)

    @property
    def mode_volume_m3(self) -> float:
        return math.pi * self.beam_waist_m**2 * self.length_m / 4.0

    @property
    def bandwidth_ghz(self) -> float:
        return self.freq_ghz / self.q


def b1_from_power(model: ResonatorModel, power_w: float | None = None) -> float:
    """Rotating-frame b1 at the sample (mT): sqrt(mu0 Q P / (omega V)).

    Divided by sqrt(2) for a linearly polarized mode.  The polarization
    factor is applied last so linear equals circular / sqrt(2) bitwise.
    """
    p = model.incident_power_w if power_w is None else power_w
    if p < 0:
        raise DomainError("power must be non-negative")
    omega = 2.0 * math.pi * model.freq_ghz * 1e9
    b1_t = math.sqrt(CONSTANTS.mu0 * model.q * p / (omega * model.mode_volume_m3))
    b1_mt = b1_t * 1e3
    if model.polarization_mode == "linear":
        b1_mt = b1_mt / _SQRT2
    return b1_mt


def ringdown_time_s(q: float, freq_ghz: float) -> float:
    """Energy ringdown time Q / (2 pi f)."""
    if q <= 0 or freq_ghz <= 0:
        raise DomainError("Q and frequency must be positive")
    return q / (2.0 * math.pi * freq_ghz * 1e9)


def ringdown_negligible(model: ResonatorModel, shortest_pulse_s: float = 100e-9) -> bool:
    """True when the ringdown is well under the shortest pulse edge."""
    return ringdown_time_s(model.q, model.freq_ghz) < 0.1 * shortest_pulse_s
