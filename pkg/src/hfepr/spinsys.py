"""Spin systems and secular high-field Hamiltonians.

Energies are handled in MHz throughout: at the fields this instrument reaches
(up to 12.5 T) the electron Zeeman term is hundreds of GHz while hyperfine and
quadrupole terms are single MHz, and the MHz scale keeps both ends of that
range well inside double precision.

The Hamiltonian is the high-field secular form: Zeeman terms along the static
field direction, axial/rhombic zero-field splitting, and secular hyperfine
A*Sz*Iz per nucleus.  An optional full-tensor hyperfine mode (Sx*Ix + Sy*Iy +
Sz*Iz) exists for validating the secular approximation against second-order
shifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import CONSTANTS
from .errors import CapacityError, DomainError

# Moments below this floor are treated as forbidden and dropped from
# transition tables.
MOMENT_FLOOR = 1e-6

# Hard cap on the Hilbert-space dimension for full diagonalization.
MAX_DIMENSION = 4096


def _is_half_integer(j: float) -> bool:
    return j > 0 and abs(2 * j - round(2 * j)) < 1e-12


def spin_operators(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (Jx, Jy, Jz) for spin quantum number j.

    Basis is ordered m = j, j-1, ..., -j so Jz is diagonal with descending
    entries.  Ladder matrix elements are sqrt(j(j+1) - m(m+1)).
    """
    if not _is_half_integer(j):
        raise DomainError(f"spin quantum number must be a positive half-integer, got {j}")
    dim = round(2 * j) + 1
    m = j - np.arange(dim)
    jz = np.diag(m.astype(complex))
    # <m+1|J+|m> on the superdiagonal (row of m+1 is one above row of m).
    raising = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)).astype(complex)
    jplus = np.zeros((dim, dim), dtype=complex)
    jplus[np.arange(dim - 1), np.arange(1, dim)] = raising
    jminus = jplus.conj().T
    jx = (jplus + jminus) / 2.0
    jy = (jplus - jminus) / 2.0j
    return jx, jy, jz


def rotation_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Active z-y-z Euler rotation matrix R = Rz(alpha) Ry(beta) Rz(gamma)."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rz_a = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry_b = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rz_g = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    return rz_a @ ry_b @ rz_g


def field_direction(orientation: Sequence[float]) -> np.ndarray:
    """Unit vector of the static field in the molecular frame.

    orientation = (alpha, beta, gamma) Euler angles in rad; only the polar
    pair (alpha, beta) picks an axis direction.
    """
    alpha, beta = orientation[0], orientation[1]
    return np.array(
        [math.sin(beta) * math.cos(alpha), math.sin(beta) * math.sin(alpha), math.cos(beta)]
    )


def effective_g(
    g_principal: Sequence[float],
    g_orientation: Sequence[float] = (0.0, 0.0, 0.0),
    orientation: Sequence[float] = (0.0, 0.0, 0.0),
) -> float:
    """Effective g along the field: sqrt(n . g g^T . n).

    g_orientation rotates the g-tensor principal axes into the molecular
    frame; orientation gives the field direction in that frame.
    """
    g = np.asarray(g_principal, dtype=float)
    if g.shape != (3,) or np.any(g <= 0):
        raise DomainError("g_principal must be three positive values")
    r = rotation_matrix(*g_orientation)
    gg = r @ np.diag(g**2) @ r.T
    n = field_direction(orientation)
    return float(math.sqrt(n @ gg @ n))


def spiral_grid(n: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Equal-weight Fibonacci spiral orientation grid on the hemisphere.

    Returns (orientations, weights): orientations is (n, 3) Euler angles with
    gamma = 0, weights sum to 1.  Used for powder averages.
    """
    if n < 1:
        raise DomainError("grid size must be >= 1")
    k = np.arange(n) + 0.5
    cos_beta = k / n               # upper hemisphere, uniform in cos(beta)
    beta = np.arccos(cos_beta)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    alpha = np.mod(k * golden, 2 * math.pi)
    orientations = np.column_stack([alpha, beta, np.zeros(n)])
    return orientations, np.full(n, 1.0 / n)


@dataclass(frozen=True)
class ElectronSpin:
    """Electron spin with g-tensor, zero-field splitting and relaxation.

    d_mhz/e_mhz are the axial and rhombic zero-field parameters.  t2_profile
    optionally maps field offset from line center (mT) to T2 (s); offsets in
    between are linearly interpolated and the ends are clamped.
    """

    s: float
    g_principal: tuple[float, float, float]
    g_orientation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    d_mhz: float = 0.0
    e_mhz: float = 0.0
    linewidth_fwhm_mt: float = 1.0
    t1_s: float = 1e-3
    t2_s: float = 1e-6
    t2_profile: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self) -> None:
        if not _is_half_integer(self.s):
            raise DomainError(f"electron spin must be a positive half-integer, got {self.s}")
        if len(self.g_principal) != 3 or any(g <= 0 for g in self.g_principal):
            raise DomainError("g_principal must be three positive values")
        if self.d_mhz != 0.0 and abs(self.e_mhz) > abs(self.d_mhz) / 3.0 + 1e-12:
            raise DomainError("|E| must not exceed |D|/3")
        if self.d_mhz == 0.0 and self.e_mhz != 0.0:
            raise DomainError("rhombic E requires a nonzero D")
        if self.linewidth_fwhm_mt <= 0:
            raise DomainError("linewidth must be positive")
        if self.t1_s <= 0 or self.t2_s <= 0:
            raise DomainError("T1 and T2 must be positive")
        if self.t2_profile is not None:
            offs, vals = self.t2_profile
            if len(offs) != len(vals) or len(offs) == 0:
                raise DomainError("t2_profile offsets and values must match and be non-empty")
            if any(v <= 0 for v in vals):
                raise DomainError("T2 must be positive everywhere in the profile")
            if list(offs) != sorted(offs):
                raise DomainError("t2_profile offsets must be ascending")

    @property
    def g_iso(self) -> float:
        return sum(self.g_principal) / 3.0

    def t2_at(self, offset_mt: float = 0.0) -> float:
        """T2 at a given field offset from line center (mT)."""
        if self.t2_profile is None:
            return self.t2_s
        offs, vals = self.t2_profile
        return float(np.interp(offset_mt, offs, vals))


@dataclass(frozen=True)
class NuclearSpecies:
    """A nuclear species coupled to the electron.

    a_mhz and p_mhz are the secular hyperfine and effective quadrupole
    couplings.  multiplicity counts equivalent sites; site_spread holds
    optional per-site (dA, dP) offsets in MHz and must have one entry per
    site when given.
    """

    label: str
    i: float
    gn: float
    a_mhz: float
    p_mhz: float = 0.0
    multiplicity: int = 1
    site_spread: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if not _is_half_integer(self.i):
            raise DomainError(f"nuclear spin must be a positive half-integer, got {self.i}")
        if self.multiplicity < 1:
            raise DomainError("multiplicity must be >= 1")
        if self.i == 0.5 and self.p_mhz != 0.0:
            raise DomainError("quadrupole coupling requires I >= 1")
        if self.site_spread is not None and len(self.site_spread) != self.multiplicity:
            raise DomainError("site_spread length must equal multiplicity")

    def site_couplings(self) -> list[tuple[float, float]]:
        """Per-site (A, P) pairs in MHz."""
        spread = self.site_spread or tuple((0.0, 0.0) for _ in range(self.multiplicity))
        out = []
        for da, dp in spread:
            a, p = self.a_mhz + da, self.p_mhz + dp
            if self.i == 0.5 and p != 0.0:
                raise DomainError("quadrupole coupling requires I >= 1")
            out.append((a, p))
        return out


@dataclass(frozen=True)
class SpinSystem:
    """One electron spin plus its coupled nuclei and a spin count."""

    name: str
    electron: ElectronSpin
    nuclei: tuple[NuclearSpecies, ...] = ()
    spins_count: float = 1.0

    def __post_init__(self) -> None:
        if self.spins_count <= 0:
            raise DomainError("spins_count must be positive")

    @property
    def dimension(self) -> int:
        """Hilbert-space dimension of the fully coupled system."""
        dim = round(2 * self.electron.s) + 1
        for nuc in self.nuclei:
            dim *= (round(2 * nuc.i) + 1) ** nuc.multiplicity
        return dim


@dataclass(frozen=True)
class Transition:
    """A level pair with its frequency, moment and population weight."""

    level_lo: int
    level_hi: int
    freq_ghz: float
    moment: float
    weight: float
    field_resonant_t: float | None = None


def _expanded_nuclei(system: SpinSystem) -> list[tuple[NuclearSpecies, float, float]]:
    """Flatten multiplicity: one (species, A, P) entry per physical site."""
    out = []
    for nuc in system.nuclei:
        for a, p in nuc.site_couplings():
            out.append((nuc, a, p))
    return out


def electron_operator(system: SpinSystem, which: str) -> np.ndarray:
    """Electron Sx/Sy/Sz embedded in the full product space (electron first)."""
    ops = dict(zip("xyz", spin_operators(system.electron.s)))
    if which not in ops:
        raise DomainError(f"operator must be x, y or z, got {which!r}")
    if system.dimension > MAX_DIMENSION:
        raise CapacityError(
            f"Hilbert dimension {system.dimension} exceeds the {MAX_DIMENSION} "
            "cap for dense operators"
        )
    dim_nuc = 1
    for nuc, _a, _p in _expanded_nuclei(system):
        dim_nuc *= round(2 * nuc.i) + 1
    return np.kron(ops[which], np.eye(dim_nuc, dtype=complex))


def electron_sx(system: SpinSystem) -> np.ndarray:
    """Electron Sx embedded in the full product space (electron first)."""
    return electron_operator(system, "x")


def build_hamiltonian(
    system: SpinSystem,
    b0_t: float,
    orientation: Sequence[float] = (0.0, 0.0, 0.0),
    *,
    full_hyperfine: bool = False,
) -> np.ndarray:
    """Secular high-field Hamiltonian in MHz.

    H = g_eff (muB/h) B0 Sz * 1e-6
        + D [Sz^2 - S(S+1)/3] + E [Sx^2 - Sy^2]
        + sum_k ( A_k Sz Iz_k - gn_k (muN/h) B0 Iz_k * 1e-6
                  + P_k [Iz_k^2 - I(I+1)/3] )

    full_hyperfine=True replaces A Sz Iz by the full isotropic contraction
    A (Sx Ix + Sy Iy + Sz Iz), used to bound second-order errors.
    """
    if b0_t < 0:
        raise DomainError("static field must be non-negative")
    dim = system.dimension
    if dim > MAX_DIMENSION:
        raise CapacityError(
            f"Hilbert dimension {dim} exceeds the {MAX_DIMENSION} cap for full "
            "diagonalization; use the factorized per-nucleus path instead"
        )
    elec = system.electron
    g_eff = effective_g(elec.g_principal, elec.g_orientation, orientation)

    sites = _expanded_nuclei(system)
    nuc_ops = [spin_operators(nuc.i) for nuc, _a, _p in sites]
    nuc_dims = [round(2 * nuc.i) + 1 for nuc, _a, _p in sites]

    def embed(op: np.ndarray, slot: int) -> np.ndarray:
        """Embed a single-space operator: slot -1 is the electron."""
        mat = np.eye(1, dtype=complex)
        mat = np.kron(mat, op if slot == -1 else np.eye(round(2 * elec.s) + 1, dtype=complex))
        for k, d in enumerate(nuc_dims):
            mat = np.kron(mat, op if slot == k else np.eye(d, dtype=complex))
        return mat

    sx_e, sy_e, sz_e = spin_operators(elec.s)
    sx, sy, sz = embed(sx_e, -1), embed(sy_e, -1), embed(sz_e, -1)

    nu_e_mhz = g_eff * CONSTANTS.electron_hz_per_t * b0_t * 1e-6
    h_mhz = nu_e_mhz * sz
    if elec.d_mhz != 0.0:
        s_val = elec.s
        h_mhz = h_mhz + elec.d_mhz * (sz @ sz - s_val * (s_val + 1) / 3.0 * np.eye(dim))
        h_mhz = h_mhz + elec.e_mhz * (sx @ sx - sy @ sy)

    for k, (nuc, a_mhz, p_mhz) in enumerate(sites):
        ix_k, iy_k, iz_k = (embed(op, k) for op in nuc_ops[k])
        nu_n_mhz = nuc.gn * CONSTANTS.nuclear_hz_per_t * b0_t * 1e-6
        h_mhz = h_mhz + a_mhz * (sz @ iz_k) - nu_n_mhz * iz_k
        if full_hyperfine:
            h_mhz = h_mhz + a_mhz * (sx @ ix_k + sy @ iy_k)
        if p_mhz != 0.0:
            i_val = nuc.i
            h_mhz = h_mhz + p_mhz * (iz_k @ iz_k - i_val * (i_val + 1) / 3.0 * np.eye(dim))

    return h_mhz


def eigensystem(h_mhz: np.ndarray, *, hermiticity_rtol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending, MHz) and eigenvector columns of a Hermitian matrix."""
    h_mhz = np.asarray(h_mhz)
    if h_mhz.ndim != 2 or h_mhz.shape[0] != h_mhz.shape[1]:
        raise DomainError("Hamiltonian must be a square matrix")
    scale = np.abs(h_mhz).max()
    dev = np.abs(h_mhz - h_mhz.conj().T).max()
    if dev > hermiticity_rtol * max(scale, 1.0):
        raise DomainError("matrix is not Hermitian within tolerance")
    levels, states = np.linalg.eigh(h_mhz)
    return levels, states


def transition_table(
    levels: np.ndarray,
    states: np.ndarray,
    sx_full: np.ndarray,
    populations: np.ndarray,
    *,
    moment_floor: float = MOMENT_FLOOR,
    carrier_ghz: float | None = None,
    b0_t: float | None = None,
    g_eff: float | None = None,
) -> list[Transition]:
    """All allowed transitions between eigenlevels.

    moment is |<hi| Sx |lo>|^2 evaluated in the eigenbasis; pairs at or below
    moment_floor are dropped.  weight is p(lo) - p(hi) and goes negative for
    inverted pairs.  When carrier_ghz, b0_t and g_eff are all given, a
    first-order resonance field at fixed carrier is attached.
    """
    levels = np.asarray(levels, dtype=float)
    populations = np.asarray(populations, dtype=float)
    if populations.shape != levels.shape:
        raise DomainError("populations must match levels in length")
    if abs(populations.sum() - 1.0) > 1e-9:
        raise DomainError("populations must sum to 1")
    moments = np.abs(states.conj().T @ sx_full @ states) ** 2
    out: list[Transition] = []
    n = len(levels)
    for lo in range(n):
        for hi in range(lo + 1, n):
            moment = float(moments[hi, lo])
            if moment <= moment_floor:
                continue
            freq_ghz = (levels[hi] - levels[lo]) * 1e-3
            field = None
            if carrier_ghz is not None and b0_t is not None and g_eff is not None:
                dnu_hz_per_t = g_eff * CONSTANTS.electron_hz_per_t
                field = b0_t + (carrier_ghz - freq_ghz) * 1e9 / dnu_hz_per_t
            out.append(
                Transition(
                    level_lo=lo,
                    level_hi=hi,
                    freq_ghz=freq_ghz,
                    moment=moment,
                    weight=float(populations[lo] - populations[hi]),
                    field_resonant_t=field,
                )
            )
    return out
