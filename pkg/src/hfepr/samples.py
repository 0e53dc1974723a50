"""Stock spin systems for the demo experiments.

g, A and D values are literature-typical numbers for these centers, not
calibrated measurements; treat them as starting points for configs.
"""

from __future__ import annotations

from .spinsys import ElectronSpin, NuclearSpecies, SpinSystem


def mgo_manganese(spins_count: float = 1e14) -> SpinSystem:
    """Mn2+ (S = 5/2, 55Mn I = 5/2) in MgO.

    The cubic crystal-field splitting is folded into an effective axial D;
    good enough to separate the fine-structure transitions at high field.
    """
    electron = ElectronSpin(
        s=2.5,
        g_principal=(2.0014, 2.0014, 2.0014),
        d_mhz=55.8,
        linewidth_fwhm_mt=0.25,
        t1_s=5e-3,
        t2_s=5e-6,
    )
    mn55 = NuclearSpecies(label="55Mn", i=2.5, gn=1.3819, a_mhz=-244.0)
    return SpinSystem(name="MgO:Mn2+", electron=electron, nuclei=(mn55,), spins_count=spins_count)


def mgo_vanadium(spins_count: float = 2e13) -> SpinSystem:
    """V2+ (S = 3/2, 51V I = 7/2) on a cubic MgO site."""
    electron = ElectronSpin(
        s=1.5,
        g_principal=(1.9803, 1.9803, 1.9803),
        linewidth_fwhm_mt=0.5,
        t1_s=5e-3,
        t2_s=3e-6,
    )
    v51 = NuclearSpecies(label="51V", i=3.5, gn=1.4711, a_mhz=-222.0)
    return SpinSystem(name="MgO:V2+", electron=electron, nuclei=(v51,), spins_count=spins_count)


def nitroxide_film(spins_count: float = 4e14) -> SpinSystem:
    """TEMPOL-like nitroxide film: rhombic g, broad line, fast relaxation."""
    electron = ElectronSpin(
        s=0.5,
        g_principal=(2.0094, 2.0062, 2.0022),
        linewidth_fwhm_mt=38.0,
        t1_s=100e-6,
        t2_s=1.49e-6,
    )
    return SpinSystem(name="nitroxide film", electron=electron, spins_count=spins_count)


def chromium_potassium_crystal(spins_count: float = 5e13) -> SpinSystem:
    """Cr5+ (S = 1/2) in a potassium oxide host with eight inequivalent 39K sites.

    Site-to-site hyperfine/quadrupole offsets are small and chosen to keep
    all sites clear of the tau = 600 ns Mims blind spots.
    """
    electron = ElectronSpin(
        s=0.5,
        g_principal=(1.9878, 1.9878, 1.9878),
        linewidth_fwhm_mt=0.8,
        t1_s=10e-3,
        t2_s=5e-6,
    )
    spread = (
        (0.00, 0.00),
        (0.03, 0.02),
        (-0.03, -0.02),
        (0.06, 0.04),
        (-0.06, -0.04),
        (0.09, 0.06),
        (-0.09, -0.06),
        (0.12, 0.08),
    )
    k39 = NuclearSpecies(
        label="39K", i=1.5, gn=0.2609, a_mhz=0.85, p_mhz=0.22,
        multiplicity=8, site_spread=spread,
    )
    return SpinSystem(
        name="Cr5+ : K host", electron=electron, nuclei=(k39,), spins_count=spins_count
    )
