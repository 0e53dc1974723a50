#!/usr/bin/env python3
"""Mims ENDOR of the 39K sites at 8.63 T: spectra at 5 K and 300 K showing
the hyperfine-branch sign flip that appears once the electron spins are
strongly polarized."""

import argparse
import math

import numpy as np

from hfepr.acquisition import Axis, SweepPlan, endor_sweep
from hfepr.detection import NoiseModel
from hfepr.expdsl import emit_dataset
from hfepr.pulses import PulseSpec, b1_for_angle
from hfepr.samples import chromium_potassium_crystal
from hfepr.sequences import SequenceSpec

CARRIER_GHZ = 240.0
B0_T = 8.626


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=451)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--plot", default=None)
    args = ap.parse_args()

    system = chromium_potassium_crystal()
    g = system.electron.g_iso
    p90 = PulseSpec(duration_s=240e-9, b1_mt=b1_for_angle(math.pi / 2, 240e-9, g))
    seq = SequenceSpec(
        kind="mims", tau_s=600e-9, pulses=(p90, p90, p90), t_wait_s=200e-6,
        rf=(17.0, 150e-6, 10.0),
    )
    noise = NoiseModel(sigma=0.0, phase_mode="uniform_random")
    plan = SweepPlan(
        axis1=Axis("rf", "MHz", np.linspace(15.0, 19.5, args.points)),
        shots_per_point=1, repetition_time_s=30e-3, master_seed=args.seed,
    )

    spectra = {}
    for temperature in (5.0, 300.0):
        ds = endor_sweep(system, CARRIER_GHZ, B0_T, plan, seq, noise, temperature)
        name = f"endor_{temperature:.0f}K.csv"
        with open(name, "w") as fh:
            fh.write(emit_dataset(ds, "csv"))
        v = ds.values
        print(f"{temperature:.0f} K: wrote {name}; min {v.min():+.3f}, max {v.max():+.3f} "
              f"({'both signs' if v.min() < -0.05 * v.max() else 'single sign'})")
        spectra[temperature] = ds

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(7, 4))
        for temperature, ds in spectra.items():
            ax.plot(ds.axes[0].values, ds.values, lw=0.9, label=f"{temperature:.0f} K")
        ax.axhline(0, color="k", lw=0.5)
        ax.set_xlabel("rf frequency (MHz)")
        ax.set_ylabel("fractional echo change")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(args.plot, dpi=150)
        print(f"wrote {args.plot}")


if __name__ == "__main__":
    main()
