#!/usr/bin/env python3
"""Final ground population of the five-step cooling schedule against pump rate and step length.

    python3 scripts/cooling_sweep.py [--ratios 1 2 5 10 20] [--scales 0.5 1 2 4]
"""
import argparse
import warnings

from optlat.cooling import CoolingConfig, duration_sweep


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ratios", type=float, nargs="+", default=[1.0, 2.0, 5.0, 10.0, 20.0],
                    help="gamma_p / gamma_s values")
    ap.add_argument("--scales", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0],
                    help="common factors on the default step durations")
    args = ap.parse_args()
    print("gamma_p/gamma_s " + "".join(f"{s:>9g}" for s in args.scales) + "   plateau")
    for r in args.ratios:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = duration_sweep(CoolingConfig(pump_ratio=r), args.scales)
        print(f"{r:>15g} " + "".join(f"{res[s]:9.4f}" for s in args.scales) + f"   {max(res.values()):.4f}")


if __name__ == "__main__":
    run()
