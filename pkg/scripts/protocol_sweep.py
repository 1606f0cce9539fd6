"""Logical fidelity of both correction protocols against cx depolarizing noise.

    python3 scripts/protocol_sweep.py --shots 2000 --rates 0.001,0.003,0.01,0.03
"""

import argparse

from flagbench.device import NoiseModel
from flagbench.protocol import run_hardware_protocol, run_ideal_protocol


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--shots", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rates", default="0.001,0.003,0.01,0.03")
    args = ap.parse_args()
    print(f"{'p_cx':>7} {'protocol':<9} {'accepted':>9} {'uncorrected':>12} {'corrected':>10} {'conditioned':>12}")
    for rate in (float(x) for x in args.rates.split(",")):
        noise = NoiseModel.depolarizing(p2=rate, gates=["cx"])
        for name, fn in (("ideal", run_ideal_protocol), ("hardware", run_hardware_protocol)):
            r = fn(noise, args.shots, args.seed)
            print(
                f"{rate:>7.4f} {name:<9} {r.accepted_fraction:>9.3f} {r.uncorrected_fidelity:>12.4f} "
                f"{r.logical_fidelity:>10.4f} {r.conditioned_fidelity:>12.4f}"
            )


if __name__ == "__main__":
    main()
