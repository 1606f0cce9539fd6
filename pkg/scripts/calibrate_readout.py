"""Find the Melbourne readout flip rate that gives readout-only prep
tomography a fidelity of 0.71.

Rates are parameterized as p(1|0) = eps, p(0|1) = RATIO * eps (relaxation
during readout makes 1 -> 0 flips more likely). The fidelity is computed in
exact mode (infinite shots) on the layout-A prep fixture, so the result is
deterministic. Paste the printed pair into MELBOURNE_READOUT in
build_devices.py.
"""

import argparse

from scipy.optimize import brentq

from flagbench.code513 import minus_logical_state, prep_minus_logical
from flagbench.device import NoiseModel
from flagbench.quantum import fidelity
from flagbench.tomography import collect, reconstruct

RATIO = 2.0


def prep_fidelity(eps: float, variant: str = "melbourne-depth6") -> float:
    c = prep_minus_logical(variant)
    order = c.metadata["output_order"]
    noise = NoiseModel.readout_flips({q: (eps, RATIO * eps) for q in range(c.num_qubits)})
    ds = collect(c, order, noise=noise, exact=True)
    return fidelity(reconstruct(ds), minus_logical_state())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", type=float, default=0.71)
    ap.add_argument("--variant", default="melbourne-depth6")
    args = ap.parse_args()
    eps = brentq(lambda e: prep_fidelity(e, args.variant) - args.target, 1e-4, 0.2, xtol=1e-7)
    eps = round(eps, 5)
    print(f"eps={eps:.5f}  p(1|0)={eps:.5f}  p(0|1)={RATIO * eps:.5f}  fidelity={prep_fidelity(eps, args.variant):.4f}")


if __name__ == "__main__":
    main()
