"""Simulated counterpart of the hardware runtime/fidelity table.

Runs prep (layouts A and B), prep plus 106 idle cycles, prep plus the
flagged ZXIXZ extraction, and the Vigo prep, each over three seeded
replicas, and prints runtime and fidelity (mean +- sample std).

    python3 scripts/runtime_fidelity.py --shots 8192 --out-dir results/
"""

import argparse
import json
from pathlib import Path

from flagbench.experiments import ExperimentConfig, report_json, run_experiment

ROWS = [
    ("State prep (A)", dict(experiment="prep", layout="A")),
    ("State prep (B)", dict(experiment="prep", layout="B")),
    ("State prep (B) + 106 id", dict(experiment="prep-plus-idles", layout="B")),
    ("State prep (C) + ZXIXZ", dict(experiment="prep-plus-stabilizer", layout="C")),
    ("Vigo state prep", dict(experiment="prep", device="vigo")),
]


def fmt(stat):
    if stat is None:
        return "-"
    return f"{100 * stat['mean']:6.2f} +- {100 * stat['std']:4.2f} %"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--shots", type=int, default=8192)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--replicas", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", type=Path)
    args = ap.parse_args()
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
    print(f"{'experiment':<26} {'runtime us':>10} {'cnot depth':>10} {'accepted':>9} {'fidelity':>18} {'mitigated':>18} {'p_opt':>8}")
    for label, overrides in ROWS:
        cfg = ExperimentConfig(shots=args.shots, seed=args.seed, replicas=args.replicas, workers=args.workers, **overrides)
        report = run_experiment(cfg)
        m = report["metrics"]
        p_opt = report.get("fit", {}).get("p_opt", {}).get("mean")
        print(
            f"{label:<26} {report['circuit']['runtime_us']:>10.3f} {report['circuit']['cnot_depth']:>10d} "
            f"{m['accepted_fraction']['mean']:>9.3f} {fmt(m.get('fidelity')):>18} {fmt(m.get('fidelity_mitigated')):>18} "
            f"{'' if p_opt is None else format(p_opt, '.4f'):>8}"
        )
        if args.out_dir:
            name = label.lower().replace(" ", "_").replace("(", "").replace(")", "").replace("+", "plus")
            (args.out_dir / f"{name}.json").write_text(report_json(report), encoding="utf-8")


if __name__ == "__main__":
    main()
