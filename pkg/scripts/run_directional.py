"""Run the directional experiment and print the headline comparison.

    python3 scripts/run_directional.py [--config configs/directional.yaml] [--out runs/directional]
"""
import argparse
import json
from pathlib import Path

from statrobust.config import load_config
from statrobust.experiment import run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=ROOT / "configs" / "directional.yaml")
    ap.add_argument("--out", default=ROOT / "runs" / "directional")
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()

    rep = run_experiment(load_config(args.config), args.out, workers=args.workers)
    for arm in ("software", "noise", "hardware"):
        ess = rep["ess"][arm]
        print(f"{arm:>9}: active ESS {ess['mean_active']:7.2f} +- {ess['std_active_across_runs']:.2f}"
              f"  median R2 {rep['r_squared'][arm]['median']:.4f}"
              f"  BP {rep['bad_pixel_percentage'][arm]['mean']:.2f}%")
    for arm, curve in rep["convergence"]["curves"].items():
        pts = "  ".join(f"{p['multiple']}x:{p['convergence_percentage']:.1f}%" for p in curve)
        print(f"convergence {arm:>9}: {pts}")
    print("hardware multiple to reach software 1x:",
          rep["convergence"]["hardware_multiple_to_reach_software_base"])
    print("KS software vs hardware:", json.dumps(rep["ks"]["software_vs_hardware"]))


if __name__ == "__main__":
    main()
