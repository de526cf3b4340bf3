"""Worst-case and mean JSD between ideal and hardware conditionals per fraction width.

    python3 scripts/divergence_sweep.py --bits 4 6 8 12 16 --threshold 0
"""
import argparse

from statrobust.approx_hw import ApproxConfig, FixedPointFormat
from statrobust.config import DivergenceSection
from statrobust.experiment import divergence_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--bits", type=int, nargs="+", default=[4, 6, 8, 10, 12, 16, 20, 24])
    ap.add_argument("--threshold", type=float, default=0.0)
    ap.add_argument("--support", type=int, default=4)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--energy-high", type=float, default=8.0)
    args = ap.parse_args()

    spec = DivergenceSection(support_size=args.support, samples=args.samples,
                             energy_high=args.energy_high)
    print(f"{'bits':>4} {'max JSD':>12} {'mean JSD':>12} {'degenerate':>10}")
    for bits in args.bits:
        approx = ApproxConfig(FixedPointFormat(bits + 1, bits), args.threshold)
        s, _ = divergence_sweep(approx, spec)
        print(f"{bits:>4} {s.get('max_jsd', float('nan')):>12.3e} "
              f"{s.get('mean_jsd', float('nan')):>12.3e} {s['degenerate']:>10}")


if __name__ == "__main__":
    main()
