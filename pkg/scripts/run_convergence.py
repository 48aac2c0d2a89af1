"""Paired convergence runs (sinc vs learned first layer) on the synthetic speaker task.

    python3 scripts/run_convergence.py --seeds 0 1 2 3 4 --epochs 10 --out results/convergence.json
"""

import argparse
import json
import time
from dataclasses import asdict

from sincfront.experiments import ConvergenceConfig, convergence_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--out", help="write all per-seed results as JSON")
    args = ap.parse_args()

    cfg = ConvergenceConfig(epochs=args.epochs)
    results = []
    for seed in args.seeds:
        t0 = time.time()
        sinc, learned = convergence_experiment(cfg, seed)
        results.append({"seed": seed, "sinc": asdict(sinc), "learned": asdict(learned)})
        print(f"seed {seed} ({time.time() - t0:.0f}s)")
        for r in (sinc, learned):
            errs = " ".join(f"{e:.3f}" for e in r.heldout_errors)
            print(f"  {r.variant:8s} heldout [{errs}] first<10%: {r.first_epoch_below(0.10)} "
                  f"sentence err {r.final_sentence_error:.3f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"config": asdict(cfg), "runs": results}, fh, indent=1)


if __name__ == "__main__":
    main()
