"""Noisy-band experiment: how quickly each first layer stops listening to a corrupted band.

    python3 scripts/run_valley.py --seeds 0 1 2 3 4 --epochs 12 --out results/valley.json
"""

import argparse
import json
import time

from sincfront.analysis import ValleyConfig, valley_experiment, valley_summary
from sincfront.experiments import desk_model_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--epochs", type=int, default=12)
    ap.add_argument("--snr-db", type=float, default=0.0)
    ap.add_argument("--out", help="write traces and summaries as JSON")
    args = ap.parse_args()

    cfg = ValleyConfig(model=desk_model_config(), epochs=args.epochs, snr_db=args.snr_db)
    runs = []
    for seed in args.seeds:
        t0 = time.time()
        sinc, learned = valley_experiment(cfg, seed)
        summary = valley_summary(sinc, learned)
        runs.append({"seed": seed, "summary": summary,
                     "sinc": [[p.updates_seen, p.valley_depth_db] for p in sinc.points],
                     "learned": [[p.updates_seen, p.valley_depth_db] for p in learned.points]})
        print(f"seed {seed} ({time.time() - t0:.0f}s) {summary}")
        for name, tr in (("sinc", sinc), ("learned", learned)):
            print(f"  {name:8s} " + " ".join(f"{p.valley_depth_db:.1f}" for p in tr.points))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(runs, fh, indent=1)


if __name__ == "__main__":
    main()
