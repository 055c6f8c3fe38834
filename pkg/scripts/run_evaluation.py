#!/usr/bin/env python3
"""Run a preset end-to-end evaluation and export its ROC report.

Presets map to the scenarios the test suite exercises:
  naive       seen RET        -> test RET
  unseen      seen TRL, DIS   -> test RET
  informed    seen WQ(RET)    -> test WP(RET)
  cross-arch  seen TRL        -> test CAR (different architecture family)
"""

import argparse
import logging
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from seedmark.harness import EvaluationConfig, export_report, run_raw_evaluation

PRESETS = {
    "naive": {"seen_attacks": ("RET",), "unseen_attacks": ("RET",)},
    "unseen": {"seen_attacks": ("TRL", "DIS"), "unseen_attacks": ("RET",)},
    "informed": {"seen_attacks": ("WQ(RET)",), "unseen_attacks": ("WP(RET)",)},
    "cross-arch": {"seen_attacks": ("TRL",), "unseen_attacks": ("CAR",)},
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--preset", choices=sorted(PRESETS), default="naive")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repetitions", type=int, default=5)
    parser.add_argument("--classifier", choices=("lr", "gnb"), default="lr")
    parser.add_argument("--out", default="results")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    cfg = EvaluationConfig(
        master_seed=args.seed,
        repetitions=args.repetitions,
        classifier_kind=args.classifier,
        **PRESETS[args.preset],
    )
    report = run_raw_evaluation(cfg)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{args.preset}-{report.config_digest}.csv")
    export_report(report, path)
    print(f"preset             {args.preset}")
    print(f"auc                {report.roc.auc:.4f}")
    print(f"tpr at fpr=0       {report.roc.tpr_at_fpr0:.4f}")
    print(f"fpr at tpr=1       {report.roc.fpr_at_tpr1:.4f}")
    print(f"mean suspect score {np.mean(report.pos_scores):.4f}")
    print(f"mean control score {np.mean(report.neg_scores):.4f}")
    print(f"report             {path}")


if __name__ == "__main__":
    main()
