#!/usr/bin/env python3
"""Soft check: does a more diverse seen-attack mix generalize at least as
well to an unseen attack as a single-attack mix?

Runs the evaluation twice with the same unseen attack and prints both AUCs.
The ordering is logged, not asserted — at small scale both mixes usually
saturate.
"""

import argparse
import logging
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from seedmark.harness import EvaluationConfig, diversity_soft_check


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repetitions", type=int, default=3)
    parser.add_argument("--unseen", default="RET")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    cfg = EvaluationConfig(
        master_seed=args.seed,
        repetitions=args.repetitions,
        unseen_attacks=(args.unseen,),
    )
    aucs = diversity_soft_check(cfg, diverse_seen=("RET", "DIS", "TRL"), single_seen=("RET",))
    print(f"diverse seen-attack mix auc: {aucs['diverse']:.4f}")
    print(f"single seen-attack mix auc:  {aucs['single']:.4f}")


if __name__ == "__main__":
    main()
