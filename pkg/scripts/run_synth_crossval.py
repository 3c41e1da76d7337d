#!/usr/bin/env python3
"""Generate a synthetic dataset and cross-validate the full pipeline on it.

Library-level driver mirroring `thalaparc synth` + `thalaparc crossval`,
printing the fold table to stdout.
"""

import argparse
import sys
import tempfile
from pathlib import Path

from thalaparc import evaluation, synthgen
from thalaparc.config import RunConfig
from thalaparc.feature_store import FeatureGroupSpec, load_dataset


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--subjects", type=int, default=25)
    parser.add_argument("--voxels", type=int, default=200)
    parser.add_argument("--separation", type=float, default=8.0)
    parser.add_argument("--overlap", type=float, default=0.05)
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--epochs", type=int, default=1000)
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--groups", default="base,coord,multiti")
    return parser.parse_args()


def main():
    args = parse_args()
    groups = tuple(g.strip() for g in args.groups.split(","))
    spec = synthgen.SynthSpec(
        n_subjects=args.subjects,
        voxels_per_subject=args.voxels,
        separation=args.separation,
        overlap_fraction=args.overlap,
        seed=args.seed,
    )
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "dataset.tsv"
        synthgen.write_table(synthgen.generate(spec), path)
        dataset = load_dataset(path, FeatureGroupSpec(groups))
    config = RunConfig(
        groups=groups,
        dim=args.dim,
        epochs=args.epochs,
        folds=args.folds,
        seed=args.seed,
        deterministic=True,
    ).validate()
    report = evaluation.run_crossval(dataset, config)
    sys.stdout.write(evaluation.format_crossval_table(report))
    print(f"mean overall: {report.mean_overall:.4f} +/- {report.std_overall:.4f}")


if __name__ == "__main__":
    main()
