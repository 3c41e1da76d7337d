"""Command-line front end.

Commands: ``features``, ``synth``, ``fit``, ``classify``, ``crossval``,
``ablate``, ``plot``. Every command stages its artifacts and renames them into
the output directory only when the whole run succeeded, so failures leave no
partial outputs; the exit code is 0 iff all artifacts were written. Failures
print a single machine-parsable ``error: <reason>`` line on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import evaluation, normalizer, synthgen, tensor_features
from .config import ENV_OUTDIR, RunConfig, load_config
from .errors import SchemaError
from .feature_store import FeatureGroupSpec, load_dataset, select_features
from .labels import NUCLEUS_INDEX, format_label_set, parse_label_cell
from .latent_classifier import build_labeled_set, classify_points, default_k
from .manifold import fit_embedding, load_model, transform_new
from .svgplot import scatter_svg


class ArtifactSet:
    """Stage artifact files and publish them atomically on success."""

    def __init__(self, outdir: str):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self._staged: list[tuple[Path, Path]] = []

    def stage_path(self, name: str) -> Path:
        tmp = self.outdir / f".{name}.tmp-{os.getpid()}"
        self._staged.append((tmp, self.outdir / name))
        return tmp

    def add_text(self, name: str, text: str) -> None:
        tmp = self.stage_path(name)
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)

    def commit(self) -> None:
        for tmp, final in self._staged:
            os.replace(tmp, final)
        self._staged.clear()

    def abort(self) -> None:
        for tmp, _final in self._staged:
            tmp.unlink(missing_ok=True)
        self._staged.clear()


def _config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--data", help="feature-table TSV path")
    parser.add_argument("--groups", help="comma list from base,coord,multiti,conn6,conn98")
    parser.add_argument("--dim", type=int, help="latent dimension (2, 3 or 4 unless --k given)")
    parser.add_argument("--n-neighbors", type=int, dest="n_neighbors")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--min-dist", type=float, dest="min_dist")
    parser.add_argument("--spread", type=float)
    parser.add_argument("--k", type=int, help="voting neighbor count (default from --dim)")
    parser.add_argument("--folds", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--deterministic", action="store_const", const=True, default=None)
    parser.add_argument(
        "--no-scale-neighbors",
        dest="auto_scale_neighbors",
        action="store_const",
        const=False,
        default=None,
        help="use the requested n_neighbors verbatim instead of scaling to the data size",
    )
    parser.add_argument(
        "--normalize-global",
        dest="normalize_per_fold",
        action="store_const",
        const=False,
        default=None,
        help="fit the scaler on all subjects instead of per training fold",
    )
    parser.add_argument(
        "--include-conflicted",
        dest="include_conflicted",
        action="store_const",
        const=True,
        default=None,
        help="keep Conflicted as a votable class",
    )
    parser.add_argument("-o", "--outdir", help=f"output directory (default ${ENV_OUTDIR} or .)")


def _gather_config(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for key in (
        "dim", "n_neighbors", "epochs", "min_dist", "spread", "k", "folds",
        "seed", "deterministic", "auto_scale_neighbors", "normalize_per_fold",
        "include_conflicted", "outdir",
    ):
        overrides[key] = getattr(args, key, None)
    if getattr(args, "data", None):
        overrides["dataset"] = args.data
    if getattr(args, "groups", None):
        overrides["groups"] = tuple(g.strip() for g in args.groups.split(",") if g.strip())
    return load_config(getattr(args, "config", None), overrides)


def _require_dataset(config: RunConfig):
    if not config.dataset:
        raise SchemaError("no dataset given (use --data or dataset= in the config file)")
    spec = FeatureGroupSpec(tuple(config.groups))
    return load_dataset(config.dataset, spec), spec


def _fmt_float(value: float) -> str:
    return repr(float(value))


def cmd_features(args: argparse.Namespace) -> int:
    spacing = tuple(float(s) for s in args.spacing.split(","))
    if len(spacing) != 3:
        raise SchemaError("--spacing expects three comma-separated values")
    df = pd.read_csv(args.input, sep="\t", dtype=str, keep_default_na=False)
    needed = ["subject", "i", "j", "k", *tensor_features.COMPONENT_ORDER]
    for col in needed:
        if col not in df.columns:
            raise SchemaError(f"missing required column {col!r}")
    subjects = df["subject"].to_numpy(dtype=object)
    coords = df[["i", "j", "k"]].apply(pd.to_numeric).to_numpy().astype(np.int64)
    comps = df[list(tensor_features.COMPONENT_ORDER)].apply(pd.to_numeric).to_numpy(dtype=float)

    values, vectors = tensor_features.eigen_decompose_batch(comps)
    scalars = tensor_features.scalar_maps_batch(values)
    westin = tensor_features.westin_indices_batch(values)
    knut = tensor_features.knutsson_map_batch(vectors[:, :, 0])
    degenerate = values[:, 0] <= 0.0
    knut[degenerate] = 0.0

    edge = np.zeros(len(df))
    for subject in sorted(set(subjects.tolist())):
        rows = np.flatnonzero(subjects == subject)
        sub_coords = coords[rows]
        origin = sub_coords.min(axis=0)
        shape = sub_coords.max(axis=0) - origin + 1
        field = np.zeros((*shape, 5))
        mask = np.zeros(shape, dtype=bool)
        local = sub_coords - origin
        field[local[:, 0], local[:, 1], local[:, 2]] = knut[rows]
        mask[local[:, 0], local[:, 1], local[:, 2]] = True
        emap = tensor_features.knutsson_edge_map_masked(field, mask, spacing)
        edge[rows] = emap[local[:, 0], local[:, 1], local[:, 2]]

    out = pd.DataFrame(
        {
            "subject": subjects,
            "i": coords[:, 0],
            "j": coords[:, 1],
            "k": coords[:, 2],
            "fa": scalars["fa"],
            "md": scalars["md"],
            "rd": scalars["rd"],
            "ad": scalars["ad"],
            "tr": scalars["tr"],
            "mode": scalars["mode"],
            "westin_cl": westin[:, 0],
            "westin_cp": westin[:, 1],
            "westin_cs": westin[:, 2],
            **{f"knut{c + 1}": knut[:, c] for c in range(5)},
            "knut_edge": edge,
        }
    )
    artifacts = ArtifactSet(args.outdir or os.environ.get(ENV_OUTDIR, "."))
    try:
        out.to_csv(artifacts.stage_path("features.tsv"), sep="\t", index=False, lineterminator="\n")
        artifacts.add_text("config.txt", f"input={args.input}\nspacing={args.spacing}\n")
        artifacts.commit()
    except BaseException:
        artifacts.abort()
        raise
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = synthgen.SynthSpec(
        n_subjects=args.subjects,
        voxels_per_subject=args.voxels,
        n_clusters=args.clusters,
        separation=args.separation,
        overlap_fraction=args.overlap,
        unlabeled_fraction=args.unlabeled,
        seed=args.seed,
    )
    df = synthgen.generate(spec)
    artifacts = ArtifactSet(args.outdir or os.environ.get(ENV_OUTDIR, "."))
    try:
        synthgen.write_table(df, artifacts.stage_path("dataset.tsv"))
        snapshot = "\n".join(
            f"{name}={getattr(spec, name)}"
            for name in (
                "n_subjects", "voxels_per_subject", "n_clusters", "separation",
                "overlap_fraction", "unlabeled_fraction", "seed",
            )
        )
        artifacts.add_text("config.txt", snapshot + "\n")
        artifacts.commit()
    except BaseException:
        artifacts.abort()
        raise
    return 0


def _latent_table(subjects, coords, latent, label_sets) -> str:
    d = latent.shape[1]
    header = ["subject", "i", "j", "k", *[f"z{c + 1}" for c in range(d)], "labels"]
    lines = ["\t".join(header)]
    for row in range(latent.shape[0]):
        cells = [
            str(subjects[row]),
            str(int(coords[row, 0])),
            str(int(coords[row, 1])),
            str(int(coords[row, 2])),
            *[_fmt_float(v) for v in latent[row]],
            format_label_set(label_sets[row]),
        ]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def cmd_fit(args: argparse.Namespace) -> int:
    config = _gather_config(args)
    dataset, spec = _require_dataset(config)
    matrix = select_features(dataset, spec)
    scaler = normalizer.fit(matrix.values, matrix.directional, matrix.columns)
    x = scaler.transform(matrix.values)
    model = fit_embedding(
        x,
        d=config.dim,
        n_neighbors=config.n_neighbors,
        epochs=config.epochs,
        min_dist=config.min_dist,
        spread=config.spread,
        seed=config.seed,
        deterministic=config.deterministic,
        negative_sample_rate=config.negative_sample_rate,
        learning_rate=config.learning_rate,
        auto_scale_neighbors=config.auto_scale_neighbors,
    )
    artifacts = ArtifactSet(config.resolved_outdir())
    try:
        model.save(artifacts.stage_path("model.tsv"))
        scaler.save(artifacts.stage_path("scaler.tsv"))
        artifacts.add_text(
            "latent.tsv",
            _latent_table(dataset.subjects, dataset.coords, model.embedding, dataset.label_sets),
        )
        artifacts.add_text("config.txt", config.to_text())
        artifacts.commit()
    except BaseException:
        artifacts.abort()
        raise
    return 0


def _load_model_dir(model_dir: str):
    root = Path(model_dir)
    model = load_model(root / "model.tsv")
    scaler = normalizer.RobustScaler.load(root / "scaler.tsv")
    latent_df = pd.read_csv(root / "latent.tsv", sep="\t", dtype=str, keep_default_na=False)
    label_sets = tuple(parse_label_cell(cell) for cell in latent_df["labels"].tolist())
    return model, scaler, label_sets


def cmd_classify(args: argparse.Namespace) -> int:
    config = _gather_config(args)
    model, scaler, train_labels = _load_model_dir(args.model)
    groups = tuple(config.groups)
    dataset = load_dataset(config.dataset, FeatureGroupSpec(groups)) if config.dataset else None
    if dataset is None:
        raise SchemaError("no dataset given (use --data)")
    matrix = select_features(dataset, groups)
    if matrix.columns != scaler.columns:
        raise SchemaError(
            "feature columns do not match the model's scaler; pass the same --groups used at fit time"
        )
    labeled = build_labeled_set(
        model.embedding, train_labels, include_conflicted=config.include_conflicted
    )
    k = config.k if config.k is not None else default_k(model.d)

    if args.all_voxels:
        keep = np.arange(dataset.n)
    else:
        keep = np.array(
            [i for i, ls in enumerate(dataset.label_sets) if any(l in NUCLEUS_INDEX for l in ls)],
            dtype=int,
        )
        if len(keep) == 0:
            raise SchemaError("no labeled voxels to classify; use --all-voxels for whole-mask prediction")
    x = scaler.transform(matrix.values[keep])
    latent = transform_new(model, x, deterministic=config.deterministic)
    result = classify_points(labeled, latent, k)

    lines = [
        "\t".join(
            [
                "subject", "i", "j", "k", "predicted_label",
                "top1_label", "top1_weight", "top2_label", "top2_weight",
                "top3_label", "top3_weight",
            ]
        )
    ]
    for q, row in enumerate(keep):
        top = result.top_labels(q, 3)
        top += [("", 0.0)] * (3 - len(top))
        cells = [
            str(dataset.subjects[row]),
            str(int(dataset.coords[row, 0])),
            str(int(dataset.coords[row, 1])),
            str(int(dataset.coords[row, 2])),
            str(result.winners[q]),
        ]
        for name, weight in top:
            cells.append(name)
            cells.append(_fmt_float(weight) if name else "")
        lines.append("\t".join(cells))

    artifacts = ArtifactSet(config.resolved_outdir())
    try:
        artifacts.add_text("predictions.tsv", "\n".join(lines) + "\n")
        artifacts.add_text("config.txt", config.to_text())
        artifacts.commit()
    except BaseException:
        artifacts.abort()
        raise
    return 0


def cmd_crossval(args: argparse.Namespace) -> int:
    config = _gather_config(args)
    dataset, _spec = _require_dataset(config)
    artifacts = ArtifactSet(config.resolved_outdir())

    def sink(fold: int, model, scaler) -> None:
        model.save(artifacts.stage_path(f"fold{fold + 1}_model.tsv"))
        scaler.save(artifacts.stage_path(f"fold{fold + 1}_scaler.tsv"))

    try:
        report = evaluation.run_crossval(dataset, config, model_sink=sink if args.save_models else None)
        artifacts.add_text("report.tsv", evaluation.format_crossval_table(report))
        artifacts.add_text("summary.txt", evaluation.summary_lines(report))
        artifacts.add_text("config.txt", config.to_text())
        artifacts.commit()
    except BaseException:
        artifacts.abort()
        raise
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _gather_config(args)
    if args.subsets:
        subsets = tuple(
            tuple(g.strip() for g in block.split(",") if g.strip())
            for block in args.subsets.split("|")
        )
    else:
        subsets = evaluation.TABLE_1_SUBSETS
    all_groups = tuple(dict.fromkeys(g for subset in subsets for g in subset))
    config = replace(config, groups=all_groups)
    dataset, _spec = _require_dataset(config)
    artifacts = ArtifactSet(config.resolved_outdir())
    try:
        rows = evaluation.run_ablation(dataset, config, subsets)
        artifacts.add_text("ablation.tsv", evaluation.format_ablation_table(rows))
        summary = [
            f"{','.join(row.groups)}\tdim={row.dim}\tmean={row.mean!r}\tstd={row.std!r}"
            for row in rows
        ]
        artifacts.add_text("summary.txt", "\n".join(summary) + "\n")
        artifacts.add_text("config.txt", config.to_text())
        artifacts.commit()
    except BaseException:
        artifacts.abort()
        raise
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    df = pd.read_csv(args.latent, sep="\t", dtype=str, keep_default_na=False)
    for col in ("z1", "z2", "labels"):
        if col not in df.columns:
            raise SchemaError(f"latent table missing column {col!r}")
    points = df[["z1", "z2"]].apply(pd.to_numeric).to_numpy(dtype=float)
    first_labels = [
        parse_label_cell(cell)[0] if cell.strip() else ""
        for cell in df["labels"].tolist()
    ]
    artifacts = ArtifactSet(args.outdir or os.environ.get(ENV_OUTDIR, "."))
    try:
        artifacts.add_text("embedding.svg", scatter_svg(points, first_labels))
        artifacts.commit()
    except BaseException:
        artifacts.abort()
        raise
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thalaparc",
        description="Thalamic parcellation: latent embedding of multi-contrast voxel features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="derive tensor scalar/orientation feature columns")
    p.add_argument("input", help="TSV with subject,i,j,k and tensor components dxx..dyz")
    p.add_argument("--spacing", default="1,1,1", help="voxel spacing sx,sy,sz (mm)")
    p.add_argument("-o", "--outdir")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("synth", help="generate a synthetic feature table")
    p.add_argument("--subjects", type=int, default=25)
    p.add_argument("--voxels", type=int, default=200)
    p.add_argument("--clusters", type=int, default=13)
    p.add_argument("--separation", type=float, default=8.0)
    p.add_argument("--overlap", type=float, default=0.05)
    p.add_argument("--unlabeled", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--outdir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="train an embedding on a whole feature table")
    _config_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("classify", help="label a feature table with a trained model")
    p.add_argument("--model", required=True, help="directory produced by fit")
    p.add_argument(
        "--all-voxels",
        action="store_true",
        help="predict every voxel in the table (whole-mask mode)",
    )
    _config_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("crossval", help="subject-level cross-validation with Dice reports")
    p.add_argument("--save-models", action="store_true", help="persist per-fold model artifacts")
    _config_flags(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("ablate", help="feature-subset ablation over cross-validation")
    p.add_argument(
        "--subsets",
        help="pipe-separated comma lists, e.g. 'base|base,coord'; default: the published seven",
    )
    _config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("plot", help="SVG scatter of a 2-D latent table")
    p.add_argument("latent", help="latent TSV written by fit")
    p.add_argument("-o", "--outdir")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
