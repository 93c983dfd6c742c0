"""Command-line entry point.

Subcommands cover the pipeline end to end: convert (SfM/dataset poses to a
pose CSV), pairs (labeled training pairs), train (two-stage or one-stage
protocol), eval (error statistics and tables), epilines (epipolar-line
reports), and synth (synthetic desk-scale datasets).

Exit codes: 0 success, 2 bad input (unreadable or malformed files, bad
flags), 3 violated numeric invariant.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .colmap import parse_colmap_cameras, parse_colmap_images
from .datafiles import (DatasetPoseRecord, PredictionRecord, fmt,
                        parse_external_fundamental, parse_landmark_poses,
                        read_features_csv, read_keypoints_csv, read_pairs_csv,
                        read_pose_csv, read_predictions_csv, write_epilines_csv,
                        write_features_csv, write_pairs_csv,
                        write_pose_csv, write_predictions_csv)
from .epipolar import (approx_intrinsics, epiline_report, fundamental_from_pose,
                       intrinsics_from_colmap_camera)
from .errors import InputError, InvariantViolation
from .evaluation import (cdf, grouped_box_stats, render_report, score,
                         write_box_csv, write_cdf_csv)
from .nn import init_model, predict
from .pairing import PairingConfig, generate_pairs, mirror_pairs
from .poses import RelativePose
from .regressor import (PairDataset, TrainConfig, load_checkpoint,
                        save_checkpoint, train_one_stage, train_two_stage,
                        write_training_log)
from .synthetic import make_synthetic, split_pair_set, to_pair_records
from .trajectory import rereference_trajectory

DEFAULT_FOV_DEG = 61.9


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relpose",
        description="Relative camera pose toolkit: pose ingestion, pair "
                    "datasets, pose regression, and epipolar reports.")
    parser.add_argument("--version", action="version", version=f"relpose {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert SfM or dataset poses to a pose CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--colmap-model", metavar="DIR",
                     help="directory containing a COLMAP text model (images.txt)")
    src.add_argument("--landmark-poses", metavar="FILE",
                     help="pose list with 3 header lines and rows "
                          "'ImageFile X Y Z W P Q R'")
    p.add_argument("--out", required=True, help="output pose CSV")
    p.add_argument("--reref", action="store_true",
                   help="re-reference a COLMAP trajectory to its first frame "
                        "(sorted by image name)")

    p = sub.add_parser("pairs", help="generate labeled intra-sequence image pairs")
    p.add_argument("--poses", required=True, help="input pose CSV")
    p.add_argument("--out", required=True, help="output pairs CSV")
    p.add_argument("--summary", help="write the generation summary JSON here "
                                     "(default: print to stdout)")
    p.add_argument("--pairs-per-image", type=int, default=8)
    p.add_argument("--max-index-gap", type=int, default=None)
    p.add_argument("--mode", choices=["random", "consecutive"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mirror", action="store_true",
                   help="also emit every pair reversed, with labels recomputed "
                        "for the swapped direction")

    p = sub.add_parser("train", help="train a pose regressor")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pairs", help="pairs CSV (requires --features)")
    src.add_argument("--synthetic", metavar="SPEC",
                     help="synthetic dataset spec JSON (from the synth subcommand)")
    p.add_argument("--features", help="per-pair feature CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--mode", choices=["two-stage", "one-stage"], default="two-stage")
    p.add_argument("--hidden-sizes", default="128,128",
                   help="comma-separated trunk layer widths")
    p.add_argument("--stage1-epochs", type=int, default=30)
    p.add_argument("--stage2-epochs", type=int, default=20)
    p.add_argument("--one-stage-epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--squared-norms", action="store_true",
                   help="use squared residual norms in the loss")
    p.add_argument("--carry-optimizer", action="store_true",
                   help="keep optimizer moments across the stage boundary "
                        "instead of resetting them")
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="score predictions and render tables")
    p.add_argument("--pairs", required=True, help="labeled pairs CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint", help="model checkpoint (requires --features)")
    src.add_argument("--predictions", help="precomputed predictions CSV")
    p.add_argument("--features", help="per-pair feature CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model-tag", default="model")

    p = sub.add_parser("epilines", help="epipolar-line report for keypoint pairs")
    p.add_argument("--pairs", required=True, help="labeled pairs CSV")
    p.add_argument("--keypoints", required=True, help="keypoints CSV (image,u,v,keypoint_id)")
    p.add_argument("--out", required=True, help="output line-set CSV")
    p.add_argument("--width", type=int, default=1920)
    p.add_argument("--height", type=int, default=1080)
    p.add_argument("--fov", type=float, default=DEFAULT_FOV_DEG,
                   help="horizontal field of view in degrees")
    p.add_argument("--colmap-cameras", metavar="FILE",
                   help="cameras.txt; when given, intrinsics come from the "
                        "reconstruction and the focal difference against the "
                        "approximation is printed")
    p.add_argument("--camera-id", type=int, default=None,
                   help="camera to use from --colmap-cameras (default: first)")
    p.add_argument("--checkpoint", help="add a predicted_pose source (requires --features)")
    p.add_argument("--features", help="per-pair feature CSV for --checkpoint")
    p.add_argument("--external-f", metavar="FILE",
                   help="externally estimated fundamental matrix (9 numbers), "
                        "added as source 'external' for every pair")

    p = sub.add_parser("synth", help="generate a synthetic desk-scale dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-pairs", type=int, default=2500)
    p.add_argument("--feature-dim", type=int, default=32)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--train-fraction", type=float, default=0.8)
    return parser


def cmd_convert(args) -> int:
    if args.colmap_model:
        path = os.path.join(args.colmap_model, "images.txt")
        with open(path) as fh:
            records = parse_colmap_images(fh, name=path)
        if args.reref:
            poses = rereference_trajectory(records)
            rows = [DatasetPoseRecord(p.frame_id, p.rotation, p.translation)
                    for p in poses]
        else:
            rows = [DatasetPoseRecord(r.name, r.rotation, r.translation_raw)
                    for r in records]
    else:
        if args.reref:
            raise InputError("--reref applies only to --colmap-model input")
        with open(args.landmark_poses) as fh:
            rows = parse_landmark_poses(fh, name=args.landmark_poses)
    write_pose_csv(rows, args.out)
    return 0


def cmd_pairs(args) -> int:
    records = read_pose_csv(args.poses, name=args.poses)
    cfg = PairingConfig(pairs_per_image=args.pairs_per_image,
                        max_index_gap=args.max_index_gap,
                        rng_seed=args.seed, mode=args.mode)
    pairs, summary = generate_pairs(records, cfg)
    if args.mirror:
        pairs = mirror_pairs(pairs)
        summary["pairs"] = len(pairs)
        summary["mirrored"] = True
    write_pairs_csv(pairs, args.out)
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _parse_hidden_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise InputError(f"bad --hidden-sizes value {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise InputError(f"bad --hidden-sizes value {text!r}")
    return sizes


def _load_synthetic_spec(path: str):
    with open(path) as fh:
        spec = json.load(fh)
    pair_set = make_synthetic(seed=spec["seed"], n_pairs=spec["n_pairs"],
                              feature_dim=spec["feature_dim"],
                              noise_sigma=spec.get("noise_sigma", 0.0))
    n_train = spec.get("n_train")
    if n_train:
        train_set, test_set = split_pair_set(pair_set, int(n_train))
        return train_set, test_set
    return pair_set, None


def _train_dataset(args) -> PairDataset:
    if args.synthetic:
        train_set, _ = _load_synthetic_spec(args.synthetic)
        return PairDataset.from_pair_set(train_set)
    if not args.features:
        raise InputError("--pairs requires --features")
    pairs = read_pairs_csv(args.pairs, name=args.pairs)
    keys, features = read_features_csv(args.features, name=args.features)
    return PairDataset.from_records(pairs, keys, features)


def cmd_train(args) -> int:
    dataset = _train_dataset(args)
    cfg = TrainConfig(
        stage1_epochs=args.stage1_epochs,
        stage2_epochs=args.stage2_epochs,
        one_stage_epochs=args.one_stage_epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        squared_norms=args.squared_norms,
        reset_optimizer_between_stages=not args.carry_optimizer,
        shuffle=not args.no_shuffle,
        seed=args.seed,
    )
    model = init_model(dataset.features.shape[1],
                       _parse_hidden_sizes(args.hidden_sizes), seed=args.seed)
    if args.mode == "two-stage":
        model, log = train_two_stage(model, dataset, cfg)
    else:
        model, log = train_one_stage(model, dataset, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    save_checkpoint(model, os.path.join(args.out_dir, "checkpoint.json"))
    write_training_log(log, os.path.join(args.out_dir, "train_log.jsonl"))
    final = [r for r in log if "loss" in r][-1]
    print(f"trained {args.mode} for {final['epoch']} epochs, "
          f"final mean loss {final['loss']:.6f}")
    return 0


def _predictions_for_pairs(pairs, keys, features, model):
    dataset = PairDataset.from_records(pairs, keys, features)
    poses = predict(model, dataset.features)
    return [PredictionRecord(p.image_a, p.image_b, pose.rotation, pose.translation)
            for p, pose in zip(pairs, poses)]


def cmd_eval(args) -> int:
    pairs = read_pairs_csv(args.pairs, name=args.pairs)
    os.makedirs(args.out_dir, exist_ok=True)
    if args.checkpoint:
        if not args.features:
            raise InputError("--checkpoint requires --features")
        model = load_checkpoint(args.checkpoint)
        keys, features = read_features_csv(args.features, name=args.features)
        predictions = _predictions_for_pairs(pairs, keys, features, model)
        write_predictions_csv(predictions,
                              os.path.join(args.out_dir, "predictions.csv"))
    else:
        predictions = read_predictions_csv(args.predictions, name=args.predictions)
    samples = score(predictions, pairs, model_tag=args.model_tag)
    metrics_csv, table = render_report(samples)
    with open(os.path.join(args.out_dir, "metrics.csv"), "w") as fh:
        fh.write(metrics_csv)
    with open(os.path.join(args.out_dir, "table.txt"), "w") as fh:
        fh.write(table)
    for metric in ("rotation", "translation"):
        write_cdf_csv(cdf(samples, metric),
                      os.path.join(args.out_dir, f"cdf_{metric}.csv"))
        write_box_csv(grouped_box_stats(samples, metric),
                      os.path.join(args.out_dir, f"box_{metric}.csv"))
    print(table, end="")
    return 0


def cmd_epilines(args) -> int:
    pairs = read_pairs_csv(args.pairs, name=args.pairs)
    keypoints = read_keypoints_csv(args.keypoints, name=args.keypoints)
    approx = approx_intrinsics(args.width, args.height, args.fov)
    k = approx
    if args.colmap_cameras:
        with open(args.colmap_cameras) as fh:
            cameras = parse_colmap_cameras(fh, name=args.colmap_cameras)
        if not cameras:
            raise InputError(f"{args.colmap_cameras}: no camera records")
        if args.camera_id is not None:
            matches = [c for c in cameras if c.camera_id == args.camera_id]
            if not matches:
                raise InputError(f"camera id {args.camera_id} not found")
            camera = matches[0]
        else:
            camera = cameras[0]
        k = intrinsics_from_colmap_camera(camera)
        print(f"focal length: approximated {fmt(approx.f)} px, "
              f"reconstructed {fmt(k.f)} px, "
              f"difference {fmt(abs(approx.f - k.f))} px")

    def matrices_from(pose_of) -> dict:
        out = {}
        for p in pairs:
            rel = pose_of(p)
            out[(p.image_a, p.image_b)] = fundamental_from_pose(k, k, rel)
        return out

    sources = [("gt_pose", matrices_from(
        lambda p: RelativePose(p.rotation, p.translation_metric)))]
    if args.checkpoint:
        if not args.features:
            raise InputError("--checkpoint requires --features")
        model = load_checkpoint(args.checkpoint)
        keys, features = read_features_csv(args.features, name=args.features)
        predictions = _predictions_for_pairs(pairs, keys, features, model)
        by_key = {(p.image_a, p.image_b): p for p in predictions}
        sources.append(("predicted_pose", matrices_from(
            lambda p: RelativePose(by_key[(p.image_a, p.image_b)].rotation,
                                   by_key[(p.image_a, p.image_b)].translation))))
    if args.external_f:
        with open(args.external_f) as fh:
            f_ext = parse_external_fundamental(fh.read(), name=args.external_f)
        sources.append(("external",
                        {(p.image_a, p.image_b): f_ext for p in pairs}))
    records = epiline_report(pairs, keypoints, sources,
                             image_size=(args.width, args.height))
    write_epilines_csv(records, args.out)
    print(f"wrote {len(records)} line records for {len(pairs)} pair(s)")
    return 0


def cmd_synth(args) -> int:
    if not (0.0 < args.train_fraction < 1.0):
        raise InputError(f"--train-fraction must be in (0, 1), got {args.train_fraction}")
    pair_set = make_synthetic(seed=args.seed, n_pairs=args.n_pairs,
                              feature_dim=args.feature_dim,
                              noise_sigma=args.noise_sigma)
    n_train = int(round(args.n_pairs * args.train_fraction))
    if not (0 < n_train < args.n_pairs):
        raise InputError("--train-fraction leaves an empty split")
    train_set, test_set = split_pair_set(pair_set, n_train)
    os.makedirs(args.out_dir, exist_ok=True)
    spec = {
        "seed": args.seed,
        "n_pairs": args.n_pairs,
        "feature_dim": args.feature_dim,
        "noise_sigma": args.noise_sigma,
        "n_train": n_train,
    }
    with open(os.path.join(args.out_dir, "dataset_spec.json"), "w") as fh:
        fh.write(json.dumps(spec, indent=2, sort_keys=True) + "\n")
    for tag, subset in (("train", train_set), ("test", test_set)):
        records, keys = to_pair_records(subset, prefix=f"synth/{tag}")
        write_pairs_csv(records, os.path.join(args.out_dir, f"{tag}_pairs.csv"))
        write_features_csv(keys, subset.features,
                           os.path.join(args.out_dir, f"{tag}_features.csv"))
    print(f"wrote {n_train} train / {args.n_pairs - n_train} test pairs "
          f"to {args.out_dir}")
    return 0


_COMMANDS = {
    "convert": cmd_convert,
    "pairs": cmd_pairs,
    "train": cmd_train,
    "eval": cmd_eval,
    "epilines": cmd_epilines,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
