"""Command-line front end wiring the pipeline stages.

Configuration precedence for preprocessing parameters is
built-in profile < config file < command-line flag. ``--jobs`` parallelizes
over frames only; outputs are byte-identical for any job count because all
randomness is keyed by (seed, reference scan, voxel cell).
"""

from __future__ import annotations

import argparse
import logging
import multiprocessing as mp
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import downsample, evaluate, postproc, seqio, synth
from .accumulate import AccumMode, derive_moving_mask
from .downsample import DownsampleParams
from .errors import LidarSeqError
from .geom import radius
from .profiles import PROFILES, get_profile
from .window import WindowParams

log = logging.getLogger("lidarseq")

# preprocess parameters that follow the profile < config < flag precedence
_OVERRIDABLE = {
    "voxel_size": float,
    "accumulate_length": int,
    "min_dist": float,
    "max_voxel": int,
    "ref_dist": float,
    "lower_range": float,
    "upper_range": float,
    "window_growth": float,
}


def _resolve(args, config: dict[str, str], profile, name: str):
    flag_value = getattr(args, name, None)
    if flag_value is not None:
        return flag_value
    if name in config:
        return _OVERRIDABLE[name](config[name])
    if name == "window_growth":
        return 2.0
    return getattr(profile, name)


# ---------------------------------------------------------------- preprocess

_WORKER: dict = {}


def _init_preprocess_worker(manifest_path, seq, out_dir, wp, dp, mode, moving):
    manifest = seqio.SequenceManifest.from_file(manifest_path)
    _WORKER.update(
        manifest=manifest,
        scans=seqio.load_sequence(manifest),
        seq=seq,
        out=out_dir,
        wp=wp,
        dp=dp,
        mode=mode,
        moving=moving,
    )


def _mask_for(index: int):
    mask = seqio.load_mask(_WORKER["manifest"], index)
    if mask is not None:
        return mask
    labels = _WORKER["scans"][index].labels
    if labels is not None and _WORKER["moving"]:
        return derive_moving_mask(labels, _WORKER["moving"])
    return None


def _preprocess_one(ref_idx: int):
    frame = downsample.preprocess_frame(
        _WORKER["scans"],
        ref_idx,
        _WORKER["wp"],
        _WORKER["mode"],
        _WORKER["dp"],
        mask_lookup=_mask_for,
    )
    downsample.write_frame(_WORKER["out"], _WORKER["seq"], frame)
    voxels = downsample.occupied_voxels(frame.cloud, _WORKER["dp"].voxel_size)
    return ref_idx, len(frame.cloud), voxels


def cmd_preprocess(args) -> int:
    manifest = seqio.SequenceManifest.from_file(args.manifest)
    profile = get_profile(args.profile or manifest.profile)
    config = seqio.read_kv_config(args.config) if args.config else {}

    wp = WindowParams(
        accumulate_length=_resolve(args, config, profile, "accumulate_length"),
        min_dist=_resolve(args, config, profile, "min_dist"),
    )
    dp = DownsampleParams(
        voxel_size=_resolve(args, config, profile, "voxel_size"),
        lower_range=_resolve(args, config, profile, "lower_range"),
        upper_range=_resolve(args, config, profile, "upper_range"),
        max_voxel=_resolve(args, config, profile, "max_voxel"),
        ref_dist=_resolve(args, config, profile, "ref_dist"),
        rng_seed=args.seed,
        window_growth=_resolve(args, config, profile, "window_growth"),
    )
    mode = AccumMode(args.mode)
    seq = args.sequence or manifest.sequence
    init_args = (
        str(args.manifest),
        seq,
        str(args.out),
        wp,
        dp,
        mode,
        profile.moving_classes,
    )
    indices = range(len(manifest))
    log.info(
        "preprocess: sequence=%s scans=%d profile=%s mode=%s jobs=%d",
        seq, len(manifest), profile.name, mode.value, args.jobs,
    )
    if args.jobs <= 1:
        _init_preprocess_worker(*init_args)
        results = map(_preprocess_one, indices)
        for ref_idx, n_points, voxels in results:
            log.info(
                "frame=%s points=%d voxels=%d",
                seqio.frame_name(ref_idx), n_points, voxels,
            )
    else:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(
            max_workers=args.jobs,
            mp_context=ctx,
            initializer=_init_preprocess_worker,
            initargs=init_args,
        ) as pool:
            for ref_idx, n_points, voxels in pool.map(_preprocess_one, indices):
                log.info(
                    "frame=%s points=%d voxels=%d",
                    seqio.frame_name(ref_idx), n_points, voxels,
                )
    return 0


# --------------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    spec = synth.default_scene(
        seed=args.seed,
        scan_count=args.scans,
        speed=args.speed,
        rate_hz=args.rate,
        trajectory=args.trajectory,
        turn_rate=args.turn_rate,
        max_range=args.max_range,
        density=args.density,
        num_classes=args.classes,
    )
    manifest = synth.generate_sequence(spec, args.out, profile=args.profile)
    log.info("synth: wrote %d scans under %s", len(manifest), args.out)
    print(Path(args.out) / "manifest.cfg")
    return 0


# ------------------------------------------------------------------ mockpred


def cmd_mockpred(args) -> int:
    labeler = synth.LabelerSpec(
        p_close=args.p_close,
        p_medium=args.p_medium,
        p_far=args.p_far,
        num_classes=args.classes,
        seed=args.seed,
    )
    points_dir = Path(args.points)
    labels_dir = Path(args.labels)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scan_paths = sorted(points_dir.glob(f"*{seqio.SCAN_SUFFIX}"))
    if not scan_paths:
        raise FileNotFoundError(f"no point files in {points_dir}")
    for scan_path in scan_paths:
        name = scan_path.stem
        gt = seqio.semantic_ids(
            seqio.read_labels(labels_dir / (name + seqio.LABEL_SUFFIX))
        )
        radii = radius(seqio.read_points(scan_path)[:, :3])
        pred = synth.mock_predict(gt, radii, labeler, frame_key=int(name))
        seqio.write_labels(out_dir / (name + seqio.LABEL_SUFFIX), pred)
    log.info("mockpred: wrote %d prediction files to %s", len(scan_paths), out_dir)
    return 0


# --------------------------------------------------------------- postprocess


def cmd_postprocess(args) -> int:
    written = postproc.postprocess_sequence(
        single_dir=args.single,
        frames_root=args.prov,
        multi_dir=args.multi,
        out_dir=args.out,
        boundary=args.boundary,
    )
    log.info("postprocess: wrote %d final label files to %s", len(written), args.out)
    return 0


# ------------------------------------------------------------------ evaluate


def cmd_evaluate(args) -> int:
    if args.profile:
        profile = get_profile(args.profile)
        num_classes = args.classes or profile.num_classes
        ignore = profile.ignore_class if args.ignore_class is None else args.ignore_class
    else:
        if not args.classes:
            raise LidarSeqError("evaluate needs --profile or --classes")
        num_classes = args.classes
        ignore = 0 if args.ignore_class is None else args.ignore_class

    if args.prov:
        acc = evaluate.evaluate_frame_predictions(
            args.prov, args.gt, args.pred, num_classes, ignore, args.max_range
        )
    else:
        if not args.scans:
            raise LidarSeqError("evaluate needs --scans (or --prov for frames)")
        acc = evaluate.evaluate_scan_predictions(
            args.scans, args.gt, args.pred, num_classes, ignore, args.max_range
        )
    text = evaluate.format_report(evaluate.build_report(acc), args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------- stats


def cmd_stats(args) -> int:
    if args.voxel_size is not None:
        voxel_size = args.voxel_size
    elif args.profile:
        voxel_size = get_profile(args.profile).voxel_size
    else:
        raise LidarSeqError("stats needs --voxel-size or --profile")
    paths = sorted(Path(args.points).glob(f"*{seqio.SCAN_SUFFIX}"))
    if not paths:
        raise FileNotFoundError(f"no point files in {args.points}")
    shares = np.zeros(3)
    for path in paths:
        shares += evaluate.voxel_distribution(seqio.read_points(path), voxel_size)
    shares /= len(paths)
    if args.format == "kv":
        text = (
            f"files = {len(paths)}\nvoxel_size = {voxel_size}\n"
            f"close = {shares[0]:.4f}\nmedium = {shares[1]:.4f}\n"
            f"far = {shares[2]:.4f}\n"
        )
    else:
        text = (
            f"voxel share over {len(paths)} files (voxel_size={voxel_size} m)\n"
            f"  close: {shares[0]:5.1f}%\n  medium: {shares[1]:5.1f}%\n"
            f"  far: {shares[2]:5.1f}%\n"
        )
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidarseq",
        description="Sequence-level LiDAR accumulation, downsampling, "
        "label fusion and range-bucketed evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled sequence")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scans", type=int, default=40)
    p.add_argument("--speed", type=float, default=2.0)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--trajectory", choices=("straight", "arc"), default="straight")
    p.add_argument("--turn-rate", type=float, default=0.02)
    p.add_argument("--max-range", type=float, default=120.0)
    p.add_argument("--density", type=float, default=1500.0,
                   help="points per steradian at 1 m")
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--profile", choices=sorted(PROFILES), default="semantickitti",
                   help="profile name recorded in the manifest")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="build multi-scan frames for a sequence")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--config", default=None, help="flat key=value overrides")
    p.add_argument("--mode", choices=[m.value for m in AccumMode],
                   default=AccumMode.NON_SMEARING.value)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--sequence", default=None, help="output sequence name")
    for name, typ in _OVERRIDABLE.items():
        p.add_argument(f"--{name.replace('_', '-')}", type=typ, default=None)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("mockpred", help="corrupt labels with the mock labeler")
    p.add_argument("--points", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--p-close", type=float, default=0.95)
    p.add_argument("--p-medium", type=float, default=0.8)
    p.add_argument("--p-far", type=float, default=0.55)
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mockpred)

    p = sub.add_parser("postprocess", help="ensemble + sequence-wise voting")
    p.add_argument("--single", required=True, help="single-scan prediction dir")
    p.add_argument("--multi", required=True, help="multi-scan prediction dir")
    p.add_argument("--prov", required=True,
                   help="preprocess output sequence dir (points/ + prov/)")
    p.add_argument("--out", required=True)
    p.add_argument("--boundary", type=float, default=20.0)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("evaluate", help="range-bucketed IoU / mIoU report")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--scans", default=None, help="scan dir (per-scan mode)")
    p.add_argument("--prov", default=None,
                   help="frames root; evaluate reference points of frames")
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--ignore-class", type=int, default=None)
    p.add_argument("--max-range", type=float, default=None)
    p.add_argument("--format", choices=("table", "kv"), default="table")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="voxel distribution per range bucket")
    p.add_argument("--points", required=True)
    p.add_argument("--voxel-size", type=float, default=None)
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--format", choices=("table", "kv"), default="table")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LidarSeqError, FileNotFoundError, KeyError, ValueError) as exc:
        log.error("%s: %s", args.command, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
