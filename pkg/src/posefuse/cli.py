"""Command line front end.

One invocation processes one or more sequences, either read from
sequence CSV files or generated by the synthetic models, runs the
fusion pipeline, and writes per-sequence reports into the output
directory:

* <name>.frames.csv   per-frame label, fused pose, errors vs gt
* <name>.summary.json aggregate statistics split by label group
* <name>.cdf.csv      error CDF samples per series

Everything downstream of the manifest is deterministic: the same inputs
and seed produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .fusion import FusionConfig, FusionOutput, Label, run_sequence
from .io import PoseSample, SequenceFormatError, parse_sequence, write_sequence
from .metrics import (
    DEFAULT_ALIGN_WINDOW_SECONDS,
    SummaryReport,
    absolute_pose_error,
    align_and_evaluate,
    relative_errors,
    summarize_errors,
)
from .synth import AprNoiseModel, TrajectoryConfig, VioNoiseModel, generate_gt, simulate_apr, simulate_vio

_MODES = ("auto", "fusion", "vio-eval")
_FORMATS = ("csv", "json")

# Sub-stream seed offsets keep the three synthetic streams of one
# sequence statistically independent while still a pure function of the
# manifest seed.
_VIO_SEED_OFFSET = 1_000_003
_APR_SEED_OFFSET = 2_000_003

_FMT = "%.12g"

# Label groups reported in the summary, in report order.  Keyframes and
# reliable frames both carry checker-approved apr poses, so they form
# one group; optimized frames carry corrected poses.
_GROUPS: tuple[tuple[str, frozenset[Label]], ...] = (
    ("keyframes", frozenset({Label.KEYFRAME, Label.RELIABLE})),
    ("optimized", frozenset({Label.OPTIMIZED})),
    ("keyframes_plus_optimized", frozenset({Label.KEYFRAME, Label.RELIABLE, Label.OPTIMIZED})),
    ("all_frames", frozenset(Label)),
)


@dataclass(frozen=True)
class RunManifest:
    """Everything one run depends on.  Exactly one of file inputs or
    synthetic generation must be requested."""

    out_dir: Path
    inputs: tuple[Path, ...] = ()
    synth_count: int = 0
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    vio_noise: VioNoiseModel = field(default_factory=VioNoiseModel)
    apr_noise: AprNoiseModel = field(default_factory=AprNoiseModel)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    align_window_seconds: float = DEFAULT_ALIGN_WINDOW_SECONDS
    mode: str = "auto"
    formats: tuple[str, ...] = _FORMATS
    save_sequences: bool = False
    seed: int = 0

    def validate(self) -> None:
        if bool(self.inputs) == bool(self.synth_count > 0):
            raise ValueError(
                "exactly one of --input or --synth must be given"
            )
        if self.synth_count < 0:
            raise ValueError("--synth must be >= 1")
        for p in self.inputs:
            if not Path(p).is_file():
                raise ValueError(f"input file not found: {p}")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        bad = [f for f in self.formats if f not in _FORMATS]
        if bad:
            raise ValueError(f"unknown report formats: {bad}")
        if not self.formats:
            raise ValueError("at least one report format is required")
        if not self.align_window_seconds > 0.0:
            raise ValueError("--align-window-seconds must be positive")


def run_pipeline_command(manifest: RunManifest) -> int:
    """Execute one manifest.  Returns the process exit code: 0 on
    success, 1 on validation problems (bad manifest or bad input data),
    2 on unexpected runtime failures."""
    try:
        manifest.validate()
        manifest.out_dir.mkdir(parents=True, exist_ok=True)
        for name, samples in _sequences(manifest):
            _process_sequence(name, samples, manifest)
    except (SequenceFormatError, ValueError) as exc:
        print(f"posefuse: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - surfaced as exit status
        print(f"posefuse: runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


def _sequences(manifest: RunManifest):
    if manifest.inputs:
        for p in manifest.inputs:
            yield Path(p).stem, parse_sequence(p)
        return
    for k in range(manifest.synth_count):
        seed = manifest.seed + k
        traj = dataclasses.replace(manifest.trajectory, seed=seed)
        samples = generate_gt(traj)
        gt_poses = [s.gt for s in samples]
        vio = simulate_vio(gt_poses, manifest.vio_noise, seed + _VIO_SEED_OFFSET)
        apr = simulate_apr(gt_poses, manifest.apr_noise, seed + _APR_SEED_OFFSET)
        for s, v, a in zip(samples, vio, apr):
            s.vio = v
            s.apr = a
        if manifest.save_sequences and "csv" in manifest.formats:
            write_sequence(manifest.out_dir / f"synth-{seed}.sequence.csv", samples)
        yield f"synth-{seed}", samples


def _process_sequence(name: str, samples: Sequence[PoseSample], manifest: RunManifest) -> None:
    if not samples:
        raise ValueError(f"sequence {name} is empty")
    has_apr = all(s.apr is not None for s in samples)
    mode = manifest.mode
    if mode == "auto":
        mode = "fusion" if has_apr else "vio-eval"
    if mode == "fusion" and not has_apr:
        missing = sum(1 for s in samples if s.apr is None)
        raise ValueError(
            f"sequence {name}: fusion requested but the apr stream is missing "
            f"on {missing} of {len(samples)} frames"
        )

    summary: dict = {
        "sequence": name,
        "mode": mode,
        "frames": len(samples),
        "config": {
            "d_th": manifest.fusion.d_th,
            "o_th": manifest.fusion.o_th,
            "n_pairs": manifest.fusion.n_pairs,
            "t_opt": manifest.fusion.t_opt,
            "align_window_seconds": manifest.align_window_seconds,
            "seed": manifest.seed,
        },
    }
    cdf_rows: list[tuple[str, SummaryReport]] = []

    if mode == "fusion":
        outputs = run_sequence(samples, manifest.fusion)
        summary["label_counts"] = _label_counts(outputs)
        gt_idx = [i for i, s in enumerate(samples) if s.gt is not None]
        if gt_idx:
            groups: dict = {}
            for group_name, labels in _GROUPS:
                members = [i for i, out in enumerate(outputs) if out.label in labels]
                entry: dict = {
                    "count": len(members),
                    "fraction": len(members) / len(samples),
                }
                scored = [i for i in members if samples[i].gt is not None]
                if scored:
                    fused = summarize_errors(
                        [_err(outputs[i].pose, samples[i]) for i in scored]
                    )
                    raw = summarize_errors(
                        [_err(samples[i].apr, samples[i]) for i in scored]
                    )
                    entry["fused"] = fused.to_dict()
                    entry["raw_apr"] = raw.to_dict()
                    if group_name == "all_frames":
                        cdf_rows.append(("fused", fused))
                        cdf_rows.append(("raw_apr", raw))
                groups[group_name] = entry
            summary["groups"] = groups
            vio_stats = _vio_section(samples, manifest)
            if vio_stats is not None:
                summary["vio"] = vio_stats[0]
                cdf_rows.append(("vio", vio_stats[1]))
        if "csv" in manifest.formats:
            _write_frames_csv(manifest.out_dir / f"{name}.frames.csv", samples, outputs)
    else:
        gt_missing = sum(1 for s in samples if s.gt is None)
        if gt_missing:
            raise ValueError(
                f"sequence {name}: vio evaluation needs ground truth on every "
                f"frame, missing on {gt_missing}"
            )
        vio_stats = _vio_section(samples, manifest)
        assert vio_stats is not None
        summary["vio"] = vio_stats[0]
        cdf_rows.append(("vio", vio_stats[1]))
        if "csv" in manifest.formats:
            outputs = [
                FusionOutput(s.frame_index, s.vio, Label.PENDING) for s in samples
            ]
            _write_frames_csv(
                manifest.out_dir / f"{name}.frames.csv", samples, outputs, label="vio"
            )

    if "json" in manifest.formats:
        text = json.dumps(_round_floats(summary), sort_keys=True, indent=2) + "\n"
        (manifest.out_dir / f"{name}.summary.json").write_text(text, encoding="utf-8")
    if "csv" in manifest.formats:
        _write_cdf_csv(manifest.out_dir / f"{name}.cdf.csv", cdf_rows)


def _err(pose, sample):
    return absolute_pose_error(pose, sample.gt, frame_index=sample.frame_index)


def _label_counts(outputs: Sequence[FusionOutput]) -> dict[str, int]:
    counts = {label.value: 0 for label in Label}
    for out in outputs:
        counts[out.label.value] += 1
    return counts


def _vio_section(samples: Sequence[PoseSample], manifest: RunManifest):
    """VIO-vs-gt statistics: absolute errors after a rigid fit over the
    opening window, plus per-step relative errors.  Needs gt on every
    frame; returns None when it is partial."""
    if any(s.gt is None or s.vio is None for s in samples):
        return None
    vio_track = [s.vio for s in samples]
    gt_track = [s.gt for s in samples]
    report = align_and_evaluate(
        vio_track,
        gt_track,
        manifest.align_window_seconds,
        [s.timestamp for s in samples],
    )
    section = report.to_dict()
    if len(samples) >= 2:
        rel = relative_errors(vio_track, gt_track)
        rpe = sorted(r[0] for r in rel)
        roe = sorted(r[1] for r in rel)
        section["rpe_median_m"] = _median_sorted(rpe)
        section["roe_median_deg"] = _median_sorted(roe)
    return section, report


def _median_sorted(values: list[float]) -> float:
    n = len(values)
    mid = n // 2
    if n % 2:
        return values[mid]
    return 0.5 * (values[mid - 1] + values[mid])


def _write_frames_csv(
    path: Path,
    samples: Sequence[PoseSample],
    outputs: Sequence[FusionOutput],
    label: Optional[str] = None,
) -> None:
    lines = ["frame,timestamp,label,x,y,z,qw,qx,qy,qz,ape_m,aoe_deg"]
    for s, out in zip(samples, outputs):
        p, q = out.pose.position, out.pose.orientation
        fields = [
            str(s.frame_index),
            _FMT % s.timestamp,
            label if label is not None else out.label.value,
            _FMT % p.x, _FMT % p.y, _FMT % p.z,
            _FMT % q.w, _FMT % q.x, _FMT % q.y, _FMT % q.z,
        ]
        if s.gt is not None:
            rec = absolute_pose_error(out.pose, s.gt)
            fields.extend([_FMT % rec.pos_err, _FMT % rec.ori_err])
        else:
            fields.extend(["", ""])
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_cdf_csv(path: Path, rows: list[tuple[str, SummaryReport]]) -> None:
    lines = ["series,metric,threshold,fraction"]
    for series, report in rows:
        for d, frac in report.cdf_pos:
            lines.append(f"{series},ape_m,{_FMT % d},{_FMT % frac}")
        for d, frac in report.cdf_ori:
            lines.append(f"{series},aoe_deg,{_FMT % d},{_FMT % frac}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _round_floats(obj):
    """9 significant digits everywhere keeps the JSON stable against
    last-bit jitter without losing anything a report reader cares about."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def build_manifest(argv: Sequence[str]) -> RunManifest:
    parser = argparse.ArgumentParser(
        prog="posefuse",
        description="Fuse absolute-pose and odometry streams, or generate "
        "and evaluate synthetic sequences.",
    )
    parser.add_argument("--input", action="append", type=Path, default=[],
                        metavar="FILE", help="sequence CSV, repeatable")
    parser.add_argument("--synth", type=int, default=0, metavar="K",
                        help="generate K synthetic sequences instead of reading files")
    parser.add_argument("--frames", type=int, default=200,
                        help="frames per synthetic sequence (default 200)")
    parser.add_argument("--seed", type=int, default=0,
                        help="base seed for synthetic generation (default 0)")
    parser.add_argument("--dth", type=float, default=0.4, metavar="M",
                        help="translation agreement gate, meters (default 0.4)")
    parser.add_argument("--oth", type=float, default=4.0, metavar="DEG",
                        help="rotation agreement gate, degrees (default 4)")
    parser.add_argument("-N", dest="n_pairs", type=int, default=2,
                        help="consecutive agreeing pairs required for a reference (default 2)")
    parser.add_argument("-T", dest="t_opt", type=int, default=8,
                        help="frames per optimization period (default 8)")
    parser.add_argument("--align-window-seconds", type=float,
                        default=DEFAULT_ALIGN_WINDOW_SECONDS, metavar="S",
                        help="opening window for the vio-to-gt rigid fit (default 30)")
    parser.add_argument("--mode", choices=_MODES, default="auto",
                        help="force fusion or vio-only evaluation (default auto)")
    parser.add_argument("--formats", default="csv,json",
                        help="comma list of report formats to write (default csv,json)")
    parser.add_argument("--save-sequence", action="store_true",
                        help="also write generated synthetic sequences as CSV")
    parser.add_argument("--out", type=Path, required=True, metavar="DIR",
                        help="output directory for reports")
    args = parser.parse_args(argv)
    return RunManifest(
        out_dir=args.out,
        inputs=tuple(args.input),
        synth_count=args.synth,
        trajectory=TrajectoryConfig(n_frames=args.frames, seed=args.seed),
        fusion=FusionConfig(
            d_th=args.dth, o_th=args.oth, n_pairs=args.n_pairs, t_opt=args.t_opt
        ),
        align_window_seconds=args.align_window_seconds,
        mode=args.mode,
        formats=tuple(f.strip() for f in args.formats.split(",") if f.strip()),
        save_sequences=args.save_sequence,
        seed=args.seed,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        manifest = build_manifest(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:  # argparse reports its own message
        return 1 if exc.code not in (0, None) else 0
    except ValueError as exc:  # config constructors validate eagerly
        print(f"posefuse: error: {exc}", file=sys.stderr)
        return 1
    return run_pipeline_command(manifest)
