"""Command-line interface.

Machine-readable results go to stdout as JSON; logs go to stderr. Any
failure exits with status 2 and prints one JSON object on stderr, e.g.
``{"error": "missing_input", "message": "...", "path": "x.wav"}``.
"""
import argparse
import csv
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import audio, melody, pairwise, vocoder
from .config import RunConfig
from .correct import correct_singing

logger = logging.getLogger("svcorrect")


class CliError(Exception):
    def __init__(self, kind, message, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


def _require_file(path, what):
    if path is None:
        raise CliError("missing_argument", f"{what} is required")
    if not os.path.isfile(path):
        raise CliError("missing_input", f"{what} not found: {path}", path=path)
    return path


def _load_audio(path, what):
    clip = audio.load_wav(_require_file(path, what))
    if clip.sample_rate != audio.WORKING_RATE:
        logger.info("resampling %s from %d Hz to %d Hz", path, clip.sample_rate, audio.WORKING_RATE)
        clip = audio.prepare(clip)
    return clip


def _emit(payload):
    json.dump(payload, sys.stdout, indent=2, sort_keys=False)
    sys.stdout.write("\n")


def _run_config(args):
    cfg = RunConfig.from_file(_require_file(args.config, "config file")) if args.config else RunConfig()
    overrides = {k: getattr(args, k, None) for k in RunConfig.keys()}
    return cfg.merged(overrides, source="command line")


def cmd_correct(args):
    cfg = _run_config(args)
    source = _load_audio(cfg.source, "source")
    target = _load_audio(cfg.target_vocal, "target vocal")
    if cfg.output is None:
        raise CliError("missing_argument", "output path (-o) is required")
    ext_f0 = None
    if cfg.target_f0:
        ext_f0 = melody.load_contour_csv(_require_file(cfg.target_f0, "target F0 CSV"))
    ccfg = cfg.correction()
    result = correct_singing(source, target, ccfg, external_target_f0=ext_f0)
    audio.save_wav(result.output, cfg.output)
    logger.info("wrote %s (%.3f s, %d frames, %d CTW half-steps)", cfg.output,
                result.output.duration, len(result.features_out), len(result.objective_history))
    if cfg.dump_features:
        out_dir = cfg.dump_features
        os.makedirs(out_dir, exist_ok=True)
        melody.save_contour_csv(result.source_features.f0, os.path.join(out_dir, "source_f0.csv"))
        melody.save_contour_csv(result.features_out.f0, os.path.join(out_dir, "target_f0.csv"))
        out_f0 = vocoder.estimate_f0(result.output, ccfg.analysis)
        melody.save_contour_csv(out_f0, os.path.join(out_dir, "output_f0.csv"))
        with open(os.path.join(out_dir, "path.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j"])
            w.writerows(result.path.pairs.tolist())
    _emit({
        "output": cfg.output,
        "duration_sec": result.output.duration,
        "frames": len(result.features_out),
        "path_length": len(result.path),
        "objective_history": result.objective_history,
    })


def cmd_analyze(args):
    cfg = _run_config(args)
    clip = _load_audio(args.input, "input")
    f0 = vocoder.estimate_f0(clip, cfg.analysis())
    melody.save_contour_csv(f0, args.output)
    _emit({"output": args.output, "frames": len(f0), "voiced_frames": int(f0.voiced.sum())})


def cmd_eval_melody(args):
    if len(args.ref) != len(args.est):
        raise CliError("bad_arguments",
                       f"--ref given {len(args.ref)} times but --est {len(args.est)} times")
    reports = []
    for ref_path, est_path in zip(args.ref, args.est):
        ref = melody.load_contour_csv(_require_file(ref_path, "reference contour"))
        est = melody.load_contour_csv(_require_file(est_path, "estimated contour"))
        reports.append(melody.evaluate(melody.ContourPair.aligned(ref, est), args.tol_cents, strict=False))
    report = melody.mean_report(reports)
    payload = report.as_percent() if args.percent else report.as_dict()
    # undefined metrics (e.g. VFA of an all-voiced reference) become null
    payload = {k: None if np.isnan(v) else v for k, v in payload.items()}
    payload["n_clips"] = len(reports)
    _emit(payload)


def _default_run_id(path, *flags):
    # deterministic so identical invocations give identical output
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    h.update(repr(flags).encode())
    return h.hexdigest()[:32]


def cmd_scale(args):
    path = _require_file(args.comparisons, "comparison CSV")
    m = pairwise.load_comparisons_csv(path)
    run_id = args.run_id or _default_run_id(path, args.bootstrap, args.seed)
    if args.bootstrap > 0:
        scores = pairwise.bootstrap_ci(m, args.bootstrap, seed=args.seed, run_id=run_id)
    else:
        scores = pairwise.scale(m, run_id=run_id)
    out = scores.as_dict()
    out["bootstrap"] = args.bootstrap
    out["seed"] = args.seed
    _emit(out)


def _load_json(path, what):
    with open(_require_file(path, what)) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError("bad_input", f"{path}: invalid JSON ({exc})", path=path) from exc


def cmd_correlate(args):
    scores = _load_json(args.scores, "scores JSON")
    metrics = _load_json(args.metrics, "metrics JSON")
    if not isinstance(metrics, dict) or not all(isinstance(v, dict) for v in metrics.values()):
        raise CliError("bad_input", "metrics JSON must map condition labels to {metric: value}")
    if isinstance(scores, dict) and "scores" in scores:
        _emit(pairwise.correlate(pairwise.QualityScores.from_dict(scores), metrics))
        return
    if not isinstance(scores, dict):
        raise CliError("bad_input", "scores JSON must be a scaling result or {criterion: result}")
    _emit({name: pairwise.correlate(pairwise.QualityScores.from_dict(run), metrics)
           for name, run in scores.items()})


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors follow the JSON error format."""

    def error(self, message):
        self.exit(_fail("usage", f"{self.prog}: {message}"))


def _add_run_options(p):
    g = p.add_argument_group("analysis and alignment (override --config)")
    for name, typ in [("hop_ms", float), ("window_ms", float), ("fft_size", int),
                      ("f0_floor", float), ("f0_ceil", float), ("voicing_threshold", float),
                      ("unvoiced_f0", float), ("subspace_dim", int), ("ridge", float),
                      ("max_iters", int), ("tol", float), ("mcep_alpha", float), ("seed", int)]:
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--config", help="TOML file of key = value settings")


def build_parser():
    parser = _Parser(prog="svcorrect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correct", help="correct a take against a reference vocal")
    p.add_argument("--source", dest="source", help="WAV of the take to correct")
    p.add_argument("--target-vocal", dest="target_vocal",
                   help="WAV of the reference vocal; must be an isolated vocal stem "
                        "(separate it from accompaniment beforehand)")
    p.add_argument("--target-f0", dest="target_f0",
                   help="CSV contour (time_sec,f0_hz) replacing the analyzed target F0")
    p.add_argument("-o", "--output", dest="output", help="corrected WAV to write")
    p.add_argument("--dump-features", dest="dump_features", metavar="DIR",
                   help="write source/target/output F0 CSVs and the warp path here")
    p.add_argument("--stretch-mode", dest="stretch_mode", choices=["mean", "first"], default=None)
    _add_run_options(p)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("analyze", help="extract an F0 contour to CSV")
    p.add_argument("--input", required=True)
    p.add_argument("-o", "--output", required=True)
    _add_run_options(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("eval-melody", help="melody metrics of estimated vs reference contours")
    p.add_argument("--ref", action="append", required=True, help="reference CSV (repeatable)")
    p.add_argument("--est", action="append", required=True, help="estimate CSV (repeatable)")
    p.add_argument("--tol-cents", type=float, default=50.0)
    p.add_argument("--percent", action="store_true", help="report percentages instead of fractions")
    p.set_defaults(func=cmd_eval_melody)

    p = sub.add_parser("scale", help="JOD scores from pairwise comparisons")
    p.add_argument("--comparisons", required=True, help="CSV rows cond_a,cond_b,wins_a,total")
    p.add_argument("--bootstrap", type=int, default=500, help="replicates; 0 disables intervals")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run-id", default=None, help="identifier stored with the scores (default: hash of inputs)")
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("correlate", help="Pearson correlation of JODs with objective metrics")
    p.add_argument("--scores", required=True)
    p.add_argument("--metrics", required=True)
    p.set_defaults(func=cmd_correlate)
    return parser


def _fail(kind, message, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")
    return 2


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        return _fail(exc.kind, str(exc), **exc.extra)
    except FileNotFoundError as exc:
        return _fail("missing_input", str(exc), path=exc.filename or "")
    except (ValueError, RuntimeError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
