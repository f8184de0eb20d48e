"""Singing voice correction by alignment to a reference take.

The source's envelope and aperiodicity are stretched onto the target's
timeline along the warp path (fixing rhythm) and paired with the target's F0
contour (fixing pitch). Timbre stays the source's because its envelope is
kept.
"""
from dataclasses import dataclass, field

import numpy as np

from . import features, vocoder
from .align import CtwConfig, WarpPath, ctw
from .melody import resample_contour

STRETCH_MODES = ("mean", "first")


def _check_path(path, n, m):
    if not isinstance(path, WarpPath):
        path = WarpPath(path)
    if path.n != n or path.m != m:
        raise ValueError(
            f"warp path spans {path.n}x{path.m} frames but the data is {n}x{m}")
    return path


def stretch(f, path, m, mode="mean"):
    """Map source rows onto ``m`` target frames along ``path``.

    Row ``j`` of the output is the mean of the source rows matched to target
    frame ``j`` (``mode='mean'``) or the earliest of them (``mode='first'``).
    Target frames matched to a single source row repeat it.
    """
    f = np.asarray(f, dtype=np.float64)
    squeeze = f.ndim == 1
    if squeeze:
        f = f[:, None]
    path = _check_path(path, len(f), m)
    if mode == "mean":
        counts = np.bincount(path.j, minlength=m).astype(float)
        out = np.zeros((m, f.shape[1]))
        np.add.at(out, path.j, f[path.i])
        out /= counts[:, None]
    elif mode == "first":
        first = np.full(m, len(f), dtype=np.intp)
        np.minimum.at(first, path.j, path.i)
        out = f[first]
    else:
        raise ValueError(f"unknown stretch mode {mode!r}; choose from {STRETCH_MODES}")
    return out[:, 0] if squeeze else out


def coverage(path, m):
    """How many source frames feed each target frame."""
    return np.bincount(path.j, minlength=m)


def transplant(source, target, path, mode="mean"):
    """Source timbre on the target's timeline with the target's F0."""
    path = _check_path(path, len(source), len(target))
    return vocoder.VocoderFeatures(
        f0=target.f0,
        sp=stretch(source.sp, path, len(target), mode),
        ap=stretch(source.ap, path, len(target), mode),
    )


@dataclass(frozen=True)
class CorrectionConfig:
    analysis: vocoder.AnalysisConfig = field(default_factory=vocoder.AnalysisConfig)
    ctw: CtwConfig = field(default_factory=CtwConfig)
    stretch_mode: str = "mean"
    mcep_alpha: float = features.ALPHA_16K
    seed: int = 0

    def __post_init__(self):
        if self.stretch_mode not in STRETCH_MODES:
            raise ValueError(f"unknown stretch mode {self.stretch_mode!r}")


@dataclass(frozen=True, eq=False)
class CorrectionResult:
    """Corrected clip with the intermediate data needed to inspect it."""
    output: object
    path: WarpPath
    features_out: vocoder.VocoderFeatures
    coverage: np.ndarray
    source_features: vocoder.VocoderFeatures = field(repr=False)
    target_features: vocoder.VocoderFeatures = field(repr=False)
    objective_history: list = field(default_factory=list, repr=False)


def correct_singing(source, target_vocal, cfg=None, external_target_f0=None):
    """Correct pitch and rhythm of ``source`` toward ``target_vocal``.

    Parameters
    ----------
    source, target_vocal : AudioClip
        Both at the analysis rate. ``target_vocal`` must already be an
        isolated vocal; no separation is done here.
    cfg : CorrectionConfig, optional
    external_target_f0 : PitchContour, optional
        Replaces the target F0 found by analysis, e.g. a contour from another
        melody extractor. It is resampled onto the target frame grid.

    Returns
    -------
    CorrectionResult
    """
    cfg = cfg or CorrectionConfig()
    acfg = cfg.analysis
    src = vocoder.analyze(source, acfg)
    tgt = vocoder.analyze(target_vocal, acfg)
    if external_target_f0 is not None:
        f0 = resample_contour(external_target_f0, acfg.hop, len(tgt))
        if len(f0) != len(tgt):
            raise ValueError(
                f"external F0 has {len(f0)} frames after resampling; target has {len(tgt)}")
        tgt = vocoder.VocoderFeatures(f0, tgt.sp, tgt.ap)

    xs = features.alignment_features(features.mcep_from_envelope(src.sp, alpha=cfg.mcep_alpha))
    xt = features.alignment_features(features.mcep_from_envelope(tgt.sp, alpha=cfg.mcep_alpha))
    res = ctw(xs, xt, cfg.ctw)
    out_feat = transplant(src, tgt, res.path, cfg.stretch_mode)
    audio = vocoder.synthesize(out_feat, acfg, seed=cfg.seed)
    return CorrectionResult(
        output=audio,
        path=res.path,
        features_out=out_feat,
        coverage=coverage(res.path, len(tgt)),
        source_features=src,
        target_features=tgt,
        objective_history=res.objective_history,
    )
