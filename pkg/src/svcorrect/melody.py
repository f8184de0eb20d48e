"""Melody extraction metrics and F0 contour CSV files.

Metrics compare an estimated contour against a reference on the reference's
time grid:

* raw pitch accuracy (RPA): share of reference-voiced frames where the
  estimate is voiced and within ``tol_cents`` of the reference
* raw chroma accuracy (RCA): as RPA, with octave errors forgiven
* voicing recall (VR) and voicing false alarm (VFA)
* overall accuracy (OA): share of all frames that are either correctly
  unvoiced or voiced with a correct pitch

Frequencies are compared in cents relative to 10 Hz. The tolerance boundary
is inclusive.
"""
from dataclasses import asdict, dataclass
import csv
import math

import numpy as np

from .contour import PitchContour

BASE_FREQUENCY = 10.0
# float slack on the tolerance boundary: a +50 cent shift built in Hz lands
# within a few 1e-12 cents of 50
CENT_EPS = 1e-9


def to_cents(f0_hz, base_frequency=BASE_FREQUENCY):
    """Convert positive frequencies in Hz to cents above ``base_frequency``.

    Raises
    ------
    ValueError
        If any input is not strictly positive.
    """
    f = np.asarray(f0_hz, dtype=np.float64)
    if np.any(~(f > 0)):
        raise ValueError("frequencies must be positive to convert to cents")
    cents = 1200.0 * np.log2(f / base_frequency)
    return float(cents) if cents.ndim == 0 else cents


def resample_contour(src, target_hop, target_len):
    """Sample ``src`` at ``target_len`` frames spaced ``target_hop`` apart.

    Each target frame takes the nearest source frame (halves round up). It is
    voiced only if that source frame is voiced and lies within
    ``src.hop / 2 + target_hop / 2`` seconds.
    """
    if len(src) == 0:
        raise ValueError("cannot resample an empty contour")
    if not target_hop > 0:
        raise ValueError("target hop must be positive")
    target_len = int(target_len)
    if target_len < 0:
        raise ValueError("target length must be nonnegative")
    if src.hop == target_hop and target_len == len(src):
        return src
    t = np.arange(target_len) * target_hop
    idx = np.floor(t / src.hop + 0.5 + 1e-9).astype(np.intp)
    near = np.clip(idx, 0, len(src) - 1)
    gap = np.abs(t - near * src.hop)
    f0 = src.f0[near].copy()
    f0[gap > src.hop / 2 + target_hop / 2 + 1e-9] = 0.0
    return PitchContour(f0, target_hop)


@dataclass(frozen=True)
class ContourPair:
    """Reference and estimate on the reference's grid."""
    ref: PitchContour
    est: PitchContour

    def __post_init__(self):
        if len(self.ref) != len(self.est):
            raise ValueError(
                f"contours differ in length: {len(self.ref)} vs {len(self.est)}")

    @classmethod
    def aligned(cls, ref, est):
        """Resample ``est`` onto ``ref``'s grid and pair them."""
        return cls(ref, resample_contour(est, ref.hop, len(ref)))


@dataclass(frozen=True)
class MelodyMetricReport:
    """Metric values as fractions in [0, 1]."""
    oa: float
    rpa: float
    rca: float
    vr: float
    vfa: float

    def as_dict(self):
        return asdict(self)

    def as_percent(self):
        return {k: 100.0 * v for k, v in asdict(self).items()}


def _cent_errors(ref_f0, est_f0, mask):
    diff = np.zeros(len(ref_f0))
    diff[mask] = 1200.0 * np.log2(est_f0[mask] / ref_f0[mask])
    return diff


def evaluate(pair, tol_cents=50.0, strict=True):
    """Compute OA, RPA, RCA, VR and VFA for a contour pair.

    Parameters
    ----------
    pair : ContourPair
    tol_cents : float
        Pitch tolerance; frames with ``|error| <= tol_cents`` are correct.
    strict : bool
        If False, metrics undefined for this reference are NaN instead of
        raising.

    Returns
    -------
    MelodyMetricReport

    Raises
    ------
    ValueError
        If the reference is empty, or (when ``strict``) has no voiced frame
        or no unvoiced frame (VFA undefined).
    """
    ref = pair.ref.f0
    est = pair.est.f0
    n = len(ref)
    if n == 0:
        raise ValueError("reference contour has no frames")
    ref_v = ref > 0
    est_v = est > 0
    n_voiced = int(ref_v.sum())
    n_unvoiced = n - n_voiced
    if strict and n_voiced == 0:
        raise ValueError("reference has no voiced frames; RPA, RCA and VR are undefined")
    if strict and n_unvoiced == 0:
        raise ValueError("reference has no unvoiced frames; VFA is undefined")

    both = ref_v & est_v
    diff = _cent_errors(ref, est, both)
    limit = tol_cents + CENT_EPS
    pitch_ok = both & (np.abs(diff) <= limit)
    chroma = np.abs(diff - 1200.0 * np.round(diff / 1200.0))
    chroma_ok = both & (chroma <= limit)

    def frac(count, total):
        return count / total if total else float("nan")

    return MelodyMetricReport(
        oa=int((pitch_ok | (~ref_v & ~est_v)).sum()) / n,
        rpa=frac(int(pitch_ok.sum()), n_voiced),
        rca=frac(int(chroma_ok.sum()), n_voiced),
        vr=frac(int(both.sum()), n_voiced),
        vfa=frac(int((~ref_v & est_v).sum()), n_unvoiced),
    )


def evaluate_pitch(pair, tol_cents=50.0):
    """RPA and RCA only; usable when the reference has no unvoiced frame."""
    ref = pair.ref.f0
    est = pair.est.f0
    ref_v = ref > 0
    if not ref_v.any():
        raise ValueError("reference has no voiced frames; RPA and RCA are undefined")
    both = ref_v & (est > 0)
    diff = _cent_errors(ref, est, both)
    limit = tol_cents + CENT_EPS
    rpa = int((both & (np.abs(diff) <= limit)).sum()) / int(ref_v.sum())
    chroma = np.abs(diff - 1200.0 * np.round(diff / 1200.0))
    rca = int((both & (chroma <= limit)).sum()) / int(ref_v.sum())
    return rpa, rca


def mean_report(reports):
    """Average reports over clips (each clip weighs the same).

    NaN entries (metrics undefined for a clip) are skipped; a metric that is
    undefined for every clip stays NaN.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    out = {}
    for k in ("oa", "rpa", "rca", "vr", "vfa"):
        v = np.array([getattr(r, k) for r in reports], dtype=float)
        v = v[~np.isnan(v)]
        out[k] = float(v.mean()) if len(v) else float("nan")
    return MelodyMetricReport(**out)


def load_contour_csv(path, grid_tol=1e-6):
    """Read ``time_sec,f0_hz`` rows into a :class:`PitchContour`.

    A single non-numeric header line is skipped. The hop is taken from the
    first two timestamps and every timestamp must sit on that grid within
    ``grid_tol`` seconds. A nonzero start time that falls on the grid is
    padded with leading unvoiced frames.
    """
    times = []
    values = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'time_sec,f0_hz', got {row!r}")
            try:
                t = float(row[0])
                f = float(row[1])
            except ValueError:
                if lineno == 1 and not times:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: cannot parse {row!r} as numbers") from None
            if not (math.isfinite(t) and math.isfinite(f)):
                raise ValueError(f"{path}:{lineno}: non-finite value in {row!r}")
            if f < 0:
                raise ValueError(f"{path}:{lineno}: negative f0 {f}")
            times.append((lineno, t))
            values.append(f)
    if len(values) < 2:
        raise ValueError(f"{path}: need at least two rows to infer the hop")
    t0 = times[0][1]
    hop = times[1][1] - t0
    if not hop > grid_tol:
        raise ValueError(f"{path}:{times[1][0]}: timestamps must increase")
    for k, (lineno, t) in enumerate(times):
        if abs(t - (t0 + k * hop)) > grid_tol:
            raise ValueError(
                f"{path}:{lineno}: timestamp {t} is off the uniform grid "
                f"(expected {t0 + k * hop:.6f} for hop {hop:.6f})")
    lead = t0 / hop
    n_lead = int(round(lead))
    if abs(t0 - n_lead * hop) > grid_tol or n_lead < 0:
        raise ValueError(f"{path}: start time {t0} is not a multiple of the hop {hop}")
    return PitchContour(np.concatenate([np.zeros(n_lead), values]), hop)


def save_contour_csv(contour, path, header=True):
    """Write ``contour`` as ``time_sec,f0_hz`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(["time_sec", "f0_hz"])
        for k, f in enumerate(contour.f0.tolist()):
            w.writerow([f"{k * contour.hop:.9f}", repr(f)])
