"""Source-filter analysis and synthesis on a 5 ms frame grid.

Analysis splits a 16 kHz clip into three frame-synchronous parameters:

* F0 from the normalized autocorrelation of a 64 ms segment, refined by
  parabolic interpolation so values are continuous, with a permissive
  voicing threshold (voiced frames are rarely dropped);
* a spectral envelope: the Hann-windowed power spectrum averaged over one F0
  of bandwidth, then cepstrally liftered below half the pitch period;
* band aperiodicity: one minus the normalized autocorrelation at the pitch
  period, measured in five octave-spaced bands.

Synthesis places a pulse per pitch period at fractional-sample precision,
shapes each pulse and the noise between pulses with minimum-phase filters
built from the envelope, and overlap-adds the results.

Frame ``k`` is centered at ``k * hop``; the signal is zero-padded at the
edges, so a clip of duration ``D`` has ``floor(D / hop) + 1`` frames.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window

from .audio import AudioClip, WORKING_RATE
from .contour import PitchContour

SP_FLOOR = 1e-12
AP_MIN = 1e-3
# bands whose energy is below this share of the frame energy carry no
# measurable periodicity; they take the value of the band below
_AP_SILENT_BAND = 1e-6
_PEAK_RATIO = 0.9
_FRAME_CHUNK = 512


@dataclass(frozen=True)
class AnalysisConfig:
    """Analysis settings. Defaults: 5 ms hop, 64 ms window at 16 kHz."""
    sample_rate: int = WORKING_RATE
    hop_ms: float = 5.0
    window_ms: float = 64.0
    fft_size: int = 1024
    f0_floor: float = 55.0
    f0_ceil: float = 1000.0
    voicing_threshold: float = 0.45
    unvoiced_f0: float = 500.0
    ap_band_edges: tuple = (0.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.hop_samples < 1 or abs(self.hop_samples - self.hop_ms * self.sample_rate / 1000) > 1e-9:
            raise ValueError(f"hop {self.hop_ms} ms is not a whole number of samples")
        if self.window_samples < 4:
            raise ValueError("window too short")
        if self.fft_size & (self.fft_size - 1) or self.fft_size < self.window_samples:
            raise ValueError(
                f"fft_size {self.fft_size} must be a power of two >= the window "
                f"({self.window_samples} samples)")
        if not 0 < self.f0_floor < self.f0_ceil < self.sample_rate / 2:
            raise ValueError("need 0 < f0_floor < f0_ceil < sample_rate / 2")
        if not 0 < self.voicing_threshold < 1:
            raise ValueError("voicing_threshold must lie in (0, 1)")
        if not 0 < self.unvoiced_f0 < self.sample_rate / 2:
            raise ValueError("unvoiced_f0 must lie in (0, sample_rate / 2)")
        if self.sample_rate * self.window_ms / 1000 <= self.sample_rate / self.f0_floor + 1:
            raise ValueError("window must be longer than the longest pitch period")

    @property
    def hop(self):
        return self.hop_ms / 1000.0

    @property
    def hop_samples(self):
        return int(round(self.hop_ms * self.sample_rate / 1000))

    @property
    def window_samples(self):
        return int(round(self.window_ms * self.sample_rate / 1000))

    @property
    def n_bins(self):
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples):
        return n_samples // self.hop_samples + 1


@dataclass(frozen=True, eq=False)
class VocoderFeatures:
    """Frame-synchronous F0, spectral envelope and aperiodicity.

    ``sp`` holds nonnegative power values and ``ap`` noise fractions in
    [0, 1], both shaped ``(frames, fft_size // 2 + 1)``.
    """
    f0: PitchContour
    sp: np.ndarray
    ap: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sp = np.array(self.sp, dtype=np.float64, copy=True)
        ap = np.array(self.ap, dtype=np.float64, copy=True)
        n = len(self.f0)
        if sp.ndim != 2 or ap.ndim != 2 or sp.shape != ap.shape:
            raise ValueError(f"SP {sp.shape} and AP {ap.shape} must be equal-shape matrices")
        if sp.shape[0] != n:
            raise ValueError(f"frame-count mismatch: F0 has {n} frames, SP/AP have {sp.shape[0]}")
        if not (np.all(np.isfinite(sp)) and np.all(np.isfinite(ap))):
            raise ValueError("SP/AP contain non-finite values")
        if np.any(sp < 0):
            raise ValueError("spectral envelope must be nonnegative")
        if np.any(ap < 0) or np.any(ap > 1):
            raise ValueError("aperiodicity must lie in [0, 1]")
        sp.setflags(write=False)
        ap.setflags(write=False)
        object.__setattr__(self, "sp", sp)
        object.__setattr__(self, "ap", ap)

    def __len__(self):
        return len(self.f0)


def _check_clip(clip, cfg):
    if clip.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"clip is at {clip.sample_rate} Hz; analysis expects {cfg.sample_rate} Hz")
    if len(clip) < cfg.window_samples:
        raise ValueError(
            f"clip has {len(clip)} samples, shorter than one analysis window "
            f"({cfg.window_samples})")


def _frames(x, cfg, start, stop):
    """Window-length segments centered at ``k * hop`` for k in [start, stop)."""
    w = cfg.window_samples
    half = w // 2
    hop = cfg.hop_samples
    lo = start * hop - half
    hi = (stop - 1) * hop - half + w
    seg = np.zeros(hi - lo)
    a, b = max(lo, 0), min(hi, len(x))
    if b > a:
        seg[a - lo:b - lo] = x[a:b]
    view = np.lib.stride_tricks.sliding_window_view(seg, w)
    return view[::hop][: stop - start]


def _chunks(n):
    for start in range(0, n, _FRAME_CHUNK):
        yield start, min(n, start + _FRAME_CHUNK)


def _check_grid(clip, f0, cfg):
    n = cfg.n_frames(len(clip))
    if len(f0) != n:
        raise ValueError(f"frame-count mismatch: F0 has {len(f0)} frames, clip needs {n}")
    if abs(f0.hop - cfg.hop) > 1e-12:
        raise ValueError(f"F0 hop {f0.hop} s does not match analysis hop {cfg.hop} s")


def _nccf(frames, max_lag):
    """Normalized autocorrelation over the overlapping part, lags 0..max_lag."""
    w = frames.shape[1]
    nfft = 1 << int(np.ceil(np.log2(w + max_lag + 1)))
    spec = np.fft.rfft(frames, nfft)
    num = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, nfft)[:, : max_lag + 1]
    csum = np.concatenate([np.zeros((len(frames), 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
    lags = np.arange(max_lag + 1)
    e_head = csum[:, w - lags]
    e_tail = csum[:, [w]] - csum[:, lags]
    den = np.sqrt(e_head * e_tail)
    scale = csum[:, [w]]
    ok = den > 1e-10 * np.maximum(scale, 1e-300)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=ok & (scale > 0))
    return out


def _pick_peak(r, lag_min, lag_max):
    """Smallest-lag local maximum within ``_PEAK_RATIO`` of the best one.

    Returns ``(lag, clarity)`` with parabolic refinement, or ``(0, 0)``.
    """
    seg = r[lag_min - 1: lag_max + 2]
    inner = seg[1:-1]
    is_peak = (inner > seg[:-2]) & (inner >= seg[2:])
    cand = np.flatnonzero(is_peak)
    if cand.size == 0:
        return 0.0, 0.0
    vals = inner[cand]
    best = vals.max()
    if best <= 0:
        return 0.0, 0.0
    k = cand[np.flatnonzero(vals >= _PEAK_RATIO * best)[0]]
    tau = k + lag_min
    a, b, c = r[tau - 1], r[tau], r[tau + 1]
    denom = a - 2 * b + c
    delta = 0.5 * (a - c) / denom if denom < 0 else 0.0
    delta = float(np.clip(delta, -0.5, 0.5))
    return tau + delta, b - 0.25 * (a - c) * delta


def estimate_f0(clip, cfg=None):
    """F0 contour on the frame grid.

    Frames whose autocorrelation peak clarity falls below
    ``cfg.voicing_threshold`` are unvoiced (F0 = 0).
    """
    cfg = cfg or AnalysisConfig()
    _check_clip(clip, cfg)
    sr = cfg.sample_rate
    lag_min = max(2, int(np.floor(sr / cfg.f0_ceil)))
    lag_max = int(np.ceil(sr / cfg.f0_floor))
    n = cfg.n_frames(len(clip))
    f0 = np.zeros(n)
    for start, stop in _chunks(n):
        frames = _frames(clip.samples, cfg, start, stop)
        r = _nccf(frames, lag_max + 1)
        for k in range(stop - start):
            lag, clarity = _pick_peak(r[k], lag_min, lag_max)
            if lag > 0 and clarity >= cfg.voicing_threshold:
                f0[start + k] = np.clip(sr / lag, cfg.f0_floor, cfg.f0_ceil)
    return PitchContour(f0, cfg.hop)


def _power_spectra(frames, cfg, window):
    spec = np.fft.rfft(frames * window, cfg.fft_size)
    return spec.real ** 2 + spec.imag ** 2


def _smooth_bins(power, width):
    """Moving average over ``width`` bins (one per row), mirrored at the edges."""
    n_rows, n_bins = power.shape
    pad = int(np.ceil(width.max() / 2)) + 2
    ext = np.concatenate([power[:, pad:0:-1], power, power[:, -2:-pad - 2:-1]], axis=1)
    csum = np.concatenate([np.zeros((n_rows, 1)), np.cumsum(ext, axis=1)], axis=1)
    grid = np.arange(csum.shape[1], dtype=float)
    centre = np.arange(n_bins) + pad + 0.5
    out = np.empty_like(power)
    for r in range(n_rows):
        half = width[r] / 2
        hi = np.interp(centre + half, grid, csum[r])
        lo = np.interp(centre - half, grid, csum[r])
        out[r] = (hi - lo) / width[r]
    return out


def estimate_envelope(clip, f0, cfg=None):
    """Spectral envelope as a power density per bin.

    The Hann-windowed power spectrum is averaged over one F0 of bandwidth,
    then smoothed by a sinc-tapered cepstral lifter: quefrencies at or above
    half the pitch period (``sr / (2 f0)`` samples) are removed. Unvoiced frames use
    ``cfg.unvoiced_f0``. Entries are floored at ``1e-12`` times the frame
    maximum.
    """
    cfg = cfg or AnalysisConfig()
    _check_clip(clip, cfg)
    _check_grid(clip, f0, cfg)
    window = get_window("hann", cfg.window_samples)
    n = len(f0)
    nfft = cfg.fft_size
    out = np.empty((n, cfg.n_bins))
    q = np.arange(nfft // 2 + 1)
    for start, stop in _chunks(n):
        f = f0.f0[start:stop]
        f_eff = np.where(f > 0, f, cfg.unvoiced_f0)
        power = _power_spectra(_frames(clip.samples, cfg, start, stop), cfg, window)
        power = _smooth_bins(power, f_eff * nfft / cfg.sample_rate)
        peak = power.max(axis=1, keepdims=True)
        silent = peak[:, 0] <= 0
        floor = np.where(peak > 0, peak * SP_FLOOR, SP_FLOOR)
        logp = np.log(np.maximum(power, floor))
        ceps = np.fft.irfft(logp, nfft)
        cut = cfg.sample_rate / (2.0 * f_eff)
        # sinc taper inside the cutoff; a hard edge rings across the band
        lifter = np.sinc(q[None, :] / (2.0 * cut[:, None])) * (q[None, :] < cut[:, None])
        full = np.concatenate([lifter, lifter[:, -2:0:-1]], axis=1)
        env = np.exp(np.fft.rfft(ceps * full, nfft).real)
        env = np.maximum(env, floor)
        env[silent] = SP_FLOOR
        out[start:stop] = env
    return out


def _band_masks(cfg):
    freqs = np.arange(2 * cfg.fft_size // 2 + 1) * cfg.sample_rate / (2 * cfg.fft_size)
    edges = np.asarray(cfg.ap_band_edges, dtype=float)
    masks = [(freqs >= lo) & (freqs < hi) for lo, hi in zip(edges[:-1], edges[1:])]
    masks[-1] |= freqs >= edges[-1]
    centers = np.empty(len(edges) - 1)
    centers[0] = edges[1] / 2
    centers[1:] = np.sqrt(edges[1:-1] * edges[2:])
    return np.array(masks), centers


def estimate_aperiodicity(clip, f0, cfg=None):
    """Noise fraction per frequency bin.

    For voiced frames, each band's autocorrelation at the pitch period is
    computed from the band's share of a Hann-windowed power spectrum and
    divided by the window's own autocorrelation at that lag. Aperiodicity is
    one minus that value, clamped to [0.001, 1] and interpolated linearly
    between band centers. Unvoiced frames are all ones.
    """
    cfg = cfg or AnalysisConfig()
    _check_clip(clip, cfg)
    _check_grid(clip, f0, cfg)
    n = len(f0)
    nfft2 = 2 * cfg.fft_size  # zero padding keeps the autocorrelation linear
    window = get_window("hann", cfg.window_samples)
    masks, centers = _band_masks(cfg)
    weights = np.full(nfft2 // 2 + 1, 2.0)
    weights[0] = weights[-1] = 1.0
    k2 = np.arange(nfft2 // 2 + 1)
    support = np.ones(len(clip))
    bin_freqs = np.arange(cfg.n_bins) * cfg.sample_rate / cfg.fft_size

    out = np.ones((n, cfg.n_bins))
    voiced = np.flatnonzero(f0.f0 > 0)
    for start, stop in _chunks(n):
        sel = voiced[(voiced >= start) & (voiced < stop)]
        if sel.size == 0:
            continue
        frames = _frames(clip.samples, cfg, start, stop)[sel - start]
        spec = np.fft.rfft(frames * window, nfft2)
        power = weights * (spec.real ** 2 + spec.imag ** 2)
        period = cfg.sample_rate / f0.f0[sel]
        cosines = np.cos(2 * np.pi * k2[None, :] * period[:, None] / nfft2)
        # frames hanging over the clip edges see a truncated window
        eff = window * _frames(support, cfg, start, stop)[sel - start]
        wspec = np.fft.rfft(eff, nfft2)
        wpow = weights * (wspec.real ** 2 + wspec.imag ** 2)
        r_win = np.sum(cosines * wpow, axis=1) / wpow.sum(axis=1)
        # per-row sums rather than a matrix product: BLAS blocking would make
        # the rounding depend on how many frames share a chunk
        band_energy = np.stack([power[:, m].sum(axis=1) for m in masks], axis=1)
        band_corr = np.stack([(power * cosines)[:, m].sum(axis=1) for m in masks], axis=1)
        total = power.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = band_corr / band_energy / r_win[:, None]
        ap_band = np.clip(1.0 - r, AP_MIN, 1.0)
        silent_band = ~(band_energy > _AP_SILENT_BAND * total)
        for b in range(ap_band.shape[1]):
            fill = silent_band[:, b]
            if b == 0:
                ap_band[fill, 0] = 1.0
            else:
                ap_band[fill, b] = ap_band[fill, b - 1]
        for row, k in zip(ap_band, sel):
            out[k] = np.interp(bin_freqs, centers, row)
    return out


def analyze(clip, cfg=None):
    """Run the F0, envelope and aperiodicity estimators."""
    cfg = cfg or AnalysisConfig()
    f0 = estimate_f0(clip, cfg)
    sp = estimate_envelope(clip, f0, cfg)
    ap = estimate_aperiodicity(clip, f0, cfg)
    return VocoderFeatures(f0, sp, ap)


def _min_phase(log_mag, nfft):
    """Minimum-phase spectra from log magnitudes via the folded cepstrum."""
    c = np.fft.irfft(log_mag, nfft)
    fold = np.zeros(nfft)
    fold[0] = 1.0
    fold[1: nfft // 2] = 2.0
    fold[nfft // 2] = 1.0
    return np.exp(np.fft.rfft(c * fold, nfft))


def _pulse_times(f0_frames, cfg, n_samples):
    """Excitation events as (time in samples, voiced flag, local period)."""
    hop = cfg.hop_samples
    sr = cfg.sample_rate
    f = np.asarray(f0_frames, dtype=float)
    voiced = f > 0
    frame_t = np.arange(len(f)) * hop
    t = np.arange(n_samples, dtype=float)
    # voicing by nearest frame, frequency by interpolating voiced frames only
    near = np.clip(np.floor(t / hop + 0.5).astype(np.intp), 0, len(f) - 1)
    v_s = voiced[near]
    if voiced.any():
        f_s = np.interp(t, frame_t[voiced], f[voiced])
    else:
        f_s = np.zeros(n_samples)
    rate = np.where(v_s, f_s, cfg.unvoiced_f0) / sr
    phase = np.concatenate([[0.0], np.cumsum(rate)])
    # an event fires when the phase crosses an integer; exact crossing time
    # by linear interpolation within the sample
    cross = np.flatnonzero(np.floor(phase[1:]) > np.floor(phase[:-1]))
    target = np.floor(phase[cross + 1])
    frac = (target - phase[cross]) / (phase[cross + 1] - phase[cross])
    times = np.concatenate([[0.0], cross + frac])
    idx = np.clip(np.floor(times).astype(np.intp), 0, n_samples - 1)
    return times, v_s[idx], 1.0 / rate[idx]


def synthesize(feat, cfg=None, seed=0):
    """Render features back to a waveform of ``(frames - 1) * hop + 1`` samples.

    Parameters
    ----------
    feat : VocoderFeatures
    cfg : AnalysisConfig, optional
    seed : int
        Seed of the aperiodic noise source.

    Returns
    -------
    AudioClip
    """
    cfg = cfg or AnalysisConfig()
    sp, ap = feat.sp, feat.ap
    f0 = feat.f0.f0
    if sp.shape[1] != cfg.n_bins:
        raise ValueError(f"SP has {sp.shape[1]} bins; config expects {cfg.n_bins}")
    voiced_f0 = f0[f0 > 0]
    if np.any(voiced_f0 >= cfg.sample_rate / 2):
        raise ValueError("voiced F0 must lie below the Nyquist frequency")
    nfft = cfg.fft_size
    n_frames = len(feat)
    # up to and including the last frame center, so re-analysis yields
    # the same frame count
    n_samples = (n_frames - 1) * cfg.hop_samples + 1
    window = get_window("hann", cfg.window_samples)
    wsq = np.sqrt((window ** 2).sum())

    times, voiced, period = _pulse_times(f0, cfg, n_samples)
    pos = np.floor(times).astype(np.intp)
    frac = times - pos
    # linear interpolation of the parameters between frame centers
    u = np.clip(times / cfg.hop_samples, 0, n_frames - 1)
    lo = np.floor(u).astype(np.intp)
    hi = np.minimum(lo + 1, n_frames - 1)
    wgt = (u - lo)[:, None]
    sp_e = (1 - wgt) * sp[lo] + wgt * sp[hi]
    ap_e = np.where(voiced[:, None], (1 - wgt) * ap[lo] + wgt * ap[hi], 1.0)

    # noise between consecutive events
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n_samples)
    bounds = np.append(pos, n_samples)

    out = np.zeros(n_samples + nfft)
    omega = 2 * np.pi * np.arange(cfg.n_bins) / nfft
    for start in range(0, len(times), _FRAME_CHUNK):
        stop = min(len(times), start + _FRAME_CHUNK)
        s = sp_e[start:stop]
        a = ap_e[start:stop]
        v = voiced[start:stop]
        alive = s.max(axis=1) > 0
        tiny = np.maximum(s.max(axis=1, keepdims=True), 1e-300) * SP_FLOOR

        # a pulse train has power 1 / period per sample
        per_mag = np.sqrt(period[start:stop, None] * np.maximum((1 - a) * s, 0)) / wsq
        per_mag[~v] = 0.0
        per_h = _min_phase(np.log(np.maximum(per_mag, np.sqrt(tiny) * 1e-3)), nfft)
        per_h *= np.exp(-1j * omega[None, :] * frac[start:stop, None])
        per_h[~v | ~alive] = 0.0

        nz_mag = np.sqrt(np.maximum(a * s, 0)) / wsq
        nz_h = _min_phase(np.log(np.maximum(nz_mag, np.sqrt(tiny) * 1e-3)), nfft)
        nz_h[~alive] = 0.0
        segs = np.zeros((stop - start, nfft))
        for k in range(stop - start):
            e = start + k
            a0, b0 = bounds[e], min(bounds[e + 1], bounds[e] + nfft)
            segs[k, : b0 - a0] = noise[a0:b0]
        resp = np.fft.irfft(per_h + nz_h * np.fft.rfft(segs, nfft), nfft)
        for k in range(stop - start):
            p = pos[start + k]
            out[p: p + nfft] += resp[k]
    return AudioClip(out[:n_samples], cfg.sample_rate)
