"""WAV input/output and resampling to the 16 kHz working rate."""
from dataclasses import dataclass
import os

import numpy as np
from scipy.io import wavfile

WORKING_RATE = 16000

# windowed-sinc resampler
RESAMPLE_TAPS = 64
KAISER_BETA = 8.6
ROLLOFF = 0.95
_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono samples with their sample rate.

    Samples are nominally in [-1, 1]; out-of-range values are kept until
    :func:`save_wav` clamps them.
    """
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("audio samples must be finite")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample rate must be a positive integer, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


def load_wav(path):
    """Read a PCM16, PCM24, PCM32 or float32 WAV file as a mono clip.

    Stereo is averaged to mono. The native sample rate is kept.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise ValueError(f"{path}: unsupported or unreadable WAV data ({exc})") from exc
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # scipy left-justifies 24-bit samples into int32
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample format {data.dtype} "
                         "(expected 16/24-bit PCM or 32-bit float)")
    if x.ndim == 2:
        if x.shape[1] > 2:
            raise ValueError(f"{path}: unsupported channel count {x.shape[1]} (expected 1 or 2)")
        x = x.mean(axis=1)
    return AudioClip(x, int(rate))


def save_wav(clip, path):
    """Write ``clip`` as 16-bit mono PCM, clamping to the representable range."""
    q = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype(np.int16)
    try:
        wavfile.write(path, clip.sample_rate, q)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _sinc_kernel(offsets, cutoff):
    half = RESAMPLE_TAPS / 2
    w = np.i0(KAISER_BETA * np.sqrt(np.clip(1.0 - (offsets / half) ** 2, 0.0, 1.0))) / np.i0(KAISER_BETA)
    return cutoff * np.sinc(cutoff * offsets) * w


def resample(clip, target_rate=WORKING_RATE):
    """Band-limited resampling by Kaiser-windowed sinc interpolation.

    Each output sample is a 64-tap weighted sum of the input. The output has
    ``round(len * target_rate / sample_rate)`` samples.
    """
    if len(clip) == 0:
        raise ValueError("cannot resample an empty clip")
    if int(target_rate) != target_rate or target_rate <= 0:
        raise ValueError(f"target rate must be a positive integer, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip
    ratio = target_rate / clip.sample_rate
    n_out = int(round(len(clip) * ratio))
    cutoff = min(1.0, ratio) * ROLLOFF
    x = clip.samples
    pad = RESAMPLE_TAPS
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    taps = np.arange(-RESAMPLE_TAPS // 2 + 1, RESAMPLE_TAPS // 2 + 1)
    out = np.empty(n_out)
    for start in range(0, n_out, _CHUNK):
        m = np.arange(start, min(n_out, start + _CHUNK))
        t = m * (clip.sample_rate / target_rate)
        base = np.floor(t).astype(np.intp)
        idx = base[:, None] + taps[None, :]
        k = _sinc_kernel(t[:, None] - idx, cutoff)
        out[m] = np.sum(k * xp[idx + pad], axis=1)
    return AudioClip(out, target_rate)


def prepare(clip):
    """Resample to the 16 kHz working rate."""
    return resample(clip, WORKING_RATE)

