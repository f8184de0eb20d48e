"""Mel-cepstral coefficients from spectral envelopes.

The log envelope is resampled onto a frequency axis warped by the first-order
all-pass map

    w~ = w + 2 atan(alpha sin w / (1 - alpha cos w))

and transformed to a real cepstrum, of which orders 0..24 are kept. Order 0
carries loudness and is dropped for alignment.
"""
from dataclasses import dataclass

import numpy as np

MCEP_ORDER = 24
ALPHA_16K = 0.42
_OVERSAMPLE = 4


@dataclass(frozen=True, eq=False)
class McepSequence:
    """Per-frame mel-cepstra, shape ``(frames, order + 1)``."""
    coefs: np.ndarray
    alpha: float

    def __post_init__(self):
        c = np.array(self.coefs, dtype=np.float64, copy=True)
        if c.ndim != 2:
            raise ValueError("mel-cepstra must be a (frames, order + 1) matrix")
        if not np.all(np.isfinite(c)):
            raise ValueError("mel-cepstra contain non-finite values")
        c.setflags(write=False)
        object.__setattr__(self, "coefs", c)

    def __len__(self):
        return len(self.coefs)

    @property
    def order(self):
        return self.coefs.shape[1] - 1


def warp_frequency(omega, alpha):
    """All-pass frequency warping of ``omega`` in [0, pi]."""
    omega = np.asarray(omega, dtype=np.float64)
    return omega + 2.0 * np.arctan(alpha * np.sin(omega) / (1.0 - alpha * np.cos(omega)))


def _oversample(log_spec, factor):
    """Band-limited interpolation of half spectra via a zero-padded cepstrum."""
    n_bins = log_spec.shape[-1]
    nfft = 2 * (n_bins - 1)
    ceps = np.fft.irfft(log_spec, nfft)
    half = nfft // 2
    big = np.zeros(log_spec.shape[:-1] + (factor * nfft,))
    big[..., :half] = ceps[..., :half]
    big[..., -half:] = ceps[..., half:]
    # the Nyquist quefrency is split between both halves
    big[..., half] = 0.5 * ceps[..., half]
    big[..., -half] = 0.5 * ceps[..., half]
    return np.fft.rfft(big, factor * nfft).real


def warp_log_spectrum(log_spec, alpha):
    """Resample half log spectra onto the warped frequency axis.

    Output bin ``m`` holds the input value at the frequency that the warp
    maps to ``pi * m / (bins - 1)``. Warping by ``alpha`` then ``-alpha``
    returns the input up to interpolation error.
    """
    log_spec = np.asarray(log_spec, dtype=np.float64)
    if alpha == 0:
        return log_spec.copy()
    n_bins = log_spec.shape[-1]
    dense = _oversample(log_spec, _OVERSAMPLE)
    dense_axis = np.linspace(0.0, np.pi, dense.shape[-1])
    warped_axis = np.linspace(0.0, np.pi, n_bins)
    # inverse of the warp with alpha is the warp with -alpha
    source = warp_frequency(warped_axis, -alpha)
    flat = dense.reshape(-1, dense.shape[-1])
    out = np.stack([np.interp(source, dense_axis, row) for row in flat])
    return out.reshape(log_spec.shape[:-1] + (n_bins,))


def mcep_from_envelope(sp, order=MCEP_ORDER, alpha=ALPHA_16K):
    """Mel-cepstral coefficients 0..order of each envelope row.

    Each row is normalized by its maximum before the log, so scaling the
    envelope moves only coefficient 0 (exactly so for power-of-two factors).
    """
    sp = np.asarray(sp, dtype=np.float64)
    if sp.ndim != 2:
        raise ValueError("envelope must be a (frames, bins) matrix")
    if np.any(~(sp > 0)):
        r, c = np.argwhere(~(sp > 0))[0]
        raise ValueError(f"envelope must be strictly positive; frame {r}, bin {c} is {sp[r, c]}")
    n_bins = sp.shape[1]
    nfft = 2 * (n_bins - 1)
    if order + 1 > nfft // 2:
        raise ValueError(f"order {order} too high for {n_bins} bins")
    peak = sp.max(axis=1, keepdims=True)
    log_spec = warp_log_spectrum(np.log(sp / peak), alpha)
    ceps = np.fft.irfft(log_spec, nfft)[:, : order + 1]
    ceps[:, 0] += np.log(peak[:, 0])
    return McepSequence(ceps, alpha)


def alignment_features(m):
    """Orders 1..order of a mel-cepstral sequence (loudness removed)."""
    return np.array(m.coefs[:, 1:])
