"""F0 contour container shared by the vocoder, the corrector and the metrics."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PitchContour:
    """Fundamental frequency sampled on a uniform grid.

    Frame ``k`` is centered at ``k * hop`` seconds. ``f0 == 0`` marks an
    unvoiced frame; voiced values are continuous (never snapped to a scale).
    """
    f0: np.ndarray
    hop: float

    def __post_init__(self):
        f0 = np.array(self.f0, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(f0)):
            raise ValueError("F0 contour contains non-finite values")
        if np.any(f0 < 0):
            k = int(np.flatnonzero(f0 < 0)[0])
            raise ValueError(f"negative F0 {f0[k]} at frame {k}")
        if not self.hop > 0:
            raise ValueError(f"hop must be positive, got {self.hop}")
        f0.setflags(write=False)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "hop", float(self.hop))

    def __len__(self):
        return len(self.f0)

    @property
    def voiced(self):
        return self.f0 > 0

    @property
    def times(self):
        return np.arange(len(self.f0)) * self.hop
