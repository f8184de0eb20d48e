"""Run configuration: a flat ``key = value`` TOML file plus CLI overrides."""
from dataclasses import dataclass, fields, replace
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .align import CtwConfig
from .correct import STRETCH_MODES, CorrectionConfig
from .vocoder import AnalysisConfig


@dataclass(frozen=True)
class RunConfig:
    # analysis
    hop_ms: float = 5.0
    window_ms: float = 64.0
    fft_size: int = 1024
    f0_floor: float = 55.0
    f0_ceil: float = 1000.0
    voicing_threshold: float = 0.45
    unvoiced_f0: float = 500.0
    # alignment
    subspace_dim: int | None = None
    ridge: float = 1e-4
    max_iters: int = 20
    tol: float = 1e-4
    mcep_alpha: float = 0.42
    # correction
    stretch_mode: str = "mean"
    seed: int = 0
    # I/O
    source: str | None = None
    target_vocal: str | None = None
    target_f0: str | None = None
    output: str | None = None
    dump_features: str | None = None

    def __post_init__(self):
        if self.stretch_mode not in STRETCH_MODES:
            raise ValueError(f"stretch_mode must be one of {STRETCH_MODES}, got {self.stretch_mode!r}")

    @classmethod
    def keys(cls):
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_file(cls, path):
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ValueError(f"{path}: {exc}") from exc
        return cls().merged(data, source=str(path))

    def merged(self, values, source="overrides"):
        """Copy with ``values`` applied; ``None`` values are ignored."""
        known = set(self.keys())
        unknown = sorted(k for k in values if k not in known)
        if unknown:
            raise ValueError(f"{source}: unknown config key(s): {', '.join(unknown)}")
        changes = {}
        for f in fields(self):
            if f.name not in values or values[f.name] is None:
                continue
            v = values[f.name]
            if isinstance(v, dict):
                raise ValueError(f"{source}: key {f.name!r} must be a scalar, got a table")
            changes[f.name] = v
        return replace(self, **changes)

    def analysis(self):
        return AnalysisConfig(
            hop_ms=float(self.hop_ms), window_ms=float(self.window_ms),
            fft_size=int(self.fft_size), f0_floor=float(self.f0_floor),
            f0_ceil=float(self.f0_ceil), voicing_threshold=float(self.voicing_threshold),
            unvoiced_f0=float(self.unvoiced_f0),
        )

    def correction(self):
        return CorrectionConfig(
            analysis=self.analysis(),
            ctw=CtwConfig(
                subspace_dim=None if self.subspace_dim is None else int(self.subspace_dim),
                ridge=float(self.ridge), max_iters=int(self.max_iters), tol=float(self.tol)),
            stretch_mode=self.stretch_mode,
            mcep_alpha=float(self.mcep_alpha),
            seed=int(self.seed),
        )
