"""Engine configuration: defaults, TOML file loading, flag overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass(frozen=True)
class EngineConfig:
    alpha: float = 0.25
    k: int = 3
    top_m: int = 100
    num_super: int = 30
    lambda1: float = 2.0
    lambda2: float = 1.0
    lambda3: float = 20.0
    focal_gamma: float = 2.0
    focal_balance: float = 0.25
    softmax_temperature: float = 1.0
    iou_thresh: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha={self.alpha} outside [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.top_m < 1:
            raise ValueError("top_m must be >= 1")
        if self.num_super < 1:
            raise ValueError("num_super must be >= 1")
        if self.softmax_temperature <= 0:
            raise ValueError("softmax_temperature must be positive")
        if not 0.0 < self.iou_thresh <= 1.0:
            raise ValueError("iou_thresh must be in (0, 1]")

    @classmethod
    def load(cls, path) -> "EngineConfig":
        """Read a flat TOML file; unknown keys are an error."""
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        return cls(**doc)

    def override(self, **kwargs) -> "EngineConfig":
        """Apply non-None keyword overrides (CLI flags beat file values)."""
        return replace(
            self, **{k: v for k, v in kwargs.items() if v is not None}
        )
