"""Architecture hyperparameters."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..numerics import ConfigError


@dataclass
class ModelConfig:
    """Every architecture axis the classifier exposes.

    L: spatial-spectral module count; N_p: principal components kept from
    the HSI cube; N: SSM state count; C: hidden channel width; patch:
    square patch side; routes: spatial scanning routes (2, 4 or 6);
    down_paths: how many of those routes run on the stride-2 map;
    use_spectral / use_fusion: ablation switches for the two optional
    blocks; share_route_params: one SSM parameter set for all routes.
    """

    L: int = 1
    N_p: int = 20
    N: int = 8
    C: int = 32
    patch: int = 8
    routes: int = 4
    down_paths: int = 2
    aux_channels: int = 2
    classes: int = 3
    interp: str = "bilinear"
    share_route_params: bool = False
    use_spectral: bool = True
    use_fusion: bool = True
    a_init: str = "deterministic"

    def validate(self) -> "ModelConfig":
        if self.L < 1:
            raise ConfigError(f"L must be >= 1, got {self.L}")
        for name in ("N_p", "N", "C", "patch", "aux_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.classes < 2:
            raise ConfigError(f"classes must be >= 2, got {self.classes}")
        if self.routes not in (2, 4, 6):
            raise ConfigError(f"routes must be 2, 4 or 6, got {self.routes}")
        if not 0 <= self.down_paths <= 4:
            raise ConfigError(f"down_paths must be in 0..4, got {self.down_paths}")
        if self.down_paths > self.routes:
            raise ConfigError(
                f"down_paths ({self.down_paths}) cannot exceed routes ({self.routes})"
            )
        if self.down_paths > 0 and self.patch < 2:
            raise ConfigError("patch must be >= 2 when down_paths > 0")
        if self.interp not in ("bilinear", "nearest"):
            raise ConfigError(f"interp must be bilinear or nearest, got {self.interp!r}")
        if self.a_init not in ("deterministic", "random"):
            raise ConfigError(f"a_init must be deterministic or random, got {self.a_init!r}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - fields
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d).validate()
