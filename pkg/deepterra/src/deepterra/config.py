"""Training configuration for the conditional-GAN DTM predictor."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class GanConfig:
    input_channels: int
    lambda_g: float = 100.0
    lambda_d: float = 1.0
    learning_rate: float = 0.0002
    beta1: float = 0.5
    beta2: float = 0.999
    image_size: int = 256
    unet_depth: int = 5
    base_width: int = 16
    patch_disc_depth: int = 3
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.lambda_g < 0 or self.lambda_d < 0:
            raise ValueError("loss coefficients must be nonnegative")
        if self.input_channels < 1:
            raise ValueError("input_channels must be positive")
        if self.unet_depth < 1 or self.base_width < 1:
            raise ValueError("unet_depth and base_width must be positive")
        if self.image_size % (2 ** self.unet_depth) != 0:
            raise ValueError(
                f"image_size {self.image_size} not divisible by "
                f"2^{self.unet_depth}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GanConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})
