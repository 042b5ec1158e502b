"""U-Net generator and patch discriminator for raster-to-DTM translation."""

from __future__ import annotations

import torch
from torch import nn

from .errors import ShapeMismatch


class UNetGenerator(nn.Module):
    """Encoder-decoder with skip connections; output matches input dims.

    Each of the `depth` levels halves the spatial resolution on the way
    down (stride-2 conv) and doubles it on the way up (transposed conv),
    concatenating the mirrored encoder features. Widths double per level,
    capped at 8x the base width.
    """

    def __init__(self, in_channels: int, depth: int = 5, base_width: int = 16):
        super().__init__()
        self.depth = depth
        widths = [min(base_width * 2 ** k, base_width * 8)
                  for k in range(depth)]
        self.downs = nn.ModuleList()
        prev = in_channels
        for w in widths:
            self.downs.append(nn.Sequential(
                nn.Conv2d(prev, w, 3, stride=2, padding=1),
                nn.LeakyReLU(0.2)))
            prev = w
        self.bottom = nn.Sequential(
            nn.Conv2d(prev, prev, 3, padding=1), nn.LeakyReLU(0.2))
        self.ups = nn.ModuleList()
        for k in reversed(range(depth)):
            skip = widths[k]
            out = widths[k - 1] if k > 0 else base_width
            self.ups.append(nn.Sequential(
                nn.ConvTranspose2d(prev + skip, out, 4, stride=2, padding=1),
                nn.ReLU()))
            prev = out
        self.head = nn.Conv2d(prev, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4:
            raise ShapeMismatch(f"expected (N, C, H, W), got {tuple(x.shape)}")
        h, w = x.shape[2], x.shape[3]
        if h % 2 ** self.depth or w % 2 ** self.depth:
            raise ShapeMismatch(
                f"spatial dims {h}x{w} not divisible by 2^{self.depth}")
        skips = []
        for down in self.downs:
            x = down(x)
            skips.append(x)
        x = self.bottom(x)
        for up, skip in zip(self.ups, reversed(skips)):
            x = up(torch.cat([x, skip], dim=1))
        return self.head(x)


class PatchDiscriminator(nn.Module):
    """Stride-2 convolutional tower scoring local patches in [0, 1].

    Input rasters and the (real or generated) DTM are concatenated on
    channels; `depth` stride-2 stages shrink a 2^depth x 2^depth patch to
    one score, so a 64x64 tile at depth 3 yields an 8x8 score map.
    """

    def __init__(self, in_channels: int, depth: int = 3, base_width: int = 16):
        super().__init__()
        layers = []
        prev = in_channels + 1
        for k in range(depth):
            w = min(base_width * 2 ** k, base_width * 8)
            layers += [nn.Conv2d(prev, w, 4, stride=2, padding=1),
                       nn.LeakyReLU(0.2)]
            prev = w
        layers += [nn.Conv2d(prev, 1, 3, padding=1), nn.Sigmoid()]
        self.net = nn.Sequential(*layers)
        self.depth = depth

    def forward(self, rasters: torch.Tensor, dtm: torch.Tensor) -> torch.Tensor:
        if rasters.shape[0] != dtm.shape[0] \
                or rasters.shape[2:] != dtm.shape[2:]:
            raise ShapeMismatch(
                f"rasters {tuple(rasters.shape)} and dtm {tuple(dtm.shape)} "
                "do not match spatially")
        return self.net(torch.cat([rasters, dtm], dim=1))
