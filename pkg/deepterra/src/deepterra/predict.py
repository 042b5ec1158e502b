"""Inference: raster stack in, meter-valued DTM out, same grid."""

from __future__ import annotations

import json
import os

import numpy as np
import torch

from . import dtrio
from .config import GanConfig
from .errors import BandOrderMismatch, FormatError
from .models import UNetGenerator
from .normalize import NormStats, denormalize_dtm, normalize_band, tile_center
from .train import CHECKPOINT_META, CHECKPOINT_WEIGHTS


def load_checkpoint(path):
    with open(os.path.join(path, CHECKPOINT_META), "r",
              encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format") != "deepterra-checkpoint":
        raise FormatError(f"{path} is not a deepterra checkpoint")
    config = GanConfig.from_dict(meta["config"])
    stats = NormStats.from_dict(meta["norm_stats"])
    gen = UNetGenerator(config.input_channels, config.unet_depth,
                        config.base_width)
    gen.load_state_dict(torch.load(os.path.join(path, CHECKPOINT_WEIGHTS),
                                   weights_only=True))
    gen.eval()
    return gen, config, stats


def predict(checkpoint_path, stack_path, out_path):
    """Write the predicted DTM of a `.dtr` stack as a single-band `.dtr`."""
    gen, _, stats = load_checkpoint(checkpoint_path)
    meta, bands = dtrio.read_stack(stack_path)
    if tuple(meta["bands"]) != stats.band_order:
        raise BandOrderMismatch(
            f"stack bands {meta['bands']} do not match checkpoint order "
            f"{list(stats.band_order)}")
    nodata = meta["nodata"]
    center = tile_center(bands, nodata)
    chans = [normalize_band(bands[n], n, stats, center, nodata)
             for n in stats.band_order]
    x = torch.from_numpy(np.stack(chans)[None]).float()
    with torch.no_grad():
        pred = gen(x)[0, 0].numpy().astype(np.float64)
    dtm = denormalize_dtm(pred, stats, center)
    dtrio.write_stack(meta, {"dtm": dtm}, out_path)
    return dtm
