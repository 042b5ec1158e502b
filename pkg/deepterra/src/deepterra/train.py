"""Alternating GAN training over manifest-listed raster tiles."""

from __future__ import annotations

import json
import os

import numpy as np
import torch

from . import dtrio
from .config import GanConfig
from .errors import DataError, DivergenceError
from .losses import adversarial_losses, generator_objective, masked_l1
from .models import PatchDiscriminator, UNetGenerator
from .normalize import (NormStats, compute_norm_stats, normalize_band,
                        tile_center)

CHECKPOINT_META = "meta.json"
CHECKPOINT_WEIGHTS = "weights.pt"


def _load_tile(entry):
    meta, bands = dtrio.read_stack(entry["cloud_stack"]
                                   if "cloud_stack" in entry
                                   else entry["cloud_path"])
    dmeta, dbands = dtrio.read_stack(entry["dtm_path"])
    if "dtm" not in dbands:
        raise DataError(f"{entry['dtm_path']} has no 'dtm' band")
    if (dmeta["height"], dmeta["width"]) != (meta["height"], meta["width"]):
        raise DataError(f"tile {entry['dtm_path']} geometry differs from "
                        "its input stack")
    return meta, bands, dbands["dtm"]


def _to_tensors(meta, bands, target, stats: NormStats):
    nodata = meta["nodata"]
    center = tile_center(bands, nodata)
    chans = [normalize_band(bands[n], n, stats, center, nodata)
             for n in stats.band_order]
    x = torch.from_numpy(np.stack(chans)[None]).float()
    valid = torch.from_numpy((target != nodata)[None, None])
    t = normalize_band(target, "dtm", stats, center, nodata)
    t = torch.from_numpy(t[None, None]).float()
    return x, t, valid, center


def load_dataset(manifest_path, config: GanConfig):
    """Materialize (inputs, targets, masks) per split from a manifest."""
    manifest = dtrio.read_manifest(manifest_path)
    raw = {"train": [], "val": [], "test": []}
    band_order = None
    for entry in manifest["tiles"]:
        meta, bands, target = _load_tile(entry)
        if band_order is None:
            band_order = list(meta["bands"])
            if len(band_order) != config.input_channels:
                raise DataError(
                    f"stacks carry {len(band_order)} bands but the config "
                    f"expects {config.input_channels} input channels")
        elif list(meta["bands"]) != band_order:
            raise DataError(f"tile band order {meta['bands']} differs from "
                            f"{band_order}")
        raw[entry.get("split", "train")].append((meta, bands, target))
    stats = compute_norm_stats(
        [bands for _, bands, _ in (raw["train"] or raw["val"])],
        band_order, (raw["train"] or raw["val"])[0][0]["nodata"])
    data = {}
    for split, items in raw.items():
        data[split] = [_to_tensors(meta, bands, target, stats)
                       for meta, bands, target in items]
    return data, stats


def train_step_g(gen, disc, opt_g, x, t, valid, config: GanConfig):
    """One generator update; returns the masked L1 as a float."""
    opt_g.zero_grad(set_to_none=True)
    pred = gen(x)
    l1 = masked_l1(pred, t, valid)
    if config.lambda_d == 0.0:
        loss = generator_objective(l1, None, config.lambda_g, 0.0)
    else:
        _, g_adv = adversarial_losses(disc(x, t).detach(), disc(x, pred))
        loss = generator_objective(l1, g_adv, config.lambda_g,
                                   config.lambda_d)
    if not torch.isfinite(loss):
        raise DivergenceError(f"generator loss is {loss.item()}")
    loss.backward()
    opt_g.step()
    return float(l1.detach())


def train_step_d(gen, disc, opt_d, x, t, config: GanConfig):
    opt_d.zero_grad(set_to_none=True)
    with torch.no_grad():
        fake = gen(x)
    loss_d, _ = adversarial_losses(disc(x, t), disc(x, fake))
    if not torch.isfinite(loss_d):
        raise DivergenceError(f"discriminator loss is {loss_d.item()}")
    loss_d.backward()
    opt_d.step()
    return float(loss_d.detach())


def _eval_l1(gen, tiles):
    if not tiles:
        return float("nan")
    with torch.no_grad():
        vals = [float(masked_l1(gen(x), t, valid))
                for x, t, valid, _ in tiles]
    return float(np.mean(vals))


def save_checkpoint(gen, config: GanConfig, stats: NormStats, path):
    os.makedirs(path, exist_ok=True)
    torch.save(gen.state_dict(), os.path.join(path, CHECKPOINT_WEIGHTS))
    meta = {"format": "deepterra-checkpoint", "version": 1,
            "config": config.to_dict(), "norm_stats": stats.to_dict()}
    with open(os.path.join(path, CHECKPOINT_META), "w",
              encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def train(manifest_path, config: GanConfig, out_dir,
          log_name="training_log.csv"):
    """Train generator (and discriminator when lambda_d > 0) to out_dir.

    Keeps the checkpoint of the best validation masked-L1 (training L1
    when there is no val split) and writes a per-epoch CSV log.
    """
    torch.manual_seed(config.seed)
    data, stats = load_dataset(manifest_path, config)
    gen = UNetGenerator(config.input_channels, config.unet_depth,
                        config.base_width)
    disc = PatchDiscriminator(config.input_channels, config.patch_disc_depth,
                              config.base_width)
    betas = (config.beta1, config.beta2)
    opt_g = torch.optim.Adam(gen.parameters(), lr=config.learning_rate,
                             betas=betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=config.learning_rate,
                             betas=betas)

    rng = np.random.default_rng(config.seed)
    os.makedirs(out_dir, exist_ok=True)
    best = float("inf")
    rows = ["epoch,train_l1,val_l1,disc_loss"]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(data["train"]))
        l1s, dls = [], []
        for idx in order:
            x, t, valid, _ = data["train"][idx]
            if config.lambda_d > 0.0:
                dls.append(train_step_d(gen, disc, opt_d, x, t, config))
            l1s.append(train_step_g(gen, disc, opt_g, x, t, valid, config))
        train_l1 = float(np.mean(l1s))
        val_l1 = _eval_l1(gen, data["val"])
        score = val_l1 if data["val"] else train_l1
        if score < best:
            best = score
            save_checkpoint(gen, config, stats,
                            os.path.join(out_dir, "best"))
        dl = float(np.mean(dls)) if dls else float("nan")
        rows.append(f"{epoch},{train_l1:.6f},{val_l1:.6f},{dl:.6f}")
    with open(os.path.join(out_dir, log_name), "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    return os.path.join(out_dir, "best")
