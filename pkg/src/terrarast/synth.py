"""Seed-deterministic synthetic ALS scenes for oracles and end-to-end tests.

A scene is flat / sloped / fractal terrain with optional boxes (solid
buildings, single-return roofs) and canopies (multi-echo vegetation with a
last-echo ground hit). The generator returns the sampled cloud, the exact
terrain function used (for ground truth), and per-point true labels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec
from .pointcloud import PointCloud

CLASS_GROUND = 2
CLASS_VEGETATION = 5
CLASS_BUILDING = 6


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    extent: tuple  # (size_x, size_y) meters
    terrain: dict  # {"kind": "flat"|"slope"|"fractal", ...}
    objects: tuple = ()
    point_density: float = 10.0  # points / m^2
    noise_sigma_z: float = 0.0

    def __post_init__(self):
        if self.point_density <= 0:
            raise InvalidSpec("point_density must be positive")
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise InvalidSpec("extent must be positive")
        kind = self.terrain.get("kind")
        if kind not in ("flat", "slope", "fractal"):
            raise InvalidSpec(f"unknown terrain kind {kind!r}")
        for obj in self.objects:
            if obj.get("type") not in ("box", "canopy"):
                raise InvalidSpec(f"unknown object type {obj.get('type')!r}")
            if obj["type"] == "box":
                if not (0 <= obj["x"] - obj["w"] / 2
                        and obj["x"] + obj["w"] / 2 <= self.extent[0]
                        and 0 <= obj["y"] - obj["l"] / 2
                        and obj["y"] + obj["l"] / 2 <= self.extent[1]):
                    raise InvalidSpec("box footprint outside extent")
            else:
                if not (0 <= obj["x"] - obj["radius"]
                        and obj["x"] + obj["radius"] <= self.extent[0]
                        and 0 <= obj["y"] - obj["radius"]
                        and obj["y"] + obj["radius"] <= self.extent[1]):
                    raise InvalidSpec("canopy footprint outside extent")

    @classmethod
    def from_json(cls, path) -> "SceneSpec":
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(seed=d["seed"], extent=tuple(d["extent"]),
                   terrain=d["terrain"], objects=tuple(d.get("objects", ())),
                   point_density=d.get("point_density", 10.0),
                   noise_sigma_z=d.get("noise_sigma_z", 0.0))

    def to_dict(self) -> dict:
        return {"seed": self.seed, "extent": list(self.extent),
                "terrain": self.terrain, "objects": list(self.objects),
                "point_density": self.point_density,
                "noise_sigma_z": self.noise_sigma_z}


# ---------------------------------------------------------------------------
# value-noise terrain (pinned algorithm: splitmix64 lattice hash, smoothstep
# bilinear interpolation, per-octave frequency x2 / amplitude /2)

def _mix64(v):
    v = (v + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    v = ((v ^ (v >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) \
        & np.uint64(0xFFFFFFFFFFFFFFFF)
    v = ((v ^ (v >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) \
        & np.uint64(0xFFFFFFFFFFFFFFFF)
    return v ^ (v >> np.uint64(31))


def _lattice_value(ix, iy, seed, octave):
    """Uniform [-1, 1) value at an integer lattice node."""
    with np.errstate(over="ignore"):
        h = _mix64(ix.astype(np.uint64)
                   ^ _mix64(iy.astype(np.uint64)
                            ^ _mix64(np.uint64(seed) + np.uint64(octave))))
    return h.astype(np.float64) / 2.0**63 - 1.0


def _value_noise(x, y, seed, octave, spacing):
    fx = np.asarray(x, dtype=np.float64) / spacing
    fy = np.asarray(y, dtype=np.float64) / spacing
    ix = np.floor(fx).astype(np.int64)
    iy = np.floor(fy).astype(np.int64)
    tx = fx - ix
    ty = fy - iy
    tx = tx * tx * (3.0 - 2.0 * tx)  # smoothstep
    ty = ty * ty * (3.0 - 2.0 * ty)
    v00 = _lattice_value(ix, iy, seed, octave)
    v10 = _lattice_value(ix + 1, iy, seed, octave)
    v01 = _lattice_value(ix, iy + 1, seed, octave)
    v11 = _lattice_value(ix + 1, iy + 1, seed, octave)
    return (v00 * (1 - tx) * (1 - ty) + v10 * tx * (1 - ty)
            + v01 * (1 - tx) * ty + v11 * tx * ty)


def terrain_function(spec: SceneSpec):
    """The exact bare-earth elevation function z(x, y) of a scene."""
    kind = spec.terrain["kind"]
    if kind == "flat":
        return lambda x, y: np.zeros_like(np.asarray(x, dtype=np.float64))
    if kind == "slope":
        grade = math.tan(math.radians(spec.terrain["degrees"]))
        return lambda x, y: np.asarray(x, dtype=np.float64) * grade

    octaves = int(spec.terrain.get("octaves", 4))
    amplitude = float(spec.terrain.get("amplitude", 5.0))
    base_spacing = float(spec.terrain.get("base_spacing", 32.0))
    weights = [0.5 ** o for o in range(octaves)]
    norm = amplitude / sum(weights)

    def fractal(x, y):
        z = np.zeros_like(np.asarray(x, dtype=np.float64))
        for o in range(octaves):
            z += weights[o] * _value_noise(x, y, spec.seed, o,
                                           base_spacing / 2 ** o)
        return z * norm

    return fractal


# ---------------------------------------------------------------------------

def generate(spec: SceneSpec):
    """Sample a scene; returns (cloud, true_dtm_fn, labels)."""
    terrain = terrain_function(spec)
    area = spec.extent[0] * spec.extent[1]
    n = int(round(spec.point_density * area))
    rng = np.random.Generator(np.random.Philox(spec.seed))

    x = rng.random(n) * spec.extent[0]
    y = rng.random(n) * spec.extent[1]
    ground_z = terrain(x, y)
    if spec.noise_sigma_z > 0:
        ground_z = ground_z + rng.normal(0.0, spec.noise_sigma_z, n)

    z = ground_z.copy()
    label = np.full(n, CLASS_GROUND, dtype=np.uint8)
    echo = np.ones(n, dtype=np.uint8)
    nret = np.ones(n, dtype=np.uint8)

    extra = []  # canopy ground echoes appended after the pulse points
    for obj in spec.objects:
        if obj["type"] == "box":
            inside = ((np.abs(x - obj["x"]) <= obj["w"] / 2)
                      & (np.abs(y - obj["y"]) <= obj["l"] / 2))
            z[inside] = terrain(x[inside], y[inside]) + obj["h"]
            label[inside] = CLASS_BUILDING
            echo[inside] = 1
            nret[inside] = 1
        else:
            inside = ((x - obj["x"]) ** 2 + (y - obj["y"]) ** 2
                      <= obj["radius"] ** 2) & (label == CLASS_GROUND)
            idx = np.flatnonzero(inside)
            crown = terrain(x[idx], y[idx]) \
                + obj["height"] * (0.5 + 0.5 * rng.random(len(idx)))
            penetrates = rng.random(len(idx)) < obj.get("echo_profile", 0.5)
            # crown hit replaces the pulse's first echo
            z[idx] = crown
            label[idx] = CLASS_VEGETATION
            echo[idx] = 1
            nret[idx] = np.where(penetrates, 2, 1).astype(np.uint8)
            # penetrating pulses add a last echo at the ground
            pen = idx[penetrates]
            extra.append((x[pen], y[pen], ground_z[pen]))

    if extra:
        gx = np.concatenate([e[0] for e in extra])
        gy = np.concatenate([e[1] for e in extra])
        gz = np.concatenate([e[2] for e in extra])
        x = np.concatenate([x, gx])
        y = np.concatenate([y, gy])
        z = np.concatenate([z, gz])
        label = np.concatenate([label,
                                np.full(len(gx), CLASS_GROUND, dtype=np.uint8)])
        echo = np.concatenate([echo, np.full(len(gx), 2, dtype=np.uint8)])
        nret = np.concatenate([nret, np.full(len(gx), 2, dtype=np.uint8)])

    intensity = (rng.random(len(x)) * 255).astype(np.uint32)
    cloud = PointCloud.from_arrays(x, y, z, intensity, echo, nret, label)
    return cloud, terrain, label.copy()
