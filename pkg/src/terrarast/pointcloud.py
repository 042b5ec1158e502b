"""In-memory ALS point cloud model and ASCII ingestion.

Points are stored column-wise in numpy arrays (x, y, z in meters,
plus intensity, echo number, number of returns and class label).
Clouds are immutable after construction and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

GROUND_CLASS_DEFAULT = 2  # ASPRS "ground"


@dataclass(frozen=True)
class BoundingBox:
    min_x: float
    min_y: float
    min_z: float
    max_x: float
    max_y: float
    max_z: float

    def __post_init__(self):
        if not (self.min_x <= self.max_x and self.min_y <= self.max_y
                and self.min_z <= self.max_z):
            raise ValueError("bounding box has min > max")


@dataclass(frozen=True)
class PointCloud:
    """An unordered set of ALS point records with a tight bounding box."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    intensity: np.ndarray
    echo_number: np.ndarray
    num_returns: np.ndarray
    class_label: np.ndarray
    crs_tag: str | None = None
    bounds: BoundingBox | None = field(default=None)

    def __post_init__(self):
        n = len(self.x)
        for name in ("y", "z", "intensity", "echo_number", "num_returns",
                     "class_label"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"field {name} length differs from x")
        if n:
            for name in ("x", "y", "z"):
                if not np.all(np.isfinite(getattr(self, name))):
                    raise ValueError(f"non-finite values in {name}")
            if np.any(self.echo_number > self.num_returns):
                raise ValueError("echo_number exceeds num_returns")
            object.__setattr__(self, "bounds", BoundingBox(
                float(self.x.min()), float(self.y.min()), float(self.z.min()),
                float(self.x.max()), float(self.y.max()), float(self.z.max())))
        else:
            object.__setattr__(self, "bounds", None)  # undefined for empty
        for name in ("x", "y", "z", "intensity", "echo_number",
                     "num_returns", "class_label"):
            getattr(self, name).setflags(write=False)

    def __len__(self):
        return len(self.x)

    @classmethod
    def from_arrays(cls, x, y, z, intensity=None, echo_number=None,
                    num_returns=None, class_label=None, crs_tag=None):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        n = len(x)

        def _field(v, default, dtype):
            if v is None:
                return np.full(n, default, dtype=dtype)
            return np.asarray(v, dtype=dtype)

        return cls(x=x, y=y, z=z,
                   intensity=_field(intensity, 0, np.uint32),
                   echo_number=_field(echo_number, 1, np.uint8),
                   num_returns=_field(num_returns, 1, np.uint8),
                   class_label=_field(class_label, 0, np.uint8),
                   crs_tag=crs_tag)

    def select(self, index) -> "PointCloud":
        """New cloud containing the points picked by a boolean or index array."""
        return PointCloud(
            x=self.x[index].copy(), y=self.y[index].copy(),
            z=self.z[index].copy(), intensity=self.intensity[index].copy(),
            echo_number=self.echo_number[index].copy(),
            num_returns=self.num_returns[index].copy(),
            class_label=self.class_label[index].copy(), crs_tag=self.crs_tag)


def read_ascii(path) -> PointCloud:
    """Read a whitespace-separated "x y z [intensity] [echo] [nret] [class]" file.

    Lines starting with '#' are skipped; missing trailing fields default to
    intensity=0, echo_number=1, num_returns=1, class_label=0.
    """
    xs, ys, zs, inten, echo, nret, label = [], [], [], [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) < 3:
                raise ParseError("expected at least x y z", line=lineno)
            try:
                vals = [float(t) for t in tokens[:3]]
                extra = [int(float(t)) for t in tokens[3:7]]
            except ValueError:
                raise ParseError(f"non-numeric token in {tokens!r}",
                                 line=lineno) from None
            xs.append(vals[0]); ys.append(vals[1]); zs.append(vals[2])
            inten.append(extra[0] if len(extra) > 0 else 0)
            echo.append(extra[1] if len(extra) > 1 else 1)
            nret.append(extra[2] if len(extra) > 2 else 1)
            label.append(extra[3] if len(extra) > 3 else 0)
    return PointCloud.from_arrays(xs, ys, zs, inten, echo, nret, label)


def write_ascii(cloud: PointCloud, path) -> None:
    """Write a cloud in the 7-column ASCII format read by read_ascii."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(cloud)):
            fh.write(f"{float(cloud.x[i])!r} {float(cloud.y[i])!r} "
                     f"{float(cloud.z[i])!r} "
                     f"{cloud.intensity[i]} {cloud.echo_number[i]} "
                     f"{cloud.num_returns[i]} {cloud.class_label[i]}\n")


def crop(cloud: PointCloud, region: BoundingBox) -> PointCloud:
    """Points with min_x <= x < max_x and min_y <= y < max_y (z unrestricted).

    Half-open on the max edges so adjacent tiles partition a cloud exactly.
    """
    keep = ((cloud.x >= region.min_x) & (cloud.x < region.max_x)
            & (cloud.y >= region.min_y) & (cloud.y < region.max_y))
    return cloud.select(keep)
