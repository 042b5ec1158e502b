"""Batch command-line interface tying the pipeline together.

Subcommands mirror the processing order: synth -> rasterize -> filter ->
tin -> align/eval, plus a manifest-driven `pipeline` runner. Outputs are
written atomically (temp + rename) and progress is logged as JSON lines
on stderr. Exit codes: 0 success, 2 usage, 3 input format, 4 numeric
failure.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import shutil
import sys
import tempfile
import time

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import align as align_mod
from . import dataio, evaluation, groundfilter, lasio, pointcloud, synth, tin
from . import raster as raster_mod
from .errors import (ChecksumFailure, CorruptHeader, DegenerateInput,
                     EmptyCloud, EmptyOverlap, FormatVersionMismatch,
                     ParseError, SpecMismatch, TerrarastError, TooFewPoints,
                     TruncatedPayload, UnsupportedFormat)

EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_NUMERIC = 4

_FORMAT_ERRORS = (UnsupportedFormat, CorruptHeader, TruncatedPayload,
                  ParseError, FormatVersionMismatch, ChecksumFailure,
                  SpecMismatch)
_NUMERIC_ERRORS = (EmptyOverlap, DegenerateInput, EmptyCloud, TooFewPoints)


def _log(event: str, **fields) -> None:
    rec = {"ts": round(time.time(), 3), "event": event}
    rec.update(fields)
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


def _fail(exc: Exception) -> "NoReturn":
    _log("error", kind=type(exc).__name__, message=str(exc))
    if isinstance(exc, _FORMAT_ERRORS):
        sys.exit(EXIT_FORMAT)
    if isinstance(exc, _NUMERIC_ERRORS):
        sys.exit(EXIT_NUMERIC)
    raise exc


def _read_cloud(path) -> pointcloud.PointCloud:
    if str(path).lower().endswith((".las", ".laz")):
        return lasio.read_las(path)
    return pointcloud.read_ascii(path)


def _atomic_write_file(path, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-terrarast-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path, text: str) -> None:
    _atomic_write_file(path, text.encode("utf-8"))


def _atomic_write_stack(stack, path) -> None:
    parent = os.path.dirname(os.path.abspath(path)) or "."
    tmp = tempfile.mkdtemp(dir=parent, prefix=".tmp-terrarast-")
    try:
        dataio.write_stack(stack, tmp)
        if os.path.isdir(path):
            shutil.rmtree(path)
        os.rename(tmp, path)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def _atomic_write_las(cloud, path) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-terrarast-")
    os.close(fd)
    try:
        lasio.write_las(cloud, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _grid_ref(ref: str):
    """Split 'path.dtr:band' into (path, band or None)."""
    if ":" in ref and not ref.endswith(".dtr"):
        path, band = ref.rsplit(":", 1)
        return path, band
    return ref, None


def _load_band(ref: str) -> raster_mod.RasterGrid:
    path, band = _grid_ref(ref)
    return dataio.read_band(path, band)


@click.group()
def main():
    """terrarast: ALS rasterization, ground filtering and DTM evaluation."""


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--cell", default=0.25, show_default=True)
@click.option("--voxel", default=None, type=float,
              help="z voxel size; defaults to --cell (cubed voxels)")
@click.option("--bands", default="voxel_top,voxel_bottom,density,stdev,echoes",
              show_default=True)
@click.option("--ground-codes", default="2", show_default=True,
              help="comma-separated class codes counted as ground")
@click.option("--downsample", "factor", default=1, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def rasterize(in_path, cell, voxel, bands, ground_codes, factor, out_path):
    """Rasterize a point cloud into a multi-band .dtr stack."""
    known = set(raster_mod.ELEVATION_BANDS + raster_mod.STATISTIC_BANDS
                + raster_mod.SEMANTIC_BANDS)
    names = []
    for name in (b.strip() for b in bands.split(",") if b.strip()):
        if name == "sem2":
            names += ["sem2_ground", "sem2_nonground"]
        elif name in known:
            names.append(name)
        else:
            raise click.UsageError(f"unknown band name: {name}")
    codes = [int(c) for c in ground_codes.split(",")]
    try:
        cloud = _read_cloud(in_path)
        spec = raster_mod.GridSpec.covering(cloud, cell, voxel)
        stack = raster_mod.rasterize_bands(cloud, spec, names, codes)
        if factor > 1:
            stack = raster_mod.downsample(stack, factor)
        _atomic_write_stack(stack, out_path)
    except TerrarastError as exc:
        _fail(exc)
    _log("rasterize", out=out_path, bands=stack.band_names,
         width=stack.spec.width, height=stack.spec.height)


_FILTERS = {
    "pmf": (groundfilter.PmfParams, groundfilter.pmf),
    "smrf": (groundfilter.SmrfParams, groundfilter.smrf),
    "sbm": (None, lambda cloud: groundfilter.sbm(cloud)),
    "csf": (groundfilter.CsfParams, groundfilter.csf),
}


def load_filter_params(algo: str, params_path=None):
    """Build the parameter bundle for `algo` from an optional TOML file.

    The file may carry the fields at top level or under a table named
    after the algorithm; missing fields keep the published defaults.
    """
    cls = _FILTERS[algo][0]
    if cls is None:
        return None
    fields = {}
    if params_path:
        with open(params_path, "rb") as fh:
            doc = tomllib.load(fh)
        section = doc.get(algo, doc)
        fields = {k: v for k, v in section.items()
                  if k in cls.__dataclass_fields__}
    return cls(**fields)


@main.command("filter")
@click.option("--algo", required=True,
              type=click.Choice(sorted(_FILTERS)))
@click.option("--params", "params_path", default=None,
              type=click.Path(exists=True), help="TOML parameter file")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def filter_cmd(algo, params_path, in_path, out_path):
    """Classify ground points and write the boolean mask."""
    try:
        cloud = _read_cloud(in_path)
        params = load_filter_params(algo, params_path)
        fn = _FILTERS[algo][1]
        mask = fn(cloud) if params is None else fn(cloud, params)
        d = os.path.dirname(os.path.abspath(out_path)) or "."
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-terrarast-")
        os.close(fd)
        try:
            dataio.write_mask(mask, tmp)
            os.replace(tmp, out_path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except TerrarastError as exc:
        _fail(exc)
    _log("filter", algo=algo, n_points=len(mask),
         n_ground=int(np.sum(mask)), out=out_path)


@main.command("tin")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--mask", "mask_path", default=None, type=click.Path(exists=True))
@click.option("--spec", "spec_path", default=None, type=click.Path(exists=True),
              help="GridSpec JSON; defaults to a 25 cm grid over the points")
@click.option("--out", "out_path", required=True, type=click.Path())
def tin_cmd(in_path, mask_path, spec_path, out_path):
    """Triangulate (masked) points and rasterize the TIN to a DTM."""
    try:
        cloud = _read_cloud(in_path)
        if spec_path:
            with open(spec_path, "r", encoding="utf-8") as fh:
                spec = raster_mod.GridSpec(**json.load(fh))
        else:
            # grid covers the whole tile, not just the ground subset
            spec = raster_mod.GridSpec.covering(cloud, 0.25)
        if mask_path:
            mask = dataio.read_mask(mask_path)
            cloud = groundfilter.mask_to_dtm_points(cloud, mask)
        tri = tin.delaunay(cloud)
        dtm = tin.tin_to_dtm(tri, spec)
        _atomic_write_stack(raster_mod.stack_bands([dtm]), out_path)
    except TerrarastError as exc:
        _fail(exc)
    _log("tin", n_vertices=len(tri.vertices), out=out_path)


@main.command("align")
@click.option("--raster", "raster_ref", required=True,
              help="stack path, optionally ':band' (e.g. tile.dtr:voxel_bottom)")
@click.option("--dtm", "dtm_ref", required=True)
@click.option("--mask", "mask_ref", required=True,
              help="binary ground mask raster (e.g. tile.dtr:sem1)")
@click.option("--range", "search_range", default=10, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--surface-out", default=None, type=click.Path(),
              help="CSV of the RMSE search surface; default <out>.surface.csv")
def align_cmd(raster_ref, dtm_ref, mask_ref, search_range, out_path,
              surface_out):
    """Brute-force integer offset search between a raster and a DTM."""
    try:
        result = align_mod.grid_offset_search(_load_band(raster_ref),
                                              _load_band(dtm_ref),
                                              _load_band(mask_ref),
                                              search_range)
    except TerrarastError as exc:
        _fail(exc)
    payload = {"dx": result.dx, "dy": result.dy,
               "rmse_at_best": result.rmse_at_best}
    _atomic_write_text(out_path, json.dumps(payload, sort_keys=True) + "\n")
    rows = [[dy] + [f"{v:.6f}" if np.isfinite(v) else ""
                    for v in result.rmse_grid[dy]]
            for dy in range(search_range + 1)]
    header = ["dy\\dx"] + [str(dx) for dx in range(search_range + 1)]
    _atomic_write_text(surface_out or out_path + ".surface.csv",
                       evaluation.report_csv(rows, header))
    _log("align", dx=result.dx, dy=result.dy, rmse=result.rmse_at_best)


@main.command("eval")
@click.option("--pred", "pred_ref", required=True)
@click.option("--ref", "ref_ref", required=True)
@click.option("--report", "report_path", required=True, type=click.Path())
def eval_cmd(pred_ref, ref_ref, report_path):
    """RMSE between a predicted and a reference DTM."""
    try:
        rmse = evaluation.dtm_rmse(_load_band(pred_ref), _load_band(ref_ref))
    except TerrarastError as exc:
        _fail(exc)
    _atomic_write_text(report_path, evaluation.report_csv(
        [[pred_ref, ref_ref, f"{rmse:.6f}"]], ["pred", "ref", "rmse_m"]))
    _log("eval", rmse=rmse, report=report_path)


@main.command("synth")
@click.option("--scene", "scene_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--truth", "truth_path", default=None, type=click.Path(),
              help="write the exact terrain as a single-band .dtr")
@click.option("--cell", default=0.25, show_default=True,
              help="truth raster cell size")
def synth_cmd(scene_path, out_path, truth_path, cell):
    """Generate a synthetic ALS scene from a JSON spec."""
    try:
        spec = synth.SceneSpec.from_json(scene_path)
        cloud, terrain, _ = synth.generate(spec)
        if str(out_path).lower().endswith(".las"):
            _atomic_write_las(cloud, out_path)
        else:
            pointcloud.write_ascii(cloud, out_path)
        if truth_path:
            # anchor the truth grid on the cloud as readers will see it
            # (LAS quantizes coordinates, which can nudge the bounds)
            gspec = raster_mod.GridSpec.covering(_read_cloud(out_path), cell)
            cx, cy = gspec.cell_centers()
            truth = raster_mod.RasterGrid(gspec, terrain(cx, cy), "dtm")
            _atomic_write_stack(raster_mod.stack_bands([truth]), truth_path)
    except TerrarastError as exc:
        _fail(exc)
    _log("synth", n_points=len(cloud), out=out_path)


def _run_tile(entry, config, workdir):
    name = os.path.splitext(os.path.basename(entry["cloud_path"]))[0]
    cloud = _read_cloud(entry["cloud_path"])
    cell = config.get("cell", 0.25)
    spec = raster_mod.GridSpec.covering(cloud, cell)
    bands = config.get("bands",
                       ["voxel_top", "voxel_bottom", "density", "stdev",
                        "echoes"])
    stack = raster_mod.rasterize_bands(cloud, spec, bands,
                                       config.get("ground_codes", [2]))
    _atomic_write_stack(stack, os.path.join(workdir, name + ".dtr"))

    algo = config.get("filter", "csf")
    params = _FILTERS[algo][0]
    fn = _FILTERS[algo][1]
    if params is not None:
        fields = {k: v for k, v in config.get(algo, {}).items()
                  if k in params.__dataclass_fields__}
        mask = fn(cloud, params(**fields))
    else:
        mask = fn(cloud)
    ground = groundfilter.mask_to_dtm_points(cloud, mask)
    tri = tin.delaunay(ground)
    dtm = tin.tin_to_dtm(tri, spec)
    _atomic_write_stack(raster_mod.stack_bands([dtm]),
                        os.path.join(workdir, name + "_dtm.dtr"))

    rmse = None
    if entry.get("dtm_path"):
        ref = dataio.read_band(entry["dtm_path"], None)
        rmse = evaluation.dtm_rmse(dtm, ref)
    return name, rmse


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True))
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True), help="run TOML")
@click.option("--jobs", default=None, type=int,
              help="parallel tiles; default $TERRARAST_JOBS or 1")
@click.option("--workdir", default=".", show_default=True, type=click.Path())
@click.option("--report", "report_path", default=None, type=click.Path())
def pipeline(manifest_path, config_path, jobs, workdir, report_path):
    """Rasterize, filter, TIN and evaluate every tile of a manifest."""
    config = {}
    if config_path:
        with open(config_path, "rb") as fh:
            config = tomllib.load(fh)
    if jobs is None:
        jobs = int(os.environ.get("TERRARAST_JOBS", "1"))
    try:
        manifest = dataio.read_manifest(manifest_path)
    except TerrarastError as exc:
        _fail(exc)
    os.makedirs(workdir, exist_ok=True)
    tiles = manifest["tiles"]
    results = []
    failed = False
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
        futures = {ex.submit(_run_tile, t, config, workdir): t for t in tiles}
        for fut in concurrent.futures.as_completed(futures):
            entry = futures[fut]
            try:
                name, rmse = fut.result()
                results.append((name, rmse))
                _log("tile", name=name, rmse=rmse)
            except Exception as exc:  # any tile failure fails the run
                failed = True
                _log("tile_error", cloud=entry["cloud_path"],
                     kind=type(exc).__name__, message=str(exc))
    if report_path:
        rows = [[n, "" if r is None else f"{r:.6f}"]
                for n, r in sorted(results)]
        _atomic_write_text(report_path,
                           evaluation.report_csv(rows, ["tile", "rmse_m"]))
    if failed:
        sys.exit(EXIT_NUMERIC)


if __name__ == "__main__":
    main()
