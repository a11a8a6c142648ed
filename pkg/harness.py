"""Experiment runners: probe-loss grids, richness scoring and feature dumps

Every run_* function takes an ExperimentConfig and returns an
ExperimentReport whose rows follow one fixed schema, so CSV and JSON
emissions of the same report hold identical values.
"""
import csv
import io
import json
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from tensorcore import PaddingMode
from padmodes import RegionSpec, Side, TrenchSpec
from pbc import Axes, PbcConfig, PbcMode, place_boundaries, seam_score
from featnet import ToyNetConfig, build_toynet, make_latent, random_features
from probe import (FitConfig, Region, eval_region, fit, fit_region,
                   make_position_map, target_variance)
from richness import content_richness, noise_image, solid_image, tiled_image
from utils.pnm import write_pgm, write_ppm, read_ppm


LOSS_COLUMNS = ["experiment", "label", "size", "region", "seed_count", "loss_mean", "loss_std"]
RICHNESS_COLUMNS = ["image", "k", "embedder", "S"]

EXPERIMENTS = [
    "padding-ablation", "resolution-grid", "lambda-ablation", "n-ablation",
    "depth-ablation", "region-correction", "perturbation-ablation",
    "richness", "gen-test-images", "dump-features",
]


@dataclass
class ExperimentConfig:
    """Everything needed to regenerate a report

    sizes[0] is the base size s; grids that need a doubled size use 2s.
    height/width override the base map shape for non-square runs.
    """
    experiment: str = "resolution-grid"
    sizes: list = field(default_factory=lambda: [64, 128])
    height: int = None
    width: int = None
    depth: int = 8
    channels: int = 16
    kernel_size: int = 3
    seeds: int = 5
    seed: int = 0
    padding: PaddingMode = PaddingMode.ZERO
    fit: FitConfig = field(default_factory=FitConfig)
    pbc_mode: PbcMode = PbcMode.WHOLEPATCH
    n: int = 3
    n_grid: list = field(default_factory=lambda: [0, 1, 3, 5, 7])
    lambda_grid: list = field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    r: int = 0
    r_grid: list = field(default_factory=lambda: [0, 1, 2, 4])
    axes: Axes = Axes.BOTH
    layers: int = None
    depths: list = field(default_factory=lambda: [1, 2, 4, 8])
    dilation: int = 2
    region_lambda: float = 0.0
    with_pbc: bool = False
    trenches: list = field(default_factory=list)
    region: RegionSpec = None
    k: int = 3
    embedder: str = "stats"
    images: list = field(default_factory=list)
    dump_matrix: bool = False
    jobs: int = 1
    verbose: bool = False

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("At least one size is required")
        if self.seeds < 1:
            raise ValueError(f"Seed count must be >= 1, got {self.seeds}")
        for name in ("n_grid", "lambda_grid", "r_grid", "depths"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if any(not 0.0 <= lam <= 1.0 for lam in self.lambda_grid):
            raise ValueError(f"Lambda grid must lie in [0, 1], got {self.lambda_grid}")

    @property
    def seed_list(self):
        return [self.seed + i for i in range(self.seeds)]

    @property
    def base_shape(self):
        s = self.sizes[0]
        return (self.height or s, self.width or s)

    @property
    def doubled_shape(self):
        H, W = self.base_shape
        if len(self.sizes) > 1 and self.height is None and self.width is None:
            return (self.sizes[1], self.sizes[1])
        return (2 * H, 2 * W)

    def pbc_config(self, **overrides):
        values = dict(count=self.n, axes=self.axes, mode=self.pbc_mode,
                      perturb_range=self.r, seed=self.seed, layers=self.layers)
        values.update(overrides)
        return PbcConfig(**values)

    def describe(self):
        """JSON-friendly dump of the configuration"""
        return _jsonable(asdict(self))


def _jsonable(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


class ExperimentReport:
    """Rows of one experiment plus metadata; emits CSV or JSON"""

    def __init__(self, experiment, columns, rows=None, meta=None):
        self.experiment = experiment
        self.columns = list(columns)
        self.rows = list(rows or [])
        self.meta = dict(meta or {})

    def add(self, **row):
        missing = set(self.columns) - set(row)
        if missing:
            raise ValueError(f"Report row missing columns: {sorted(missing)}")
        self.rows.append({c: row[c] for c in self.columns})

    def find(self, label, region="whole", size=None):
        """First row matching label/region (and size if given)"""
        for row in self.rows:
            if row.get("label") == label and row.get("region") == region and \
                    (size is None or row.get("size") == size):
                return row
        raise KeyError(f"No row label={label} region={region} size={size}")

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(row[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self):
        payload = {"meta": _jsonable(self.meta), "rows": _jsonable(self.rows)}
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"

    def render(self, fmt="csv"):
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"Unknown report format '{fmt}' (valid: csv, json)")

    def write(self, path, fmt="csv"):
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.render(fmt))

    def __len__(self):
        return len(self.rows)


def _cell(value):
    # repr keeps full float precision, matching json.dumps
    if isinstance(value, float):
        return repr(value)
    return value


def _size_label(shape):
    H, W = shape
    return H if H == W else f"{H}x{W}"


def _meta(cfg):
    return {
        "experiment": cfg.experiment,
        "seeds": cfg.seed_list,
        "solver": cfg.fit.solver.value,
        "config": cfg.describe(),
        "versions": {"numpy": np.__version__, "python": platform.python_version()},
    }


# ---------------------------------------------------------------------------
# Feature variants
# ---------------------------------------------------------------------------

@dataclass
class Variant:
    """One network configuration in a grid (label plus overrides)"""
    label: str
    padding: PaddingMode = PaddingMode.ZERO
    dilation: int = 1
    depth: int = None
    pbc: PbcConfig = None
    random: bool = False
    trenches: list = field(default_factory=list)
    region: RegionSpec = None
    region_ratio: float = 0.0


def net_config(cfg, variant, seed):
    return ToyNetConfig(
        depth=variant.depth or cfg.depth,
        channels=cfg.channels,
        kernel_size=cfg.kernel_size,
        seed=seed,
        padding=variant.padding,
        dilation=variant.dilation,
        pbc=replace(variant.pbc, seed=seed) if variant.pbc is not None else None,
        trenches=list(variant.trenches),
        region=variant.region,
        region_ratio=variant.region_ratio,
    )


def compute_features(cfg, variant, shape, seed):
    """Last-layer features of the variant's network on a seeded latent"""
    H, W = shape
    if variant.random:
        return random_features(H, W, cfg.channels, seed)
    net = build_toynet(net_config(cfg, variant, seed))
    return net.forward(make_latent(H, W, seed))


def _measure(job):
    """Probe losses for one (variant, shape, seed); regions is a list of (label, Region, refit)"""
    cfg, variant, shape, seed, regions = job
    features = compute_features(cfg, variant, shape, seed)
    target = make_position_map(*shape)
    result = fit(features, target, cfg.fit)
    losses = {}
    for label, region, refit in regions:
        if region is None:
            losses[label] = result.loss
        elif refit:
            losses[label] = fit_region(features, region, cfg.fit).loss
        else:
            losses[label] = eval_region(result, features, target, region)
    if cfg.verbose:
        summary = " ".join(f"{k}={v:.5f}" for k, v in losses.items())
        print(f"[{cfg.experiment}] {variant.label} size={_size_label(shape)} "
              f"seed={seed} {summary}", file=sys.stderr)
    return losses


def _run_jobs(cfg, jobs):
    # Results come back in submission order whether or not a pool is used
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_measure, jobs))
    return [_measure(job) for job in jobs]


def run_grid(cfg, cells, report):
    """Evaluate (variant, shape, regions) cells over all seeds and append mean/std rows

    Args:
        cfg: ExperimentConfig
        cells: List of (Variant, shape, [(region label, Region or None, refit)])
        report: ExperimentReport receiving one row per (cell, region)
    """
    jobs = [(cfg, variant, shape, seed, regions)
            for variant, shape, regions in cells for seed in cfg.seed_list]
    results = _run_jobs(cfg, jobs)

    per_cell = len(cfg.seed_list)
    for i, (variant, shape, regions) in enumerate(cells):
        chunk = results[i * per_cell:(i + 1) * per_cell]
        for label, _, _ in regions:
            losses = np.array([r[label] for r in chunk])
            report.add(experiment=cfg.experiment, label=variant.label,
                       size=_size_label(shape), region=label,
                       seed_count=len(losses), loss_mean=float(losses.mean()),
                       loss_std=float(losses.std()))
    return report


WHOLE = [("whole", None, False)]


def _loss_report(cfg):
    return ExperimentReport(cfg.experiment, LOSS_COLUMNS, meta=_meta(cfg))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_padding_ablation(cfg):
    """Probe loss per padding mode at the base size, plus random and floor rows"""
    cfg = replace(cfg, experiment="padding-ablation")
    shape = cfg.base_shape
    cells = [(Variant(mode.value, padding=mode), shape, WHOLE) for mode in PaddingMode]
    cells.append((Variant("random", random=True), shape, WHOLE))
    report = run_grid(cfg, cells, _loss_report(cfg))
    report.add(experiment=cfg.experiment, label="floor", size=_size_label(shape),
               region="whole", seed_count=len(cfg.seed_list),
               loss_mean=target_variance(*shape), loss_std=0.0)
    return report


def _grid_variants(cfg, doubled):
    """Resolution-grid variants; dilation only kicks in at the doubled size"""
    return [
        Variant("random", random=True),
        Variant("zero"),
        Variant("circular", padding=PaddingMode.CIRCULAR),
        Variant(f"dilated-d{cfg.dilation}", dilation=cfg.dilation if doubled else 1),
        Variant(f"pbc-wholepatch-N{cfg.n}-r{cfg.r}",
                pbc=cfg.pbc_config(mode=PbcMode.WHOLEPATCH)),
        Variant(f"pbc-crossboundary-N{cfg.n}-r{cfg.r}",
                pbc=cfg.pbc_config(mode=PbcMode.CROSSBOUNDARY)),
    ]


def central_regions(base, doubled):
    """Crop-and-refit and globally-fitted central windows of base size inside doubled"""
    (h, w), (H, W) = base, doubled
    central = Region.centered(H, W, h, w)
    tag = _size_label(base)
    return [(f"central-{tag}", central, True), (f"central-eval-{tag}", central, False)]


def run_resolution_grid(cfg):
    """Position modes x {s, 2s, central s in 2s}"""
    cfg = replace(cfg, experiment="resolution-grid")
    base, doubled = cfg.base_shape, cfg.doubled_shape
    if doubled[0] < base[0] or doubled[1] < base[1]:
        raise ValueError(f"Second size {doubled} must not be smaller than the base {base}")
    cells = []
    for variant in _grid_variants(cfg, doubled=False):
        cells.append((variant, base, WHOLE))
    for variant in _grid_variants(cfg, doubled=True):
        cells.append((variant, doubled, WHOLE + central_regions(base, doubled)))
    return run_grid(cfg, cells, _loss_report(cfg))


def _trench_for(boundary_set):
    """Trenches on the same gaps a cross-boundary set attenuates"""
    trenches = []
    for b in boundary_set.boundaries:
        for p in sorted(set(b.gap_lines)):
            trenches.append(TrenchSpec(b.axis, p))
    return trenches


def run_lambda_ablation(cfg):
    """Single mid-way boundary (l = s/4) at the doubled size, swept over lambda"""
    cfg = replace(cfg, experiment="lambda-ablation")
    shape = cfg.doubled_shape
    single = place_boundaries(1, *shape, cfg.axes)
    cells = [
        (Variant("baseline"), shape, WHOLE),
        (Variant("trench", trenches=_trench_for(single)), shape, WHOLE),
    ]
    for lam in cfg.lambda_grid:
        pbc = cfg.pbc_config(count=1, ratio_override=float(lam))
        cells.append((Variant(f"{cfg.pbc_mode.value}-lambda={lam:g}", pbc=pbc), shape, WHOLE))
    return run_grid(cfg, cells, _loss_report(cfg))


def run_n_ablation(cfg):
    """PBC boundary count sweep at the doubled size"""
    cfg = replace(cfg, experiment="n-ablation")
    shape = cfg.doubled_shape
    cells = [(Variant(f"{cfg.pbc_mode.value}-N={n}", pbc=cfg.pbc_config(count=n)), shape, WHOLE)
             for n in cfg.n_grid]
    return run_grid(cfg, cells, _loss_report(cfg))


def run_depth_ablation(cfg):
    """Zero vs circular padding over network depth at the base size"""
    cfg = replace(cfg, experiment="depth-ablation")
    shape = cfg.base_shape
    cells = []
    for depth in cfg.depths:
        for mode in (PaddingMode.ZERO, PaddingMode.CIRCULAR):
            cells.append((Variant(f"{mode.value}-D{depth}", padding=mode, depth=depth),
                          shape, WHOLE))
    return run_grid(cfg, cells, _loss_report(cfg))


def run_region_correction(cfg):
    """Central unidirectional padding at the doubled size vs plain zero-padding"""
    cfg = replace(cfg, experiment="region-correction")
    base, doubled = cfg.base_shape, cfg.doubled_shape
    region = RegionSpec.centered(*doubled, *base, side=Side.INWARD)
    regions = WHOLE + central_regions(base, doubled)
    cells = [
        (Variant("zero"), doubled, regions),
        (Variant(f"region-lambda={cfg.region_lambda:g}", region=region,
                 region_ratio=cfg.region_lambda), doubled, regions),
    ]
    return run_grid(cfg, cells, _loss_report(cfg))


def run_perturbation_ablation(cfg):
    """PBC with several perturbation ranges: probe loss and seam score at the doubled size"""
    cfg = replace(cfg, experiment="perturbation-ablation")
    shape = cfg.doubled_shape
    report = _loss_report(cfg)
    cells = [(Variant(f"{cfg.pbc_mode.value}-N{cfg.n}-r={r}",
                      pbc=cfg.pbc_config(perturb_range=r)), shape, WHOLE)
             for r in cfg.r_grid]
    run_grid(cfg, cells, report)

    boundaries = place_boundaries(cfg.n, *shape, cfg.axes)
    for variant, _, _ in cells:
        scores = []
        for seed in cfg.seed_list:
            features = compute_features(cfg, variant, shape, seed)
            scores.append(seam_score(feature_magnitude(features), boundaries))
        scores = np.array(scores)
        report.add(experiment=cfg.experiment, label=variant.label, size=_size_label(shape),
                   region="seam-score", seed_count=len(scores),
                   loss_mean=float(scores.mean()), loss_std=float(scores.std()))
    return report


def run_richness(cfg, paths=None):
    """Content Richness of each P6 image; unreadable files are reported and skipped"""
    cfg = replace(cfg, experiment="richness")
    paths = list(paths if paths is not None else cfg.images)
    meta = _meta(cfg)
    meta["errors"] = {}
    if cfg.dump_matrix:
        meta["pairwise"] = {}
    report = ExperimentReport(cfg.experiment, RICHNESS_COLUMNS, meta=meta)
    for path in paths:
        try:
            image = read_ppm(path)
            result = content_richness(image, cfg.k, cfg.embedder)
        except (OSError, ValueError) as exc:
            meta["errors"][str(path)] = str(exc)
            if cfg.verbose:
                print(f"[richness] skipping {path}: {exc}", file=sys.stderr)
            continue
        report.add(image=str(path), k=cfg.k, embedder=cfg.embedder, S=result.score)
        if cfg.dump_matrix:
            meta["pairwise"][str(path)] = result.pairwise.tolist()
        if cfg.verbose:
            print(f"[richness] {path}: S={result.score:.4f}", file=sys.stderr)
    return report


def gen_test_images(out_dir, size=96, seed=0):
    """Write solid.ppm, tiled.ppm (2x2 tiling) and noise.ppm; returns their paths"""
    os.makedirs(out_dir, exist_ok=True)
    images = {
        "solid.ppm": solid_image(size, size),
        "tiled.ppm": tiled_image(size, size, seed),
        "noise.ppm": noise_image(size, size, seed),
    }
    paths = []
    for name, image in images.items():
        path = os.path.join(out_dir, name)
        write_ppm(path, image)
        paths.append(path)
    return paths


def feature_magnitude(features):
    """Channel-L2 magnitude of the first batch item: (H, W)"""
    return np.sqrt(np.sum(np.asarray(features)[0] ** 2, axis=0))


def dump_feature_map(features, path):
    """Write channel-L2 magnitude as a min-max normalized PGM plus a bounds sidecar

    Returns:
        (lo, hi) normalization bounds; the sidecar is path + '.txt'
    """
    magnitude = feature_magnitude(features)
    lo, hi = float(magnitude.min()), float(magnitude.max())
    span = hi - lo
    scaled = (magnitude - lo) / span if span > 0 else np.zeros_like(magnitude)
    write_pgm(path, scaled)
    with open(path + ".txt", "w", encoding="utf-8") as f:
        f.write(f"min={lo!r}\nmax={hi!r}\nheight={magnitude.shape[0]}\n"
                f"width={magnitude.shape[1]}\n")
    return lo, hi


def dump_features(cfg, path):
    """Run one configured network on the base size and dump its features"""
    variant = Variant("dump", padding=cfg.padding, trenches=list(cfg.trenches),
                      region=cfg.region, region_ratio=cfg.region_lambda,
                      pbc=cfg.pbc_config() if cfg.with_pbc else None)
    features = compute_features(cfg, variant, cfg.base_shape, cfg.seed)
    bounds = dump_feature_map(features, path)
    if cfg.verbose:
        print(f"[dump-features] wrote {path} (min={bounds[0]:.4f}, max={bounds[1]:.4f})",
              file=sys.stderr)
    return bounds


RUNNERS = {
    "padding-ablation": run_padding_ablation,
    "resolution-grid": run_resolution_grid,
    "lambda-ablation": run_lambda_ablation,
    "n-ablation": run_n_ablation,
    "depth-ablation": run_depth_ablation,
    "region-correction": run_region_correction,
    "perturbation-ablation": run_perturbation_ablation,
    "richness": run_richness,
}
