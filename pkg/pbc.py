"""Progressive Boundary Complement: hierarchical virtual boundaries

Virtual boundaries are interior attenuation lines. A boundary n of N sits
at distance l_n = round(lambda_n * s / 2) from both real edges of an axis of
size s, with ratio lambda_n = n / (N + 1): lines near the edge attenuate most.

Two application modes are available:

- WHOLEPATCH: unfold the map, multiply every window centered on a boundary
  line by its ratio, fold back and divide by the overlap count.
- CROSSBOUNDARY: convolve with every read that crosses a boundary gap
  multiplied by the ratio (valued-padding).
"""
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from tensorcore import check_feature_map, conv2d, fold, overlap_count, unfold, window_grid
from padmodes import Axis, conv2d_with_lines


class Axes(Enum):
    """Which axes receive virtual boundaries"""
    BOTH = "both"
    ROWS = "rows"
    COLS = "cols"

    @property
    def active(self):
        if self is Axes.BOTH:
            return (Axis.ROWS, Axis.COLS)
        return (Axis.ROWS,) if self is Axes.ROWS else (Axis.COLS,)

    @classmethod
    def parse(cls, name):
        try:
            return cls(name.lower().replace("-only", ""))
        except ValueError:
            raise ValueError(f"Unknown axes '{name}' (valid: both, rows, cols)") from None


class PbcMode(Enum):
    WHOLEPATCH = "wholepatch"
    CROSSBOUNDARY = "crossboundary"

    @classmethod
    def parse(cls, name):
        try:
            return cls(name.lower().replace("-", "").replace("_", ""))
        except ValueError:
            raise ValueError(f"Unknown PBC mode '{name}' "
                             f"(valid: wholepatch, crossboundary)") from None


def round_half_up(x):
    return int(math.floor(x + 0.5))


def max_offset(size):
    """Largest legal boundary offset on an axis of the given size"""
    return int(math.ceil(size / 2)) - 1


@dataclass(frozen=True)
class VirtualBoundary:
    """Symmetric pair of attenuation lines on one axis

    Attributes:
        axis: ROWS boundaries are horizontal lines at row offsets
        offset: Distance l from the nearer real edge, 0 < l < size/2
        ratio: Attenuation lambda in [0, 1]
        size: Length s of the axis the offset is measured on
        index: Hierarchy level n (1 = nearest the edge)
    """
    axis: Axis
    offset: int
    ratio: float
    size: int
    index: int = 1

    def __post_init__(self):
        if not 0 < self.offset < self.size / 2:
            raise ValueError(f"Boundary offset {self.offset} must satisfy 0 < l < s/2 "
                             f"(s={self.size})")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"Boundary ratio must lie in [0, 1], got {self.ratio}")

    @property
    def cell_lines(self):
        """Cell indices of the pair (whole-patch mode)"""
        return (self.offset, self.size - 1 - self.offset)

    @property
    def gap_lines(self):
        """Gap positions of the pair (cross-boundary mode); gap p sits before cell p"""
        return (self.offset, self.size - self.offset)


@dataclass
class BoundarySet:
    """Placed virtual boundaries plus the perturbation settings

    ring pairs the row and column boundaries of the same level into a
    rectangular ring in whole-patch mode.
    """
    boundaries: list = field(default_factory=list)
    count: int = 0
    perturb_range: int = 0
    seed: int = 0
    ring: bool = True

    def __post_init__(self):
        if self.perturb_range < 0:
            raise ValueError(f"Perturbation range must be >= 0, got {self.perturb_range}")
        self.boundaries = sorted(self.boundaries,
                                 key=lambda b: (b.offset, b.axis.value, b.index))

    def __len__(self):
        return len(self.boundaries)

    @property
    def ratios(self):
        return sorted(b.ratio for b in self.boundaries)

    def with_boundaries(self, boundaries):
        return replace(self, boundaries=list(boundaries))

    def with_ratio(self, ratio):
        """Same placement with every ratio replaced"""
        return self.with_boundaries(replace(b, ratio=float(ratio)) for b in self.boundaries)


@dataclass
class PbcConfig:
    """How a feature network applies PBC

    Attributes:
        count: Boundaries N per active axis
        axes: Axes receiving boundaries
        mode: PbcMode
        kernel_size, stride: Unfold geometry for whole-patch mode
        perturb_range: r; offsets move by an integer in [-r, r] per layer
        seed: Seed for the per-layer perturbation streams
        layers: Apply to the first `layers` layers only (None = all)
        ratio_override: Replace every placed ratio with this value
    """
    count: int = 3
    axes: Axes = Axes.BOTH
    mode: PbcMode = PbcMode.WHOLEPATCH
    kernel_size: int = 3
    stride: int = 1
    perturb_range: int = 0
    seed: int = 0
    layers: int = None
    ratio_override: float = None

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"Boundary count must be >= 0, got {self.count}")
        if self.perturb_range < 0:
            raise ValueError(f"Perturbation range must be >= 0, got {self.perturb_range}")
        if self.layers is not None and self.layers < 0:
            raise ValueError(f"Layer mask must be >= 0, got {self.layers}")
        if self.ratio_override is not None and not 0.0 <= self.ratio_override <= 1.0:
            raise ValueError(f"Ratio override must lie in [0, 1], got {self.ratio_override}")

    def applies_to(self, layer):
        return self.layers is None or layer < self.layers

    def boundaries_for(self, H, W):
        """Place (and optionally re-ratio) the boundary set for an H x W map"""
        placed = place_boundaries(self.count, H, W, self.axes)
        placed.perturb_range = self.perturb_range
        placed.seed = self.seed
        if self.ratio_override is not None:
            placed = placed.with_ratio(self.ratio_override)
        return placed


def place_boundaries(N, H, W, axes=Axes.BOTH):
    """Hierarchical placement: lambda_n = n/(N+1), l_n = round(lambda_n * s / 2)

    Offsets that round onto the same line keep the smaller ratio.

    Args:
        N: Boundaries per active axis
        H, W: Map size
        axes: Axes

    Returns:
        BoundarySet

    Raises:
        ValueError: If N >= s/2 on an active axis
    """
    if N < 0:
        raise ValueError(f"Boundary count must be >= 0, got {N}")
    boundaries = []
    for axis in axes.active:
        s = H if axis is Axis.ROWS else W
        if N >= s / 2:
            raise ValueError(f"{N} boundaries do not fit on a {axis.value} axis of size {s} "
                             f"(need N < s/2)")
        taken = set()
        for n in range(1, N + 1):
            ratio = n / (N + 1)
            offset = min(max(round_half_up(ratio * s / 2), 1), max_offset(s))
            if offset in taken:
                continue
            taken.add(offset)
            boundaries.append(VirtualBoundary(axis, offset, ratio, s, n))
    return BoundarySet(boundaries, count=N, ring=axes is Axes.BOTH)


def _shift(boundary, delta):
    offset = min(max(boundary.offset + delta, 1), max_offset(boundary.size))
    return replace(boundary, offset=offset)


def perturb(boundary_set, rng):
    """Move every boundary by an independent integer delta in [-r, r]

    Ratios are kept; offsets are clamped to [1, ceil(s/2) - 1].

    Args:
        boundary_set: BoundarySet (r is its perturb_range)
        rng: numpy Generator, owned by the caller

    Returns:
        New BoundarySet
    """
    r = boundary_set.perturb_range
    if r == 0 or not boundary_set.boundaries:
        return boundary_set.with_boundaries(boundary_set.boundaries)
    deltas = rng.integers(-r, r + 1, size=len(boundary_set.boundaries))
    return boundary_set.with_boundaries(
        _shift(b, int(d)) for b, d in zip(boundary_set.boundaries, deltas))


def perturb_for_layer(boundary_set, layer):
    """Per-layer perturbation seeded from (seed, layer, boundary index)"""
    r = boundary_set.perturb_range
    if r == 0:
        return boundary_set.with_boundaries(boundary_set.boundaries)
    moved = []
    for i, b in enumerate(boundary_set.boundaries):
        rng = np.random.default_rng([boundary_set.seed, layer, i])
        moved.append(_shift(b, int(rng.integers(-r, r + 1))))
    return boundary_set.with_boundaries(moved)


def _levels(boundary_set):
    """Group boundaries by hierarchy level, weakest attenuation last"""
    levels = {}
    for b in boundary_set.boundaries:
        levels.setdefault(b.index, {})[b.axis] = b
    return sorted(levels.values(), key=lambda lv: min(b.ratio for b in lv.values()))


def boundary_locations(boundary_set, H, W, K=3, S=1):
    """Unfold columns whose window center lies on a boundary line

    Args:
        boundary_set: BoundarySet
        H, W, K, S: Unfold geometry

    Returns:
        dict ratio -> sorted int array of column indices; a column claimed by
        several boundaries belongs to the smallest ratio only
    """
    n_rows, n_cols = window_grid(H, W, K, S)
    c = (K - 1) // 2
    centers_r = (np.arange(n_rows) * S + c)[:, None]
    centers_c = (np.arange(n_cols) * S + c)[None, :]

    assigned = np.zeros((n_rows, n_cols), dtype=bool)
    locations = {}
    for level in _levels(boundary_set):
        rb, cb = level.get(Axis.ROWS), level.get(Axis.COLS)
        mask = np.zeros_like(assigned)
        if rb is not None:
            on_row = np.isin(centers_r, rb.cell_lines)
            if boundary_set.ring and cb is not None:
                lo, hi = cb.cell_lines
                on_row = on_row & (centers_c >= lo) & (centers_c <= hi)
            mask |= np.broadcast_to(on_row, mask.shape)
        if cb is not None:
            on_col = np.isin(centers_c, cb.cell_lines)
            if boundary_set.ring and rb is not None:
                lo, hi = rb.cell_lines
                on_col = on_col & (centers_r >= lo) & (centers_r <= hi)
            mask |= np.broadcast_to(on_col, mask.shape)

        fresh = mask & ~assigned
        assigned |= mask
        if not fresh.any():
            continue
        ratio = min(b.ratio for b in level.values())
        idx = np.flatnonzero(fresh)
        if ratio in locations:
            idx = np.union1d(locations[ratio], idx)
        locations[ratio] = idx
    return locations


def apply_pbc_wholepatch(F, boundary_set, K=3, S=1):
    """Scale boundary-centered patches and fold back (unfold-scale-fold)

    Returns:
        FeatureMap with the same dims as F
    """
    F = check_feature_map(F)
    if not boundary_set.boundaries:
        return F.copy()
    H, W = F.shape[2], F.shape[3]
    count = overlap_count(H, W, K, S)
    patches = unfold(F, K, S)
    for ratio, idx in boundary_locations(boundary_set, H, W, K, S).items():
        patches.data[:, :, idx] *= ratio
    return fold(patches) / count


def boundary_gaps(boundary_set):
    """Row and column gap -> ratio maps; a shared gap keeps the smaller ratio"""
    row_lines, col_lines = {}, {}
    for b in boundary_set.boundaries:
        target = row_lines if b.axis is Axis.ROWS else col_lines
        for p in b.gap_lines:
            target[p] = min(target.get(p, 1.0), b.ratio)
    return row_lines, col_lines


def apply_pbc_crossboundary(F, boundary_set, spec):
    """Convolution with valued-padding: reads across a boundary gap are scaled by its ratio"""
    row_lines, col_lines = boundary_gaps(boundary_set)
    return conv2d_with_lines(F, spec, row_lines, col_lines)


def conv2d_with_pbc(F, spec, config, boundary_set, layer=0):
    """One network layer's convolution with PBC applied as configured

    The boundary set is perturbed afresh for this layer before use.
    """
    moved = perturb_for_layer(boundary_set, layer)
    if config.mode is PbcMode.CROSSBOUNDARY:
        return apply_pbc_crossboundary(F, moved, spec)
    F = apply_pbc_wholepatch(F, moved, config.kernel_size, config.stride)
    return conv2d(F, spec)


def seam_score(magnitude, boundary_set):
    """Contrast of adjacent-cell differences across boundary lines

    Mean absolute difference between neighbouring cells straddling a
    boundary gap, divided by the mean over all neighbouring pairs. Values
    well above 1 indicate a visible split effect.

    Args:
        magnitude: 2-D array (H, W), e.g. channel-L2 feature magnitude
        boundary_set: Unperturbed BoundarySet

    Returns:
        float, or 1.0 when the set is empty
    """
    magnitude = np.asarray(magnitude, dtype=np.float64)
    row_lines, col_lines = boundary_gaps(boundary_set)
    d_rows = np.abs(np.diff(magnitude, axis=0))
    d_cols = np.abs(np.diff(magnitude, axis=1))
    across = [d_rows[p - 1] for p in sorted(row_lines)] + \
             [d_cols[:, p - 1] for p in sorted(col_lines)]
    if not across:
        return 1.0
    baseline = np.concatenate([d_rows.ravel(), d_cols.ravel()]).mean()
    if baseline == 0:
        return 1.0
    return float(np.concatenate(across).mean() / baseline)
