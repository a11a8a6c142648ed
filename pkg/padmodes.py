"""Interior padding interventions: trench lines and unidirectional region padding

Both work by scaling window reads at gather time (see
tensorcore.conv2d_masked); no tensor is ever split or reshaped.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from tensorcore import check_feature_map, conv2d_masked


class Axis(Enum):
    """Orientation of a line: ROWS lines run horizontally between two rows"""
    ROWS = "rows"
    COLS = "cols"

    @classmethod
    def parse(cls, name):
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"Unknown axis '{name}' (valid: rows, cols)") from None


class Side(Enum):
    """Which side of a region border gets its cross-border reads attenuated"""
    INWARD = "inward"
    OUTWARD = "outward"


@dataclass(frozen=True)
class TrenchSpec:
    """Zero-width bidirectional zero boundary between cell position-1 and position"""
    axis: Axis
    position: int

    def validate(self, H, W):
        size = H if self.axis is Axis.ROWS else W
        if not 0 < self.position < size:
            raise ValueError(f"Trench at {self.axis.value} position {self.position} must lie "
                             f"strictly inside 0..{size} (it would coincide with the border)")

    @classmethod
    def parse(cls, text):
        """Parse 'rows:P' or 'cols:P'"""
        try:
            axis, position = text.split(":")
            return cls(Axis.parse(axis.strip()), int(position))
        except ValueError:
            raise ValueError(f"Bad trench '{text}', expected rows:P or cols:P") from None


@dataclass(frozen=True)
class RegionSpec:
    """Axis-aligned rectangle (top, left, height, width) in feature cells"""
    top: int
    left: int
    height: int
    width: int
    side: Side = Side.INWARD

    def validate(self, H, W):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"Region must be at least 1x1, got {self.height}x{self.width}")
        if (self.top < 0 or self.left < 0 or self.top + self.height > H
                or self.left + self.width > W):
            raise ValueError(f"Region (top={self.top}, left={self.left}, "
                             f"{self.height}x{self.width}) exceeds the {H}x{W} map")

    def inside(self, rows, cols):
        """Boolean mask of which (row, col) index pairs fall in the rectangle"""
        r = (rows >= self.top) & (rows < self.top + self.height)
        c = (cols >= self.left) & (cols < self.left + self.width)
        return r[:, None] & c[None, :]

    @classmethod
    def centered(cls, H, W, height, width, side=Side.INWARD):
        """Rectangle of the given size centered in an H x W map"""
        return cls((H - height) // 2, (W - width) // 2, height, width, side)


def crossing_factor(size, offset, lines):
    """Per-cell multiplier for reads at a fixed offset along one axis

    A read from cell i to cell i + offset crosses the line at gap p when
    exactly one of the two lies before p; each crossed line multiplies the
    read by its ratio.

    Args:
        size: Axis length
        offset: Read offset along the axis
        lines: Mapping gap position -> ratio

    Returns:
        Array of length size, or None when no read at this offset crosses a line
    """
    if offset == 0 or not lines:
        return None
    idx = np.arange(size)
    factor = np.ones(size)
    for p, ratio in sorted(lines.items()):
        crosses = (idx < p) != (idx + offset < p)
        factor[crosses] *= ratio
    if np.all(factor == 1.0):
        return None
    return factor


def conv2d_with_lines(F, spec, row_lines=None, col_lines=None):
    """Convolution whose reads across interior lines are scaled by the line ratio

    Args:
        F: FeatureMap (B, C, H, W)
        spec: ConvSpec
        row_lines: Mapping row gap -> ratio (lines running between rows)
        col_lines: Mapping col gap -> ratio

    Returns:
        FeatureMap (B, C_out, H, W)
    """
    F = check_feature_map(F)
    H, W = F.shape[2], F.shape[3]
    row_lines = row_lines or {}
    col_lines = col_lines or {}

    def tap_factor(dy, dx):
        rf = crossing_factor(H, dy, row_lines)
        cf = crossing_factor(W, dx, col_lines)
        if rf is None and cf is None:
            return None
        rf = np.ones(H) if rf is None else rf
        cf = np.ones(W) if cf is None else cf
        return np.outer(rf, cf)

    return conv2d_masked(F, spec, tap_factor)


def conv2d_with_trenches(F, spec, trenches):
    """Convolution with bidirectional zero-padding along each trench line

    Every sub-region between trenches behaves like an independent
    zero-padded image along that axis; the outer border keeps spec.padding.

    Args:
        F: FeatureMap (B, C, H, W)
        spec: ConvSpec
        trenches: Iterable of TrenchSpec

    Raises:
        ValueError: If a trench coincides with the real border
    """
    F = check_feature_map(F)
    H, W = F.shape[2], F.shape[3]
    row_lines, col_lines = {}, {}
    for trench in trenches:
        trench.validate(H, W)
        target = row_lines if trench.axis is Axis.ROWS else col_lines
        target[trench.position] = 0.0
    return conv2d_with_lines(F, spec, row_lines, col_lines)


def conv2d_with_region(F, spec, region, ratio=0.0):
    """Convolution with unidirectional valued-padding along a rectangle border

    Output cells on the designated side of the border (inside for INWARD,
    outside for OUTWARD) see reads from the other side multiplied by ratio;
    cells on the other side convolve normally. Reads falling outside the map
    count as outside the rectangle.

    Args:
        F: FeatureMap (B, C, H, W)
        spec: ConvSpec
        region: RegionSpec
        ratio: Attenuation in [0, 1]; 0 is plain zero-padding, 1 is a no-op
    """
    F = check_feature_map(F)
    H, W = F.shape[2], F.shape[3]
    region.validate(H, W)
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"Region ratio must lie in [0, 1], got {ratio}")

    rows, cols = np.arange(H), np.arange(W)
    out_inside = region.inside(rows, cols)
    designated = out_inside if region.side is Side.INWARD else ~out_inside

    def tap_factor(dy, dx):
        if dy == 0 and dx == 0:
            return None
        read_inside = region.inside(rows + dy, cols + dx)
        read_designated = read_inside if region.side is Side.INWARD else ~read_inside
        crossing = designated & ~read_designated
        if not crossing.any():
            return None
        return np.where(crossing, ratio, 1.0)

    return conv2d_masked(F, spec, tap_factor)
