"""Dense feature-map kernel: padding, 2-D convolution and the unfold/fold pair

A FeatureMap is a float64 numpy array of shape (B, C, H, W). All functions
here are pure: they never modify their inputs and always return new arrays.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np


class GeometryError(ValueError):
    """Window geometry incompatible with the feature map"""


class PaddingMode(Enum):
    """Border treatment applied before a convolution reads outside the map"""
    ZERO = "zero"
    REFLECT = "reflect"
    REPLICATE = "replicate"
    CIRCULAR = "circular"

    @classmethod
    def parse(cls, name):
        """Look up a mode by its (case-insensitive) name"""
        try:
            return cls(name.lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"Unknown padding mode '{name}' (valid: {valid})") from None


# numpy.pad mode names for each PaddingMode
_NP_PAD_MODES = {
    PaddingMode.ZERO: "constant",
    PaddingMode.REFLECT: "reflect",
    PaddingMode.REPLICATE: "edge",
    PaddingMode.CIRCULAR: "wrap",
}


def check_feature_map(F, name="feature map"):
    """Validate a FeatureMap and return it as a float64 array

    Args:
        F: array-like of shape (B, C, H, W)
        name: Name used in error messages

    Raises:
        ValueError: If the rank is not 4, a dimension is < 1 or a value is not finite
    """
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 4:
        raise ValueError(f"{name} must have rank 4 (B, C, H, W), got shape {F.shape}")
    if min(F.shape) < 1:
        raise ValueError(f"{name} has an empty dimension: {F.shape}")
    check_finite(F, name)
    return F


def check_finite(F, name="feature map"):
    """Raise ValueError if F holds NaN or Inf"""
    if not np.all(np.isfinite(F)):
        bad = int(np.size(F) - np.count_nonzero(np.isfinite(F)))
        raise ValueError(f"{name} contains {bad} non-finite value(s)")
    return F


def _pad_amounts(amount):
    """Normalize an int or (vertical, horizontal) pair"""
    if np.isscalar(amount):
        a_v = a_h = int(amount)
    else:
        a_v, a_h = (int(a) for a in amount)
    if a_v < 0 or a_h < 0:
        raise ValueError(f"Padding amount must be non-negative, got ({a_v}, {a_h})")
    return a_v, a_h


def pad(F, mode, amount):
    """Pad the spatial dims of a feature map

    Args:
        F: FeatureMap (B, C, H, W)
        mode: PaddingMode
        amount: Cells added on each side, an int or a (vertical, horizontal) pair

    Returns:
        FeatureMap of shape (B, C, H + 2*a_v, W + 2*a_h); the interior equals F exactly

    Raises:
        ValueError: If the amount is too large for reflect/circular padding
    """
    F = check_feature_map(F)
    a_v, a_h = _pad_amounts(amount)
    H, W = F.shape[2], F.shape[3]

    if mode is PaddingMode.REFLECT and (a_v >= H or a_h >= W):
        raise ValueError(f"Reflect padding of ({a_v}, {a_h}) needs amount < H and < W "
                         f"(map is {H}x{W})")
    if mode is PaddingMode.CIRCULAR and (a_v > H or a_h > W):
        raise ValueError(f"Circular padding of ({a_v}, {a_h}) needs amount <= H and <= W "
                         f"(map is {H}x{W})")

    widths = ((0, 0), (0, 0), (a_v, a_v), (a_h, a_h))
    return np.pad(F, widths, mode=_NP_PAD_MODES[mode])


@dataclass
class ConvSpec:
    """Stride-1 'same' convolution parameters

    weights has shape (C_out, C_in, K, K) and bias shape (C_out,).
    The pad amount dilation * (K - 1) / 2 keeps the spatial size.
    """
    weights: np.ndarray
    bias: np.ndarray = None
    dilation: int = 1
    padding: PaddingMode = PaddingMode.ZERO

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 4 or self.weights.shape[2] != self.weights.shape[3]:
            raise ValueError(f"Weights must have shape (C_out, C_in, K, K), got {self.weights.shape}")
        if self.kernel_size % 2 == 0:
            raise ValueError(f"Kernel size must be odd, got {self.kernel_size}")
        if self.bias is None:
            self.bias = np.zeros(self.out_channels)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.bias.shape != (self.out_channels,):
            raise ValueError(f"Bias must have shape ({self.out_channels},), got {self.bias.shape}")
        if int(self.dilation) < 1:
            raise ValueError(f"Dilation must be >= 1, got {self.dilation}")
        self.dilation = int(self.dilation)
        check_finite(self.weights, "conv weights")
        check_finite(self.bias, "conv bias")

    @property
    def kernel_size(self):
        return self.weights.shape[2]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def pad_amount(self):
        return self.dilation * (self.kernel_size - 1) // 2

    @property
    def receptive_field(self):
        """Effective kernel extent d*(K-1)+1"""
        return self.dilation * (self.kernel_size - 1) + 1

    def taps(self):
        """Yield (ky, kx, dy, dx): kernel index and spatial read offset of each tap"""
        c = (self.kernel_size - 1) // 2
        for ky in range(self.kernel_size):
            for kx in range(self.kernel_size):
                yield ky, kx, (ky - c) * self.dilation, (kx - c) * self.dilation


def identity_spec(channels, kernel_size=3, padding=PaddingMode.ZERO):
    """ConvSpec whose output equals its input (center tap 1 on the diagonal)"""
    weights = np.zeros((channels, channels, kernel_size, kernel_size))
    c = (kernel_size - 1) // 2
    for ch in range(channels):
        weights[ch, ch, c, c] = 1.0
    return ConvSpec(weights=weights, padding=padding)


def conv2d_masked(F, spec, tap_factor=None):
    """Convolution where each tap's read may be scaled per output position

    This is the shared gather loop behind plain convolution, trenches, region
    padding and cross-boundary attenuation. For tap offset (dy, dx) the read
    of output cell (i, j) comes from padded input cell (i + dy, j + dx).

    Args:
        F: FeatureMap (B, C_in, H, W)
        spec: ConvSpec
        tap_factor: Optional callable (dy, dx) -> None or array broadcastable
            to (H, W) multiplying that tap's reads

    Returns:
        FeatureMap (B, C_out, H, W)

    Raises:
        ValueError: On channel mismatch or non-finite output
    """
    F = check_feature_map(F)
    B, C, H, W = F.shape
    if C != spec.in_channels:
        raise ValueError(f"Channel mismatch: input has {C} channels, "
                         f"conv expects {spec.in_channels}")

    p = spec.pad_amount
    padded = pad(F, spec.padding, p)
    out = np.zeros((B, spec.out_channels, H, W))

    # Fixed tap order keeps accumulation bit-deterministic
    for ky, kx, dy, dx in spec.taps():
        window = padded[:, :, p + dy:p + dy + H, p + dx:p + dx + W]
        if tap_factor is not None:
            factor = tap_factor(dy, dx)
            if factor is not None:
                window = window * factor
        out += np.einsum("oi,bihw->bohw", spec.weights[:, :, ky, kx], window)

    out += spec.bias[None, :, None, None]
    return check_finite(out, "conv2d output")


def conv2d(F, spec):
    """Stride-1 'same' convolution with the spec's padding mode and dilation

    Args:
        F: FeatureMap (B, C_in, H, W)
        spec: ConvSpec

    Returns:
        FeatureMap (B, C_out, H, W)
    """
    return conv2d_masked(F, spec)


class PatchMatrix:
    """Sliding-window columns produced by unfold

    data has shape (B, C*K*K, L); rows are ordered (channel, ky, kx) and
    columns follow a row-major scan of window positions.
    """

    def __init__(self, data, height, width, kernel_size, stride):
        self.data = np.asarray(data, dtype=np.float64)
        self.height = int(height)
        self.width = int(width)
        self.kernel_size = int(kernel_size)
        self.stride = int(stride)
        self._check_geometry()

    @property
    def grid(self):
        """Number of window positions along (rows, cols)"""
        return window_grid(self.height, self.width, self.kernel_size, self.stride)

    @property
    def channels(self):
        return self.data.shape[1] // (self.kernel_size * self.kernel_size)

    def _check_geometry(self):
        if self.data.ndim != 3:
            raise GeometryError(f"Patch data must have rank 3, got shape {self.data.shape}")
        n_rows, n_cols = self.grid
        K2 = self.kernel_size * self.kernel_size
        if self.data.shape[1] % K2 != 0:
            raise GeometryError(f"Patch rows {self.data.shape[1]} not a multiple of K*K={K2}")
        if self.data.shape[2] != n_rows * n_cols:
            raise GeometryError(f"Patch matrix has {self.data.shape[2]} columns, geometry "
                                f"{self.height}x{self.width} K={self.kernel_size} "
                                f"S={self.stride} needs {n_rows * n_cols}")

    def copy(self):
        return PatchMatrix(self.data.copy(), self.height, self.width,
                           self.kernel_size, self.stride)

    def __repr__(self):
        return (f"PatchMatrix(shape={self.data.shape}, H={self.height}, W={self.width}, "
                f"K={self.kernel_size}, S={self.stride})")


def window_grid(H, W, K, S):
    """Window positions per axis for an unpadded K x K window with stride S

    Raises:
        GeometryError: If K exceeds the map or S < 1
    """
    if K < 1 or S < 1:
        raise GeometryError(f"Kernel size and stride must be >= 1, got K={K}, S={S}")
    if K > H or K > W:
        raise GeometryError(f"Kernel size {K} larger than the {H}x{W} map")
    return (H - K) // S + 1, (W - K) // S + 1


def unfold(F, K=3, S=1):
    """Extract every K x K window (no implicit padding) as a column

    Args:
        F: FeatureMap (B, C, H, W)
        K: Window size
        S: Stride

    Returns:
        PatchMatrix with data (B, C*K*K, L)

    Raises:
        GeometryError: If K > H or K > W
    """
    F = check_feature_map(F)
    B, C, H, W = F.shape
    n_rows, n_cols = window_grid(H, W, K, S)

    cols = np.empty((B, C, K, K, n_rows, n_cols))
    for y in range(K):
        y_max = y + S * n_rows
        for x in range(K):
            x_max = x + S * n_cols
            cols[:, :, y, x, :, :] = F[:, :, y:y_max:S, x:x_max:S]

    return PatchMatrix(cols.reshape(B, C * K * K, n_rows * n_cols), H, W, K, S)


def fold(P):
    """Overlap-add patch columns back onto the map

    Each output cell is the sum of every patch entry that maps to it.

    Args:
        P: PatchMatrix

    Returns:
        FeatureMap (B, C, H, W)

    Raises:
        GeometryError: If the data does not match the recorded geometry
    """
    if not isinstance(P, PatchMatrix):
        raise GeometryError(f"fold expects a PatchMatrix, got {type(P).__name__}")
    P._check_geometry()
    K, S = P.kernel_size, P.stride
    n_rows, n_cols = P.grid
    B, C = P.data.shape[0], P.channels

    cols = P.data.reshape(B, C, K, K, n_rows, n_cols)

    def tap(y, x):
        placed = np.zeros((B, C, P.height, P.width))
        placed[:, :, y:y + S * n_rows:S, x:x + S * n_cols:S] = cols[:, :, y, x, :, :]
        return placed

    def tap_pair(y, x, x_mirror):
        return tap(y, x) if x == x_mirror else tap(y, x) + tap(y, x_mirror)

    # Taps are summed in mirrored pairs so a mirror-symmetric input folds to
    # a bit-exact mirror-symmetric output
    out = np.zeros((B, C, P.height, P.width))
    for y, y_mirror in _mirror_pairs(K):
        for x, x_mirror in _mirror_pairs(K):
            group = tap_pair(y, x, x_mirror)
            if y != y_mirror:
                group = group + tap_pair(y_mirror, x, x_mirror)
            out += group
    return check_finite(out, "fold output")


def _mirror_pairs(K):
    return [(i, K - 1 - i) for i in range((K + 1) // 2)]


def overlap_count(H, W, K=3, S=1):
    """Number of K x K windows (stride S) covering each cell

    Returns:
        FeatureMap of shape (1, 1, H, W)

    Raises:
        GeometryError: If some cell is covered by no window
    """
    ones = np.ones((1, 1, H, W))
    count = fold(unfold(ones, K, S))
    if np.any(count == 0):
        holes = int(np.count_nonzero(count == 0))
        raise GeometryError(f"K={K}, S={S} leaves {holes} uncovered cell(s) "
                            f"on a {H}x{W} map")
    return count
