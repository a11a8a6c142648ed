"""Toy convolutional feature network

A stack of (PBC?, conv, ReLU) layers with random, untrained weights. It
stands in for the last-layer features of a denoising U-Net: absolute
position leaks in through the border padding, and how far it reaches is
bounded by depth * dilation * (K - 1) / 2 cells.
"""
import sys
from dataclasses import dataclass, field

import numpy as np

from tensorcore import ConvSpec, PaddingMode, check_feature_map, conv2d
from padmodes import conv2d_with_region, conv2d_with_trenches
from pbc import conv2d_with_pbc


LATENT_CHANNELS = 4


@dataclass
class ToyNetConfig:
    """Architecture and intervention settings of a ToyNet

    Attributes:
        depth: Number of layers D
        channels: Hidden/output channels
        in_channels: Input channels (4, like a diffusion latent)
        kernel_size: Odd K
        seed: Weight seed
        padding: PaddingMode used by every layer
        dilation: Int for every layer, or a per-layer list
        pbc: Optional PbcConfig
        trenches: TrenchSpecs applied at every layer
        region: Optional RegionSpec applied at every layer
        region_ratio: Attenuation for the region border
    """
    depth: int = 8
    channels: int = 16
    in_channels: int = LATENT_CHANNELS
    kernel_size: int = 3
    seed: int = 0
    padding: PaddingMode = PaddingMode.ZERO
    dilation: object = 1
    pbc: object = None
    trenches: list = field(default_factory=list)
    region: object = None
    region_ratio: float = 0.0

    def __post_init__(self):
        if self.depth < 1 or self.channels < 1 or self.in_channels < 1:
            raise ValueError(f"Depth and channel counts must be >= 1 "
                             f"(depth={self.depth}, channels={self.channels}, "
                             f"in_channels={self.in_channels})")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"Kernel size must be a positive odd integer, got {self.kernel_size}")
        if len(self.dilations) != self.depth:
            raise ValueError(f"Got {len(self.dilations)} dilations for {self.depth} layers")

    @property
    def dilations(self):
        if np.isscalar(self.dilation):
            return [int(self.dilation)] * self.depth
        return [int(d) for d in self.dilation]

    @property
    def receptive_radius(self):
        """Cells over which a single input cell can influence the output"""
        return sum(d * (self.kernel_size - 1) // 2 for d in self.dilations)


class ToyNet:
    """Immutable random-weight conv net built from a ToyNetConfig"""

    def __init__(self, config, layers):
        self.config = config
        self.layers = tuple(layers)

    @property
    def depth(self):
        return len(self.layers)

    def forward(self, F, verbose=False):
        """Run the stack on a feature map

        Args:
            F: FeatureMap (B, in_channels, H, W)
            verbose: Print per-layer activation statistics

        Returns:
            FeatureMap (B, channels, H, W)

        Raises:
            ValueError: On channel mismatch
        """
        F = check_feature_map(F, "network input")
        if F.shape[1] != self.config.in_channels:
            raise ValueError(f"Channel mismatch: input has {F.shape[1]} channels, "
                             f"network expects {self.config.in_channels}")
        cfg = self.config
        H, W = F.shape[2], F.shape[3]
        boundaries = cfg.pbc.boundaries_for(H, W) if cfg.pbc is not None else None

        for layer, spec in enumerate(self.layers):
            if boundaries is not None and cfg.pbc.applies_to(layer):
                F = conv2d_with_pbc(F, spec, cfg.pbc, boundaries, layer)
            elif cfg.region is not None:
                F = conv2d_with_region(F, spec, cfg.region, cfg.region_ratio)
            elif cfg.trenches:
                F = conv2d_with_trenches(F, spec, cfg.trenches)
            else:
                F = conv2d(F, spec)
            F = np.maximum(F, 0.0)
            if verbose:
                print(f"[featnet] layer {layer}: d={spec.dilation} "
                      f"mean={F.mean():.4f} std={F.std():.4f}", file=sys.stderr)
        return F

    __call__ = forward

    def __repr__(self):
        cfg = self.config
        return (f"ToyNet(depth={cfg.depth}, channels={cfg.channels}, K={cfg.kernel_size}, "
                f"padding={cfg.padding.value}, seed={cfg.seed})")


def build_toynet(config):
    """Draw i.i.d. zero-mean weights with scale 1/sqrt(C_in * K^2); biases zero"""
    rng = np.random.default_rng(config.seed)
    K = config.kernel_size
    layers = []
    c_in = config.in_channels
    for d in config.dilations:
        scale = 1.0 / np.sqrt(c_in * K * K)
        weights = rng.standard_normal((config.channels, c_in, K, K)) * scale
        layers.append(ConvSpec(weights=weights, dilation=d, padding=config.padding))
        c_in = config.channels
    return ToyNet(config, layers)


def make_latent(H, W, seed=0, channels=LATENT_CHANNELS):
    """Seeded standard-normal latent of shape (1, channels, H, W)

    The size enters the seed so maps of different resolution are independent.
    """
    rng = np.random.default_rng([seed, H, W])
    return rng.standard_normal((1, channels, H, W))


def random_features(H, W, channels, seed=0):
    """Features with no positional structure (i.i.d. standard normal)"""
    rng = np.random.default_rng([seed, H, W, channels, 1])
    return rng.standard_normal((1, channels, H, W))
