"""Content Richness: pairwise patch similarity of an image

The image is cut into a k x k grid, each patch is embedded, and S is the
sum of cosine similarities over all ordered pairs of distinct patches.
Lower S means more varied content; k^2 identical patches give k^2(k^2 - 1).
"""
from dataclasses import dataclass

import numpy as np


NORM_EPS = 1e-12
GRADIENT_BINS = 8
COLOR_LEVELS = 4

# ITU-R BT.601 luma weights
LUMA = np.array([0.299, 0.587, 0.114])


def check_image(image):
    """Validate a (3, H, W) image and clamp it to [0, 1]"""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"Image must have shape (3, H, W), got {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("Image contains non-finite values")
    return np.clip(image, 0.0, 1.0)


def partition(image, k=3):
    """Row-major k x k grid of floor(H/k) x floor(W/k) patches; remainders dropped

    Raises:
        ValueError: If k < 2 or k exceeds H or W
    """
    image = check_image(image)
    H, W = image.shape[1:]
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > H or k > W:
        raise ValueError(f"k={k} larger than the {H}x{W} image")
    ph, pw = H // k, W // k
    return [image[:, i * ph:(i + 1) * ph, j * pw:(j + 1) * pw]
            for i in range(k) for j in range(k)]


def embed_stats(patch):
    """Per-channel mean, per-channel std and an 8-bin luminance-gradient histogram (length 14)"""
    means = patch.mean(axis=(1, 2))
    stds = patch.std(axis=(1, 2))
    luma = np.tensordot(LUMA, patch, axes=1)
    # Forward differences; the last row/col repeats so 1-pixel patches work
    gy = np.diff(luma, axis=0, append=luma[-1:, :])
    gx = np.diff(luma, axis=1, append=luma[:, -1:])
    magnitude = np.hypot(gx, gy)
    hist, _ = np.histogram(magnitude, bins=GRADIENT_BINS, range=(0.0, np.sqrt(2.0)))
    hist = hist / magnitude.size
    return np.concatenate([means, stds, hist])


def embed_histogram(patch):
    """4x4x4 RGB color histogram, L1-normalized (length 64)"""
    q = np.minimum((patch * COLOR_LEVELS).astype(int), COLOR_LEVELS - 1)
    codes = (q[0] * COLOR_LEVELS + q[1]) * COLOR_LEVELS + q[2]
    hist = np.bincount(codes.ravel(), minlength=COLOR_LEVELS ** 3).astype(np.float64)
    return hist / hist.sum()


EMBEDDERS = {
    "stats": embed_stats,
    "histogram": embed_histogram,
}


def get_embedder(name):
    try:
        return EMBEDDERS[name]
    except KeyError:
        raise ValueError(f"Unknown embedder '{name}' "
                         f"(valid: {', '.join(sorted(EMBEDDERS))})") from None


def embed(patch, embedder="stats"):
    """Embed one (3, h, w) patch with a named or callable embedder"""
    fn = get_embedder(embedder) if isinstance(embedder, str) else embedder
    vector = np.asarray(fn(patch), dtype=np.float64).reshape(-1)
    if vector.size < 1 or not np.all(np.isfinite(vector)):
        raise ValueError("Embedder returned an empty or non-finite vector")
    return vector


def cosine_matrix(vectors):
    """Pairwise cosine similarity of the rows of a (n, d) array"""
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    unit = vectors / np.maximum(norms, NORM_EPS)[:, None]
    cosines = np.clip(unit @ unit.T, -1.0, 1.0)
    # Identical nonzero embeddings are exactly parallel
    same = (vectors[:, None, :] == vectors[None, :, :]).all(axis=2) & (norms > 0)[:, None]
    cosines[same] = 1.0
    return cosines


@dataclass
class RichnessReport:
    k: int
    score: float
    pairwise: np.ndarray
    embedder: str = "stats"


def content_richness(image, k=3, embedder="stats"):
    """Sum of cosine similarities over ordered pairs of distinct patches

    Args:
        image: (3, H, W) values in [0, 1]
        k: Grid size
        embedder: Name in EMBEDDERS or a callable patch -> vector

    Returns:
        RichnessReport
    """
    vectors = np.stack([embed(p, embedder) for p in partition(image, k)])
    pairwise = cosine_matrix(vectors)
    off_diagonal = ~np.eye(len(vectors), dtype=bool)
    score = float(pairwise[off_diagonal].sum())
    name = embedder if isinstance(embedder, str) else getattr(embedder, "__name__", "custom")
    return RichnessReport(k, score, pairwise, name)


def solid_image(H, W, color=(0.5, 0.5, 0.5)):
    image = np.empty((3, H, W))
    image[:] = np.asarray(color, dtype=np.float64)[:, None, None]
    return image


def tiled_image(H, W, seed=0, tiles=2):
    """Repeat one random patch tiles x tiles times (cropped to H x W)"""
    rng = np.random.default_rng([seed, 1])
    ph, pw = -(-H // tiles), -(-W // tiles)
    patch = rng.random((3, ph, pw))
    return np.tile(patch, (1, tiles, tiles))[:, :H, :W]


def noise_image(H, W, seed=0):
    rng = np.random.default_rng([seed, 2])
    return rng.random((3, H, W))
