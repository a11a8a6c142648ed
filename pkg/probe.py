"""Position-information probe

A single affine map, shared by every spatial position, is fitted from the
C feature channels to the normalized (row, col) coordinates of each cell.
The residual MSE measures how much absolute position the features carry:
the more position information, the lower the loss.
"""
import sys
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from tensorcore import check_feature_map


class SingularSystemError(ValueError):
    """Normal equations of the closed-form fit cannot be solved"""


class ProbeDivergenceError(ArithmeticError):
    """Iterative fit produced a non-finite loss"""

    def __init__(self, iteration, loss):
        super().__init__(f"Probe fit diverged at iteration {iteration} (loss={loss})")
        self.iteration = iteration
        self.loss = loss


class Solver(Enum):
    CLOSED = "closed"
    ADAM = "adam"
    SGD = "sgd"

    @classmethod
    def parse(cls, name):
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"Unknown solver '{name}' (valid: closed, adam, sgd)") from None


@dataclass
class FitConfig:
    """Probe solver settings

    Defaults follow the reference protocol (Adam, lr 1e-4) with the iteration
    count cut to 5 000 for desk runs; the closed form needs only ridge.
    """
    solver: Solver = Solver.CLOSED
    ridge: float = 1e-8
    lr: float = 1e-4
    iterations: int = 5000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    record_curve: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"Iterations must be >= 1, got {self.iterations}")
        if self.lr < 0:
            raise ValueError(f"Learning rate must be >= 0, got {self.lr}")
        if self.ridge < 0:
            raise ValueError(f"Ridge must be >= 0, got {self.ridge}")


@dataclass(frozen=True)
class Region:
    """(top, left, height, width) window in feature cells"""
    top: int
    left: int
    height: int
    width: int

    def validate(self, H, W):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"Region is empty: {self.height}x{self.width}")
        if (self.top < 0 or self.left < 0 or self.top + self.height > H
                or self.left + self.width > W):
            raise ValueError(f"Region (top={self.top}, left={self.left}, "
                             f"{self.height}x{self.width}) exceeds the {H}x{W} map")

    def slices(self):
        return (slice(self.top, self.top + self.height),
                slice(self.left, self.left + self.width))

    @classmethod
    def full(cls, H, W):
        return cls(0, 0, H, W)

    @classmethod
    def centered(cls, H, W, height, width):
        return cls((H - height) // 2, (W - width) // 2, height, width)


class ProbeModel:
    """Affine map from C channels to 2 coordinates"""

    def __init__(self, weight, bias):
        self.weight = np.asarray(weight, dtype=np.float64)  # (2, C)
        self.bias = np.asarray(bias, dtype=np.float64)      # (2,)

    @classmethod
    def zeros(cls, channels):
        return cls(np.zeros((2, channels)), np.zeros(2))

    def predict(self, features):
        """Apply the map at every position: (1, C, H, W) -> (1, 2, H, W)"""
        out = np.einsum("kc,bchw->bkhw", self.weight, features)
        return out + self.bias[None, :, None, None]


@dataclass
class ProbeResult:
    model: ProbeModel
    loss: float
    region_losses: dict = field(default_factory=dict)
    loss_curve: list = None


def make_position_map(H, W):
    """(1, 2, H, W) target: channel 0 = row/(H-1), channel 1 = col/(W-1)"""
    if H < 2 or W < 2:
        raise ValueError(f"Position map needs H, W >= 2, got {H}x{W}")
    rows = np.arange(H) / (H - 1)
    cols = np.arange(W) / (W - 1)
    target = np.empty((1, 2, H, W))
    target[0, 0] = rows[:, None]
    target[0, 1] = cols[None, :]
    return target


def _check_pair(features, target):
    features = check_feature_map(features, "probe features")
    if features.shape[0] != 1:
        raise ValueError(f"Probe expects batch 1, got {features.shape[0]}")
    if features.shape[2:] != target.shape[2:]:
        raise ValueError(f"Spatial dims differ: features {features.shape[2:]}, "
                         f"target {target.shape[2:]}")
    return features


def _samples(features, target):
    """Flatten to (H*W, C) design matrix and (H*W, 2) targets"""
    C = features.shape[1]
    X = features[0].reshape(C, -1).T
    Y = target[0].reshape(2, -1).T
    return X, Y


def mse(model, features, target):
    """Mean squared error over both coordinate channels and all positions"""
    return float(np.mean((model.predict(features) - target) ** 2))


def fit_closed_form(features, target, ridge=1e-8):
    """Exact ridge regression: minimizes MSE + ridge * ||weight||^2

    Raises:
        SingularSystemError: If the system is singular (only possible with ridge = 0)
    """
    features = _check_pair(features, target)
    X, Y = _samples(features, target)
    n, C = X.shape
    x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - x_mean, Y - y_mean

    A = Xc.T @ Xc / n + ridge * np.eye(C)
    if ridge == 0 and np.linalg.matrix_rank(A) < C:
        raise SingularSystemError("Feature covariance is singular; use a ridge > 0")
    try:
        weight = np.linalg.solve(A, Xc.T @ Yc / n).T
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"Normal equations singular ({exc}); use a ridge > 0") from None
    model = ProbeModel(weight, y_mean - weight @ x_mean)
    return ProbeResult(model, mse(model, features, target))


class Adam:
    """Adam update over a dict of parameter arrays (updated in place)"""

    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k in params:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(self.v[k] / bc2) + self.eps
            params[k] -= (self.lr / bc1) * self.m[k] / denom


class SGD:
    """Plain gradient descent"""

    def __init__(self, lr=1e-2):
        self.lr = lr

    def step(self, params, grads):
        for k in params:
            params[k] -= self.lr * grads[k]


def fit_iterative(features, target, cfg, verbose=False):
    """Full-batch gradient descent on MSE from a zero-initialized model

    Args:
        features: (1, C, H, W)
        target: (1, 2, H, W) position map
        cfg: FitConfig with solver ADAM or SGD
        verbose: Print the loss every 10% of the run

    Returns:
        ProbeResult with the final loss (and the curve if cfg.record_curve)

    Raises:
        ProbeDivergenceError: If the loss becomes non-finite
    """
    features = _check_pair(features, target)
    if cfg.solver is Solver.ADAM:
        optimizer = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    elif cfg.solver is Solver.SGD:
        optimizer = SGD(cfg.lr)
    else:
        raise ValueError(f"fit_iterative needs an iterative solver, got {cfg.solver.value}")

    X, Y = _samples(features, target)
    n = X.shape[0]
    params = {"weight": np.zeros((2, X.shape[1])), "bias": np.zeros(2)}
    curve = [] if cfg.record_curve else None
    report_every = max(cfg.iterations // 10, 1)

    for it in range(cfg.iterations):
        err = X @ params["weight"].T + params["bias"] - Y
        loss = float(np.mean(err * err))
        if not np.isfinite(loss):
            raise ProbeDivergenceError(it, loss)
        if curve is not None:
            curve.append(loss)
        if verbose and it % report_every == 0:
            print(f"[probe] {cfg.solver.value} iter {it}: loss={loss:.6f}", file=sys.stderr)
        # d(mean over n*2 entries)/d(param)
        scale = 2.0 / (2 * n)
        grads = {"weight": scale * err.T @ X, "bias": scale * err.sum(axis=0)}
        optimizer.step(params, grads)

    model = ProbeModel(params["weight"], params["bias"])
    loss = mse(model, features, target)
    if not np.isfinite(loss):
        raise ProbeDivergenceError(cfg.iterations, loss)
    return ProbeResult(model, loss, loss_curve=curve)


def fit(features, target, cfg=None, verbose=False):
    """Fit with whichever solver cfg names"""
    cfg = cfg or FitConfig()
    if cfg.solver is Solver.CLOSED:
        return fit_closed_form(features, target, cfg.ridge)
    return fit_iterative(features, target, cfg, verbose)


def eval_region(result, features, target, region):
    """MSE of an already-fitted probe restricted to one region

    The loss is also recorded in result.region_losses under the region.

    Raises:
        ValueError: If the region is empty or out of bounds
    """
    features = _check_pair(features, target)
    region.validate(features.shape[2], features.shape[3])
    rs, cs = region.slices()
    loss = mse(result.model, features[:, :, rs, cs], target[:, :, rs, cs])
    result.region_losses[region] = loss
    return loss


def fit_region(features, region, cfg=None):
    """Crop the features to a region and fit a fresh probe against the crop's own position map

    This compares a sub-window of a large map on equal terms with a whole
    map of the sub-window's size.
    """
    features = check_feature_map(features, "probe features")
    region.validate(features.shape[2], features.shape[3])
    rs, cs = region.slices()
    crop = features[:, :, rs, cs]
    return fit(crop, make_position_map(region.height, region.width), cfg)


def target_variance(H, W):
    """Loss of the best constant predictor: the random-feature floor"""
    return float(make_position_map(H, W).reshape(2, -1).var(axis=1).mean())
