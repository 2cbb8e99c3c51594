"""Per-parameter quadratic extrapolation of recent weight history.

Every prediction interval p, the last p-1 optimizer-produced weight vectors
are fitted per parameter with f(x) = a x^2 + b x + c over abscissae
x = 1..p-1, and each weight is replaced by f(d) at a prediction distance d:

  naive rule:    d = r^(i/p) * d0 + (p - 1), shared across parameters,
  adaptive rule: d = (1 - exp(-d0)) * n + (p - 1) per parameter, with
                 d0 = k * |s| / (|curv| * alpha + eps), where s = 2a(p-1) + b
                 is the fitted slope at the window end and curv = 2a.

The model is linear in (a, b, c), so the least-squares minimizer is obtained
in closed form from the Vandermonde pseudoinverse; no iterative solver is
involved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# reject per-parameter predictions that jump further than this from the
# current weight; intermediate optimizer steps absorb ordinary errors, the
# cap only bounds worst-case damage
MAX_PREDICTION_JUMP = 1e3

METHODS = ("vanilla", "nap", "adap")


@dataclass(frozen=True)
class PredictorConfig:
    """Prediction-schedule hyperparameters.

    p is the prediction interval (a window holds p-1 samples, so p >= 4 for a
    quadratic fit); alpha mirrors the optimizer learning rate.
    """

    p: int = 4
    d0_init: float = 3.0
    r: float = 0.95
    k: float = 0.01
    n_max: float = 12.0
    epsilon: float = 1e-6
    alpha: float = 0.1
    method: str = "adap"

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown prediction method {self.method!r}")
        if self.p < 4:
            raise ValueError("prediction interval p must be >= 4")
        if not 0.0 < self.r <= 1.0:
            raise ValueError("decay rate r must lie in (0, 1]")
        if self.k <= 0.0:
            raise ValueError("proportionality constant k must be positive")
        if self.n_max <= 0.0:
            raise ValueError("maximum extra distance n_max must be positive")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class FitCoefficients:
    a: float
    b: float
    c: float


_PINV_CACHE: dict[int, np.ndarray] = {}


def _vandermonde_pinv(npoints: int) -> np.ndarray:
    """(3 x npoints) pseudoinverse of [[x^2, x, 1]] for x = 1..npoints."""
    pinv = _PINV_CACHE.get(npoints)
    if pinv is None:
        x = np.arange(1, npoints + 1, dtype=float)
        vander = np.stack([x * x, x, np.ones_like(x)], axis=1)
        pinv = np.linalg.pinv(vander)
        _PINV_CACHE[npoints] = pinv
    return pinv


def fit_quadratic(ys: np.ndarray) -> FitCoefficients:
    """Least-squares (a, b, c) of a x^2 + b x + c through (x, ys_x), x = 1..len."""
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 1:
        raise ValueError("fit_quadratic takes a 1-D history; see fit_quadratic_columns")
    if ys.size < 3:
        raise ValueError("quadratic fit needs at least 3 points")
    a, b, c = _vandermonde_pinv(ys.size) @ ys
    return FitCoefficients(float(a), float(b), float(c))


def fit_quadratic_columns(ys: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized fit over the columns of a (npoints x ncols) history matrix."""
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 2 or ys.shape[0] < 3:
        raise ValueError("need a 2-D matrix with at least 3 rows")
    coeffs = _vandermonde_pinv(ys.shape[0]) @ ys
    return coeffs[0], coeffs[1], coeffs[2]


def evaluate_fit(fit: FitCoefficients, x: float) -> float:
    return fit.a * x * x + fit.b * x + fit.c


def nap_distance(i: int, cfg: PredictorConfig) -> float:
    """Decayed shared distance r^(i/p) * d0 + (p - 1) at absolute epoch i."""
    return cfg.r ** (i / cfg.p) * cfg.d0_init + (cfg.p - 1)


def adap_distance(fit: FitCoefficients, cfg: PredictorConfig) -> float:
    """Per-parameter distance from the fitted slope and curvature."""
    slope = 2.0 * fit.a * (cfg.p - 1) + fit.b
    curvature = 2.0 * fit.a
    d0 = cfg.k * abs(slope) / (abs(curvature) * cfg.alpha + cfg.epsilon)
    d = (1.0 - np.exp(-d0)) * cfg.n_max + (cfg.p - 1)
    # exp(-d0) > 0, so the true value sits strictly below n + p - 1; keep the
    # rounded result below it too
    return float(min(d, np.nextafter(cfg.n_max + cfg.p - 1, -np.inf)))


def _adap_distance_columns(a: np.ndarray, b: np.ndarray, cfg: PredictorConfig) -> np.ndarray:
    slope = 2.0 * a * (cfg.p - 1) + b
    d0 = cfg.k * np.abs(slope) / (2.0 * np.abs(a) * cfg.alpha + cfg.epsilon)
    d = (1.0 - np.exp(-d0)) * cfg.n_max + (cfg.p - 1)
    return np.minimum(d, np.nextafter(cfg.n_max + cfg.p - 1, -np.inf))


@dataclass(frozen=True)
class WeightWindow:
    """The last p-1 optimizer-produced weight vectors, most recent last."""

    samples: np.ndarray  # shape (p - 1, num_params)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise ValueError("window samples must form a 2-D matrix")
        object.__setattr__(self, "samples", samples)

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def num_params(self) -> int:
        return self.samples.shape[1]


def predict_weights(window: WeightWindow | np.ndarray, i: int, cfg: PredictorConfig) -> np.ndarray:
    """Extrapolate every parameter from its fitted history column.

    Non-finite predictions and jumps beyond MAX_PREDICTION_JUMP fall back to
    the parameter's current (most recent) weight. Fits and predictions are
    independent per parameter.
    """
    if cfg.method == "vanilla":
        raise ValueError("vanilla method never predicts")
    samples = window.samples if isinstance(window, WeightWindow) else np.asarray(window, dtype=float)
    if samples.ndim != 2:
        raise ValueError("window must be a (p-1, num_params) matrix")
    if samples.shape[0] != cfg.p - 1:
        raise ValueError(
            f"window holds {samples.shape[0]} samples, prediction needs {cfg.p - 1}"
        )
    a, b, c = fit_quadratic_columns(samples)
    if cfg.method == "nap":
        d = np.full(samples.shape[1], nap_distance(i, cfg))
    else:
        d = _adap_distance_columns(a, b, cfg)
    predicted = a * d * d + b * d + c
    current = samples[-1]
    bad = ~np.isfinite(predicted) | (np.abs(predicted - current) > MAX_PREDICTION_JUMP)
    return np.where(bad, current, predicted)
