"""Closed-form noise estimators.

For a data distribution that is a finite set of points the MMSE noise
prediction is available exactly, which makes every sampler property checkable
without a trained network. Estimators follow the scikit-learn convention:
hyperparameters in ``__init__``, data in ``fit``, fitted state with a trailing
underscore.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .schedule import NoiseSchedule, linear_schedule

# reference files named <stem>_cond.png hold the condition for <stem>.png
COND_SUFFIX = "_cond"


class NoiseEstimator(BaseEstimator):
    """Base class. Subclasses implement ``predict(h_t, t, condition=None)``."""

    def _require_fitted(self):
        # cheap stand-in for check_is_fitted; this sits on the sampling hot path
        if not hasattr(self, "item_shape_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def _alpha_bar(self, t: int) -> float:
        self._require_fitted()
        sched = self.schedule_
        t = sched.check_timestep(t)
        if t == 0:
            raise ValueError("noise prediction is undefined at t=0")
        return float(sched.alpha_bars[t])

    def _check_latent(self, h_t) -> np.ndarray:
        self._require_fitted()
        h_t = np.asarray(h_t, dtype=np.float64)
        if h_t.shape != self.item_shape_:
            raise ValueError(f"latent shape {h_t.shape} does not match fitted shape {self.item_shape_}")
        return h_t

    def predict(self, h_t, t, condition=None) -> np.ndarray:
        raise NotImplementedError


class SinglePointNoiseEstimator(NoiseEstimator):
    """Exact noise estimator for a point mass at ``x0``."""

    def __init__(self, schedule: NoiseSchedule | None = None):
        self.schedule = schedule

    def fit(self, X, y=None):
        self.schedule_ = self.schedule if self.schedule is not None else linear_schedule()
        self.x0_ = np.array(X, dtype=np.float64)
        self.item_shape_ = self.x0_.shape
        return self

    def predict(self, h_t, t, condition=None):
        h_t = self._check_latent(h_t)
        abar = self._alpha_bar(t)
        return (h_t - np.sqrt(abar) * self.x0_) / np.sqrt(1.0 - abar)


class MixtureNoiseEstimator(NoiseEstimator):
    """Exact MMSE noise estimator for an empirical distribution of points.

    The posterior over dataset points given ``h_t`` has log-weights
    ``-||h_t - sqrt(abar) x_i||^2 / (2 (1 - abar))``. When
    ``condition_bandwidth`` is set and a condition is passed to ``predict``,
    each weight is further multiplied by a Gaussian kernel in the distance
    between that condition and the point's stored condition.

    Parameters
    ----------
    schedule : NoiseSchedule
    condition_bandwidth : float or None
        Kernel width for condition reweighting; ``None`` ignores conditions.
    """

    def __init__(self, schedule: NoiseSchedule | None = None, condition_bandwidth: float | None = None):
        self.schedule = schedule
        self.condition_bandwidth = condition_bandwidth

    def fit(self, X, conditions=None):
        points = np.asarray(X, dtype=np.float64)
        if points.ndim < 1 or len(points) == 0:
            raise ValueError("dataset must contain at least one point")
        if self.condition_bandwidth is not None and not self.condition_bandwidth > 0:
            raise ValueError(f"condition_bandwidth must be > 0, got {self.condition_bandwidth}")
        self.schedule_ = self.schedule if self.schedule is not None else linear_schedule()
        self.points_ = points
        self.item_shape_ = points.shape[1:]
        if conditions is not None:
            conditions = np.asarray(conditions, dtype=np.float64)
            if len(conditions) != len(points):
                raise ValueError(
                    f"got {len(conditions)} conditions for {len(points)} dataset points"
                )
            self.conditions_ = conditions
        else:
            self.conditions_ = None
        return self

    def _log_weights(self, h_t, abar, condition):
        n = len(self.points_)
        diff = (h_t[None] - np.sqrt(abar) * self.points_).reshape(n, -1)
        logw = -np.einsum("ij,ij->i", diff, diff) / (2.0 * (1.0 - abar))
        if self.condition_bandwidth is not None and condition is not None and self.conditions_ is not None:
            cdiff = (np.asarray(condition, dtype=np.float64)[None] - self.conditions_).reshape(n, -1)
            logw = logw - np.einsum("ij,ij->i", cdiff, cdiff) / (2.0 * self.condition_bandwidth**2)
        return logw

    def posterior_weights(self, h_t, t, condition=None) -> np.ndarray:
        """Normalized posterior weights over the dataset points."""
        h_t = self._check_latent(h_t)
        logw = self._log_weights(h_t, self._alpha_bar(t), condition)
        w = np.exp(logw - logw.max())
        return w / w.sum()

    def posterior_mean(self, h_t, t, condition=None) -> np.ndarray:
        w = self.posterior_weights(h_t, t, condition)
        return np.tensordot(w, self.points_, axes=1)

    def predict(self, h_t, t, condition=None):
        h_t = self._check_latent(h_t)
        abar = self._alpha_bar(t)
        x0_hat = self.posterior_mean(h_t, t, condition)
        return (h_t - np.sqrt(abar) * x0_hat) / np.sqrt(1.0 - abar)


@dataclass
class PointDataset:
    """Dataset points ``x0`` with optional paired conditions."""

    points: list
    conditions: list | None = None
    names: list = field(default_factory=list)

    def __post_init__(self):
        if not self.points:
            raise ValueError("dataset must contain at least one point")
        shape = np.shape(self.points[0])
        if any(np.shape(p) != shape for p in self.points):
            raise ValueError("all dataset points must share one shape")
        if self.conditions is not None and len(self.conditions) != len(self.points):
            raise ValueError("conditions must pair one-to-one with points")

    def __len__(self):
        return len(self.points)


def load_point_dataset(directory, codec=None, condition_suffix: str = COND_SUFFIX) -> PointDataset:
    """Read every ``*.png`` in ``directory`` as one point.

    A file ``<stem><condition_suffix>.png`` is taken as the condition paired
    with ``<stem>.png``. Conditions are used only if every point has one.
    Images are passed through ``codec.encode`` when a codec is given.
    """
    from .image import load_png

    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    files = sorted(p for p in directory.glob("*.png") if not p.stem.endswith(condition_suffix))
    if not files:
        raise ValueError(f"no PNG files in {directory}")
    encode = codec.encode if codec is not None else (lambda x: x)
    points, conds = [], []
    for f in files:
        points.append(encode(load_png(f)))
        cond_path = f.with_name(f.stem + condition_suffix + ".png")
        conds.append(encode(load_png(cond_path)) if cond_path.is_file() else None)
    conditions = conds if all(c is not None for c in conds) else None
    return PointDataset(points, conditions, [f.stem for f in files])


def single_point_estimator(x0, schedule: NoiseSchedule) -> SinglePointNoiseEstimator:
    return SinglePointNoiseEstimator(schedule).fit(x0)


def mixture_estimator(data, schedule: NoiseSchedule, condition_bandwidth=None) -> MixtureNoiseEstimator:
    """Build a fitted :class:`MixtureNoiseEstimator` from a PointDataset or array."""
    if isinstance(data, PointDataset):
        return MixtureNoiseEstimator(schedule, condition_bandwidth).fit(data.points, data.conditions)
    return MixtureNoiseEstimator(schedule, condition_bandwidth).fit(data)
