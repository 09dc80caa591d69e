"""Thin plate spline interpolation of control-point displacements."""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_points

__all__ = ["ThinPlateSpline", "TpsWarp", "fit_tps", "apply_tps", "tps_kernel"]

_CHUNK = 1024


def tps_kernel(r: np.ndarray, d: int) -> np.ndarray:
    """Radial basis of the spline: ``r**2 log r`` in 2D, ``r`` in 3D."""
    r = np.asarray(r, dtype=float)
    if d == 2:
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = r[pos] ** 2 * np.log(r[pos])
        return out
    if d == 3:
        return r.copy()
    raise ValueError(f"thin plate splines are defined here for d in (2, 3), got {d}")


class ThinPlateSpline(TransformerMixin, BaseEstimator):
    """Elastic warp interpolating ``source -> target`` correspondences.

    The warp is ``f(p) = p + c + A p + sum_i w_i U(|p - s_i|)``. Coordinates
    are centred and scaled internally; with ``regularization = 0`` the
    interpolant is independent of that normalisation.

    Parameters
    ----------
    regularization : float, default=0.0
        Smoothing weight added to the kernel diagonal, in pixel units. Zero
        gives exact interpolation.

    Attributes
    ----------
    source_points_ : ndarray of shape (n, d)
        Control points the warp was fitted on.
    kernel_weights_ : ndarray of shape (n, d)
        Radial basis weights, in normalised coordinates.
    affine_ : ndarray of shape (d + 1, d)
        Affine part of the warp in pixels: row 0 is the translation and rows
        1.. the linear map, so the affine part of ``f(p)`` is
        ``affine_[0] + p @ affine_[1:]``.
    """

    def __init__(self, regularization: float = 0.0):
        self.regularization = regularization

    def fit(self, X, y):
        """Fit the warp taking control points `X` to `y`."""
        if self.regularization < 0:
            raise ValueError(f"regularization must be >= 0, got {self.regularization}")
        source = check_points(X, name="source", allow_empty=False)
        n, d = source.shape
        target = check_points(y, d, name="target", allow_empty=False)
        if target.shape[0] != n:
            raise ValueError(f"source has {n} points but target has {target.shape[0]}")
        if n < d + 1:
            raise ValueError(f"need at least {d + 1} control points in {d}D, got {n}")

        center = source.mean(axis=0)
        scale = float(np.sqrt(np.mean(np.sum((source - center) ** 2, axis=1)))) or 1.0
        normed = (source - center) / scale
        poly = np.hstack([np.ones((n, 1)), normed])
        rank = np.linalg.matrix_rank(poly)
        if rank < d + 1:
            raise ValueError(
                f"degenerate control points: affine block has rank {rank} < {d + 1} "
                f"(points are {'collinear' if d == 2 else 'coplanar'})"
            )

        # Kernel scales as r**2 in 2D and r in 3D.
        reg = self.regularization / (scale**2 if d == 2 else scale)
        system = np.zeros((n + d + 1, n + d + 1))
        system[:n, :n] = tps_kernel(cdist(normed, normed), d) + reg * np.eye(n)
        system[:n, n:] = poly
        system[n:, :n] = poly.T
        rhs = np.zeros((n + d + 1, d))
        rhs[:n] = target - source
        try:
            solution = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            rank = np.linalg.matrix_rank(system)
            raise ValueError(f"singular spline system: rank {rank} < {n + d + 1} (duplicate control points?)") from exc

        self.source_points_ = source
        self.kernel_weights_ = solution[:n]
        self._poly_weights = solution[n:]
        self._center = center
        self._scale = scale
        self.n_features_in_ = d
        return self

    @property
    def affine_(self) -> np.ndarray:
        check_is_fitted(self, "kernel_weights_")
        d = self.n_features_in_
        linear = np.eye(d) + self._poly_weights[1:] / self._scale
        offset = self._poly_weights[0] - self._center @ self._poly_weights[1:] / self._scale
        return np.vstack([offset, linear])

    def transform(self, X):
        """Warp points `X`, shape ``(q, d)``."""
        check_is_fitted(self, "kernel_weights_")
        d = self.n_features_in_
        points = check_points(X, d)
        normed_source = (self.source_points_ - self._center) / self._scale
        out = np.empty_like(points)
        for start in range(0, len(points), _CHUNK):
            chunk = points[start : start + _CHUNK]
            normed = (chunk - self._center) / self._scale
            kernel = tps_kernel(cdist(normed, normed_source), d)
            out[start : start + _CHUNK] = (
                chunk + self._poly_weights[0] + normed @ self._poly_weights[1:] + kernel @ self.kernel_weights_
            )
        return out

    def bending_energy(self) -> float:
        """``trace(W^T K W)`` in normalised coordinates (0 for affine warps)."""
        check_is_fitted(self, "kernel_weights_")
        normed = (self.source_points_ - self._center) / self._scale
        kernel = tps_kernel(cdist(normed, normed), self.n_features_in_)
        return float(np.trace(self.kernel_weights_.T @ kernel @ self.kernel_weights_))


TpsWarp = ThinPlateSpline


def fit_tps(source, target, regularization: float = 0.0) -> ThinPlateSpline:
    return ThinPlateSpline(regularization=regularization).fit(source, target)


def apply_tps(warp: ThinPlateSpline, points) -> np.ndarray:
    return warp.transform(points)
