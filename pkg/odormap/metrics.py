"""Pairwise distance matrices from rating profiles."""

from __future__ import annotations

import logging
from enum import Enum

import numpy as np
from scipy.spatial.distance import pdist, squareform

from odormap.core import DistanceMatrix, ItemSet, OdorMapError, ProfileMatrix

logger = logging.getLogger(__name__)


class DegenerateVectorError(OdorMapError):
    pass


class MetricKind(str, Enum):
    EUCLIDEAN = "euclidean"
    CORRELATION = "correlation"
    COSINE = "cosine"

    def __str__(self) -> str:
        return self.value


class Axis(str, Enum):
    ITEMS = "items"
    ATTRIBUTES = "attributes"

    def __str__(self) -> str:
        return self.value


def metric_tag(metric: MetricKind | str, axis: Axis | str) -> str:
    return f"{MetricKind(metric).value}-{Axis(axis).value}"


def _vectors(p: ProfileMatrix, axis: Axis) -> tuple[ItemSet, np.ndarray]:
    if axis is Axis.ITEMS:
        return p.items, p.values
    return p.attributes, p.values.T


def _check_vectors(labels: ItemSet, vectors: np.ndarray, metric: MetricKind):
    n, length = vectors.shape
    if n < 2:
        raise OdorMapError(f"need at least 2 vectors on the selected axis, got {n}")
    if length < 1:
        raise OdorMapError("vectors are empty")
    if metric is MetricKind.CORRELATION and length < 2:
        raise OdorMapError("correlation distance needs vectors of length >= 2")
    if metric is MetricKind.COSINE:
        zero = np.flatnonzero(~np.any(vectors != 0.0, axis=1))
        if zero.size:
            raise DegenerateVectorError(
                f"zero-norm vector under cosine: {labels[int(zero[0])]!r}"
            )
    if metric is MetricKind.CORRELATION:
        flat = np.flatnonzero(np.ptp(vectors, axis=1) == 0.0)
        if flat.size:
            raise DegenerateVectorError(
                f"zero-variance vector under correlation: {labels[int(flat[0])]!r}"
            )


def pairwise_distances(
    p: ProfileMatrix,
    axis: Axis | str = Axis.ITEMS,
    metric: MetricKind | str = MetricKind.COSINE,
) -> DistanceMatrix:
    """Distances between the rows (``items``) or columns (``attributes``) of
    a profile.

    euclidean: sqrt(sum (u_k - v_k)^2); cosine: 1 - u.v / (|u| |v|);
    correlation: 1 - Pearson r(u, v).
    """
    axis = Axis(axis)
    metric = MetricKind(metric)
    labels, vectors = _vectors(p, axis)
    _check_vectors(labels, vectors, metric)
    condensed = pdist(vectors, metric=metric.value)
    values = squareform(condensed, checks=False)
    logger.debug(f"{metric} distances over {len(labels)} {axis}")
    return DistanceMatrix.from_array(labels, values, metric_tag(metric, axis))
