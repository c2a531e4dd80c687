# app/services/eikonal_service.py
"""
First-order fast marching for |grad T| = f on a periodic lattice.

Distances grow from a set of frozen nodes; marching stops once the accepted
front passes `band`, and everything beyond is left at +inf.
"""
import heapq
import logging
import math

import numpy as np

from app.exceptions import InputError

logger = logging.getLogger(__name__)


def _neighbours(index, shape):
    for axis, n in enumerate(shape):
        for step in (-1, 1):
            j = list(index)
            j[axis] = (j[axis] + step) % n
            yield axis, tuple(j)


def _upwind_update(index, values, accepted, slowness, spacing, shape):
    """Solve sum_k ((T - a_k)/h_k)^2 = f^2 over the axes with an accepted upwind neighbour."""
    terms = []
    for axis, n in enumerate(shape):
        best = math.inf
        for step in (-1, 1):
            j = list(index)
            j[axis] = (j[axis] + step) % n
            j = tuple(j)
            if accepted[j] and values[j] < best:
                best = values[j]
        if best < math.inf:
            terms.append((best, spacing[axis]))
    if not terms:
        return math.inf
    terms.sort()
    f = slowness[index]
    T = math.inf
    a_sum = b_sum = c_sum = 0.0
    for a, h in terms:
        if T <= a:
            break
        w = 1.0 / (h * h)
        a_sum += w
        b_sum += w * a
        c_sum += w * a * a
        disc = b_sum * b_sum - a_sum * (c_sum - f * f)
        if disc < 0:
            # fall back to the one-sided update from the nearest neighbour
            T = min(T, terms[0][0] + f * terms[0][1])
            break
        T = (b_sum + math.sqrt(disc)) / a_sum
    return T


def fast_marching(initial, slowness, spacing, band=math.inf, mask=None):
    """
    Arrival times from the finite entries of `initial`.

    Args:
        initial: array of frozen distances, +inf where unknown.
        slowness: positive array, the local metric factor rho.
        spacing: lattice step per axis.
        band: stop once the accepted value exceeds this.
        mask: optional boolean array of nodes the front may enter.

    Returns:
        ndarray of the same shape, +inf outside the band.
    """
    values = np.array(initial, dtype=float)
    slowness = np.asarray(slowness, dtype=float)
    if values.shape != slowness.shape or len(spacing) != values.ndim:
        raise InputError("Eikonal inputs do not share one lattice")
    if np.any(slowness <= 0):
        raise InputError("Slowness must be positive")
    shape = values.shape
    accepted = np.isfinite(values)
    if mask is not None:
        # the front never enters nodes outside the mask
        blocked = ~np.asarray(mask, dtype=bool) & ~accepted
        values[blocked] = math.inf
    else:
        blocked = np.zeros(shape, dtype=bool)
    if not accepted.any():
        raise InputError("Fast marching needs at least one frozen node")

    heap = []
    trial = np.full(shape, math.inf)
    for index in zip(*np.nonzero(accepted)):
        for _, j in _neighbours(index, shape):
            if accepted[j] or blocked[j]:
                continue
            T = _upwind_update(j, values, accepted, slowness, spacing, shape)
            if T < trial[j]:
                trial[j] = T
                heapq.heappush(heap, (T, j))

    popped = 0
    while heap:
        T, index = heapq.heappop(heap)
        if accepted[index] or T > trial[index]:
            continue
        if T > band:
            break
        accepted[index] = True
        values[index] = T
        popped += 1
        for _, j in _neighbours(index, shape):
            if accepted[j] or blocked[j]:
                continue
            candidate = _upwind_update(j, values, accepted, slowness, spacing, shape)
            if candidate < trial[j]:
                trial[j] = candidate
                heapq.heappush(heap, (candidate, j))

    logger.debug("fast marching accepted %d nodes (band %.4g)", popped, band)
    return values
