"""Numba geometry primitives shared by the tree, the builder and the passes."""

import numpy as np
from numba import njit

# relative slack on bounding-volume radii, keeps pruning conservative under rounding
PRUNE_SLACK = 1.0 + 1e-12


@njit(cache=True, inline="always")
def min_image(d, length, periodic):
    if periodic:
        half = 0.5 * length
        if d > half:
            d -= length
        elif d < -half:
            d += length
    return d


@njit(cache=True, inline="always")
def pair_delta(xa, ya, za, xb, yb, zb, box_len, periodic):
    dx = min_image(xa - xb, box_len[0], periodic[0])
    dy = min_image(ya - yb, box_len[1], periodic[1])
    dz = min_image(za - zb, box_len[2], periodic[2])
    return dx, dy, dz, dx * dx + dy * dy + dz * dz


@njit(cache=True, inline="always")
def _axis_gap(alo, ahi, blo, bhi):
    g = blo - ahi
    g2 = alo - bhi
    if g2 > g:
        g = g2
    if g < 0.0:
        g = 0.0
    return g


@njit(cache=True, inline="always")
def _axis_gap_periodic(alo, ahi, blo, bhi, length, periodic):
    g = _axis_gap(alo, ahi, blo, bhi)
    if periodic and g > 0.0:
        gp = _axis_gap(alo, ahi, blo + length, bhi + length)
        gm = _axis_gap(alo, ahi, blo - length, bhi - length)
        if gp < g:
            g = gp
        if gm < g:
            g = gm
    return g


@njit(cache=True)
def aabb_dist2(alo, ahi, blo, bhi, box_len, periodic):
    """Squared distance between two boxes, per-axis minimum image on periodic axes."""
    s = 0.0
    for d in range(3):
        g = _axis_gap_periodic(alo[d], ahi[d], blo[d], bhi[d], box_len[d], periodic[d])
        s += g * g
    return s


@njit(cache=True)
def point_aabb_dist2(p, blo, bhi, box_len, periodic):
    s = 0.0
    for d in range(3):
        g = _axis_gap_periodic(p[d], p[d], blo[d], bhi[d], box_len[d], periodic[d])
        s += g * g
    return s


def box_arrays(box):
    return (np.ascontiguousarray(box.lengths, dtype=np.float64),
            np.ascontiguousarray(box.periodic_array))
