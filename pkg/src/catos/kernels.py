"""Hot numeric kernels: connected-component labeling, disk rasterization,
single-bin tone power.

Every kernel has two interchangeable implementations:

* a loop-style version compiled with numba ``@njit`` (fast path), and
* a vectorized/run-based pure-numpy version (fallback).

The active backend is chosen at import time from the ``CATOS_BACKEND``
environment variable: ``numba``, ``numpy``, or ``auto`` (default; numba if
importable).  Both backends are kept importable side by side so tests can
assert parity and ``benchmarks/bench_kernels.py`` can time them against
each other.  All kernels are required to produce identical results on both
paths (bit-identical for the integer raster work, ~1e-9 relative for the
tone power).
"""

import math
import os

import numpy as np

_ENV = os.environ.get("CATOS_BACKEND", "auto").strip().lower()
if _ENV not in ("auto", "numba", "numpy"):
    raise ValueError(f"CATOS_BACKEND must be auto|numba|numpy, got {_ENV!r}")

try:
    if _ENV == "numpy":
        raise ImportError("numba disabled by CATOS_BACKEND=numpy")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    if _ENV == "numba":
        raise ImportError("CATOS_BACKEND=numba but numba is not importable")

ACTIVE_BACKEND = "numba" if HAVE_NUMBA else "numpy"

# Stats column layout shared by both label implementations.
# [area, min_x, min_y, max_x, max_y, sum_x, sum_y], one row per component.
_NCOLS = 7


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _np_label_stats(mask):
    """Run-based 8-connected labeling.

    Horizontal runs are extracted per row with vectorized diffs; union-find
    over runs happens at Python level, which is cheap because the number of
    runs is tiny compared to the number of pixels.
    """
    h, w = mask.shape
    row_y = []
    row_lo = []
    row_hi = []
    rows = []  # per row: (start index into flat run lists, count)
    for y in range(h):
        edges = np.diff(np.concatenate((np.zeros(1, np.int8),
                                        mask[y].astype(np.int8),
                                        np.zeros(1, np.int8))))
        st = np.flatnonzero(edges == 1)
        en = np.flatnonzero(edges == -1) - 1
        rows.append((len(row_y), len(st)))
        for a, b in zip(st, en):
            row_y.append(y)
            row_lo.append(int(a))
            row_hi.append(int(b))

    n = len(row_y)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for y in range(1, h):
        p0, pc = rows[y - 1]
        c0, cc = rows[y]
        i, j = 0, 0
        while i < pc and j < cc:
            pi, cj = p0 + i, c0 + j
            # 8-connectivity: runs touch if they overlap when widened by 1
            if row_lo[cj] <= row_hi[pi] + 1 and row_hi[cj] >= row_lo[pi] - 1:
                ra, rb = find(pi), find(cj)
                if ra != rb:
                    if rb < ra:
                        ra, rb = rb, ra
                    parent[rb] = ra
            if row_hi[pi] < row_hi[cj]:
                i += 1
            elif row_hi[cj] < row_hi[pi]:
                j += 1
            else:
                i += 1
                j += 1

    roots = {}
    stats = []
    for k in range(n):
        r = find(k)
        idx = roots.get(r)
        if idx is None:
            idx = len(stats)
            roots[r] = idx
            stats.append([0.0, float(w), float(h), -1.0, -1.0, 0.0, 0.0])
        s = stats[idx]
        lo, hi, y = row_lo[k], row_hi[k], row_y[k]
        length = hi - lo + 1
        s[0] += length
        s[1] = min(s[1], lo)
        s[2] = min(s[2], y)
        s[3] = max(s[3], hi)
        s[4] = max(s[4], y)
        s[5] += (lo + hi) * length / 2.0  # exact: sum of an integer range
        s[6] += y * float(length)
    if not stats:
        return np.empty((0, _NCOLS))
    return np.array(stats, dtype=np.float64)


def _np_render_disks(canvas, cx, cy, radius, value):
    h, w = canvas.shape
    for k in range(len(cx)):
        r = radius[k]
        x0 = max(0, int(math.floor(cx[k] - r)))
        x1 = min(w - 1, int(math.ceil(cx[k] + r)))
        y0 = max(0, int(math.floor(cy[k] - r)))
        y1 = min(h - 1, int(math.ceil(cy[k] + r)))
        if x1 < x0 or y1 < y0:
            continue
        ys, xs = np.ogrid[y0:y1 + 1, x0:x1 + 1]
        hit = (xs - cx[k]) ** 2 + (ys - cy[k]) ** 2 <= r * r
        region = canvas[y0:y1 + 1, x0:x1 + 1]
        region[hit] = value[k]
    return canvas


def _np_bin_power(x, k):
    """Power of the length-N DFT at integer bin k, via direct dot product."""
    n = x.size
    ph = np.exp((-2j * np.pi * k / n) * np.arange(n))
    z = np.dot(x, ph)
    return float(z.real * z.real + z.imag * z.imag)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _uf_find(parent, i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    @njit(cache=True)
    def _nb_label_stats(mask):
        h, w = mask.shape
        labels = np.zeros((h, w), np.int32)
        # a new provisional label needs an empty W neighbor, so <= h*ceil(w/2)
        parent = np.zeros((h * w + h) // 2 + 2, np.int32)
        nlab = 0
        for y in range(h):
            for x in range(w):
                if mask[y, x] == 0:
                    continue
                lab = 0
                if x > 0 and labels[y, x - 1] > 0:
                    lab = _uf_find(parent, labels[y, x - 1])
                if y > 0:
                    x0 = x - 1 if x > 0 else x
                    x1 = x + 1 if x < w - 1 else x
                    for xn in range(x0, x1 + 1):
                        ln = labels[y - 1, xn]
                        if ln > 0:
                            rn = _uf_find(parent, ln)
                            if lab == 0:
                                lab = rn
                            elif rn < lab:
                                parent[lab] = rn
                                lab = rn
                            elif rn > lab:
                                parent[rn] = lab
                if lab == 0:
                    nlab += 1
                    parent[nlab] = nlab
                    lab = nlab
                labels[y, x] = lab

        remap = np.zeros(nlab + 1, np.int32)
        nroots = 0
        for i in range(1, nlab + 1):
            if _uf_find(parent, i) == i:
                nroots += 1
                remap[i] = nroots
        stats = np.zeros((nroots, _NCOLS), np.float64)
        for i in range(nroots):
            stats[i, 1] = w
            stats[i, 2] = h
            stats[i, 3] = -1.0
            stats[i, 4] = -1.0
        for y in range(h):
            for x in range(w):
                lb = labels[y, x]
                if lb == 0:
                    continue
                i = remap[_uf_find(parent, lb)] - 1
                stats[i, 0] += 1.0
                if x < stats[i, 1]:
                    stats[i, 1] = x
                if y < stats[i, 2]:
                    stats[i, 2] = y
                if x > stats[i, 3]:
                    stats[i, 3] = x
                if y > stats[i, 4]:
                    stats[i, 4] = y
                stats[i, 5] += x
                stats[i, 6] += y
        return stats

    @njit(cache=True)
    def _nb_render_disks(canvas, cx, cy, radius, value):
        h, w = canvas.shape
        for k in range(cx.size):
            r = radius[k]
            r2 = r * r
            x0 = max(0, int(math.floor(cx[k] - r)))
            x1 = min(w - 1, int(math.ceil(cx[k] + r)))
            y0 = max(0, int(math.floor(cy[k] - r)))
            y1 = min(h - 1, int(math.ceil(cy[k] + r)))
            for y in range(y0, y1 + 1):
                dy = y - cy[k]
                for x in range(x0, x1 + 1):
                    dx = x - cx[k]
                    if dx * dx + dy * dy <= r2:
                        canvas[y, x] = value[k]
        return canvas

    @njit(cache=True)
    def _nb_bin_power(x, k):
        # Goertzel recurrence for the same DFT bin the numpy path computes
        n = x.size
        wr = 2.0 * math.pi * k / n
        c = 2.0 * math.cos(wr)
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            s0 = x[i] + c * s1 - s2
            s2 = s1
            s1 = s0
        return s1 * s1 + s2 * s2 - c * s1 * s2


IMPLEMENTATIONS = {"numpy": {
    "label_stats": _np_label_stats,
    "render_disks": _np_render_disks,
    "bin_power": _np_bin_power,
}}
if HAVE_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "label_stats": _nb_label_stats,
        "render_disks": _nb_render_disks,
        "bin_power": _nb_bin_power,
    }

_active = IMPLEMENTATIONS[ACTIVE_BACKEND]


# ---------------------------------------------------------------------------
# public API (backend-independent wrappers)
# ---------------------------------------------------------------------------

def connected_components(mask, min_area=1, backend=None):
    """8-connected components of a binary mask.

    Returns a float64 array of shape (n, 7) with columns
    (area, min_x, min_y, max_x, max_y, centroid_x, centroid_y), containing
    only components with area >= min_area, sorted by (min_x, min_y) with
    deterministic deeper tie-breaks.  Centroids are means of pixel indices,
    exact in float64.
    """
    impl = _active if backend is None else IMPLEMENTATIONS[backend]
    m = np.ascontiguousarray((np.asarray(mask) != 0).astype(np.uint8))
    raw = impl["label_stats"](m)
    if raw.shape[0] == 0:
        return np.empty((0, _NCOLS))
    raw = raw[raw[:, 0] >= min_area]
    if raw.shape[0] == 0:
        return np.empty((0, _NCOLS))
    out = raw.copy()
    out[:, 5] = raw[:, 5] / raw[:, 0]
    out[:, 6] = raw[:, 6] / raw[:, 0]
    order = np.lexsort((out[:, 0], out[:, 4], out[:, 3], out[:, 2], out[:, 1]))
    return out[order]


def render_disks(canvas, cx, cy, radius, value, backend=None):
    """Rasterize filled disks onto a uint8 canvas, in order (later wins)."""
    impl = _active if backend is None else IMPLEMENTATIONS[backend]
    cx = np.asarray(cx, np.float64)
    cy = np.asarray(cy, np.float64)
    radius = np.asarray(radius, np.float64)
    value = np.asarray(value, canvas.dtype)
    return impl["render_disks"](canvas, cx, cy, radius, value)


def tone_power(samples, sample_rate, freq, backend=None):
    """Signal power at the DFT bin nearest to freq (Hz).

    The bin is k = round(freq * N / sample_rate); both backends compute the
    same |X_k|^2 quantity.
    """
    impl = _active if backend is None else IMPLEMENTATIONS[backend]
    x = np.ascontiguousarray(samples, np.float64)
    if x.size == 0:
        return 0.0
    k = int(round(freq * x.size / sample_rate))
    return float(impl["bin_power"](x, k))
