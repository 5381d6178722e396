"""Independent reference implementations used to check the package.

Everything here is deliberately written with different algorithms than the
code under test: flood fill instead of union-find labeling, a boolean
millisecond timeline instead of the record gate's state machine, cmath DFT
instead of the Goertzel recurrence, exact rational arithmetic instead of
log-domain sums.
"""

import cmath
from fractions import Fraction


def flood_components(mask):
    """8-connected components by BFS flood fill over a 2-D 0/1 array.

    Returns a list of dicts (area, min_x, min_y, max_x, max_y, cx, cy)
    sorted by (min_x, min_y).
    """
    h = len(mask)
    w = len(mask[0]) if h else 0
    seen = [[False] * w for _ in range(h)]
    comps = []
    for sy in range(h):
        for sx in range(w):
            if not mask[sy][sx] or seen[sy][sx]:
                continue
            stack = [(sx, sy)]
            seen[sy][sx] = True
            pixels = []
            while stack:
                x, y = stack.pop()
                pixels.append((x, y))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        nx, ny = x + dx, y + dy
                        if 0 <= nx < w and 0 <= ny < h and \
                                mask[ny][nx] and not seen[ny][nx]:
                            seen[ny][nx] = True
                            stack.append((nx, ny))
            xs = [p[0] for p in pixels]
            ys = [p[1] for p in pixels]
            comps.append({
                "area": len(pixels),
                "min_x": min(xs), "min_y": min(ys),
                "max_x": max(xs), "max_y": max(ys),
                "cx": sum(xs) / len(pixels), "cy": sum(ys) / len(pixels),
            })
    comps.sort(key=lambda c: (c["min_x"], c["min_y"], c["max_x"], c["max_y"]))
    return comps


def gate_intervals(motion_times, pre_ms, hang_ms, start_ms, end_ms):
    """Clip intervals via a per-millisecond coverage timeline."""
    if not motion_times:
        return []
    covered = bytearray(end_ms - start_ms + 1)
    for t in motion_times:
        a = max(start_ms, t - pre_ms)
        b = min(end_ms, t + hang_ms)
        for i in range(a - start_ms, b - start_ms + 1):
            covered[i] = 1
    out = []
    i = 0
    n = len(covered)
    while i < n:
        if covered[i]:
            j = i
            while j + 1 < n and covered[j + 1]:
                j += 1
            out.append((i + start_ms, j + start_ms))
            i = j + 1
        else:
            i += 1
    return out


def dft_bin_power(samples, sample_rate, freq):
    """|X_k|^2 at the integer bin nearest freq, by direct complex sum."""
    n = len(samples)
    if n == 0:
        return 0.0
    k = round(freq * n / sample_rate)
    acc = 0j
    w = -2j * cmath.pi * k / n
    for i, x in enumerate(samples):
        acc += float(x) * cmath.exp(w * i)
    return abs(acc) ** 2


def binom_tail_exact(n, k, p0_num, p0_den):
    """P[X >= k] as an exact Fraction for rational p0 = p0_num/p0_den."""
    p = Fraction(p0_num, p0_den)
    q = 1 - p
    total = Fraction(0)
    coef = 1  # C(n, i), built incrementally
    for i in range(0, n + 1):
        if i >= k:
            total += coef * p ** i * q ** (n - i)
        coef = coef * (n - i) // (i + 1)
    return total
