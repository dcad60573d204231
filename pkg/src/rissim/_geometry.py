"""Compiled segment/prism intersection kernels.

Buildings are packed into flat arrays so numba can walk them without Python
objects: ``verts`` holds every footprint vertex, ``starts[i]:starts[i + 1]``
slices building ``i``, and ``bbox[i] = (xmin, ymin, xmax, ymax)``.
"""

import numpy as np
from numba import njit

# Length scale below which two crossing parameters are the same point.
_T_EPS = 1e-12
# Distance at which a 2-D point counts as lying on a footprint edge.
_EDGE_EPS = 1e-9


@njit(cache=True, nogil=True)
def _on_edge(px, py, verts, lo, hi):
    for k in range(lo, hi):
        j = k + 1 if k + 1 < hi else lo
        x1 = verts[k, 0]
        y1 = verts[k, 1]
        x2 = verts[j, 0]
        y2 = verts[j, 1]
        ex = x2 - x1
        ey = y2 - y1
        ll = ex * ex + ey * ey
        if ll == 0.0:
            continue
        s = ((px - x1) * ex + (py - y1) * ey) / ll
        if s < 0.0:
            s = 0.0
        elif s > 1.0:
            s = 1.0
        dx = px - (x1 + s * ex)
        dy = py - (y1 + s * ey)
        if dx * dx + dy * dy <= _EDGE_EPS * _EDGE_EPS:
            return True
    return False


@njit(cache=True, nogil=True)
def _inside_strict(px, py, verts, lo, hi):
    """Even-odd test; points on the boundary are outside."""
    if _on_edge(px, py, verts, lo, hi):
        return False
    inside = False
    for k in range(lo, hi):
        j = k + 1 if k + 1 < hi else lo
        xi = verts[k, 0]
        yi = verts[k, 1]
        xj = verts[j, 0]
        yj = verts[j, 1]
        if (yi > py) != (yj > py):
            xc = xi + (py - yi) * (xj - xi) / (yj - yi)
            if px < xc:
                inside = not inside
    return inside


@njit(cache=True, nogil=True)
def _clip_box(ax, ay, dx, dy, x0, y0, x1, y1):
    """Parameter range of the 2-D line a + t d inside a box, clipped to [0, 1]."""
    t0 = 0.0
    t1 = 1.0
    if dx == 0.0:
        if ax < x0 or ax > x1:
            return 1.0, 0.0
    else:
        u = (x0 - ax) / dx
        v = (x1 - ax) / dx
        if u > v:
            u, v = v, u
        t0 = max(t0, u)
        t1 = min(t1, v)
    if dy == 0.0:
        if ay < y0 or ay > y1:
            return 1.0, 0.0
    else:
        u = (y0 - ay) / dy
        v = (y1 - ay) / dy
        if u > v:
            u, v = v, u
        t0 = max(t0, u)
        t1 = min(t1, v)
    return t0, t1


@njit(cache=True, nogil=True)
def _trace_one(ax, ay, az, bx, by, bz, verts, starts, heights, losses, bbox, ts, stop=False):
    """Return (blocked, boundary crossings, penetration loss in dB).

    ``ts`` is scratch space of at least max vertices + 3 entries. With
    ``stop`` the walk ends at the first blocking building.
    """
    dx = bx - ax
    dy = by - ay
    dz = bz - az
    blocked = False
    crossings = 0
    loss = 0.0
    nb = heights.shape[0]
    for b in range(nb):
        h = heights[b]
        c0, c1 = _clip_box(ax, ay, dx, dy, bbox[b, 0], bbox[b, 1], bbox[b, 2], bbox[b, 3])
        if c0 > c1:
            continue
        if az + c0 * dz >= h and az + c1 * dz >= h:
            continue
        lo = starts[b]
        hi = starts[b + 1]
        n = 0
        ts[n] = 0.0
        n += 1
        ts[n] = 1.0
        n += 1
        for k in range(lo, hi):
            j = k + 1 if k + 1 < hi else lo
            ex = verts[j, 0] - verts[k, 0]
            ey = verts[j, 1] - verts[k, 1]
            den = dx * ey - dy * ex
            if den == 0.0:
                continue
            wx = verts[k, 0] - ax
            wy = verts[k, 1] - ay
            t = (wx * ey - wy * ex) / den
            s = (wx * dy - wy * dx) / den
            if t > 0.0 and t < 1.0 and s >= 0.0 and s <= 1.0:
                ts[n] = t
                n += 1
        # roof plane crossing
        if dz != 0.0:
            t = (h - az) / dz
            if t > 0.0 and t < 1.0:
                ts[n] = t
                n += 1
        # insertion sort, n is tiny
        for i in range(1, n):
            v = ts[i]
            j = i - 1
            while j >= 0 and ts[j] > v:
                ts[j + 1] = ts[j]
                j -= 1
            ts[j + 1] = v
        prev_in = False
        first = True
        for i in range(n - 1):
            t0 = ts[i]
            t1 = ts[i + 1]
            if t1 - t0 <= _T_EPS:
                continue
            tm = 0.5 * (t0 + t1)
            zm = az + tm * dz
            now_in = zm < h and _inside_strict(ax + tm * dx, ay + tm * dy, verts, lo, hi)
            if now_in:
                blocked = True
            if not first and now_in != prev_in:
                crossings += 1
                loss += losses[b]
            prev_in = now_in
            first = False
        if stop and blocked:
            break
    return blocked, crossings, loss


@njit(cache=True, nogil=True)
def _scratch(starts):
    m = 0
    for b in range(starts.shape[0] - 1):
        m = max(m, starts[b + 1] - starts[b])
    return np.empty(m + 3, dtype=np.float64)


@njit(cache=True, nogil=True)
def trace_segments(a, b, verts, starts, heights, losses, bbox):
    """Trace ``a[i] -> b[i]`` for every row."""
    n = a.shape[0]
    blocked = np.zeros(n, dtype=np.bool_)
    walls = np.zeros(n, dtype=np.int64)
    loss = np.zeros(n, dtype=np.float64)
    ts = _scratch(starts)
    for i in range(n):
        r = _trace_one(a[i, 0], a[i, 1], a[i, 2], b[i, 0], b[i, 1], b[i, 2],
                       verts, starts, heights, losses, bbox, ts)
        blocked[i] = r[0]
        walls[i] = r[1]
        loss[i] = r[2]
    return blocked, walls, loss


@njit(cache=True, nogil=True)
def clear_matrix(p, q, verts, starts, heights, losses, bbox):
    """``out[i, j]`` is True when the open segment p[i] -> q[j] is unobstructed."""
    m = p.shape[0]
    k = q.shape[0]
    out = np.zeros((m, k), dtype=np.bool_)
    ts = _scratch(starts)
    for i in range(m):
        for j in range(k):
            r = _trace_one(p[i, 0], p[i, 1], p[i, 2], q[j, 0], q[j, 1], q[j, 2],
                           verts, starts, heights, losses, bbox, ts, True)
            out[i, j] = not r[0]
    return out


@njit(cache=True, nogil=True)
def points_inside(pts, verts, starts, bbox, strict):
    """Index of the building whose footprint contains each 2-D point, or -1.

    With ``strict`` False, points on a footprint edge count as contained.
    """
    n = pts.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    nb = starts.shape[0] - 1
    for i in range(n):
        px = pts[i, 0]
        py = pts[i, 1]
        for b in range(nb):
            if px < bbox[b, 0] or px > bbox[b, 2] or py < bbox[b, 1] or py > bbox[b, 3]:
                continue
            lo = starts[b]
            hi = starts[b + 1]
            if _inside_strict(px, py, verts, lo, hi) or (
                    not strict and _on_edge(px, py, verts, lo, hi)):
                out[i] = b
                break
    return out


@njit(cache=True, nogil=True)
def loss_matrix(p, q, verts, starts, heights, losses, bbox):
    """Blocked flags and summed wall loss (dB) for every p[i] -> q[j] segment."""
    m = p.shape[0]
    k = q.shape[0]
    blocked = np.zeros((m, k), dtype=np.bool_)
    loss = np.zeros((m, k), dtype=np.float64)
    ts = _scratch(starts)
    for i in range(m):
        for j in range(k):
            r = _trace_one(p[i, 0], p[i, 1], p[i, 2], q[j, 0], q[j, 1], q[j, 2],
                           verts, starts, heights, losses, bbox, ts)
            blocked[i, j] = r[0]
            loss[i, j] = r[2]
    return blocked, loss
