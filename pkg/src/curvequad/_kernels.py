"""Compiled inner loops for Bezier evaluation, closest point and bounds.

Arrays are ``(n+1, 2)`` float64 control nets. Everything here is pure and
allocation-light; the public wrappers live in :mod:`curvequad.curves` and
:mod:`curvequad.hausdorff`.
"""

import math

import numba as nb
import numpy as np

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@nb.njit(cache=True)
def binomials(n):
    out = np.empty(n + 1)
    out[0] = 1.0
    for i in range(1, n + 1):
        out[i] = out[i - 1] * (n - i + 1) / i
    return out


@nb.njit(cache=True)
def eval_point(ctrl, t):
    n = ctrl.shape[0] - 1
    s = 1.0 - t
    x = 0.0
    y = 0.0
    # Bernstein sum with running powers
    coef = 1.0
    tp = 1.0
    sp = s ** n if n > 0 else 1.0
    for i in range(n + 1):
        if i > 0:
            coef = coef * (n - i + 1) / i
            tp *= t
            sp = s ** (n - i)
        b = coef * tp * sp
        x += b * ctrl[i, 0]
        y += b * ctrl[i, 1]
    return x, y


@nb.njit(cache=True)
def eval_deriv(ctrl, t, order):
    n = ctrl.shape[0] - 1
    if order > n:
        return 0.0, 0.0
    pts = ctrl.copy()
    m = n
    factor = 1.0
    for _ in range(order):
        for i in range(m):
            pts[i, 0] = pts[i + 1, 0] - pts[i, 0]
            pts[i, 1] = pts[i + 1, 1] - pts[i, 1]
        factor *= m
        m -= 1
    x, y = eval_point(pts[: m + 1], t)
    return factor * x, factor * y


@nb.njit(cache=True)
def split(ctrl, t):
    n = ctrl.shape[0] - 1
    left = np.empty_like(ctrl)
    right = np.empty_like(ctrl)
    work = ctrl.copy()
    left[0] = work[0]
    right[n] = work[n]
    for r in range(1, n + 1):
        for i in range(n - r + 1):
            work[i, 0] = (1.0 - t) * work[i, 0] + t * work[i + 1, 0]
            work[i, 1] = (1.0 - t) * work[i, 1] + t * work[i + 1, 1]
        left[r] = work[0]
        right[n - r] = work[n - r]
    return left, right


@nb.njit(cache=True)
def scale_of(ctrl):
    xmin = ctrl[:, 0].min()
    xmax = ctrl[:, 0].max()
    ymin = ctrl[:, 1].min()
    ymax = ctrl[:, 1].max()
    return math.hypot(xmax - xmin, ymax - ymin)


@nb.njit(cache=True)
def _newton(ctrl, px, py, t, lo, hi):
    for _ in range(30):
        cx, cy = eval_point(ctrl, t)
        d1x, d1y = eval_deriv(ctrl, t, 1)
        d2x, d2y = eval_deriv(ctrl, t, 2)
        rx = cx - px
        ry = cy - py
        g = rx * d1x + ry * d1y
        h = d1x * d1x + d1y * d1y + rx * d2x + ry * d2y
        if h <= 0.0:
            break
        tn = t - g / h
        if tn < lo:
            tn = lo
        elif tn > hi:
            tn = hi
        if abs(tn - t) < 1e-15:
            t = tn
            break
        t = tn
    return t


@nb.njit(cache=True)
def _dist(ctrl, px, py, t):
    x, y = eval_point(ctrl, t)
    return math.hypot(x - px, y - py)


@nb.njit(cache=True)
def closest_point(ctrl, px, py):
    m = 65
    ts = np.empty(m)
    ds = np.empty(m)
    for i in range(m):
        ts[i] = i / (m - 1)
        ds[i] = _dist(ctrl, px, py, ts[i])
    k = 0
    for i in range(1, m):
        if ds[i] < ds[k]:
            k = i
    best_t = ts[k]
    best_d = ds[k]
    tol = 1e-12 * max(scale_of(ctrl), 1e-300)

    for i in range(m):
        left = ds[i - 1] if i > 0 else np.inf
        right = ds[i + 1] if i < m - 1 else np.inf
        if ds[i] <= left and ds[i] <= right:
            lo = ts[max(i - 1, 0)]
            hi = ts[min(i + 1, m - 1)]
            t = _newton(ctrl, px, py, ts[i], lo, hi)
            d = _dist(ctrl, px, py, t)
            if d < best_d:
                best_t = t
                best_d = d

    # subdivision pruning by control-box distance
    n1 = ctrl.shape[0]
    max_depth = 4
    cap = 2 * (max_depth + 1) + 2
    stack_ctrl = np.empty((cap, n1, 2))
    stack_a = np.empty(cap)
    stack_b = np.empty(cap)
    stack_d = np.empty(cap, dtype=np.int64)
    top = 0
    stack_ctrl[0] = ctrl
    stack_a[0] = 0.0
    stack_b[0] = 1.0
    stack_d[0] = 0
    top = 1
    while top > 0:
        top -= 1
        c = stack_ctrl[top].copy()
        a = stack_a[top]
        b = stack_b[top]
        depth = stack_d[top]
        gx = max(c[:, 0].min() - px, px - c[:, 0].max(), 0.0)
        gy = max(c[:, 1].min() - py, py - c[:, 1].max(), 0.0)
        if math.hypot(gx, gy) >= best_d - tol:
            continue
        mid = 0.5 * (a + b)
        if depth >= max_depth:
            t = _newton(ctrl, px, py, mid, a, b)
            d = _dist(ctrl, px, py, t)
            if d < best_d:
                best_t = t
                best_d = d
            continue
        lc, rc = split(c, 0.5)
        stack_ctrl[top] = lc
        stack_a[top] = a
        stack_b[top] = mid
        stack_d[top] = depth + 1
        top += 1
        stack_ctrl[top] = rc
        stack_a[top] = mid
        stack_b[top] = b
        stack_d[top] = depth + 1
        top += 1
    return best_t, best_d


@nb.njit(cache=True)
def ctrl_dist(a, b):
    best = 0.0
    for i in range(a.shape[0]):
        d = math.hypot(a[i, 0] - b[i, 0], a[i, 1] - b[i, 1])
        if d > best:
            best = d
    return best


@nb.njit(cache=True)
def one_sided(c1, c2, eps, k0):
    """Returns (bound, iterations, history[0..iterations])."""
    n1 = c1.shape[0]
    cap = k0 + 2
    p1 = np.empty((cap, n1, 2))
    p2 = np.empty((cap, n1, 2))
    dms = np.empty(cap)
    history = np.empty(k0 + 1)
    p1[0] = c1
    p2[0] = c2
    dms[0] = ctrl_dist(c1, c2)
    count = 1
    bound = dms[0]
    history[0] = bound
    j = 0
    k = 0
    end_tol = 1e-12
    while bound > eps and k < k0:
        k += 1
        a = p1[j].copy()
        c = p2[j].copy()
        a0, a1 = split(a, 0.5)
        t, _ = closest_point(c, a0[n1 - 1, 0], a0[n1 - 1, 1])
        # shift tail right by one to make room at j+1
        for q in range(count, j + 1, -1):
            p1[q] = p1[q - 1]
            p2[q] = p2[q - 1]
            dms[q] = dms[q - 1]
        count += 1
        p1[j] = a0
        p1[j + 1] = a1
        if t <= end_tol or t >= 1.0 - end_tol:
            p2[j] = c
            p2[j + 1] = c
        else:
            c0, c1_ = split(c, t)
            p2[j] = c0
            p2[j + 1] = c1_
        dms[j] = ctrl_dist(p1[j], p2[j])
        dms[j + 1] = ctrl_dist(p1[j + 1], p2[j + 1])
        jm = 0
        for q in range(1, count):
            if dms[q] > dms[jm]:
                jm = q
        j = jm
        if dms[j] < bound:
            bound = dms[j]
        history[k] = bound
    return bound, k, history[: k + 1].copy()


@nb.njit(cache=True)
def gl_length(ctrl, a, b, xs, ws):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    total = 0.0
    for q in range(xs.shape[0]):
        dx, dy = eval_deriv(ctrl, half * xs[q] + mid, 1)
        total += ws[q] * math.hypot(dx, dy)
    return half * total


@nb.njit(cache=True)
def adaptive_length(ctrl, a, b, rtol, xs, ws):
    # explicit stack; each entry (a, b, whole, depth)
    sa = np.empty(128)
    sb = np.empty(128)
    sw = np.empty(128)
    sd = np.empty(128, dtype=np.int64)
    sa[0] = a
    sb[0] = b
    sw[0] = gl_length(ctrl, a, b, xs, ws)
    sd[0] = 0
    top = 1
    total = 0.0
    while top > 0:
        top -= 1
        lo = sa[top]
        hi = sb[top]
        whole = sw[top]
        depth = sd[top]
        mid = 0.5 * (lo + hi)
        left = gl_length(ctrl, lo, mid, xs, ws)
        right = gl_length(ctrl, mid, hi, xs, ws)
        if depth >= 30 or top >= 124 or abs(left + right - whole) <= rtol * max(abs(left + right), 1e-300):
            total += left + right
        else:
            sa[top] = lo
            sb[top] = mid
            sw[top] = left
            sd[top] = depth + 1
            top += 1
            sa[top] = mid
            sb[top] = hi
            sw[top] = right
            sd[top] = depth + 1
            top += 1
    return total


@nb.njit(cache=True)
def t_of_s(ctrl, knots, cum, s, xs, ws):
    length = cum[cum.shape[0] - 1]
    if s <= 0.0:
        return 0.0
    if s >= length:
        return 1.0
    nk = knots.shape[0] - 1
    k = np.searchsorted(cum, s, side="right") - 1
    k = min(max(k, 0), nk - 1)
    lo = knots[k]
    hi = knots[k + 1]
    s_lo = cum[k]
    s_hi = cum[k + 1]
    base = knots[k]
    t = lo + (hi - lo) * (s - s_lo) / max(s_hi - s_lo, 1e-300)
    for _ in range(60):
        f = s_lo + gl_length(ctrl, base, t, xs, ws) - s
        if abs(f) <= 1e-13 * max(length, 1e-300):
            break
        if f > 0:
            hi = t
        else:
            lo = t
        dx, dy = eval_deriv(ctrl, t, 1)
        d = math.hypot(dx, dy)
        step = t - f / d if d > 0 else 0.5 * (lo + hi)
        t = step if (lo < step < hi) else 0.5 * (lo + hi)
    return t


@nb.njit(cache=True)
def curvature_at(ctrl, t, tiny):
    d1x, d1y = eval_deriv(ctrl, t, 1)
    speed = math.hypot(d1x, d1y)
    if speed < tiny:
        return 0.0
    d2x, d2y = eval_deriv(ctrl, t, 2)
    return abs(d1x * d2y - d1y * d2x) / speed ** 3


@nb.njit(cache=True)
def density_moments(ctrl, knots, cum, t0, t1, s_start, xs, ws, tiny):
    """(int rho ds, int s rho ds) on [t0, t1]; s measured from s_start at t=0."""
    panels = max(1, int(math.ceil((t1 - t0) * 8)))
    m0 = 0.0
    m1 = 0.0
    nk = knots.shape[0] - 1
    for p in range(panels):
        lo = t0 + (t1 - t0) * p / panels
        hi = t0 + (t1 - t0) * (p + 1) / panels
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        for q in range(xs.shape[0]):
            t = half * xs[q] + mid
            dx, dy = eval_deriv(ctrl, t, 1)
            speed = math.hypot(dx, dy)
            rho = 1.0 + curvature_at(ctrl, t, tiny)
            k = min(int(t * nk), nk - 1)
            s = s_start + cum[k] + gl_length(ctrl, knots[k], t, xs, ws)
            w = half * ws[q] * speed * rho
            m0 += w
            m1 += w * s
    return m0, m1
