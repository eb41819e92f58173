"""Compiled inner loops: RK4 rollouts, collision predicates, extension attempts.

Everything here works on plain float64/int64 arrays so it can be jitted.
Collision predicates only need a pose, which is always the first three state
components: (x, y, heading) in 2D and (x, y, z) in 3D. Footprints are
``(kind, a, b)``; circle/sphere use ``a`` as radius, the oriented rectangle
uses ``a`` as length along the heading and ``b`` as width. Moving obstacles
(committed trajectories and constraint slices) share one packed layout, see
``geometry.ValidityContext``.

Hot loops index 2D buffers by row instead of slicing, which keeps numba from
materialising array views at every step.
"""

import math

import numpy as np
from numba import njit

UC, SOC, DI = 0, 1, 2
CIRCLE, RECT, SPHERE = 0, 1, 2

PI = math.pi
TWO_PI = 2.0 * math.pi


@njit(cache=True)
def wrap_angle(a):
    if a > PI or a <= -PI:
        a -= TWO_PI * math.floor((a + PI) / TWO_PI)
        if a <= -PI:
            a += TWO_PI
        elif a > PI:
            a -= TWO_PI
    return a


@njit(cache=True)
def derivative(sys, wb, x, u, out):
    if sys == UC:
        out[0] = u[0] * math.cos(x[2])
        out[1] = u[0] * math.sin(x[2])
        out[2] = u[1]
    elif sys == SOC:
        out[0] = x[3] * math.cos(x[2])
        out[1] = x[3] * math.sin(x[2])
        out[2] = x[3] / wb * math.tan(x[4])
        out[3] = u[0]
        out[4] = u[1]
    else:
        out[0] = x[3]
        out[1] = x[4]
        out[2] = x[5]
        out[3] = u[0]
        out[4] = u[1]
        out[5] = u[2]


@njit(cache=True)
def step_rows(sys, wb, dt, buf, i, u, j):
    """Classic RK4 step from ``buf[i]`` into ``buf[j]`` with the heading wrapped to (-pi, pi]."""
    h = 0.5 * dt
    if sys == UC:
        x = buf[i, 0]
        y = buf[i, 1]
        th = buf[i, 2]
        v = u[0]
        w = u[1]
        dx1 = v * math.cos(th)
        dy1 = v * math.sin(th)
        t2 = th + h * w
        dx2 = v * math.cos(t2)
        dy2 = v * math.sin(t2)
        t3 = th + h * w
        dx3 = v * math.cos(t3)
        dy3 = v * math.sin(t3)
        t4 = th + dt * w
        dx4 = v * math.cos(t4)
        dy4 = v * math.sin(t4)
        buf[j, 0] = x + dt / 6.0 * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        buf[j, 1] = y + dt / 6.0 * (dy1 + 2.0 * dy2 + 2.0 * dy3 + dy4)
        buf[j, 2] = wrap_angle(th + dt / 6.0 * (w + 2.0 * w + 2.0 * w + w))
    elif sys == SOC:
        x = buf[i, 0]
        y = buf[i, 1]
        th = buf[i, 2]
        v = buf[i, 3]
        ph = buf[i, 4]
        a = u[0]
        w = u[1]
        dx1 = v * math.cos(th)
        dy1 = v * math.sin(th)
        dt1 = v / wb * math.tan(ph)
        th2 = th + h * dt1
        v2 = v + h * a
        ph2 = ph + h * w
        dx2 = v2 * math.cos(th2)
        dy2 = v2 * math.sin(th2)
        dt2 = v2 / wb * math.tan(ph2)
        th3 = th + h * dt2
        v3 = v + h * a
        ph3 = ph + h * w
        dx3 = v3 * math.cos(th3)
        dy3 = v3 * math.sin(th3)
        dt3 = v3 / wb * math.tan(ph3)
        th4 = th + dt * dt3
        v4 = v + dt * a
        ph4 = ph + dt * w
        dx4 = v4 * math.cos(th4)
        dy4 = v4 * math.sin(th4)
        dt4 = v4 / wb * math.tan(ph4)
        buf[j, 0] = x + dt / 6.0 * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        buf[j, 1] = y + dt / 6.0 * (dy1 + 2.0 * dy2 + 2.0 * dy3 + dy4)
        buf[j, 2] = wrap_angle(th + dt / 6.0 * (dt1 + 2.0 * dt2 + 2.0 * dt3 + dt4))
        buf[j, 3] = v + dt / 6.0 * (a + 2.0 * a + 2.0 * a + a)
        buf[j, 4] = ph + dt / 6.0 * (w + 2.0 * w + 2.0 * w + w)
    else:
        for c in range(3):
            p = buf[i, c]
            v = buf[i, c + 3]
            a = u[c]
            # k1..k4 for position are v, v + h a, v + h a, v + dt a
            buf[j, c] = p + dt / 6.0 * (v + 2.0 * (v + h * a) + 2.0 * (v + h * a) + (v + dt * a))
            buf[j, c + 3] = v + dt / 6.0 * (a + 2.0 * a + 2.0 * a + a)


@njit(cache=True)
def rollout(sys, wb, dt, x0, u, nsteps):
    n = x0.size
    states = np.empty((nsteps + 1, n))
    for c in range(n):
        states[0, c] = x0[c]
    for k in range(nsteps):
        step_rows(sys, wb, dt, states, k, u, k + 1)
    return states


@njit(cache=True)
def row_in_bounds(buf, r, s_lo, s_hi):
    for i in range(s_lo.size):
        v = buf[r, i]
        if v < s_lo[i] or v > s_hi[i]:
            return False
    return True


@njit(cache=True)
def batch_rollout_terminal(sys, wb, dt, x0s, us, steps, s_lo, s_hi):
    """Propagate many edges from origin starts; report feasibility and terminal state."""
    m = x0s.shape[0]
    n = x0s.shape[1]
    ok = np.ones(m, dtype=np.bool_)
    xf = np.empty((m, n))
    for j in range(m):
        states = rollout(sys, wb, dt, x0s[j], us[j], steps[j])
        for k in range(states.shape[0]):
            if not row_in_bounds(states, k, s_lo, s_hi):
                ok[j] = False
                break
        for c in range(n):
            xf[j, c] = states[steps[j], c]
    return ok, xf


@njit(cache=True)
def weighted_dist(a, b, w, wrap):
    s = 0.0
    for i in range(a.size):
        d = a[i] - b[i]
        if wrap[i]:
            d = abs(d) % TWO_PI
            if d > PI:
                d = TWO_PI - d
        d *= w[i]
        s += d * d
    return math.sqrt(s)


@njit(cache=True)
def nearest(nodes, count, target, w, wrap):
    best = 0
    best_d = np.inf
    n = target.size
    for i in range(count):
        s = 0.0
        for c in range(n):
            d = nodes[i, c] - target[c]
            if wrap[c]:
                d = abs(d) % TWO_PI
                if d > PI:
                    d = TWO_PI - d
            d *= w[c]
            s += d * d
            if s >= best_d:
                break
        if s < best_d:
            best_d = s
            best = i
    return best


# ---------------------------------------------------------------- geometry


@njit(cache=True)
def _rect_box_overlap(cx, cy, th, l, w, lo0, lo1, hi0, hi1):
    c = math.cos(th)
    s = math.sin(th)
    hx = 0.5 * l * abs(c) + 0.5 * w * abs(s)
    hy = 0.5 * l * abs(s) + 0.5 * w * abs(c)
    bhx = 0.5 * (hi0 - lo0)
    bhy = 0.5 * (hi1 - lo1)
    dx = lo0 + bhx - cx
    dy = lo1 + bhy - cy
    if abs(dx) >= hx + bhx or abs(dy) >= hy + bhy:
        return False
    if abs(dx * c + dy * s) >= 0.5 * l + bhx * abs(c) + bhy * abs(s):
        return False
    if abs(-dx * s + dy * c) >= 0.5 * w + bhx * abs(s) + bhy * abs(c):
        return False
    return True


@njit(cache=True)
def static_hit(p0, p1, p2, kind, fa, fb, ws_lo, ws_hi, obs_lo, obs_hi):
    """Pose (p0, p1, p2) overlaps an obstacle box or leaves the workspace."""
    if kind == RECT:
        c = math.cos(p2)
        s = math.sin(p2)
        hx = 0.5 * fa * abs(c) + 0.5 * fb * abs(s)
        hy = 0.5 * fa * abs(s) + 0.5 * fb * abs(c)
        if p0 - hx < ws_lo[0] or p0 + hx > ws_hi[0] or p1 - hy < ws_lo[1] or p1 + hy > ws_hi[1]:
            return True
        for m in range(obs_lo.shape[0]):
            if (p0 + hx <= obs_lo[m, 0] or p0 - hx >= obs_hi[m, 0]
                    or p1 + hy <= obs_lo[m, 1] or p1 - hy >= obs_hi[m, 1]):
                continue
            if _rect_box_overlap(p0, p1, p2, fa, fb, obs_lo[m, 0], obs_lo[m, 1],
                                 obs_hi[m, 0], obs_hi[m, 1]):
                return True
        return False
    r = fa
    if p0 - r < ws_lo[0] or p0 + r > ws_hi[0] or p1 - r < ws_lo[1] or p1 + r > ws_hi[1]:
        return True
    three = kind == SPHERE
    if three and (p2 - r < ws_lo[2] or p2 + r > ws_hi[2]):
        return True
    r2 = r * r
    for m in range(obs_lo.shape[0]):
        q = 0.0
        if p0 < obs_lo[m, 0]:
            q = obs_lo[m, 0] - p0
        elif p0 > obs_hi[m, 0]:
            q = p0 - obs_hi[m, 0]
        s = q * q
        if s >= r2:
            continue
        q = 0.0
        if p1 < obs_lo[m, 1]:
            q = obs_lo[m, 1] - p1
        elif p1 > obs_hi[m, 1]:
            q = p1 - obs_hi[m, 1]
        s += q * q
        if s >= r2:
            continue
        if three:
            q = 0.0
            if p2 < obs_lo[m, 2]:
                q = obs_lo[m, 2] - p2
            elif p2 > obs_hi[m, 2]:
                q = p2 - obs_hi[m, 2]
            s += q * q
        if s < r2:
            return True
    return False


@njit(cache=True)
def _circle_rect_hit(px, py, r, rx, ry, th, l, w):
    c = math.cos(th)
    s = math.sin(th)
    dx = px - rx
    dy = py - ry
    lx = dx * c + dy * s
    ly = -dx * s + dy * c
    qx = min(max(lx, -0.5 * l), 0.5 * l)
    qy = min(max(ly, -0.5 * w), 0.5 * w)
    ex = lx - qx
    ey = ly - qy
    return ex * ex + ey * ey < r * r


@njit(cache=True)
def _rect_rect_hit(xa, ya, ta, la, wa, xb, yb, tb, lb, wb):
    dx = xb - xa
    dy = yb - ya
    ca = math.cos(ta)
    sa = math.sin(ta)
    cb = math.cos(tb)
    sb = math.sin(tb)
    # relative rotation terms shared by all four axes
    cab = abs(ca * cb + sa * sb)
    sab = abs(ca * sb - sa * cb)
    rb = 0.5 * lb * cab + 0.5 * wb * sab
    if abs(dx * ca + dy * sa) >= 0.5 * la + rb:
        return False
    rb = 0.5 * lb * sab + 0.5 * wb * cab
    if abs(-dx * sa + dy * ca) >= 0.5 * wa + rb:
        return False
    ra = 0.5 * la * cab + 0.5 * wa * sab
    if abs(dx * cb + dy * sb) >= ra + 0.5 * lb:
        return False
    ra = 0.5 * la * sab + 0.5 * wa * cab
    if abs(-dx * sb + dy * cb) >= ra + 0.5 * wb:
        return False
    return True


@njit(cache=True)
def pair_hit(a0, a1, a2, ka, fa, ga, b0, b1, b2, kb, fb, gb):
    if ka == RECT and kb == RECT:
        return _rect_rect_hit(a0, a1, a2, fa, ga, b0, b1, b2, fb, gb)
    if ka == RECT:
        return _circle_rect_hit(b0, b1, fb, a0, a1, a2, fa, ga)
    if kb == RECT:
        return _circle_rect_hit(a0, a1, fa, b0, b1, b2, fb, gb)
    d0 = a0 - b0
    d1 = a1 - b1
    s = d0 * d0 + d1 * d1
    if ka == SPHERE:
        d2 = a2 - b2
        s += d2 * d2
    rr = fa + fb
    return s < rr * rr


@njit(cache=True)
def moving_hit(p0, p1, p2, k, kind, fa, fb, rad, mo_states, mo_k0, mo_len, mo_hold, mo_fp,
               mo_lo, mo_hi):
    three = mo_lo.shape[1] == 3
    for m in range(mo_k0.size):
        idx = k - mo_k0[m]
        if idx < 0:
            continue
        if idx >= mo_len[m]:
            if not mo_hold[m]:
                continue
            idx = mo_len[m] - 1
        if p0 + rad <= mo_lo[m, 0] or p0 - rad >= mo_hi[m, 0]:
            continue
        if p1 + rad <= mo_lo[m, 1] or p1 - rad >= mo_hi[m, 1]:
            continue
        if three and (p2 + rad <= mo_lo[m, 2] or p2 - rad >= mo_hi[m, 2]):
            continue
        if pair_hit(p0, p1, p2, kind, fa, fb,
                    mo_states[m, idx, 0], mo_states[m, idx, 1], mo_states[m, idx, 2],
                    mo_fp[m, 0], mo_fp[m, 1], mo_fp[m, 2]):
            return True
    return False


@njit(cache=True)
def row_valid(buf, r, k, s_lo, s_hi, fp, rad, ws_lo, ws_hi, obs_lo, obs_hi,
              mo_states, mo_k0, mo_len, mo_hold, mo_fp, mo_lo, mo_hi):
    """State ``buf[r]`` at absolute step ``k``: bounds, static scene, moving obstacles."""
    if not row_in_bounds(buf, r, s_lo, s_hi):
        return False
    p0 = buf[r, 0]
    p1 = buf[r, 1]
    p2 = buf[r, 2]
    kind = fp[0]
    if static_hit(p0, p1, p2, kind, fp[1], fp[2], ws_lo, ws_hi, obs_lo, obs_hi):
        return False
    if mo_k0.size > 0 and moving_hit(p0, p1, p2, k, kind, fp[1], fp[2], rad, mo_states, mo_k0,
                                     mo_len, mo_hold, mo_fp, mo_lo, mo_hi):
        return False
    return True


@njit(cache=True)
def states_valid(states, k0, s_lo, s_hi, fp, rad, ws_lo, ws_hi, obs_lo, obs_hi,
                 mo_states, mo_k0, mo_len, mo_hold, mo_fp, mo_lo, mo_hi):
    for k in range(states.shape[0]):
        if not row_valid(states, k, k0 + k, s_lo, s_hi, fp, rad, ws_lo, ws_hi, obs_lo, obs_hi,
                         mo_states, mo_k0, mo_len, mo_hold, mo_fp, mo_lo, mo_hi):
            return False
    return True


@njit(cache=True)
def hold_valid(x, k_end, fp, rad, mo_states, mo_k0, mo_len, mo_hold, mo_fp, mo_lo, mo_hi):
    """A state parked from step ``k_end`` onward clears every moving obstacle."""
    last = k_end
    for m in range(mo_k0.size):
        e = mo_k0[m] + mo_len[m] - 1
        if e > last:
            last = e
    for k in range(k_end, last + 1):
        if moving_hit(x[0], x[1], x[2], k, fp[0], fp[1], fp[2], rad, mo_states, mo_k0, mo_len,
                      mo_hold, mo_fp, mo_lo, mo_hi):
            return False
    return True


@njit(cache=True)
def checked_rollout(sys, wb, dt, x0, u, nsteps, k0, buf, s_lo, s_hi, fp, rad,
                    ws_lo, ws_hi, obs_lo, obs_hi, mo_states, mo_k0, mo_len,
                    mo_hold, mo_fp, mo_lo, mo_hi):
    """Fill ``buf[:nsteps+1]`` and validate each new sample; stop at the first failure."""
    for c in range(x0.size):
        buf[0, c] = x0[c]
    for k in range(nsteps):
        step_rows(sys, wb, dt, buf, k, u, k + 1)
        if not row_valid(buf, k + 1, k0 + k + 1, s_lo, s_hi, fp, rad, ws_lo, ws_hi,
                         obs_lo, obs_hi, mo_states, mo_k0, mo_len, mo_hold,
                         mo_fp, mo_lo, mo_hi):
            return False
    return True


@njit(cache=True)
def _row_dist(buf, r, target, w, wrap):
    s = 0.0
    for i in range(target.size):
        d = buf[r, i] - target[i]
        if wrap[i]:
            d = abs(d) % TWO_PI
            if d > PI:
                d = TWO_PI - d
        d *= w[i]
        s += d * d
    return math.sqrt(s)


@njit(cache=True)
def rand_rollouts(sys, wb, dt, x0, k0, controls, steps, target, dw, wrap,
                  s_lo, s_hi, fp, rad, ws_lo, ws_hi, obs_lo, obs_hi,
                  mo_states, mo_k0, mo_len, mo_hold, mo_fp, mo_lo, mo_hi):
    """Best-of-K rollout: index of the valid rollout closest to ``target`` (or -1)."""
    n = x0.size
    nmax = 0
    for j in range(steps.size):
        if steps[j] > nmax:
            nmax = steps[j]
    buf = np.empty((nmax + 1, n))
    best = np.empty((nmax + 1, n))
    best_j = -1
    best_d = np.inf
    for j in range(steps.size):
        ok = checked_rollout(sys, wb, dt, x0, controls[j], steps[j], k0, buf, s_lo, s_hi,
                             fp, rad, ws_lo, ws_hi, obs_lo, obs_hi, mo_states, mo_k0,
                             mo_len, mo_hold, mo_fp, mo_lo, mo_hi)
        if ok:
            d = _row_dist(buf, steps[j], target, dw, wrap)
            if d < best_d:
                best_d = d
                best_j = j
                for r in range(steps[j] + 1):
                    for c in range(n):
                        best[r, c] = buf[r, c]
    if best_j < 0:
        return -1, best[:1].copy()
    return best_j, best[: steps[best_j] + 1].copy()


@njit(cache=True)
def candidate_dists(x0, ids, edge_xf, pos_dim, target, dw, wrap):
    """Squared weighted distance from each translated stored endpoint to ``target``."""
    m = ids.size
    n = x0.size
    off = target.copy()
    for c in range(pos_dim):
        off[c] -= x0[c]
    d = np.empty(m)
    for i in range(m):
        e = ids[i]
        s = 0.0
        for c in range(n):
            q = edge_xf[e, c] - off[c]
            if wrap[c]:
                q = abs(q)
                if q > TWO_PI:
                    q = q % TWO_PI
                if q > PI:
                    q = TWO_PI - q
            q *= dw[c]
            s += q * q
        d[i] = s
    return d


@njit(cache=True)
def _before(d, a, b):
    # lexicographic (distance, position) order keeps ties stable
    return d[a] < d[b] or (d[a] == d[b] and a < b)


@njit(cache=True)
def select_rank(d, r, lo, hi, k):
    """Reorder positions ``r[lo:hi]`` so that ``r[k]`` holds the k-th smallest.

    Entries before ``k`` are no larger and entries after are no smaller, so
    later calls with a larger ``k`` can start from ``lo = k + 1``.
    """
    if k == lo:
        # plain minimum scan, the common first attempt
        b = lo
        for i in range(lo + 1, hi):
            if _before(d, r[i], r[b]):
                b = i
        r[lo], r[b] = r[b], r[lo]
        return
    hi -= 1
    while hi > lo:
        mid = (lo + hi) // 2
        # median of three as pivot, deterministic
        if _before(d, r[mid], r[lo]):
            r[mid], r[lo] = r[lo], r[mid]
        if _before(d, r[hi], r[lo]):
            r[hi], r[lo] = r[lo], r[hi]
        if _before(d, r[hi], r[mid]):
            r[hi], r[mid] = r[mid], r[hi]
        pv = r[mid]
        i = lo
        j = hi
        while i <= j:
            while _before(d, r[i], pv):
                i += 1
            while _before(d, pv, r[j]):
                j -= 1
            if i <= j:
                r[i], r[j] = r[j], r[i]
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            return


@njit(cache=True)
def rank_candidates(x0, ids, edge_xf, pos_dim, target, dw, wrap):
    """Stable order of ``ids`` by distance from translated stored endpoint to target."""
    d = candidate_dists(x0, ids, edge_xf, pos_dim, target, dw, wrap)
    return np.argsort(d, kind="mergesort")


@njit(cache=True)
def kite_attempts(sys, wb, dt, x0, k0, cand, alive, fixed_p, edge_u, edge_steps, edge_xf,
                  pos_dim, target, dw, wrap, s_lo, s_hi, fp, rad, ws_lo, ws_hi,
                  obs_lo, obs_hi, mo_states, mo_k0, mo_len, mo_hold, mo_fp, mo_lo, mo_hi):
    """Stride-p traversal of the ranked available candidates.

    Attempt j uses the candidate at rank j*p of the stable distance order;
    ranks are selected lazily, so a success after a few attempts never pays
    for a full sort. Marks every attempted edge as not alive. Returns
    (edge id or -1, states, number of attempts).
    """
    m = 0
    for i in range(alive.size):
        if alive[i]:
            m += 1
    slots = np.empty(m, dtype=np.int64)
    ids = np.empty(m, dtype=np.int64)
    m = 0
    for i in range(alive.size):
        if alive[i]:
            slots[m] = i
            ids[m] = cand[i]
            m += 1
    d = candidate_dists(x0, ids, edge_xf, pos_dim, target, dw, wrap)
    order = np.arange(m)
    if fixed_p > 0:
        p = fixed_p
    else:
        p = max((m + 9) // 10, 1)
    n_att = (m + p - 1) // p
    nmax = 0
    for i in range(m):
        s = edge_steps[ids[i]]
        if s > nmax:
            nmax = s
    buf = np.empty((nmax + 1, x0.size))
    lo = 0
    for j in range(n_att):
        k = j * p
        select_rank(d, order, lo, m, k)
        lo = k + 1
        r = order[k]
        e = ids[r]
        alive[slots[r]] = False
        ok = checked_rollout(sys, wb, dt, x0, edge_u[e], edge_steps[e], k0, buf, s_lo, s_hi,
                             fp, rad, ws_lo, ws_hi, obs_lo, obs_hi, mo_states, mo_k0,
                             mo_len, mo_hold, mo_fp, mo_lo, mo_hi)
        if ok:
            return e, buf[: edge_steps[e] + 1].copy(), j + 1
    return -1, buf[:1].copy(), n_att


@njit(cache=True)
def band_query(wsorted, first, order, q, delta, wrap_first, period):
    """Exact weighted-ball query over keys sorted by their first weighted component.

    ``wsorted`` holds the weighted keys in ascending order of column 0,
    ``first`` that column (contiguous) and ``order`` the matching bundle ids.
    Only the first key component may be an angle, with weighted ``period``;
    while ``2 delta < period`` the shifted slabs are disjoint, otherwise every
    key is scanned once with a wrapped difference. Ids come back in slab order.
    """
    n = wsorted.shape[1]
    r2 = delta * delta
    full = wrap_first and 2.0 * delta >= period
    nshift = 3 if wrap_first and not full else 1
    lo = np.zeros(3, dtype=np.int64)
    hi = np.zeros(3, dtype=np.int64)
    total = 0
    for t in range(nshift):
        q0 = q[0] + (period if t == 1 else (-period if t == 2 else 0.0))
        if full:
            hi[t] = first.size
        else:
            lo[t] = np.searchsorted(first, q0 - delta, side="left")
            hi[t] = np.searchsorted(first, q0 + delta, side="right")
        total += hi[t] - lo[t]
    out = np.empty(total, dtype=np.int64)
    count = 0
    for t in range(nshift):
        q0 = q[0] + (period if t == 1 else (-period if t == 2 else 0.0))
        for s in range(lo[t], hi[t]):
            z = wsorted[s, 0] - q0
            if full:
                # slabs would overlap: take the wrapped difference directly
                z = abs(z) % period
                if z > 0.5 * period:
                    z = period - z
            acc = z * z
            for c in range(1, n):
                z = wsorted[s, c] - q[c]
                acc += z * z
            if acc <= r2:
                out[count] = order[s]
                count += 1
    return out[:count]


@njit(cache=True)
def joint_pairs_clear(states, nsteps, fps):
    """``states`` is (N, nsteps+1, n): True when no pair touches at any shared sample."""
    N = states.shape[0]
    for k in range(nsteps + 1):
        for i in range(N):
            for j in range(i + 1, N):
                if pair_hit(states[i, k, 0], states[i, k, 1], states[i, k, 2],
                            fps[i, 0], fps[i, 1], fps[i, 2],
                            states[j, k, 0], states[j, k, 1], states[j, k, 2],
                            fps[j, 0], fps[j, 1], fps[j, 2]):
                    return False
    return True


@njit(cache=True)
def _traj_pair_hit(trajs, lens, fps, i, j, k):
    a = min(k, lens[i] - 1)
    b = min(k, lens[j] - 1)
    return pair_hit(trajs[i, a, 0], trajs[i, a, 1], trajs[i, a, 2],
                    fps[i, 0], fps[i, 1], fps[i, 2],
                    trajs[j, b, 0], trajs[j, b, 1], trajs[j, b, 2],
                    fps[j, 0], fps[j, 1], fps[j, 2])


@njit(cache=True)
def first_conflict(trajs, lens, fps):
    """Earliest colliding pair under terminal hold.

    ``trajs`` is (N, Lmax, n) padded; returns (i, j, k_start, k_end) with an
    inclusive maximal run, or (-1, -1, -1, -1).
    """
    N = trajs.shape[0]
    horizon = 0
    for i in range(N):
        if lens[i] > horizon:
            horizon = lens[i]
    for k in range(horizon):
        for i in range(N):
            for j in range(i + 1, N):
                if _traj_pair_hit(trajs, lens, fps, i, j, k):
                    ke = k
                    while ke + 1 < horizon and _traj_pair_hit(trajs, lens, fps, i, j, ke + 1):
                        ke += 1
                    return i, j, k, ke
    return -1, -1, -1, -1


@njit(cache=True)
def static_free_batch(xs, fp, ws_lo, ws_hi, obs_lo, obs_hi):
    out = np.empty(xs.shape[0], dtype=np.bool_)
    for i in range(xs.shape[0]):
        out[i] = not static_hit(xs[i, 0], xs[i, 1], xs[i, 2], fp[0], fp[1], fp[2],
                                ws_lo, ws_hi, obs_lo, obs_hi)
    return out
