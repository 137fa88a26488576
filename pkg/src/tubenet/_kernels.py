"""Compiled inner loops for tracing and search.

Cells are addressed by flat C-order index ``(x * ny + y) * nz + z``. All
kernels take preallocated work buffers so nothing is allocated per call.
"""

import numpy as np
from numba import njit

INF = np.inf
_BIG = np.int64(1) << np.int64(62)

# parameter slots for theta_star
P_OMEGA_R, P_OMEGA_P, P_TURN, P_CLIMB, P_DESC, P_LAM_R, P_LAM_P, P_HW, P_HCOEF = range(9)


@njit(cache=True, nogil=True)
def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@njit(cache=True, nogil=True)
def trace_cells_into(ax, ay, az, bx, by, bz, ny, nz, out):
    """Supercover of the segment between the centres of cells a and b.

    Writes flat indices to ``out`` in travel order and returns the count.
    Every cell whose closed box touches the segment is included. Event
    parameters are kept as exact integers: with L = lcm of the non-zero axis
    deltas, the j-th boundary crossing on an axis with delta d happens at
    T = (2j - 1) * L / |d| on a common scale.
    """
    dx = bx - ax
    dy = by - ay
    dz = bz - az
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    sz = 1 if dz > 0 else -1
    adx = abs(dx)
    ady = abs(dy)
    adz = abs(dz)
    L = 1
    for d in (adx, ady, adz):
        if d > 0:
            L = L // _gcd(L, d) * d
    qx = L // adx if adx > 0 else 0
    qy = L // ady if ady > 0 else 0
    qz = L // adz if adz > 0 else 0

    cx = ax
    cy = ay
    cz = az
    n = 0
    out[n] = (cx * ny + cy) * nz + cz
    n += 1
    jx = 0
    jy = 0
    jz = 0
    keys = np.empty(6, np.int64)
    vals = np.empty(6, np.int64)
    while True:
        tx = (2 * jx + 1) * qx if jx < adx else _BIG
        ty = (2 * jy + 1) * qy if jy < ady else _BIG
        tz = (2 * jz + 1) * qz if jz < adz else _BIG
        t = min(tx, min(ty, tz))
        if t == _BIG:
            break
        mask = 0
        if tx == t:
            mask |= 1
        if ty == t:
            mask |= 2
        if tz == t:
            mask |= 4
        if mask != 1 and mask != 2 and mask != 4:
            # several planes crossed at once: emit the corner-touched cells,
            # ordered by how many axes have advanced, then by index
            m = 0
            for sub in range(1, 8):
                if (sub & mask) != sub or sub == mask:
                    continue
                px = cx + sx if sub & 1 else cx
                py = cy + sy if sub & 2 else cy
                pz = cz + sz if sub & 4 else cz
                pop = (sub & 1) + ((sub >> 1) & 1) + ((sub >> 2) & 1)
                idx = (px * ny + py) * nz + pz
                keys[m] = pop * _BIG // 4 + idx
                vals[m] = idx
                m += 1
            for i in range(1, m):
                k = keys[i]
                v = vals[i]
                j = i - 1
                while j >= 0 and keys[j] > k:
                    keys[j + 1] = keys[j]
                    vals[j + 1] = vals[j]
                    j -= 1
                keys[j + 1] = k
                vals[j + 1] = v
            for i in range(m):
                out[n] = vals[i]
                n += 1
        if mask & 1:
            cx += sx
            jx += 1
        if mask & 2:
            cy += sy
            jy += 1
        if mask & 4:
            cz += sz
            jz += 1
        out[n] = (cx * ny + cy) * nz + cz
        n += 1
    return n


@njit(cache=True, nogil=True)
def segment_cells(a, b, nx, ny, nz, dil, tbuf, scratch, stamp, out):
    """Trace a->b (flat indices), dilate by ``dil`` offsets, dedupe.

    ``scratch`` entries equal to ``stamp`` mark cells already emitted.
    Returns the count written to ``out``; out-of-bounds dilated cells are dropped.
    """
    nyz = ny * nz
    ax = a // nyz
    ay = (a // nz) % ny
    az = a % nz
    bx = b // nyz
    by = (b // nz) % ny
    bz = b % nz
    nt = trace_cells_into(ax, ay, az, bx, by, bz, ny, nz, tbuf)
    cnt = 0
    for i in range(nt):
        c = tbuf[i]
        x = c // nyz
        y = (c // nz) % ny
        z = c % nz
        for k in range(dil.shape[0]):
            px = x + dil[k, 0]
            py = y + dil[k, 1]
            pz = z + dil[k, 2]
            if px < 0 or py < 0 or pz < 0 or px >= nx or py >= ny or pz >= nz:
                continue
            q = (px * ny + py) * nz + pz
            if scratch[q] == stamp:
                continue
            scratch[q] = stamp
            out[cnt] = q
            cnt += 1
    return cnt


@njit(cache=True, nogil=True)
def line_of_sight(a, b, nx, ny, nz, free, dil, tbuf):
    """True iff every (dilated) cell swept by the centre segment a->b is free."""
    nyz = ny * nz
    nt = trace_cells_into(a // nyz, (a // nz) % ny, a % nz, b // nyz, (b // nz) % ny, b % nz, ny, nz, tbuf)
    for i in range(nt):
        c = tbuf[i]
        x = c // nyz
        y = (c // nz) % ny
        z = c % nz
        for k in range(dil.shape[0]):
            px = x + dil[k, 0]
            py = y + dil[k, 1]
            pz = z + dil[k, 2]
            if px < 0 or py < 0 or pz < 0 or px >= nx or py >= ny or pz >= nz:
                return False
            if not free[(px * ny + py) * nz + pz]:
                return False
    return True


@njit(cache=True, nogil=True)
def _mark_segment(a, b, nx, ny, nz, dil, brad, taken, pmark, bmark, stamp, keep,
                  tbuf, cbuf, scratch, sstamp):
    """Mark the path cells of a->b with ``stamp`` in pmark and its countable
    buffer cells (not already taken in the overlay) in bmark. Cells already
    carrying ``keep`` are left alone so an enclosing chain mark survives."""
    cnt = segment_cells(a, b, nx, ny, nz, dil, tbuf, scratch, sstamp, cbuf)
    for i in range(cnt):
        c = cbuf[i]
        if pmark[c] != keep:
            pmark[c] = stamp
    rx = brad[0]
    ry = brad[1]
    rz = brad[2]
    for i in range(cnt):
        c = cbuf[i]
        x = c // (ny * nz)
        y = (c // nz) % ny
        z = c % nz
        for ox in range(-rx, rx + 1):
            px = x + ox
            if px < 0 or px >= nx:
                continue
            for oy in range(-ry, ry + 1):
                py = y + oy
                if py < 0 or py >= ny:
                    continue
                for oz in range(-rz, rz + 1):
                    pz = z + oz
                    if pz < 0 or pz >= nz:
                        continue
                    q = (px * ny + py) * nz + pz
                    if taken[q]:
                        continue
                    if bmark[q] != keep:
                        bmark[q] = stamp


@njit(cache=True, nogil=True)
def _segment_cost(a, b, pa, start, nx, ny, nz, dil, brad, taken, theta, csize, params,
                  pmark, bmark, sa, sb, tbuf, cbuf, scratch, sstamp):
    """Cost of adding segment a->b to a partial path whose cells carry mark
    ``sa`` (or ``sb``). ``pa`` is the parent of ``a`` for the turning term.

    Returns (total, operational, raw_risk, raw_space)."""
    call = sstamp
    callb = sstamp + 1
    cnt = segment_cells(a, b, nx, ny, nz, dil, tbuf, scratch, call, cbuf)
    risk = 0.0
    npath = 0
    for i in range(cnt):
        c = cbuf[i]
        in_path = pmark[c] == sa or pmark[c] == sb
        if not in_path:
            risk += theta[c]
            if not (bmark[c] == sa or bmark[c] == sb):
                npath += 1
    nbuf = 0
    rx = brad[0]
    ry = brad[1]
    rz = brad[2]
    nyz = ny * nz
    for i in range(cnt):
        c = cbuf[i]
        x = c // nyz
        y = (c // nz) % ny
        z = c % nz
        for ox in range(-rx, rx + 1):
            px = x + ox
            if px < 0 or px >= nx:
                continue
            for oy in range(-ry, ry + 1):
                py = y + oy
                if py < 0 or py >= ny:
                    continue
                for oz in range(-rz, rz + 1):
                    pz = z + oz
                    if pz < 0 or pz >= nz:
                        continue
                    q = (px * ny + py) * nz + pz
                    s = scratch[q]
                    if s == call or s == callb:
                        continue
                    scratch[q] = callb
                    if taken[q]:
                        continue
                    if pmark[q] == sa or pmark[q] == sb or bmark[q] == sa or bmark[q] == sb:
                        continue
                    nbuf += 1

    # operational part: traversal, turning at a, climb/descent
    ax = a // nyz
    ay = (a // nz) % ny
    az = a % nz
    vx = (b // nyz - ax) * csize[0]
    vy = ((b // nz) % ny - ay) * csize[1]
    vz = (b % nz - az) * csize[2]
    length = np.sqrt(vx * vx + vy * vy + vz * vz)
    op = length
    if a != start and params[P_TURN] > 0.0:
        ux = (ax - pa // nyz) * csize[0]
        uy = (ay - (pa // nz) % ny) * csize[1]
        uz = (az - pa % nz) * csize[2]
        un = np.sqrt(ux * ux + uy * uy + uz * uz)
        if un > 0.0 and length > 0.0:
            cosang = (ux * vx + uy * vy + uz * vz) / (un * length)
            cosang = min(1.0, max(-1.0, cosang))
            op += params[P_TURN] * abs(np.arccos(cosang))
    if length > 0.0 and vz != 0.0:
        elev = np.arcsin(min(1.0, max(-1.0, vz / length)))
        if elev > 0.0:
            op += params[P_CLIMB] * elev * length
        else:
            op += params[P_DESC] * (-elev) * length
    total = op + params[P_OMEGA_R] * params[P_LAM_R] * risk + params[P_OMEGA_P] * params[P_LAM_P] * (npath + nbuf)
    return total, op, risk, npath + nbuf


@njit(cache=True, nogil=True)
def _mark_chain(n, start, parent, nx, ny, nz, dil, brad, taken, pmark, bmark, stamp,
                tbuf, cbuf, scratch, sstamp):
    while n != start:
        q = parent[n]
        _mark_segment(q, n, nx, ny, nz, dil, brad, taken, pmark, bmark, stamp, -1,
                      tbuf, cbuf, scratch, sstamp)
        sstamp += 1
        n = q
    return sstamp


@njit(cache=True, nogil=True)
def _heuristic(c, goal, ny, nz, csize, params):
    nyz = ny * nz
    dx = abs(c // nyz - goal // nyz)
    dy = abs((c // nz) % ny - (goal // nz) % ny)
    dz = abs(c % nz - goal % nz)
    ex = dx * csize[0]
    ey = dy * csize[1]
    ez = dz * csize[2]
    h = np.sqrt(ex * ex + ey * ey + ez * ez)
    if params[P_HCOEF] > 0.0:
        # path cells form a face-connected chain, so at least dx+dy+dz more
        h += params[P_HCOEF] * max(dx + dy + dz - 1, 0)
    return params[P_HW] * h


@njit(cache=True, nogil=True)
def _better(f1, g1, i1, f2, g2, i2):
    # smaller f, then larger g, then smaller index
    if f1 != f2:
        return f1 < f2
    if g1 != g2:
        return g1 > g2
    return i1 < i2


@njit(cache=True, nogil=True)
def _heap_push(hf, hg, hi, size, f, g, idx):
    if size == hf.shape[0]:
        nf = np.empty(2 * size, np.float64)
        ng = np.empty(2 * size, np.float64)
        ni = np.empty(2 * size, np.int64)
        nf[:size] = hf
        ng[:size] = hg
        ni[:size] = hi
        hf, hg, hi = nf, ng, ni
    j = size
    hf[j] = f
    hg[j] = g
    hi[j] = idx
    while j > 0:
        p = (j - 1) // 2
        if _better(hf[j], hg[j], hi[j], hf[p], hg[p], hi[p]):
            hf[j], hf[p] = hf[p], hf[j]
            hg[j], hg[p] = hg[p], hg[j]
            hi[j], hi[p] = hi[p], hi[j]
            j = p
        else:
            break
    return hf, hg, hi, size + 1


@njit(cache=True, nogil=True)
def _heap_pop(hf, hg, hi, size):
    f = hf[0]
    g = hg[0]
    idx = hi[0]
    size -= 1
    hf[0] = hf[size]
    hg[0] = hg[size]
    hi[0] = hi[size]
    j = 0
    while True:
        l = 2 * j + 1
        r = l + 1
        m = j
        if l < size and _better(hf[l], hg[l], hi[l], hf[m], hg[m], hi[m]):
            m = l
        if r < size and _better(hf[r], hg[r], hi[r], hf[m], hg[m], hi[m]):
            m = r
        if m == j:
            break
        hf[j], hf[m] = hf[m], hf[j]
        hg[j], hg[m] = hg[m], hg[j]
        hi[j], hi[m] = hi[m], hi[j]
        j = m
    return f, g, idx, size


@njit(cache=True, nogil=True)
def theta_star(nx, ny, nz, free, taken, theta, dil, brad, nbr, start, goal, csize, params,
               any_angle, max_expansions, g, parent, seen, closed, pmark, bmark, scratch,
               tbuf, cbuf, counters):
    """Extended Theta* with space cost.

    ``counters`` holds [run id, mark stamp, scratch stamp] and is advanced in
    place so the work arrays never need clearing. Returns (found, expansions).
    On success ``parent`` links goal back to start and ``g[goal]`` is the cost.
    """
    run = counters[0] + 1
    counters[0] = run
    mstamp = counters[1]
    sstamp = counters[2]

    cap = 1024
    hf = np.empty(cap, np.float64)
    hg = np.empty(cap, np.float64)
    hi = np.empty(cap, np.int64)
    size = 0

    g[start] = 0.0
    parent[start] = start
    seen[start] = run
    hf, hg, hi, size = _heap_push(hf, hg, hi, size, _heuristic(start, goal, ny, nz, csize, params), 0.0, start)
    expansions = 0
    found = False
    nyz = ny * nz
    while size > 0:
        f, gg, s1, size = _heap_pop(hf, hg, hi, size)
        if closed[s1] == run or gg != g[s1]:
            continue
        if s1 == goal:
            found = True
            break
        closed[s1] = run
        expansions += 1
        if max_expansions > 0 and expansions > max_expansions:
            break
        p = parent[s1]
        # marks: A = cells of chain(parent(s1)); B = segment parent(s1)->s1
        sa = mstamp + 1
        sb = mstamp + 2
        mstamp += 2
        sstamp = _mark_chain(p, start, parent, nx, ny, nz, dil, brad, taken, pmark, bmark, sa,
                             tbuf, cbuf, scratch, sstamp)
        if s1 != start:
            _mark_segment(p, s1, nx, ny, nz, dil, brad, taken, pmark, bmark, sb, sa,
                          tbuf, cbuf, scratch, sstamp)
            sstamp += 1
        x1 = s1 // nyz
        y1 = (s1 // nz) % ny
        z1 = s1 % nz
        for k in range(nbr.shape[0]):
            px = x1 + nbr[k, 0]
            py = y1 + nbr[k, 1]
            pz = z1 + nbr[k, 2]
            if px < 0 or py < 0 or pz < 0 or px >= nx or py >= ny or pz >= nz:
                continue
            s = (px * ny + py) * nz + pz
            if closed[s] == run or not free[s]:
                continue
            if not line_of_sight(s1, s, nx, ny, nz, free, dil, tbuf):
                continue
            if seen[s] != run:
                g[s] = INF
                parent[s] = -1
                seen[s] = run
            if any_angle and s1 != start and line_of_sight(p, s, nx, ny, nz, free, dil, tbuf):
                c, _, _, _ = _segment_cost(p, s, parent[p], start, nx, ny, nz, dil, brad, taken, theta,
                                           csize, params, pmark, bmark, sa, -1, tbuf, cbuf, scratch, sstamp)
                cand = g[p] + c
                par = p
            else:
                c, _, _, _ = _segment_cost(s1, s, p, start, nx, ny, nz, dil, brad, taken, theta,
                                           csize, params, pmark, bmark, sa, sb, tbuf, cbuf, scratch, sstamp)
                cand = g[s1] + c
                par = s1
            sstamp += 2
            if cand < g[s]:
                g[s] = cand
                parent[s] = par
                hf, hg, hi, size = _heap_push(hf, hg, hi, size,
                                              cand + _heuristic(s, goal, ny, nz, csize, params), cand, s)
    counters[1] = mstamp
    counters[2] = sstamp
    return found, expansions


@njit(cache=True, nogil=True)
def replay_costs(chain, nx, ny, nz, dil, brad, taken, theta, csize, params,
                 pmark, bmark, tbuf, cbuf, scratch, counters):
    """Sum segment costs along a waypoint chain exactly as the search does.

    Returns (total, operational, raw_risk, raw_space)."""
    mstamp = counters[1] + 1
    sstamp = counters[2]
    total = 0.0
    op = 0.0
    risk = 0.0
    space = 0.0
    start = chain[0]
    for i in range(chain.shape[0] - 1):
        a = chain[i]
        b = chain[i + 1]
        pa = chain[i - 1] if i > 0 else a
        t, o, r, s = _segment_cost(a, b, pa, start, nx, ny, nz, dil, brad, taken, theta, csize, params,
                                   pmark, bmark, mstamp, -1, tbuf, cbuf, scratch, sstamp)
        sstamp += 2
        total += t
        op += o
        risk += r
        space += s
        _mark_segment(a, b, nx, ny, nz, dil, brad, taken, pmark, bmark, mstamp, -1,
                      tbuf, cbuf, scratch, sstamp)
        sstamp += 1
    counters[1] = mstamp
    counters[2] = sstamp
    return total, op, risk, space
