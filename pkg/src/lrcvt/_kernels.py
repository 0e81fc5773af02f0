"""Numba kernels for the restricted geodesic region growing and site updates.

All kernels operate on flat arrays indexed ``v = x + nx*(y + ny*z)``. The
relaxation is double-buffered in effect: each round evaluates voxels against
the pre-round state only, and applies all accepted updates afterwards, so the
result is independent of evaluation order and thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

NONE = -1
EPS = 1e-9  # improvement threshold, world units

# fixed 26-neighborhood order (dz, dy, dx lexicographic); determinism relies
# on every evaluation scanning neighbors in this exact order
_offs = []
for _dz in (-1, 0, 1):
    for _dy in (-1, 0, 1):
        for _dx in (-1, 0, 1):
            if _dx or _dy or _dz:
                _offs.append((_dx, _dy, _dz))
OFFSETS = np.array(_offs, dtype=np.int64)
del _offs


@njit(cache=True, inline="always")
def _center(v, nx, ny, sx, sy, sz):
    x = v % nx
    y = (v // nx) % ny
    z = v // (nx * ny)
    return (x + 0.5) * sx, (y + 0.5) * sy, (z + 0.5) * sz


@njit(cache=True, inline="always")
def _dist3(ax, ay, az, bx, by, bz):
    dx = bx - ax
    dy = by - ay
    dz = bz - az
    return np.sqrt(dx * dx + dy * dy + dz * dz)


@njit(cache=True)
def _segment_hit_t(comp, nx, ny, nz, sx, sy, sz, ax, ay, az, bx, by, bz, want):
    """Parametric t in [0,1] at which the segment a->b first enters a voxel
    whose component is not `want`; 1.0 if it never does.

    Cells are visited by a DDA; when the segment crosses a cell corner or
    edge exactly, all tied axes advance at once, so grazed cells are not
    visited (consistent with point-sampling the segment).
    """
    cx = int(np.floor(ax / sx))
    cy = int(np.floor(ay / sy))
    cz = int(np.floor(az / sz))
    ex = int(np.floor(bx / sx))
    ey = int(np.floor(by / sy))
    ez = int(np.floor(bz / sz))
    # clamp into the grid (endpoints on the upper boundary)
    cx = min(max(cx, 0), nx - 1)
    cy = min(max(cy, 0), ny - 1)
    cz = min(max(cz, 0), nz - 1)
    ex = min(max(ex, 0), nx - 1)
    ey = min(max(ey, 0), ny - 1)
    ez = min(max(ez, 0), nz - 1)

    if comp[cx + nx * (cy + ny * cz)] != want:
        return 0.0

    dx = bx - ax
    dy = by - ay
    dz = bz - az

    stepx = 1 if dx > 0 else -1
    stepy = 1 if dy > 0 else -1
    stepz = 1 if dz > 0 else -1
    big = 1e30
    if dx != 0.0:
        nxt = (cx + 1) * sx if dx > 0 else cx * sx
        tmaxx = (nxt - ax) / dx
        tdx = sx / abs(dx)
    else:
        tmaxx = big
        tdx = big
    if dy != 0.0:
        nxt = (cy + 1) * sy if dy > 0 else cy * sy
        tmaxy = (nxt - ay) / dy
        tdy = sy / abs(dy)
    else:
        tmaxy = big
        tdy = big
    if dz != 0.0:
        nxt = (cz + 1) * sz if dz > 0 else cz * sz
        tmaxz = (nxt - az) / dz
        tdz = sz / abs(dz)
    else:
        tmaxz = big
        tdz = big

    max_steps = abs(ex - cx) + abs(ey - cy) + abs(ez - cz) + 8
    for _ in range(max_steps):
        if cx == ex and cy == ey and cz == ez:
            return 1.0
        t = min(tmaxx, min(tmaxy, tmaxz))
        if t > 1.0:
            # numeric guard: ran past b without entering its cell; if that
            # cell is foreign the hit is effectively at the endpoint
            if comp[ex + nx * (ey + ny * ez)] == want:
                return 1.0
            return 1.0 - 1e-12
        if tmaxx == t:
            cx += stepx
            tmaxx += tdx
        if tmaxy == t:
            cy += stepy
            tmaxy += tdy
        if tmaxz == t:
            cz += stepz
            tmaxz += tdz
        if cx < 0 or cy < 0 or cz < 0 or cx >= nx or cy >= ny or cz >= nz:
            return t
        if comp[cx + nx * (cy + ny * cz)] != want:
            return t
    return 1.0


@njit(cache=True, inline="always")
def _segment_clear(comp, nx, ny, nz, sx, sy, sz, ax, ay, az, bx, by, bz, want):
    return (
        _segment_hit_t(comp, nx, ny, nz, sx, sy, sz, ax, ay, az, bx, by, bz, want)
        >= 1.0
    )


@njit(cache=True, inline="always")
def _beats(d, s, cur_d, cur_s):
    """Candidate (d, s) replaces (cur_d, cur_s): strictly shorter, or an
    eps-tie resolved toward the lower site id."""
    if d < cur_d - EPS:
        return True
    if abs(d - cur_d) <= EPS and s < cur_s:
        return True
    return False


@njit(cache=True)
def _eval_voxel(
    v,
    phase2,
    comp,
    offsets,
    nx,
    ny,
    nz,
    sx,
    sy,
    sz,
    site_pos,
    site_of,
    dist,
    src,
):
    """Best path candidate for voxel v against the current (pre-round) state.

    Returns (improved, d, s, src). Scans the fixed neighbor order; for each
    active same-component neighbor w considers: the path through w, a direct
    line-of-sight hop to w's site, or a shortcut to w's own path node src(w).
    Shortcuts and direct hops are ray-validated lazily, only when they would
    win.
    """
    cv = comp[v]
    x = v % nx
    y = (v // nx) % ny
    z = v // (nx * ny)
    px = (x + 0.5) * sx
    py = (y + 0.5) * sy
    pz = (z + 0.5) * sz

    best_d = dist[v]
    best_s = site_of[v]
    best_src = src[v]
    orig_d = best_d
    orig_s = best_s
    failed_site = -1  # direct-to-site ray that already failed this evaluation

    for k in range(offsets.shape[0]):
        wx = x + offsets[k, 0]
        wy = y + offsets[k, 1]
        wz = z + offsets[k, 2]
        if wx < 0 or wy < 0 or wz < 0 or wx >= nx or wy >= ny or wz >= nz:
            continue
        w = wx + nx * (wy + ny * wz)
        if comp[w] != cv:
            continue
        sw = site_of[w]
        if sw < 0:
            continue

        if phase2:
            # candidate: extend w's path by the v-w hop (no ray: w is adjacent
            # and in the same component)
            d = dist[w] + _dist3(
                px, py, pz, (wx + 0.5) * sx, (wy + 0.5) * sy, (wz + 0.5) * sz
            )
            if _beats(d, sw, best_d, best_s):
                best_d = d
                best_s = sw
                best_src = w

        u = src[w]
        if u == w:
            # w sees its site directly; try the same direct connection
            spx = site_pos[sw, 0]
            spy = site_pos[sw, 1]
            spz = site_pos[sw, 2]
            d = _dist3(px, py, pz, spx, spy, spz)
            if _beats(d, sw, best_d, best_s) and sw != failed_site:
                if _segment_clear(
                    comp, nx, ny, nz, sx, sy, sz, px, py, pz, spx, spy, spz, cv
                ):
                    best_d = d
                    best_s = sw
                    best_src = v  # LOS: own path starts at the site
                else:
                    failed_site = sw
        elif phase2 and u >= 0:
            su = site_of[u]
            if su >= 0 and comp[u] == cv:
                ux = u % nx
                uy = (u // nx) % ny
                uz = u // (nx * ny)
                upx = (ux + 0.5) * sx
                upy = (uy + 0.5) * sy
                upz = (uz + 0.5) * sz
                d = dist[u] + _dist3(px, py, pz, upx, upy, upz)
                if _beats(d, su, best_d, best_s):
                    if _segment_clear(
                        comp, nx, ny, nz, sx, sy, sz, px, py, pz, upx, upy, upz, cv
                    ):
                        best_d = d
                        best_s = su
                        best_src = u

    improved = (best_s != orig_s) or (best_d < orig_d - EPS)
    return improved, best_d, best_s, best_src


@njit(cache=True, parallel=True)
def _eval_list(
    items,
    n_items,
    phase2,
    comp,
    offsets,
    nx,
    ny,
    nz,
    sx,
    sy,
    sz,
    site_pos,
    site_of,
    dist,
    src,
    p_dist,
    p_site,
    p_src,
    imp_stamp,
    rnd,
):
    for i in prange(n_items):
        v = items[i]
        improved, d, s, sv = _eval_voxel(
            v, phase2, comp, offsets, nx, ny, nz, sx, sy, sz,
            site_pos, site_of, dist, src,
        )
        if improved:
            p_dist[v] = d
            p_site[v] = s
            p_src[v] = sv
            imp_stamp[v] = rnd


@njit(cache=True)
def _apply_and_enqueue(
    items,
    n_items,
    comp,
    offsets,
    nx,
    ny,
    nz,
    site_of,
    dist,
    src,
    p_dist,
    p_site,
    p_src,
    imp_stamp,
    stamp,
    wl_next,
    rnd,
):
    """Commit this round's accepted updates, then queue every same-component
    neighbor of a changed voxel for the next round."""
    for i in range(n_items):
        v = items[i]
        if imp_stamp[v] == rnd:
            dist[v] = p_dist[v]
            site_of[v] = p_site[v]
            src[v] = p_src[v]
    cnt = 0
    for i in range(n_items):
        v = items[i]
        if imp_stamp[v] != rnd:
            continue
        x = v % nx
        y = (v // nx) % ny
        z = v // (nx * ny)
        for k in range(offsets.shape[0]):
            ux = x + offsets[k, 0]
            uy = y + offsets[k, 1]
            uz = z + offsets[k, 2]
            if ux < 0 or uy < 0 or uz < 0 or ux >= nx or uy >= ny or uz >= nz:
                continue
            u = ux + nx * (uy + ny * uz)
            if comp[u] != comp[v]:
                continue
            if stamp[u] != rnd:
                stamp[u] = rnd
                wl_next[cnt] = u
                cnt += 1
    return cnt


@njit(cache=True)
def _run_phase(
    phase2,
    comp,
    offsets,
    nx,
    ny,
    nz,
    sx,
    sy,
    sz,
    site_pos,
    site_of,
    dist,
    src,
    wl,
    n_wl,
    wl_next,
    stamp,
    imp_stamp,
    p_dist,
    p_site,
    p_src,
    rnd0,
):
    """Run relaxation rounds from the given worklist until it drains.

    Returns (rounds executed, final round id). Caller owns re-verification
    (a full sweep) for shortcut candidates whose source nodes may improve
    without being adjacent to the affected voxel.
    """
    rnd = rnd0
    rounds = 0
    while n_wl > 0:
        rnd += 1
        rounds += 1
        _eval_list(
            wl, n_wl, phase2, comp, offsets, nx, ny, nz, sx, sy, sz,
            site_pos, site_of, dist, src, p_dist, p_site, p_src, imp_stamp, rnd,
        )
        n_wl_next = _apply_and_enqueue(
            wl, n_wl, comp, offsets, nx, ny, nz, site_of, dist, src,
            p_dist, p_site, p_src, imp_stamp, stamp, wl_next, rnd,
        )
        tmp = wl
        wl = wl_next
        wl_next = tmp
        n_wl = n_wl_next
    return rounds, rnd


@njit(cache=True)
def _collect_improved(items, n_items, imp_stamp, rnd, out):
    cnt = 0
    for i in range(n_items):
        v = items[i]
        if imp_stamp[v] == rnd:
            out[cnt] = v
            cnt += 1
    return cnt


@njit(cache=True)
def _place_seeds(site_pos, site_comp, comp, nx, ny, nz, sx, sy, sz, site_of, dist, src):
    """Classify each site's containing voxel; contested voxels take the
    (distance, site id) lexicographic minimum. Returns count of sites whose
    voxel lies outside their recorded component (should be zero)."""
    bad = 0
    for s in range(site_pos.shape[0]):
        x = int(np.floor(site_pos[s, 0] / sx))
        y = int(np.floor(site_pos[s, 1] / sy))
        z = int(np.floor(site_pos[s, 2] / sz))
        x = min(max(x, 0), nx - 1)
        y = min(max(y, 0), ny - 1)
        z = min(max(z, 0), nz - 1)
        v = x + nx * (y + ny * z)
        if comp[v] != site_comp[s]:
            bad += 1
            continue
        cx, cy, cz = (x + 0.5) * sx, (y + 0.5) * sy, (z + 0.5) * sz
        d = _dist3(cx, cy, cz, site_pos[s, 0], site_pos[s, 1], site_pos[s, 2])
        if site_of[v] < 0 or _beats(d, s, dist[v], site_of[v]):
            site_of[v] = s
            dist[v] = d
            src[v] = v
    return bad


@njit(cache=True)
def _seed_worklist(comp, offsets, nx, ny, nz, site_of, stamp, wl):
    """Initial worklist: every classified voxel and its in-component
    neighborhood."""
    cnt = 0
    n = site_of.size
    for v in range(n):
        if site_of[v] < 0:
            continue
        if stamp[v] != 0:
            stamp[v] = 0
            wl[cnt] = v
            cnt += 1
        x = v % nx
        y = (v // nx) % ny
        z = v // (nx * ny)
        for k in range(offsets.shape[0]):
            ux = x + offsets[k, 0]
            uy = y + offsets[k, 1]
            uz = z + offsets[k, 2]
            if ux < 0 or uy < 0 or uz < 0 or ux >= nx or uy >= ny or uz >= nz:
                continue
            u = ux + nx * (uy + ny * uz)
            if comp[u] != comp[v]:
                continue
            if stamp[u] != 0:
                stamp[u] = 0
                wl[cnt] = u
                cnt += 1
    return cnt


@njit(cache=True)
def _phi_chains(site_of, src):
    """First line-of-sight ancestor of every assigned voxel (phi map).

    LOS voxels point at themselves. Path-compresses as it goes; total cost is
    linear. Returns (phi, max observed chain depth).
    """
    n = site_of.size
    phi = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    max_depth = 0
    for v in range(n):
        if site_of[v] < 0 or phi[v] != -1:
            continue
        u = v
        depth = 0
        while phi[u] == -1 and src[u] != u and src[u] >= 0:
            stack[depth] = u
            depth += 1
            u = src[u]
        if phi[u] != -1:
            base = phi[u]
        else:
            base = u  # src[u] == u: line-of-sight terminal
            phi[u] = u
        for k in range(depth):
            phi[stack[k]] = base
        if depth > max_depth:
            max_depth = depth
    return phi, max_depth


@njit(cache=True, parallel=True)
def _audit_paths(comp, nx, ny, nz, sx, sy, sz, site_pos, site_of, src, out_bad):
    """Per-voxel path segment check: LOS voxels must see their site, others
    must see their src node, along component-clean segments."""
    n = site_of.size
    for v in prange(n):
        s = site_of[v]
        if s < 0:
            continue
        cv = comp[v]
        ax, ay, az = _center(v, nx, ny, sx, sy, sz)
        if src[v] == v:
            ok = _segment_clear(
                comp, nx, ny, nz, sx, sy, sz,
                ax, ay, az, site_pos[s, 0], site_pos[s, 1], site_pos[s, 2], cv,
            )
        elif src[v] < 0:
            ok = False
        else:
            bx, by, bz = _center(src[v], nx, ny, sx, sy, sz)
            ok = _segment_clear(comp, nx, ny, nz, sx, sy, sz, ax, ay, az, bx, by, bz, cv)
        out_bad[v] = 0 if ok else 1


@njit(cache=True)
def _centroid_targets(comp, nx, ny, sx, sy, sz, site_of, phi, weights, n_sites):
    """Geodesically weighted centroid target per site: each voxel's mass is
    applied at its phi anchor. Fixed-order accumulation for determinism."""
    wsum = np.zeros(n_sites)
    tx = np.zeros(n_sites)
    ty = np.zeros(n_sites)
    tz = np.zeros(n_sites)
    for v in range(site_of.size):
        s = site_of[v]
        if s < 0:
            continue
        w = weights[v]
        a = phi[v]
        ax, ay, az = _center(a, nx, ny, sx, sy, sz)
        wsum[s] += w
        tx[s] += w * ax
        ty[s] += w * ay
        tz[s] += w * az
    return wsum, tx, ty, tz


@njit(cache=True)
def _move_sites(
    comp, nx, ny, nz, sx, sy, sz, site_pos, site_comp,
    wsum, tx, ty, tz, backoff,
):
    """Move each site toward its centroid target, stopping at the component
    boundary minus `backoff` (world units). Empty regions stay put.

    Returns (new positions, per-site displacement, empty-region count).
    """
    n_sites = site_pos.shape[0]
    new_pos = site_pos.copy()
    disp = np.zeros(n_sites)
    empty = 0
    for s in range(n_sites):
        if wsum[s] <= 0.0:
            empty += 1
            continue
        ax, ay, az = site_pos[s, 0], site_pos[s, 1], site_pos[s, 2]
        bx = tx[s] / wsum[s]
        by = ty[s] / wsum[s]
        bz = tz[s] / wsum[s]
        seg = _dist3(ax, ay, az, bx, by, bz)
        if seg == 0.0:
            continue
        want = site_comp[s]
        thit = _segment_hit_t(comp, nx, ny, nz, sx, sy, sz, ax, ay, az, bx, by, bz, want)
        if thit >= 1.0:
            px, py, pz = bx, by, bz
        else:
            travel = thit * seg - backoff
            if travel <= 0.0:
                continue
            f = travel / seg
            px = ax + (bx - ax) * f
            py = ay + (by - ay) * f
            pz = az + (bz - az) * f
        # the clamped point must still sit in the site's component
        cx = min(max(int(np.floor(px / sx)), 0), nx - 1)
        cy = min(max(int(np.floor(py / sy)), 0), ny - 1)
        cz = min(max(int(np.floor(pz / sz)), 0), nz - 1)
        if comp[cx + nx * (cy + ny * cz)] != want:
            continue
        new_pos[s, 0] = px
        new_pos[s, 1] = py
        new_pos[s, 2] = pz
        disp[s] = _dist3(ax, ay, az, px, py, pz)
    return new_pos, disp, empty
