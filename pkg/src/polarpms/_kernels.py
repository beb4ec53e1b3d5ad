"""Compiled inner loops shared by the cost functions and the PatchMatch engine.

Everything here works on packed arrays so that numba can compile it:

* ``intr``  (V, 4)      fx, fy, cx, cy
* ``rot``   (V, 3, 3)   world-to-camera rotations
* ``trans`` (V, 3)      world-to-camera translations
* ``gray``, ``dop``, ``c2p``, ``s2p`` (V, H, W) luminance, DoP and the doubled
  AoP angle as (cos 2phi, sin 2phi)
* ``geo_depth`` (V, H, W), ``geo_valid`` (V, H, W) depth maps of the other views
* ``srcs``  (K,)        source view indices for the current reference
* ``rel_R`` (K, 3, 3), ``rel_t`` (K, 3) reference-camera -> source-camera poses
* ``params`` float vector indexed by the ``P_*`` constants below
"""

import math

import numpy as np
from numba import njit

P_TAU_GEO = 0
P_TAU_POL = 1
P_TAU_DEP = 2
P_PSI_MAX = 3
P_RHO0 = 4
P_RADIUS = 5
P_SIGMA_C = 6
P_EPS_VAR = 7
P_DELTA_LINEAR = 8
P_BILATERAL = 9
P_USE_POL = 10
P_USE_DEP = 11
P_GEO_ACTIVE = 12
P_MIN_KEEP = 13
P_STEP = 14
N_PARAMS = 15

N_HYP = 7
DEGENERATE_EPS = 1e-12
AZIMUTH_EPS = 1e-12

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
# ordered as written: -2pi, -3pi/2, -pi, -pi/2, 0, pi/2, pi
AMBIGUITY_OFFSETS = np.array(
    [-2.0 * math.pi, -1.5 * math.pi, -math.pi, -0.5 * math.pi, 0.0, 0.5 * math.pi, math.pi]
)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


# -- counter-based random numbers -------------------------------------------


@njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def stream_key(seed, view_id, phase, iteration, pixel):
    h = mix64(np.uint64(seed) + _GOLDEN)
    h = mix64(h ^ np.uint64(view_id))
    h = mix64(h ^ np.uint64(phase * 65536 + iteration))
    return mix64(h ^ np.uint64(pixel))


@njit(cache=True, nogil=True)
def uniform(key, k):
    """k-th uniform draw in [0, 1) of the stream ``key``."""
    z = mix64(key + np.uint64(k + 1) * _GOLDEN)
    return float(z >> _S11) * _INV53


# -- scalar pieces ------------------------------------------------------------


@njit(cache=True, nogil=True)
def wrap_azimuth(alpha):
    """Map [0, 2pi) onto [-pi, pi), the range the offset set covers.

    ``alpha - 2pi`` is exact for ``alpha`` in [pi, 2pi)."""
    if alpha >= math.pi:
        return alpha - TWO_PI
    return alpha


@njit(cache=True, nogil=True)
def ambiguity_min_angle(alpha, phi):
    """Smallest |alpha - phi - o| over the seven ambiguity offsets o.

    ``alpha`` is first wrapped to [-pi, pi) so that, with ``phi`` in [0, pi),
    the result never exceeds pi/4. Evaluated as |(alpha - o) - phi| so that an
    AoP constructed as ``alpha - o`` yields exactly zero.
    """
    a = wrap_azimuth(alpha)
    best = math.inf
    for k in range(7):
        e = abs((a - AMBIGUITY_OFFSETS[k]) - phi)
        if e < best:
            best = e
    return best


@njit(cache=True, nogil=True)
def delta_fn(eta, linear):
    if linear:
        return 4.0 * eta / math.pi
    return math.sin(2.0 * eta)


@njit(cache=True, nogil=True)
def dop_weight(rho, rho0):
    m = min(rho, rho0) - rho0
    return 1.0 - m * m / (rho0 * rho0)


@njit(cache=True, nogil=True)
def azimuth(nx, ny):
    """Image azimuth in [0, 2pi) or -1 if undefined."""
    if abs(nx) < AZIMUTH_EPS and abs(ny) < AZIMUTH_EPS:
        return -1.0
    a = math.atan2(ny, nx)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


@njit(cache=True, nogil=True)
def azimuth_array(nx, ny):
    """Elementwise :func:`azimuth` with NaN where undefined."""
    out = np.empty(nx.shape[0])
    for i in range(nx.shape[0]):
        a = azimuth(nx[i], ny[i])
        out[i] = a if a >= 0.0 else np.nan
    return out


@njit(cache=True, nogil=True)
def bilinear(img, x, y):
    h, w = img.shape
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    if x0 >= w - 1:
        x0 = max(w - 2, 0)
    if y0 >= h - 1:
        y0 = max(h - 2, 0)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


# -- patches and similarity -------------------------------------------------


@njit(cache=True, nogil=True)
def fill_ref_patch(gray_r, u, v, radius, step, sigma_c, bilateral, du, dv, val, wt):
    """Fill reference patch samples around (u, v); returns the sample count.

    Samples falling outside the reference image are skipped.
    """
    h, w = gray_r.shape
    center = gray_r[v, u]
    inv = 1.0 / (2.0 * sigma_c * sigma_c)
    n = 0
    for dy in range(-radius, radius + 1, step):
        y = v + dy
        if y < 0 or y >= h:
            continue
        for dx in range(-radius, radius + 1, step):
            x = u + dx
            if x < 0 or x >= w:
                continue
            g = gray_r[y, x]
            du[n] = dx
            dv[n] = dy
            val[n] = g
            if bilateral:
                diff = g - center
                wt[n] = math.exp(-diff * diff * inv)
            else:
                wt[n] = 1.0
            n += 1
    return n


@njit(cache=True, nogil=True)
def weighted_ncc(a, b, wt, n, eps_var):
    sw = 0.0
    sa = 0.0
    sb = 0.0
    for k in range(n):
        sw += wt[k]
        sa += wt[k] * a[k]
        sb += wt[k] * b[k]
    if sw <= 0.0:
        return 0.0
    ma = sa / sw
    mb = sb / sw
    saa = 0.0
    sbb = 0.0
    sab = 0.0
    for k in range(n):
        da = a[k] - ma
        db = b[k] - mb
        saa += wt[k] * da * da
        sbb += wt[k] * db * db
        sab += wt[k] * da * db
    va = saa / sw
    vb = sbb / sw
    if va < eps_var or vb < eps_var:
        return 0.0
    s = (sab / sw) / math.sqrt(va * vb)
    if s > 1.0:
        s = 1.0
    elif s < -1.0:
        s = -1.0
    return s


@njit(cache=True, nogil=True)
def homography(intr, r, m, Rr, tr, nx, ny, nz, plane_d, H):
    """Fill H (9,) with the plane-induced homography reference -> source view m.

    ``Rr``/``tr`` is the reference-to-source relative pose and the plane is
    ``n . X = plane_d`` in reference camera coordinates.
    """
    fxr = intr[r, 0]
    fyr = intr[r, 1]
    cxr = intr[r, 2]
    cyr = intr[r, 3]
    fxs = intr[m, 0]
    fys = intr[m, 1]
    cxs = intr[m, 2]
    cys = intr[m, 3]
    # A = R + t n^T / d
    a00 = Rr[0, 0] + tr[0] * nx / plane_d
    a01 = Rr[0, 1] + tr[0] * ny / plane_d
    a02 = Rr[0, 2] + tr[0] * nz / plane_d
    a10 = Rr[1, 0] + tr[1] * nx / plane_d
    a11 = Rr[1, 1] + tr[1] * ny / plane_d
    a12 = Rr[1, 2] + tr[1] * nz / plane_d
    a20 = Rr[2, 0] + tr[2] * nx / plane_d
    a21 = Rr[2, 1] + tr[2] * ny / plane_d
    a22 = Rr[2, 2] + tr[2] * nz / plane_d
    # B = K_src A
    b00 = fxs * a00 + cxs * a20
    b01 = fxs * a01 + cxs * a21
    b02 = fxs * a02 + cxs * a22
    b10 = fys * a10 + cys * a20
    b11 = fys * a11 + cys * a21
    b12 = fys * a12 + cys * a22
    # H = B K_ref^-1
    H[0] = b00 / fxr
    H[1] = b01 / fyr
    H[2] = b02 - b00 * cxr / fxr - b01 * cyr / fyr
    H[3] = b10 / fxr
    H[4] = b11 / fyr
    H[5] = b12 - b10 * cxr / fxr - b11 * cyr / fyr
    H[6] = a20 / fxr
    H[7] = a21 / fyr
    H[8] = a22 - a20 * cxr / fxr - a21 * cyr / fyr


@njit(cache=True, nogil=True)
def warp_similarity(gray_s, H, u, v, du, dv, val, wt, n, eps_var, min_keep, buf_a, buf_b, buf_w):
    """NCC between the reference patch and its warp into a source image.

    Out-of-bounds samples are dropped; if fewer than ``min_keep * n`` survive
    the view scores -1 (worst).
    """
    h, w = gray_s.shape
    kept = 0
    for k in range(n):
        x = u + du[k]
        y = v + dv[k]
        hz = H[6] * x + H[7] * y + H[8]
        if hz <= 1e-12:
            continue
        xs = (H[0] * x + H[1] * y + H[2]) / hz
        ys = (H[3] * x + H[4] * y + H[5]) / hz
        if xs < 0.0 or ys < 0.0 or xs > w - 1 or ys > h - 1:
            continue
        buf_a[kept] = val[k]
        buf_b[kept] = bilinear(gray_s, xs, ys)
        buf_w[kept] = wt[k]
        kept += 1
    if kept == 0 or kept < min_keep * n:
        return -1.0
    return weighted_ncc(buf_a, buf_b, buf_w, kept, eps_var)


# -- the four consistency terms ------------------------------------------------


@njit(cache=True, nogil=True)
def geometric_psi(intr, r, m, Rr, tr, u, v, d, geo_depth, geo_valid, psi_max):
    """Forward-backward reprojection error of (u, v) at depth d through view m."""
    fxr = intr[r, 0]
    fyr = intr[r, 1]
    cxr = intr[r, 2]
    cyr = intr[r, 3]
    X0 = d * (u - cxr) / fxr
    X1 = d * (v - cyr) / fyr
    X2 = d
    Y0 = Rr[0, 0] * X0 + Rr[0, 1] * X1 + Rr[0, 2] * X2 + tr[0]
    Y1 = Rr[1, 0] * X0 + Rr[1, 1] * X1 + Rr[1, 2] * X2 + tr[1]
    Y2 = Rr[2, 0] * X0 + Rr[2, 1] * X1 + Rr[2, 2] * X2 + tr[2]
    if Y2 <= 0.0:
        return psi_max
    fxs = intr[m, 0]
    fys = intr[m, 1]
    cxs = intr[m, 2]
    cys = intr[m, 3]
    us = fxs * Y0 / Y2 + cxs
    vs = fys * Y1 / Y2 + cys
    h, w = geo_depth.shape[1], geo_depth.shape[2]
    iu = int(math.floor(us + 0.5))
    iv = int(math.floor(vs + 0.5))
    if iu < 0 or iv < 0 or iu >= w or iv >= h:
        return psi_max
    if not geo_valid[m, iv, iu]:
        return psi_max
    ds = geo_depth[m, iv, iu]
    if ds <= 0.0:
        return psi_max
    Z0 = ds * (us - cxs) / fxs
    Z1 = ds * (vs - cys) / fys
    Z2 = ds
    # back into the reference frame: R^T (Z - t)
    q0 = Z0 - tr[0]
    q1 = Z1 - tr[1]
    q2 = Z2 - tr[2]
    W0 = Rr[0, 0] * q0 + Rr[1, 0] * q1 + Rr[2, 0] * q2
    W1 = Rr[0, 1] * q0 + Rr[1, 1] * q1 + Rr[2, 1] * q2
    W2 = Rr[0, 2] * q0 + Rr[1, 2] * q1 + Rr[2, 2] * q2
    if W2 <= 0.0:
        return psi_max
    ur = fxr * W0 / W2 + cxr
    vr = fyr * W1 / W2 + cyr
    return math.sqrt((ur - u) * (ur - u) + (vr - v) * (vr - v))


@njit(cache=True, nogil=True)
def depth_normal_term(intr, r, u, v, d, nx, ny, nz, cur_depth, cur_valid):
    h, w = cur_depth.shape
    if u + 1 >= w or v + 1 >= h:
        return 0.0
    if not cur_valid[v, u + 1] or not cur_valid[v + 1, u]:
        return 0.0
    dh = cur_depth[v, u + 1]
    dv_ = cur_depth[v + 1, u]
    fx = intr[r, 0]
    fy = intr[r, 1]
    cx = intr[r, 2]
    cy = intr[r, 3]
    p0x = d * (u - cx) / fx
    p0y = d * (v - cy) / fy
    p0z = d
    ax = dh * (u + 1 - cx) / fx - p0x
    ay = dh * (v - cy) / fy - p0y
    az = dh - p0z
    bx = dv_ * (u - cx) / fx - p0x
    by = dv_ * (v + 1 - cy) / fy - p0y
    bz = dv_ - p0z
    cx_ = ay * bz - az * by
    cy_ = az * bx - ax * bz
    cz_ = ax * by - ay * bx
    nrm = math.sqrt(cx_ * cx_ + cy_ * cy_ + cz_ * cz_)
    if nrm < DEGENERATE_EPS:
        return 0.0
    cx_ /= nrm
    cy_ /= nrm
    cz_ /= nrm
    if cx_ * p0x + cy_ * p0y + cz_ * p0z > 0.0:
        cx_ = -cx_
        cy_ = -cy_
        cz_ = -cz_
    return 1.0 - (nx * cx_ + ny * cy_ + nz * cz_)


@njit(cache=True, nogil=True)
def hypothesis_terms(
    r, u, v, d, nx, ny, nz,
    intr, gray, dop, c2p, s2p, aop_r,
    geo_depth, geo_valid, srcs, rel_R, rel_t,
    cur_depth, cur_valid, params,
    du, dv, val, wt, n, H, buf_a, buf_b, buf_w, out,
):
    """Evaluate the four terms for one hypothesis; writes
    ``out = [F_pho, F_geo, F_pol, F_dep, total]``."""
    n_src = srcs.shape[0]
    psi_max = params[P_PSI_MAX]
    eps_var = params[P_EPS_VAR]
    min_keep = params[P_MIN_KEEP]
    geo_active = params[P_GEO_ACTIVE] != 0.0
    use_pol = params[P_USE_POL] != 0.0
    use_dep = params[P_USE_DEP] != 0.0
    fxr = intr[r, 0]
    fyr = intr[r, 1]
    cxr = intr[r, 2]
    cyr = intr[r, 3]
    X0 = d * (u - cxr) / fxr
    X1 = d * (v - cyr) / fyr
    X2 = d
    plane_d = nx * X0 + ny * X1 + nz * X2
    xnorm = math.sqrt(X0 * X0 + X1 * X1 + X2 * X2)
    degenerate = abs(plane_d) < DEGENERATE_EPS * xnorm

    pho = 0.0
    geo = 0.0
    pol_num = 0.0
    pol_den = 0.0
    rho0 = params[P_RHO0]
    linear = params[P_DELTA_LINEAR] != 0.0
    if use_pol:
        a = azimuth(nx, ny)
        if a >= 0.0:
            g = dop_weight(dop[r, v, u], rho0)
            pol_num += g * delta_fn(ambiguity_min_angle(a, aop_r[v, u]), linear)
            pol_den += g
    for k in range(n_src):
        m = srcs[k]
        Rr = rel_R[k]
        tr = rel_t[k]
        sigma = -1.0
        if not degenerate:
            # the plane must not pass through the source centre either
            c0 = -(Rr[0, 0] * tr[0] + Rr[1, 0] * tr[1] + Rr[2, 0] * tr[2])
            c1 = -(Rr[0, 1] * tr[0] + Rr[1, 1] * tr[1] + Rr[2, 1] * tr[2])
            c2 = -(Rr[0, 2] * tr[0] + Rr[1, 2] * tr[1] + Rr[2, 2] * tr[2])
            if abs(plane_d - (nx * c0 + ny * c1 + nz * c2)) >= DEGENERATE_EPS * xnorm:
                homography(intr, r, m, Rr, tr, nx, ny, nz, plane_d, H)
                sigma = warp_similarity(
                    gray[m], H, u, v, du, dv, val, wt, n, eps_var, min_keep, buf_a, buf_b, buf_w
                )
        pho += 1.0 - sigma
        if geo_active:
            psi = geometric_psi(intr, r, m, Rr, tr, u, v, d, geo_depth, geo_valid, psi_max)
            geo += 1.0 - sigma + 0.5 * min(psi, psi_max)
        if use_pol:
            mx = Rr[0, 0] * nx + Rr[0, 1] * ny + Rr[0, 2] * nz
            my = Rr[1, 0] * nx + Rr[1, 1] * ny + Rr[1, 2] * nz
            a = azimuth(mx, my)
            if a < 0.0:
                continue
            Y0 = Rr[0, 0] * X0 + Rr[0, 1] * X1 + Rr[0, 2] * X2 + tr[0]
            Y1 = Rr[1, 0] * X0 + Rr[1, 1] * X1 + Rr[1, 2] * X2 + tr[1]
            Y2 = Rr[2, 0] * X0 + Rr[2, 1] * X1 + Rr[2, 2] * X2 + tr[2]
            if Y2 <= 0.0:
                continue
            xs = intr[m, 0] * Y0 / Y2 + intr[m, 2]
            ys = intr[m, 1] * Y1 / Y2 + intr[m, 3]
            hh, ww = dop.shape[1], dop.shape[2]
            if xs < 0.0 or ys < 0.0 or xs > ww - 1 or ys > hh - 1:
                continue
            cc = bilinear(c2p[m], xs, ys)
            ss = bilinear(s2p[m], xs, ys)
            phi = 0.5 * math.atan2(ss, cc)
            if phi < 0.0:
                phi += math.pi
            if phi >= math.pi:
                phi = 0.0
            g = dop_weight(bilinear(dop[m], xs, ys), rho0)
            pol_num += g * delta_fn(ambiguity_min_angle(a, phi), linear)
            pol_den += g
    pho /= n_src
    geo /= n_src
    pol = pol_num / pol_den if pol_den > 0.0 else 0.0
    dep = 0.0
    if use_dep:
        dep = depth_normal_term(intr, r, u, v, d, nx, ny, nz, cur_depth, cur_valid)
    total = pho
    if geo_active:
        total += params[P_TAU_GEO] * geo
    if use_pol:
        total += params[P_TAU_POL] * pol
    if use_dep:
        total += params[P_TAU_DEP] * dep
    out[0] = pho
    out[1] = geo
    out[2] = pol
    out[3] = dep
    out[4] = total


# -- hypotheses ------------------------------------------------------------------


@njit(cache=True, nogil=True)
def random_normal(key, k0, rx, ry, rz, out, row):
    z = 2.0 * uniform(key, k0) - 1.0
    az = TWO_PI * uniform(key, k0 + 1)
    s = math.sqrt(max(0.0, 1.0 - z * z))
    x = s * math.cos(az)
    y = s * math.sin(az)
    if x * rx + y * ry + z * rz >= 0.0:
        x = -x
        y = -y
        z = -z
    out[row, 1] = x
    out[row, 2] = y
    out[row, 3] = z


@njit(cache=True, nogil=True)
def generate_hypotheses(u, v, order, depth, normal, fx, fy, cx, cy, dmin, dmax, eps_d, theta_n, key, out):
    """Fill ``out`` (7, 4) with (depth, nx, ny, nz) rows in the canonical order:
    current, propagated, random depth, random normal, both random,
    perturbed depth, perturbed normal."""
    h, w = depth.shape
    d = depth[v, u]
    n0 = normal[v, u, 0]
    n1 = normal[v, u, 1]
    n2 = normal[v, u, 2]
    rx = (u - cx) / fx
    ry = (v - cy) / fy
    rz = 1.0
    for i in range(N_HYP):
        out[i, 0] = d
        out[i, 1] = n0
        out[i, 2] = n1
        out[i, 3] = n2

    # propagation from the scan predecessor
    pu = u
    pv = v
    if order == 0:
        pu = u - 1
    elif order == 1:
        pu = u + 1
    elif order == 2:
        pv = v - 1
    else:
        pv = v + 1
    if 0 <= pu < w and 0 <= pv < h:
        dp = depth[pv, pu]
        m0 = normal[pv, pu, 0]
        m1 = normal[pv, pu, 1]
        m2 = normal[pv, pu, 2]
        px = dp * (pu - cx) / fx
        py = dp * (pv - cy) / fy
        pz = dp
        denom = m0 * rx + m1 * ry + m2 * rz
        dprop = dp
        if abs(denom) > DEGENERATE_EPS:
            dprop = (m0 * px + m1 * py + m2 * pz) / denom
            if not (dmin <= dprop <= dmax):
                dprop = dp
        if denom > 0.0:
            m0 = -m0
            m1 = -m1
            m2 = -m2
        if m0 * rx + m1 * ry + m2 * rz < 0.0:
            out[1, 0] = dprop
            out[1, 1] = m0
            out[1, 2] = m1
            out[1, 3] = m2
        else:
            out[1, 0] = dprop

    drnd = dmin + (dmax - dmin) * uniform(key, 0)
    out[2, 0] = drnd
    random_normal(key, 1, rx, ry, rz, out, 3)
    out[4, 0] = drnd
    out[4, 1] = out[3, 1]
    out[4, 2] = out[3, 2]
    out[4, 3] = out[3, 3]

    dprt = d * (1.0 + eps_d * (2.0 * uniform(key, 3) - 1.0))
    out[5, 0] = min(max(dprt, dmin), dmax)

    ang = theta_n * uniform(key, 4)
    if ang > 0.0:
        # tangent basis of n
        if abs(n0) < 0.9:
            tx, ty, tz = 0.0, n2, -n1
        else:
            tx, ty, tz = -n2, 0.0, n0
        tn = math.sqrt(tx * tx + ty * ty + tz * tz)
        tx /= tn
        ty /= tn
        tz /= tn
        sx = n1 * tz - n2 * ty
        sy = n2 * tx - n0 * tz
        sz = n0 * ty - n1 * tx
        b = TWO_PI * uniform(key, 5)
        kx = math.cos(b) * tx + math.sin(b) * sx
        ky = math.cos(b) * ty + math.sin(b) * sy
        kz = math.cos(b) * tz + math.sin(b) * sz
        # rotate n about k (k is orthogonal to n)
        ca = math.cos(ang)
        sa = math.sin(ang)
        qx = n0 * ca + (ky * n2 - kz * n1) * sa
        qy = n1 * ca + (kz * n0 - kx * n2) * sa
        qz = n2 * ca + (kx * n1 - ky * n0) * sa
        qn = math.sqrt(qx * qx + qy * qy + qz * qz)
        qx /= qn
        qy /= qn
        qz /= qn
        if qx * rx + qy * ry + qz * rz >= 0.0:
            qx = -qx
            qy = -qy
            qz = -qz
        out[6, 1] = qx
        out[6, 2] = qy
        out[6, 3] = qz


@njit(cache=True, nogil=True)
def init_map(view_id, seed, fx, fy, cx, cy, dmin, dmax, depth, normal):
    h, w = depth.shape
    tmp = np.empty((1, 4))
    for v in range(h):
        for u in range(w):
            key = stream_key(seed, view_id, 0, 0, v * w + u)
            depth[v, u] = dmin + (dmax - dmin) * uniform(key, 0)
            random_normal(key, 1, (u - cx) / fx, (v - cy) / fy, 1.0, tmp, 0)
            normal[v, u, 0] = tmp[0, 1]
            normal[v, u, 1] = tmp[0, 2]
            normal[v, u, 2] = tmp[0, 3]


# -- sweeps ------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _scratch(params):
    radius = int(params[P_RADIUS])
    size = (2 * radius + 1) * (2 * radius + 1)
    return (
        np.empty(size, dtype=np.int64),
        np.empty(size, dtype=np.int64),
        np.empty(size),
        np.empty(size),
        np.empty(9),
        np.empty(size),
        np.empty(size),
        np.empty(size),
        np.empty(5),
    )


@njit(cache=True, nogil=True)
def score_map(
    r, intr, gray, dop, c2p, s2p, aop_r, geo_depth, geo_valid, srcs, rel_R, rel_t, params,
    depth, normal, valid, cost,
):
    """Cost of every pixel's current hypothesis (no commits)."""
    h, w = depth.shape
    du, dv, val, wt, H, ba, bb, bw, out = _scratch(params)
    radius = int(params[P_RADIUS])
    step = int(params[P_STEP])
    bilateral = params[P_BILATERAL] != 0.0
    for v in range(h):
        for u in range(w):
            n = fill_ref_patch(gray[r], u, v, radius, step, params[P_SIGMA_C], bilateral, du, dv, val, wt)
            hypothesis_terms(
                r, u, v, depth[v, u], normal[v, u, 0], normal[v, u, 1], normal[v, u, 2],
                intr, gray, dop, c2p, s2p, aop_r, geo_depth, geo_valid, srcs, rel_R, rel_t,
                depth, valid, params, du, dv, val, wt, n, H, ba, bb, bw, out,
            )
            cost[v, u] = out[4]


@njit(cache=True, nogil=True)
def sweep(
    r, view_id, order, phase, iteration, seed, dmin, dmax, eps_d, theta_n, enabled,
    intr, gray, dop, c2p, s2p, aop_r, geo_depth, geo_valid, srcs, rel_R, rel_t, params,
    depth, normal, valid, cost,
):
    """One PatchMatch sweep in scan ``order`` (0 row, 1 reverse row, 2 column,
    3 reverse column). The incumbent keeps its stored cost; a candidate replaces
    it only with a strictly lower cost, so the stored cost never increases."""
    h, w = depth.shape
    du, dv, val, wt, H, ba, bb, bw, out = _scratch(params)
    radius = int(params[P_RADIUS])
    step = int(params[P_STEP])
    bilateral = params[P_BILATERAL] != 0.0
    fx = intr[r, 0]
    fy = intr[r, 1]
    cx = intr[r, 2]
    cy = intr[r, 3]
    hyps = np.empty((N_HYP, 4))
    total = h * w
    for idx in range(total):
        if order == 0:
            v = idx // w
            u = idx % w
        elif order == 1:
            v = h - 1 - idx // w
            u = w - 1 - idx % w
        elif order == 2:
            u = idx // h
            v = idx % h
        else:
            u = w - 1 - idx // h
            v = h - 1 - idx % h
        key = stream_key(seed, view_id, phase, iteration, v * w + u)
        generate_hypotheses(u, v, order, depth, normal, fx, fy, cx, cy, dmin, dmax, eps_d, theta_n, key, hyps)
        n = fill_ref_patch(gray[r], u, v, radius, step, params[P_SIGMA_C], bilateral, du, dv, val, wt)
        best = 0
        best_cost = cost[v, u]
        for i in range(1, N_HYP):
            if not enabled[i]:
                continue
            hypothesis_terms(
                r, u, v, hyps[i, 0], hyps[i, 1], hyps[i, 2], hyps[i, 3],
                intr, gray, dop, c2p, s2p, aop_r, geo_depth, geo_valid, srcs, rel_R, rel_t,
                depth, valid, params, du, dv, val, wt, n, H, ba, bb, bw, out,
            )
            if out[4] < best_cost:
                best_cost = out[4]
                best = i
        if best != 0:
            depth[v, u] = hyps[best, 0]
            normal[v, u, 0] = hyps[best, 1]
            normal[v, u, 1] = hyps[best, 2]
            normal[v, u, 2] = hyps[best, 3]
            cost[v, u] = best_cost
