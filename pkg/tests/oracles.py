"""Independent scalar re-implementations used as test oracles.

Everything here is written with explicit per-pixel loops and two-pass
window statistics so it shares no code path with the vectorised library.
"""

import math


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def ssim_dissim_px(x, y, r, c, ch, c1, c2, radius=1):
    h, w = len(x), len(x[0])
    xs, ys = [], []
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            rr, cc = _clamp(r + dr, 0, h - 1), _clamp(c + dc, 0, w - 1)
            xs.append(x[rr][cc][ch])
            ys.append(y[rr][cc][ch])
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    vx = math.fsum((a - mx) ** 2 for a in xs) / n
    vy = math.fsum((b - my) ** 2 for b in ys) / n
    cxy = math.fsum((a - mx) * (b - my) for a, b in zip(xs, ys)) / n
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return _clamp(1.0 - s, 0.0, 2.0)


def sigma_px(x, y, r, c, lam=0.15, eps=0.01, c1=0.01 ** 2, c2=0.03 ** 2, ssim_scale=1.0):
    """Robust penalty at one pixel; ``ssim_scale`` divides inputs of the SSIM part."""
    nch = len(x[0][0])
    charb = math.fsum(math.sqrt((x[r][c][k] - y[r][c][k]) ** 2 + eps * eps) for k in range(nch)) / nch
    if lam == 1.0:
        return lam * charb
    xs = [[[v / ssim_scale for v in px] for px in row] for row in x] if ssim_scale != 1.0 else x
    ys = [[[v / ssim_scale for v in px] for px in row] for row in y] if ssim_scale != 1.0 else y
    ssim = math.fsum(ssim_dissim_px(xs, ys, r, c, k, c1, c2) for k in range(nch)) / nch
    return lam * charb + (1 - lam) * ssim


def sigma_map(x, y, **kw):
    h, w = len(x), len(x[0])
    return [[sigma_px(x, y, r, c, **kw) for c in range(w)] for r in range(h)]


def recon_basic(x, y, **kw):
    return math.fsum(v for row in sigma_map(x, y, **kw) for v in row)


def lm_mask(err, occ):
    h, w = len(err), len(err[0])
    thr = math.fsum(err[r][c] * occ[r][c] for r in range(h) for c in range(w)) / (h * w)
    return [[1 if err[r][c] < thr else 0 for c in range(w)] for r in range(h)]


def recon_masked(x, y, occ, **kw):
    err = sigma_map(x, y, **kw)
    lm = lm_mask(err, occ)
    h, w = len(err), len(err[0])
    loss = math.fsum(err[r][c] * occ[r][c] * lm[r][c] for r in range(h) for c in range(w))
    return loss, lm


def consistency(rigid, flow, edge, blank, lm_f, **kw):
    h, w = len(rigid), len(rigid[0])
    diag = math.sqrt(h * h + w * w)
    total = []
    for r in range(h):
        for c in range(w):
            weight = (1 - edge[r][c] * blank[r][c]) * lm_f[r][c]
            if weight:
                total.append(weight * sigma_px(rigid, flow, r, c, ssim_scale=diag, **kw))
    return math.fsum(total)




def smoothness(q, guide):
    """Edge-weighted squared forward differences of a list-of-lists field ``q``."""
    h, w = len(q), len(q[0])
    nch = len(guide[0][0])
    terms = []
    for r in range(h):
        for c in range(w):
            if c + 1 < w:
                g = math.fsum(abs(guide[r][c + 1][k] - guide[r][c][k]) for k in range(nch)) / nch
                terms.append(((q[r][c + 1] - q[r][c]) * math.exp(-g)) ** 2)
            if r + 1 < h:
                g = math.fsum(abs(guide[r + 1][c][k] - guide[r][c][k]) for k in range(nch)) / nch
                terms.append(((q[r + 1][c] - q[r][c]) * math.exp(-g)) ** 2)
    return math.fsum(terms)


def smoothness_flow(flow, guide):
    u = [[px[0] for px in row] for row in flow]
    v = [[px[1] for px in row] for row in flow]
    return smoothness(u, guide) + smoothness(v, guide)
