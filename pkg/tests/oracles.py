"""Independent reference implementations used as test oracles.

Everything here is written the slow, obvious way (python loops, direct
formulas) so it shares no code path with the library under test.
"""

import math

import numpy as np


def numeric_gradient(f, x, h=1e-6):
    """Central finite differences of a scalar function at x (64-bit)."""
    x = np.array(x, dtype=np.float64, copy=True)
    grad = np.zeros_like(x)
    flat, gflat = x.ravel(), grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return np.max(np.abs(analytic - numeric)) / scale


def reference_attention(q, k, v):
    """Scaled dot-product attention via direct loops."""
    n, dk = q.shape
    dv = v.shape[1]
    out = np.zeros((n, dv))
    for i in range(n):
        logits = [sum(q[i, t] * k[j, t] for t in range(dk)) / math.sqrt(dk)
                  for j in range(n)]
        m = max(logits)
        weights = [math.exp(l - m) for l in logits]
        z = sum(weights)
        for d in range(dv):
            out[i, d] = sum(w / z * v[j, d] for j, w in enumerate(weights))
    return out


def brute_otsu_level(image):
    """Exhaustive search over all 256 split levels for the one maximizing
    between-class variance.  Classes are level <= t and level > t; ties go
    to the lowest level."""
    levels = np.round(np.asarray(image, dtype=np.float64) * 255.0).astype(np.int64)
    best_level, best_score = 0, -1.0
    total = levels.size
    for t in range(256):
        lo = levels <= t
        n0 = int(lo.sum())
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            score = 0.0
        else:
            mu0 = float(levels[lo].mean())
            mu1 = float(levels[~lo].mean())
            score = (n0 / total) * (n1 / total) * (mu0 - mu1) ** 2
        if score > best_score:
            best_score, best_level = score, t
    return best_level


def naive_window_stats(image, window):
    """Per-pixel mean and standard deviation over a clipped square window,
    computed by explicit slicing."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    half = window // 2
    means = np.zeros_like(image)
    stds = np.zeros_like(image)
    for y in range(h):
        for x in range(w):
            y0, y1 = max(0, y - half), min(h, y + half + 1)
            x0, x1 = max(0, x - half), min(w, x + half + 1)
            patch = image[y0:y1, x0:x1]
            means[y, x] = patch.mean()
            stds[y, x] = patch.std()
    return means, stds


def naive_thin(mask):
    """Zhang-Suen thinning with explicit per-pixel loops.

    ``mask`` is boolean, True for object pixels.  Returns the skeleton mask.
    """
    img = np.asarray(mask, dtype=np.int64).copy()

    def neighbours(y, x, im):
        # P2..P9 clockwise starting north
        return [im[y - 1, x], im[y - 1, x + 1], im[y, x + 1], im[y + 1, x + 1],
                im[y + 1, x], im[y + 1, x - 1], im[y, x - 1], im[y - 1, x - 1]]

    padded = np.pad(img, 1)
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            to_delete = []
            for y in range(1, padded.shape[0] - 1):
                for x in range(1, padded.shape[1] - 1):
                    if padded[y, x] != 1:
                        continue
                    p = neighbours(y, x, padded)
                    b = sum(p)
                    if not (2 <= b <= 6):
                        continue
                    ring = p + [p[0]]
                    a = sum(1 for i in range(8) if ring[i] == 0 and ring[i + 1] == 1)
                    if a != 1:
                        continue
                    p2, p4, p6, p8 = p[0], p[2], p[4], p[6]
                    if step == 0:
                        if p2 * p4 * p6 != 0 or p4 * p6 * p8 != 0:
                            continue
                    else:
                        if p2 * p4 * p8 != 0 or p2 * p6 * p8 != 0:
                            continue
                    to_delete.append((y, x))
            if to_delete:
                changed = True
                for y, x in to_delete:
                    padded[y, x] = 0
    return padded[1:-1, 1:-1].astype(bool)


def brute_drd_weight_matrix():
    """5x5 reciprocal-distance weights, zero at the center, normalized so
    the 24 nonzero entries sum to 1."""
    w = np.zeros((5, 5))
    for i in range(5):
        for j in range(5):
            if (i, j) == (2, 2):
                continue
            w[i, j] = 1.0 / math.hypot(i - 2, j - 2)
    return w / w.sum()


def brute_drd(pred, gt):
    """Distance-reciprocal distortion computed with explicit window loops.

    Out-of-image window positions take the value of the ground-truth pixel
    whose neighborhood is being examined.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    h, w = gt.shape
    weights = brute_drd_weight_matrix()

    nubn = 0
    for by in range(0, h, 8):
        for bx in range(0, w, 8):
            block = gt[by:by + 8, bx:bx + 8]
            if 0 < block.sum() < block.size:
                nubn += 1

    total = 0.0
    for y in range(h):
        for x in range(w):
            if pred[y, x] == gt[y, x]:
                continue
            acc = 0.0
            for dy in range(-2, 3):
                for dx in range(-2, 3):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        ref = gt[yy, xx]
                    else:
                        ref = gt[y, x]
                    acc += weights[dy + 2, dx + 2] * abs(pred[y, x] - ref)
            total += acc
    return total / nubn
