"""Slow, obviously-correct reference implementations used only by tests."""

from __future__ import annotations

import math
from collections import deque

import numpy as np

N8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
N4 = [(-1, 0), (0, -1), (0, 1), (1, 0)]


def flood_components(mask, steps=N8):
    """Label map and sizes by breadth-first flood fill in raster order."""
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    labels = np.zeros((h, w), dtype=np.int64)
    sizes = []
    for y in range(h):
        for x in range(w):
            if m[y, x] and not labels[y, x]:
                k = len(sizes) + 1
                labels[y, x] = k
                q = deque([(y, x)])
                n = 0
                while q:
                    cy, cx = q.popleft()
                    n += 1
                    for dy, dx in steps:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and m[ny, nx] and not labels[ny, nx]:
                            labels[ny, nx] = k
                            q.append((ny, nx))
                sizes.append(n)
    return labels, sizes


def same_partition(a, b) -> bool:
    """True when two label maps describe the same regions up to renaming."""
    if not np.array_equal(a > 0, b > 0):
        return False
    pairs = set(zip(a[a > 0].tolist(), b[b > 0].tolist()))
    return len(pairs) == len({p[0] for p in pairs}) == len({p[1] for p in pairs})


def fill_holes(mask):
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    outside = np.zeros_like(m)
    q = deque()
    for y in range(h):
        for x in range(w):
            if (y in (0, h - 1) or x in (0, w - 1)) and not m[y, x]:
                outside[y, x] = True
                q.append((y, x))
    while q:
        cy, cx = q.popleft()
        for dy, dx in N4:
            ny, nx = cy + dy, cx + dx
            if 0 <= ny < h and 0 <= nx < w and not m[ny, nx] and not outside[ny, nx]:
                outside[ny, nx] = True
                q.append((ny, nx))
    return ~outside


def convolve(img, k):
    """Direct-sum 3x3 convolution with replicated borders, clamped."""
    a = np.asarray(img, dtype=np.int64)
    h, w = a.shape
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            s = 0
            for i in range(3):
                for j in range(3):
                    yy = min(max(y - (i - 1), 0), h - 1)
                    xx = min(max(x - (j - 1), 0), w - 1)
                    s += k[i][j] * a[yy, xx]
            out[y, x] = min(max(s, 0), 255)
    return out.astype(np.uint8)


def local_mean(img, block):
    a = np.asarray(img, dtype=np.float64)
    h, w = a.shape
    r = block // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            s = 0.0
            for yy in range(y - r, y + r + 1):
                for xx in range(x - r, x + r + 1):
                    s += a[min(max(yy, 0), h - 1), min(max(xx, 0), w - 1)]
            out[y, x] = s / block ** 2
    return out


def dilate(mask, side):
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    r = side // 2
    out = np.zeros_like(m)
    for y, x in zip(*np.nonzero(m)):
        out[max(y - r, 0):y + r + 1, max(x - r, 0):x + r + 1] = True
    return out


def erode(mask, side):
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    r = side // 2
    out = np.zeros_like(m)
    for y in range(h):
        for x in range(w):
            if y - r < 0 or x - r < 0 or y + r >= h or x + r >= w:
                continue
            out[y, x] = m[y - r:y + r + 1, x - r:x + r + 1].all()
    return out


def neighbour_counts(mask):
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            out[y, x] = sum(1 for dy, dx in N8
                            if 0 <= y + dy < h and 0 <= x + dx < w and m[y + dy, x + dx])
    return out


def pair_stats(pts):
    pts = [tuple(map(float, p)) for p in pts]
    d = [math.dist(pts[i], pts[j]) for i in range(len(pts)) for j in range(i + 1, len(pts))]
    if not d:
        return 0.0, 0.0
    mean = sum(d) / len(d)
    return mean, math.sqrt(sum((v - mean) ** 2 for v in d) / len(d))


def two_pass_stats(values):
    v = [float(x) for x in values]
    if not v:
        return 0.0, 0.0
    mean = sum(v) / len(v)
    return mean, math.sqrt(sum((x - mean) ** 2 for x in v) / len(v))


def angle_hist(pts):
    pts = [tuple(map(float, p)) for p in pts]
    out = [0.0] * 8
    n = 0
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            if i == j:
                continue
            t = math.atan2(b[1] - a[1], b[0] - a[0])
            k = 7 if t >= math.pi else int((t + math.pi) // (math.pi / 4))
            out[min(k, 7)] += 1
            n += 1
    return [c / n for c in out] if n else out


def density(pts):
    grid = [[0.0] * 10 for _ in range(10)]
    for x, y in pts:
        grid[min(int(y * 10), 9)][min(int(x * 10), 9)] += 1
    flat = [c / len(pts) for row in grid for c in row] if pts else [0.0] * 100
    return flat


def knn_predict(train_x, train_y, q, k, n_classes):
    d = [math.sqrt(sum((a - b) ** 2 for a, b in zip(row, q))) for row in train_x]
    ranked = sorted(range(len(d)), key=lambda i: (d[i], i))[:min(k, len(d))]
    if d[ranked[0]] == 0.0:
        return int(train_y[ranked[0]])
    score = [0.0] * n_classes
    for i in ranked:
        score[int(train_y[i])] += 1.0 / (d[i] + 1e-12)
    best = max(score)
    return score.index(best)


def kkt_violation(k, y, alpha, bias, c):
    """Largest violation of the soft-margin KKT conditions."""
    f = k @ (alpha * y) + bias
    m = y * f
    worst = 0.0
    tol_a = 1e-8 * c
    for ai, mi in zip(alpha, m):
        if ai <= tol_a:
            worst = max(worst, 1.0 - mi)
        elif ai >= c - tol_a:
            worst = max(worst, mi - 1.0)
        else:
            worst = max(worst, abs(mi - 1.0))
    return worst


def central_gradient(f, theta, h=1e-6):
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g
