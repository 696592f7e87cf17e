"""Planar geometry kernel: polygons, potential areas, quad fitting, homographies.

Coordinate convention used across the library: continuous image coordinates
are corner-anchored, i.e. integer coordinates sit on pixel corners and the
center of pixel ``(row i, col j)`` is ``(x=j+0.5, y=i+0.5)``. Polygon and quad
vertices are stored as ``(N, 2)`` float arrays of ``(x, y)`` pairs ordered
counter-clockwise in the positive-shoelace sense (with y increasing downward
this appears clockwise on screen).
"""

from __future__ import annotations

import math

import numpy as np


class GeometryError(ValueError):
    """A geometric operation could not produce a valid result."""


def _as_points(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (N, 2) points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    area = float(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))
    area += float(x[-1] * y[0] - x[0] * y[-1])
    return 0.5 * area


def polygon_area(vertices) -> float:
    """Shoelace area; positive for counter-clockwise vertex order."""
    return _shoelace(_as_points(vertices))


def _next_vertices(v: np.ndarray, k: int = 1) -> np.ndarray:
    """Vertices shifted forward by k with wraparound (faster than np.roll)."""
    return np.concatenate([v[k:], v[:k]])


def polygon_centroid(vertices) -> np.ndarray:
    """Area centroid; falls back to the vertex mean for degenerate polygons."""
    v = _as_points(vertices)
    vn = _next_vertices(v)
    x, y = v[:, 0], v[:, 1]
    cross = x * vn[:, 1] - vn[:, 0] * y
    area = 0.5 * np.sum(cross)
    if abs(area) < 1e-12:
        return v.mean(axis=0)
    cx = np.sum((x + vn[:, 0]) * cross) / (6.0 * area)
    cy = np.sum((y + vn[:, 1]) * cross) / (6.0 * area)
    return np.array([cx, cy])


def convexity_tolerance(vertices) -> float:
    """Cross-product tolerance for convexity tests: 1e-9 x bounding-box area."""
    v = _as_points(vertices)
    spans = v.max(axis=0) - v.min(axis=0)
    return 1e-9 * max(float(spans[0] * spans[1]), 1.0)


def is_convex_ccw(vertices, eps: float | None = None) -> bool:
    """True when the vertex loop is counter-clockwise and convex within eps."""
    v = _as_points(vertices)
    if len(v) < 3:
        return False
    if eps is None:
        eps = convexity_tolerance(v)
    d = _next_vertices(v) - v
    dn = _next_vertices(d)
    cross = d[:, 0] * dn[:, 1] - d[:, 1] * dn[:, 0]
    return bool(np.all(cross >= -eps)) and _shoelace(v) > 0


def _line_intersection(p1, d1, p2, d2) -> np.ndarray | None:
    """Intersection of two parametric lines, or None when parallel."""
    n1 = math.hypot(d1[0], d1[1])
    n2 = math.hypot(d2[0], d2[1])
    if n1 == 0 or n2 == 0:
        return None
    denom = (d1[0] * d2[1] - d1[1] * d2[0]) / (n1 * n2)
    if abs(denom) < 1e-12:
        return None
    t = ((p2[0] - p1[0]) * d2[1] - (p2[1] - p1[1]) * d2[0]) / (d1[0] * d2[1] - d1[1] * d2[0])
    return np.array([p1[0] + t * d1[0], p1[1] + t * d1[1]])


def potential_area(vertices, edge_index: int) -> tuple[float, np.ndarray] | None:
    """Maximum convexity-preserving growth triangle for one polygon edge.

    Extends the two edges adjacent to ``edge_index`` to their intersection
    (the apex) and returns the area of the triangle formed by the edge's
    endpoints and the apex, together with the apex itself. Returns ``None``
    (unbounded growth) when the adjacent edges are parallel or meet on the
    interior side of the edge.
    """
    v = _as_points(vertices)
    n = len(v)
    if not 0 <= edge_index < n:
        raise IndexError(f"edge index {edge_index} out of range for {n} edges")
    a = v[edge_index]
    b = v[(edge_index + 1) % n]
    prev_a = v[(edge_index - 1) % n]
    next_b = v[(edge_index + 2) % n]
    apex = _line_intersection(prev_a, a - prev_a, b, next_b - b)
    if apex is None:
        return None
    cross = (b[0] - a[0]) * (apex[1] - a[1]) - (b[1] - a[1]) * (apex[0] - a[0])
    eps = convexity_tolerance(v)
    if cross > eps:
        return None  # apex on the interior side
    return abs(cross) / 2.0, apex


def potential_areas(vertices) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`potential_area` over every edge at once.

    Returns ``(areas, apexes, unbounded)``; for unbounded edges the area is 0
    and the apex entry is undefined. Equivalent to calling
    :func:`potential_area` per edge.
    """
    v = _as_points(vertices)
    a = v
    b = _next_vertices(v, 1)
    p_prev = np.concatenate([v[-1:], v[:-1]])
    p_next2 = _next_vertices(v, 2)
    d1 = a - p_prev
    d2 = p_next2 - b
    n1 = np.hypot(d1[:, 0], d1[:, 1])
    n2 = np.hypot(d2[:, 0], d2[:, 1])
    denom = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    scale = n1 * n2
    parallel = (scale == 0) | (np.abs(denom) < 1e-12 * np.where(scale == 0, 1.0, scale))
    safe_denom = np.where(parallel, 1.0, denom)
    t = ((b[:, 0] - p_prev[:, 0]) * d2[:, 1] - (b[:, 1] - p_prev[:, 1]) * d2[:, 0]) / safe_denom
    apex = p_prev + t[:, None] * d1
    cross = (b[:, 0] - a[:, 0]) * (apex[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (apex[:, 0] - a[:, 0])
    eps = convexity_tolerance(v)
    unbounded = parallel | (cross > eps)
    areas = np.where(unbounded, 0.0, np.abs(cross) / 2.0)
    return areas, apex, unbounded


def _circular_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.abs(a - b) % (2 * math.pi)
    return np.minimum(d, 2 * math.pi - d)


def fit_quad(vertices, max_iters: int = 20) -> np.ndarray:
    """Fit a quadrilateral to a convex polygon via circular K-means on edges.

    Directed edge angles are clustered (K=4, samples weighted by edge length,
    centers seeded from the longest edges with distinct directions, means
    taken on the circle). Each cluster contributes the line through its
    outermost vertex (max signed distance from the polygon centroid along the
    cluster-mean outward normal) with the cluster-mean direction; consecutive
    line intersections, sorted by angle, are the corners.

    Returns the corners counter-clockwise starting from the top-left-most.
    Raises :class:`GeometryError` when four direction clusters cannot be
    separated or the resulting quad is degenerate.
    """
    v = _as_points(vertices)
    n = len(v)
    if n < 4:
        raise GeometryError("quad fit needs at least 4 edges")
    edges = _next_vertices(v) - v
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    if np.any(lengths == 0):
        keep = lengths > 0
        v_keep = v[keep]
        if len(v_keep) < 4:
            raise GeometryError("quad fit needs at least 4 distinct vertices")
        return fit_quad(v_keep, max_iters)
    angles = np.arctan2(edges[:, 1], edges[:, 0]) % (2 * math.pi)

    # Seed from the longest edge, then greedily take the edge direction
    # farthest (on the circle) from the chosen centers, longer edges first on
    # ties. Seeding the four longest edges directly can place two centers
    # inside one direction cluster whenever a quad side is split into two
    # long edges, which collapses the clustering.
    order = np.argsort(-lengths, kind="stable")
    angles_by_len = angles[order]
    centers: list[float] = [float(angles_by_len[0])]
    min_dist = _circular_distance(angles_by_len, np.full(n, centers[0]))
    while len(centers) < 4:
        best = int(np.argmax(min_dist))
        if min_dist[best] <= 1e-9:
            raise GeometryError("fewer than 4 distinct edge directions")
        centers.append(float(angles_by_len[best]))
        np.minimum(min_dist, _circular_distance(angles_by_len, np.full(n, centers[-1])),
                   out=min_dist)
    centers_arr = np.array(centers)

    w_sin = lengths * np.sin(angles)
    w_cos = lengths * np.cos(angles)
    assign = np.full(n, -1)
    for _ in range(max_iters):
        dist = _circular_distance(angles[:, None], centers_arr[None, :])
        new_assign = np.argmin(dist, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        s = np.bincount(assign, weights=w_sin, minlength=4)
        c = np.bincount(assign, weights=w_cos, minlength=4)
        occupied = (s != 0) | (c != 0)
        centers_arr = np.where(occupied, np.arctan2(s, c) % (2 * math.pi), centers_arr)
    counts = np.bincount(assign, minlength=4)
    if (counts == 0).any():
        raise GeometryError("edge direction clustering collapsed below 4 clusters")

    centroid = polygon_centroid(v)
    lines: list[tuple[float, np.ndarray, np.ndarray]] = []
    member_mask = np.zeros(n, dtype=bool)
    for k in range(4):
        theta = float(centers_arr[k])
        direction = np.array([math.cos(theta), math.sin(theta)])
        normal = np.array([direction[1], -direction[0]])  # outward for CCW order
        member_mask[:] = assign == k
        vert_mask = member_mask | np.concatenate([member_mask[-1:], member_mask[:-1]])
        cand = np.flatnonzero(vert_mask)
        dots = (v[cand] - centroid) @ normal
        outer = v[cand[int(np.argmax(dots))]]
        lines.append((theta, outer, direction))

    lines.sort(key=lambda item: item[0])
    corners = []
    for k in range(4):
        _, p1, d1 = lines[k]
        _, p2, d2 = lines[(k + 1) % 4]
        pt = _line_intersection(p1, d1, p2, d2)
        if pt is None:
            raise GeometryError("adjacent fitted lines are parallel")
        corners.append(pt)
    quad = np.array(corners)
    if polygon_area(quad) < 0:
        quad = quad[::-1]
    if not is_convex_ccw(quad) or polygon_area(quad) <= 0:
        raise GeometryError("fitted quad is degenerate")
    return order_quad(quad)


def order_quad(corners) -> np.ndarray:
    """Reorder a quad counter-clockwise starting from the top-left-most corner."""
    q = _as_points(corners)
    if len(q) != 4:
        raise ValueError("a quad has exactly 4 corners")
    if polygon_area(q) < 0:
        q = q[::-1]
    start = min(range(4), key=lambda i: (q[i, 0] + q[i, 1], q[i, 1], q[i, 0]))
    return np.roll(q, -start, axis=0)


def _normalize_points(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centroid = pts.mean(axis=0)
    shifted = pts - centroid
    mean_dist = np.mean(np.hypot(shifted[:, 0], shifted[:, 1]))
    scale = math.sqrt(2.0) / mean_dist if mean_dist > 0 else 1.0
    T = np.array([
        [scale, 0.0, -scale * centroid[0]],
        [0.0, scale, -scale * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    return T, shifted * scale


def _any_three_collinear(pts: np.ndarray) -> bool:
    span = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    tol = 1e-9 * max(span * span, 1e-12)
    idx = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    for i, j, k in idx:
        d1 = pts[j] - pts[i]
        d2 = pts[k] - pts[i]
        if abs(d1[0] * d2[1] - d1[1] * d2[0]) <= tol:
            return True
    return False


def estimate_homography(src, dst) -> np.ndarray:
    """Direct linear transform from exactly four point correspondences.

    Coordinates are Hartley-normalized before the 8x9 solve for conditioning.
    Raises :class:`GeometryError` for degenerate (three-collinear) inputs.
    """
    s = _as_points(src)
    d = _as_points(dst)
    if s.shape != (4, 2) or d.shape != (4, 2):
        raise ValueError("estimate_homography expects exactly 4 source and 4 destination points")
    if _any_three_collinear(s) or _any_three_collinear(d):
        raise GeometryError("three correspondence points are collinear")

    Ts, sn = _normalize_points(s)
    Td, dn = _normalize_points(d)

    rows = []
    for (x, y), (u, w) in zip(sn, dn):
        rows.append([-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u])
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, w * x, w * y, w])
    A = np.array(rows)
    _, _, vt = np.linalg.svd(A)
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    if abs(np.linalg.det(H)) < 1e-12:
        raise GeometryError("homography is singular")
    if abs(H[2, 2]) > 1e-12:
        H = H / H[2, 2]
    return H


def project(h: np.ndarray, p) -> np.ndarray:
    """Apply a homography with perspective division to one point or (N, 2) points."""
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    pts2 = pts.reshape(-1, 2)
    ones = np.ones((pts2.shape[0], 1))
    hom = np.hstack([pts2, ones]) @ np.asarray(h, dtype=np.float64).T
    w = hom[:, 2]
    if np.any(np.abs(w) < 1e-12):
        raise GeometryError("point projects to infinity")
    out = hom[:, :2] / w[:, None]
    return out[0] if single else out


def _smooth121_rows(arr: np.ndarray) -> np.ndarray:
    """[1,2,1] vertical smoothing, valid mode (2 rows shorter)."""
    return arr[:-2, :] + 2.0 * arr[1:-1, :] + arr[2:, :]


def _smooth121_cols(arr: np.ndarray) -> np.ndarray:
    return arr[:, :-2] + 2.0 * arr[:, 1:-1] + arr[:, 2:]


def _sobel_pair(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Valid-mode Sobel gradients via separable [1,2,1] x [-1,0,1] passes."""
    sy = _smooth121_rows(arr)
    sx = _smooth121_cols(arr)
    gx = sy[:, 2:] - sy[:, :-2]
    gy = sx[2:, :] - sx[:-2, :]
    return gx, gy


def _gauss3(arr: np.ndarray) -> np.ndarray:
    """Valid-mode 3x3 binomial window (the Gaussian weighting)."""
    return _smooth121_cols(_smooth121_rows(arr)) / 16.0


def corner_score_patch(luma: np.ndarray, center, radius: int) -> np.ndarray:
    """Locate the strongest corner in a square patch of the luminance image.

    Scores every patch pixel with the minimum eigenvalue of the 3x3
    Gaussian-windowed gradient structure tensor (Sobel gradients) and returns
    the center of the best-scoring pixel. Exact score ties are broken by
    distance to ``center``, then row-major order. The patch is clipped to the
    image; a fully clipped patch raises :class:`GeometryError`.
    """
    img = np.asarray(luma, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("luma must be a 2-D array")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    h, w = img.shape
    cx, cy = float(center[0]), float(center[1])
    c_col = int(math.floor(cx))
    c_row = int(math.floor(cy))
    r0 = max(c_row - radius, 0)
    r1 = min(c_row + radius, h - 1)
    c0 = max(c_col - radius, 0)
    c1 = min(c_col + radius, w - 1)
    if r0 > r1 or c0 > c1:
        raise GeometryError("corner patch is entirely outside the image")

    # Margin of 2 for the Sobel and window supports, edge-replicated at borders.
    er0, er1 = max(r0 - 2, 0), min(r1 + 2, h - 1)
    ec0, ec1 = max(c0 - 2, 0), min(c1 + 2, w - 1)
    ext = img[er0:er1 + 1, ec0:ec1 + 1]
    pad_top = 2 - (r0 - er0)
    pad_bottom = 2 - (er1 - r1)
    pad_left = 2 - (c0 - ec0)
    pad_right = 2 - (ec1 - c1)
    if pad_top or pad_bottom or pad_left or pad_right:
        ext = np.pad(ext, ((pad_top, pad_bottom), (pad_left, pad_right)), mode="edge")

    gx, gy = _sobel_pair(ext)
    sxx = _gauss3(gx * gx)
    syy = _gauss3(gy * gy)
    sxy = _gauss3(gx * gy)
    trace_half = 0.5 * (sxx + syy)
    delta = np.sqrt((0.5 * (sxx - syy)) ** 2 + sxy * sxy)
    score = trace_half - delta  # min eigenvalue of the structure tensor

    best = float(score.max())
    cand_rows, cand_cols = np.nonzero(score == best)
    if len(cand_rows) == 1:
        return np.array([cand_cols[0] + c0 + 0.5, cand_rows[0] + r0 + 0.5])
    rows = cand_rows + r0
    cols = cand_cols + c0
    d2 = (cols + 0.5 - cx) ** 2 + (rows + 0.5 - cy) ** 2
    order = np.lexsort((cols, rows, d2))
    i = order[0]
    return np.array([cols[i] + 0.5, rows[i] + 0.5])


def clip_convex(subject, clip) -> np.ndarray:
    """Sutherland-Hodgman clip of one convex CCW polygon against another."""
    out = [np.asarray(p, dtype=np.float64) for p in _as_points(subject)]
    cp = _as_points(clip)
    n = len(cp)
    for k in range(n):
        if not out:
            break
        a = cp[k]
        b = cp[(k + 1) % n]
        edge = b - a

        def inside(p):
            return edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0]) >= 0

        def intersect(p, q):
            dpq = q - p
            denom = edge[0] * dpq[1] - edge[1] * dpq[0]
            t = (edge[0] * (a[1] - p[1]) - edge[1] * (a[0] - p[0])) / denom
            return p + t * dpq

        inputs = out
        out = []
        s = inputs[-1]
        for e in inputs:
            if inside(e):
                if not inside(s):
                    out.append(intersect(s, e))
                out.append(e)
            elif inside(s):
                out.append(intersect(s, e))
            s = e
    return np.array(out) if out else np.empty((0, 2))


def quad_iou(a, b) -> float:
    """Intersection-over-union of two convex quads via polygon clipping."""
    qa = _as_points(a)
    qb = _as_points(b)
    if polygon_area(qa) < 0:
        qa = qa[::-1]
    if polygon_area(qb) < 0:
        qb = qb[::-1]
    inter = clip_convex(qa, qb)
    if len(inter) < 3:
        return 0.0
    ai = abs(polygon_area(inter))
    union = abs(polygon_area(qa)) + abs(polygon_area(qb)) - ai
    if union <= 0:
        return 0.0
    return float(min(max(ai / union, 0.0), 1.0))
