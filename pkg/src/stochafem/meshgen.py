"""Generators for the bundled example meshes.

``pylon_like``   46-node, 91-member plane frame (fixed node table, searched bracing)
``roof_like``    square-on-square double-layer space truss
``tunnel_like``  plane-strain triangulation around a lined circular opening

Run ``python -m stochafem.meshgen <dir>`` to regenerate the ``.mesh`` files.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from .fem.mesh import Element, Mesh, PropertyGroup

PYLON_NODES = {
    1: (12.11, 0.00), 2: (36.58, 0.00), 3: (15.18, 9.53), 4: (24.47, 9.53),
    5: (33.67, 9.53), 6: (17.77, 17.61), 7: (24.47, 17.61), 8: (31.09, 17.61),
    9: (20.43, 25.69), 10: (28.51, 25.69), 11: (18.90, 29.73), 12: (24.47, 29.73),
    13: (29.96, 29.73), 14: (17.44, 33.76), 15: (21.16, 33.76), 16: (27.78, 33.76),
    17: (31.41, 33.76), 18: (19.06, 36.34), 19: (29.88, 36.34), 20: (14.54, 41.77),
    21: (34.32, 41.77), 22: (0.00, 48.45), 23: (8.56, 48.45), 24: (12.11, 48.45),
    25: (14.70, 48.45), 26: (17.93, 48.45), 27: (21.88, 48.45), 28: (26.97, 48.45),
    29: (31.01, 48.45), 30: (34.16, 48.45), 31: (36.74, 48.45), 32: (40.38, 48.45),
    33: (48.86, 48.45), 34: (6.46, 50.31), 35: (42.40, 50.31), 36: (10.01, 51.32),
    37: (38.92, 51.32), 38: (12.11, 51.92), 39: (16.15, 51.92), 40: (20.03, 51.92),
    41: (24.47, 51.92), 42: (28.91, 51.92), 43: (32.71, 51.92), 44: (36.74, 51.92),
    45: (12.11, 60.00), 46: (36.74, 60.00),
}

# legs, waist, cross-arm chords and bracing; the member list was chosen by a rigidity search
PYLON_MEMBERS = """
1-3 3-6 6-9 2-5 5-8 8-10 3-4 4-5 6-7 7-8 9-10 1-4 2-4 3-7 5-7 7-9
7-10 9-11 9-12 10-12 10-13 11-12 12-13 11-14 12-15 13-16 13-17 14-15 15-16 16-17 14-18 15-18
16-19 17-19 18-19 18-20 19-21 18-21 20-21 20-24 20-25 20-27 21-30 21-28 21-31 22-23 23-24 24-25
25-26 26-27 27-28 28-29 29-30 30-31 31-32 32-33 22-34 34-36 36-38 33-35 35-37 37-44 38-39 39-40
40-41 41-42 42-43 43-44 23-34 23-36 24-36 24-38 25-38 25-39 26-39 26-40 27-40 27-41 28-41 28-42
29-42 30-43 30-44 31-44 32-37 32-35 31-37 38-45 39-45 44-46 43-46
"""

PYLON_TIP = 33


def pylon_like_mesh(E=200e9, side=0.02, rho=7800.0, load=-1000.0) -> Mesh:
    """Steel plane frame with square members; clamped at nodes 1 and 2, point load at the arm tip."""
    A = side * side
    group = PropertyGroup(E=E, A=A, I=side**4 / 12.0, rho=rho)
    elements = [
        Element(k, "frame2d", tuple(int(v) for v in pair.split("-")), 1)
        for k, pair in enumerate(PYLON_MEMBERS.split(), start=1)
    ]
    nodes = {n: np.array(xy, dtype=float) for n, xy in PYLON_NODES.items()}
    return Mesh(nodes, elements, {1: group}, fixed={1: "xyr", 2: "xyr"}, loads=[(PYLON_TIP, "y", load)])


def roof_like_mesh(nx=12, ny=10, spacing=3.0, depth=2.0, E=209e9, A=16e-4) -> Mesh:
    """Double-layer grid: nx x ny top nodes, bottom nodes under the cell centres.

    Top perimeter nodes are pinned. Top nodes are numbered 1..nx*ny row by row.
    """
    nodes = {}
    top = {}
    nid = 1
    for j in range(ny):
        for i in range(nx):
            nodes[nid] = np.array([i * spacing, j * spacing, depth])
            top[(i, j)] = nid
            nid += 1
    bot = {}
    for j in range(ny - 1):
        for i in range(nx - 1):
            nodes[nid] = np.array([(i + 0.5) * spacing, (j + 0.5) * spacing, 0.0])
            bot[(i, j)] = nid
            nid += 1
    pairs = []
    for j in range(ny):
        for i in range(nx - 1):
            pairs.append((top[(i, j)], top[(i + 1, j)]))
    for j in range(ny - 1):
        for i in range(nx):
            pairs.append((top[(i, j)], top[(i, j + 1)]))
    for j in range(ny - 1):
        for i in range(nx - 2):
            pairs.append((bot[(i, j)], bot[(i + 1, j)]))
    for j in range(ny - 2):
        for i in range(nx - 1):
            pairs.append((bot[(i, j)], bot[(i, j + 1)]))
    for (i, j), b in bot.items():
        for di, dj in ((0, 0), (1, 0), (0, 1), (1, 1)):
            pairs.append((b, top[(i + di, j + dj)]))
    elements = [Element(k, "bar", p, 1) for k, p in enumerate(pairs, start=1)]
    fixed = {
        n: "xyz" for (i, j), n in top.items() if i in (0, nx - 1) or j in (0, ny - 1)
    }
    return Mesh(nodes, elements, {1: PropertyGroup(E=E, A=A, rho=7850.0)}, fixed=fixed)


def roof_top_nodes(mesh: Mesh, z_top=None) -> list[int]:
    z = mesh.coords[:, 2]
    z_top = z.max() if z_top is None else z_top
    return [n for n, zz in zip(mesh.node_ids, z) if abs(zz - z_top) < 1e-9]


# material groups: rock, rock reinforcement, concrete lining, backfilling concrete, concrete spray
TUNNEL_GROUPS = {
    1: PropertyGroup(E=2.0e9, nu=0.25, rho=2200.0, plane="strain"),
    2: PropertyGroup(E=2.6e9, nu=0.20, rho=2300.0, plane="strain"),
    3: PropertyGroup(E=28.5e9, nu=0.20, rho=2500.0, plane="strain"),
    4: PropertyGroup(E=18.5e9, nu=0.20, rho=2300.0, plane="strain"),
    5: PropertyGroup(E=28.5e9, nu=0.20, rho=2200.0, plane="strain"),
}
# layer thicknesses outward from the opening: lining, backfill, spray, reinforcement
TUNNEL_LAYERS = ((3, 0.20), (4, 0.50), (5, 0.95), (2, 2.80))


def tunnel_like_mesh(r0=5.0, half_width=30.0, n_theta=96, grid=2.0, r_polar=14.4) -> Mesh:
    """Lined circular opening in a square rock block; bottom clamped, sides on rollers."""
    radii = [r0]
    bounds = []
    r = r0
    for gid, t in TUNNEL_LAYERS:
        n_sub = max(1, int(round(t / 0.7)))
        for s in range(1, n_sub + 1):
            radii.append(r + t * s / n_sub)
        r += t
        bounds.append((r, gid))
    while radii[-1] < r_polar - 1e-9:
        radii.append(min(r_polar, radii[-1] * 1.11))
    radii = np.array(radii)

    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    pts = []
    for a, rr in enumerate(radii):
        shift = 0.5 * (a % 2) * 2 * np.pi / n_theta
        pts.append(np.column_stack([rr * np.cos(theta + shift), rr * np.sin(theta + shift)]))
    polar = np.vstack(pts)
    tris = []
    for a in range(len(radii) - 1):
        lo = a * n_theta
        hi = (a + 1) * n_theta
        for i in range(n_theta):
            i1 = (i + 1) % n_theta
            if a % 2 == 0:
                tris.append((lo + i, lo + i1, hi + i))
                tris.append((lo + i1, hi + i1, hi + i))
            else:
                tris.append((lo + i, hi + i1, hi + i))
                tris.append((lo + i, lo + i1, hi + i1))

    ticks = np.arange(-half_width, half_width + 1e-9, grid)
    gx, gy = np.meshgrid(ticks, ticks)
    g = np.column_stack([gx.ravel(), gy.ravel()])
    g = g[np.hypot(g[:, 0], g[:, 1]) > r_polar + 0.6 * grid]
    ring = polar[-n_theta:]
    outer_pts = np.vstack([ring, g])
    dt = Delaunay(outer_pts)
    off = len(polar) - n_theta
    ring_poly_r = r_polar * np.cos(np.pi / n_theta)
    for simplex in dt.simplices:
        c = outer_pts[simplex].mean(axis=0)
        if np.hypot(*c) > ring_poly_r:
            tris.append(tuple(int(v) + off for v in simplex))
    coords = np.vstack([polar, g])
    nodes = {i + 1: coords[i] for i in range(len(coords))}

    def group_of(c):
        rc = np.hypot(*c)
        for rb, gid in bounds:
            if rc < rb:
                return gid
        return 1

    elements = []
    for k, tri in enumerate(tris, start=1):
        p = coords[list(tri)]
        area2 = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[2, 0] - p[0, 0]) * (p[1, 1] - p[0, 1])
        if area2 < 0:
            tri = (tri[0], tri[2], tri[1])
        elements.append(Element(k, "tri3", tuple(v + 1 for v in tri), group_of(p.mean(axis=0))))
    fixed = {}
    for n, (x, y) in nodes.items():
        if abs(y + half_width) < 1e-9:
            fixed[n] = "xy"
        elif abs(abs(x) - half_width) < 1e-9:
            fixed[n] = "x"
    return Mesh(nodes, elements, dict(TUNNEL_GROUPS), fixed=fixed)


def smoke_mesh() -> Mesh:
    """Two collinear bars, both ends fixed, unit load on the middle node."""
    nodes = {1: np.array([0.0, 0.0]), 2: np.array([1.0, 0.0]), 3: np.array([2.0, 0.0])}
    elements = [Element(1, "bar", (1, 2), 1), Element(2, "bar", (2, 3), 1)]
    return Mesh(nodes, elements, {1: PropertyGroup(E=1.0, A=1.0)}, fixed={1: "xy", 3: "xy", 2: "y"}, loads=[(2, "x", 1.0)])


BUNDLED = {
    "pylon_like.mesh": pylon_like_mesh,
    "roof_like.mesh": roof_like_mesh,
    "tunnel_like.mesh": tunnel_like_mesh,
    "smoke.mesh": smoke_mesh,
}


def write_bundled(directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, make in BUNDLED.items():
        (directory / name).write_text(make().to_text())


if __name__ == "__main__":
    write_bundled(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "data")
