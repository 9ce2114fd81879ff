"""Element stiffness matrices: axial bar, Euler-Bernoulli plane frame, constant-strain triangle."""
from __future__ import annotations

import numpy as np

from .mesh import MeshError, PropertyGroup, element_measure

# DOF letters carried by each node of an element, by (kind, dim)
ELEMENT_DOFS = {
    ("bar", 2): "xy",
    ("bar", 3): "xyz",
    ("frame2d", 2): "xyr",
    ("tri3", 2): "xy",
}

FRAME_PARTS = ("full", "axial", "bending")


def bar_stiffness(coords, EA, weight=1.0):
    coords = np.asarray(coords, dtype=float)
    d = coords[1] - coords[0]
    L = float(np.linalg.norm(d))
    if L <= 0.0:
        raise MeshError("zero-length bar")
    n = d / L
    nn = np.outer(n, n) * (weight * EA / L)
    return np.block([[nn, -nn], [-nn, nn]])


def frame2d_stiffness(coords, EA, EI, weight=1.0, part="full"):
    """Global 6x6 stiffness of a plane frame member, DOFs (x, y, r) per node.

    ``part`` selects the axial block, the bending block, or their sum, so that
    tensile and bending rigidities can be scaled independently.
    """
    if part not in FRAME_PARTS:
        raise ValueError(f"unknown frame part {part!r}")
    coords = np.asarray(coords, dtype=float)
    d = coords[1] - coords[0]
    L = float(np.linalg.norm(d))
    if L <= 0.0:
        raise MeshError("zero-length frame member")
    c, s = d / L
    k = np.zeros((6, 6))
    if part in ("full", "axial"):
        a = EA / L
        k[np.ix_([0, 3], [0, 3])] += a * np.array([[1.0, -1.0], [-1.0, 1.0]])
    if part in ("full", "bending"):
        b = EI / L**3
        idx = [1, 2, 4, 5]
        k[np.ix_(idx, idx)] += b * np.array(
            [
                [12.0, 6 * L, -12.0, 6 * L],
                [6 * L, 4 * L * L, -6 * L, 2 * L * L],
                [-12.0, -6 * L, 12.0, -6 * L],
                [6 * L, 2 * L * L, -6 * L, 4 * L * L],
            ]
        )
    R = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    T = np.zeros((6, 6))
    T[:3, :3] = R
    T[3:, 3:] = R
    return weight * (T.T @ k @ T)


def elasticity_matrix(E, nu, plane="strain"):
    if plane == "stress":
        f = E / (1.0 - nu * nu)
        return f * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])
    if plane == "strain":
        f = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
        return f * np.array(
            [[1.0 - nu, nu, 0.0], [nu, 1.0 - nu, 0.0], [0.0, 0.0, 0.5 - nu]]
        )
    raise ValueError(f"unknown plane condition {plane!r}")


def tri3_stiffness(coords, D, t, weight=1.0):
    """Constant-strain triangle, one-point integration."""
    xy = np.asarray(coords, dtype=float)[:, :2]
    x, y = xy[:, 0], xy[:, 1]
    two_a = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0])
    if abs(two_a) <= 0.0:
        raise MeshError("zero-area triangle")
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]]) / two_a
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]]) / two_a
    B = np.zeros((3, 6))
    B[0, 0::2] = b
    B[1, 1::2] = c
    B[2, 0::2] = c
    B[2, 1::2] = b
    return (weight * t * 0.5 * abs(two_a)) * (B.T @ D @ B)


def element_stiffness(kind, coords, props: PropertyGroup, weight=1.0, part="full"):
    """Dense element stiffness in global axes, scaled by a scalar field value ``weight``."""
    coords = np.asarray(coords, dtype=float)
    if kind == "bar":
        return bar_stiffness(coords, props.E * props.A, weight)
    if kind == "frame2d":
        return frame2d_stiffness(coords, props.E * props.A, props.E * props.I, weight, part)
    if kind == "tri3":
        return tri3_stiffness(coords, elasticity_matrix(props.E, props.nu, props.plane), props.t, weight)
    raise MeshError(f"unknown element kind {kind!r}")


def element_mass(kind, coords, props: PropertyGroup) -> float:
    """Total mass of one element: rho * measure * (A for line elements, t for triangles)."""
    m = element_measure(np.asarray(coords, dtype=float))
    return props.rho * m * (props.t if kind == "tri3" else props.A)
