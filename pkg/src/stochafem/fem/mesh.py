"""Mesh container and the line-oriented mesh text format.

Format (one record per line, ``#`` starts a comment)::

    node <id> <x> <y> [<z>]
    elem <id> <bar|frame2d|tri3> <n1> <n2> [<n3>] <group>
    group <id> E=<v> A=<v> [I=<v>] [nu=<v>] [rho=<v>] [t=<v>] [plane=stress|strain]
    fix <node> <dof-letters, e.g. xyr>
    load <node> <dof-letter> <value>
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ELEMENT_NODES = {"bar": 2, "frame2d": 2, "tri3": 3}
DOF_LETTERS = "xyzr"


class MeshError(ValueError):
    """Raised for malformed mesh files or invalid geometry."""


@dataclass
class PropertyGroup:
    E: float
    A: float = 1.0
    I: float = 0.0
    nu: float = 0.0
    rho: float = 0.0
    t: float = 1.0
    plane: str = "strain"

    def validate(self, gid: int) -> None:
        if self.E <= 0:
            raise MeshError(f"group {gid}: E must be > 0")
        if self.A <= 0:
            raise MeshError(f"group {gid}: A must be > 0")
        if self.t <= 0:
            raise MeshError(f"group {gid}: t must be > 0")
        if not 0.0 <= self.nu < 0.5:
            raise MeshError(f"group {gid}: nu must lie in [0, 0.5)")
        if self.plane not in ("stress", "strain"):
            raise MeshError(f"group {gid}: plane must be 'stress' or 'strain'")


@dataclass
class Element:
    id: int
    kind: str
    nodes: tuple[int, ...]
    group: int


@dataclass
class Mesh:
    nodes: dict[int, np.ndarray]
    elements: list[Element]
    groups: dict[int, PropertyGroup]
    fixed: dict[int, str] = field(default_factory=dict)
    loads: list[tuple[int, str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.elements = sorted(self.elements, key=lambda e: e.id)
        self.nodes = dict(sorted(self.nodes.items()))
        dims = {len(c) for c in self.nodes.values()}
        if len(dims) > 1:
            raise MeshError("mixed 2D/3D node coordinates")
        self.dim = dims.pop() if dims else 2
        self.node_ids = list(self.nodes)
        self.node_index = {nid: a for a, nid in enumerate(self.node_ids)}
        self.coords = np.array([self.nodes[n] for n in self.node_ids], dtype=float)
        self.validate()

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def validate(self) -> None:
        for gid, g in self.groups.items():
            g.validate(gid)
        for e in self.elements:
            if e.kind not in ELEMENT_NODES:
                raise MeshError(f"element {e.id}: unknown kind {e.kind!r}")
            if len(e.nodes) != ELEMENT_NODES[e.kind]:
                raise MeshError(f"element {e.id}: {e.kind} needs {ELEMENT_NODES[e.kind]} nodes")
            if e.kind in ("frame2d", "tri3") and self.dim != 2:
                raise MeshError(f"element {e.id}: {e.kind} requires a 2D mesh")
            for n in e.nodes:
                if n not in self.nodes:
                    raise MeshError(f"element {e.id}: unknown node {n}")
            if e.group not in self.groups:
                raise MeshError(f"element {e.id}: unknown group {e.group}")
            if element_measure(self.element_coords(e)) <= 0.0:
                raise MeshError(f"element {e.id}: degenerate geometry (zero measure)")
        for n in self.fixed:
            if n not in self.nodes:
                raise MeshError(f"fix references unknown node {n}")
        for n, _, _ in self.loads:
            if n not in self.nodes:
                raise MeshError(f"load references unknown node {n}")

    def element_coords(self, e: Element) -> np.ndarray:
        return np.array([self.nodes[n] for n in e.nodes], dtype=float)

    def element_node_index(self, e: Element) -> list[int]:
        return [self.node_index[n] for n in e.nodes]

    def centroids(self) -> np.ndarray:
        return np.array([self.element_coords(e).mean(axis=0) for e in self.elements])

    def measures(self) -> np.ndarray:
        return np.array([element_measure(self.element_coords(e)) for e in self.elements])

    def submesh(self, node_ids) -> "Mesh":
        """Mesh restricted to ``node_ids`` and the elements lying entirely on them."""
        keep = set(node_ids)
        missing = keep - set(self.nodes)
        if missing:
            raise MeshError(f"unknown nodes {sorted(missing)[:5]}")
        elems = [e for e in self.elements if set(e.nodes) <= keep]
        return Mesh({n: self.nodes[n] for n in keep}, elems, self.groups)

    def to_text(self) -> str:
        lines = []
        for gid, g in sorted(self.groups.items()):
            lines.append(
                f"group {gid} E={g.E!r} A={g.A!r} I={g.I!r} nu={g.nu!r} rho={g.rho!r} t={g.t!r} plane={g.plane}"
            )
        for nid, c in self.nodes.items():
            lines.append("node %d %s" % (nid, " ".join(repr(float(v)) for v in c)))
        for e in self.elements:
            lines.append("elem %d %s %s %d" % (e.id, e.kind, " ".join(map(str, e.nodes)), e.group))
        for nid, letters in self.fixed.items():
            lines.append(f"fix {nid} {letters}")
        for nid, letter, value in self.loads:
            lines.append(f"load {nid} {letter} {value!r}")
        return "\n".join(lines) + "\n"


def element_measure(coords: np.ndarray) -> float:
    """Length of a 2-node element or area of a 3-node triangle."""
    if len(coords) == 2:
        return float(np.linalg.norm(coords[1] - coords[0]))
    a, b, c = coords[:, :2]
    return 0.5 * abs(float((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])))


def _num(text: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise MeshError(f"line {lineno}: expected a number, got {text!r}") from None


def _int(text: str, lineno: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise MeshError(f"line {lineno}: expected an integer id, got {text!r}") from None


def parse_mesh(text: str) -> Mesh:
    nodes: dict[int, np.ndarray] = {}
    elements: list[Element] = []
    groups: dict[int, PropertyGroup] = {}
    fixed: dict[int, str] = {}
    loads: list[tuple[int, str, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0]
        if key == "node":
            if len(tok) not in (4, 5):
                raise MeshError(f"line {lineno}: node needs 2 or 3 coordinates")
            nid = _int(tok[1], lineno)
            if nid in nodes:
                raise MeshError(f"line {lineno}: duplicate node {nid}")
            nodes[nid] = np.array([_num(v, lineno) for v in tok[2:]])
        elif key == "elem":
            if len(tok) < 5:
                raise MeshError(f"line {lineno}: incomplete elem record")
            kind = tok[2]
            if kind not in ELEMENT_NODES:
                raise MeshError(f"line {lineno}: unknown element kind {kind!r}")
            nn = ELEMENT_NODES[kind]
            if len(tok) != 4 + nn:
                raise MeshError(f"line {lineno}: {kind} expects {nn} nodes and a group")
            elements.append(
                Element(
                    _int(tok[1], lineno),
                    kind,
                    tuple(_int(v, lineno) for v in tok[3 : 3 + nn]),
                    _int(tok[3 + nn], lineno),
                )
            )
        elif key == "group":
            if len(tok) < 3:
                raise MeshError(f"line {lineno}: group needs properties")
            props: dict = {}
            for item in tok[2:]:
                name, sep, value = item.partition("=")
                if not sep or name not in PropertyGroup.__dataclass_fields__:
                    raise MeshError(f"line {lineno}: bad group property {item!r}")
                props[name] = value if name == "plane" else _num(value, lineno)
            if "E" not in props:
                raise MeshError(f"line {lineno}: group requires E")
            groups[_int(tok[1], lineno)] = PropertyGroup(**props)
        elif key == "fix":
            if len(tok) != 3 or set(tok[2]) - set(DOF_LETTERS):
                raise MeshError(f"line {lineno}: fix expects '<node> <letters from xyzr>'")
            nid = _int(tok[1], lineno)
            fixed[nid] = "".join(sorted(set(fixed.get(nid, "") + tok[2]), key=DOF_LETTERS.index))
        elif key == "load":
            if len(tok) != 4 or tok[2] not in DOF_LETTERS:
                raise MeshError(f"line {lineno}: load expects '<node> <letter> <value>'")
            loads.append((_int(tok[1], lineno), tok[2], _num(tok[3], lineno)))
        else:
            raise MeshError(f"line {lineno}: unknown record {key!r}")
    if len(nodes) < 2:
        raise MeshError("mesh needs at least 2 nodes")
    return Mesh(nodes, elements, groups, fixed, loads)


def read_mesh(path) -> Mesh:
    path = Path(path)
    try:
        return parse_mesh(path.read_text())
    except MeshError as exc:
        raise MeshError(f"{path}: {exc}") from None
