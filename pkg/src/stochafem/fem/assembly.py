"""DOF numbering, global assembly over a fixed sparsity pattern, nodal load vectors."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .elements import ELEMENT_DOFS, element_mass, element_stiffness
from .mesh import DOF_LETTERS, Mesh, MeshError


class DofMap:
    """Per-node DOF numbering with homogeneous Dirichlet DOFs eliminated.

    Each node carries only the DOF letters required by the elements attached to it,
    so bar-only nodes of a frame model get no rotation.
    """

    def __init__(self, mesh: Mesh, fixed: dict[int, str] | None = None):
        self.mesh = mesh
        fixed = mesh.fixed if fixed is None else fixed
        letters: dict[int, set] = {n: set() for n in mesh.node_ids}
        for e in mesh.elements:
            for n in e.nodes:
                letters[n].update(ELEMENT_DOFS[(e.kind, mesh.dim)])
        self.node_letters = {
            n: "".join(sorted(s, key=DOF_LETTERS.index)) for n, s in letters.items()
        }
        self.full = [(n, c) for n in mesh.node_ids for c in self.node_letters[n]]
        self.full_index = {key: i for i, key in enumerate(self.full)}
        fixed_keys = {(n, c) for n, cs in fixed.items() for c in cs if c in self.node_letters.get(n, "")}
        self.fixed_full = sorted(self.full_index[k] for k in fixed_keys)
        self.free = [i for i, k in enumerate(self.full) if k not in fixed_keys]
        if not self.free:
            raise MeshError("no free degrees of freedom")
        self.reduced = np.full(len(self.full), -1, dtype=np.int64)
        self.reduced[self.free] = np.arange(len(self.free))
        self.labels = [f"{self.full[i][0]}{self.full[i][1]}" for i in self.free]
        self.element_dofs = [self._element_dofs(e) for e in mesh.elements]
        self._pattern = None

    @property
    def N(self) -> int:
        return len(self.free)

    def _element_dofs(self, e):
        letters = ELEMENT_DOFS[(e.kind, self.mesh.dim)]
        return np.array([self.reduced[self.full_index[(n, c)]] for n in e.nodes for c in letters])

    def index(self, node: int, letter: str) -> int:
        """Reduced index of a DOF, or -1 if it is fixed."""
        key = (node, letter)
        if key not in self.full_index:
            raise MeshError(f"node {node} has no DOF {letter!r}")
        return int(self.reduced[self.full_index[key]])

    def expand(self, u: np.ndarray) -> np.ndarray:
        """Scatter a reduced vector (or rows of a reduced matrix) back to all DOFs."""
        u = np.asarray(u)
        out = np.zeros((len(self.full),) + u.shape[1:], dtype=u.dtype)
        out[self.free] = u
        return out

    @property
    def pattern(self) -> "AssemblyPattern":
        if self._pattern is None:
            self._pattern = AssemblyPattern(self.element_dofs, self.N)
        return self._pattern


class AssemblyPattern:
    """Symbolic CSR pattern plus the triplet-to-slot map for deterministic scatter-add.

    Every matrix assembled through one pattern has identical ``indices``/``indptr``,
    so affine combinations reduce to combinations of the ``data`` arrays.
    """

    def __init__(self, element_dofs, n):
        self.n = n
        rows, cols, keep = [], [], []
        for dofs in element_dofs:
            r = np.repeat(dofs, len(dofs))
            c = np.tile(dofs, len(dofs))
            rows.append(r)
            cols.append(c)
            keep.append((r >= 0) & (c >= 0))
        rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        self.keep = np.concatenate(keep) if keep else np.zeros(0, bool)
        rows, cols = rows[self.keep], cols[self.keep]
        # diagonal always present so every DOF has a slot even with no element coverage
        diag = np.arange(n)
        keys = np.concatenate([rows * n + cols, diag * n + diag])
        uniq, inv = np.unique(keys, return_inverse=True)
        self.slot = inv[: len(rows)]
        self.nnz = len(uniq)
        self.indices = (uniq % n).astype(np.int32)
        self.indptr = np.searchsorted(uniq // n, np.arange(n + 1)).astype(np.int32)

    def data(self, element_matrices) -> np.ndarray:
        vals = np.concatenate([np.asarray(k, dtype=float).ravel() for k in element_matrices])
        return np.bincount(self.slot, weights=vals[self.keep], minlength=self.nnz)

    def matrix(self, data) -> sp.csr_matrix:
        return sp.csr_matrix((np.asarray(data, dtype=float), self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))


def assemble_global(mesh: Mesh, dofmap: DofMap, element_matrices) -> sp.csr_matrix:
    """Scatter-add element matrices (in mesh element order) into the reduced global matrix."""
    if len(element_matrices) != len(mesh.elements):
        raise ValueError("one element matrix per element required")
    pattern = dofmap.pattern
    return pattern.matrix(pattern.data(element_matrices))


def element_stiffness_list(mesh: Mesh, weights=None, part="full"):
    """Element matrices for every element; ``weights`` gives one field value per element."""
    if weights is None:
        weights = np.ones(len(mesh.elements))
    return [
        element_stiffness(e.kind, mesh.element_coords(e), mesh.groups[e.group], w, part)
        for e, w in zip(mesh.elements, weights)
    ]


def nodal_load_vector(mesh: Mesh, dofmap: DofMap) -> np.ndarray:
    """Reduced load vector from the mesh ``load`` records; loads on fixed DOFs are dropped."""
    f = np.zeros(dofmap.N)
    for node, letter, value in mesh.loads:
        i = dofmap.index(node, letter)
        if i >= 0:
            f[i] += value
    return f


def gravity_letter(mesh: Mesh) -> str:
    return "y" if mesh.dim == 2 else "z"


def self_weight_load(mesh: Mesh, dofmap: DofMap, g: float, full: bool = False) -> np.ndarray:
    """Lumped gravity load: each element's weight split equally among its nodes, acting downward."""
    letter = gravity_letter(mesh)
    f = np.zeros(len(dofmap.full))
    if g != 0.0:
        for e in mesh.elements:
            w = element_mass(e.kind, mesh.element_coords(e), mesh.groups[e.group]) * g
            for n in e.nodes:
                f[dofmap.full_index[(n, letter)]] -= w / len(e.nodes)
    return f if full else f[dofmap.free]
