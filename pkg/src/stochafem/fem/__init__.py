from .assembly import AssemblyPattern, DofMap, assemble_global, element_stiffness_list, nodal_load_vector, self_weight_load
from .elements import element_mass, element_stiffness, elasticity_matrix
from .linalg import NotPositiveDefinite, SPDFactor, solve_spd
from .mesh import Element, Mesh, MeshError, PropertyGroup, element_measure, parse_mesh, read_mesh

__all__ = [
    "AssemblyPattern",
    "DofMap",
    "Element",
    "Mesh",
    "MeshError",
    "NotPositiveDefinite",
    "PropertyGroup",
    "SPDFactor",
    "assemble_global",
    "elasticity_matrix",
    "element_stiffness_list",
    "element_mass",
    "element_measure",
    "element_stiffness",
    "nodal_load_vector",
    "parse_mesh",
    "read_mesh",
    "self_weight_load",
    "solve_spd",
]
