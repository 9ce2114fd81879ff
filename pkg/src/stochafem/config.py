"""YAML run configuration and problem construction.

A config names a mesh and describes where the randomness enters:

``stiffness``
    ``mean: full|none`` plus either ``terms`` (global stiffness parts with a
    scale and a marginal each) or ``field`` (a KL-expanded modulus field).
``load``
    ``point`` (mesh loads), ``self_weight`` (gravity g) and optionally
    ``multipliers`` (extra random copies of the base load) or ``field``
    (a KL-expanded nodal load field).

See ``configs/`` for complete files.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .decomposition import SolverConfig
from .fem import DofMap, Mesh, MeshError, element_stiffness_list, nodal_load_vector, read_mesh
from .fem import self_weight_load, solve_spd
from .fem.mesh import parse_mesh
from .random_field import CovarianceKernel, KLExpansion, Marginal, draw_samples, kl_expansion
from .stochastic_system import (
    StochasticSystem,
    build_from_load_field,
    build_from_modulus_field,
    centroid_field_weights,
    screen_positive_field,
)


class ConfigError(ValueError):
    pass


@dataclass
class FieldSpec:
    sigma2: float
    corr_len: list
    M: int
    mean: float = 0.0
    marginal: dict | str = "standard-normal"
    nodes: str | list = "all"  # load fields: "all", "top" or explicit node ids
    letter: str = "z"
    sign: float = -1.0
    scale: float = 1.0
    screen: bool = True  # modulus fields: redraw samples with non-positive modulus


@dataclass
class RunConfig:
    mesh_path: str
    source: Path | None = None
    digest: str = ""
    stiffness_mean: str = "full"
    stiffness_terms: list = field(default_factory=list)
    stiffness_field: FieldSpec | None = None
    point_load: bool = True
    self_weight: float = 0.0
    load_multipliers: list = field(default_factory=list)
    load_field: FieldSpec | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    monitor: list = field(default_factory=lambda: ["max"])
    scaling_M: list = field(default_factory=list)
    out: str = "out"

    def resolve_mesh(self) -> Mesh:
        ref = self.mesh_path
        if ref.startswith("bundled:"):
            name = ref.split(":", 1)[1]
            text = resources.files("stochafem").joinpath("data", name).read_text()
            return parse_mesh(text)
        path = Path(ref)
        if not path.is_absolute() and self.source is not None:
            path = self.source.parent / path
        if not path.exists():
            raise ConfigError(f"mesh file not found: {path}")
        return read_mesh(path)


_TOP_KEYS = {"mesh", "stiffness", "load", "solver", "monitor", "scaling", "out"}


def _field(spec, where) -> FieldSpec:
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected a mapping")
    spec = dict(spec)
    kernel = spec.pop("kernel", {})
    try:
        fs = FieldSpec(
            sigma2=float(kernel["sigma2"]),
            corr_len=list(np.atleast_1d(kernel["corr_len"]).astype(float)),
            M=int(spec.pop("M")),
            **spec,
        )
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    Marginal.parse(fs.marginal)
    return fs


def parse_config(text: str, source: Path | None = None) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{where}invalid YAML ({getattr(exc, 'problem', exc)})") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "mesh" not in doc:
        raise ConfigError("missing key 'mesh'")
    cfg = RunConfig(mesh_path=str(doc["mesh"]), source=source)
    cfg.digest = hashlib.sha256(text.encode()).hexdigest()

    stiff = doc.get("stiffness") or {}
    cfg.stiffness_mean = str(stiff.get("mean", "full"))
    if cfg.stiffness_mean not in ("full", "none"):
        raise ConfigError("stiffness.mean must be 'full' or 'none'")
    for k, term in enumerate(stiff.get("terms", []) or []):
        part = term.get("part", "full")
        if part not in ("full", "axial", "bending"):
            raise ConfigError(f"stiffness.terms[{k}]: unknown part {part!r}")
        cfg.stiffness_terms.append(
            {"part": part, "scale": float(term.get("scale", 1.0)), "marginal": Marginal.parse(term.get("marginal", "standard-normal"))}
        )
    if "field" in stiff:
        cfg.stiffness_field = _field(stiff["field"], "stiffness.field")
    if cfg.stiffness_field is not None and cfg.stiffness_terms:
        raise ConfigError("stiffness: use either 'terms' or 'field', not both")

    load = doc.get("load") or {}
    cfg.point_load = bool(load.get("point", True))
    cfg.self_weight = float(load.get("self_weight", 0.0))
    cfg.load_multipliers = [Marginal.parse(m) for m in load.get("multipliers", []) or []]
    if "field" in load:
        cfg.load_field = _field(load["field"], "load.field")
    if cfg.load_field is not None and cfg.load_multipliers:
        raise ConfigError("load: use either 'multipliers' or 'field', not both")

    solver = dict(doc.get("solver") or {})
    try:
        cfg.solver = SolverConfig(
            **{k: (int(v) if k in ("k_max", "j_max", "R", "seed") else float(v)) for k, v in solver.items()}
        )
    except TypeError as exc:
        raise ConfigError(f"solver: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None

    monitor = doc.get("monitor", ["max"])
    cfg.monitor = [str(m) for m in (monitor if isinstance(monitor, list) else [monitor])]
    scaling = doc.get("scaling") or {}
    cfg.scaling_M = [int(m) for m in scaling.get("M_list", [])]
    cfg.out = str(doc.get("out", "out"))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), source=path)


@dataclass
class Problem:
    mesh: Mesh
    dofmap: DofMap
    system: StochasticSystem
    monitor_dofs: np.ndarray
    monitor_labels: list
    kl: KLExpansion | None = None
    info: dict = field(default_factory=dict)


def _field_nodes(mesh: Mesh, spec: FieldSpec):
    if spec.nodes == "all":
        return list(mesh.node_ids)
    if spec.nodes == "top":
        ax = mesh.dim - 1
        top = mesh.coords[:, ax].max()
        return [n for n, c in zip(mesh.node_ids, mesh.coords[:, ax]) if abs(c - top) < 1e-9]
    return [int(n) for n in spec.nodes]


def _kernel(spec: FieldSpec) -> CovarianceKernel:
    return CovarianceKernel(spec.sigma2, tuple(spec.corr_len))


def build_problem(cfg: RunConfig, seed: int | None = None, M_override: int | None = None) -> Problem:
    """Mesh, DOF map, affine system and sample set for one run."""
    seed = cfg.solver.seed if seed is None else seed
    R = cfg.solver.R
    mesh = cfg.resolve_mesh()
    mesh.validate()
    dofmap = DofMap(mesh)
    pattern = dofmap.pattern
    info = {}
    kl = None

    # stiffness block and its marginals
    xi_marginals = []
    weights = None
    if cfg.stiffness_field is not None:
        spec = cfg.stiffness_field
        kl = kl_expansion(mesh, _kernel(spec), spec.M, mean=spec.mean)
        K_data = build_from_modulus_field(mesh, dofmap, kl)
        xi_marginals = [Marginal.parse(spec.marginal)] * spec.M
        weights = centroid_field_weights(mesh, kl)
        info["truncation_energy"] = float(np.sum(kl.eigenvalues) / kl.total_variance)
    else:
        base = pattern.data(element_stiffness_list(mesh))
        rows = [base if cfg.stiffness_mean == "full" else np.zeros_like(base)]
        for term in cfg.stiffness_terms:
            part = pattern.data(element_stiffness_list(mesh, part=term["part"]))
            rows.append(term["scale"] * part)
            xi_marginals.append(term["marginal"])
        K_data = np.array(rows)

    # load block
    F0 = np.zeros(dofmap.N)
    if cfg.point_load:
        F0 += nodal_load_vector(mesh, dofmap)
    if cfg.self_weight:
        F0 += self_weight_load(mesh, dofmap, cfg.self_weight)
    eta_marginals = []
    if cfg.load_field is not None:
        spec = cfg.load_field
        M = spec.M if M_override is None else M_override
        sub = mesh.submesh(_field_nodes(mesh, spec))
        lkl = kl_expansion(sub, _kernel(spec), M, mean=spec.mean)
        F = build_from_load_field(mesh, dofmap, lkl, letter=spec.letter, sign=spec.sign, scale=spec.scale)
        F[0] += F0
        eta_marginals = [Marginal.parse(spec.marginal)] * M
        info["load_truncation_energy"] = float(np.sum(lkl.eigenvalues) / lkl.total_variance)
        kl = kl if kl is not None else lkl
    else:
        F = np.vstack([F0] + [F0] * len(cfg.load_multipliers))
        eta_marginals = list(cfg.load_multipliers)
    if not np.any(F):
        raise ConfigError("the load vector is identically zero")

    samples = draw_samples(len(xi_marginals), len(eta_marginals), R, seed, xi_marginals or None, eta_marginals or None)
    rejected = 0
    if weights is not None and cfg.stiffness_field.screen:
        samples, rejected = screen_positive_field(samples, weights, xi_marginals)
    system = StochasticSystem(pattern, K_data, F, samples, rejected=rejected)
    dofs, labels = _monitor(cfg.monitor, dofmap, system)
    info["rejected"] = rejected
    return Problem(mesh, dofmap, system, dofs, labels, kl, info)


def _monitor(names, dofmap: DofMap, system: StochasticSystem):
    dofs = []
    for name in names:
        if name == "max":
            # DOF with the largest response magnitude at the mean input
            u = solve_spd(system.mean_matrix(), system.combine_F(system.eta.mean(axis=0)))
            dofs.append(int(np.argmax(np.abs(u))))
        else:
            if name not in dofmap.labels:
                raise ConfigError(f"monitor: unknown or fixed DOF {name!r} (expected e.g. '33y')")
            dofs.append(dofmap.labels.index(name))
    dofs = np.array(dofs, dtype=np.int64)
    return dofs, [dofmap.labels[i] for i in dofs]


def deterministic_solution(problem: Problem) -> np.ndarray:
    """Reference solve at xi = 0 (K_0 and F_0 only)."""
    sys = problem.system
    return solve_spd(sys.K_list[0], sys.F[0])


__all__ = [
    "ConfigError",
    "FieldSpec",
    "Problem",
    "RunConfig",
    "MeshError",
    "build_problem",
    "deterministic_solution",
    "load_config",
    "parse_config",
]
