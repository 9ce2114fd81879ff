"""Command-line front end.

    stochafem solve|mc|compare|scaling --config FILE [--out DIR] [--seed S] [--threads N]

Every CSV starts with a ``# config=<sha256> seed=<seed>`` line followed by a
one-line header; JSON files carry the same two fields. Wall-clock timings go
to ``timings.log`` only, so CSV and JSON outputs are byte-reproducible.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ConfigError, RunConfig, build_problem, load_config
from .decomposition import SolverError, evaluate_solution, solve
from .fem import MeshError
from .monte_carlo import MonteCarloError, mc_solve
from .random_field import KLError
from .statistics import moment_fields, paired_pdfs, pdf_distance
from .stochastic_system import StochasticSystemError

log = logging.getLogger("stochafem")

EXIT_OK, EXIT_ERROR, EXIT_UNCONVERGED = 0, 1, 2


class RunError(RuntimeError):
    pass


class Run:
    """Output directory plus provenance for one invocation."""

    def __init__(self, cfg: RunConfig, out: Path, seed: int, threads: int):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.threads = threads
        out.mkdir(parents=True, exist_ok=True)

    @property
    def stamp(self) -> str:
        return f"# config={self.cfg.digest} seed={self.seed}"

    def write_csv(self, name, header, rows, first=None):
        """Rows of floats as %.17g; ``first`` is an optional leading string column."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        lines = [self.stamp, ",".join(header)]
        for a, row in enumerate(rows):
            cells = ["%.17g" % v for v in row]
            if first is not None:
                cells.insert(0, str(first[a]))
            lines.append(",".join(cells))
        (self.out / name).write_text("\n".join(lines) + "\n")

    def write_json(self, name, payload):
        doc = {"config_sha256": self.cfg.digest, "seed": self.seed, **payload}
        (self.out / name).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")

    def timing(self, what, seconds):
        with open(self.out / "timings.log", "a") as fh:
            fh.write(f"{what} wall_seconds={seconds:.6f} threads={self.threads}\n")


def read_csv(path: Path):
    """(stamp line, header, string cells) of a file written by Run.write_csv."""
    if not path.exists():
        raise RunError(f"missing prior output {path.name}; run the producing command first")
    lines = path.read_text().splitlines()
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise RunError(f"{path.name}: not a stochafem output file")
    cells = [ln.split(",") for ln in lines[2:]]
    return lines[0], lines[1].split(","), cells


def _point_mass(x) -> bool:
    return float(np.ptp(x)) <= 1e-12 * float(np.abs(x).max())


def _moments(samples):
    mean, var = moment_fields(samples)
    return {"mean": float(mean[0]), "variance": float(var[0]), "std": float(np.sqrt(var[0]))}


def cmd_solve(run: Run) -> int:
    t0 = time.perf_counter()
    problem = build_problem(run.cfg, seed=run.seed)
    sys_ = problem.system
    try:
        expansion = solve(sys_, run.cfg.solver)
    except SolverError as exc:
        partial = getattr(exc, "partial", None)
        run.write_json(
            "history.json",
            {"converged": False, "error": str(exc), "couples": partial.k if partial else 0,
             "history": partial.history if partial else []},
        )
        raise
    run.timing("solve", time.perf_counter() - t0)
    D, L = expansion.D, expansion.lambdas
    k = expansion.k
    run.write_csv("expansion.csv", ["dof"] + [f"d{j}" for j in range(1, k + 1)], D, first=problem.dofmap.labels)
    run.write_csv("lambda.csv", [f"lambda{j}" for j in range(1, k + 1)], L)
    run.write_json(
        "history.json",
        {"converged": expansion.converged, "couples": k, "history": expansion.history, "kappa": expansion.kappas.tolist()},
    )
    # variance field over all DOFs from the couple moments: sum_ij cov(lam_i, lam_j) d_i d_j
    cov = np.cov(L, rowvar=False, ddof=1).reshape(k, k)
    var_field = np.einsum("ni,ij,nj->n", D, cov, D)
    mean_field = D @ L.mean(axis=0)
    U = evaluate_solution(expansion, dofs=problem.monitor_dofs)
    summary = {
        "couples": k,
        "converged": expansion.converged,
        "N": sys_.N,
        "M": sys_.M,
        "Q": sys_.Q,
        "R": sys_.R,
        "rejected_samples": problem.info.get("rejected", 0),
        "info": {key: v for key, v in problem.info.items() if key != "rejected"},
        "mean_field_max_abs": float(np.abs(mean_field).max()),
        "variance_field_min": float(var_field.min()),
        "variance_field_max": float(var_field.max()),
        "monitored": {lab: _moments(U[:, a]) for a, lab in enumerate(problem.monitor_labels)},
    }
    run.write_json("summary.json", summary)
    log.info("solve: %d couples, converged=%s", k, expansion.converged)
    return EXIT_OK if expansion.converged else EXIT_UNCONVERGED


def cmd_mc(run: Run) -> int:
    problem = build_problem(run.cfg, seed=run.seed)
    result = mc_solve(problem.system, dofs=problem.monitor_dofs, threads=run.threads)
    run.timing("mc", result.wall_time)
    run.write_csv("mc_responses.csv", problem.monitor_labels, result.responses)
    log.info("mc: %d samples, %d rejected", len(result.rows), result.rejected)
    return EXIT_OK


def cmd_compare(run: Run) -> int:
    stamp_e, head_e, cells_e = read_csv(run.out / "expansion.csv")
    stamp_l, _, cells_l = read_csv(run.out / "lambda.csv")
    stamp_m, head_m, cells_m = read_csv(run.out / "mc_responses.csv")
    if len({stamp_e, stamp_l, stamp_m}) != 1:
        raise RunError("expansion.csv, lambda.csv and mc_responses.csv come from different runs")
    labels = [row[0] for row in cells_e]
    D = np.array([[float(v) for v in row[1:]] for row in cells_e])
    L = np.array([[float(v) for v in row] for row in cells_l])
    MC = np.array([[float(v) for v in row] for row in cells_m])
    if L.shape[0] != MC.shape[0]:
        raise RunError("lambda.csv and mc_responses.csv have different sample counts")
    ok = ~np.isnan(MC).any(axis=1)
    report = {}
    for a, lab in enumerate(head_m):
        if lab not in labels:
            raise RunError(f"monitored DOF {lab} not present in expansion.csv")
        dec = (L @ D[labels.index(lab)])[ok]
        ref = MC[ok, a]
        if _point_mass(dec) or _point_mass(ref):
            # no spread to smooth: compare as point masses
            same = _point_mass(dec) and _point_mass(ref) and np.isclose(dec.mean(), ref.mean(), rtol=1e-10, atol=0.0)
            l1, ks = (0.0, 0.0) if same else (2.0, 1.0)
            table = [[dec.mean(), 1.0, 1.0]] if same else [[dec.mean(), 1.0, 0.0], [ref.mean(), 0.0, 1.0]]
            run.write_csv(f"pdf_{lab}.csv", ["value", "decomposition_mass", "mc_mass"], table)
        else:
            l1, ks = pdf_distance(dec, ref)
            grid, p_dec, p_mc = paired_pdfs(dec, ref)
            run.write_csv(f"pdf_{lab}.csv", ["grid", "decomposition", "mc"], np.column_stack([grid, p_dec, p_mc]))
        md, mm = _moments(dec), _moments(ref)
        report[lab] = {
            "L1": l1,
            "KS": ks,
            "decomposition": md,
            "mc": mm,
            "mean_rel_error": abs(md["mean"] - mm["mean"]) / abs(mm["mean"]) if mm["mean"] else 0.0,
            "std_rel_error": abs(md["std"] - mm["std"]) / mm["std"] if not _point_mass(ref) else 0.0,
        }
    summary_path = run.out / "summary.json"
    summary = json.loads(summary_path.read_text()) if summary_path.exists() else {}
    summary.pop("config_sha256", None)
    summary.pop("seed", None)
    summary["compare"] = {"samples_used": int(ok.sum()), "dofs": report}
    run.write_json("summary.json", summary)
    return EXIT_OK


def cmd_scaling(run: Run) -> int:
    cfg = run.cfg
    if cfg.load_field is None:
        raise RunError("scaling needs a load-field problem (load.field in the config)")
    if not cfg.scaling_M:
        raise RunError("scaling needs scaling.M_list in the config")
    rows = []
    status = EXIT_OK
    for M in cfg.scaling_M:
        t0 = time.perf_counter()
        problem = build_problem(cfg, seed=run.seed, M_override=M)
        t1 = time.perf_counter()
        expansion = solve(problem.system, cfg.solver)
        t2 = time.perf_counter()
        run.timing(f"scaling M={M} build", t1 - t0)
        run.timing(f"scaling M={M} solve", t2 - t1)
        last = expansion.history[-1]["global_error"] if expansion.history else float("nan")
        rows.append([M, expansion.k, int(expansion.converged), last])
        if not expansion.converged:
            status = EXIT_UNCONVERGED
    run.write_csv("scaling.csv", ["M", "couples", "converged", "final_global_error"], rows)
    return status


COMMANDS = {"solve": cmd_solve, "mc": cmd_mc, "compare": cmd_compare, "scaling": cmd_scaling}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochafem", description="Sample-based stochastic finite element solver")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--out", help="output directory (default: 'out' key of the config, relative to the cwd)")
    parser.add_argument("--seed", type=int, help="override solver.seed")
    parser.add_argument("--threads", type=int, default=1, help="Monte Carlo worker threads (results do not depend on it)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        cfg = load_config(args.config)
        seed = cfg.solver.seed if args.seed is None else args.seed
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        cfg.solver.seed = seed
        run = Run(cfg, Path(args.out or cfg.out), seed, args.threads)
        # BLAS stays single-threaded so reductions keep a fixed order
        with threadpool_limits(limits=1):
            return COMMANDS[args.command](run)
    except (ConfigError, MeshError, KLError, StochasticSystemError, SolverError, MonteCarloError, RunError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
