from .decomposition import SolutionExpansion, SolverConfig, evaluate_solution, solve

__version__ = "0.1.0"
__all__ = ["SolutionExpansion", "SolverConfig", "evaluate_solution", "solve"]
