"""Mean-field SIR dynamics on networks built from subgraph compositions.

The package covers the full pipeline: describe a network model as a set of
subgraphs with per-orbit count distributions, sample networks from it,
compile the matching mean-field ODE system, integrate it, and check it
against event-driven stochastic simulation.
"""
from .compiler import (CompiledSystem, EpidemicParams, assemble_system,
                       build_T, build_Z)
from .config import (ConfigError, ExperimentConfig, load_config, load_preset,
                     parse_config, parse_model, preset_names)
from .gillespie import (EnsembleResult, NoOutbreaksError, SimProtocol,
                        run_ensemble, simulate_once)
from .models import (ExactCount, NetworkModel, Poisson, ScaledPoisson,
                     mixture_model, single_orbit_model)
from .netgen import (AssemblyError, ConstraintError, Network,
                     generate_network, load_edgelist, measure, save_edgelist)
from .odesolve import EpidemicTrace, integrate, solve_rk45
from .pgf import (HyperstubPGF, MixtureInfeasibleError, MomentReport,
                  build_pgf, contribution_matrix, moments, solve_mixture)
from .subgraphs import (LIBRARY, PositionIndex, Subgraph, SubgraphError,
                        build_position_index, compute_orbits)

__version__ = "1.0.0"

__all__ = [
    "AssemblyError", "CompiledSystem", "ConfigError", "ConstraintError",
    "EnsembleResult", "EpidemicParams", "EpidemicTrace", "ExactCount",
    "ExperimentConfig", "HyperstubPGF", "LIBRARY", "MixtureInfeasibleError",
    "MomentReport", "Network", "NetworkModel", "NoOutbreaksError",
    "Poisson", "PositionIndex", "ScaledPoisson", "SimProtocol", "Subgraph",
    "SubgraphError", "assemble_system", "build_T", "build_Z",
    "build_pgf", "build_position_index", "compute_orbits",
    "contribution_matrix", "generate_network", "integrate", "load_config",
    "load_edgelist", "load_preset", "measure", "mixture_model", "moments",
    "parse_config", "parse_model", "preset_names", "run_ensemble",
    "save_edgelist", "simulate_once", "single_orbit_model", "solve_mixture",
    "solve_rk45",
]
