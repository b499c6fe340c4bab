"""p-condenser capacities, capacitary potentials and p-harmonic Green functions
on finite weighted graphs that model metric measure spaces."""

from .errors import ConsistencyError, RejectionError, SolverError
from .model_space import (
    ExhaustionSchedule, GridSpec, RadialSpace, WeightedGraph, ball_set,
    build_grid, exhaust, induced_subgraph, path_graph, radial_graph,
    random_connected_graph,
)
from .solver import SolverConfig, p_energy, solve_dirichlet, solve_obstacle
from .capacity import (
    CondenserProblem, build_warning_ring, cap_Dp, check_capacity_axioms,
    check_exhaustion_limit, condenser_capacity, condenser_capacity_naive,
    sobolev_capacity,
)
from .potential import (
    capacitary_potential, green_normalize, singular_function, verify_level_identity,
)
from .perron import (
    BoundaryData, bracket_upper_lower, hf_solution, perron_solution, regularity_probe,
)
from .oracles import (
    VolumeGrowthProfile, classify_hyperbolicity, oned_weighted,
    radial_condenser_capacity, rn_green,
)

__version__ = "0.1.0"
