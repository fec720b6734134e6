"""Magnitude-based diversity measurement and enhancement for point sets."""

from .errors import (EvaluationError, IllConditionedError, MagflowError,
                     ProposalExhaustedError, ScaleSearchError, SingularPairError)
from .geometry import (DistanceMatrix, PointSet, ScaledSimilarity,
                       distance_matrix, load_points_csv, pullback_metric,
                       save_points_csv, similarity)
from .magnitude import (DiversityDistribution, MagnitudeProfile, ScaleReport,
                        Weighting, diagonal_cutoff, diversity_order_q, erode,
                        magnitude_of, magnitude_profile,
                        maximum_diversity_distribution, positive_cutoff,
                        solve_coweighting, solve_weighting, spread,
                        zero_scale_weighting)
from .problems import (ObjectiveProblem, Population, delta_dominance_filter,
                       dominance_counts, dtlz_problem, get_problem, igd,
                       polygon_problem, wfg_problem)
from .flow import (FlowConfig, FlowState, FlowTrace, GradientField, flow_step,
                   jacobian, mowgf_step, pullback, recycled_jacobian, run_flow,
                   speed_factors, spread_vector_flow_step, step_size,
                   weighting_gradient)
from .moea import GAConfig, crowding_distance, fast_nondominated_sort, nsga2_run
from .discrete import (MHConfig, PerturbationModel, effort, mh_batch_maximizer,
                       lattice_ground_set, mh_magnitude_step, sample_lattice,
                       stochastic_flow_step)
from .experiments import (ExperimentSpec, emit_csv, read_population_csv,
                          run_benchmark, run_toy, write_population_csv)

__version__ = "0.1.0"
