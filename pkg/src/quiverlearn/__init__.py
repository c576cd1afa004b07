"""Machine learning over moduli spaces of framed quiver representations."""

from .activations import default_catalog, hyperbolic_sigma
from .errors import (AlgorithmParseError, AlgorithmTypeError, ConfigError, CycleError,
                     DomainSamplingFailed, EmptyModuli, NonDifferentiable, NonPositive,
                     NotPositiveDefinite, OutOfDomain, PathLimitExceeded, QuiverLearnError,
                     SingularBasisPart, SingularForm, SingularGauge, UnknownSymbol, UnknownVertex)
from .machine import Dataset, backward, cost, form_jvp, forward, gradient, realize_edge
from .metric import (COMPACT, EUCLIDEAN, HYPERBOLIC, MetricSignature, MetricState, in_domain,
                     metric_pathsum, metric_recursive, metric_state, moduli_metric_tensor, rho)
from .nearring import ActivationTree, FormTree, differentiate, grade, parse_algorithm, pretty
from .quiver import (ArrowSpec, Path, Quiver, VertexSpec, moduli_dimension, paths_into,
                     topological_order)
from .representation import (ChartLayout, FramedRep, GaugeElement, act, gauge_fix, is_stable,
                             random_rep)
from .trainer import TrainConfig, TrainHistory, precondition, step, train
from .uniformize import (GrassmannCoords, gram_factor, grassmann_inverse, grassmann_map,
                         hyperbolic_sigma_check)

__all__ = [
    "ActivationTree", "AlgorithmParseError", "AlgorithmTypeError", "ArrowSpec", "COMPACT",
    "ChartLayout", "ConfigError", "CycleError", "Dataset", "DomainSamplingFailed", "EUCLIDEAN",
    "EmptyModuli", "FormTree", "FramedRep", "GaugeElement", "GrassmannCoords", "HYPERBOLIC",
    "MetricSignature", "MetricState", "NonDifferentiable", "NonPositive",
    "NotPositiveDefinite", "OutOfDomain", "Path", "PathLimitExceeded", "Quiver",
    "QuiverLearnError", "SingularBasisPart", "SingularForm", "SingularGauge", "TrainConfig",
    "TrainHistory", "UnknownSymbol", "UnknownVertex", "VertexSpec", "act", "backward", "cost",
    "default_catalog", "differentiate", "form_jvp", "forward", "gauge_fix", "grade",
    "gradient", "gram_factor", "grassmann_inverse", "grassmann_map", "hyperbolic_sigma",
    "hyperbolic_sigma_check", "in_domain", "is_stable", "metric_pathsum", "metric_recursive",
    "metric_state", "moduli_dimension",
    "moduli_metric_tensor", "parse_algorithm", "paths_into", "precondition", "pretty",
    "random_rep", "realize_edge", "rho", "step", "topological_order", "train",
]

__version__ = "0.1.0"
