"""Exception hierarchy for the covariate SBM toolkit."""


class CovariateSBMError(ValueError):
    """Base class for domain errors raised by the toolkit."""


class ModelSpecError(CovariateSBMError):
    """Invalid model specification, field value or field parameters."""


class NeighborhoodError(CovariateSBMError):
    """Invalid k-NN query (k out of range, empty sample, missing subgroup)."""


class LaplacianError(CovariateSBMError):
    """Localized adjacency or Laplacian cannot be built."""


class ClusteringError(CovariateSBMError):
    """Spectral decomposition or K-means precondition violated."""


class EstimationError(CovariateSBMError):
    """Plug-in estimator precondition violated."""


class AlignmentError(CovariateSBMError):
    """Community labels cannot be matched under the requested restriction."""


class PlanError(CovariateSBMError):
    """Experiment plan or model file does not validate."""
