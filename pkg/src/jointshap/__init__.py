"""Shapley attributions with value functions that weight the model by a data density."""

from .core import (
    BaselineDistribution,
    Coalition,
    Dataset,
    GameContext,
    LinearField,
    TableDensity,
    TableField,
    enumerate_coalitions,
    splice,
)
from .density import categorical_product, empirical_density, nce_density, nce_train, smoothed_empirical
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateNormalizationError,
    DegenerateSupportError,
    InvalidInputError,
    JointShapError,
    StageError,
    TrainingFailure,
    UndefinedCorrelationError,
)
from .shapley import (
    AttributionVector,
    exact_shapley,
    global_shapley,
    permutation_shapley,
    truncated_permutation_jbshap,
)
from .value_functions import (
    bshap,
    ces_empirical,
    ces_sample,
    ces_supervised,
    jbshap,
    make_value_function,
    rbshap,
    rjbshap,
)

__version__ = "0.1.0"
