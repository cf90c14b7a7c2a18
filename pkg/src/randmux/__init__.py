"""Randomized rounding for multiplexed phase rotations."""

__version__ = "0.1.0"

from .angles import (  # noqa: E402
    FixedPointAngle,
    GridAngle,
    RandomizedAngle,
    bits_for_epsilon,
    expected_phase,
    phase_error_bound,
    randomize,
    sample,
    sample_many,
    truncate_deterministic,
)
from .channels import (  # noqa: E402
    MultiplexorSpec,
    SequenceSpec,
    brute_force_average,
    brute_force_mixture,
    build_multiplexed_unitary,
    diamond_bound,
    expectation_unitary,
)
from .costs import CostParams, ResourceEstimate, optimize_params, total_cost  # noqa: E402
from .errors import InvariantError, ParameterError, RandmuxError, ResourceError  # noqa: E402
from .lowering import lower_multiplexed, simulate_lowered  # noqa: E402
