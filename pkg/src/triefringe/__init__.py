"""Fringe motif counts in random m-ary tries.

Exact and asymptotic moments of subtree-shape counts, a simulation harness
with a compiled counting kernel, and the exact law for small tries.
"""

__version__ = "0.1.0"

from .errors import ConfigError, NumericError, TrieFringeError  # noqa: E402
from .source import SourceModel, SymbolStream, classify_periodicity, new_source, uniform_source  # noqa: E402
from .shape import (  # noqa: E402
    LEAF,
    Shape,
    build_trie,
    count_fringe_occurrences,
    decode_shape,
    encode_shape,
    shape_from_words,
    words_from_shape,
)
from .motif import (  # noqa: E402
    MotifCollection,
    check_nonoverlapping,
    cousin_mass_partial_sum,
    enumerate_cousins,
    shape_functional,
)
from .analytics import (  # noqa: E402
    MomentReport,
    analyze,
    covariance_coefficient,
    exact_mean,
    exact_poissonized_variance,
    linear_combo_variance_coefficient,
    mean_coefficient,
    mean_derivative_coefficient,
    oscillation_xi,
    poissonized_mean_B1,
    variance_coefficient,
)
from .montecarlo import (  # noqa: E402
    Fixed,
    Poisson,
    SimulationSummary,
    compare,
    exact_distribution,
    ks_statistic,
    normality_diagnostics,
    simulate,
)
from .special import complex_log_gamma  # noqa: E402
