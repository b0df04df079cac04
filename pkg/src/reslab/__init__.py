"""Resonances of -h^2 d^2/dx^2 + sum_j C_j h^(1+beta_j) delta(x - x_j).

The library computes scattering resonances (poles of the analytic
continuation of the resolvent, equivalently zeros of a secular determinant
in the lower half-plane), organizes them into logarithmic strings
Im z ~ -gamma h log(1/h), and predicts the admissible decay rates gamma
from the exponent polygon of the cleared secular equation.
"""

__version__ = "0.1.0"

from .asymptotics import (
    PerKPrediction,
    StringPrediction,
    ThreeDeltaGammas,
    k_range_for_window,
    reflect_config,
    three_delta_equal_strings,
    three_delta_gammas,
    two_delta_string,
)
from .errors import (
    BadH,
    BoundaryZero,
    ConfigError,
    DuplicatePosition,
    NoConvergence,
    NonpositiveBeta,
    NotEqualSpacing,
    NotNearSingular,
    NotTwoDeltas,
    OverflowGuard,
    ReslabError,
    SingularCoefficient,
    TooFewPoles,
    TooManyPoles,
    ZeroCoupling,
    ZeroSpectralParameter,
)
from .polygon import (
    GammaCandidate,
    NewtonPolygon,
    PolygonEdge,
    build_polygon,
    edges_csv,
    gamma_candidates,
)
from .potential import (
    Pole,
    PotentialConfig,
    ScatteringCoefficients,
    config_from_dict,
    load_config,
    scattering_coefficients,
    validate_config,
    vtilde_batch,
)
from .rootfind import (
    Resonance,
    ResonanceSet,
    ResonantState,
    SearchOptions,
    StringCluster,
    StringReport,
    UncertifiedBox,
    Window,
    classify_strings,
    find_resonances,
    resonant_state,
    winding_number,
)
from .secular import (
    ClearedSumEvaluator,
    DetBatch,
    ExponentPoint,
    SecularDet,
    SecularExpansion,
    check_overflow_guard,
    evaluate_dets,
    expand_terms,
    expand_terms_bruteforce,
    exponent_points,
    matrix_structure,
    secular_det,
)

__all__ = [name for name in dir() if not name.startswith("_")]
