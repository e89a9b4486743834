"""Dimensions and Birkhoff spectra of Lalley-Gatzouras self-affine carpets.

The package computes the Hausdorff dimension of a carpet, and lower/upper
bounds for its Birkhoff spectra, by maximizing the Ledrappier-Young
dimension of Bernoulli measures on blocked symbol spaces; slow independent
oracles (grid search, box counting, local dimension along orbits) verify
the fast paths.
"""

from .measures import (
    BlockMeasure,
    Potential,
    PotentialFormatError,
    ThermoReport,
    average_lift,
    block_space,
    integrate,
    integrate_avg,
    load_potential,
    parse_potential,
    product_lift,
    thermo,
    var_avg,
    window_distribution,
)
from .oracle import (
    BoxCountReport,
    LevelSetReport,
    LocalDimReport,
    ZeroCylinder,
    box_count,
    empirical_level_set,
    grid_carpet_dimension,
    grid_search_dly,
    local_dimension,
)
from .render import render_svg
from .spectrum import (
    DimensionResult,
    SpectrumPoint,
    alpha_bounds,
    bracket_refine,
    carpet_dimension,
    level_range,
    spectrum_curve,
    spectrum_point,
)
from .symbolic import (
    ApproxSquare,
    DigitNeverRecurs,
    FrequencyVector,
    OrbitFormatError,
    PrefixTooShort,
    SymbolicOrbit,
    approx_square,
    cutting_index,
    cutting_indices,
    frequency,
    make_orbit,
    project_point,
    read_orbit,
    return_gap,
    return_gaps,
    sample_orbit,
    write_orbit,
)
from .system import (
    AffinePair,
    GuardExceeded,
    LGSystem,
    Row,
    SystemValidationError,
    iterate,
    load_system,
    parse_system,
    rectangle,
    validate,
)

__version__ = "0.1.0"
