"""Finite-scale computation of mistake pressures on subshifts of finite type."""

from .kernels import BACKEND
from .measures import (
    MarkovMeasure,
    MeasurePressureEstimate,
    VariationalResult,
    cylinder_mass,
    cylinder_masses,
    entropy,
    f_star,
    katok_exact_cover,
    katok_mistake_pressure,
    transfer_pressure,
    variational_search,
)
from .mistake import (
    MismatchProfile,
    MistakeFunction,
    are_g_separated,
    eval_mistake,
    in_mistake_ball,
    mismatch_profile,
    mistake_ball_members,
)
from .potentials import (
    AdditivePotential,
    ApproximatingFamily,
    Lemma21Result,
    MatrixCocycle,
    PerturbedPotential,
    Potential,
    PreconditionError,
    asp_defect,
    check_subadditive,
    continuity_epsilon,
    eval_potential,
    lemma21_check,
    lemma21_sweep,
)
from .pressure import (
    ChainCheck,
    ConvergenceSeries,
    PressureEstimate,
    convergence_series,
    extrapolate,
    pressure_separated_exact,
    pressure_separated_exact_search,
    pressure_separated_greedy,
    pressure_spanning_exact,
    pressure_spanning_greedy,
    prop23_check,
    prop24_check,
)
from .symbolic import (
    BudgetExceeded,
    EpsilonWindow,
    ShiftSystem,
    SymbolicWord,
    admissible_words,
    bowen_distance,
    full_shift,
    golden_mean_shift,
)

__version__ = "0.1.0"
