from dataclasses import dataclass

#: accepted values for :attr:`CheckOptions.bracket`
BRACKETS = ("floor", "strict")


@dataclass
class CheckOptions:
    """
    Tolerances and interpretation switches shared by the state checks
    """

    #: Largest tolerated ``|m[i, j] - conj(m[j, i])|``
    hermitian_tol: float = 1e-12

    #: Eigenvalues in ``[-negative_eigenvalue_tol, 0)`` are clamped to zero,
    #: anything below is rejected
    negative_eigenvalue_tol: float = 1e-10

    #: Largest tolerated ``|trace - 1|`` for a density matrix
    trace_tol: float = 1e-10

    #: Eigenpair residual bound, relative to the matrix norm
    residual_tol: float = 1e-9

    #: Absolute slack on majorization partial sums
    majorization_tol: float = 1e-9

    #: Spectrum entries at or below this count as zeros
    rank_threshold: float = 1e-10

    #: How ``[x]`` is read in the zero-count bound. ``floor`` is the usual
    #: floor, ``strict`` is "the largest integer smaller than x"
    bracket: str = "floor"


@dataclass
class MinimizerOptions:
    """
    Options that control the projected-descent minimizer and the feasible
    sampler
    """

    #: Projection stops once the largest constraint violation is this small
    feasibility_tol: float = 1e-10

    #: Descent stops once a step improves the objective by less than this
    improvement_tol: float = 1e-12

    #: Hard cap on descent iterations per restart
    max_iterations: int = 10_000

    #: A restart only counts as converged if its residual is below this
    converged_residual: float = 1e-6

    #: Lower bound for every entry outside the prescribed zeros. Must stay
    #: above :attr:`CheckOptions.rank_threshold` so the zero pattern survives
    support_floor: float = 1e-9

    #: Sufficient-decrease constant of the backtracking line search
    armijo: float = 1e-4

    #: Step length tried first (and the cap when the step grows back)
    initial_step: float = 1.0

    #: Backtracking gives up below this step length
    min_step: float = 1e-14

    #: Maximum number of refinement rounds per projection
    projection_rounds: int = 25

    #: Draws the feasible sampler may spend before giving up
    sampler_budget: int = 100_000

    #: Nonzero entries closer than this (relative spread) count as uniform
    uniformity_tol: float = 1e-4
