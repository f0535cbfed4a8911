"""
Checks of the spectral relations behind strong subadditivity.

Lemma 1 relations (majorizations between a spectrum and the block sums of a
larger one), the Lemma 2 rank relation, the four conditions on an abstract
tuple of spectra, and the entropy gaps themselves.

.. code-block:: python

    from ssalab.conditions import check_state

    report = check_state(rho)
    report.lemma1.holds, report.ssa_gap

"""

import logging
import typing
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ZeroPatternError
from .options import BRACKETS, CheckOptions
from .spectra import Spectrum, aggregate, entropy, majorized_by, numerical_rank
from .tensor_core import DensityMatrix, TripartiteDims, partial_trace, spectrum_of

logger = logging.getLogger(__name__)

_DEFAULT_OPTIONS = CheckOptions()


@dataclass(frozen=True, eq=False)
class SpectraTuple:
    """
    Ascending spectra of ABC, AB, BC and B. They may come from a real state
    (see :func:`spectra_tuple_of`) or be abstract.
    """

    #: length ``L*M*N``
    lambda_abc: Spectrum

    #: length ``L*M``
    lambda_ab: Spectrum

    #: length ``M*N``
    lambda_bc: Spectrum

    #: length ``M``
    lambda_b: Spectrum

    dims: TripartiteDims

    def __post_init__(self) -> None:
        d = self.dims
        for name, expected in (
            ("lambda_abc", d.total),
            ("lambda_ab", d.L * d.M),
            ("lambda_bc", d.M * d.N),
            ("lambda_b", d.M),
        ):
            got = len(getattr(self, name))
            if got != expected:
                raise DimensionError(
                    f"{name} has length {got}, dims {d.as_list()} need {expected}"
                )

    @classmethod
    def from_values(
        cls,
        dims: TripartiteDims,
        abc: typing.Sequence[float],
        ab: typing.Sequence[float],
        bc: typing.Sequence[float],
        b: typing.Sequence[float],
    ) -> "SpectraTuple":
        return cls(
            Spectrum(abc, "ABC"),
            Spectrum(ab, "AB"),
            Spectrum(bc, "BC"),
            Spectrum(b, "B"),
            dims,
        )

    @classmethod
    def uniform(cls, dims: TripartiteDims) -> "SpectraTuple":
        """
        Every vector uniform: the state ``I / (L*M*N)``
        """
        return cls(
            Spectrum.uniform(dims.total, "ABC"),
            Spectrum.uniform(dims.L * dims.M, "AB"),
            Spectrum.uniform(dims.M * dims.N, "BC"),
            Spectrum.uniform(dims.M, "B"),
            dims,
        )

    def vectors(self) -> typing.List[np.ndarray]:
        """
        ``[abc, ab, bc, b]`` value arrays
        """
        return [
            self.lambda_abc.values,
            self.lambda_ab.values,
            self.lambda_bc.values,
            self.lambda_b.values,
        ]

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "dims": self.dims.as_list(),
            "lambda_abc": [float(v) for v in self.lambda_abc.values],
            "lambda_ab": [float(v) for v in self.lambda_ab.values],
            "lambda_bc": [float(v) for v in self.lambda_bc.values],
            "lambda_b": [float(v) for v in self.lambda_b.values],
        }


@dataclass
class CheckResult:
    holds: bool

    #: smallest margin; negative means violated
    margin: float

    #: per-prefix margins where they exist
    margins: typing.List[float] = field(default_factory=list)


@dataclass
class MajorizationChecks:
    """
    The four majorizations, each with the smaller (more mixed) vector on the
    majorized side
    """

    #: ``λ_AB`` majorized by the ``N``-block sums of ``λ_ABC``
    ab_vs_abc: CheckResult

    #: ``λ_BC`` majorized by the ``L``-block sums of ``λ_ABC``
    bc_vs_abc: CheckResult

    #: ``λ_B`` majorized by the ``N``-block sums of ``λ_BC``
    b_vs_bc: CheckResult

    #: ``λ_B`` majorized by the ``L``-block sums of ``λ_AB``
    b_vs_ab: CheckResult

    def checks(self) -> typing.List[CheckResult]:
        return [self.ab_vs_abc, self.bc_vs_abc, self.b_vs_bc, self.b_vs_ab]

    @property
    def holds(self) -> bool:
        return all(c.holds for c in self.checks())

    @property
    def margin(self) -> float:
        return min(c.margin for c in self.checks())


@dataclass
class Lemma2Result:
    """
    Zero counts of a state and the rank relation between them
    """

    #: zeros of ``λ_ABC`` (written ``Ls`` in the rank relation)
    ls_count: int

    #: zeros of ``λ_BC``
    s: int

    #: zeros of ``λ_AB``
    r: int

    #: zeros of ``λ_B``
    t: int

    #: ``ls_count == L*s``
    rank_hypothesis: bool

    #: ``N*r <= L*s``
    dimension_hypothesis: bool

    #: both hypotheses hold
    applicable: bool

    #: largest ``t`` the relation allows
    bound: int

    #: ``t <= bound``; vacuously true when not applicable
    conclusion_holds: bool


@dataclass
class ZeroClause:
    """
    One orientation of the zero-count condition
    """

    #: the zero count of ``λ_ABC`` is exactly the required multiple
    applicable: bool

    #: zeros ``λ_B`` must have at least
    required: int

    holds: bool


@dataclass
class ZeroPatternResult:
    ls_count: int
    s: int
    r: int
    t: int

    #: ``ls_count == L*s``, requiring ``t >= [(r-1)/L] + 1``
    bc_clause: ZeroClause

    #: ``ls_count == N*r``, requiring ``t >= [(s-1)/N] + 1``
    ab_clause: ZeroClause

    @property
    def applicable(self) -> bool:
        return self.bc_clause.applicable or self.ab_clause.applicable

    @property
    def holds(self) -> bool:
        return all(c.holds for c in (self.bc_clause, self.ab_clause) if c.applicable)

    @property
    def margin(self) -> float:
        gaps = [
            self.t - c.required
            for c in (self.bc_clause, self.ab_clause)
            if c.applicable
        ]
        return float(min(gaps)) if gaps else 0.0


@dataclass
class TheoremConditions:
    condition1: CheckResult
    condition2: CheckResult

    #: both ``λ_B`` majorizations; margins are the elementwise minimum
    condition3: CheckResult

    condition4: ZeroPatternResult

    @property
    def holds(self) -> bool:
        return (
            self.condition1.holds
            and self.condition2.holds
            and self.condition3.holds
            and self.condition4.holds
        )


@dataclass
class ConditionReport:
    """
    Everything checked on a single tripartite state
    """

    lemma1: MajorizationChecks
    lemma2: Lemma2Result
    theorem_conditions: TheoremConditions
    ssa_gap: float

    #: subadditivity gap of the ``AB`` marginal
    subadd_gap: float

    def violations(self, tolerance: float) -> typing.List[str]:
        """
        Names of the checks that fail, gaps compared against ``-tolerance``
        """
        bad = []
        for name in ("ab_vs_abc", "bc_vs_abc", "b_vs_bc", "b_vs_ab"):
            if not getattr(self.lemma1, name).holds:
                bad.append(f"lemma1.{name}")
        if not self.lemma2.conclusion_holds:
            bad.append("lemma2")
        if self.ssa_gap < -tolerance:
            bad.append("ssa_gap")
        if self.subadd_gap < -tolerance:
            bad.append("subadd_gap")
        return bad

    def to_json(self) -> typing.Dict[str, typing.Any]:
        tc = self.theorem_conditions
        return {
            "lemma1": _majorizations_json(self.lemma1),
            "lemma2": {
                "applicable": self.lemma2.applicable,
                "rank_hypothesis": self.lemma2.rank_hypothesis,
                "dimension_hypothesis": self.lemma2.dimension_hypothesis,
                "holds": self.lemma2.conclusion_holds,
                "Ls": self.lemma2.ls_count,
                "s": self.lemma2.s,
                "r": self.lemma2.r,
                "t": self.lemma2.t,
                "bound": self.lemma2.bound,
            },
            "theorem_conditions": {
                "condition1": _check_json(tc.condition1),
                "condition2": _check_json(tc.condition2),
                "condition3": _check_json(tc.condition3),
                "condition4": {
                    "holds": tc.condition4.holds,
                    "margin": tc.condition4.margin,
                    "applicable": tc.condition4.applicable,
                },
            },
            "ssa_gap": self.ssa_gap,
            "subadd_gap": self.subadd_gap,
        }


def _check_json(c: CheckResult) -> typing.Dict[str, typing.Any]:
    return {"holds": c.holds, "margin": c.margin, "margins": c.margins}


def _majorizations_json(m: MajorizationChecks) -> typing.Dict[str, typing.Any]:
    return {
        "ab_vs_abc": _check_json(m.ab_vs_abc),
        "bc_vs_abc": _check_json(m.bc_vs_abc),
        "b_vs_bc": _check_json(m.b_vs_bc),
        "b_vs_ab": _check_json(m.b_vs_ab),
        "holds": m.holds,
        "margin": m.margin,
    }


#
# Spectra of a real state
#


def spectra_tuple_of(
    rho: DensityMatrix, *, options: typing.Optional[CheckOptions] = None
) -> SpectraTuple:
    """
    Spectra of ``ρ_ABC`` and of its ``AB``, ``BC`` and ``B`` marginals
    """
    if rho.systems != "ABC":
        raise DimensionError(f"expected a tripartite state, got one on {rho.systems}")
    opts = options or _DEFAULT_OPTIONS
    return SpectraTuple(
        spectrum_of(rho, options=opts),
        spectrum_of(partial_trace(rho, "AB"), options=opts),
        spectrum_of(partial_trace(rho, "BC"), options=opts),
        spectrum_of(partial_trace(rho, "B"), options=opts),
        rho.dims,
    )


def _majorization(x: Spectrum, y: np.ndarray, tol: float) -> CheckResult:
    m = majorized_by(x, y, tol=tol)
    return CheckResult(m.holds, m.margin, m.margins)


def majorization_checks(
    t: SpectraTuple, *, options: typing.Optional[CheckOptions] = None
) -> MajorizationChecks:
    """
    The four majorizations of a spectra tuple, real or abstract
    """
    opts = options or _DEFAULT_OPTIONS
    L, N = t.dims.L, t.dims.N
    tol = opts.majorization_tol
    return MajorizationChecks(
        ab_vs_abc=_majorization(t.lambda_ab, aggregate(t.lambda_abc, N).values, tol),
        bc_vs_abc=_majorization(t.lambda_bc, aggregate(t.lambda_abc, L).values, tol),
        b_vs_bc=_majorization(t.lambda_b, aggregate(t.lambda_bc, N).values, tol),
        b_vs_ab=_majorization(t.lambda_b, aggregate(t.lambda_ab, L).values, tol),
    )


def check_lemma1(
    rho: DensityMatrix, *, options: typing.Optional[CheckOptions] = None
) -> MajorizationChecks:
    """
    Lemma 1 on a real state: every reduced spectrum is majorized by the block
    sums of the spectrum it was reduced from
    """
    return majorization_checks(spectra_tuple_of(rho, options=options), options=options)


#
# Zero counts
#


def required_b_zeros(r: int, L: int, bracket: str = "floor") -> int:
    """
    ``[(r-1)/L] + 1`` for ``r >= 1`` and 0 for ``r == 0``.

    ``bracket="floor"`` reads ``[x]`` as the floor, which makes the result
    ``ceil(r/L)``. ``bracket="strict"`` reads it as the largest integer
    strictly smaller than ``x``; the two differ when ``L`` divides ``r - 1``.
    """
    if r < 0:
        raise ZeroPatternError(f"zero count must be >= 0, got {r}")
    if L < 1:
        raise DimensionError(f"dimension must be >= 1, got {L}")
    if bracket not in BRACKETS:
        raise ValueError(f"unknown bracket interpretation {bracket!r}")
    if r == 0:
        return 0
    if bracket == "floor":
        return (r - 1) // L + 1
    # ceil((r-1)/L) - 1, then + 1
    return -(-(r - 1) // L)


def zero_counts(
    t: SpectraTuple, threshold: float
) -> typing.Tuple[int, int, int, int]:
    """
    ``(Ls, s, r, t)``: zeros of ``λ_ABC``, ``λ_BC``, ``λ_AB`` and ``λ_B``
    """
    return (
        numerical_rank(t.lambda_abc, threshold).zero_count,
        numerical_rank(t.lambda_bc, threshold).zero_count,
        numerical_rank(t.lambda_ab, threshold).zero_count,
        numerical_rank(t.lambda_b, threshold).zero_count,
    )


def zero_pattern_check(
    dims: TripartiteDims, ls_count: int, s: int, r: int, t: int, bracket: str = "floor"
) -> ZeroPatternResult:
    """
    Zero-count condition for explicit zero counts, in both orientations
    """
    bc_required = required_b_zeros(r, dims.L, bracket)
    bc_applicable = ls_count == dims.L * s
    ab_required = required_b_zeros(s, dims.N, bracket)
    ab_applicable = ls_count == dims.N * r
    return ZeroPatternResult(
        ls_count,
        s,
        r,
        t,
        ZeroClause(bc_applicable, bc_required, t >= bc_required),
        ZeroClause(ab_applicable, ab_required, t >= ab_required),
    )


def _lemma2(
    spectra: SpectraTuple, threshold: float, bracket: str
) -> Lemma2Result:
    d = spectra.dims
    ls_count, s, r, t = zero_counts(spectra, threshold)
    rank_hypothesis = ls_count == d.L * s
    dimension_hypothesis = d.N * r <= d.L * s
    applicable = rank_hypothesis and dimension_hypothesis
    bound = required_b_zeros(r, d.L, bracket)
    logger.debug(
        "zero counts Ls=%d s=%d r=%d t=%d, applicable=%s, bound=%d (%s)",
        ls_count, s, r, t, applicable, bound, bracket,
    )
    return Lemma2Result(
        ls_count=ls_count,
        s=s,
        r=r,
        t=t,
        rank_hypothesis=rank_hypothesis,
        dimension_hypothesis=dimension_hypothesis,
        applicable=applicable,
        bound=bound,
        conclusion_holds=(not applicable) or t <= bound,
    )


def check_lemma2(
    rho: DensityMatrix,
    threshold: typing.Optional[float] = None,
    *,
    options: typing.Optional[CheckOptions] = None,
) -> Lemma2Result:
    """
    Lemma 2 on a real state: when ``rank(ρ_ABC) = LMN - Ls``,
    ``rank(ρ_BC) = MN - s`` and ``N*r <= L*s``, ``ρ_B`` has at most
    ``[(r-1)/L] + 1`` zero eigenvalues. An unmet hypothesis is reported with
    ``applicable=False`` and a vacuous conclusion.
    """
    opts = options or _DEFAULT_OPTIONS
    if threshold is None:
        threshold = opts.rank_threshold
    return _lemma2(spectra_tuple_of(rho, options=opts), threshold, opts.bracket)


def check_theorem_conditions(
    t: SpectraTuple, *, options: typing.Optional[CheckOptions] = None
) -> TheoremConditions:
    """
    Conditions 1-4 on a spectra tuple.

    Conditions 1-3 are majorizations against block sums. Condition 4 is
    checked in both orientations; an orientation whose structural
    hypothesis (``Ls == L*s``, or ``Ls == N*r`` after exchanging ``AB`` and
    ``BC``) is unmet is not applicable rather than failed.
    """
    opts = options or _DEFAULT_OPTIONS
    m = majorization_checks(t, options=opts)

    b_margins = [
        min(x, y) for x, y in zip(m.b_vs_bc.margins, m.b_vs_ab.margins)
    ]
    condition3 = CheckResult(
        m.b_vs_bc.holds and m.b_vs_ab.holds,
        min(m.b_vs_bc.margin, m.b_vs_ab.margin),
        b_margins,
    )

    ls_count, s, r, zb = zero_counts(t, opts.rank_threshold)
    condition4 = zero_pattern_check(t.dims, ls_count, s, r, zb, opts.bracket)

    return TheoremConditions(m.ab_vs_abc, m.bc_vs_abc, condition3, condition4)


#
# Entropy gaps
#


def _ssa_gap(t: SpectraTuple) -> float:
    return (
        entropy(t.lambda_ab)
        + entropy(t.lambda_bc)
        - entropy(t.lambda_abc)
        - entropy(t.lambda_b)
    )


def ssa_gap(
    rho: DensityMatrix, *, options: typing.Optional[CheckOptions] = None
) -> float:
    """
    ``S(ρ_AB) + S(ρ_BC) - S(ρ_ABC) - S(ρ_B)``, signed
    """
    return _ssa_gap(spectra_tuple_of(rho, options=options))


def _subadditivity(rho_ab: DensityMatrix, opts: CheckOptions) -> float:
    return (
        entropy(spectrum_of(partial_trace(rho_ab, "A"), options=opts))
        + entropy(spectrum_of(partial_trace(rho_ab, "B"), options=opts))
        - entropy(spectrum_of(rho_ab, options=opts))
    )


def subadditivity_gap(
    rho: DensityMatrix, *, options: typing.Optional[CheckOptions] = None
) -> float:
    """
    ``S(ρ_A) + S(ρ_B) - S(ρ_AB)`` of a bipartite state. A tripartite state
    with ``N == 1`` is accepted as a bipartite one.
    """
    opts = options or _DEFAULT_OPTIONS
    if rho.systems == "ABC" and rho.dims.N == 1:
        rho = partial_trace(rho, "AB")
    if rho.systems != "AB":
        raise DimensionError(
            f"subadditivity needs a state on AB, got {rho.systems} "
            f"with dims {rho.dims.as_list()}"
        )
    return _subadditivity(rho, opts)


def check_state(
    rho: DensityMatrix, *, options: typing.Optional[CheckOptions] = None
) -> ConditionReport:
    """
    Runs every check on a tripartite state, computing each spectrum once
    """
    opts = options or _DEFAULT_OPTIONS
    spectra = spectra_tuple_of(rho, options=opts)
    return ConditionReport(
        lemma1=majorization_checks(spectra, options=opts),
        lemma2=_lemma2(spectra, opts.rank_threshold, opts.bracket),
        theorem_conditions=check_theorem_conditions(spectra, options=opts),
        ssa_gap=_ssa_gap(spectra),
        subadd_gap=_subadditivity(partial_trace(rho, "AB"), opts),
    )
