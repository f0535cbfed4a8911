# Support patterns, sampling, minimization of F and the perturbation identity

import re

import numpy as np
import pytest

from ssalab.conditions import (
    SpectraTuple,
    check_theorem_conditions,
    spectra_tuple_of,
    ssa_gap,
    zero_counts,
)
from ssalab.errors import (
    DimensionError,
    PerturbationError,
    SamplerError,
    ZeroPatternError,
)
from ssalab.minimizer import (
    FeasibleRegionSpec,
    SupportPattern,
    Transfer,
    apply_transfer,
    direct_delta,
    enumerate_patterns,
    is_tight,
    local_minimize,
    minimize_f,
    objective_f,
    oracle_scan,
    perturbation_delta,
    perturbation_ladder,
    random_transfer,
    sample_feasible,
    tight_patterns,
    tuple_uniformity_deviation,
    validate_pattern,
)
from ssalab.options import MinimizerOptions
from ssalab.stategen import GeneratorSpec, generate
from ssalab.tensor_core import TripartiteDims

D222 = TripartiteDims(2, 2, 2)

EPS = 0.01

# every condition holds, yet F is about -0.595
COUNTEREXAMPLE = SpectraTuple.from_values(
    D222,
    [0, 0, 0, 0, EPS, EPS, 0.5 - EPS, 0.5 - EPS],
    [0, 0, 2 * EPS, 1 - 2 * EPS],
    [0, 0, 2 * EPS, 1 - 2 * EPS],
    [0.0, 1.0],
)


def _mix(t: SpectraTuple, w: float) -> SpectraTuple:
    u = SpectraTuple.uniform(t.dims)
    vectors = [w * a + (1 - w) * b for a, b in zip(t.vectors(), u.vectors())]
    return SpectraTuple.from_values(t.dims, *vectors)


#
# Support patterns
#


def test_pattern_parse() -> None:
    assert SupportPattern.parse("full") == SupportPattern()
    p = SupportPattern.parse(" 4,2,2,1 ")
    assert p == SupportPattern(4, 2, 2, 1)
    assert str(p) == "4,2,2,1"
    assert p.to_json() == {"Ls": 4, "s": 2, "r": 2, "t": 1}

    with pytest.raises(ZeroPatternError, match="must be 'Ls,s,r,t'"):
        SupportPattern.parse("4,2")
    with pytest.raises(ZeroPatternError, match="must be integers"):
        SupportPattern.parse("a,b,c,d")


@pytest.mark.parametrize(
    "pattern, err",
    [
        (
            SupportPattern(2, 1, 2, 1),
            "pattern (2,1,2,1) has an empty feasible region: needs Ls >= N*r",
        ),
        (SupportPattern(1, 1, 0, 0), "needs Ls >= L*s"),
        (SupportPattern(4, 2, 1, 1), "needs r >= L*t"),
        (
            SupportPattern(4, 2, 2, 0),
            "pattern (4,2,2,0) needs at least 1 zeros in λ_B, has 0",
        ),
        (SupportPattern(8, 0, 0, 0), "zero count Ls=8 must lie in [0, 7]"),
        (SupportPattern(0, 0, 0, 2), "zero count t=2 must lie in [0, 1]"),
    ],
)
def test_validate_pattern_rejects(pattern: SupportPattern, err: str) -> None:
    with pytest.raises(ZeroPatternError, match=re.escape(err)):
        validate_pattern(D222, pattern)


def test_enumerate_patterns() -> None:
    patterns = enumerate_patterns(D222)
    assert patterns[0] == SupportPattern()
    assert SupportPattern(4, 2, 2, 1) in patterns
    assert SupportPattern(2, 1, 2, 1) not in patterns
    assert SupportPattern(4, 2, 2, 0) not in patterns
    assert len(set(patterns)) == len(patterns)

    for p in patterns:
        validate_pattern(D222, p)


def test_tight_patterns() -> None:
    patterns = tight_patterns(D222)
    assert patterns[0] == SupportPattern()
    assert SupportPattern(4, 2, 2, 1) in patterns
    assert SupportPattern(6, 3, 2, 1) in patterns
    assert SupportPattern(2, 1, 0, 0) in patterns
    # no orientation applies, so nothing is tight
    assert SupportPattern(7, 3, 3, 1) not in patterns
    assert len(set(patterns)) == len(patterns) == 10

    everything = set(enumerate_patterns(D222))
    for p in patterns[1:]:
        assert p in everything
        assert is_tight(D222, p)


def test_region_spec_rejects() -> None:
    with pytest.raises(ValueError, match="unknown bracket"):
        FeasibleRegionSpec(D222, bracket="round")
    with pytest.raises(ValueError, match="tolerance must be > 0"):
        FeasibleRegionSpec(D222, tolerance=0.0)
    with pytest.raises(ValueError, match="rank threshold must be > 0"):
        FeasibleRegionSpec(D222, rank_threshold=0.0)
    with pytest.raises(ZeroPatternError):
        FeasibleRegionSpec(D222, SupportPattern(2, 1, 2, 1))
    with pytest.raises(
        DimensionError, match=re.escape("dims [4, 4, 5] exceed L*M*N = 64")
    ):
        FeasibleRegionSpec(TripartiteDims(4, 4, 5))


def test_region_spec_threshold() -> None:
    spec = FeasibleRegionSpec(D222, SupportPattern(4, 2, 2, 1), rank_threshold=0.05)
    assert spec.check_options().rank_threshold == 0.05
    assert spec.to_json()["rank_threshold"] == 0.05
    assert spec.support_floor(MinimizerOptions()) == 0.1
    assert FeasibleRegionSpec(D222).support_floor(MinimizerOptions()) == 1e-9

    for seed in range(20):
        t = sample_feasible(spec, seed)
        assert zero_counts(t, 0.05) == (4, 2, 2, 1)
        assert check_theorem_conditions(t, options=spec.check_options()).holds


def test_region_spec_uniform_tuple() -> None:
    spec = FeasibleRegionSpec(D222, SupportPattern(4, 2, 2, 1))
    t = spec.uniform_tuple()
    assert zero_counts(t, 1e-10) == (4, 2, 2, 1)
    assert check_theorem_conditions(t, options=spec.check_options()).holds
    assert tuple_uniformity_deviation(t) == 0.0


#
# Objective
#


@pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 2), (3, 2, 4), (1, 2, 1)])
def test_objective_vanishes_on_uniform(dims: tuple) -> None:
    uniform = SpectraTuple.uniform(TripartiteDims(*dims))
    assert objective_f(uniform) == pytest.approx(0.0, abs=1e-12)


def test_objective_is_ssa_gap_on_real_states() -> None:
    for seed in range(20):
        spec = GeneratorSpec(TripartiteDims(2, 3, 2), "ginibre_full", seed=seed)
        rho = generate(spec)
        assert objective_f(spectra_tuple_of(rho)) == pytest.approx(
            ssa_gap(rho), abs=1e-9
        )


def test_counterexample_tuple() -> None:
    tc = check_theorem_conditions(COUNTEREXAMPLE)
    assert tc.holds
    assert objective_f(COUNTEREXAMPLE) == pytest.approx(-0.5951, abs=1e-3)

    mixed = _mix(COUNTEREXAMPLE, 0.99)
    assert zero_counts(mixed, 1e-10) == (0, 0, 0, 0)
    assert check_theorem_conditions(mixed).holds
    assert objective_f(mixed) < -0.4


#
# Sampler and oracle
#


@pytest.mark.parametrize("pattern", ["full", "2,1,0,0", "4,2,2,1"])
def test_sampler_feasible(pattern: str) -> None:
    spec = FeasibleRegionSpec(D222, SupportPattern.parse(pattern))
    p = spec.pattern
    for seed in range(1, 101):
        t = sample_feasible(spec, seed)
        assert zero_counts(t, 1e-10) == (p.ls_count, p.s, p.r, p.t)
        assert check_theorem_conditions(t, options=spec.check_options()).holds


def test_sampler_is_deterministic() -> None:
    spec = FeasibleRegionSpec(TripartiteDims(2, 3, 2))
    a = sample_feasible(spec, 42)
    b = sample_feasible(spec, 42)
    c = sample_feasible(spec, 43)
    for x, y in zip(a.vectors(), b.vectors()):
        assert np.array_equal(x, y)
    assert not np.array_equal(a.lambda_abc.values, c.lambda_abc.values)


def test_sampler_gives_up() -> None:
    spec = FeasibleRegionSpec(D222)
    opts = MinimizerOptions(support_floor=0.9, sampler_budget=5)
    with pytest.raises(
        SamplerError, match="no feasible tuple after 5 draws"
    ) as excinfo:
        sample_feasible(spec, 0, options=opts)
    assert excinfo.value.spec == spec


def test_oracle_scan() -> None:
    spec = FeasibleRegionSpec(D222)
    single = oracle_scan(spec, 1, seed=3)
    assert single.evaluated == 1
    assert single.argmin_index == 0
    assert single.minimum == pytest.approx(objective_f(single.argmin), abs=1e-15)

    result = oracle_scan(spec, 50, seed=3, include=[spec.uniform_tuple()])
    assert result.evaluated == 51
    assert result.minimum <= 1e-12
    assert result.minimum == pytest.approx(objective_f(result.argmin), abs=1e-15)

    with pytest.raises(ValueError):
        oracle_scan(spec, 0, seed=3)


def test_oracle_finds_counterexample_region() -> None:
    spec = FeasibleRegionSpec(D222, SupportPattern(4, 2, 2, 1))
    result = oracle_scan(spec, 20, seed=0, include=[COUNTEREXAMPLE])
    assert result.minimum < -0.5


#
# Local and multi-start minimization
#


def test_local_minimize_from_uniform() -> None:
    spec = FeasibleRegionSpec(D222)
    run = local_minimize(
        spec, spec.uniform_tuple(), options=MinimizerOptions(max_iterations=500)
    )
    assert run.start_objective == pytest.approx(0.0, abs=1e-12)
    assert run.objective <= 1e-12
    assert run.objective == pytest.approx(objective_f(run.minimizer), abs=1e-15)


def test_local_minimize_never_worse_than_feasible_start() -> None:
    spec = FeasibleRegionSpec(D222)
    mixed = _mix(COUNTEREXAMPLE, 0.99)
    run = local_minimize(spec, mixed, options=MinimizerOptions(max_iterations=500))
    assert run.objective <= objective_f(mixed) + 1e-12


def test_minimize_f() -> None:
    spec = FeasibleRegionSpec(D222)
    mixed = _mix(COUNTEREXAMPLE, 0.99)
    result = minimize_f(
        spec,
        restarts=2,
        seed=5,
        starts=[mixed, spec.uniform_tuple()],
        options=MinimizerOptions(max_iterations=2000),
    )

    assert result.restarts == 4
    assert len(result.runs) == 4
    assert [r.seed is None for r in result.runs] == [False, False, True, True]
    assert result.converged_restarts == sum(r.converged for r in result.runs)
    for r in result.runs:
        assert r.objective <= r.start_objective + 1e-12
    assert result.runs[2].objective <= objective_f(mixed) + 1e-12

    # the gradient is constant on each vector at the uniform tuple
    assert result.runs[3].converged
    assert result.converged
    assert result.minimizer is not None
    assert result.objective == pytest.approx(objective_f(result.minimizer), abs=1e-15)
    assert result.feasibility_residual <= 1e-6
    assert result.objective == min(r.objective for r in result.runs if r.converged)
    assert result.objective <= result.runs[3].objective

    doc = result.to_json()
    assert doc["spec"]["pattern"] == {"Ls": 0, "s": 0, "r": 0, "t": 0}
    assert len(doc["seeds"]) == 4
    assert doc["uniform"] == result.uniform


def test_minimize_f_beats_oracle() -> None:
    # λ_BC and λ_B are fixed; F = S(λ_AB) - S(λ_ABC) is smallest with λ_AB
    # pressed onto the support floor and λ_ABC uniform on its support
    spec = FeasibleRegionSpec(D222, SupportPattern(6, 3, 2, 1))
    oracle = oracle_scan(spec, 200, seed=4)
    result = minimize_f(spec, restarts=2, seed=4, starts=[oracle.argmin])

    assert result.converged
    assert result.objective is not None
    assert result.objective <= oracle.minimum + 1e-7
    assert result.objective < -0.69
    assert result.uniform is False


def test_minimize_f_single_point_region() -> None:
    spec = FeasibleRegionSpec(D222, SupportPattern(7, 3, 3, 1))
    result = minimize_f(spec, restarts=2, seed=0)
    assert result.converged
    assert result.converged_restarts == 2
    assert result.objective == pytest.approx(0.0, abs=1e-12)
    assert result.uniformity_deviation == pytest.approx(0.0, abs=1e-12)
    assert result.uniform is True
    assert result.to_json()["uniform"] is True


def test_minimize_f_is_deterministic() -> None:
    spec = FeasibleRegionSpec(D222, SupportPattern(2, 1, 0, 0))
    opts = MinimizerOptions(max_iterations=200)
    a = minimize_f(spec, restarts=2, seed=9, options=opts)
    b = minimize_f(spec, restarts=2, seed=9, options=opts)
    assert a.to_json() == b.to_json()


def test_minimize_f_rejects_restarts() -> None:
    with pytest.raises(ValueError, match="restarts must be >= 1"):
        minimize_f(FeasibleRegionSpec(D222), restarts=0)


#
# Perturbation identity
#


def _transfer(delta: float) -> Transfer:
    return Transfer((0, 2), (6, 8), (0, 1), (3, 4), (0, 1), (2, 4), delta=delta)


def test_zero_delta() -> None:
    rng = np.random.default_rng(0)
    t, transfer = random_transfer(rng, D222)
    step = Transfer(*[s for pair in transfer.sections() for s in pair], delta=0.0)
    assert perturbation_delta(t, step) == 0.0
    assert direct_delta(t, step) == 0.0


def test_uniform_prediction_vanishes() -> None:
    t = SpectraTuple.uniform(D222)
    assert perturbation_delta(t, _transfer(1e-3)) == pytest.approx(0.0, abs=1e-12)


def test_transfer_rejects() -> None:
    t = SpectraTuple.uniform(D222)
    with pytest.raises(PerturbationError, match="delta must be >= 0"):
        perturbation_delta(t, _transfer(-1e-3))
    with pytest.raises(PerturbationError, match="delta must be >= 0"):
        apply_transfer(t, _transfer(-1e-3))

    breaks = Transfer((0, 1), (1, 2), (0, 1), (3, 4), (0, 1), (3, 4), delta=0.01)
    with pytest.raises(PerturbationError, match="breaks the abc ordering"):
        apply_transfer(t, breaks)
    with pytest.raises(PerturbationError, match="breaks the abc ordering"):
        perturbation_delta(t, breaks)

    with pytest.raises(PerturbationError, match="drives a abc entry"):
        apply_transfer(t, _transfer(0.3))
    with pytest.raises(PerturbationError, match="drives a abc entry"):
        perturbation_delta(t, _transfer(0.3))

    empty = Transfer((1, 1), (6, 8), (0, 1), (3, 4), (0, 1), (3, 4), delta=0.01)
    with pytest.raises(PerturbationError, match="must be nonempty"):
        perturbation_delta(t, empty)


def test_perturbation_ladder_is_second_order() -> None:
    rng = np.random.default_rng(1)
    deltas = [1e-4 / 2**k for k in range(4)]
    for _ in range(20):
        t, transfer = random_transfer(rng, D222)
        rows = perturbation_ladder(t, transfer, deltas)
        assert [r.delta for r in rows] == deltas
        assert rows[0].ratio is None
        for r in rows[1:]:
            assert r.ratio is not None
            assert 3.5 <= r.ratio <= 4.5
