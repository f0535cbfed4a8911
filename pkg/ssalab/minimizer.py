"""
Minimization of the entropy functional

    F = S(λ_AB) + S(λ_BC) - S(λ_B) - S(λ_ABC)

over abstract spectra tuples that satisfy the four conditions, plus a
random-search oracle and the first-order perturbation identity.

Condition 4 is combinatorial, so the search runs per support pattern: a
:class:`SupportPattern` fixes how many leading zeros each vector has, and the
remaining (free) coordinates range over a polytope cut out by normalization,
ordering, the support floor and the majorizations of conditions 1-3.
"""

import logging
import typing
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .conditions import SpectraTuple, zero_pattern_check
from .errors import DimensionError, PerturbationError, SamplerError, ZeroPatternError
from .options import BRACKETS, CheckOptions, MinimizerOptions
from .spectra import Spectrum, block_sums, uniformity_deviation, vector_entropy
from .stategen import derive_seeds
from .tensor_core import TripartiteDims

logger = logging.getLogger(__name__)

_DEFAULT_OPTIONS = MinimizerOptions()

# order of the vectors in the packed coordinate array
_ABC, _AB, _BC, _B = range(4)
_LABELS = ("ABC", "AB", "BC", "B")

#: largest ``L*M*N`` a feasible region may have
MAX_TOTAL_DIM = 64

#: constraint groups reported in :attr:`MinimizationResult.residuals`
CONSTRAINT_GROUPS = (
    "normalization",
    "ordering",
    "support",
    "condition1",
    "condition2",
    "condition3",
)


@dataclass(frozen=True)
class SupportPattern:
    """
    Number of (leading) zero entries of each vector
    """

    #: zeros of ``λ_ABC``
    ls_count: int = 0

    #: zeros of ``λ_BC``
    s: int = 0

    #: zeros of ``λ_AB``
    r: int = 0

    #: zeros of ``λ_B``
    t: int = 0

    @classmethod
    def parse(cls, text: str) -> "SupportPattern":
        """
        ``"full"`` or four comma separated counts ``Ls,s,r,t``
        """
        text = text.strip()
        if text == "full":
            return cls()
        parts = text.split(",")
        if len(parts) != 4:
            raise ZeroPatternError(f"support pattern must be 'Ls,s,r,t', got {text!r}")
        try:
            counts = [int(p) for p in parts]
        except ValueError as e:
            raise ZeroPatternError(
                f"support pattern must be integers, got {text!r}"
            ) from e
        return cls(*counts)

    def to_json(self) -> typing.Dict[str, int]:
        return {"Ls": self.ls_count, "s": self.s, "r": self.r, "t": self.t}

    def __str__(self) -> str:
        return f"{self.ls_count},{self.s},{self.r},{self.t}"


def validate_pattern(
    dims: TripartiteDims, pattern: SupportPattern, bracket: str = "floor"
) -> None:
    """
    Raises :class:`.ZeroPatternError` unless ``pattern`` satisfies the
    zero-count condition and leaves a nonempty feasible region.

    Ascending vectors put their zeros first, so the majorizations force
    ``Ls >= N*r``, ``Ls >= L*s``, ``r >= L*t`` and ``s >= N*t``. When these
    hold, the tuple that is uniform on every support is feasible.
    """
    L, M, N = dims.L, dims.M, dims.N
    counts = (
        ("Ls", pattern.ls_count, L * M * N),
        ("s", pattern.s, M * N),
        ("r", pattern.r, L * M),
        ("t", pattern.t, M),
    )
    for name, count, length in counts:
        if not 0 <= count < length:
            raise ZeroPatternError(
                f"zero count {name}={count} must lie in [0, {length - 1}]"
            )

    for ok, what in (
        (pattern.ls_count >= N * pattern.r, "Ls >= N*r"),
        (pattern.ls_count >= L * pattern.s, "Ls >= L*s"),
        (pattern.r >= L * pattern.t, "r >= L*t"),
        (pattern.s >= N * pattern.t, "s >= N*t"),
    ):
        if not ok:
            raise ZeroPatternError(
                f"pattern ({pattern}) has an empty feasible region: needs {what}"
            )

    z = zero_pattern_check(
        dims, pattern.ls_count, pattern.s, pattern.r, pattern.t, bracket
    )
    if not z.holds:
        required = max(
            c.required
            for c in (z.bc_clause, z.ab_clause)
            if c.applicable and not c.holds
        )
        raise ZeroPatternError(
            f"pattern ({pattern}) needs at least {required} zeros in λ_B, "
            f"has {pattern.t}"
        )


def enumerate_patterns(
    dims: TripartiteDims, bracket: str = "floor"
) -> typing.List[SupportPattern]:
    """
    Every valid support pattern on ``dims``, full support first
    """
    L, M, N = dims.L, dims.M, dims.N
    patterns = []
    for ls_count in range(L * M * N):
        for s in range(M * N):
            for r in range(L * M):
                for t in range(M):
                    p = SupportPattern(ls_count, s, r, t)
                    try:
                        validate_pattern(dims, p, bracket)
                    except ZeroPatternError:
                        continue
                    patterns.append(p)
    return patterns


def is_tight(
    dims: TripartiteDims, pattern: SupportPattern, bracket: str = "floor"
) -> bool:
    """
    Whether ``λ_B`` has exactly as many zeros as an applicable orientation
    of the zero-count condition requires
    """
    z = zero_pattern_check(
        dims, pattern.ls_count, pattern.s, pattern.r, pattern.t, bracket
    )
    return any(
        c.applicable and c.required == pattern.t for c in (z.bc_clause, z.ab_clause)
    )


def tight_patterns(
    dims: TripartiteDims, bracket: str = "floor"
) -> typing.List[SupportPattern]:
    """
    Full support, then every valid pattern that meets the zero-count bound
    with equality
    """
    full = SupportPattern()
    return [full] + [
        p
        for p in enumerate_patterns(dims, bracket)
        if p != full and is_tight(dims, p, bracket)
    ]


@dataclass(frozen=True)
class FeasibleRegionSpec:
    """
    A support pattern on given dims; the domain of one minimization
    """

    dims: TripartiteDims
    pattern: SupportPattern = SupportPattern()

    #: majorization slack used when verifying samples
    tolerance: float = 1e-9

    bracket: str = "floor"

    #: entries at or below this count as zeros of the pattern
    rank_threshold: float = CheckOptions.rank_threshold

    def __post_init__(self) -> None:
        if self.bracket not in BRACKETS:
            raise ValueError(f"unknown bracket interpretation {self.bracket!r}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if not self.rank_threshold > 0:
            raise ValueError(f"rank threshold must be > 0, got {self.rank_threshold}")
        if self.dims.total > MAX_TOTAL_DIM:
            raise DimensionError(
                f"dims {self.dims.as_list()} exceed L*M*N = {MAX_TOTAL_DIM}"
            )
        validate_pattern(self.dims, self.pattern, self.bracket)

    @property
    def zeros(self) -> typing.List[int]:
        """
        Zero counts in packed order ``[abc, ab, bc, b]``
        """
        p = self.pattern
        return [p.ls_count, p.r, p.s, p.t]

    @property
    def lengths(self) -> typing.List[int]:
        d = self.dims
        return [d.total, d.L * d.M, d.M * d.N, d.M]

    def check_options(self) -> CheckOptions:
        return CheckOptions(
            majorization_tol=self.tolerance,
            rank_threshold=self.rank_threshold,
            bracket=self.bracket,
        )

    def support_floor(self, options: MinimizerOptions) -> float:
        """
        Lower bound for entries outside the prescribed zeros; at least twice
        the rank threshold so those entries never count as zeros
        """
        return max(options.support_floor, 2 * self.rank_threshold)

    def uniform_tuple(self) -> SpectraTuple:
        """
        Every vector uniform on its support
        """
        vectors = []
        for zeros, length in zip(self.zeros, self.lengths):
            v = np.zeros(length)
            v[zeros:] = 1.0 / (length - zeros)
            vectors.append(v)
        return SpectraTuple.from_values(self.dims, *vectors)

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "dims": self.dims.as_list(),
            "pattern": self.pattern.to_json(),
            "tolerance": self.tolerance,
            "bracket": self.bracket,
            "rank_threshold": self.rank_threshold,
        }


def objective_f(t: SpectraTuple) -> float:
    """
    ``S(λ_AB) + S(λ_BC) - S(λ_B) - S(λ_ABC)``; the strong subadditivity gap
    when the tuple comes from a real state
    """
    return (
        vector_entropy(t.lambda_ab)
        + vector_entropy(t.lambda_bc)
        - vector_entropy(t.lambda_b)
        - vector_entropy(t.lambda_abc)
    )


def tuple_uniformity_deviation(
    t: SpectraTuple, threshold: float = CheckOptions.rank_threshold
) -> float:
    """
    Largest relative spread among the nonzero entries of any of the vectors
    """
    return max(uniformity_deviation(v, threshold) for v in t.vectors())


#
# Feasible polytope in free coordinates
#


class _Polytope:
    """
    Constraints ``G x >= h`` and ``E x = e`` on the packed free coordinates
    of a support pattern
    """

    def __init__(self, spec: FeasibleRegionSpec, support_floor: float) -> None:
        d = spec.dims
        self.dims = d
        self.zeros = spec.zeros
        self.lengths = spec.lengths
        self.rank_threshold = spec.rank_threshold
        sizes = [n - z for n, z in zip(self.lengths, self.zeros)]
        self.offsets = [0]
        for size in sizes:
            self.offsets.append(self.offsets[-1] + size)
        n = self.offsets[-1]
        self.n = n

        # prefix[k][j] . x == sum of the first j entries of vector k
        self.prefix = []
        for k in range(4):
            embed = np.zeros((self.lengths[k], n))
            for i in range(sizes[k]):
                embed[self.zeros[k] + i, self.offsets[k] + i] = 1.0
            self.prefix.append(
                np.vstack([np.zeros((1, n)), np.cumsum(embed, axis=0)])
            )

        rows: typing.List[np.ndarray] = []
        rhs: typing.List[float] = []
        groups: typing.List[str] = []

        def add(row: np.ndarray, h: float, group: str) -> None:
            if np.any(row != 0):
                rows.append(row)
                rhs.append(h)
                groups.append(group)

        for k in range(4):
            off = self.offsets[k]
            for i in range(sizes[k] - 1):
                row = np.zeros(n)
                row[off + i + 1] = 1.0
                row[off + i] = -1.0
                add(row, 0.0, "ordering")
            row = np.zeros(n)
            row[off] = 1.0
            add(row, support_floor, "support")

        L, M, N = d.L, d.M, d.N
        for c in range(1, L * M):
            add(self.prefix[_AB][c] - self.prefix[_ABC][N * c], 0.0, "condition1")
        for c in range(1, M * N):
            add(self.prefix[_BC][c] - self.prefix[_ABC][L * c], 0.0, "condition2")
        for c in range(1, M):
            add(self.prefix[_B][c] - self.prefix[_AB][L * c], 0.0, "condition3")
            add(self.prefix[_B][c] - self.prefix[_BC][N * c], 0.0, "condition3")

        self.G = np.array(rows).reshape(len(rows), n)
        self.h = np.array(rhs)
        self.groups = np.array(groups)

        self.E = np.zeros((4, n))
        for k in range(4):
            self.E[k, self.offsets[k] : self.offsets[k + 1]] = 1.0
        self.e = np.ones(4)

        # stacked form A x >= b for the least-distance problem
        self.A = np.vstack([self.G, self.E, -self.E])

    def split(self, x: np.ndarray) -> typing.List[np.ndarray]:
        return [x[self.offsets[k] : self.offsets[k + 1]] for k in range(4)]

    def pack(self, t: SpectraTuple) -> typing.Tuple[np.ndarray, float]:
        """
        Free coordinates of ``t`` and the largest entry dropped at a
        prescribed zero position
        """
        vectors = t.vectors()
        x = np.concatenate([v[z:] for v, z in zip(vectors, self.zeros)])
        dropped = max(
            (float(v[:z].max()) for v, z in zip(vectors, self.zeros) if z), default=0.0
        )
        return x, dropped

    def unpack(self, x: np.ndarray) -> SpectraTuple:
        vectors = []
        for k, part in enumerate(self.split(x)):
            v = np.zeros(self.lengths[k])
            v[self.zeros[k] :] = part
            vectors.append(Spectrum.normalized(v, _LABELS[k]))
        return SpectraTuple(*vectors, self.dims)

    def violations(self, x: np.ndarray) -> typing.Dict[str, float]:
        slack = self.h - self.G @ x
        out = {"normalization": float(np.max(np.abs(self.E @ x - self.e)))}
        for group in CONSTRAINT_GROUPS[1:]:
            mask = self.groups == group
            out[group] = float(max(0.0, slack[mask].max())) if mask.any() else 0.0
        return out

    def residual(self, x: np.ndarray) -> float:
        return max(self.violations(x).values())

    def project(self, x: np.ndarray, rounds: int, tol: float) -> np.ndarray:
        """
        Euclidean projection onto the polytope, solved as a least-distance
        problem through NNLS and refined until the residual is below ``tol``
        """
        for _ in range(rounds):
            if self.residual(x) <= tol:
                break
            c = np.concatenate([self.h, self.e, -self.e]) - self.A @ x
            lhs = np.vstack([self.A.T, c[np.newaxis, :]])
            target = np.zeros(self.n + 1)
            target[-1] = 1.0
            u, _ = scipy.optimize.nnls(lhs, target, maxiter=50 * lhs.shape[1])
            r = lhs @ u - target
            if abs(r[-1]) < 1e-300:
                raise ZeroPatternError("least-distance problem has no feasible point")
            x = x - r[: self.n] / r[-1]
        return x

    def objective(self, x: np.ndarray) -> float:
        abc, ab, bc, b = self.split(x)
        return (
            vector_entropy(ab)
            + vector_entropy(bc)
            - vector_entropy(b)
            - vector_entropy(abc)
        )

    def gradient(self, x: np.ndarray) -> np.ndarray:
        logs = np.log(np.maximum(x, np.finfo(float).tiny)) + 1.0
        sign = np.ones(self.n)
        sign[self.offsets[_AB] : self.offsets[_B]] = -1.0
        return sign * logs


#
# Sampling
#


def _sorted_simplex(rng: np.random.Generator, zeros: int, length: int) -> np.ndarray:
    e = rng.exponential(size=length - zeros)
    v = np.zeros(length)
    v[zeros:] = np.sort(e) / e.sum()
    return v


def _support_uniform(zeros: int, length: int) -> np.ndarray:
    v = np.zeros(length)
    v[zeros:] = 1.0 / (length - zeros)
    return v


def _prefix_dominates(x: np.ndarray, y: np.ndarray) -> bool:
    return bool(np.all(np.cumsum(x) - np.cumsum(y) >= -1e-12))


def _mix_toward(
    v: np.ndarray, anchor: np.ndarray, ok: typing.Callable[[np.ndarray], bool]
) -> np.ndarray:
    # smallest weight on a 1/16 grid that satisfies the constraint; the anchor
    # itself always does
    for j in range(17):
        w = j / 16
        candidate = (1 - w) * v + w * anchor
        if ok(candidate):
            return candidate
    return anchor


def _normalize(v: np.ndarray) -> np.ndarray:
    # same cleanup as Spectrum.normalized
    v = np.maximum.accumulate(np.clip(v, 0.0, None))
    return v / v.sum()


def _draw(
    rng: np.random.Generator, spec: FeasibleRegionSpec, opts: MinimizerOptions
) -> typing.Optional[typing.List[np.ndarray]]:
    """
    One candidate ``[abc, ab, bc, b]`` as raw arrays, or ``None`` if it
    misses the feasible region of ``spec``
    """
    d = spec.dims
    L, N = d.L, d.N
    z_abc, z_ab, z_bc, z_b = spec.zeros
    n_abc, n_ab, n_bc, n_b = spec.lengths

    abc = _sorted_simplex(rng, z_abc, n_abc)

    agg = block_sums(abc, N)
    anchor = (agg + _support_uniform(z_ab, n_ab)) / 2
    ab = _mix_toward(
        _sorted_simplex(rng, z_ab, n_ab), anchor, lambda v: _prefix_dominates(v, agg)
    )

    agg_l = block_sums(abc, L)
    anchor = (agg_l + _support_uniform(z_bc, n_bc)) / 2
    bc = _mix_toward(
        _sorted_simplex(rng, z_bc, n_bc),
        anchor,
        lambda v: _prefix_dominates(v, agg_l),
    )

    from_ab = block_sums(ab, L)
    from_bc = block_sums(bc, N)
    envelope = np.diff(
        np.concatenate([[0.0], np.maximum(np.cumsum(from_ab), np.cumsum(from_bc))])
    )
    anchor = (np.maximum(envelope, 0.0) + _support_uniform(z_b, n_b)) / 2
    b = _mix_toward(
        _sorted_simplex(rng, z_b, n_b),
        anchor,
        lambda v: _prefix_dominates(v, from_ab) and _prefix_dominates(v, from_bc),
    )

    vectors = [_normalize(v) for v in (abc, ab, bc, b)]
    floor = spec.support_floor(opts)
    if min(v[z:].min() for v, z in zip(vectors, spec.zeros)) <= floor:
        return None
    if not _feasible(vectors, spec):
        return None
    return vectors


def _feasible(vectors: typing.Sequence[np.ndarray], spec: FeasibleRegionSpec) -> bool:
    """
    Conditions 1-4 on raw ascending arrays. Condition 4 reduces to the zero
    counts matching the pattern, which :func:`validate_pattern` already
    accepted.
    """
    d = spec.dims
    abc, ab, bc, b = vectors
    tol = spec.tolerance

    def majorized(x: np.ndarray, y: np.ndarray) -> bool:
        return bool(np.all(np.cumsum(x) - np.cumsum(y) >= -tol))

    counts = [int(np.count_nonzero(v <= spec.rank_threshold)) for v in vectors]
    return (
        counts == spec.zeros
        and majorized(ab, block_sums(abc, d.N))
        and majorized(bc, block_sums(abc, d.L))
        and majorized(b, block_sums(bc, d.N))
        and majorized(b, block_sums(ab, d.L))
    )


def _to_tuple(
    vectors: typing.Sequence[np.ndarray], dims: TripartiteDims
) -> SpectraTuple:
    return SpectraTuple(
        *(Spectrum(v, label) for v, label in zip(vectors, _LABELS)), dims
    )


def _raw_objective(vectors: typing.Sequence[np.ndarray]) -> float:
    abc, ab, bc, b = vectors
    return (
        vector_entropy(ab)
        + vector_entropy(bc)
        - vector_entropy(b)
        - vector_entropy(abc)
    )


def _sample_vectors(
    rng: np.random.Generator, spec: FeasibleRegionSpec, opts: MinimizerOptions
) -> typing.List[np.ndarray]:
    for draw in range(1, opts.sampler_budget + 1):
        vectors = _draw(rng, spec, opts)
        if vectors is not None:
            if draw > 1:
                logger.debug("sampler needed %d draws", draw)
            return vectors

    logger.warning(
        "sampler gave up on pattern (%s) after %d draws",
        spec.pattern,
        opts.sampler_budget,
    )
    raise SamplerError(
        f"no feasible tuple after {opts.sampler_budget} draws for {spec.to_json()}",
        spec,
    )


def sample_feasible(
    spec: FeasibleRegionSpec,
    seed: int,
    *,
    options: typing.Optional[MinimizerOptions] = None,
) -> SpectraTuple:
    """
    A random tuple with exactly the zero pattern of ``spec`` that passes
    :func:`.check_theorem_conditions`. Deterministic per seed.

    Vectors are drawn as sorted, normalized exponential samples. A vector
    that violates its majorization is mixed toward an anchor that satisfies
    it (half the block sums it must be majorized by, half uniform on its
    support), using the smallest mixing weight that works.
    """
    opts = options or _DEFAULT_OPTIONS
    rng = np.random.default_rng(seed)
    return _to_tuple(_sample_vectors(rng, spec, opts), spec.dims)


@dataclass
class OracleResult:
    #: smallest objective seen
    minimum: float

    argmin: SpectraTuple

    #: position of the argmin; included tuples come first
    argmin_index: int

    #: number of tuples evaluated
    evaluated: int


def oracle_scan(
    spec: FeasibleRegionSpec,
    samples: int,
    seed: int,
    *,
    include: typing.Sequence[SpectraTuple] = (),
    options: typing.Optional[MinimizerOptions] = None,
) -> OracleResult:
    """
    Evaluates F on ``samples`` feasible tuples from :func:`sample_feasible`,
    one derived seed each (after any ``include`` tuples), and returns the
    smallest value seen.

    Samples stay raw arrays; only the argmin becomes a :class:`.SpectraTuple`.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    opts = options or _DEFAULT_OPTIONS

    best_f = np.inf
    best: typing.Union[SpectraTuple, typing.List[np.ndarray], None] = None
    best_index = -1
    for index, t in enumerate(include):
        f = objective_f(t)
        if f < best_f:
            best_f, best, best_index = f, t, index

    offset = len(include)
    for i, s in enumerate(derive_seeds(seed, samples)):
        vectors = _sample_vectors(np.random.default_rng(s), spec, opts)
        f = _raw_objective(vectors)
        if f < best_f:
            best_f, best, best_index = f, vectors, offset + i

    if not isinstance(best, SpectraTuple):
        assert best is not None
        best = _to_tuple(best, spec.dims)
    evaluated = offset + samples
    logger.info(
        "oracle on pattern (%s): min F = %.6g over %d tuples",
        spec.pattern,
        best_f,
        evaluated,
    )
    return OracleResult(float(best_f), best, best_index, evaluated)


#
# Descent
#


@dataclass
class LocalRun:
    """
    Result of a single projected-descent run
    """

    minimizer: SpectraTuple
    objective: float
    start_objective: float
    iterations: int

    #: stopped by the improvement test (not the iteration cap) and feasible
    converged: bool

    feasibility_residual: float
    residuals: typing.Dict[str, float] = field(default_factory=dict)


def _descend(
    poly: _Polytope, x: np.ndarray, opts: MinimizerOptions
) -> typing.Tuple[np.ndarray, int, bool]:
    def project(y: np.ndarray) -> np.ndarray:
        return poly.project(y, opts.projection_rounds, opts.feasibility_tol)

    x = project(x)
    f = poly.objective(x)
    step = opts.initial_step
    for iteration in range(1, opts.max_iterations + 1):
        g = poly.gradient(x)
        while True:
            y = project(x - step * g)
            fy = poly.objective(y)
            if fy <= f + opts.armijo * float(g @ (y - x)):
                break
            step /= 2
            if step < opts.min_step:
                return x, iteration, True

        improvement = f - fy
        x, f = y, fy
        if iteration % 100 == 0:
            logger.debug("iteration %d: F = %.12g, step %.3g", iteration, f, step)
        if improvement < opts.improvement_tol:
            return x, iteration, True
        step = min(2 * step, opts.initial_step)

    return x, opts.max_iterations, False


def _local_minimize(
    poly: _Polytope, start: SpectraTuple, opts: MinimizerOptions
) -> LocalRun:
    start_objective = objective_f(start)
    x0, dropped = poly.pack(start)
    start_residual = poly.residual(x0)

    x, iterations, stopped = _descend(poly, x0, opts)
    minimizer = poly.unpack(x)
    objective = objective_f(minimizer)

    start_feasible = (
        dropped <= poly.rank_threshold
        and start_residual <= opts.converged_residual
    )
    if start_feasible and start_objective < objective:
        minimizer, objective = start, start_objective

    residuals = poly.violations(poly.pack(minimizer)[0])
    residual = max(residuals.values())
    return LocalRun(
        minimizer=minimizer,
        objective=objective,
        start_objective=start_objective,
        iterations=iterations,
        converged=stopped and residual <= opts.converged_residual,
        feasibility_residual=residual,
        residuals=residuals,
    )


def local_minimize(
    spec: FeasibleRegionSpec,
    start: SpectraTuple,
    *,
    options: typing.Optional[MinimizerOptions] = None,
) -> LocalRun:
    """
    Projected gradient descent on F from ``start``.

    Every iterate is projected onto the feasible polytope of ``spec``; the
    step halves until the Armijo condition holds. The objective of the
    result never exceeds that of a feasible start.
    """
    opts = options or _DEFAULT_OPTIONS
    if start.dims != spec.dims:
        raise DimensionError(
            f"start has dims {start.dims.as_list()}, spec has {spec.dims.as_list()}"
        )
    return _local_minimize(_Polytope(spec, spec.support_floor(opts)), start, opts)


@dataclass
class RestartRecord:
    #: sampler seed, ``None`` for an explicit start
    seed: typing.Optional[int]

    start_objective: float
    objective: float
    iterations: int
    converged: bool
    residual: float


@dataclass
class MinimizationResult:
    spec: FeasibleRegionSpec

    #: best converged local minimum, ``None`` if no restart converged
    minimizer: typing.Optional[SpectraTuple]

    #: ``objective_f(minimizer)``
    objective: typing.Optional[float]

    #: largest constraint violation of the minimizer
    feasibility_residual: typing.Optional[float]

    #: violation per constraint group
    residuals: typing.Dict[str, float]

    restarts: int
    converged_restarts: int

    #: largest relative spread among nonzero entries of any minimizer vector
    uniformity_deviation: typing.Optional[float]

    #: ``uniformity_deviation <= MinimizerOptions.uniformity_tol``
    uniform: typing.Optional[bool] = None

    runs: typing.List[RestartRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.minimizer is not None

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "spec": self.spec.to_json(),
            "converged": self.converged,
            "objective": self.objective,
            "minimizer": self.minimizer.to_json() if self.minimizer else None,
            "feasibility_residual": self.feasibility_residual,
            "residuals": self.residuals,
            "restarts": self.restarts,
            "converged_restarts": self.converged_restarts,
            "uniformity_deviation": self.uniformity_deviation,
            "uniform": self.uniform,
            "seeds": [r.seed for r in self.runs],
            "runs": [
                {
                    "seed": r.seed,
                    "start_objective": r.start_objective,
                    "objective": r.objective,
                    "iterations": r.iterations,
                    "converged": r.converged,
                    "residual": r.residual,
                }
                for r in self.runs
            ],
        }


def minimize_f(
    spec: FeasibleRegionSpec,
    restarts: int = 32,
    seed: int = 0,
    *,
    starts: typing.Sequence[SpectraTuple] = (),
    options: typing.Optional[MinimizerOptions] = None,
) -> MinimizationResult:
    """
    Multi-start local minimization of F over the feasible region of ``spec``.

    Each restart starts from :func:`sample_feasible` with its own seed
    (derived from ``seed``); every tuple in ``starts`` adds one more run.
    F is not convex, so the result is the best converged local minimum,
    never a certified global one.
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    opts = options or _DEFAULT_OPTIONS
    poly = _Polytope(spec, spec.support_floor(opts))

    jobs: typing.List[typing.Tuple[typing.Optional[int], SpectraTuple]] = [
        (s, sample_feasible(spec, s, options=opts))
        for s in derive_seeds(seed, restarts)
    ]
    for start in starts:
        if start.dims != spec.dims:
            raise DimensionError(
                f"start has dims {start.dims.as_list()}, spec has {spec.dims.as_list()}"
            )
        jobs.append((None, start))

    runs: typing.List[RestartRecord] = []
    best: typing.Optional[LocalRun] = None
    for index, (s, start) in enumerate(jobs):
        run = _local_minimize(poly, start, opts)
        runs.append(
            RestartRecord(
                s,
                run.start_objective,
                run.objective,
                run.iterations,
                run.converged,
                run.feasibility_residual,
            )
        )
        if not run.converged:
            logger.warning(
                "restart %d on pattern (%s) did not converge "
                "(F = %.6g after %d iterations)",
                index,
                spec.pattern,
                run.objective,
                run.iterations,
            )
        elif best is None or run.objective < best.objective:
            best = run

    converged = sum(1 for r in runs if r.converged)
    logger.info(
        "pattern (%s): %d of %d restarts converged", spec.pattern, converged, len(runs)
    )

    if best is None:
        return MinimizationResult(
            spec=spec,
            minimizer=None,
            objective=None,
            feasibility_residual=None,
            residuals={},
            restarts=len(runs),
            converged_restarts=0,
            uniformity_deviation=None,
            runs=runs,
        )

    if best.objective < -opts.converged_residual:
        logger.warning(
            "pattern (%s): negative minimum F = %.6g", spec.pattern, best.objective
        )

    deviation = tuple_uniformity_deviation(best.minimizer, spec.rank_threshold)
    return MinimizationResult(
        spec=spec,
        minimizer=best.minimizer,
        objective=best.objective,
        feasibility_residual=best.feasibility_residual,
        residuals=best.residuals,
        restarts=len(runs),
        converged_restarts=converged,
        uniformity_deviation=deviation,
        uniform=deviation <= opts.uniformity_tol,
        runs=runs,
    )


#
# First-order perturbation identity
#

Section = typing.Tuple[int, int]


@dataclass(frozen=True)
class Transfer:
    """
    Moves mass ``delta`` from section ``a`` to section ``b`` of each of
    ``λ_ABC``, ``λ_AB`` and ``λ_BC``. Sections are half-open index ranges,
    ``a`` before ``b``; the mass is spread evenly over each section.
    """

    abc_a: Section
    abc_b: Section
    ab_a: Section
    ab_b: Section
    bc_a: Section
    bc_b: Section
    delta: float

    def sections(self) -> typing.List[typing.Tuple[Section, Section]]:
        return [
            (self.abc_a, self.abc_b),
            (self.ab_a, self.ab_b),
            (self.bc_a, self.bc_b),
        ]

    def to_json(self) -> typing.Dict[str, typing.Any]:
        return {
            "abc": [list(self.abc_a), list(self.abc_b)],
            "ab": [list(self.ab_a), list(self.ab_b)],
            "bc": [list(self.bc_a), list(self.bc_b)],
            "delta": self.delta,
        }


def _check_sections(name: str, a: Section, b: Section, length: int) -> None:
    (a0, a1), (b0, b1) = a, b
    if not (0 <= a0 < a1 <= b0 < b1 <= length):
        raise PerturbationError(
            f"{name} sections {list(a)} and {list(b)} must be nonempty, "
            f"ordered and inside [0, {length})"
        )


def _section_logs(
    t: SpectraTuple, transfer: Transfer
) -> typing.List[typing.Tuple[float, float]]:
    out = []
    vectors = (t.lambda_abc.values, t.lambda_ab.values, t.lambda_bc.values)
    for name, v, (a, b) in zip(("abc", "ab", "bc"), vectors, transfer.sections()):
        _check_sections(name, a, b, len(v))
        sa, sb = v[a[0] : a[1]], v[b[0] : b[1]]
        if sa.min() <= 0 or sb.min() <= 0:
            raise PerturbationError(f"{name} sections must be strictly positive")
        # log of the geometric mean
        out.append((float(np.mean(np.log(sa))), float(np.mean(np.log(sb)))))
    return out


def perturbation_delta(t: SpectraTuple, transfer: Transfer) -> float:
    """
    First-order change of F under ``transfer``:

        Δ ln(λ_b λ_a^AB λ_a^BC / (λ_a λ_b^AB λ_b^BC))

    where each section value is the geometric mean of its entries
    """
    (abc_a, abc_b), (ab_a, ab_b), (bc_a, bc_b) = _section_logs(t, transfer)
    _perturbed_vectors(t, transfer)
    return transfer.delta * ((abc_b - abc_a) + (ab_a - ab_b) + (bc_a - bc_b))


def _perturbed_vectors(
    t: SpectraTuple, transfer: Transfer
) -> typing.List[np.ndarray]:
    """
    Perturbed ``λ_ABC``, ``λ_AB`` and ``λ_BC``; rejects a delta that makes an
    entry nonpositive or breaks the ascending order
    """
    if transfer.delta < 0:
        raise PerturbationError(f"delta must be >= 0, got {transfer.delta}")
    perturbed = []
    vectors = (t.lambda_abc.values, t.lambda_ab.values, t.lambda_bc.values)
    for name, v, (a, b) in zip(("abc", "ab", "bc"), vectors, transfer.sections()):
        _check_sections(name, a, b, len(v))
        w = v.copy()
        w[a[0] : a[1]] -= transfer.delta / (a[1] - a[0])
        w[b[0] : b[1]] += transfer.delta / (b[1] - b[0])
        if transfer.delta > 0:
            if w[a[0] : a[1]].min() <= 0:
                low = w[a[0] : a[1]].min()
                raise PerturbationError(
                    f"delta {transfer.delta:g} drives a {name} entry to {low:.3e}"
                )
            if np.any(np.diff(w) < 0):
                raise PerturbationError(
                    f"delta {transfer.delta:g} breaks the {name} ordering"
                )
        perturbed.append(w)
    return perturbed


def apply_transfer(t: SpectraTuple, transfer: Transfer) -> SpectraTuple:
    """
    The perturbed tuple; ``λ_B`` is left alone
    """
    abc, ab, bc = _perturbed_vectors(t, transfer)
    return SpectraTuple(
        Spectrum(abc, "ABC"),
        Spectrum(ab, "AB"),
        Spectrum(bc, "BC"),
        t.lambda_b,
        t.dims,
    )


def direct_delta(t: SpectraTuple, transfer: Transfer) -> float:
    """
    Exact change of F under ``transfer``
    """
    return objective_f(apply_transfer(t, transfer)) - objective_f(t)


def _curvature(t: SpectraTuple, transfer: Transfer) -> typing.Tuple[float, float]:
    # second and third order coefficients of the direct change, per unit delta
    c2 = c3 = 0.0
    vectors = (t.lambda_abc.values, t.lambda_ab.values, t.lambda_bc.values)
    for sign, v, (a, b) in zip((1.0, -1.0, -1.0), vectors, transfer.sections()):
        for (lo, hi), direction in ((a, -1.0), (b, 1.0)):
            d = direction / (hi - lo)
            x = v[lo:hi]
            c2 += sign * float(np.sum(d**2 / x))
            c3 += sign * float(np.sum(-(d**3) / x**2))
    return c2, c3


def random_transfer(
    rng: np.random.Generator,
    dims: TripartiteDims,
    delta: float = 1e-4,
    *,
    max_tries: int = 1000,
) -> typing.Tuple[SpectraTuple, Transfer]:
    """
    A random tuple (positive, ascending) and a transfer from a prefix
    section to a suffix section of each vector, so any ``0 <= Δ <= delta``
    keeps positivity and order. Configurations whose curvature makes the
    quadratic error term small or dominated by the cubic term at ``delta``
    are redrawn.
    """
    lengths = (dims.total, dims.L * dims.M, dims.M * dims.N)
    if min(lengths) < 2:
        raise PerturbationError(
            f"dims {dims.as_list()} leave a vector with a single entry"
        )

    def vector(n: int) -> np.ndarray:
        e = rng.exponential(size=n)
        return 0.5 / n + 0.5 * np.sort(e) / e.sum()

    for _ in range(max_tries):
        abc, ab, bc = (vector(n) for n in lengths)
        t = SpectraTuple(
            Spectrum.normalized(abc, "ABC"),
            Spectrum.normalized(ab, "AB"),
            Spectrum.normalized(bc, "BC"),
            Spectrum.normalized(vector(dims.M), "B"),
            dims,
        )

        sections = []
        for n in lengths:
            i = int(rng.integers(1, n))
            j = int(rng.integers(i, n))
            sections.extend([(0, i), (j, n)])
        transfer = Transfer(*sections, delta=delta)

        c2, c3 = _curvature(t, transfer)
        if abs(c2) >= 1.0 and abs(c3) * delta / (3 * abs(c2)) <= 0.02:
            try:
                apply_transfer(t, transfer)
            except PerturbationError:
                continue
            return t, transfer

    raise PerturbationError(f"no admissible configuration in {max_tries} tries")


@dataclass
class LadderRow:
    delta: float
    predicted: float
    direct: float
    error: float

    #: error of the previous (twice as large) step over this one
    ratio: typing.Optional[float]


def perturbation_ladder(
    t: SpectraTuple, transfer: Transfer, deltas: typing.Sequence[float]
) -> typing.List[LadderRow]:
    """
    Predicted and exact changes for each ``Δ`` in ``deltas``
    """
    rows: typing.List[LadderRow] = []
    for delta in deltas:
        step = replace(transfer, delta=delta)
        predicted = perturbation_delta(t, step)
        direct = direct_delta(t, step)
        error = abs(predicted - direct)
        ratio = None
        if rows and error > 0:
            ratio = rows[-1].error / error
        rows.append(LadderRow(delta, predicted, direct, error, ratio))
    return rows
