"""
Spectra, entropy, block-sum aggregation, majorization and numerical rank.

Vectors are always kept in **ascending** order, and majorization follows the
same convention: ``y ≻ x`` ("x is majorized by y") when every ascending
partial sum of ``x`` is at least the matching partial sum of ``y`` and the
totals agree. The more mixed vector is the majorized one.
"""

import typing
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidStateError

#: tolerance on the total of a :class:`Spectrum`
SUM_TOL = 1e-12

#: default slack on majorization partial sums
MAJORIZATION_TOL = 1e-9

#: default zero threshold for :func:`numerical_rank`
RANK_THRESHOLD = 1e-10

VectorLike = typing.Union[
    "Spectrum", "AggregatedSpectrum", np.ndarray, typing.Sequence[float]
]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Ascending, nonnegative vector summing to 1: the eigenvalues of a state
    or an abstract normalized vector
    """

    values: np.ndarray

    #: which system the spectrum describes (``ABC``, ``AB``, ``BC``, ``B``,
    #: ...) or ``abstract``
    label: str = "abstract"

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise DimensionError(f"{self.label} spectrum is empty")
        if not np.all(np.isfinite(v)):
            raise InvalidStateError(f"{self.label} spectrum has non-finite entries")
        if v[0] < 0 or v.min() < 0:
            raise InvalidStateError(
                f"{self.label} spectrum has negative entry {v.min():.3e}"
            )
        if np.any(np.diff(v) < 0):
            raise InvalidStateError(f"{self.label} spectrum is not ascending")
        total = float(v.sum())
        if abs(total - 1) > SUM_TOL:
            raise InvalidStateError(f"{self.label} spectrum sums to {total:.15g}")

        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.size)

    @classmethod
    def normalized(
        cls, values: typing.Sequence[float], label: str = "abstract"
    ) -> "Spectrum":
        """
        Clamps negative noise to zero, removes ordering noise and rescales
        to unit sum. Meant for numerically produced vectors that are already
        ascending and normalized up to roundoff.
        """
        v = np.clip(np.asarray(values, dtype=float).ravel(), 0.0, None)
        v = np.maximum.accumulate(v)
        total = float(v.sum())
        if total <= 0:
            raise InvalidStateError(f"{label} vector has no positive entry")
        return cls(v / total, label)

    @classmethod
    def uniform(cls, n: int, label: str = "abstract") -> "Spectrum":
        if n < 1:
            raise DimensionError(f"uniform spectrum needs n >= 1, got {n}")
        return cls(np.full(n, 1.0 / n), label)


@dataclass(frozen=True, eq=False)
class AggregatedSpectrum:
    """
    Consecutive block sums of an ascending spectrum
    """

    values: np.ndarray

    #: label of the spectrum the blocks were summed from
    source_label: str

    #: number of consecutive entries per block
    block: int


def _as_array(x: VectorLike) -> np.ndarray:
    if isinstance(x, (Spectrum, AggregatedSpectrum)):
        return x.values
    return np.asarray(x, dtype=float).ravel()


def vector_entropy(values: VectorLike) -> float:
    """
    ``Σ −v ln v`` in nats with ``0·ln 0 = 0``
    """
    v = _as_array(values)
    positive = v[v > 0]
    return float(-np.sum(positive * np.log(positive)))


def entropy(s: Spectrum) -> float:
    """
    Shannon entropy of a spectrum in nats, i.e. the von Neumann entropy of
    the state it came from. Always in ``[0, ln n]``.
    """
    return vector_entropy(s.values)


def block_sums(values: VectorLike, block: int) -> np.ndarray:
    """
    Sums of consecutive runs of ``block`` entries
    """
    v = _as_array(values)
    if isinstance(block, bool) or not isinstance(block, (int, np.integer)) or block < 1:
        raise DimensionError(f"block size must be a positive integer, got {block!r}")
    if v.size % block:
        raise DimensionError(f"block size {block} does not divide length {v.size}")
    return v.reshape(-1, block).sum(axis=1)


def aggregate(s: Spectrum, block: int) -> AggregatedSpectrum:
    """
    Block-sum vector of ``s``: entry ``j`` is the sum of the ``j``-th run of
    ``block`` consecutive (ascending) values.

    .. code-block:: python

        aggregate(Spectrum([0.1, 0.2, 0.3, 0.4]), 2).values  # [0.3, 0.7]
    """
    sums = block_sums(s.values, block)

    # block sums of an ascending vector never decrease
    assert not np.any(np.diff(sums) < 0), "block sums decreased"

    sums.flags.writeable = False
    return AggregatedSpectrum(sums, s.label, int(block))


@dataclass
class MajorizationResult:
    """
    Outcome of :func:`majorized_by`
    """

    holds: bool

    #: smallest ``Σ_{i≤k} x_i − Σ_{i≤k} y_i`` over every prefix
    margin: float

    #: ``Σ_{i≤k} x_i − Σ_{i≤k} y_i`` for ``k = 1 .. n``
    margins: typing.List[float] = field(default_factory=list)


def majorized_by(
    x: VectorLike,
    y: VectorLike,
    *,
    tol: float = MAJORIZATION_TOL,
    sort: bool = False,
) -> MajorizationResult:
    """
    Tests whether ``x`` is majorized by ``y`` (``y ≻ x``) in the ascending
    convention: every prefix sum of ``x`` is at least that of ``y`` minus
    ``tol``, and the totals agree within ``tol``.

    :param sort: set if the inputs are not already ascending
    """
    xv = _as_array(x)
    yv = _as_array(y)
    if xv.size != yv.size:
        raise DimensionError(
            f"majorization needs equal lengths, got {xv.size} and {yv.size}"
        )
    if sort:
        xv = np.sort(xv)
        yv = np.sort(yv)

    margins = np.cumsum(xv) - np.cumsum(yv)
    total_gap = abs(float(xv.sum()) - float(yv.sum()))
    margin = float(margins.min()) if margins.size else 0.0
    holds = bool(margin >= -tol and total_gap <= tol)
    return MajorizationResult(holds, margin, [float(m) for m in margins])


class Rank(typing.NamedTuple):
    rank: int
    zero_count: int


def numerical_rank(s: VectorLike, threshold: float = RANK_THRESHOLD) -> Rank:
    """
    Number of entries above ``threshold``, and the number of the rest
    """
    v = _as_array(s)
    rank = int(np.count_nonzero(v > threshold))
    return Rank(rank, int(v.size) - rank)


def uniformity_deviation(
    values: VectorLike, threshold: float = RANK_THRESHOLD
) -> float:
    """
    Relative spread ``(max − min) / mean`` of the entries above
    ``threshold``; 0 when all of them are equal
    """
    v = _as_array(values)
    nonzero = v[v > threshold]
    if nonzero.size == 0:
        return 0.0
    return float((nonzero.max() - nonzero.min()) / nonzero.mean())
