"""
Seeded generation of random and named tripartite density matrices.

All randomness comes from :func:`numpy.random.default_rng` (PCG64) seeded
with the 64-bit seed of a :class:`GeneratorSpec`, so a spec fully
determines its matrix.
"""

import json
import logging
import os
import typing
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, GeneratorError
from .tensor_core import DensityMatrix, TripartiteDims

logger = logging.getLogger(__name__)

#: accepted values of :attr:`GeneratorSpec.kind`
KINDS = (
    "ginibre_full",
    "ginibre_rank",
    "pure_random",
    "ghz",
    "w",
    "product",
    "lemma2_construct",
    "maximally_mixed",
)

#: per-factor kinds of a ``product`` state
FACTOR_KINDS = ("ginibre", "pure", "maximally_mixed", "ground")

_SEED_LIMIT = 2**64


def _is_integer(value: typing.Any) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


@dataclass(frozen=True)
class GeneratorSpec:
    """
    What to generate. ``rank`` is used by ``ginibre_rank``, ``zeros`` by
    ``lemma2_construct`` and ``factors`` by ``product``.
    """

    dims: TripartiteDims
    kind: str = "ginibre_full"

    #: 64-bit seed
    seed: int = 0

    #: column count of the Ginibre factor, in ``[1, L*M*N]``
    rank: typing.Optional[int] = None

    #: number of zero eigenvalues of ``ρ_BC`` (``s``)
    zeros: typing.Optional[int] = None

    #: kinds of the ``A``, ``B`` and ``C`` factors
    factors: typing.Tuple[str, str, str] = ("ginibre", "ginibre", "ginibre")

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise GeneratorError(
                f"unknown kind {self.kind!r} (expected one of {', '.join(KINDS)})"
            )
        if not _is_integer(self.seed):
            raise GeneratorError(f"seed must be an integer, got {self.seed!r}")
        for name in ("rank", "zeros"):
            value = getattr(self, name)
            if value is not None and not _is_integer(value):
                raise GeneratorError(f"{name} must be an integer, got {value!r}")
        if not 0 <= self.seed < _SEED_LIMIT:
            raise GeneratorError(f"seed {self.seed} is not a 64-bit unsigned integer")

        d = self.dims
        if self.kind == "ginibre_rank":
            if self.rank is None:
                raise GeneratorError("ginibre_rank needs a rank")
            if not 1 <= self.rank <= d.total:
                raise GeneratorError(f"rank {self.rank} outside [1, {d.total}]")
        elif self.kind in ("ghz", "w"):
            if d.as_list() != [2, 2, 2]:
                raise GeneratorError(
                    f"{self.kind} needs dims [2, 2, 2], got {d.as_list()}"
                )
        elif self.kind == "lemma2_construct":
            if self.zeros is None:
                raise GeneratorError("lemma2_construct needs a zero count")
            if not 0 <= self.zeros < d.M * d.N:
                raise GeneratorError(
                    f"zero count {self.zeros} outside [0, {d.M * d.N - 1}]"
                )
        elif self.kind == "product":
            factors = tuple(self.factors)
            if len(factors) != 3:
                raise GeneratorError(f"product needs three factors, got {len(factors)}")
            for f in factors:
                if f not in FACTOR_KINDS:
                    raise GeneratorError(f"unknown factor kind {f!r}")
            object.__setattr__(self, "factors", factors)

    def with_seed(self, seed: int) -> "GeneratorSpec":
        return replace(self, seed=seed)

    def to_json(self) -> typing.Dict[str, typing.Any]:
        doc: typing.Dict[str, typing.Any] = {
            "dims": self.dims.as_list(),
            "kind": self.kind,
            "seed": int(self.seed),
        }
        if self.kind == "ginibre_rank":
            doc["rank"] = self.rank
        elif self.kind == "lemma2_construct":
            doc["zeros"] = self.zeros
        elif self.kind == "product":
            doc["factors"] = list(self.factors)
        return doc

    @classmethod
    def from_json(cls, doc: typing.Any) -> "GeneratorSpec":
        if not isinstance(doc, dict):
            raise GeneratorError("generator spec must be a JSON object")
        unknown = set(doc) - {"dims", "kind", "seed", "rank", "zeros", "factors"}
        if unknown:
            names = ", ".join(sorted(unknown))
            raise GeneratorError(f"unknown generator field(s): {names}")
        if "dims" not in doc or not isinstance(doc["dims"], list):
            raise GeneratorError("generator spec needs 'dims': [L, M, N]")

        try:
            dims = TripartiteDims.from_sequence(doc["dims"])
        except DimensionError as e:
            raise GeneratorError(str(e)) from e

        kwargs: typing.Dict[str, typing.Any] = {}
        for key in ("kind", "seed", "rank", "zeros"):
            if key in doc:
                kwargs[key] = doc[key]
        if "factors" in doc:
            if not isinstance(doc["factors"], list):
                raise GeneratorError("'factors' must be a list")
            kwargs["factors"] = tuple(doc["factors"])
        return cls(dims, **kwargs)


def load_generator_spec(text_or_filename: str) -> GeneratorSpec:
    """
    Accepts inline JSON or the name of a JSON file
    """
    text = text_or_filename
    if not text.lstrip().startswith("{"):
        filename = os.fsdecode(text_or_filename)
        with open(filename, "r", encoding="utf-8-sig") as fp:
            try:
                text = fp.read()
            except UnicodeDecodeError as e:
                raise GeneratorError(f"{filename}: not utf-8 text: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise GeneratorError(f"malformed generator spec: {e}") from e
    return GeneratorSpec.from_json(doc)


def derive_seeds(seed: int, count: int) -> typing.List[int]:
    """
    ``count`` independent 64-bit seeds derived from ``seed``; the same
    ``(seed, count)`` always gives the same list, and a longer list starts
    with the shorter one
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


#
# Generators
#


def _complex_gaussian(
    rng: np.random.Generator, shape: typing.Tuple[int, ...]
) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _ginibre(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    g = _complex_gaussian(rng, (n, k))
    m = g @ g.conj().T
    return m / np.trace(m).real


def _projector(psi: np.ndarray) -> np.ndarray:
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def _factor(rng: np.random.Generator, kind: str, d: int) -> np.ndarray:
    if kind == "ginibre":
        return _ginibre(rng, d, d)
    elif kind == "pure":
        return _projector(_complex_gaussian(rng, (d,)))
    elif kind == "maximally_mixed":
        return np.eye(d, dtype=complex) / d
    else:
        ground = np.zeros((d, d), dtype=complex)
        ground[0, 0] = 1.0
        return ground


def _diagonal(rng: np.random.Generator, d: int, zeros: int) -> np.ndarray:
    # entries bounded away from zero so ranks are exact
    p = rng.uniform(0.5, 1.5, d)
    p[:zeros] = 0.0
    return np.diag(p / p.sum()).astype(complex)


def generate(spec: GeneratorSpec) -> DensityMatrix:
    """
    Builds the density matrix described by ``spec``.

    ``lemma2_construct`` produces ``ρ_A ⊗ ρ_BC`` with both factors diagonal,
    ``ρ_A`` full rank and the first ``zeros`` diagonal entries of ``ρ_BC``
    exactly zero, so ``rank(ρ_ABC) = L*(M*N - zeros)``.
    """
    d = spec.dims
    n = d.total
    rng = np.random.default_rng(spec.seed)

    if spec.kind == "ginibre_full":
        m = _ginibre(rng, n, n)
    elif spec.kind == "ginibre_rank":
        assert spec.rank is not None
        m = _ginibre(rng, n, spec.rank)
    elif spec.kind == "pure_random":
        m = _projector(_complex_gaussian(rng, (n,)))
    elif spec.kind == "ghz":
        psi = np.zeros(n, dtype=complex)
        psi[0] = psi[7] = 1.0
        m = _projector(psi)
    elif spec.kind == "w":
        psi = np.zeros(n, dtype=complex)
        psi[[1, 2, 4]] = 1.0
        m = _projector(psi)
    elif spec.kind == "product":
        a, b, c = (
            _factor(rng, kind, size)
            for kind, size in zip(spec.factors, d.as_list())
        )
        m = np.kron(np.kron(a, b), c)
    elif spec.kind == "lemma2_construct":
        assert spec.zeros is not None
        m = np.kron(_diagonal(rng, d.L, 0), _diagonal(rng, d.M * d.N, spec.zeros))
    else:
        m = np.eye(n, dtype=complex) / n

    logger.debug("generated %s on %s with seed %d", spec.kind, d.as_list(), spec.seed)
    return DensityMatrix(m, d)
