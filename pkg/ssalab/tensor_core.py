"""
Density matrices on a tripartite Hilbert space ``A ⊗ B ⊗ C`` with
dimensions ``(L, M, N)``, their partial traces and their spectra.

All reductions use a single basis convention: the composite index of the
basis vector ``|a⟩|b⟩|c⟩`` is ``(a*M + b)*N + c``, so ``A`` varies slowest
and ``C`` fastest. A reduced state keeps the same relative order of the
systems it still carries.

.. code-block:: python

    from ssalab.tensor_core import partial_trace, spectrum_of

    rho_b = partial_trace(rho, "B")
    spectrum_of(rho_b).values

"""

import json
import logging
import os
import typing
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, InvalidStateError
from .options import CheckOptions
from .spectra import Spectrum

logger = logging.getLogger(__name__)

#: every system, in basis order
SYSTEMS = "ABC"

_DEFAULT_OPTIONS = CheckOptions()


@dataclass(frozen=True)
class TripartiteDims:
    """
    Dimensions of the subsystems ``A``, ``B`` and ``C``
    """

    L: int
    M: int
    N: int

    def __post_init__(self) -> None:
        for name in ("L", "M", "N"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DimensionError(
                    f"dimension {name} must be an integer, got {value!r}"
                )
            if value < 1:
                raise DimensionError(f"dimension {name} must be >= 1, got {value}")
            object.__setattr__(self, name, int(value))

    @classmethod
    def from_sequence(cls, values: typing.Sequence[int]) -> "TripartiteDims":
        if len(values) != 3:
            raise DimensionError(
                f"expected three dimensions (L, M, N), got {list(values)}"
            )
        return cls(*values)

    @property
    def total(self) -> int:
        return self.L * self.M * self.N

    def of(self, systems: str) -> int:
        """
        Dimension of the composite system made of ``systems``
        """
        size = 1
        for s in normalize_systems(systems):
            size *= getattr(self, "LMN"[SYSTEMS.index(s)])
        return size

    def as_list(self) -> typing.List[int]:
        return [self.L, self.M, self.N]


def normalize_systems(systems: str) -> str:
    """
    Returns the systems in basis order ("CA" becomes "AC")
    """
    chosen = set(systems.upper())
    unknown = chosen - set(SYSTEMS)
    if unknown:
        raise DimensionError(f"unknown subsystem(s) {''.join(sorted(unknown))!r}")
    if not chosen:
        raise DimensionError("empty subsystem set")
    return "".join(s for s in SYSTEMS if s in chosen)


def _max_asymmetry(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    A trace-one positive-semidefinite Hermitian matrix on the systems listed
    in ``systems``. The stored matrix is a read-only copy.
    """

    #: complex matrix of shape ``(d, d)`` with ``d = dims.of(systems)``
    matrix: np.ndarray

    #: dimensions of the full tripartite system the state belongs to
    dims: TripartiteDims

    #: systems the matrix lives on, in basis order
    systems: str = SYSTEMS

    def __post_init__(self) -> None:
        systems = normalize_systems(self.systems)
        m = np.array(self.matrix, dtype=complex)
        d = self.dims.of(systems)
        if m.shape != (d, d):
            raise DimensionError(
                f"matrix shape {m.shape} does not match {systems} with dims "
                f"{self.dims.as_list()} (expected {d}x{d})"
            )

        validate_density_matrix(m)

        m = (m + m.conj().T) / 2
        m.flags.writeable = False
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def bipartite(cls, matrix: np.ndarray, L: int, M: int) -> "DensityMatrix":
        """
        A state on ``A ⊗ B`` only
        """
        return cls(matrix, TripartiteDims(L, M, 1), "AB")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def validate_density_matrix(
    m: np.ndarray, *, options: typing.Optional[CheckOptions] = None
) -> None:
    """
    Raises :class:`.InvalidStateError` unless ``m`` is Hermitian, has unit
    trace and no eigenvalue below the negative tolerance
    """
    opts = options or _DEFAULT_OPTIONS
    if not np.all(np.isfinite(m)):
        raise InvalidStateError("matrix has non-finite entries")
    trace = complex(np.trace(m))
    drift = abs(trace - 1)
    if drift > opts.trace_tol:
        raise InvalidStateError(f"trace {trace.real:.12g} drifts {drift:.3e} from 1")

    w = hermitian_eigenvalues(m, options=opts)
    if w.size and w[0] < -opts.negative_eigenvalue_tol:
        raise InvalidStateError(f"negative eigenvalue {w[0]:.3e}")


def hermitian_eigenvalues(
    m: np.ndarray, *, options: typing.Optional[CheckOptions] = None
) -> np.ndarray:
    """
    All eigenvalues of the Hermitian matrix ``m`` in ascending order.

    Each eigenpair is checked against ``‖m·v − λv‖ ≤ residual_tol·‖m‖``.
    Eigenvalues in ``[-negative_eigenvalue_tol, 0)`` are returned as 0.
    """
    opts = options or _DEFAULT_OPTIONS
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")

    asym = _max_asymmetry(m)
    if asym > opts.hermitian_tol:
        raise InvalidStateError(f"matrix is not Hermitian: max asymmetry {asym:.3e}")

    w, v = scipy.linalg.eigh((m + m.conj().T) / 2)
    if w.size:
        scale = float(np.max(np.abs(w)))
        residual = float(np.max(np.linalg.norm(m @ v - v * w, axis=0)))
        if residual > opts.residual_tol * scale:
            raise InvalidStateError(
                f"eigen decomposition residual {residual:.3e} exceeds "
                f"{opts.residual_tol:.1e}*‖m‖"
            )

    w = np.array(w, dtype=float)
    w[(w < 0) & (w >= -opts.negative_eigenvalue_tol)] = 0.0
    return w


def partial_trace(rho: DensityMatrix, keep: str) -> DensityMatrix:
    """
    Reduced state of ``rho`` on the systems in ``keep``; every other system
    is traced out. Keeping every system returns ``rho`` itself.
    """
    keep = normalize_systems(keep)
    missing = set(keep) - set(rho.systems)
    if missing:
        raise DimensionError(
            f"cannot keep {''.join(sorted(missing))}: state only carries {rho.systems}"
        )
    if keep == rho.systems:
        return rho

    local = [rho.dims.of(s) for s in rho.systems]
    tensor = rho.matrix.reshape(local + local)

    # lowercase letters index rows, uppercase letters index columns; traced
    # systems share the row letter
    rows = "abc"[: len(local)]
    cols = "".join(
        r.upper() if s in keep else r for r, s in zip(rows, rho.systems)
    )
    out_rows = "".join(r for r, s in zip(rows, rho.systems) if s in keep)
    out = np.einsum(f"{rows}{cols}->{out_rows}{out_rows.upper()}", tensor)

    d = rho.dims.of(keep)
    return DensityMatrix(out.reshape(d, d), rho.dims, keep)


def spectrum_of(
    rho: DensityMatrix, *, options: typing.Optional[CheckOptions] = None
) -> Spectrum:
    """
    Ascending, nonnegative spectrum of ``rho`` renormalized to sum to 1
    """
    opts = options or _DEFAULT_OPTIONS
    w = hermitian_eigenvalues(rho.matrix, options=opts)
    if w.size and w[0] < -opts.negative_eigenvalue_tol:
        raise InvalidStateError(f"invalid density matrix: eigenvalue {w[0]:.3e}")

    total = float(w.sum())
    if abs(total - 1) > opts.trace_tol:
        raise InvalidStateError(
            f"invalid density matrix: eigenvalues sum to {total:.12g}"
        )

    w = np.clip(w, 0.0, None) / total
    return Spectrum(w, rho.systems)


#
# File format
#


def density_matrix_to_json(rho: DensityMatrix) -> typing.Dict[str, typing.Any]:
    """
    Document with ``dims`` and row-major ``entries`` as ``[re, im]`` pairs
    """
    doc: typing.Dict[str, typing.Any] = {"dims": rho.dims.as_list()}
    if rho.systems != SYSTEMS:
        doc["systems"] = rho.systems
    doc["entries"] = [[float(z.real), float(z.imag)] for z in rho.matrix.ravel()]
    return doc


def density_matrix_from_json(doc: typing.Any) -> DensityMatrix:
    """
    Parses a document produced by :func:`density_matrix_to_json`. The result
    is validated with the same tolerances as :class:`DensityMatrix`.
    """
    if not isinstance(doc, dict):
        raise InvalidStateError("density matrix document must be a JSON object")
    for key in ("dims", "entries"):
        if key not in doc:
            raise InvalidStateError(f"density matrix document has no '{key}' field")

    dims_field = doc["dims"]
    if not isinstance(dims_field, list):
        raise InvalidStateError("'dims' must be a list [L, M, N]")
    dims = TripartiteDims.from_sequence(dims_field)
    systems_field = doc.get("systems", SYSTEMS)
    if not isinstance(systems_field, str):
        raise InvalidStateError("'systems' must be a string such as \"AB\"")
    systems = normalize_systems(systems_field)
    d = dims.of(systems)

    entries = doc["entries"]
    if not isinstance(entries, list) or len(entries) != d * d:
        count = len(entries) if isinstance(entries, list) else type(entries).__name__
        raise InvalidStateError(
            f"'entries' must hold {d * d} [re, im] pairs, got {count}"
        )

    try:
        values = np.array(entries, dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidStateError(f"'entries' is not a list of numbers: {e}") from e
    if values.shape != (d * d, 2):
        raise InvalidStateError("every entry must be an [re, im] pair")

    m = (values[:, 0] + 1j * values[:, 1]).reshape(d, d)
    return DensityMatrix(m, dims, systems)


def load_density_matrix(
    filename: typing.Union[str, os.PathLike], encoding: typing.Optional[str] = None
) -> DensityMatrix:
    filename = os.fsdecode(filename)
    if encoding is None:
        encoding = "utf-8-sig"
    with open(filename, "r", encoding=encoding) as fp:
        try:
            doc = json.load(fp)
        except json.JSONDecodeError as e:
            raise InvalidStateError(f"{filename}: malformed JSON: {e}") from e
        except UnicodeDecodeError as e:
            raise InvalidStateError(f"{filename}: not {encoding} text: {e}") from e

    logger.debug("loaded density matrix from %s", filename)
    return density_matrix_from_json(doc)


def dump_density_matrix(
    rho: DensityMatrix, filename: typing.Union[str, os.PathLike]
) -> None:
    with open(os.fsdecode(filename), "w", encoding="utf-8") as fp:
        json.dump(density_matrix_to_json(rho), fp, indent=2)
        fp.write("\n")
