# Density matrices, partial traces and spectra

import json
import re

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import unitary_group

from ssalab.errors import DimensionError, InvalidStateError
from ssalab.stategen import GeneratorSpec, generate
from ssalab.tensor_core import (
    DensityMatrix,
    TripartiteDims,
    density_matrix_from_json,
    density_matrix_to_json,
    dump_density_matrix,
    hermitian_eigenvalues,
    load_density_matrix,
    partial_trace,
    spectrum_of,
)

D222 = TripartiteDims(2, 2, 2)


def _ghz() -> DensityMatrix:
    return generate(GeneratorSpec(D222, "ghz"))


@pytest.mark.parametrize(
    "m, expected",
    [
        (np.eye(4) / 4, [0.25, 0.25, 0.25, 0.25]),
        (np.diag([0.7, 0.1, 0.2]), [0.1, 0.2, 0.7]),
        (np.array([[0.5, 0.5], [0.5, 0.5]]), [0.0, 1.0]),
    ],
)
def test_hermitian_eigenvalues(m: np.ndarray, expected: list) -> None:
    assert_allclose(hermitian_eigenvalues(m), expected, atol=1e-12)


def test_hermitian_eigenvalues_rejects_asymmetry() -> None:
    m = np.array([[0.5, 0.1], [0.3, 0.5]])
    with pytest.raises(
        InvalidStateError,
        match=re.escape("matrix is not Hermitian: max asymmetry 2.000e-01"),
    ):
        hermitian_eigenvalues(m)


def test_hermitian_eigenvalues_needs_square() -> None:
    with pytest.raises(DimensionError):
        hermitian_eigenvalues(np.zeros((2, 3)))


def test_density_matrix_validation() -> None:
    with pytest.raises(InvalidStateError, match="trace"):
        DensityMatrix(np.eye(8) / 4, D222)

    bad = np.diag([0.6, 0.6, -0.2, 0.0, 0.0, 0.0, 0.0, 0.0])
    with pytest.raises(InvalidStateError, match="negative eigenvalue"):
        DensityMatrix(bad, D222)

    with pytest.raises(DimensionError, match="expected 8x8"):
        DensityMatrix(np.eye(4) / 4, D222)


def test_density_matrix_is_read_only() -> None:
    rho = DensityMatrix(np.eye(8) / 8, D222)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1.0


def test_dims_validation() -> None:
    with pytest.raises(DimensionError):
        TripartiteDims(0, 2, 2)
    with pytest.raises(DimensionError):
        TripartiteDims.from_sequence([2, 2])
    assert D222.of("CA") == 4
    assert TripartiteDims(2, 3, 4).of("BC") == 12


def test_partial_trace_product_state() -> None:
    rng = np.random.default_rng(3)
    factors = []
    for d in (2, 3, 2):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        m = g @ g.conj().T
        factors.append(m / np.trace(m).real)
    rho = DensityMatrix(
        np.kron(np.kron(*factors[:2]), factors[2]), TripartiteDims(2, 3, 2)
    )

    assert_allclose(partial_trace(rho, "B").matrix, factors[1], atol=1e-12)
    assert_allclose(partial_trace(rho, "A").matrix, factors[0], atol=1e-12)
    assert_allclose(
        partial_trace(rho, "AC").matrix, np.kron(factors[0], factors[2]), atol=1e-12
    )


def test_partial_trace_maximally_mixed() -> None:
    rho = DensityMatrix(np.eye(8) / 8, D222)
    ab = partial_trace(rho, "AB")
    assert ab.systems == "AB"
    assert_allclose(ab.matrix, np.eye(4) / 4, atol=1e-15)


def test_partial_trace_ghz() -> None:
    assert_allclose(partial_trace(_ghz(), "B").matrix, np.eye(2) / 2, atol=1e-15)


def test_partial_trace_keep_sets() -> None:
    rho = _ghz()
    assert partial_trace(rho, "ABC") is rho
    assert partial_trace(rho, "BA").systems == "AB"

    with pytest.raises(DimensionError, match="empty subsystem set"):
        partial_trace(rho, "")
    with pytest.raises(DimensionError, match="unknown subsystem"):
        partial_trace(rho, "AD")

    ab = partial_trace(rho, "AB")
    with pytest.raises(DimensionError, match="cannot keep C"):
        partial_trace(ab, "C")


@pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 2), (3, 2, 4)])
def test_partial_trace_properties(dims: tuple) -> None:
    d = TripartiteDims(*dims)
    for seed in range(20):
        rho = generate(GeneratorSpec(d, "ginibre_full", seed=seed))
        for keep in ("AB", "BC", "B", "A", "C", "AC"):
            reduced = partial_trace(rho, keep)
            assert abs(np.trace(reduced.matrix) - 1) <= 1e-12

        b = partial_trace(rho, "B").matrix
        assert_allclose(
            partial_trace(partial_trace(rho, "AB"), "B").matrix, b, atol=1e-10
        )
        assert_allclose(
            partial_trace(partial_trace(rho, "BC"), "B").matrix, b, atol=1e-10
        )


def test_spectrum_of_examples() -> None:
    assert_allclose(spectrum_of(DensityMatrix(np.eye(8) / 8, D222)).values, [0.125] * 8)

    pure = generate(GeneratorSpec(D222, "pure_random", seed=5))
    assert_allclose(spectrum_of(pure).values, [0.0] * 7 + [1.0], atol=1e-12)

    ab = spectrum_of(partial_trace(_ghz(), "AB"))
    assert ab.label == "AB"
    assert_allclose(ab.values, [0.0, 0.0, 0.5, 0.5], atol=1e-12)


def test_spectrum_invariants_and_unitary_invariance() -> None:
    for seed in range(20):
        rho = generate(GeneratorSpec(D222, "ginibre_full", seed=seed))
        s = spectrum_of(rho)
        assert abs(s.values.sum() - 1) <= 1e-12
        assert np.all(np.diff(s.values) >= 0)

        u = unitary_group.rvs(8, random_state=seed)
        rotated = DensityMatrix(u @ rho.matrix @ u.conj().T, D222)
        assert_allclose(spectrum_of(rotated).values, s.values, atol=1e-9)


def test_bipartite_state() -> None:
    rho = DensityMatrix.bipartite(np.eye(6) / 6, 2, 3)
    assert rho.systems == "AB"
    assert rho.dims == TripartiteDims(2, 3, 1)
    assert_allclose(partial_trace(rho, "B").matrix, np.eye(3) / 3, atol=1e-15)


def test_json_roundtrip(tmp_path) -> None:
    rho = generate(GeneratorSpec(D222, "ginibre_full", seed=11))
    fname = tmp_path / "rho.json"
    dump_density_matrix(rho, fname)

    loaded = load_density_matrix(fname)
    assert loaded.dims == D222
    assert_allclose(loaded.matrix, rho.matrix, atol=1e-15)


def test_json_bipartite_keeps_systems() -> None:
    rho = DensityMatrix.bipartite(np.eye(4) / 4, 2, 2)
    doc = density_matrix_to_json(rho)
    assert doc["systems"] == "AB"
    assert density_matrix_from_json(doc).systems == "AB"


@pytest.mark.parametrize(
    "doc, err",
    [
        ([], "density matrix document must be a JSON object"),
        ({"dims": [1, 1, 1]}, "density matrix document has no 'entries' field"),
        (
            {"dims": [1, 1, 1], "entries": [[1.0, 0.0], [0.0, 0.0]]},
            "'entries' must hold 1 [re, im] pairs, got 2",
        ),
        ({"dims": [1, 1, 1], "entries": [[0.5, 0.0]]}, "trace"),
        (
            {"dims": [1, 1, 1], "entries": [[1.0]]},
            "every entry must be an [re, im] pair",
        ),
        ({"dims": [1, 1, 1], "entries": [[float("nan"), 0.0]]}, "non-finite entries"),
        ({"dims": [1, 1, 1], "entries": [[float("inf"), 0.0]]}, "non-finite entries"),
        (
            {"dims": [1, 1, 1], "systems": 5, "entries": [[1.0, 0.0]]},
            "'systems' must be a string",
        ),
    ],
)
def test_json_rejects(doc: object, err: str) -> None:
    with pytest.raises(InvalidStateError, match=re.escape(err)):
        density_matrix_from_json(doc)


def test_json_rejects_non_hermitian() -> None:
    entries = [[0.5, 0.0], [0.1, 0.0], [0.0, 0.0], [0.5, 0.0]]
    with pytest.raises(InvalidStateError, match="not Hermitian"):
        density_matrix_from_json({"dims": [2, 1, 1], "entries": entries})


def test_load_malformed(tmp_path) -> None:
    fname = tmp_path / "bad.json"
    fname.write_text("{ not json")
    with pytest.raises(InvalidStateError, match="malformed JSON"):
        load_density_matrix(fname)

    fname.write_text(json.dumps({"dims": [2, 2], "entries": []}))
    with pytest.raises(DimensionError):
        load_density_matrix(fname)


def test_load_rejects_nan_and_bad_encoding(tmp_path) -> None:
    fname = tmp_path / "nan.json"
    fname.write_text(json.dumps({"dims": [1, 1, 1], "entries": [[float("nan"), 0.0]]}))
    with pytest.raises(InvalidStateError, match="non-finite entries"):
        load_density_matrix(fname)

    fname = tmp_path / "latin1.json"
    fname.write_bytes(b'{"dims": [1, 1, 1], "entries": [["\xe9", 0.0]]}')
    with pytest.raises(InvalidStateError, match="not utf-8-sig text"):
        load_density_matrix(fname)
