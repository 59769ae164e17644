import numpy as np
import pytest

from app.core.config import settings
from app.core.errors import GridMismatchError, StorageError
from app.models.grid import GridFunction
from app.schemas.reports import StabilityRow
from app.services.dnmap import assemble_dn
from app.services.grid import build_grid
from app.services.kernel import build_weights, make_params
from app.storage import exports, grid_functions, weights_cache


def test_grid_function_csv(spec_2d, rng, tmp_path):
    u = GridFunction(spec_2d, rng.standard_normal(spec_2d.n_nodes))
    path = grid_functions.write_csv(u, tmp_path / "u.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "index,x,y,value"
    loaded = grid_functions.load_grid_function(path, spec_2d)
    np.testing.assert_array_equal(loaded.values, u.values)


def test_grid_function_csv_with_missing_nodes(spec_1d, tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("index,x,value\n0,-0.97,1.0\n", encoding="utf-8")
    with pytest.raises(StorageError):
        grid_functions.read_csv(path, spec_1d)
    path.write_text("index,x,value\n0,-0.97,abc\n", encoding="utf-8")
    with pytest.raises(StorageError):
        grid_functions.read_csv(path, spec_1d)


def test_grid_function_binary(spec_1d, rng, tmp_path):
    u = GridFunction(spec_1d, rng.standard_normal(spec_1d.n_nodes))
    path = grid_functions.write_binary(u, tmp_path / "u.bin")
    loaded = grid_functions.read_binary(path)
    assert loaded.spec.same_as(spec_1d)
    np.testing.assert_array_equal(loaded.values, u.values)

    with pytest.raises(GridMismatchError):
        grid_functions.read_binary(path, build_grid(1, 1.0, 64))


def test_binary_with_bad_magic(spec_1d, tmp_path):
    path = grid_functions.write_binary(GridFunction.ones(spec_1d), tmp_path / "u.bin")
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(StorageError):
        grid_functions.read_binary(path)
    (tmp_path / "tiny.bin").write_bytes(b"FC")
    with pytest.raises(StorageError):
        grid_functions.read_binary(tmp_path / "tiny.bin")


def test_weights_cache_hit_is_bit_identical(monkeypatch, tmp_path, spec_1d):
    monkeypatch.setattr(settings, "WEIGHTS_CACHE_DIR", str(tmp_path))
    params = make_params(spec_1d, 0.4)
    computed = build_weights(spec_1d, params)
    assert weights_cache.cache_path(spec_1d, params).exists()
    cached = build_weights(spec_1d, params)
    assert cached is not computed
    np.testing.assert_array_equal(cached.offset_table, computed.offset_table)
    np.testing.assert_array_equal(cached.tau, computed.tau)


def test_weights_cache_ignores_garbage(tmp_path, spec_1d):
    params = make_params(spec_1d, 0.4)
    path = weights_cache.cache_path(spec_1d, params, tmp_path)
    path.write_bytes(b"not an npz archive")
    assert weights_cache.load_weights(spec_1d, params, tmp_path) is None

    other = build_weights(spec_1d, make_params(spec_1d, 0.6), use_cache=False)
    weights_cache.save_weights(other, tmp_path)
    # запись для другого s лежит под другим ключом
    assert weights_cache.load_weights(spec_1d, params, tmp_path) is None


def test_dn_export(weights_1d, layout_1d, random_cond_1d, tmp_path):
    dn = assemble_dn(weights_1d, random_cond_1d, layout_1d)
    path = exports.write_dn_csv(dn, tmp_path / "dn.csv")
    header, nodes, matrix = exports.read_dn_csv(path)
    assert header["dim"] == "1"
    assert header["N"] == "32"
    assert float(header["s"]) == 0.4
    assert header["form"] == "conductivity"
    assert header["layout_hash"] == exports.layout_hash(dn)
    assert header["gamma_hash"] == exports.array_hash(random_cond_1d.gamma.values)
    np.testing.assert_array_equal(nodes, dn.nodes)
    np.testing.assert_array_equal(matrix, dn.matrix)


def test_rows_csv(tmp_path):
    rows = [StabilityRow(nodes=64, factor=1.02, lhs=0.02, rhs=0.03, holds=True)]
    path = exports.write_rows_csv(rows, tmp_path / "rows.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "nodes,factor,lhs,rhs,holds"
    assert lines[1] == "64,1.02,0.02,0.03,True"
    assert exports.write_rows_csv([], tmp_path / "empty.csv").read_text(encoding="utf-8") == ""
