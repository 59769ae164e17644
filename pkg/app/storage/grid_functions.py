# app/storage/grid_functions.py
import csv
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from app.core import locales
from app.core.errors import StorageError
from app.models.grid import GridFunction, GridSpec

logger = logging.getLogger(__name__)

MAGIC = b"FCGF"
FORMAT_VERSION = 1
# Заголовок: magic, версия формата, dim, L, N; далее float64 в порядке индексов
HEADER_DTYPE = np.dtype(
    [("magic", "S4"), ("version", "<u4"), ("dim", "<i8"), ("half_width", "<f8"), ("nodes", "<i8")]
)
VALUE_DTYPE = np.dtype("<f8")

PathLike = Union[str, Path]


def write_csv(u: GridFunction, path: PathLike) -> Path:
    """CSV: index, x[, y], value."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    axes = ["x", "y"][: u.spec.dim]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", *axes, "value"])
        for index, (coords, value) in enumerate(zip(u.spec.coords, u.values)):
            writer.writerow([index, *(repr(float(c)) for c in coords), repr(float(value))])
    return path


def read_csv(path: PathLike, spec: GridSpec) -> GridFunction:
    path = Path(path)
    values = np.zeros(spec.n_nodes)
    seen = np.zeros(spec.n_nodes, dtype=bool)
    try:
        with path.open("r", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                index = int(row["index"])
                values[index] = float(row["value"])
                seen[index] = True
    except (KeyError, ValueError, IndexError) as exc:
        raise StorageError(locales.ERROR_STORAGE_FORMAT, path=path, reason=str(exc))
    if not seen.all():
        raise StorageError(locales.ERROR_STORAGE_FORMAT, path=path, reason="missing node values")
    return GridFunction(spec, values)


def write_binary(u: GridFunction, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array(
        [(MAGIC, FORMAT_VERSION, u.spec.dim, u.spec.half_width, u.spec.nodes_per_axis)], dtype=HEADER_DTYPE
    )
    with path.open("wb") as fh:
        fh.write(header.tobytes())
        fh.write(u.values.astype(VALUE_DTYPE).tobytes())
    return path


def read_binary(path: PathLike, spec: Optional[GridSpec] = None) -> GridFunction:
    """Читает бинарный дамп; при переданной spec проверяет совпадение сетки."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise StorageError(locales.ERROR_STORAGE_FORMAT, path=path, reason="truncated header")
    header = np.frombuffer(raw[: HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    if header["magic"] != MAGIC or int(header["version"]) != FORMAT_VERSION:
        raise StorageError(locales.ERROR_STORAGE_FORMAT, path=path, reason="bad magic or version")
    stored = GridSpec(int(header["dim"]), float(header["half_width"]), int(header["nodes"]))
    if spec is not None:
        spec.check_same(stored)
    values = np.frombuffer(raw[HEADER_DTYPE.itemsize:], dtype=VALUE_DTYPE)
    if values.size != stored.n_nodes:
        raise StorageError(locales.ERROR_STORAGE_FORMAT, path=path, reason="value count mismatch")
    return GridFunction(stored, values.astype(float))


def load_grid_function(path: PathLike, spec: GridSpec) -> GridFunction:
    """Загрузка по расширению: .csv или бинарный дамп."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv(path, spec)
    return read_binary(path, spec)
