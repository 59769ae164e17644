# app/storage/exports.py
import csv
import hashlib
import logging
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
from pydantic import BaseModel

from app.models.operators import DnMatrix

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def array_hash(*arrays: np.ndarray) -> str:
    digest = hashlib.sha256()
    for arr in arrays:
        digest.update(np.ascontiguousarray(arr).tobytes())
    return digest.hexdigest()


def layout_hash(dn: DnMatrix) -> str:
    layout = dn.layout
    return array_hash(layout.omega, layout.w1, layout.w2, layout.omega_small)


def write_dn_csv(dn: DnMatrix, path: PathLike) -> Path:
    """CSV DN-матрицы; строки заголовка с '#' называют dim, L, N, s и хэши разбиения и γ."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    spec = dn.spec
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# dim={spec.dim}\n# L={spec.half_width!r}\n# N={spec.nodes_per_axis}\n# s={dn.weights.s!r}\n")
        fh.write(f"# form={dn.form}\n# layout_hash={layout_hash(dn)}\n# gamma_hash={array_hash(dn.cond.gamma.values)}\n")
        writer = csv.writer(fh)
        writer.writerow(["node", *(int(n) for n in dn.nodes)])
        for node, row in zip(dn.nodes, dn.matrix):
            writer.writerow([int(node), *(repr(float(v)) for v in row)])
    logger.debug(f"DN matrix exported to {path}")
    return path


def read_dn_csv(path: PathLike) -> tuple:
    """Возвращает (заголовок как dict, узлы, матрица)."""
    path = Path(path)
    header = {}
    rows: List[List[str]] = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
            else:
                rows.append(line.strip().split(","))
    nodes = np.array([int(v) for v in rows[0][1:]])
    matrix = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return header, nodes, matrix


def write_rows_csv(rows: Iterable[BaseModel], path: PathLike) -> Path:
    """Трассы: список pydantic-моделей одного типа -> CSV."""
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if not rows:
            return path
        fields = list(rows[0].model_dump().keys())
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump())
    return path


def write_report(report: BaseModel, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return path
