# app/storage/weights_cache.py
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from app.core.config import settings
from app.models.grid import GridSpec
from app.models.kernel import FracParams, KernelWeights

logger = logging.getLogger(__name__)


def cache_path(spec: GridSpec, params: FracParams, directory: Optional[Path] = None) -> Path:
    """Ключ кэша: (dim, L, N, s) и тег версии; числа записаны в hex для точности."""
    directory = directory or settings.WEIGHTS_CACHE_PATH
    name = (
        f"w_d{spec.dim}_L{float(spec.half_width).hex()}_N{spec.nodes_per_axis}"
        f"_s{float(params.s).hex()}_v{settings.WEIGHTS_CACHE_VERSION}.npz"
    )
    return directory / name


def _meta(spec: GridSpec, params: FracParams) -> np.ndarray:
    return np.array([spec.dim, spec.half_width, spec.nodes_per_axis, params.s], dtype=float)


def load_weights(spec: GridSpec, params: FracParams, directory: Optional[Path] = None) -> Optional[KernelWeights]:
    path = cache_path(spec, params, directory)
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = data["meta"]
            version = str(data["version"])
            table = data["offset_table"]
            tau = data["tau"]
        expected_table = (2 * spec.nodes_per_axis - 1,) * spec.dim
        if (
            not np.array_equal(meta, _meta(spec, params))
            or version != settings.WEIGHTS_CACHE_VERSION
            or table.shape != expected_table
            or tau.shape != (spec.n_nodes,)
        ):
            logger.warning(f"Stale kernel weights cache entry at {path}. Recomputing.")
            return None
        return KernelWeights(spec=spec, params=params, offset_table=table, tau=tau)
    except Exception:
        logger.warning(f"Could not read kernel weights cache entry at {path}. Recomputing.", exc_info=True)
        return None


def save_weights(weights: KernelWeights, directory: Optional[Path] = None) -> Optional[Path]:
    path = cache_path(weights.spec, weights.params, directory)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(
            path,
            meta=_meta(weights.spec, weights.params),
            version=np.array(settings.WEIGHTS_CACHE_VERSION),
            offset_table=weights.offset_table,
            tau=weights.tau,
        )
        logger.debug(f"Kernel weights cached at {path}")
        return path
    except OSError:
        logger.warning(f"Could not write kernel weights cache entry at {path}.", exc_info=True)
        return None
