"""The bundled example transports and a native reference for the AEAD one."""

from __future__ import annotations

from functools import lru_cache

from ..abi import ErrorCode, WaterError
from ..watm import WATM_DIR

TRANSPORTS = ("plain", "reverse", "aead")
DIAGNOSTICS = ("echo_config", "trap")


def bundled_path(name: str):
    path = WATM_DIR / f"{name}.wasm"
    if name not in TRANSPORTS + DIAGNOSTICS + ("kat",) or not path.exists():
        raise WaterError(ErrorCode.INVALID_ARGUMENT, f"no bundled module named {name!r}")
    return path


@lru_cache(maxsize=None)
def load_bundled(name: str):
    """Compiled image of a bundled transport (cached per process)."""
    from ..runtime.image import load_image
    return load_image(bundled_path(name).read_bytes(), name=name)
