"""Guest sources (csrc/) and the prebuilt WATM binaries compiled from them."""

from pathlib import Path

WATM_DIR = Path(__file__).resolve().parent
