"""Rebuild the bundled WATM binaries from csrc/ with clang's wasm32 target.

    python -m water.watm.build [--clang PATH] [--out DIR]

The compiled modules are checked in next to this file, so a toolchain is
only needed when the C sources change.
"""

import argparse
import shutil
import subprocess
import sys
from pathlib import Path

CSRC = Path(__file__).resolve().parent / "csrc"
OUT = Path(__file__).resolve().parent

SDK = ["libc.c", "sdk.c"]
CRYPTO = ["crypto.c", "aead_core.c"]

TARGETS = {
    "plain": SDK + ["plain.c"],
    "reverse": SDK + ["reverse.c"],
    "aead": SDK + CRYPTO + ["aead.c"],
    "echo_config": SDK + ["echo_config.c"],
    "trap": SDK + ["trap.c"],
    "kat": ["libc.c"] + CRYPTO + ["kat.c"],
}

CFLAGS = [
    "--target=wasm32",
    "-O2",
    "-std=c11",
    "-nostdlib",
    "-ffreestanding",
    "-fno-builtin",
    "-Wall",
    "-Wextra",
    "-Werror",
    "-Wl,--no-entry",
    "-Wl,-z,stack-size=131072",
    "-Wl,--strip-all",
]


def build(name, clang="clang", out_dir=OUT):
    out = Path(out_dir) / f"{name}.wasm"
    cmd = [clang, *CFLAGS, "-o", str(out), *(str(CSRC / s) for s in TARGETS[name])]
    subprocess.run(cmd, check=True)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--clang", default=shutil.which("clang") or "clang")
    parser.add_argument("--out", default=str(OUT))
    parser.add_argument("targets", nargs="*", default=sorted(TARGETS))
    args = parser.parse_args(argv)
    for name in args.targets:
        path = build(name, args.clang, args.out)
        print(f"{path.name}: {path.stat().st_size} bytes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
