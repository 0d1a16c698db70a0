"""Cycle-level GPU assist-warp compression simulator.

The heavy lifting lives in the compiled extension; this package just
re-exports its public surface.
"""

from ._core import (
    CompressedLine,
    __version__,
    compress,
    config_keys,
    decompress,
    disassemble,
    line_data,
    run,
    subroutines,
)

__all__ = [
    "CompressedLine",
    "__version__",
    "compress",
    "config_keys",
    "decompress",
    "disassemble",
    "line_data",
    "run",
    "subroutines",
]
