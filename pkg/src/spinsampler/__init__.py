"""Matter qubits interacting through multiport linear-optical circuits.

Subpackages cover matrix primitives (`linalg`), interferometer meshes
(`interferometer`), effective coherent and dissipative models (`effective`),
sector-restricted time evolution (`dynamics`), dark-state analysis
(`darkstates`), bosonic state preparation (`bosonsampling`), and the
command-line front end (`cli`).
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    bosonsampling,
    darkstates,
    dynamics,
    effective,
    interferometer,
    linalg,
)
