"""Matrix primitives: Haar-random sampling, permanents, and the matrix JSON format.

Conventions used repo-wide:

* matrices are dense complex numpy arrays, row-major;
* unitarity / orthogonality is always checked against ``max |A^H A - I|``;
* random draws are addressed by :class:`RngStream` pairs ``(seed, stream)``
  so that Monte Carlo results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidDimensionError,
    InvalidUnitaryError,
    ShapeError,
    SizeLimitError,
)

UNITARITY_TOL = 1e-10
PERMANENT_MAX_DIM = 20


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream addressed by ``(seed, stream)``.

    Identical pairs reproduce identical draws; distinct stream ids give
    statistically independent generators (numpy ``SeedSequence`` spawning).
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.default_rng(ss)


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def as_matrix(m, dtype=complex) -> np.ndarray:
    """Coerce a matrix-like object (ndarray, nested lists, wrapper) to ndarray."""
    a = np.asarray(m, dtype=dtype)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def unitarity_residual(m) -> float:
    """max |U^H U - I|, the residual used by every unitarity check."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"matrix is not square: {a.shape}")
    return float(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0]))))


class UnitaryMatrix:
    """Square complex matrix with verified unitarity (residual <= 1e-10)."""

    def __init__(self, entries, tol: float = UNITARITY_TOL):
        m = as_matrix(entries)
        if m.shape[0] != m.shape[1]:
            raise ShapeError(f"unitary must be square, got {m.shape}")
        if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
            raise InvalidUnitaryError("matrix contains non-finite entries")
        res = unitarity_residual(m)
        if res > tol:
            raise InvalidUnitaryError(f"unitarity residual {res:.3e} exceeds {tol:.1e}")
        m.flags.writeable = False
        self._m = m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._m
        return self._m.astype(dtype)

    def __repr__(self):
        return f"UnitaryMatrix(dim={self.dim})"


class OrthogonalMatrix:
    """Square real matrix with verified orthogonality (residual <= 1e-10)."""

    def __init__(self, entries, tol: float = UNITARITY_TOL):
        m = np.asarray(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"orthogonal matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidUnitaryError("matrix contains non-finite entries")
        res = float(np.max(np.abs(m.T @ m - np.eye(m.shape[0]))))
        if res > tol:
            raise InvalidUnitaryError(f"orthogonality residual {res:.3e} exceeds {tol:.1e}")
        m.flags.writeable = False
        self._m = m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._m
        return self._m.astype(dtype)

    def __repr__(self):
        return f"OrthogonalMatrix(dim={self.dim})"


def haar_unitary(dim: int, rng) -> UnitaryMatrix:
    """Haar-distributed random unitary.

    Ginibre matrix followed by QR, with the triangular factor's diagonal
    phases pulled into Q so the distribution is exactly Haar.
    """
    if dim < 1:
        raise InvalidDimensionError(f"dim must be >= 1, got {dim}")
    gen = _generator(rng)
    z = (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return UnitaryMatrix(q)


def haar_orthogonal(dim: int, rng) -> OrthogonalMatrix:
    """Haar-distributed random real orthogonal matrix (QR with sign-fixed diagonal)."""
    if dim < 1:
        raise InvalidDimensionError(f"dim must be >= 1, got {dim}")
    gen = _generator(rng)
    z = gen.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    signs = np.where(d < 0, -1.0, 1.0)
    return OrthogonalMatrix(q * signs)


def permanent(m) -> complex:
    """Permanent of a square matrix via Ryser's formula with Gray-code iteration.

    Cost is O(2^n * n); the hard cap of 20 keeps worst-case runtime in the
    seconds range. Dimensions above ~16 take noticeably longer.
    """
    a = as_matrix(m)
    n, n2 = a.shape
    if n != n2:
        raise ShapeError(f"permanent requires a square matrix, got {a.shape}")
    if n > PERMANENT_MAX_DIM:
        raise SizeLimitError(f"permanent capped at dim {PERMANENT_MAX_DIM}, got {n}")
    if n == 0:
        return complex(1.0)
    cols = [[complex(a[i, j]) for i in range(n)] for j in range(n)]
    sums = [0j] * n
    total = 0j
    gray = 0
    rng_n = range(n)
    for k in range(1, 1 << n):
        new_gray = k ^ (k >> 1)
        bit = gray ^ new_gray
        j = bit.bit_length() - 1
        col = cols[j]
        if new_gray & bit:
            for i in rng_n:
                sums[i] += col[i]
        else:
            for i in rng_n:
                sums[i] -= col[i]
        term = math.prod(sums)
        if new_gray.bit_count() & 1:
            total -= term
        else:
            total += term
        gray = new_gray
    return total if n % 2 == 0 else -total


# -- matrix JSON wire format --------------------------------------------------
#
# {"rows": int, "cols": int, "data": [[re, im], ...]}  row-major; real matrices
# carry im = 0.  Used by every subcommand that reads or writes a matrix.


def matrix_to_json(m) -> dict:
    a = as_matrix(m)
    data = [[float(x.real), float(x.imag)] for x in a.ravel()]
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]), "data": data}


def matrix_from_json(obj: dict) -> np.ndarray:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = obj["data"]
    if len(data) != rows * cols:
        raise ShapeError(f"matrix JSON claims {rows}x{cols} but has {len(data)} entries")
    flat = np.array([complex(re, im) for re, im in data])
    return flat.reshape(rows, cols)


def save_matrix(path, m) -> None:
    with open(path, "w") as fh:
        json.dump(matrix_to_json(m), fh)
        fh.write("\n")


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return matrix_from_json(json.load(fh))
