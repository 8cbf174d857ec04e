"""Interferometer meshes: two-port cells, momentum-dependent evaluation, decomposition.

A mesh is an ordered list of two-port cells plus optional per-port output
phases. Each cell carries two angles (theta, phi) and acts on an ordered mode
pair (m, n); at momentum ratio nu >= 0 its 2x2 block is::

    [[sin(theta nu) e^{i phi nu / 2},  cos(theta nu) e^{i phi nu / 2}],
     [cos(theta nu),                  -sin(theta nu)               ]]

Backward-propagating waves (nu < 0) see the entrywise conjugate of the block
at |nu|, which makes the full mesh satisfy U(-nu) = conj(U(nu)) identically.
Output phases scale linearly with nu (phase shifters are assumed linear in
momentum), so they obey the same conjugation symmetry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidUnitaryError, ShapeError, SizeLimitError
from .linalg import UnitaryMatrix, as_matrix, unitarity_residual

TWO_PI = 2.0 * math.pi

#: pivot entries below this magnitude are treated as already nulled
ZERO_PIVOT = 1e-14

DECOMPOSE_MAX_DIM = 64
DECOMPOSE_INPUT_TOL = 1e-8


@dataclass(frozen=True)
class TwoPortCell:
    """One beam-splitter/phase-shifter cell acting on the ordered pair ``modes``."""

    theta: float
    phi: float
    modes: tuple[int, int]

    def __post_init__(self):
        m, n = self.modes
        if m == n or m < 0 or n < 0:
            raise ShapeError(f"cell modes must be distinct non-negative indices, got {self.modes}")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "modes", (int(m), int(n)))


def _cell_block(theta: float, phi: float, nu: float) -> np.ndarray:
    if not np.isfinite(nu):
        raise DomainError(f"momentum ratio must be finite, got {nu}")
    if nu < 0:
        return np.conj(_cell_block(theta, phi, -nu))
    s = math.sin(theta * nu)
    c = math.cos(theta * nu)
    p = complex(math.cos(phi * nu / 2.0), math.sin(phi * nu / 2.0))
    return np.array([[s * p, c * p], [c, -s]], dtype=complex)


def two_port_unitary(cell: TwoPortCell, nu: float = 1.0) -> UnitaryMatrix:
    """2x2 unitary implemented by one cell at momentum ratio ``nu``."""
    return UnitaryMatrix(_cell_block(cell.theta, cell.phi, nu))


@dataclass(frozen=True)
class InterferometerMesh:
    """Ordered cells plus optional output phases on ``ports`` optical modes."""

    ports: int
    cells: tuple[TwoPortCell, ...] = ()
    output_phases: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.ports < 1:
            raise ShapeError(f"mesh needs at least one port, got {self.ports}")
        cells = tuple(self.cells)
        if len(cells) > self.ports**2:
            raise SizeLimitError(
                f"{len(cells)} cells exceeds the M^2 = {self.ports**2} budget"
            )
        for cell in cells:
            if max(cell.modes) >= self.ports:
                raise ShapeError(f"cell modes {cell.modes} out of range for {self.ports} ports")
        object.__setattr__(self, "cells", cells)
        if self.output_phases is not None:
            phases = tuple(float(p) % TWO_PI for p in self.output_phases)
            if len(phases) != self.ports:
                raise ShapeError(
                    f"expected {self.ports} output phases, got {len(phases)}"
                )
            object.__setattr__(self, "output_phases", phases)


def mesh_unitary(mesh: InterferometerMesh, nu: float = 1.0) -> UnitaryMatrix:
    """Evaluate the mesh at momentum ratio ``nu`` (nu = 1 is the resonant circuit).

    Cells are applied in list order (later cells multiply on the left),
    followed by the output phases.
    """
    m = mesh.ports
    u = np.eye(m, dtype=complex)
    for cell in mesh.cells:
        block = _cell_block(cell.theta, cell.phi, nu)
        p, q = cell.modes
        u[(p, q), :] = block @ u[(p, q), :]
    if mesh.output_phases is not None:
        phase = np.exp(1j * nu * np.asarray(mesh.output_phases))
        u = phase[:, None] * u
    return UnitaryMatrix(u)


def concatenate(first: InterferometerMesh, second: InterferometerMesh) -> InterferometerMesh:
    """Mesh whose unitary is ``U_second @ U_first`` at every nu.

    The first mesh must carry no output phases: a phase screen between two
    cell blocks cannot be commuted through the second block without changing
    its cells.
    """
    if first.ports != second.ports:
        raise ShapeError("cannot concatenate meshes with different port counts")
    if first.output_phases is not None and any(p != 0.0 for p in first.output_phases):
        raise ShapeError("first mesh must have no output phases to concatenate exactly")
    return InterferometerMesh(
        ports=first.ports,
        cells=first.cells + second.cells,
        output_phases=second.output_phases,
    )


def decompose(u) -> InterferometerMesh:
    """Triangular-nulling decomposition of a unitary into a mesh.

    Produces at most M(M-1)/2 mixing cells on adjacent mode pairs plus up to
    M-1 phase-like cells (theta = pi/2) that re-align column phases at the
    start of each nulling chain, and M output phases. The reconstruction
    ``mesh_unitary(decompose(u), 1)`` matches ``u`` entrywise to ~1e-12.
    """
    w = as_matrix(u).astype(complex)
    m = w.shape[0]
    if w.shape[0] != w.shape[1]:
        raise ShapeError(f"decompose requires a square matrix, got {w.shape}")
    if m > DECOMPOSE_MAX_DIM:
        raise SizeLimitError(f"decompose capped at dim {DECOMPOSE_MAX_DIM}, got {m}")
    res = unitarity_residual(w)
    if res > DECOMPOSE_INPUT_TOL:
        raise InvalidUnitaryError(f"input unitarity residual {res:.3e} exceeds {DECOMPOSE_INPUT_TOL:.1e}")
    w = w.copy()
    if m == 1:
        return InterferometerMesh(ports=1, output_phases=(float(np.angle(w[0, 0])),))

    cells: list[TwoPortCell] = []

    def peel(theta: float, phi: float, p: int, q: int) -> None:
        # w <- w @ T(theta, phi, (p, q))^dagger, recording the cell
        s, c = math.sin(theta), math.cos(theta)
        cp = w[:, p].copy()
        cq = w[:, q].copy()
        w[:, p] = s * cp + c * cq
        w[:, q] = c * cp - s * cq
        if phi != 0.0:
            w[:, p] *= np.exp(-0.5j * phi)
        cells.append(TwoPortCell(theta=theta, phi=phi, modes=(p, q)))

    for i in range(m - 1):
        # Each chain nulls row i rightmost-first with real rotations; a cell's
        # phi pre-aligns the next pivot ratio, and a theta = pi/2 phase cell
        # aligns the very first ratio of the chain when needed.
        u0, v0 = w[i, m - 2], w[i, m - 1]
        if abs(u0) > ZERO_PIVOT and abs(v0) > ZERO_PIVOT:
            misalign = (np.angle(v0) - np.angle(u0)) % math.pi
            if min(misalign, math.pi - misalign) > 1e-15:
                peel(math.pi / 2.0, 2.0 * misalign, m - 1, m - 2)
        for j in range(m - 1, i, -1):
            p, q = j - 1, j
            v = w[i, q]
            if abs(v) <= ZERO_PIVOT:
                theta = math.pi / 2.0
            else:
                theta = math.atan((w[i, p] / v).real)
            s, c = math.sin(theta), math.cos(theta)
            cp = w[:, p].copy()
            cq = w[:, q].copy()
            w[:, p] = s * cp + c * cq
            w[:, q] = c * cp - s * cq
            phi = 0.0
            if p > i:
                a, b = w[i, p], w[i, p - 1]
                if abs(a) > ZERO_PIVOT and abs(b) > ZERO_PIVOT:
                    phi = 2.0 * ((np.angle(a) - np.angle(b)) % math.pi)
                    if phi != 0.0:
                        w[:, p] *= np.exp(-0.5j * phi)
            cells.append(TwoPortCell(theta=theta, phi=phi, modes=(p, q)))

    phases = tuple(float(np.angle(w[k, k])) for k in range(m))
    return InterferometerMesh(ports=m, cells=tuple(cells), output_phases=phases)


# -- mesh JSON wire format ----------------------------------------------------
#
# {"ports": M,
#  "cells": [{"theta": f, "phi": f, "modes": [m, n]}, ...],
#  "output_phases": [f, ...]}


def mesh_to_json(mesh: InterferometerMesh) -> dict:
    obj = {
        "ports": mesh.ports,
        "cells": [
            {"theta": c.theta, "phi": c.phi, "modes": [c.modes[0], c.modes[1]]}
            for c in mesh.cells
        ],
    }
    if mesh.output_phases is not None:
        obj["output_phases"] = list(mesh.output_phases)
    return obj


def mesh_from_json(obj: dict) -> InterferometerMesh:
    cells = tuple(
        TwoPortCell(theta=c["theta"], phi=c["phi"], modes=(c["modes"][0], c["modes"][1]))
        for c in obj.get("cells", [])
    )
    phases = obj.get("output_phases")
    return InterferometerMesh(
        ports=int(obj["ports"]),
        cells=cells,
        output_phases=tuple(phases) if phases is not None else None,
    )


def save_mesh(path, mesh: InterferometerMesh) -> None:
    with open(path, "w") as fh:
        json.dump(mesh_to_json(mesh), fh)
        fh.write("\n")


def load_mesh(path) -> InterferometerMesh:
    with open(path) as fh:
        return mesh_from_json(json.load(fh))
