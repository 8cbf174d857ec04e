#!/usr/bin/env python3
"""Compiling circuits: unitary -> mesh -> unitary, and coupling matrix -> circuit.

Shows the triangular decomposition of a Haar unitary into two-port cells, the
momentum dependence of the resulting mesh (with the forward/backward
conjugation symmetry), and the synthesis of a circuit unitary whose real part
realizes a requested symmetric spin-spin coupling matrix.

Run:  python demos/mesh_compile.py
"""

import numpy as np

from spinsampler.effective import unitary_from_couplings
from spinsampler.interferometer import decompose, mesh_unitary
from spinsampler.linalg import RngStream, haar_unitary


def main():
    m = 6
    u = np.asarray(haar_unitary(m, RngStream(0)))
    mesh = decompose(u)
    mixing = sum(1 for c in mesh.cells if abs(np.cos(c.theta)) > 1e-12)
    print(f"Haar {m}x{m} unitary decomposed into {len(mesh.cells)} cells "
          f"({mixing} mixing, {len(mesh.cells) - mixing} phase-like) "
          f"plus {m} output phases.")
    rec = np.asarray(mesh_unitary(mesh, 1.0))
    print(f"  reconstruction residual at nu = 1: {np.max(np.abs(rec - u)):.2e}")

    print("\nMomentum dependence of the same mesh:")
    for nu in (0.5, 1.0, 1.5):
        fwd = np.asarray(mesh_unitary(mesh, nu))
        bwd = np.asarray(mesh_unitary(mesh, -nu))
        drift = np.max(np.abs(fwd - u))
        sym = np.max(np.abs(bwd - np.conj(fwd)))
        print(f"  nu = {nu:4.1f}: |U(nu) - U(1)| = {drift:.3f},  "
              f"|U(-nu) - conj(U(nu))| = {sym:.1e}")

    print("\nSynthesizing a circuit for a random symmetric coupling matrix:")
    rng = np.random.default_rng(3)
    a = rng.normal(size=(5, 5))
    j = a + a.T
    circuit, delta = unitary_from_couplings(j)
    cm = np.asarray(circuit)
    print(f"  coupling scale delta = {delta:.4f}")
    print(f"  |Re[U] * delta - J|_max = {np.max(np.abs(cm.real * delta - j)):.2e}")
    mesh_j = decompose(cm)
    rec_j = np.asarray(mesh_unitary(mesh_j, 1.0))
    print(f"  mesh for the synthesized circuit: {len(mesh_j.cells)} cells, "
          f"round-trip residual {np.max(np.abs(rec_j - cm)):.2e}")


if __name__ == "__main__":
    main()
