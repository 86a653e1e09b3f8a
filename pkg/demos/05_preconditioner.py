"""Approximate cardinal functions as a GMRES preconditioner."""
import numpy as np

from rbfxfer import (
    PointSet,
    RadiusConfig,
    adaptive_radii,
    assemble_interp_matrix,
    build_cardinal_preconditioner,
    gmres,
)

rng = np.random.default_rng(1)
src = PointSet(rng.uniform(size=(2000, 3)))
radii = adaptive_radii(src, RadiusConfig(M=2, alpha=2.0))
A = assemble_interp_matrix(src, radii)
P, inner = build_cardinal_preconditioner(A, src, radii)
print(f"Phi_int: {A.shape[0]} rows, {A.nnz / A.shape[0]:.1f} entries per row; P^-1 nnz {P.nnz}")

b = np.sin(4 * src.points).sum(axis=1)
_, plain = gmres(A, b)
x, pre = gmres(A, b, precond=P)
print("unpreconditioned:", plain.iterations, "iterations")
print("preconditioned:  ", pre.iterations, "iterations, residual", f"{pre.residual:.1e}")
