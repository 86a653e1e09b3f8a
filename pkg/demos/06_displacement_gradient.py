"""Deformation gradient from an interpolated displacement.

The gradient of the rescaled interpolant is evaluated in closed form.
Nothing keeps its determinant positive, which is the point of comparison.
"""
import numpy as np

from rbfxfer import DISPLACEMENT_RADIUS, StructuredGrid, build_operator, gauss_points
from rbfxfer import transfer_displacement_gradient
from rbfxfer.harness import make_field

grid = StructuredGrid.cube(10)
nodes = grid.nodes()
dst = gauss_points(StructuredGrid.cube(15), 2)
truth = make_field("shear", {"amount": 0.8})

op = build_operator(nodes, dst, DISPLACEMENT_RADIUS)
F = transfer_displacement_gradient(op, truth.d(nodes.points))
err = np.abs(F.values - truth.F(dst.points)).max(axis=(1, 2))
inside = np.all((dst.points > 0.15) & (dst.points < 0.85), axis=1)
print(f"max error: interior {err[inside].max():.3e}, near the boundary {err[~inside].max():.3e}")
print("det range:", F.det().min(), F.det().max(), "(exact value is 1)")
