"""What the aligned SVD does to a single tensor, and why it is gauge-free."""
import numpy as np

from rbfxfer import align_svd, aligned_svd, quaternion_to_rotation, svd3

F = np.diag([1.0, 2.0, 3.0])
raw = svd3(F)
print("LAPACK order:", raw.sigma)            # (3, 2, 1), columns permuted
al = aligned_svd(F)
print("aligned order:", al.sigma)            # back to (1, 2, 3)
print("U = V = I:", np.allclose(al.U, np.eye(3)), np.allclose(al.V, np.eye(3)))

rng = np.random.default_rng(0)
F = rng.normal(size=(3, 3))
if np.linalg.det(F) < 0:
    F[:, 0] *= -1
raw = svd3(F)
al = align_svd(raw)

# flip the sign of one singular pair and swap two others: same answer, bit for bit
U, s, V = raw.U.copy(), raw.sigma.copy(), raw.V.copy()
U[:, 1] *= -1
V[:, 1] *= -1
p = [2, 1, 0]
from rbfxfer.tensor import RawSVD

again = align_svd(RawSVD(U[:, p], s[p], V[:, p]))
print("gauge invariant:", np.array_equal(again.qU, al.qU) and np.array_equal(again.sigma, al.sigma))
print("qU =", al.qU, " qV =", al.qV)
print("reconstruction error:", np.abs(quaternion_to_rotation(al.qU) @ np.diag(al.sigma)
                                      @ quaternion_to_rotation(al.qV).T - F).max())
