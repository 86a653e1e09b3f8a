"""
Synthetic deformation fields with closed-form gradients.

Every kind provides the deformation gradient ``F(x)``; kinds that come from
an actual displacement ``d(x)`` (so that ``F = I + grad d``) also provide
``d``. ``RANDSMOOTH`` is built as ``R(x) expm(S(x))`` and has no
compatible displacement.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.transform import Rotation

from ..pointcloud import PointSet
from ..fieldxfer import TensorField
from ..tensor import det3

__all__ = ("FieldKind", "AnalyticField", "make_field", "generate_field")


class FieldKind(enum.Enum):
    TWIST = "twist"
    STRETCH = "stretch"
    SHEAR = "shear"
    ROTBLEND = "rotblend"
    RANDSMOOTH = "randsmooth"

    @classmethod
    def parse(cls, value) -> "FieldKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown field kind {value!r}; choose from {[k.value for k in cls]}"
            ) from None


@dataclass(frozen=True)
class AnalyticField:
    """Analytic deformation: ``F(x)`` and, when available, ``d(x)``."""

    kind: FieldKind
    params: dict
    F: Callable[[np.ndarray], np.ndarray]
    d: Optional[Callable[[np.ndarray], np.ndarray]] = None


def _rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    R = np.zeros(np.shape(theta) + (3, 3))
    R[..., 0, 0] = c
    R[..., 0, 1] = -s
    R[..., 1, 0] = s
    R[..., 1, 1] = c
    R[..., 2, 2] = 1.0
    return R


def _twist(rate=1.0, center=(0.5, 0.5, 0.5)):
    # x' = c + Rz(rate * (z - cz)) (x - c); det F = 1 since the angle
    # depends only on z while the rotation acts in the xy-plane.
    c = np.asarray(center, dtype=float)

    def d(x):
        y = x - c
        R = _rot_z(rate * y[:, 2])
        return np.einsum("pij,pj->pi", R, y) - y

    def F(x):
        y = x - c
        theta = rate * y[:, 2]
        R = _rot_z(theta)
        dR = np.zeros_like(R)
        cth, sth = np.cos(theta), np.sin(theta)
        dR[:, 0, 0], dR[:, 0, 1] = -sth, -cth
        dR[:, 1, 0], dR[:, 1, 1] = cth, -sth
        col = rate * np.einsum("pij,pj->pi", dR, y)
        out = R.copy()
        out[:, :, 2] += col
        return out

    return F, d


def _stretch(stretch=1.3, wavenumber=np.pi):
    # Separable map x'_k = x_k + s_k sin(k x_k) / k with alternating signs;
    # F = diag(1 + a cos(k x1), 1 + a cos(k x2), 1 - a cos(k x3)).
    a = float(stretch) - 1.0
    k = float(wavenumber)
    signs = np.array([1.0, 1.0, -1.0])

    def d(x):
        return signs * a * np.sin(k * x) / k

    def F(x):
        lam = 1.0 + signs * a * np.cos(k * x)
        out = np.zeros((x.shape[0], 3, 3))
        out[:, [0, 1, 2], [0, 1, 2]] = lam
        return out

    return F, d


def _shear(amount=0.5, wavenumber=np.pi):
    # d1 = g(x3) x2 with g = amount (1 + sin(k x3) / 2); det F = 1.
    g0 = float(amount)
    k = float(wavenumber)

    def d(x):
        out = np.zeros_like(x)
        out[:, 0] = g0 * (1 + 0.5 * np.sin(k * x[:, 2])) * x[:, 1]
        return out

    def F(x):
        out = np.tile(np.eye(3), (x.shape[0], 1, 1))
        out[:, 0, 1] = g0 * (1 + 0.5 * np.sin(k * x[:, 2]))
        out[:, 0, 2] = g0 * 0.5 * k * np.cos(k * x[:, 2]) * x[:, 1]
        return out

    return F, d


def _rotblend(split=0.5, axis=0, center=(0.5, 0.5, 0.5)):
    # Identity on one side of the plane x[axis] = split, a half-turn about
    # z on the other. Averaging the two componentwise gives diag(0, 0, 1).
    c = np.asarray(center, dtype=float)

    def side(x):
        return x[:, axis] >= split

    def d(x):
        y = x - c
        out = np.zeros_like(x)
        s = side(x)
        out[s, 0] = -2 * y[s, 0]
        out[s, 1] = -2 * y[s, 1]
        return out

    def F(x):
        out = np.tile(np.eye(3), (x.shape[0], 1, 1))
        s = side(x)
        out[s, 0, 0] = -1.0
        out[s, 1, 1] = -1.0
        return out

    return F, d


def _randsmooth(seed=0, modes=4, rotation=1.0, stretch=0.3, scale=1.0):
    # F(x) = R(omega(x)) expm(S(x)), omega and S sums of random Fourier
    # modes; det F = exp(trace S) > 0.
    rng = np.random.default_rng(seed)
    kvec = rng.normal(size=(modes, 3)) * (2 * np.pi / scale) * 0.5
    phase = rng.uniform(0, 2 * np.pi, size=modes)
    w_rot = rng.normal(size=(modes, 3)) * rotation / np.sqrt(modes)
    w_sym = rng.normal(size=(modes, 6)) * stretch / np.sqrt(modes)
    iu = np.triu_indices(3)

    def F(x):
        basis = np.cos(x @ kvec.T + phase)
        omega = basis @ w_rot
        coef = basis @ w_sym
        S = np.zeros((x.shape[0], 3, 3))
        S[:, iu[0], iu[1]] = coef
        S = S + np.swapaxes(S, 1, 2) - np.einsum("pii->pi", S)[:, :, None] * np.eye(3)
        # S is symmetric; expm via its eigen-decomposition
        w, Q = np.linalg.eigh(S)
        E = np.einsum("pik,pk,pjk->pij", Q, np.exp(w), Q)
        R = Rotation.from_rotvec(omega).as_matrix()
        return R @ E

    return F, None


_BUILDERS = {
    FieldKind.TWIST: _twist,
    FieldKind.STRETCH: _stretch,
    FieldKind.SHEAR: _shear,
    FieldKind.ROTBLEND: _rotblend,
    FieldKind.RANDSMOOTH: _randsmooth,
}


def make_field(kind, params: Optional[dict] = None, seed: Optional[int] = None) -> AnalyticField:
    kind = FieldKind.parse(kind)
    params = dict(params or {})
    if kind is FieldKind.RANDSMOOTH and seed is not None:
        params.setdefault("seed", seed)
    try:
        F, d = _BUILDERS[kind](**params)
    except TypeError as exc:
        raise ValueError(f"invalid parameters for {kind.value}: {exc}") from None
    return AnalyticField(kind, params, F, d)


def generate_field(kind, params, ps: PointSet, seed: int = 0, check: bool = True):
    """Sample a synthetic field on ``ps``.

    Returns
    -------
    displacement : ndarray (N, 3) or None
    tensors : TensorField
    truth : AnalyticField

    Raises
    ------
    ValueError
        If a generated tensor has ``det <= 0`` (``check=True``, all kinds
        but ``ROTBLEND``, whose half-turn samples have ``det = 1`` anyway).
    """
    truth = make_field(kind, params, seed)
    x = ps.points
    F = truth.F(x)
    if check:
        det = det3(F)
        bad = ~(det > 0.0)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"{truth.kind.value} parameters give det F = {det[i]:.4g} at point {i}"
            )
    disp = truth.d(x) if truth.d is not None else None
    return disp, TensorField(ps, F), truth
