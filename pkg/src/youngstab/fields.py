"""Registered drift and diffusion fields with certified Lipschitz metadata.

The stability criterion needs trustworthy constants, so fields are built
from a small catalog of primitives whose Lipschitz constants are known in
closed form, plus sum composition.  All callables are vectorized over
leading batch axes: drifts map (..., d) -> (..., d), diffusions map
(..., d) -> (..., d, m).  Diffusion Lipschitz constants are certified
column-wise (max over noise channels of the channel's constant).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError

__all__ = [
    "DriftField",
    "DiffusionField",
    "zero_drift",
    "linear_drift",
    "affine_drift",
    "sin_drift",
    "zero_diffusion",
    "constant_diffusion",
    "linear_diffusion",
    "sin_diffusion",
    "add_drifts",
    "add_diffusions",
    "scale_diffusion",
    "DRIFT_CATALOG",
    "DIFFUSION_CATALOG",
]


@dataclass(frozen=True)
class DriftField:
    fn: Callable
    dim: int
    lipschitz: float
    value0: np.ndarray
    bound: Optional[float] = None
    name: str = "drift"

    def __call__(self, y):
        return self.fn(np.asarray(y, dtype=float))


@dataclass(frozen=True)
class DiffusionField:
    fn: Callable
    dim: int
    noise_dim: int
    lipschitz: float
    dlipschitz: float
    value0: np.ndarray
    bound: Optional[float] = None
    linear: bool = False
    name: str = "diffusion"

    def __call__(self, y):
        return self.fn(np.asarray(y, dtype=float))


def _opnorm(mat) -> float:
    return float(np.linalg.norm(np.asarray(mat, dtype=float), 2))


def zero_drift(d: int) -> DriftField:
    zero = np.zeros(d)
    return DriftField(
        fn=lambda y: np.zeros_like(y),
        dim=d,
        lipschitz=0.0,
        value0=zero,
        bound=0.0,
        name="zero",
    )


def linear_drift(B) -> DriftField:
    B = np.asarray(B, dtype=float)
    d = B.shape[0]
    if B.shape != (d, d):
        raise ParameterError(f"drift matrix must be square, got {B.shape}")
    return DriftField(
        fn=lambda y: y @ B.T,
        dim=d,
        lipschitz=_opnorm(B),
        value0=np.zeros(d),
        name="linear",
    )


def affine_drift(B, c) -> DriftField:
    B = np.asarray(B, dtype=float)
    c = np.asarray(c, dtype=float)
    d = B.shape[0]
    if B.shape != (d, d) or c.shape != (d,):
        raise ParameterError("affine drift needs a d x d matrix and a d offset")
    return DriftField(
        fn=lambda y: y @ B.T + c,
        dim=d,
        lipschitz=_opnorm(B),
        value0=c.copy(),
        name="affine",
    )


def sin_drift(amplitude, frequency: float = 1.0) -> DriftField:
    """Bounded smooth drift f(y)_i = amp_i * sin(freq * y_i); f(0) = 0."""
    amp = np.asarray(amplitude, dtype=float)
    if amp.ndim != 1:
        raise ParameterError("sin drift amplitude must be a vector")
    d = len(amp)
    return DriftField(
        fn=lambda y: amp * np.sin(frequency * y),
        dim=d,
        lipschitz=float(np.max(np.abs(amp)) * abs(frequency)) if d else 0.0,
        value0=np.zeros(d),
        bound=float(np.linalg.norm(amp)),
        name="sin",
    )


def zero_diffusion(d: int, m: int) -> DiffusionField:
    zero = np.zeros((d, m))
    return DiffusionField(
        fn=lambda y: np.zeros(y.shape[:-1] + (d, m)),
        dim=d,
        noise_dim=m,
        lipschitz=0.0,
        dlipschitz=0.0,
        value0=zero,
        bound=0.0,
        linear=True,
        name="zero",
    )


def constant_diffusion(G0) -> DiffusionField:
    """Additive noise g(y) = G0."""
    G0 = np.asarray(G0, dtype=float)
    if G0.ndim == 1:
        G0 = G0[:, None]
    d, m = G0.shape
    return DiffusionField(
        fn=lambda y: np.broadcast_to(G0, y.shape[:-1] + (d, m)).copy(),
        dim=d,
        noise_dim=m,
        lipschitz=0.0,
        dlipschitz=0.0,
        value0=G0.copy(),
        bound=_opnorm(G0),
        linear=True,
        name="constant",
    )


def linear_diffusion(channel_mats, G0=None) -> DiffusionField:
    """g(y) column j = C_j y + G0 column j for d x d channel matrices C_j."""
    mats = np.asarray(channel_mats, dtype=float)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ParameterError("channel matrices must have shape (m, d, d)")
    m, d, _ = mats.shape
    G0 = np.zeros((d, m)) if G0 is None else np.asarray(G0, dtype=float)
    if G0.shape != (d, m):
        raise ParameterError(f"offset must have shape ({d}, {m})")

    def fn(y):
        cols = np.einsum("mde,...e->...dm", mats, y)
        return cols + G0

    return DiffusionField(
        fn=fn,
        dim=d,
        noise_dim=m,
        lipschitz=float(max(_opnorm(mats[j]) for j in range(m))),
        dlipschitz=0.0,
        value0=G0.copy(),
        bound=None,
        linear=True,
        name="linear",
    )


def sin_diffusion(coeff, frequency: float = 1.0) -> DiffusionField:
    """Bounded smooth diffusion g(y)_{ij} = coeff_{ij} sin(freq * y_i)."""
    C = np.asarray(coeff, dtype=float)
    if C.ndim != 2:
        raise ParameterError("sin diffusion coefficient must be a d x m matrix")
    d, m = C.shape
    f = abs(frequency)

    def fn(y):
        return C * np.sin(frequency * y)[..., :, None]

    col_lip = f * np.max(np.abs(C), axis=0, initial=0.0)
    return DiffusionField(
        fn=fn,
        dim=d,
        noise_dim=m,
        lipschitz=float(np.max(col_lip, initial=0.0)),
        dlipschitz=float(f**2 * np.max(np.abs(C), initial=0.0)),
        value0=np.zeros((d, m)),
        bound=float(np.linalg.norm(C, "fro")),
        linear=False,
        name="sin",
    )


def add_drifts(f1: DriftField, f2: DriftField) -> DriftField:
    if f1.dim != f2.dim:
        raise ParameterError("drift dimensions differ")
    bound = None if (f1.bound is None or f2.bound is None) else f1.bound + f2.bound
    return DriftField(
        fn=lambda y: f1.fn(y) + f2.fn(y),
        dim=f1.dim,
        lipschitz=f1.lipschitz + f2.lipschitz,
        value0=f1.value0 + f2.value0,
        bound=bound,
        name=f"{f1.name}+{f2.name}",
    )


def add_diffusions(g1: DiffusionField, g2: DiffusionField) -> DiffusionField:
    if g1.dim != g2.dim or g1.noise_dim != g2.noise_dim:
        raise ParameterError("diffusion shapes differ")
    bound = None if (g1.bound is None or g2.bound is None) else g1.bound + g2.bound
    return DiffusionField(
        fn=lambda y: g1.fn(y) + g2.fn(y),
        dim=g1.dim,
        noise_dim=g1.noise_dim,
        lipschitz=g1.lipschitz + g2.lipschitz,
        dlipschitz=g1.dlipschitz + g2.dlipschitz,
        value0=g1.value0 + g2.value0,
        bound=bound,
        linear=g1.linear and g2.linear,
        name=f"{g1.name}+{g2.name}",
    )


def scale_diffusion(g: DiffusionField, s: float) -> DiffusionField:
    """Multiply a diffusion by s >= 0; Lipschitz data scales exactly."""
    if s < 0:
        raise ParameterError("diffusion scale must be nonnegative")
    return DiffusionField(
        fn=lambda y: s * g.fn(y),
        dim=g.dim,
        noise_dim=g.noise_dim,
        lipschitz=s * g.lipschitz,
        dlipschitz=s * g.dlipschitz,
        value0=s * g.value0,
        bound=None if g.bound is None else s * g.bound,
        linear=g.linear,
        name=g.name if s == 1.0 else f"{s}*{g.name}",
    )


DRIFT_CATALOG = {
    "zero": zero_drift,
    "linear": linear_drift,
    "affine": affine_drift,
    "sin": sin_drift,
}

DIFFUSION_CATALOG = {
    "zero": zero_diffusion,
    "constant": constant_diffusion,
    "linear": linear_diffusion,
    "sin": sin_diffusion,
}
