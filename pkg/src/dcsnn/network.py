"""One-hidden-layer network on the augmented input (x, z).

The network value is ``W2 . sigmoid(W1 @ (x, z) + b1) + b2`` with
``W1`` of shape ``(N, d+1)``.  Every derivative needed for training
(spatial gradient, spatial Laplacian, normal derivative and their
parameter Jacobians) is written out in closed form.

Flattened parameter layout, relied on by the optimizer and the tests::

    [ W1 (row-major, N*(d+1)) | b1 (N) | W2 (N) | b2 (1) ]
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "ShallowNetParams",
    "AugmentedPoint",
    "sigmoid",
    "sigmoid_d1",
    "sigmoid_d2",
    "sigmoid_d3",
    "num_params",
    "init_params",
    "forward",
    "spatial_gradient",
    "spatial_laplacian",
    "normal_derivative",
    "param_jacobian",
    "JACOBIAN_MODES",
]

JACOBIAN_MODES = ("value", "laplacian", "normal_derivative")
INIT_SCHEMES = ("uniform",)


# -- activation ---------------------------------------------------------------

def sigmoid(t):
    t = np.asarray(t, dtype=float)
    # split by sign so exp never overflows
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_d1(t):
    s = sigmoid(t)
    return s * (1.0 - s)


def sigmoid_d2(t):
    s = sigmoid(t)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def sigmoid_d3(t):
    s = sigmoid(t)
    s1 = s * (1.0 - s)
    return s1 * (1.0 - 2.0 * s) ** 2 - 2.0 * s1 * s1


def _activations(t):
    """sigma and its first three derivatives from a single exp pass."""
    s = sigmoid(t)
    s1 = s * (1.0 - s)
    s2 = s1 * (1.0 - 2.0 * s)
    s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1
    return s, s1, s2, s3


# -- parameters ---------------------------------------------------------------

def num_params(d: int, N: int) -> int:
    return (d + 3) * N + 1


@dataclass(frozen=True)
class ShallowNetParams:
    d: int
    N: int
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    scheme: str = "uniform"

    def __post_init__(self):
        if self.d < 1 or self.N < 1:
            raise ValueError(f"need d >= 1 and N >= 1, got d={self.d}, N={self.N}")
        W1 = np.asarray(self.W1, dtype=float)
        b1 = np.asarray(self.b1, dtype=float).reshape(-1)
        W2 = np.asarray(self.W2, dtype=float).reshape(-1)
        if W1.shape != (self.N, self.d + 1) or b1.shape != (self.N,) or W2.shape != (self.N,):
            raise ValueError("parameter shapes inconsistent with (d, N)")
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "W2", W2)
        object.__setattr__(self, "b2", float(self.b2))

    @property
    def size(self) -> int:
        return num_params(self.d, self.N)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2, [self.b2]])

    @classmethod
    def from_flat(cls, d: int, N: int, flat, scheme: str = "uniform") -> "ShallowNetParams":
        flat = np.asarray(flat, dtype=float).reshape(-1)
        if flat.size != num_params(d, N):
            raise ValueError(f"expected {num_params(d, N)} parameters, got {flat.size}")
        k = N * (d + 1)
        return cls(
            d=d,
            N=N,
            W1=flat[:k].reshape(N, d + 1),
            b1=flat[k:k + N],
            W2=flat[k + N:k + 2 * N],
            b2=flat[-1],
            scheme=scheme,
        )

    def to_json(self) -> dict:
        return {"d": self.d, "N": self.N, "scheme": self.scheme, "flat": self.flatten().tolist()}

    @classmethod
    def from_json(cls, record: dict) -> "ShallowNetParams":
        return cls.from_flat(record["d"], record["N"], record["flat"], record.get("scheme", "uniform"))

    # evaluator protocol shared with exact fields (see problems.PiecewiseField)
    def value(self, x, z):
        return forward(self, x, z)

    def gradient(self, x, z):
        return spatial_gradient(self, x, z)[..., : self.d]

    def laplacian(self, x, z):
        return spatial_laplacian(self, x, z)


@dataclass(frozen=True)
class AugmentedPoint:
    x: np.ndarray
    z: float


def init_params(d: int, N: int, seed: int = 0, scheme: str = "uniform") -> ShallowNetParams:
    if scheme not in INIT_SCHEMES:
        raise ValueError(f"unknown init scheme {scheme!r}; choose from {INIT_SCHEMES}")
    rng = np.random.default_rng(seed)
    flat = rng.uniform(-1.0, 1.0, size=num_params(d, N))
    return ShallowNetParams.from_flat(d, N, flat, scheme=scheme)


# -- evaluation ---------------------------------------------------------------

def _inputs(params: ShallowNetParams, x, z):
    """Normalise (x, z) to a batch: X (m, d), Z (m,), and whether input was scalar."""
    if isinstance(x, AugmentedPoint):
        x, z = x.x, x.z
    if z is None:
        raise ValueError("z label is required")
    X = np.asarray(x, dtype=float)
    single = False
    if X.ndim == 0:
        X, single = X.reshape(1, 1), np.ndim(z) == 0
    elif X.ndim == 1:
        if X.size == params.d and np.ndim(z) == 0:
            X, single = X[None, :], True
        elif params.d == 1:
            X = X[:, None]
    if X.ndim != 2 or X.shape[-1] != params.d:
        raise ValueError(f"point dimension {X.shape[-1]} does not match network d={params.d}")
    Z = np.broadcast_to(np.asarray(z, dtype=float), (X.shape[0],))
    return X, Z, single


def _preact(params, X, Z):
    return X @ params.W1[:, :-1].T + Z[:, None] * params.W1[:, -1] + params.b1


def _out(values, single):
    return values[0] if single else values


def forward(params: ShallowNetParams, x, z=None):
    """Network value at (x, z); accepts one point or a batch of shape (m, d)."""
    X, Z, single = _inputs(params, x, z)
    S = sigmoid(_preact(params, X, Z))
    return _out(S @ params.W2 + params.b2, single)


def spatial_gradient(params: ShallowNetParams, x, z=None):
    """Gradient with respect to (x, z); the last entry is d/dz."""
    X, Z, single = _inputs(params, x, z)
    S1 = sigmoid_d1(_preact(params, X, Z))
    return _out((S1 * params.W2) @ params.W1, single)


def spatial_laplacian(params: ShallowNetParams, x, z=None):
    """Laplacian over the d spatial coordinates only (z excluded)."""
    X, Z, single = _inputs(params, x, z)
    S2 = sigmoid_d2(_preact(params, X, Z))
    q = np.sum(params.W1[:, :-1] ** 2, axis=1)
    return _out(S2 @ (params.W2 * q), single)


def normal_derivative(params: ShallowNetParams, x, z, normals):
    X, Z, single = _inputs(params, x, z)
    n = np.atleast_2d(np.asarray(normals, dtype=float))
    S1 = sigmoid_d1(_preact(params, X, Z))
    a = n @ params.W1[:, :-1].T
    return _out(np.sum(S1 * a * params.W2, axis=1), single)


def param_jacobian(params: ShallowNetParams, x, z, which: str = "value",
                   normals: Optional[np.ndarray] = None) -> np.ndarray:
    """Closed-form derivative of a network quantity with respect to the flat parameters.

    ``which`` selects the quantity: ``"value"``, ``"laplacian"`` or
    ``"normal_derivative"`` (the latter needs one unit normal per point).
    Returns an array of shape ``(m, num_params(d, N))``.
    """
    if which not in JACOBIAN_MODES:
        raise ValueError(f"unknown jacobian mode {which!r}; choose from {JACOBIAN_MODES}")
    X, Z, _ = _inputs(params, x, z)
    m, d, N = X.shape[0], params.d, params.N
    U = np.hstack([X, Z[:, None]])  # (m, d+1)
    S, S1, S2, S3 = _activations(_preact(params, X, Z))
    W1s = params.W1[:, :-1]
    W2 = params.W2

    if which == "value":
        dh = S1 * W2  # d(value)/d(b1_j)
        dW1 = dh[:, :, None] * U[:, None, :]
        dW2 = S
        db2 = np.ones(m)
    elif which == "laplacian":
        q = np.sum(W1s ** 2, axis=1)
        dh = S3 * (W2 * q)
        dW1 = dh[:, :, None] * U[:, None, :]
        dW1[:, :, :d] += (2.0 * S2 * W2)[:, :, None] * W1s[None, :, :]
        dW2 = S2 * q
        db2 = np.zeros(m)
    else:
        if normals is None:
            raise ValueError("normal_derivative mode requires normals")
        n = np.atleast_2d(np.asarray(normals, dtype=float))
        if n.shape != (m, d):
            raise ValueError(f"normals must have shape {(m, d)}, got {n.shape}")
        a = n @ W1s.T  # (m, N)
        dh = S2 * W2 * a
        dW1 = dh[:, :, None] * U[:, None, :]
        dW1[:, :, :d] += (S1 * W2)[:, :, None] * n[:, None, :]
        dW2 = S1 * a
        db2 = np.zeros(m)

    J = np.empty((m, num_params(d, N)))
    k = N * (d + 1)
    J[:, :k] = dW1.reshape(m, k)
    J[:, k:k + N] = dh
    J[:, k + N:k + 2 * N] = dW2
    J[:, -1] = db2
    return J
