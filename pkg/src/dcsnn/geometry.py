"""Domains, interfaces and collocation point sets.

The interface is the zero set of a level set ``psi`` with ``psi < 0`` in the
inner region (label z = -1) and ``psi > 0`` outside (z = +1).  Points with
``psi == 0`` belong to the inner region.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

DISTRIBUTIONS = ("chebyshev", "uniform", "random")

INSIDE, OUTSIDE = -1, 1
_DOMAIN_TOL = 1e-12


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _check_dist(dist):
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"unknown node distribution {dist!r}; choose from {DISTRIBUTIONS}")


def _integer_root(M: int, d: int) -> int:
    m = int(round(M ** (1.0 / d)))
    for cand in (m - 1, m, m + 1):
        if cand >= 1 and cand ** d == M:
            return cand
    raise ValueError(f"grid distribution needs a perfect {d}-th power, got {M}")


def chebyshev_nodes(m: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """First-kind Chebyshev nodes mapped to [lo, hi], increasing."""
    if m < 1 or not lo < hi:
        raise ValueError("need m >= 1 and lo < hi")
    # cos((2k-1)pi/2m) rewritten as a sine of a symmetric integer grid: exact negation symmetry
    j = np.arange(-(m - 1), m, 2)
    t = np.sin(np.pi * j / (2 * m))
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * t


def uniform_nodes(m: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """Cell-centred lattice lo + (k - 1/2) h, excluding the endpoints."""
    if m < 1 or not lo < hi:
        raise ValueError("need m >= 1 and lo < hi")
    return lo + (np.arange(1, m + 1) - 0.5) * (hi - lo) / m


def _nodes_1d(dist, m, lo, hi):
    return chebyshev_nodes(m, lo, hi) if dist == "chebyshev" else uniform_nodes(m, lo, hi)


def tensor_grid(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def sphere_directions(n: int, d: int, rng) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# -- polar curves -------------------------------------------------------------

@dataclass(frozen=True)
class PolarCurve:
    """r(theta) = base + amp * trig(freq * theta), with trig in {cos, sin}."""

    base: float
    amp: float
    freq: int
    trig: str = "cos"

    def __post_init__(self):
        if self.trig not in ("cos", "sin"):
            raise ValueError("trig must be 'cos' or 'sin'")
        if self.base - abs(self.amp) <= 0:
            raise ValueError("polar curve must stay at positive radius")

    def rho(self, theta):
        f = np.cos if self.trig == "cos" else np.sin
        return self.base + self.amp * f(self.freq * theta)

    def drho(self, theta):
        if self.trig == "cos":
            return -self.amp * self.freq * np.sin(self.freq * theta)
        return self.amp * self.freq * np.cos(self.freq * theta)

    def psi(self, X):
        r = np.hypot(X[:, 0], X[:, 1])
        return r - self.rho(np.arctan2(X[:, 1], X[:, 0]))

    def grad_psi(self, X):
        x, y = X[:, 0], X[:, 1]
        r2 = x * x + y * y
        r = np.sqrt(r2)
        dr = self.drho(np.arctan2(y, x))
        return np.stack([x / r + dr * y / r2, y / r - dr * x / r2], axis=1)

    def points(self, theta):
        rho = self.rho(theta)
        return np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=1)

    def area(self) -> float:
        return math.pi * (self.base ** 2 + 0.5 * self.amp ** 2)

    def bounding_box(self):
        n = 20001
        pts = self.points(np.linspace(0.0, 2 * np.pi, n))
        # between samples a coordinate exceeds its sampled max by at most |x''| h^2 / 8
        a, f = abs(self.amp), self.freq
        h = 2 * np.pi / (n - 1)
        pad = (a * f * f + 2 * a * f + self.base + a) * h * h / 8 + 1e-12
        return pts.min(axis=0) - pad, pts.max(axis=0) + pad


# -- domains ------------------------------------------------------------------

@dataclass(frozen=True)
class Hypercube:
    lo: tuple
    hi: tuple

    kind = "hypercube"

    @property
    def d(self) -> int:
        return len(self.lo)

    def contains(self, X, tol=_DOMAIN_TOL):
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.all((X >= lo - tol) & (X <= hi + tol), axis=1)

    def boundary_residual(self, X):
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        # distance to the nearest face, zero on the boundary
        return np.min(np.minimum(np.abs(X - lo), np.abs(X - hi)), axis=1)

    def bounding_box(self):
        return np.asarray(self.lo, float), np.asarray(self.hi, float)

    def area(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def sample_interior(self, M, dist, rng):
        if dist == "random":
            lo, hi = self.bounding_box()
            return rng.uniform(lo, hi, size=(M, self.d))
        m = _integer_root(M, self.d)
        return tensor_grid([_nodes_1d(dist, m, l, h) for l, h in zip(self.lo, self.hi)])

    def sample_boundary(self, M_b, dist, rng):
        d, faces = self.d, 2 * self.d
        if dist != "random" and M_b % faces:
            raise ValueError(f"{M_b} boundary points do not split evenly over {faces} faces")
        counts = np.full(faces, M_b // faces)
        counts[: M_b % faces] += 1
        lo, hi = self.bounding_box()
        out = []
        for f in range(faces):
            axis, side = divmod(f, 2)
            others = [a for a in range(d) if a != axis]
            n = int(counts[f])
            if n == 0:
                continue
            if d == 1:
                face = np.zeros((n, 0))
            elif dist == "random":
                face = rng.uniform(lo[others], hi[others], size=(n, d - 1))
            else:
                m = _integer_root(n, d - 1)
                face = tensor_grid([_nodes_1d(dist, m, lo[a], hi[a]) for a in others])
            pts = np.empty((n, d))
            pts[:, others] = face
            pts[:, axis] = hi[axis] if side else lo[axis]
            out.append(pts)
        return np.vstack(out)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    kind = "ball"

    @property
    def d(self) -> int:
        return len(self.center)

    def contains(self, X, tol=_DOMAIN_TOL):
        return np.linalg.norm(X - np.asarray(self.center), axis=1) <= self.radius + tol

    def boundary_residual(self, X):
        return np.abs(np.linalg.norm(X - np.asarray(self.center), axis=1) - self.radius)

    def bounding_box(self):
        c = np.asarray(self.center, float)
        return c - self.radius, c + self.radius

    def area(self) -> float:
        d = self.d
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius ** d

    def sample_interior(self, M, dist, rng):
        if dist != "random":
            raise ValueError("grid distributions are only defined on hypercube domains")
        u = sphere_directions(M, self.d, rng)
        radii = self.radius * rng.uniform(size=M) ** (1.0 / self.d)
        return np.asarray(self.center) + radii[:, None] * u

    def sample_boundary(self, M_b, dist, rng):
        if dist == "random":
            u = sphere_directions(M_b, self.d, rng)
        elif self.d == 2:
            th = 2 * np.pi * np.arange(M_b) / M_b
            u = np.stack([np.cos(th), np.sin(th)], axis=1)
        else:
            raise ValueError("grid boundary distributions on a ball are only defined in 2-D")
        return np.asarray(self.center) + self.radius * u


@dataclass(frozen=True)
class PolarStarDomain:
    curve: PolarCurve

    kind = "polar_star"
    d = 2

    def contains(self, X, tol=_DOMAIN_TOL):
        return self.curve.psi(X) <= tol

    def boundary_residual(self, X):
        return np.abs(self.curve.psi(X))

    def bounding_box(self):
        return self.curve.bounding_box()

    def area(self) -> float:
        return self.curve.area()

    def sample_interior(self, M, dist, rng):
        if dist != "random":
            raise ValueError("grid distributions are only defined on hypercube domains")
        return rejection_sample(self, M, rng)[0]

    def sample_boundary(self, M_b, dist, rng):
        if dist == "random":
            th = rng.uniform(0.0, 2 * np.pi, size=M_b)
        else:
            th = 2 * np.pi * np.arange(M_b) / M_b
        return self.curve.points(th)


def rejection_sample(domain, M, rng, batch: Optional[int] = None):
    """Uniform points in ``domain`` by rejection from its bounding box.

    Returns the points and the number of box draws used.
    """
    lo, hi = domain.bounding_box()
    batch = batch or max(64, 2 * M)
    cands, masks = [], []
    n = 0
    while n < M:
        cand = rng.uniform(lo, hi, size=(batch, len(lo)))
        mask = domain.contains(cand, tol=0.0)
        cands.append(cand)
        masks.append(mask)
        n += int(mask.sum())
    cand, mask = np.vstack(cands), np.concatenate(masks)
    idx = np.flatnonzero(mask)[:M]
    return cand[idx], int(idx[-1]) + 1


# -- interfaces ---------------------------------------------------------------

@dataclass(frozen=True)
class Ellipse:
    a: float
    b: float

    kind = "ellipse"
    d = 2

    def psi(self, X):
        return (X[:, 0] / self.a) ** 2 + (X[:, 1] / self.b) ** 2 - 1.0

    def grad_psi(self, X):
        return np.stack([2 * X[:, 0] / self.a ** 2, 2 * X[:, 1] / self.b ** 2], axis=1)

    def sample(self, n, rng):
        th = rng.uniform(0.0, 2 * np.pi, size=n)
        return np.stack([self.a * np.cos(th), self.b * np.sin(th)], axis=1)


@dataclass(frozen=True)
class Ellipsoid:
    a: float
    b: float
    c: float

    kind = "ellipsoid"
    d = 3

    @property
    def axes(self):
        return np.array([self.a, self.b, self.c])

    def psi(self, X):
        return np.sum((X / self.axes) ** 2, axis=1) - 1.0

    def grad_psi(self, X):
        return 2 * X / self.axes ** 2

    def sample(self, n, rng):
        return sphere_directions(n, 3, rng) * self.axes


@dataclass(frozen=True)
class PolarStarInterface:
    curve: PolarCurve

    kind = "polar_star"
    d = 2

    def psi(self, X):
        return self.curve.psi(X)

    def grad_psi(self, X):
        return self.curve.grad_psi(X)

    def sample(self, n, rng):
        return self.curve.points(rng.uniform(0.0, 2 * np.pi, size=n))


@dataclass(frozen=True)
class Hypersphere:
    radius: float
    dim: int
    center: Optional[tuple] = None

    kind = "hypersphere"

    @property
    def d(self) -> int:
        return self.dim

    def _c(self):
        return np.zeros(self.dim) if self.center is None else np.asarray(self.center, float)

    def psi(self, X):
        return np.linalg.norm(X - self._c(), axis=1) - self.radius

    def grad_psi(self, X):
        Y = X - self._c()
        return Y / np.linalg.norm(Y, axis=1, keepdims=True)

    def sample(self, n, rng):
        if self.dim == 1:
            u = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)[:, None]
        else:
            u = sphere_directions(n, self.dim, rng)
        return self._c() + self.radius * u


@dataclass(frozen=True)
class Hyperplane:
    """psi = normal . x - offset; the inner region is the side against the normal."""

    normal: tuple
    offset: float

    kind = "hyperplane"

    def __post_init__(self):
        if not np.isclose(np.linalg.norm(self.normal), 1.0, rtol=0, atol=1e-12):
            raise ValueError("hyperplane normal must be a unit vector")

    @property
    def d(self) -> int:
        return len(self.normal)

    def psi(self, X):
        return X @ np.asarray(self.normal, float) - self.offset

    def grad_psi(self, X):
        return np.broadcast_to(np.asarray(self.normal, float), X.shape).copy()

    def sample(self, n, rng):
        if self.d != 1:
            raise ValueError("hyperplane sampling is only defined for d = 1 (a single point)")
        return np.full((n, 1), self.offset * self.normal[0])


# -- geometry -----------------------------------------------------------------

@dataclass(frozen=True)
class LevelSetGeometry:
    domain: object
    interface: object

    def __post_init__(self):
        if self.domain.d != self.interface.d:
            raise ValueError("domain and interface dimensions differ")

    @property
    def d(self) -> int:
        return self.domain.d

    def psi(self, X):
        return self.interface.psi(np.atleast_2d(np.asarray(X, float)))

    def normals(self, X):
        g = self.interface.grad_psi(X)
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def check_interface_inside(self, n: int = 1000, seed: int = 0) -> bool:
        pts = self.interface.sample(n, _rng(seed))
        inside = self.domain.contains(pts, tol=0.0) & (self.domain.boundary_residual(pts) > 0)
        return bool(np.all(inside))


def _as_batch(geom, x):
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1 and (X.size == geom.d)
    if X.ndim == 0 or single:
        X = X.reshape(1, geom.d)
    elif X.ndim == 1 and geom.d == 1:
        X = X[:, None]
    return X, single


def classify(geom: LevelSetGeometry, x):
    """Region label: -1 where psi <= 0 (inner region, interface included), +1 elsewhere."""
    X, single = _as_batch(geom, x)
    if X.shape[1] != geom.d:
        raise ValueError(f"point dimension {X.shape[1]} does not match geometry d={geom.d}")
    if not np.all(geom.domain.contains(X)):
        raise ValueError("point(s) outside the domain")
    z = np.where(geom.psi(X) <= 0.0, INSIDE, OUTSIDE)
    return int(z[0]) if single else z


@dataclass
class CollocationSet:
    interior_x: np.ndarray
    interior_z: np.ndarray
    boundary_x: np.ndarray
    interface_x: np.ndarray
    interface_n: Optional[np.ndarray] = None

    @property
    def M(self) -> int:
        return len(self.interior_x)

    @property
    def M_b(self) -> int:
        return len(self.boundary_x)

    @property
    def M_gamma(self) -> int:
        return len(self.interface_x)

    def check(self, geom: LevelSetGeometry, eps: float = 1e-6) -> dict:
        """Evaluate the set's invariants; returns a dict of named booleans."""
        labels = classify(geom, self.interior_x)
        n = self.interface_n
        checks = {
            "labels": bool(np.all(labels == self.interior_z)),
            "boundary": bool(np.all(geom.domain.boundary_residual(self.boundary_x) <= 1e-12)),
            "interface_on_gamma": bool(np.all(np.abs(geom.psi(self.interface_x)) <= 1e-10)),
        }
        if n is None:
            checks["normals"] = False
        else:
            unit = np.all(np.abs(np.linalg.norm(n, axis=1) - 1.0) <= 1e-12)
            outward = np.all(geom.psi(self.interface_x + eps * n) > 0)
            checks["normals"] = bool(unit and outward)
        return checks

    def csv_rows(self):
        """Header and rows: role, coordinates, z label (interior) or normal (interface)."""
        d = self.interior_x.shape[1]
        header = ["role", *[f"x{i + 1}" for i in range(d)], "z", *[f"n{i + 1}" for i in range(d)]]
        blank = [""] * d
        rows = []
        for x, z in zip(self.interior_x, self.interior_z):
            rows.append(["interior", *map(repr, x.tolist()), int(z), *blank])
        for x in self.boundary_x:
            rows.append(["boundary", *map(repr, x.tolist()), "", *blank])
        normals = self.interface_n if self.interface_n is not None else [None] * self.M_gamma
        for x, n in zip(self.interface_x, normals):
            nn = blank if n is None else list(map(repr, n.tolist()))
            rows.append(["interface", *map(repr, x.tolist()), "", *nn])
        return header, rows

    def write_csv(self, path) -> None:
        header, rows = self.csv_rows()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


def sample_interior(geom: LevelSetGeometry, M: int, dist: str = "random", seed=0):
    """Interior points and their region labels."""
    _check_dist(dist)
    if M < 1:
        raise ValueError("M must be positive")
    X = geom.domain.sample_interior(M, dist, _rng(seed))
    return X, classify(geom, X)


def sample_boundary(geom: LevelSetGeometry, M_b: int, dist: str = "random", seed=0):
    _check_dist(dist)
    if M_b < 1:
        raise ValueError("M_b must be positive")
    return geom.domain.sample_boundary(M_b, dist, _rng(seed))


def sample_interface(geom: LevelSetGeometry, M_gamma: int, seed=0):
    """Random interface points with unit normals pointing from the inner to the outer region."""
    if M_gamma < 1:
        raise ValueError("M_gamma must be positive")
    X = geom.interface.sample(M_gamma, _rng(seed))
    return X, geom.normals(X)


def sample_collocation(geom: LevelSetGeometry, M: int, M_b: int, M_gamma: int,
                       dist: str = "random", seed: int = 0) -> CollocationSet:
    # independent streams so changing one count leaves the other roles untouched
    s_int, s_bd, s_if = np.random.SeedSequence(seed).spawn(3)
    X, z = sample_interior(geom, M, dist, np.random.default_rng(s_int))
    Xb = sample_boundary(geom, M_b, dist, np.random.default_rng(s_bd))
    Xg, n = sample_interface(geom, M_gamma, np.random.default_rng(s_if))
    return CollocationSet(X, z, Xb, Xg, n)


def sample_test_points(geom: LevelSetGeometry, n: int, seed=0) -> np.ndarray:
    """Uniform random points over the whole domain."""
    return geom.domain.sample_interior(n, "random", _rng(seed))
