"""Residual models for piecewise function fitting and elliptic interface problems.

Both problem kinds are posed on the augmented input (x, z).  Residual
vectors are scaled by square-root weights so that ``sum(r**2)`` is exactly
the mean-squared loss being minimised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geometry as geo
from .network import ShallowNetParams, num_params, param_jacobian

# -- smooth scalar fields -----------------------------------------------------


class ScalarField:
    """A smooth map on R^d with gradient and Laplacian; X is (m, d)."""

    name = "field"

    def value(self, X):
        raise NotImplementedError

    def gradient(self, X):
        raise NotImplementedError

    def laplacian(self, X):
        raise NotImplementedError


class ProductExp(ScalarField):
    name = "prod_exp"

    def value(self, X):
        return np.exp(np.sum(X, axis=1))

    def gradient(self, X):
        return self.value(X)[:, None] * np.ones_like(X)

    def laplacian(self, X):
        return X.shape[1] * self.value(X)


class ProductSin(ScalarField):
    name = "prod_sin"

    def value(self, X):
        return np.prod(np.sin(X), axis=1)

    def gradient(self, X):
        s, c = np.sin(X), np.cos(X)
        d = X.shape[1]
        G = np.empty_like(X)
        for i in range(d):
            G[:, i] = c[:, i] * np.prod(np.delete(s, i, axis=1), axis=1)
        return G

    def laplacian(self, X):
        return -X.shape[1] * self.value(X)


class RadialExp(ScalarField):
    """exp(|x|^2) in two dimensions."""

    name = "radial_exp"

    def value(self, X):
        return np.exp(np.sum(X * X, axis=1))

    def gradient(self, X):
        return 2 * X * self.value(X)[:, None]

    def laplacian(self, X):
        r2 = np.sum(X * X, axis=1)
        return (4.0 + 4.0 * r2) * np.exp(r2)


class QuarticLog(ScalarField):
    """0.1 |x|^4 - 0.01 log(2 |x|) in two dimensions (log term is harmonic)."""

    name = "quartic_log"

    def value(self, X):
        r2 = np.sum(X * X, axis=1)
        return 0.1 * r2 ** 2 - 0.01 * np.log(2.0 * np.sqrt(r2))

    def gradient(self, X):
        r2 = np.sum(X * X, axis=1)[:, None]
        return 0.4 * r2 * X - 0.01 * X / r2

    def laplacian(self, X):
        return 1.6 * np.sum(X * X, axis=1)


class Trig2Pi(ScalarField):
    """sin(2 pi x) or cos(2 pi x) on the real line."""

    def __init__(self, kind: str):
        if kind not in ("sin", "cos"):
            raise ValueError(kind)
        self.kind = kind
        self.name = f"{kind}_2pi"

    def value(self, X):
        f = np.sin if self.kind == "sin" else np.cos
        return f(2 * np.pi * X[:, 0])

    def gradient(self, X):
        w = 2 * np.pi
        g = w * np.cos(w * X[:, 0]) if self.kind == "sin" else -w * np.sin(w * X[:, 0])
        return g[:, None]

    def laplacian(self, X):
        return -(2 * np.pi) ** 2 * self.value(X)


FIELDS = {
    "prod_exp": ProductExp,
    "prod_sin": ProductSin,
    "radial_exp": RadialExp,
    "quartic_log": QuarticLog,
    "sin_2pi": lambda: Trig2Pi("sin"),
    "cos_2pi": lambda: Trig2Pi("cos"),
}


def _batch(x, d):
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if d == 1 else X[None, :]
    return X


@dataclass(frozen=True)
class PiecewiseField:
    """Two smooth pieces selected by the label z (-1 inner, +1 outer).

    Implements the same value/gradient/laplacian(x, z) interface as the
    network, so an exact solution can stand in for a trained model.
    """

    minus: ScalarField
    plus: ScalarField

    def _pick(self, method, x, z):
        X = np.atleast_2d(np.asarray(x, float))
        Z = np.broadcast_to(np.asarray(z, float), (X.shape[0],))
        a = getattr(self.minus, method)(X)
        b = getattr(self.plus, method)(X)
        mask = Z < 0
        if a.ndim == 2:
            mask = mask[:, None]
        return np.where(mask, a, b)

    def value(self, x, z):
        return self._pick("value", x, z)

    def gradient(self, x, z):
        return self._pick("gradient", x, z)

    def laplacian(self, x, z):
        return self._pick("laplacian", x, z)

    def restricted(self, geom, x):
        """Piecewise function in d dimensions, labelling points by the level set."""
        X = _batch(x, geom.d)
        return self.value(X, geo.classify(geom, X))


# -- problems -----------------------------------------------------------------


@dataclass(frozen=True)
class InterfaceProblem:
    """Poisson-form interface problem: Lap(phi) = rhs per region, jumps v and w on
    the interface, Dirichlet data g on the outer boundary."""

    geom: geo.LevelSetGeometry
    beta_minus: float
    beta_plus: float
    rhs: Callable
    jump_value: Callable
    jump_flux: Callable
    boundary: Callable
    exact: Optional[PiecewiseField] = None
    alpha_b: float = 1.0
    alpha_gamma: float = 1.0

    def __post_init__(self):
        if not (self.beta_minus > 0 and self.beta_plus > 0):
            raise ValueError("diffusion coefficients must be positive")
        if self.alpha_b <= 0 or self.alpha_gamma <= 0:
            raise ValueError("penalty weights must be positive")

    @property
    def d(self) -> int:
        return self.geom.d


def manufacture(geom, exact: PiecewiseField, beta_minus: float, beta_plus: float,
                alpha_b: float = 1.0, alpha_gamma: float = 1.0) -> InterfaceProblem:
    """Derive source, jump and boundary data from a known piecewise solution."""
    def rhs(X, z):
        return exact.laplacian(X, z)

    def jump_value(X):
        return exact.plus.value(X) - exact.minus.value(X)

    def jump_flux(X, n):
        return (beta_plus * np.sum(exact.plus.gradient(X) * n, axis=1)
                - beta_minus * np.sum(exact.minus.gradient(X) * n, axis=1))

    def boundary(X):
        return exact.plus.value(X)

    return InterfaceProblem(geom, beta_minus, beta_plus, rhs, jump_value, jump_flux,
                            boundary, exact, alpha_b, alpha_gamma)


@dataclass(frozen=True)
class FitProblem:
    """Fit a piecewise function from labelled samples (x, z, target)."""

    geom: geo.LevelSetGeometry
    exact: PiecewiseField

    @property
    def d(self) -> int:
        return self.geom.d

    def dataset(self, M: int, seed=0, include_endpoints: bool = True):
        """M random samples over the domain; in 1-D the two endpoints are always included."""
        rng = np.random.default_rng(seed)
        dom = self.geom.domain
        if include_endpoints and self.d == 1:
            if M < 2:
                raise ValueError("need M >= 2 when endpoints are included")
            lo, hi = dom.bounding_box()
            X = np.vstack([lo[None], dom.sample_interior(M - 2, "random", rng), hi[None]])
        else:
            X = dom.sample_interior(M, "random", rng)
        z = geo.classify(self.geom, X)
        return X, z, self.exact.value(X, z)


# -- residuals ----------------------------------------------------------------


def _params(params, d, N):
    if isinstance(params, ShallowNetParams):
        return params
    return ShallowNetParams.from_flat(d, N, params)


def fit_residuals(params, X, z, target):
    """(target - model) / sqrt(M); the squares sum to the mean-squared loss."""
    X = np.asarray(X, float)
    if len(X) == 0:
        raise ValueError("empty dataset")
    return (np.asarray(target, float) - params.value(X, z)) / math.sqrt(len(X))


def fit_jacobian(params: ShallowNetParams, X, z):
    return -param_jacobian(params, X, z, "value") / math.sqrt(len(X))


def _interface_normals(colloc):
    if colloc.interface_n is None:
        raise ValueError("interface points carry no normals")
    return colloc.interface_n


def pde_residuals(approx, problem: InterfaceProblem, colloc: geo.CollocationSet):
    """Stacked residual blocks [interior | boundary | value jump | flux jump].

    ``approx`` is anything with value/gradient/laplacian(x, z): a network or
    an exact piecewise field.
    """
    n = _interface_normals(colloc)
    M, Mb, Mg = colloc.M, colloc.M_b, colloc.M_gamma
    if min(M, Mb, Mg) == 0:
        raise ValueError("every collocation role needs at least one point")
    Xi, zi, Xb, Xg = colloc.interior_x, colloc.interior_z, colloc.boundary_x, colloc.interface_x
    wi = 1.0 / math.sqrt(M)
    wb = math.sqrt(problem.alpha_b / Mb)
    wg = math.sqrt(problem.alpha_gamma / Mg)

    r_int = wi * (approx.laplacian(Xi, zi) - problem.rhs(Xi, zi))
    r_bd = wb * (approx.value(Xb, 1.0) - problem.boundary(Xb))
    r_jump = wg * (approx.value(Xg, 1.0) - approx.value(Xg, -1.0) - problem.jump_value(Xg))
    flux_p = np.sum(approx.gradient(Xg, 1.0) * n, axis=1)
    flux_m = np.sum(approx.gradient(Xg, -1.0) * n, axis=1)
    r_flux = wg * (problem.beta_plus * flux_p - problem.beta_minus * flux_m - problem.jump_flux(Xg, n))
    return np.concatenate([r_int, r_bd, r_jump, r_flux])


def pde_jacobian(params: ShallowNetParams, problem: InterfaceProblem, colloc: geo.CollocationSet):
    n = _interface_normals(colloc)
    M, Mb, Mg = colloc.M, colloc.M_b, colloc.M_gamma
    Xb, Xg = colloc.boundary_x, colloc.interface_x
    wi = 1.0 / math.sqrt(M)
    wb = math.sqrt(problem.alpha_b / Mb)
    wg = math.sqrt(problem.alpha_gamma / Mg)

    J_int = wi * param_jacobian(params, colloc.interior_x, colloc.interior_z, "laplacian")
    J_bd = wb * param_jacobian(params, Xb, 1.0, "value")
    J_jump = wg * (param_jacobian(params, Xg, 1.0, "value") - param_jacobian(params, Xg, -1.0, "value"))
    J_flux = wg * (problem.beta_plus * param_jacobian(params, Xg, 1.0, "normal_derivative", n)
                   - problem.beta_minus * param_jacobian(params, Xg, -1.0, "normal_derivative", n))
    return np.vstack([J_int, J_bd, J_jump, J_flux])


def loss_terms(approx, problem: InterfaceProblem, colloc: geo.CollocationSet) -> dict:
    """The four loss contributions (interior, boundary, value jump, flux jump)."""
    r = pde_residuals(approx, problem, colloc)
    sizes = np.cumsum([colloc.M, colloc.M_b, colloc.M_gamma])
    blocks = np.split(r, sizes)
    names = ("interior", "boundary", "jump", "flux")
    return {k: float(b @ b) for k, b in zip(names, blocks)}


class FitResidualModel:
    def __init__(self, d: int, N: int, X, z, target):
        self.d, self.N = d, N
        self.X, self.z, self.target = np.asarray(X, float), np.asarray(z, float), np.asarray(target, float)

    @property
    def n_params(self) -> int:
        return num_params(self.d, self.N)

    def residuals(self, p):
        return fit_residuals(_params(p, self.d, self.N), self.X, self.z, self.target)

    def jacobian(self, p):
        return fit_jacobian(_params(p, self.d, self.N), self.X, self.z)

    def loss(self, p) -> float:
        r = self.residuals(p)
        return float(r @ r)


class InterfaceResidualModel:
    def __init__(self, problem: InterfaceProblem, colloc: geo.CollocationSet, N: int):
        self.problem, self.colloc = problem, colloc
        self.d, self.N = problem.d, N

    @property
    def n_params(self) -> int:
        return num_params(self.d, self.N)

    def residuals(self, p):
        return pde_residuals(_params(p, self.d, self.N), self.problem, self.colloc)

    def jacobian(self, p):
        return pde_jacobian(_params(p, self.d, self.N), self.problem, self.colloc)

    def loss(self, p) -> float:
        r = self.residuals(p)
        return float(r @ r)


# -- testing error ------------------------------------------------------------


@dataclass
class ErrorReport:
    l_inf: float
    l2: float
    rel_l2: float
    n_test: int
    seed: int

    def to_json(self) -> dict:
        return dict(l_inf=self.l_inf, l2=self.l2, rel_l2=self.rel_l2, n_test=self.n_test, seed=self.seed)


def evaluate_errors(approx, problem, n_test: int, seed: int = 0, points=None) -> ErrorReport:
    """Max-abs, root-mean-square and relative L2 errors at random points of the domain.

    The model is restricted to the physical region of each test point via its label.
    """
    if getattr(problem, "exact", None) is None:
        raise ValueError("problem has no exact solution to compare against")
    if n_test < 1:
        raise ValueError("n_test must be positive")
    X = geo.sample_test_points(problem.geom, n_test, seed) if points is None else points
    z = geo.classify(problem.geom, X)
    exact = problem.exact.value(X, z)
    err = approx.value(X, z) - exact
    l2 = float(np.sqrt(np.mean(err ** 2)))
    norm = float(np.sqrt(np.mean(exact ** 2)))
    return ErrorReport(
        l_inf=float(np.max(np.abs(err))),
        l2=l2,
        rel_l2=l2 / norm if norm > 0 else math.inf,
        n_test=int(len(X)),
        seed=int(seed),
    )


# -- presets ------------------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    name: str
    problem: object  # InterfaceProblem or FitProblem
    counts: tuple  # (M, M_b, M_gamma); fit problems use (M, 0, 0)
    neurons: tuple
    dist: str
    loss_tol: float
    max_iters: int
    seeds: dict = field(default_factory=dict)
    description: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.problem.d

    @property
    def is_fit(self) -> bool:
        return isinstance(self.problem, FitProblem)

    def collocation(self, dist: Optional[str] = None, seed: Optional[int] = None) -> geo.CollocationSet:
        if self.is_fit:
            raise ValueError("fit presets use dataset(), not collocation()")
        M, Mb, Mg = self.counts
        seed = self.seeds.get("sample", 0) if seed is None else seed
        return geo.sample_collocation(self.problem.geom, M, Mb, Mg, dist or self.dist, seed)

    def residual_model(self, N: int, dist: Optional[str] = None, seed: Optional[int] = None):
        seed = self.seeds.get("sample", 0) if seed is None else seed
        if self.is_fit:
            X, z, t = self.problem.dataset(self.counts[0], seed)
            return FitResidualModel(self.d, N, X, z, t)
        return InterfaceResidualModel(self.problem, self.collocation(dist, seed), N)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "d": self.d,
            "counts": {"M": self.counts[0], "M_b": self.counts[1], "M_gamma": self.counts[2]},
            "neurons": list(self.neurons),
            "n_params": {str(N): num_params(self.d, N) for N in self.neurons},
            "dist": self.dist,
            "loss_tol": self.loss_tol,
            "max_iters": self.max_iters,
            "seeds": dict(self.seeds),
            **self.description,
        }


def _eq11(d):
    return PiecewiseField(ProductExp(), ProductSin())


def _build(name: str) -> Preset:
    if name == "fit1d":
        geom = geo.LevelSetGeometry(geo.Hypercube((0.0,), (1.0,)), geo.Hyperplane((1.0,), 0.5))
        exact = PiecewiseField(Trig2Pi("sin"), Trig2Pi("cos"))
        return Preset(name, FitProblem(geom, exact), (100, 0, 0), (5,), "random", 1e-12, 30000,
                      {"init": 4, "sample": 4, "test": 1},
                      {"domain": "interval [0, 1]", "interface": "x = 1/2",
                       "exact": ["sin_2pi", "cos_2pi"]})
    if name == "ex1":
        geom = geo.LevelSetGeometry(geo.Hypercube((-1.0, -1.0), (1.0, 1.0)), geo.Ellipse(0.2, 0.5))
        prob = manufacture(geom, _eq11(2), 1.0, 1e-3)
        return Preset(name, prob, (64, 32, 32), (10, 20), "chebyshev", 1e-12, 10000,
                      {"init": 0, "sample": 0, "test": 1},
                      {"domain": "square [-1,1]^2", "interface": "ellipse a=0.2 b=0.5",
                       "beta": [1.0, 1e-3], "exact": ["prod_exp", "prod_sin"]})
    if name == "ex2":
        curve = geo.PolarCurve(0.5, 1.0 / 7.0, 5, "sin")
        geom = geo.LevelSetGeometry(geo.Hypercube((-1.0, -1.0), (1.0, 1.0)), geo.PolarStarInterface(curve))
        prob = manufacture(geom, PiecewiseField(RadialExp(), QuarticLog()), 10.0, 1.0)
        return Preset(name, prob, (400, 80, 80), (50, 100), "random", 1e-10, 3500,
                      {"init": 0, "sample": 0, "test": 1},
                      {"domain": "square [-1,1]^2", "interface": "polar r = 1/2 + sin(5t)/7",
                       "beta": [10.0, 1.0], "exact": ["radial_exp", "quartic_log"]})
    if name == "ex3":
        dom = geo.PolarStarDomain(geo.PolarCurve(1.0, -0.3, 5, "cos"))
        geom = geo.LevelSetGeometry(dom, geo.PolarStarInterface(geo.PolarCurve(0.4, -0.2, 5, "cos")))
        prob = manufacture(geom, _eq11(2), 1.0, 1e-3)
        return Preset(name, prob, (64, 32, 32), (20,), "random", 1e-12, 10000,
                      {"init": 0, "sample": 0, "test": 1},
                      {"domain": "polar r = 1 - 0.3 cos(5t)", "interface": "polar r = 0.4 - 0.2 cos(5t)",
                       "beta": [1.0, 1e-3], "exact": ["prod_exp", "prod_sin"]})
    if name == "ex4":
        geom = geo.LevelSetGeometry(geo.Hypercube((-1.0,) * 3, (1.0,) * 3), geo.Ellipsoid(0.7, 0.5, 0.3))
        prob = manufacture(geom, _eq11(3), 1.0, 1e-3)
        return Preset(name, prob, (216, 216, 108), (20, 30), "chebyshev", 1e-12, 5000,
                      {"init": 0, "sample": 0, "test": 1},
                      {"domain": "cube [-1,1]^3", "interface": "ellipsoid 0.7 0.5 0.3",
                       "beta": [1.0, 1e-3], "exact": ["prod_exp", "prod_sin"]})
    if name == "ex5":
        geom = geo.LevelSetGeometry(geo.Ball((0.0,) * 6, 0.6), geo.Hypersphere(0.5, 6))
        prob = manufacture(geom, _eq11(6), 1.0, 1e-3)
        return Preset(name, prob, (100, 141, 141), (10, 30, 50), "random", 1e-12, 2000,
                      {"init": 0, "sample": 0, "test": 1},
                      {"domain": "6-ball radius 0.6", "interface": "6-sphere radius 0.5",
                       "beta": [1.0, 1e-3], "exact": ["prod_exp", "prod_sin"]})
    raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")


PRESETS = ("fit1d", "ex1", "ex2", "ex3", "ex4", "ex5")


def preset(name: str) -> Preset:
    return _build(name)
