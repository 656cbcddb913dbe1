"""Full-batch Levenberg-Marquardt with an SVD-based damped step."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

logger = logging.getLogger(__name__)

STALL_REJECTIONS = 25


class NumericalError(ArithmeticError):
    pass


class ResidualModel(Protocol):
    """Residual vector r(p) and its Jacobian dr/dp; the loss is ||r||^2."""

    def residuals(self, p: np.ndarray) -> np.ndarray: ...

    def jacobian(self, p: np.ndarray) -> np.ndarray: ...


@dataclass
class LMConfig:
    mu0: float = 1e3
    mu_up: float = 3.0
    mu_down: float = 1.0 / 3.0
    mu_min: float = 1e-12
    mu_max: float = 1e12
    max_iters: int = 2000
    loss_tol: float = 1e-10

    def __post_init__(self):
        if not (0 < self.mu_min <= self.mu0 <= self.mu_max):
            raise ValueError("need 0 < mu_min <= mu0 <= mu_max")
        if self.mu_up <= 1:
            raise ValueError("mu_up must exceed 1")
        if not (0 < self.mu_down < 1):
            raise ValueError("mu_down must lie in (0, 1)")
        if self.loss_tol <= 0:
            raise ValueError("loss_tol must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass
class TrainReport:
    final_params: np.ndarray
    loss_history: list = field(default_factory=list)
    mu_history: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    iterations: int = 0
    stop_reason: str = "max_iters"
    message: str = ""

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1]

    @property
    def failed(self) -> bool:
        return self.stop_reason == "nonfinite"

    def to_json(self) -> dict:
        d = asdict(self)
        d["final_params"] = np.asarray(self.final_params).tolist()
        d["final_loss"] = self.final_loss
        return d

    def write_loss_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "loss"])
            for i, loss in enumerate(self.loss_history):
                w.writerow([i, repr(float(loss))])

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalError("non-finite entries in Jacobian or residual")


def _svd_step(U, s, Vt, Utr, mu):
    return Vt.T @ (s / (s * s + mu) * Utr)


def lm_step(J: np.ndarray, r: np.ndarray, mu: float) -> np.ndarray:
    """Solve (J^T J + mu I) dp = J^T r through the reduced SVD of J."""
    if mu <= 0:
        raise ValueError("damping mu must be positive")
    J = np.atleast_2d(np.asarray(J, dtype=float))
    r = np.asarray(r, dtype=float).reshape(-1)
    if J.shape[0] != r.size or r.size < 1:
        raise ValueError(f"shape mismatch: J {J.shape}, r {r.shape}")
    _check_finite(J, r)
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    return _svd_step(U, s, Vt, U.T @ r, mu)


def train(model: ResidualModel, p0, cfg: Optional[LMConfig] = None,
          callback: Optional[Callable[[int, np.ndarray], None]] = None) -> TrainReport:
    """Minimise ||r(p)||^2 from ``p0``.

    One iteration evaluates one candidate step.  Accepted steps shrink the
    damping, rejected ones grow it and retry from the same point, reusing the
    SVD of the Jacobian there.  ``callback(iteration, p)`` is invoked after
    every iteration with the current (accepted) parameters.
    """
    cfg = cfg or LMConfig()
    p = np.array(p0, dtype=float)
    mu = cfg.mu0

    r = np.asarray(model.residuals(p), dtype=float)
    loss = float(r @ r)
    report = TrainReport(final_params=p.copy(), loss_history=[loss], mu_history=[mu], accepted=[True])
    if not math.isfinite(loss):
        report.stop_reason = "nonfinite"
        report.message = "initial loss is not finite"
        return report
    if loss <= cfg.loss_tol:
        report.stop_reason = "tolerance"
        return report

    svd = None
    rejections = 0
    for it in range(1, cfg.max_iters + 1):
        if svd is None:
            J = np.asarray(model.jacobian(p), dtype=float)
            if J.shape != (r.size, p.size):
                raise ValueError(f"jacobian shape {J.shape} != {(r.size, p.size)}")
            try:
                _check_finite(J, r)
            except NumericalError as exc:
                report.stop_reason, report.message = "nonfinite", str(exc)
                break
            U, s, Vt = np.linalg.svd(J, full_matrices=False)
            svd = (U, s, Vt, U.T @ r)

        cand = p - _svd_step(*svd, mu)
        r_new = np.asarray(model.residuals(cand), dtype=float)
        loss_new = float(r_new @ r_new)

        ok = math.isfinite(loss_new) and loss_new < loss
        if ok:
            p, r, loss = cand, r_new, loss_new
            mu = max(mu * cfg.mu_down, cfg.mu_min)
            svd = None
            rejections = 0
        else:
            mu = min(mu * cfg.mu_up, cfg.mu_max)
            rejections = rejections + 1 if mu >= cfg.mu_max else 0

        report.loss_history.append(loss)
        report.mu_history.append(mu)
        report.accepted.append(ok)
        report.iterations = it
        if callback is not None:
            callback(it, p)

        if loss <= cfg.loss_tol:
            report.stop_reason = "tolerance"
            break
        if rejections >= STALL_REJECTIONS:
            report.stop_reason = "stall"
            break
    else:
        report.stop_reason = "max_iters"

    report.final_params = p.copy()
    logger.debug("LM stop=%s iters=%d loss=%.3e", report.stop_reason, report.iterations, loss)
    return report
