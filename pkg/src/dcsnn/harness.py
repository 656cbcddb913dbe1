"""Run orchestration: configs, single runs, sweeps and their on-disk outputs."""
from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from . import problems as P
from .geometry import sample_test_points
from .network import ShallowNetParams, init_params, num_params
from .optimizer import LMConfig, train

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("preset", "N", "N_p", "distribution", "l_inf", "l2", "rel_l2",
                 "final_loss", "iterations", "stop_reason", "seconds", "status")


@dataclass
class RunConfig:
    preset: str = "ex1"
    neurons: Optional[int] = None
    dist: Optional[str] = None
    init_seed: Optional[int] = None
    sample_seed: Optional[int] = None
    test_seed: Optional[int] = None
    lm: dict = field(default_factory=dict)
    out: Optional[str] = None
    n_test: Optional[int] = None
    error_every: int = 10

    def __post_init__(self):
        if self.preset not in P.PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {P.PRESETS}")
        unknown = set(self.lm) - {f.name for f in dataclasses.fields(LMConfig)}
        if unknown:
            raise ValueError(f"unknown LM settings: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - names
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    def resolved(self) -> "RunConfig":
        """Fill every unset field from the preset defaults so the record is explicit."""
        pr = P.preset(self.preset)
        lm = {"loss_tol": pr.loss_tol, "max_iters": pr.max_iters, **self.lm}
        return dataclasses.replace(
            self,
            neurons=self.neurons or pr.neurons[0],
            dist=self.dist or pr.dist,
            init_seed=pr.seeds["init"] if self.init_seed is None else self.init_seed,
            sample_seed=pr.seeds["sample"] if self.sample_seed is None else self.sample_seed,
            test_seed=pr.seeds["test"] if self.test_seed is None else self.test_seed,
            lm=lm,
            n_test=self.n_test or 100 * pr.counts[0],
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunRecord:
    config: dict
    n_params: int
    final_loss: float
    initial_loss: float
    iterations: int
    stop_reason: str
    errors: Optional[dict]
    seconds: float
    version: str = __version__
    status: str = "ok"
    message: str = ""
    lm: dict = field(default_factory=dict)
    params: Optional[dict] = None
    # kept out of record.json; written as CSV
    loss_history: list = field(default_factory=list, repr=False)
    error_history: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("loss_history")
        d.pop("error_history")
        return d


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _points_csv(pr: P.Preset, model) -> str:
    if pr.is_fit:
        d = pr.d
        rows = [["interior", *map(repr, x.tolist()), int(z), repr(float(t))]
                for x, z, t in zip(model.X, model.z, model.target)]
        return _csv_text(["role", *[f"x{i + 1}" for i in range(d)], "z", "target"], rows)
    return _csv_text(*model.colloc.csv_rows())


def _status(stop_reason: str) -> str:
    # only the tolerance and the iteration cap count as a clean finish
    return {"tolerance": "ok", "max_iters": "ok", "stall": "stalled"}.get(stop_reason, "failed")


def run(config: RunConfig) -> RunRecord:
    """Sample training points, initialise, train, measure testing error, write outputs."""
    cfg = config.resolved()
    pr = P.preset(cfg.preset)
    N, d = cfg.neurons, pr.d
    lm_cfg = LMConfig(**cfg.lm)

    t0 = time.perf_counter()
    model = pr.residual_model(N, cfg.dist, cfg.sample_seed)
    p0 = init_params(d, N, cfg.init_seed).flatten()
    test_x = sample_test_points(pr.problem.geom, cfg.n_test, cfg.test_seed)

    error_history = []

    def errors_at(p):
        return P.evaluate_errors(ShallowNetParams.from_flat(d, N, p), pr.problem,
                                 cfg.n_test, cfg.test_seed, points=test_x)

    def callback(it, p):
        if cfg.error_every and it % cfg.error_every == 0:
            e = errors_at(p)
            error_history.append((it, e.l_inf, e.l2, e.rel_l2))

    if cfg.error_every:
        e = errors_at(p0)
        error_history.append((0, e.l_inf, e.l2, e.rel_l2))
    report = train(model, p0, lm_cfg, callback=callback)
    errors = None if report.failed else errors_at(report.final_params).to_json()
    seconds = time.perf_counter() - t0

    record = RunRecord(
        config=cfg.to_dict(),
        n_params=num_params(d, N),
        final_loss=report.final_loss,
        initial_loss=report.loss_history[0],
        iterations=report.iterations,
        stop_reason=report.stop_reason,
        errors=errors,
        seconds=seconds,
        status=_status(report.stop_reason),
        message=report.message,
        lm=dataclasses.asdict(lm_cfg),
        params=ShallowNetParams.from_flat(d, N, report.final_params).to_json(),
        loss_history=list(report.loss_history),
        error_history=error_history,
    )
    logger.info("%s N=%d %s: loss=%.3e iters=%d (%s) %.1fs", cfg.preset, N, cfg.dist,
                record.final_loss, record.iterations, record.stop_reason, seconds)

    if cfg.out:
        out = Path(cfg.out)
        _atomic_write(out / "record.json", json.dumps(record.to_json(), indent=2))
        _atomic_write(out / "loss_history.csv", _csv_text(
            ["iteration", "loss", "mu", "accepted"],
            [[i, repr(l), repr(m), int(a)] for i, (l, m, a) in
             enumerate(zip(report.loss_history, report.mu_history, report.accepted))]))
        _atomic_write(out / "error_history.csv", _csv_text(
            ["iteration", "l_inf", "l2", "rel_l2"], [[i, repr(a), repr(b), repr(c)] for i, a, b, c in error_history]))
        _atomic_write(out / "points.csv", _points_csv(pr, model))
    return record


def _row(cfg: RunConfig, rec: Optional[RunRecord], exc: Optional[Exception] = None) -> dict:
    cfg = cfg.resolved()
    row = {k: "" for k in SWEEP_COLUMNS}
    row.update(preset=cfg.preset, N=cfg.neurons, N_p=num_params(P.preset(cfg.preset).d, cfg.neurons),
               distribution=cfg.dist)
    if rec is None:
        row.update(status="error", stop_reason=type(exc).__name__)
        return row
    e = rec.errors or {}
    row.update(l_inf=e.get("l_inf", ""), l2=e.get("l2", ""), rel_l2=e.get("rel_l2", ""),
               final_loss=rec.final_loss, iterations=rec.iterations, stop_reason=rec.stop_reason,
               seconds=round(rec.seconds, 3), status=rec.status)
    return row


def _run_row(cfg: RunConfig) -> dict:
    try:
        return _row(cfg, run(cfg))
    except Exception as exc:  # one failed row must not sink the sweep
        logger.exception("sweep row failed: %s", cfg)
        return _row(cfg, None, exc)


def threads() -> int:
    try:
        return max(1, int(os.environ.get("DCSNN_THREADS", "1")))
    except ValueError:
        return 1


def sweep(configs, out: Optional[str] = None) -> list:
    """Run every config and return one table row (dict) per run, in input order."""
    configs = list(configs)
    if not configs:
        raise ValueError("sweep needs at least one config")
    workers = min(threads(), len(configs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_run_row, configs))
    else:
        rows = [_run_row(c) for c in configs]
    if out:
        _atomic_write(Path(out) / "sweep.csv", sweep_csv(rows))
    return rows


def sweep_csv(rows) -> str:
    return _csv_text(SWEEP_COLUMNS, [[r[k] for k in SWEEP_COLUMNS] for r in rows])


def load_sweep(path) -> tuple:
    """Parse a sweep file.

    Either ``{"runs": [config, ...]}`` or ``{"base": config, "grid": {field: [values]}}``
    (grid expands as a Cartesian product, first key outermost).  An optional
    top-level ``"out"`` names the directory for ``sweep.csv``; each run writes
    into ``<out>/<preset>_N<N>_<dist>`` unless it sets its own ``out``.
    """
    data = json.loads(Path(path).read_text())
    out = data.get("out")
    if "runs" in data:
        raw = list(data["runs"])
    else:
        base, grid = data.get("base", {}), data.get("grid", {})
        keys = list(grid)
        raw = [{**base, **dict(zip(keys, vals))} for vals in itertools.product(*(grid[k] for k in keys))]
    configs = []
    for r in raw:
        cfg = RunConfig.from_dict(r)
        if out and not cfg.out:
            res = cfg.resolved()
            cfg = dataclasses.replace(cfg, out=str(Path(out) / f"{res.preset}_N{res.neurons}_{res.dist}"))
        configs.append(cfg)
    return configs, out
