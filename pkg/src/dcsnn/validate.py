"""Self-checks run by ``dcsnn validate``.

Each check compares a production code path with an independent route
(finite differences, a dense solve, direct geometric tests) and returns
``(name, passed, detail)``.
"""
from __future__ import annotations

import numpy as np

from . import network as nw
from . import problems as P
from .optimizer import LMConfig, lm_step, train


def central_diff(f, x, h):
    x = np.asarray(x, dtype=float)
    out = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        out.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(out, axis=-1)


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def check_param_count(draws=20, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(draws):
        d, N = int(rng.integers(1, 8)), int(rng.integers(1, 60))
        if nw.init_params(d, N, 0).flatten().size != (d + 3) * N + 1:
            return "parameter count", False, f"d={d} N={N}"
    return "parameter count", True, f"{draws} draws"


def check_spatial_derivatives(draws=100, seed=0):
    rng = np.random.default_rng(seed)
    worst_g = worst_l = 0.0
    for _ in range(draws):
        d, N = int(rng.integers(1, 5)), int(rng.integers(1, 12))
        prm = nw.init_params(d, N, int(rng.integers(1 << 30)))
        x, z = rng.uniform(-1, 1, d), float(rng.choice([-1.0, 1.0]))
        u = np.append(x, z)
        g_fd = central_diff(lambda v: nw.forward(prm, v[:d], v[d]), u, 1e-6)
        worst_g = max(worst_g, _rel(nw.spatial_gradient(prm, x, z), g_fd))
        h = 1e-4
        f0 = nw.forward(prm, x, z)
        lap_fd = sum((nw.forward(prm, x + h * e, z) - 2 * f0 + nw.forward(prm, x - h * e, z)) / h ** 2
                     for e in np.eye(d))
        lap = nw.spatial_laplacian(prm, x, z)
        # h = 1e-4 second differences carry ~1e-7 roundoff, so small Laplacians are judged absolutely
        worst_l = max(worst_l, abs(lap - lap_fd) / max(abs(lap_fd), 1.0))
    ok = worst_g < 1e-6 and worst_l < 1e-5
    return "spatial derivatives vs finite differences", ok, f"grad {worst_g:.1e}, laplacian {worst_l:.1e}"


def check_param_jacobian(draws=20, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        d, N = int(rng.integers(1, 4)), int(rng.integers(1, 8))
        prm = nw.init_params(d, N, int(rng.integers(1 << 30)))
        X = rng.uniform(-1, 1, (5, d))
        z = rng.choice([-1.0, 1.0], 5)
        n = rng.standard_normal((5, d))
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        quantities = {
            "value": lambda p: nw.forward(p, X, z),
            "laplacian": lambda p: nw.spatial_laplacian(p, X, z),
            "normal_derivative": lambda p: nw.normal_derivative(p, X, z, n),
        }
        flat = prm.flatten()
        for which, q in quantities.items():
            J = nw.param_jacobian(prm, X, z, which, n)
            J_fd = central_diff(lambda f: q(nw.ShallowNetParams.from_flat(d, N, f)), flat, 1e-6)
            worst = max(worst, _rel(J, J_fd))
    return "parameter Jacobian vs finite differences", worst < 1e-5, f"max rel {worst:.1e}"


def check_lm_step(draws=20, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        J, r, mu = rng.standard_normal((8, 5)), rng.standard_normal(8), float(rng.uniform(0.01, 2))
        dense = np.linalg.solve(J.T @ J + mu * np.eye(5), J.T @ r)
        worst = max(worst, _rel(lm_step(J, r, mu), dense))
    return "LM step vs normal equations", worst < 1e-10, f"max rel {worst:.1e}"


def _direct_loss(prm, problem, colloc):
    """Mean-squared interface loss written out term by term from network evaluations."""
    Xi, zi, Xb, Xg, n = (colloc.interior_x, colloc.interior_z, colloc.boundary_x,
                         colloc.interface_x, colloc.interface_n)
    interior = np.mean((nw.spatial_laplacian(prm, Xi, zi) - problem.rhs(Xi, zi)) ** 2)
    boundary = np.mean((nw.forward(prm, Xb, np.ones(len(Xb))) - problem.boundary(Xb)) ** 2)
    up, dn = np.ones(len(Xg)), -np.ones(len(Xg))
    jump = np.mean((nw.forward(prm, Xg, up) - nw.forward(prm, Xg, dn) - problem.jump_value(Xg)) ** 2)
    flux = np.mean((problem.beta_plus * nw.normal_derivative(prm, Xg, up, n)
                    - problem.beta_minus * nw.normal_derivative(prm, Xg, dn, n)
                    - problem.jump_flux(Xg, n)) ** 2)
    return interior + problem.alpha_b * boundary + problem.alpha_gamma * (jump + flux)


def check_loss_decomposition(draws=5, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in P.PRESETS:
        pr = P.preset(name)
        if pr.is_fit:
            continue
        colloc = pr.collocation()
        for _ in range(draws):
            N = int(rng.integers(1, 12))
            prm = nw.init_params(pr.d, N, int(rng.integers(1 << 30)))
            r = P.pde_residuals(prm, pr.problem, colloc)
            ref = _direct_loss(prm, pr.problem, colloc)
            parts = sum(P.loss_terms(prm, pr.problem, colloc).values())
            worst = max(worst, abs(r @ r - ref) / ref, abs(parts - ref) / ref)
    return "loss decomposition identity", worst <= 1e-12, f"max rel {worst:.1e}"


def check_presets(iters=30):
    lines = []
    for name in P.PRESETS:
        pr = P.preset(name)
        N = pr.neurons[0]
        model = pr.residual_model(N)
        rep = train(model, nw.init_params(pr.d, N, 0).flatten(), LMConfig(max_iters=iters, loss_tol=1e-300))
        hist = np.array(rep.loss_history)
        acc = np.array(rep.accepted)
        mono = bool(np.all(np.diff(hist[acc]) < 0))
        lines.append((f"{name}: accepted-step monotonicity", mono, f"{int(acc[1:].sum())} accepted"))
        if pr.is_fit:
            continue
        colloc = model.colloc
        chk = colloc.check(pr.problem.geom)
        lines.append((f"{name}: collocation invariants", all(chk.values()), str(chk)))
        r = P.pde_residuals(pr.problem.exact, pr.problem, colloc)
        res = float(np.max(np.abs(r)))
        lines.append((f"{name}: manufactured residual", res <= 1e-10, f"max {res:.1e}"))
    return lines


def run_all(verbose=True) -> bool:
    results = [check_param_count(), check_spatial_derivatives(), check_param_jacobian(),
               check_lm_step(), check_loss_decomposition()]
    results += check_presets()
    for name, ok, detail in results:
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all(ok for _, ok, _ in results)
