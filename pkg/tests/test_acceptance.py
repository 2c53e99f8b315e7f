"""Acceptance criteria 1-10, each run at its stated tolerance.

Every test prints one PASS/FAIL line and records it for the terminal
summary (see conftest.py).  Run standalone with
    python tests/test_acceptance.py
"""

import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from nhcircles.cohomology import diophantine_report, solve_difference_equation
from nhcircles.errors import InvalidInputError
from nhcircles.fourier import TWO_PI, PeriodicFn
from nhcircles.graph_transform import (LipschitzGraph, basin_probe, find_invariant_graph,
                                       gt1_feasibility, perturbation_bounds)
from nhcircles.model_maps import (GOLDEN, ClosedFormMap, IntegratedMap, SpinOrbitParams,
                                  rho_coordinates, rho_tilde_coordinates)
from nhcircles.normal_form import (chain_forward, chain_inverse, compute_normal_form,
                                   gt2_region_test, pointwise_remainder, recentered_map)
from nhcircles.russmann import (CalphaConfig, curve_residuals, find_c_alpha_frequency,
                                restricted_rotation_number, solve_translated_curve, trace_c_alpha)
from nhcircles.sweep import SweepConfig, run_sweep


def verdict(n, ok, detail, elapsed=None, budget=None):
    if budget is not None:
        detail = f"{detail}; {elapsed:.1f}s of {budget:g}s"
        ok = ok and elapsed < budget
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_c01_closed_form_oracles(rng):
    t0 = time.time()
    worst_rot = worst_tr = worst_gen = 0.0
    n = 0
    while n < 1000:
        eta = rng.uniform(-0.5, 0.5)
        if eta == 0.0:
            continue
        alpha = rng.uniform(0.0, 1.0)
        try:
            p = SpinOrbitParams(eta=eta, nu=alpha + rng.uniform(-0.5, 0.5), eps=0.0, alpha=alpha,
                                dioph_gamma=1e-6)
        except InvalidInputError:
            continue
        th, r = rng.uniform(0.0, TWO_PI), rng.uniform(-1.0, 1.0)
        P = ClosedFormMap(p)
        a, b = P(th, p.r_alpha)
        worst_rot = max(worst_rot, abs(a - th - TWO_PI * alpha))
        worst_tr = max(worst_tr, abs(b - p.r_alpha - p.tau_alpha))
        _, b2 = P(th, r)
        worst_gen = max(worst_gen, abs(b2 - r - (np.exp(-TWO_PI * eta) - 1.0) * (r - p.detuning)))
        n += 1
    ok = max(worst_rot, worst_tr) <= 1e-12 and worst_gen <= 1e-12
    verdict(1, ok, f"rotation err {worst_rot:.1e}, translation err {worst_tr:.1e}",
            time.time() - t0, 1.0)


def test_c02_conformal_symplectic(rng):
    t0 = time.time()
    worst = 0.0
    for eps in (0.0, 1e-3):
        for eta in (0.05, 0.2):
            Q = IntegratedMap(SpinOrbitParams(eta=eta, nu=GOLDEN + 0.05, eps=eps))
            th = rng.uniform(0, TWO_PI, 10)
            r = rng.uniform(-1, 1, 10)
            _, _, J = Q.jacobian(th, r)
            worst = max(worst, float(np.abs(np.linalg.det(J) - np.exp(-TWO_PI * eta)).max()))
    verdict(2, worst <= 1e-9, f"max |det DQ - e^(-2 pi eta)| = {worst:.1e}", time.time() - t0, 10.0)


def _random_g(rng, deg=64):
    c = np.zeros(deg + 2, complex)
    c[0] = rng.normal()
    c[1:deg + 1] = (rng.normal(size=deg) + 1j * rng.normal(size=deg)) / np.arange(1, deg + 1)
    return PeriodicFn(c)


def test_c03_difference_solver(rng):
    t0 = time.time()
    res = mu_err = lin = shift = 0.0
    for _ in range(50):
        g, g2 = _random_g(rng), _random_g(rng)
        eta = rng.uniform(0.01, 0.5)
        b1 = np.exp(-TWO_PI * eta)
        i = int(rng.integers(2, 4))
        c = rng.normal()
        d = rng.uniform(0, TWO_PI)
        for a, b in ((1.0, 1.0), (1.0, b1), (b1 ** i, b1)):
            s = solve_difference_equation(g, a, b, GOLDEN, tol=1e-10)
            res = max(res, s.residual)
            mu_err = max(mu_err, abs(s.mu - g.mean))
            s2 = solve_difference_equation(g2, a, b, GOLDEN)
            s12 = solve_difference_equation(g + g2 * c, a, b, GOLDEN)
            lin = max(lin, float(np.abs(s12.f.values - s.f.values - c * s2.f.values).max()))
            sd = solve_difference_equation(g.shift(d), a, b, GOLDEN)
            shift = max(shift, float(np.abs(sd.f.values - s.f.shift(d).values).max()))
    ok = res <= 1e-10 and mu_err <= 1e-14 and lin <= 1e-12 and shift <= 1e-12
    verdict(3, ok, f"residual {res:.1e}, mu {mu_err:.1e}, linearity {lin:.1e}, shift {shift:.1e}",
            time.time() - t0, 1.0)


def test_c04_diophantine_audit():
    t0 = time.time()
    rep = diophantine_report(GOLDEN, 0.38, 1.0, 10 ** 5)
    ok = rep.argmin_k == 1 and abs(rep.min_value - 0.381966) <= 1e-5
    verdict(4, ok, f"min {rep.min_value:.6f} at k = {rep.argmin_k}", time.time() - t0, 5.0)


def test_c05_nh1_desk_scale():
    t0 = time.time()
    p = SpinOrbitParams(eta=0.2, nu=GOLDEN, eps=1e-3)
    bd = perturbation_bounds(p)
    g1 = gt1_feasibility(p.eta, p.eps, bd.A_f, bd.A_g)
    Q = rho_coordinates(IntegratedMap(p))
    g, rep = find_invariant_graph(Q, LipschitzGraph.constant(0.0, 32), tol=1e-10)
    basin = basin_probe(Q, g, n_samples=1000, n_iters=500, r_box=5.0)
    parts = {
        "gt1_feasible": g1.feasible,
        "invariance": rep.invariance_residual <= 1e-8,
        "basin": basin.fraction == 1.0,
        "normal<1": rep.normal_multiplier < 1.0,
        "dominated": rep.dominated,
    }
    detail = (f"{parts}; A_f={bd.A_f:.1f} A_g={bd.A_g:.1f} residual={rep.invariance_residual:.1e} "
              f"multipliers n={rep.normal_multiplier:.4f} t={rep.tangential_multiplier:.4f} "
              f"basin={basin.fraction}")
    verdict(5, all(parts.values()), detail, time.time() - t0, 60.0)


def test_c06_russmann_exactness():
    t0 = time.time()
    p0 = SpinOrbitParams(eta=0.1, nu=GOLDEN + 0.05, eps=0.0)
    tc0 = solve_translated_curve(rho_tilde_coordinates(IntegratedMap(p0)), GOLDEN, n_modes=16)
    flat = max(tc0.gamma.max_abs(), tc0.h.displacement.max_abs())
    berr = abs(tc0.b - TWO_PI * p0.eta * p0.detuning)
    p = SpinOrbitParams(eta=0.05, nu=GOLDEN, eps=1e-3)
    Q = rho_tilde_coordinates(IntegratedMap(p))
    tc = solve_translated_curve(Q, GOLDEN, n_modes=32)
    ident = max(curve_residuals(Q, tc, factor=8))
    rot = abs(restricted_rotation_number(Q, tc) - TWO_PI * GOLDEN)
    ok = flat <= 1e-12 and berr <= 1e-12 and ident <= 1e-9 and rot <= 1e-9
    verdict(6, ok, f"eps=0: |gamma|,|h-id| {flat:.1e}, b err {berr:.1e}; eps=1e-3: identity "
            f"{ident:.1e}, rotation err {rot:.1e}", time.time() - t0, 10.0)


def test_c07_calpha_scaling():
    t0 = time.time()
    eps = np.array([1e-3, 5e-4, 2.5e-4])
    cfg = CalphaConfig(tol_b=1e-12, curve_tol=1e-12)
    d = np.array([abs(find_c_alpha_frequency(0.05, e, GOLDEN, cfg).nu_star - GOLDEN) for e in eps])
    order = float(np.polyfit(np.log(eps), np.log(d), 1)[0])
    monotone = bool(np.all(np.diff(d) < 0))
    if 1.0 <= order < 1.5:
        detail = f"DEVIATION: empirical order {order:.3f} in [1, 1.5)"
    else:
        detail = f"|nu*-alpha| = {', '.join(f'{x:.3e}' for x in d)}; order {order:.3f}"
    verdict(7, monotone and order >= 1.5, detail, time.time() - t0, 300.0)


def test_c08_normal_form_exactness():
    t0 = time.time()
    eta = 0.1
    e = np.exp(-TWO_PI * eta)
    nf0 = compute_normal_form(SpinOrbitParams(eta=eta, nu=GOLDEN + 0.002, eps=0.0))
    b1 = abs(nf0.beta_bar[0] - e)
    a1 = abs(nf0.alpha_bar[0] - (1 - e) / eta)
    high = max(map(abs, nf0.alpha_bar[1:] + nf0.beta_bar[1:]))
    xi = np.linspace(0, TWO_PI, 65)
    y = np.linspace(-nf0.radius, nf0.radius, 65)
    a, x = chain_inverse(nf0.transform_chain, xi, y)
    bb, yy = chain_forward(nf0.transform_chain, a, x)
    rt = max(float(np.abs(bb - xi).max()), float(np.abs(yy - y).max()))
    # eps = 1e-3 on C_alpha
    pt = find_c_alpha_frequency(eta, 1e-3, GOLDEN, CalphaConfig(tol_b=1e-12))
    nf = compute_normal_form(SpinOrbitParams(eta=eta, nu=pt.nu_star, eps=1e-3))
    var = max(nf.variance.values())
    rem = pointwise_remainder(nf)
    ok = b1 <= 1e-12 and a1 <= 1e-12 and high <= 1e-10 and rt <= 1e-10 and var <= rem
    verdict(8, ok, f"eps=0: beta1 {b1:.1e}, alpha1 {a1:.1e}, higher {high:.1e}, round trip "
            f"{rt:.1e}; eps=1e-3: variance {var:.1e} <= remainder {rem:.1e}",
            time.time() - t0, 30.0)


def test_c09_gt2_contains_calpha():
    t0 = time.time()
    tr = trace_c_alpha(1e-3, GOLDEN, [0.05, 0.1, 0.2, 0.4], CalphaConfig())
    rows = []
    ok = not tr.errors and len(tr.points) == 4
    for pt in tr.points:
        p = SpinOrbitParams(eta=pt.eta, nu=pt.nu_star, eps=1e-3)
        nf = compute_normal_form(p)
        cls = gt2_region_test(p, nf).classification
        _, rep = find_invariant_graph(recentered_map(nf), LipschitzGraph.constant(0.0, 32),
                                      n_orbit=4000)
        rot = abs(rep.rotation_number - TWO_PI * GOLDEN)
        ok &= cls == "inside" and rep.invariance_residual <= 1e-10 and rot < 1e-6
        rows.append(f"eta={pt.eta}:{cls},res={rep.invariance_residual:.0e}")
    verdict(9, ok, "; ".join(rows) or str(tr.errors), time.time() - t0, 600.0)


def test_c10_figure_shape(tmp_path_factory):
    t0 = time.time()
    base = tmp_path_factory.mktemp("sweep")
    kw = dict(eps=1e-3, eta_range=(1e-3, 0.5, 64), nu_range=(GOLDEN - 0.2, GOLDEN + 0.2, 64),
              tolerances={"n_steps": 256, "a_grid": 32}, workers=8, seed=7)
    r = run_sweep(SweepConfig(output_dir=str(base / "a"), **kw), resume=False)
    run_sweep(SweepConfig(output_dir=str(base / "b"), **kw), resume=False)
    same = (base / "a" / "raster.csv").read_bytes() == (base / "b" / "raster.csv").read_bytes()
    shape = r.manifest["shape"]
    ok = shape["gt1_band"] and shape["gt2_cusp"] and shape["calpha_inside"] and same
    verdict(10, ok, f"band={shape['gt1_band']} (eta1={shape['eta1']:.3f}) cusp={shape['gt2_cusp']} "
            f"(lowest eta {shape['cusp_lowest_eta']:.4f}) calpha_inside={shape['calpha_inside']} "
            f"bit-identical={same}; counts {r.manifest['counts']}", time.time() - t0, 1800.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
