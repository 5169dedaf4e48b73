"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s``.
"""

import math
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from nusvqr import (Dataset, FitConfig, KernelSpec, ModelKind, SynthSpec, build_eps_dual,
                    build_nu_dual, fit, generate, gram_matrix, solve_qp)
from nusvqr import experiments as ex
from nusvqr.metrics import coverage_error, tube_stats
from oracles import enumerate_svqr_dual

ROOT = Path(__file__).resolve().parents[1]


@contextmanager
def criterion(capsys, number, title, budget_s):
    """Print one verdict line for the criterion, then re-raise any failure."""
    notes = []
    t0 = time.perf_counter()
    try:
        yield notes
        elapsed = time.perf_counter() - t0
        assert elapsed < budget_s, f"runtime {elapsed:.0f}s exceeds {budget_s}s"
    except BaseException as exc:
        line = f"ACCEPTANCE {number} FAIL | {title} | {'; '.join(notes)} | {exc}".replace("\n", " ")
        with capsys.disabled():
            print("\n" + line[:600])
        raise
    with capsys.disabled():
        print(f"\nACCEPTANCE {number} PASS | {title} | {'; '.join(notes)} | "
              f"{time.perf_counter() - t0:.1f}s")


def test_acceptance_1_oracle_equivalence(capsys):
    with criterion(capsys, 1, "dual optima match brute-force enumeration", 60) as notes:
        rng = np.random.default_rng(101)
        worst = 0.0
        for _ in range(50):
            l = int(rng.integers(2, 9))
            tau = float(rng.choice([0.2, 0.5, 0.8]))
            d = Dataset(rng.uniform(-4, 4, l), rng.normal(0, 1, l))
            kernel = KernelSpec(q=float(2.0 ** rng.integers(-2, 3)))
            K = gram_matrix(kernel, d.X)
            nu_cfg = FitConfig("nu", tau, C=float(rng.uniform(0.5, 20)) * l,
                               nu=float(rng.uniform(0.05, 1.0)), kernel=kernel)
            eps_cfg = FitConfig("eps", tau, C=float(rng.uniform(0.1, 10)),
                                eps=float(rng.uniform(0, 1)), kernel=kernel)
            for p in (build_nu_dual(d, nu_cfg, K), build_eps_dual(d, eps_cfg, K)):
                sol = solve_qp(p)
                ref, _ = enumerate_svqr_dual(p.operator.toarray(), p.c, p.lower, p.upper,
                                             p.eq_coeffs, p.eq_rhs, p.ineq_coeffs, p.ineq_rhs)
                worst = max(worst, abs(sol.objective - ref))
        notes.append(f"100 duals, max |objective gap| {worst:.2e}")
        assert worst <= 1e-6


def test_acceptance_2_complementarity(capsys):
    with criterion(capsys, 2, "alpha_i * beta_i = 0 over 200 fits", 300) as notes:
        rng = np.random.default_rng(202)
        worst = 0.0
        raw_overlap = 0.0
        worst_obj = 0.0
        for k in range(200):
            l = (50, 200)[k % 2]
            tau = float(rng.choice([0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9]))
            d = generate(SynthSpec(l=l, sigma=float(rng.choice([0.2, 0.5, 1.0])),
                                   seed=int(rng.integers(2 ** 31))))
            cfg = FitConfig("nu", tau, C=8.0 * l, nu=float(rng.uniform(0.05, 1.0)),
                            kernel=KernelSpec(q=0.125))
            K = gram_matrix(cfg.kernel, d.X)
            m = fit(d, cfg, gram=K)
            worst = max(worst, float(np.max(m.alpha * m.beta)))
            raw_overlap = max(raw_overlap, m.diagnostics["max_overlap_removed"])
            # the reported multipliers must still be an optimal, feasible dual point
            p = build_nu_dual(d, cfg, K)
            z = np.concatenate([m.alpha, m.beta])
            assert np.all(z >= 0) and np.all(z <= p.upper)
            assert abs(p.eq_coeffs @ z) <= 1e-8 and p.ineq_coeffs @ z <= p.ineq_rhs + 1e-8
            worst_obj = max(worst_obj, abs(p.objective(z) - m.diagnostics["dual_objective"]))
        notes.append(f"max alpha*beta {worst:.1e}, objective change from removing overlap "
                     f"{worst_obj:.1e} (largest overlap removed {raw_overlap:.2e})")
        assert worst <= 1e-10
        assert worst_obj <= 1e-8


def _inversions(values, floor=1e-9):
    """Increases along a sequence that should be non-increasing, above a round-off floor."""
    d = np.diff(values)
    return d[d > floor]


def test_acceptance_3_nu_property(capsys):
    with criterion(capsys, 3, "nu bounds errors and SVs; eps decreases in nu", 900) as notes:
        taus = (0.2, 0.5, 0.7, 0.8)
        nus = ex.NU_SWEEP
        l = 200
        rep = ex.experiment1(taus=taus, nus=nus, l=l, trials=10, seed=0)
        recs = rep.records
        bad_err = [r for r in recs if r["frac_errors"] > r["nu"]]
        bad_sv = [r for r in recs if r["frac_sv"] < r["nu"] - 2.0 / l]
        groups = ex._group(recs, "tau", "nu")
        mean = lambda tau, nu, key: float(np.mean([r[key] for r in groups[(tau, nu)]]))
        inv = {tau: _inversions([mean(tau, nu, "eps_recovered") for nu in nus]) for tau in taus}
        eps05 = mean(0.2, 0.05, "eps_recovered")
        eps09 = mean(0.2, 0.9, "eps_recovered")
        err05 = mean(0.2, 0.05, "frac_errors")
        notes.append(f"cells violating errors<=nu: {len(bad_err)}, sv>=nu-2/l: {len(bad_sv)}")
        notes.append("eps inversions per tau: "
                     + ", ".join(f"{t}:{len(v)}(max {v.max() if v.size else 0:.1e})"
                                 for t, v in inv.items()))
        notes.append(f"tau=0.2: eps(0.05)={eps05:.3f}, eps(0.9)={eps09:.4f}, "
                     f"Error(0.05)={err05:.3f}")
        assert not bad_err and not bad_sv
        for v in inv.values():
            assert v.size <= 1 and np.all(v <= 0.005)
        assert eps05 > 0.2 and eps09 < 0.05 and 0.0 <= err05 <= 0.05


def test_acceptance_4_asymptotics(capsys):
    with criterion(capsys, 4, "l=3000: SV and Error fractions near nu, ratio near (1-tau)/tau",
                   1200) as notes:
        l = 3000
        d = generate(SynthSpec(l=l, sigma=0.2, seed=0))
        K = gram_matrix(KernelSpec(q=1.0), d.X)
        ok = True
        for tau in (0.1, 0.3, 0.7):
            m = fit(d, FitConfig("nu", tau, C=float(l), nu=0.8, kernel=KernelSpec(q=1.0)), gram=K)
            s = tube_stats(m, d)
            ideal = (1 - tau) / tau
            notes.append(f"tau={tau}: sv={s.frac_sv:.3f} err={s.frac_errors:.3f} "
                         f"ratio={s.ratio_above_below:.2f} (ideal {ideal:.2f})")
            ok &= abs(s.frac_sv - 0.8) <= 0.02 and abs(s.frac_errors - 0.8) <= 0.02
            ok &= abs(s.ratio_above_below - ideal) <= 0.25 * ideal
        assert ok


def test_acceptance_5_noise_adaptation(capsys):
    with criterion(capsys, 5, "eps and RMSE grow with sigma; eps anchors within 50%", 300) as notes:
        sigmas = (0.1, 0.5, 1.0)
        anchors = (0.02, 0.09, 0.18)
        rep = ex.experiment3(taus=(0.9,), sigmas=sigmas, nu=0.4, l=500, seed=0)
        eps = [r["eps_recovered"] for r in rep.records]
        rmse = [r["rmse"] for r in rep.records]
        notes.append("eps " + "/".join(f"{e:.3f}" for e in eps)
                     + " vs anchors " + "/".join(map(str, anchors)))
        notes.append("rmse " + "/".join(f"{e:.3f}" for e in rmse))
        trend = all(np.diff(eps) > 0) and all(np.diff(rmse) > 0)
        notes.append(f"trend {'holds' if trend else 'broken'}")
        assert trend
        for e, a in zip(eps, anchors):
            assert abs(e - a) <= 0.5 * a, f"eps {e:.3f} outside 50% of anchor {a}"


def test_acceptance_6_nu_eps_equivalence(capsys):
    with criterion(capsys, 6, "nu fit and eps refit at its eps agree on train predictions",
                   120) as notes:
        rng = np.random.default_rng(606)
        l, c_prime = 100, 8.0
        kernel = KernelSpec(q=0.125)
        worst, done, skipped = 0.0, 0, 0
        seed = 0
        while done < 20:
            d = generate(SynthSpec(l=l, sigma=0.2, seed=seed))
            seed += 1
            tau = float(rng.choice([0.2, 0.5, 0.8]))
            K = gram_matrix(kernel, d.X)
            # box matching: the nu box is C*tau/l, the eps box C*tau
            nu_m = fit(d, FitConfig("nu", tau, C=c_prime * l, nu=float(rng.uniform(0.2, 0.8)),
                                    kernel=kernel), gram=K)
            if nu_m.diagnostics["recovery_degenerate"] or nu_m.eps_width <= 1e-8:
                skipped += 1
                continue
            eps_m = fit(d, FitConfig("eps", tau, C=c_prime, eps=nu_m.eps_width, kernel=kernel),
                        gram=K)
            worst = max(worst, float(np.max(np.abs(nu_m.predict(d.X) - eps_m.predict(d.X)))))
            done += 1
        notes.append(f"20 fits ({skipped} degenerate skipped), max |diff| {worst:.1e}")
        assert worst <= 1e-4


def test_acceptance_7_robustness(capsys):
    with criterion(capsys, 7, "noise jump: nu beats fixed eps and widens its tube", 300) as notes:
        rep = ex.experiment4()
        by = {(r["trial"], r["model"]): r for r in rep.records}
        p1e, p1n = by[(0, "eps")], by[(0, "nu")]
        p2e, p2n = by[(1, "eps")], by[(1, "nu")]
        growth = p2n["eps_recovered"] / p1n["eps_recovered"]
        notes.append(f"phase1 rmse eps={p1e['rmse']:.4f} nu={p1n['rmse']:.4f}; phase2 rmse "
                     f"eps={p2e['rmse']:.4f} nu={p2n['rmse']:.4f}; width "
                     f"{p1n['eps_recovered']:.4f}->{p2n['eps_recovered']:.4f} ({growth:.1f}x)")
        assert p1e["rmse"] < 0.02 and p1n["rmse"] < 0.02
        assert p2n["rmse"] < p2e["rmse"]
        assert growth >= 10


def _servo_path():
    return Path(os.environ.get("NUSVQR_SERVO", ROOT / "data" / "servo.data"))


def test_acceptance_8_servo_sparsity(capsys):
    with criterion(capsys, 8, "Servo sparsity decreases in nu and tracks 100(1-nu)", 600) as notes:
        path = _servo_path()
        if not path.is_file():
            notes.append(f"UCI Servo file not found at {path} (set NUSVQR_SERVO)")
            pytest.fail(f"Servo data unavailable at {path}")
        taus = (0.1, 0.5, 0.9)
        nus = ex.SERVO_NU_SWEEP
        summ = ex.servo_summary(ex.experiment5(path, taus=taus, nus=nus, trials=30))
        ok = True
        for tau in taus:
            sp = np.array([summ[(tau, nu)][1] for nu in nus])
            rises = np.diff(sp)[np.diff(sp) > 0]
            checks = {nu: sp[nus.index(nu)] for nu in (0.1, 0.5, 0.9, 1.0)}
            notes.append(f"tau={tau}: " + " ".join(f"{k}:{v:.1f}" for k, v in checks.items()))
            ok &= rises.size <= 1 and np.all(rises <= 2.0)
            ok &= checks[1.0] <= 2.0
            ok &= all(abs(checks[nu] - 100 * (1 - nu)) <= 8 for nu in (0.1, 0.5, 0.9))
        assert ok


def test_acceptance_9_coverage(capsys):
    with criterion(capsys, 9, "tuned fits reach E_tau <= 0.05 on fresh data", 900) as notes:
        taus = (0.1, 0.5, 0.9)
        grid = ex.GridSpec((0.125, 1.0), (1.0, 8.0), (0.5,))
        e = {tau: [] for tau in taus}
        for seed in range(10):
            spec = SynthSpec(l=1000, sigma=0.2, seed=seed)
            train, test = generate(spec), ex.heldout_set(spec)
            for tau in taus:
                best, _ = ex.gridsearch(train, FitConfig("nu", tau), grid, folds=3, seed=seed)
                m = fit(train, best)
                e[tau].append(coverage_error(m.predict(test.X), test.y, tau))
        means = {tau: float(np.mean(v)) for tau, v in e.items()}
        notes.append(" ".join(f"E_{tau}={v:.4f}" for tau, v in means.items()))
        assert all(v <= 0.05 for v in means.values())
