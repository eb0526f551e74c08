"""Acceptance suite: every exit criterion at its stated tolerance and budget.

Each test prints one PASS/FAIL line (run with `pytest -s` to see them all);
a FAIL line is always accompanied by an assertion failure.
"""

import math
import time
from fractions import Fraction

import numpy as np

from iterlab import cycle, icl, phop, shortcut


def _report(name: str, ok: bool, elapsed: float, budget: float, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'}  {name}  [{elapsed:.2f}s / {budget:.0f}s budget]"
    if detail and not ok:
        line += f"  ({detail})"
    print(line)
    assert ok, f"{name}: {detail}"
    assert elapsed < budget, f"{name}: exceeded {budget}s budget ({elapsed:.2f}s)"


def test_cycle_uniqueness_window():
    """n=5, q=0: exact argmin over 5^5 iterates matches the gcd prediction for k in [4, 44]."""
    t0 = time.time()
    inst = cycle.CycleInstance(5, 0)
    target = inst.z
    skip = cycle.skip_one_map(inst)
    ok, detail = True, ""
    for k in range(4, 45):
        unique_pred = math.gcd(k, 5) == 1 and math.gcd(k, 4) > 1
        pair_pred = math.gcd(k, 5) == 1 and math.gcd(k, 4) == 1
        if not (unique_pred or pair_pred):
            continue
        got = set(cycle.brute_force_erm(inst, k).minimizers)
        want = {target} if unique_pred else {target, skip}
        if got != want:
            ok, detail = False, f"k={k}: {sorted(g.table for g in got)}"
            break
    _report("cycle uniqueness over k in [4,44] (exhaustive 5^5 per k)", ok, time.time() - t0, 10.0, detail)


def test_cycle_unconstrained_class_admits_maximally_wrong_fit():
    """k=1: some zero-training-loss minimizer has held-out loss 1."""
    t0 = time.time()
    rep = cycle.brute_force_erm(cycle.CycleInstance(5, 0), 1)
    ok = rep.min_id_loss == 0 and 1 in rep.ood_loss_per_minimizer.values()
    _report("k=1 admits a perfectly-fitting, maximally-wrong minimizer", ok, time.time() - t0, 1.0)


def test_density_and_prime_search():
    """Exponent density over one full period beats 0.30; prime search meets the 0.25 budget.

    Exact integer arithmetic throughout.  The enumerated one-period density
    at n=5 is 8/20 (the eight even non-multiples-of-5 in [4, 23]); it clears
    the 1 - 1/5 - phi(4)/4 = 0.30 bound.
    """
    t0 = time.time()
    rep = cycle.good_k_density(5, 4 + 20 - 1)
    scan = [k for k in range(4, 24) if math.gcd(k, 5) == 1 and math.gcd(k, 4) > 1]
    density_ok = (
        rep.members == tuple(scan)
        and rep.empirical_density == Fraction(len(scan), 20)
        and rep.empirical_density >= Fraction(3, 10) == rep.predicted_lower_bound
    )
    n = cycle.choose_prime_n(0.25)
    bound = Fraction(1, n) + Fraction(cycle.totient(n - 1), n - 1)
    prime_ok = cycle.is_prime(n) and bound < Fraction(1, 4) and (n - 1) % 2310 == 0
    _report(
        "exponent density >= bound; prime search meets the 0.25 budget",
        density_ok and prime_ok,
        time.time() - t0,
        5.0,
        f"density={rep.empirical_density}, n={n}, bound={float(bound):.4f}",
    )


def test_icl_path_equivalence():
    """Attention rollout, moment recursion, and closed form agree to 1e-9 on 200 draws."""
    t0 = time.time()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 9))
        n = int(rng.integers(1, 65))
        k = int(rng.integers(0, 13))
        task = icl.isotropic_task(float(rng.uniform(0.2, 2.0)), rng.standard_normal(d))
        ds = icl.sample_dataset(task, n, rng)
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        params = icl.AttnParams(q, 0.4 * rng.standard_normal(d), 0.4 * rng.standard_normal(d))
        s_hat, u_hat = icl.empirical_moments(ds)
        rec = icl.moment_recursion(s_hat, u_hat, params, k)
        closed = icl.closed_form_finite(s_hat, u_hat, params, k)
        prompt = icl.build_prompt(ds)
        for _ in range(k):
            prompt = icl.attn_step(prompt, params)
        roll = icl.extract(prompt)
        worst = max(worst, float(np.abs(rec - closed).max()), float(np.abs(roll - rec).max()))
    _report(
        "three-path equivalence on 200 random instances (max dev < 1e-9)",
        worst < 1e-9,
        time.time() - t0,
        10.0,
        f"worst={worst:.3g}",
    )


def test_icl_exact_loss_claims():
    """Minimizer fits exactly; both OOD routes agree; OOD strictly falls; GD distance closed form."""
    t0 = time.time()
    rng = np.random.default_rng(7)
    ok, detail = True, ""
    done = 0
    while done < 50 and ok:
        g1, g2 = sorted(rng.uniform(0.3, 3.0, size=2))
        if g2 - g1 < 0.05:
            continue
        fam = icl.TwoPointFamily(float(g1), float(g2))
        gq = float(rng.uniform(0.02, g1 + g2 - 0.02))
        if min(abs(gq - g1), abs(gq - g2)) < 0.02:
            continue
        d = int(rng.integers(1, 5))
        ratio = fam.half_gap / fam.midpoint
        prev = None
        for k in range(2, 41, 2):
            params = icl.id_minimizer_params(fam, k, d)
            fit = icl.id_loss(params, fam, k)
            if fit >= 1e-10:
                ok, detail = False, f"id_loss={fit:.3g} at k={k}"
                break
            formula = icl.ood_loss_formula(fam, gq, k, d)
            via_params = icl.ood_loss_of_params(params, gq, k)
            if abs(formula - via_params) >= 1e-10 * max(1.0, formula):
                ok, detail = False, f"ood mismatch {formula} vs {via_params}"
                break
            if prev is not None and formula >= prev:
                ok, detail = False, f"ood not strictly decreasing at k={k}"
                break
            prev = formula
            dist = icl.dist_to_gd(params).value
            if abs(dist - d * ratio ** (2 * k)) >= 1e-12:
                ok, detail = False, f"dist {dist} != {d * ratio ** (2 * k)}"
                break
        done += 1
    _report("exact ID fit, OOD agreement + monotonicity, GD distance", ok, time.time() - t0, 10.0, detail)


def test_shortcut_reference_example():
    """The reference instance: ID <= 0.006 for all k; OOD >= 0.81 at k=1, <= 0.056 at k=8; gain >= 0.754."""
    t0 = time.time()
    reports = {k: shortcut.verify_sandwich(shortcut.reference_config(k)) for k in range(1, 13)}
    id_ok = all(r.id_loss <= 0.006 for r in reports.values())
    k1_ok = reports[1].ood_loss >= reports[1].lower == reports[1].epsilon_k >= 0.81 - 1e-9
    upper8 = reports[8].upper
    k8_ok = reports[8].ood_loss <= upper8 <= 0.056 and f"{upper8:.2g}" == "0.056"
    gain_ok = reports[1].ood_loss - reports[8].ood_loss >= 0.754
    _report(
        "reference shortcut instance reproduces 0.81 / 0.056 / 0.006 and the 0.754 gain",
        id_ok and k1_ok and k8_ok and gain_ok,
        time.time() - t0,
        5.0,
        f"upper8={upper8:.4g} (3sf {float(f'{upper8:.3g}')})",
    )


def test_shortcut_oracle_equivalence():
    """Per-coordinate solver matches the joint grid oracle within documented slack, 20 configs."""
    t0 = time.time()
    rng = np.random.default_rng(99)
    ok, detail = True, ""
    for i in range(20):
        p = int(rng.integers(1, 4))
        cfg = shortcut.ShortcutConfig(
            p,
            tuple(float(t) for t in rng.uniform(0.0, 2.5, size=p)),
            float(rng.uniform(1.05, 2.0)),
            float(10.0 ** rng.uniform(-5, -1)),
            int(rng.integers(1, 5)),
        )
        weights, values, _ = shortcut.solve_erm(cfg)
        solver_obj = shortcut.objective_value(weights, values, cfg)
        _, _, oracle_obj = shortcut.brute_force_oracle(cfg)
        slack = shortcut.oracle_grid_slack(cfg)
        if not (solver_obj <= oracle_obj + 1e-9 and oracle_obj <= solver_obj + slack):
            ok, detail = False, f"config {i}: solver {solver_obj}, oracle {oracle_obj}, slack {slack}"
            break
    _report("solver vs joint grid oracle on 20 random configs", ok, time.time() - t0, 30.0, detail)


def test_phop_oracle_recheck():
    """10^4 generated instances all pass findp recomputation of chain, label, and split."""
    t0 = time.time()
    instances = phop.gen_dataset(phop.DatasetSpec(count=10_000, seed=1234))
    ok = True
    for inst in instances:
        final, chain = phop.findp(inst.tokens, inst.p)
        if not (
            final >= 1
            and chain == inst.hop_chain
            and inst.label == inst.tokens[final - 1]
            and phop.split_tag(inst) == inst.split
        ):
            ok = False
            break
    _report("10k hop instances pass oracle recomputation", ok, time.time() - t0, 5.0)
