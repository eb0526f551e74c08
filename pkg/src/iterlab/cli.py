"""Single entry point: every module as a subcommand, deterministic reports.

Exit codes: 0 success, 1 violated invariant / failed verification / data
error, 2 usage error.  Identical (flags, seed) produce byte-identical
output; the default seed comes from ITERLAB_SEED.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, cycle, icl, phop, shortcut
from .errors import InvariantViolation, ParseError, VersionError
from .report import SweepTable, render_sweep_table


def _default_seed() -> int:
    return int(os.environ.get("ITERLAB_SEED", "0"))


def _emit(text: str, out_path) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out_path) -> None:
    _emit(json.dumps(obj, sort_keys=True, indent=2) + "\n", out_path)


def _frac(fr: Fraction) -> str:
    return f"{fr.numerator}/{fr.denominator}"


class Checks:
    """Collects named pass/fail results and prints one line each."""

    def __init__(self):
        self.failed = []

    def record(self, name: str, ok: bool, detail: str = ""):
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail and not ok else ""))
        if not ok:
            self.failed.append(name)

    def exit_code(self) -> int:
        return 0 if not self.failed else 1


# ------------------------------------------------------------------ cycle


def cmd_cycle_verify(args) -> int:
    inst = cycle.CycleInstance(args.n, args.q)
    prediction = cycle.predict_interpolants(inst, args.k)
    report = cycle.brute_force_erm(inst, args.k)
    expected = cycle.predicted_minimizers(inst, args.k)
    matches = None if expected is None else tuple(report.minimizers) == expected
    _emit_json(
        {
            "command": "cycle verify",
            "n": args.n,
            "q": args.q,
            "k": args.k,
            "prediction": prediction.value,
            "min_id_loss": _frac(report.min_id_loss),
            "min_id_loss_float": float(report.min_id_loss),
            "minimizers": [list(m.table) for m in report.minimizers],
            "ood_loss_per_minimizer": [report.ood_loss_per_minimizer[m] for m in report.minimizers],
            "prediction_matches_enumeration": matches,
            "tool_version": __version__,
        },
        args.out,
    )
    return 0 if matches is not False else 1


def cmd_cycle_density(args) -> int:
    rep = cycle.good_k_density(args.n, args.scan_max)
    _emit_json(
        {
            "command": "cycle density",
            "n": rep.n,
            "scan_max": rep.scan_max,
            "member_count": len(rep.members),
            "members_head": list(rep.members[:50]),
            "empirical_density": _frac(rep.empirical_density),
            "empirical_density_float": float(rep.empirical_density),
            "predicted_lower_bound": _frac(rep.predicted_lower_bound),
            "predicted_lower_bound_float": float(rep.predicted_lower_bound),
            "tool_version": __version__,
        },
        args.out,
    )
    return 0


def cmd_cycle_choose_n(args) -> int:
    n = cycle.choose_prime_n(args.epsilon, args.search_cap)
    modulus = cycle.primorial_below_ratio(0.9 * args.epsilon)
    bound = Fraction(1, n) + Fraction(cycle.totient(n - 1), n - 1)
    _emit_json(
        {
            "command": "cycle choose-n",
            "epsilon": args.epsilon,
            "modulus": modulus,
            "n": n,
            "achieved_bound": _frac(bound),
            "achieved_bound_float": float(bound),
            "density_lower_bound_float": 1.0 - float(bound),
            "tool_version": __version__,
        },
        args.out,
    )
    return 0


# -------------------------------------------------------------------- icl


def cmd_icl_sweep(args) -> int:
    fam = icl.TwoPointFamily(args.gamma1, args.gamma2)
    rows = []
    for k in range(2, args.kmax + 1, 2):
        params = icl.id_minimizer_params(fam, k, d=args.d)
        rows.append(
            (
                k,
                icl.id_loss(params, fam, k),
                icl.ood_loss_formula(fam, args.gammaq, k, args.d),
                icl.dist_to_gd(params).value,
            )
        )
    table = SweepTable(
        ["k", "id_loss", "ood_loss", "dist_to_gd"],
        rows,
        {
            "command": "icl sweep",
            "gamma1": args.gamma1,
            "gamma2": args.gamma2,
            "gammaq": args.gammaq,
            "d": args.d,
            "kmax": args.kmax,
            "seed": args.seed,
        },
    )
    _emit(render_sweep_table(table), args.out)
    return 0


def _icl_property_suite(checks: Checks, quick: bool, seed: int) -> None:
    rng = np.random.default_rng(seed)
    n_inst = 50 if quick else 200
    worst = 0.0
    for _ in range(n_inst):
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
    checks.record("icl path equivalence < 1e-9", worst < 1e-9, f"worst={worst:.3g}")

    trials = 10 if quick else 50
    fams = []
    while len(fams) < trials:
        g1, g2 = sorted(rng.uniform(0.3, 3.0, size=2))
        if g2 - g1 >= 0.05:
            fams.append(icl.TwoPointFamily(float(g1), float(g2)))
    zero_ok = all(
        icl.id_loss(icl.id_minimizer_params(f, k, d=2), f, k) < 1e-10
        for f in fams
        for k in range(2, 21, 2)
    )
    checks.record("icl minimizer fits training family exactly", zero_ok)

    mono_ok, dist_ok = True, True
    for f in fams:
        gq = float(rng.uniform(0.02, f.gamma1 + f.gamma2 - 0.02))
        if min(abs(gq - f.gamma1), abs(gq - f.gamma2)) < 0.02:
            continue
        vals = [icl.ood_loss_formula(f, gq, k, 3) for k in range(2, 41, 2)]
        mono_ok &= all(a > b for a, b in zip(vals, vals[1:]))
        ratio = f.half_gap / f.midpoint
        dist_ok &= all(
            abs(icl.dist_to_gd(icl.id_minimizer_params(f, k, 3)).value - 3 * ratio ** (2 * k)) < 1e-12
            for k in range(2, 21, 2)
        )
    checks.record("icl evaluation loss strictly decreasing in k", mono_ok)
    checks.record("icl distance to GD family matches closed form", dist_ok)
    checks.record("icl (-eta I, I) implements the GD step", icl.verify_gd_params(0.1, 30 if quick else 100, seed))


def cmd_icl_verify(args) -> int:
    checks = Checks()
    _icl_property_suite(checks, args.quick, args.seed)
    return checks.exit_code()


# --------------------------------------------------------------- shortcut


def _shortcut_rows(configs) -> list[tuple]:
    rows = []
    for cfg in configs:
        rep = shortcut.verify_sandwich(cfg)
        rows.append(
            (
                cfg.k,
                rep.epsilon_k,
                rep.rho_k,
                rep.delta_k,
                rep.id_loss,
                rep.ood_loss,
                rep.lower,
                rep.upper,
            )
        )
    return rows


SHORTCUT_COLUMNS = ["k", "epsilon_k", "rho_k", "delta_k", "id_loss", "ood_loss", "lower", "upper"]


def cmd_shortcut_sweep(args) -> int:
    theta = tuple(float(t) for t in args.theta.split(","))
    configs = [
        shortcut.ShortcutConfig(args.p, theta, args.tau, args.lam, k)
        for k in range(1, args.kmax + 1)
    ]
    table = SweepTable(
        SHORTCUT_COLUMNS,
        _shortcut_rows(configs),
        {
            "command": "shortcut sweep",
            "p": args.p,
            "theta": list(theta),
            "tau": args.tau,
            "lambda": args.lam,
            "kmax": args.kmax,
            "seed": args.seed,
        },
    )
    _emit(render_sweep_table(table), args.out)
    return 0


def cmd_shortcut_worked_example(args) -> int:
    configs = [shortcut.reference_config(k) for k in range(1, 13)]
    rows = _shortcut_rows(configs)
    r1 = shortcut.verify_sandwich(configs[0])
    r8 = shortcut.verify_sandwich(configs[7])
    table = SweepTable(
        SHORTCUT_COLUMNS,
        rows,
        {
            "command": "shortcut worked-example",
            "p": 8,
            "theta": [0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            "tau": 1.1,
            "lambda": 1e-5,
            # headline values of the reference instance, at their conventional precision
            "ood_lower_bound_k1": f"{r1.lower:.2g}",
            "ood_upper_bound_k8": f"{r8.upper:.2g}",
            "id_upper_bound": f"{r1.delta_k:.1g}",
            "ood_reduction_k1_to_k8": f"{r1.ood_loss - r8.ood_loss:.3g}",
        },
    )
    _emit(render_sweep_table(table), args.out)
    return 0


# ------------------------------------------------------------------- phop


def cmd_phop_gen(args) -> int:
    spec = phop.DatasetSpec(
        n=args.n, p=args.p, vocab_size=args.vocab, count=args.count, seed=args.seed
    )
    instances = phop.gen_dataset(spec)
    phop.write_dataset(instances, args.out, spec)
    summary = {
        "command": "phop gen",
        "out": str(args.out),
        "count": len(instances),
        "id_count": sum(1 for i in instances if i.split == phop.ID),
        "ood_count": sum(1 for i in instances if i.split == phop.OOD),
        "seed": args.seed,
    }
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0


# ------------------------------------------------------------- verify-all


def _cycle_property_suite(checks: Checks, quick: bool) -> None:
    inst = cycle.CycleInstance(5, 0)
    ks = range(4, 25) if quick else range(4, 45)
    ok = True
    for k in ks:
        expected = cycle.predicted_minimizers(inst, k)
        if expected is None:
            continue
        ok &= tuple(cycle.brute_force_erm(inst, k).minimizers) == expected
    checks.record("cycle enumeration matches gcd prediction (n=5)", ok)

    rep = cycle.good_k_density(5, 23)
    checks.record(
        "cycle exponent density beats its bound",
        rep.empirical_density >= rep.predicted_lower_bound,
        f"{rep.empirical_density} vs {rep.predicted_lower_bound}",
    )
    n = cycle.choose_prime_n(0.5 if quick else 0.25)
    bound = Fraction(1, n) + Fraction(cycle.totient(n - 1), n - 1)
    checks.record("cycle prime search meets its budget", bound < (0.5 if quick else 0.25), f"n={n}")

    rng = np.random.default_rng(0)
    collapse = all(
        cycle.height(cycle.iterate_pow(cycle.Endomorphism(tuple(int(x) for x in rng.integers(0, 6, 6))), 5)) <= 1
        for _ in range(50)
    )
    checks.record("cycle large iterates have height <= 1", collapse)


def _shortcut_property_suite(checks: Checks, quick: bool, seed: int) -> None:
    ok = True
    for k in range(1, 13):
        rep = shortcut.verify_sandwich(shortcut.reference_config(k))
        if k == 1:
            ok &= rep.ood_loss >= 0.81 - 1e-9 and rep.id_loss <= 0.006
        if k == 8:
            ok &= rep.upper <= 0.056
    checks.record("shortcut reference example reproduces cited bounds", ok)

    rng = np.random.default_rng(seed)
    sweep_ok = True
    for _ in range(10 if quick else 50):
        p = int(rng.integers(1, 11))
        cfg = shortcut.ShortcutConfig(
            p,
            tuple(float(t) for t in rng.uniform(0, 2.5, size=p)),
            float(rng.uniform(1.05, 2.0)),
            float(10.0 ** rng.uniform(-6, -1)),
            int(rng.integers(1, 7)),
        )
        try:
            shortcut.verify_sandwich(cfg)
        except InvariantViolation:
            sweep_ok = False
    checks.record("shortcut sandwich bounds hold on random instances", sweep_ok)

    if not quick:
        cfg = shortcut.ShortcutConfig(2, (0.4, 1.3), 1.4, 0.02, 3)
        weights, values, _ = shortcut.solve_erm(cfg)
        solver_obj = shortcut.objective_value(weights, values, cfg)
        _, _, oracle_obj = shortcut.brute_force_oracle(cfg)
        checks.record(
            "shortcut solver matches joint grid oracle",
            solver_obj <= oracle_obj + 1e-9
            and oracle_obj <= solver_obj + shortcut.oracle_grid_slack(cfg),
        )


def _phop_property_suite(checks: Checks, quick: bool, seed: int) -> None:
    spec = phop.DatasetSpec(count=1000 if quick else 10_000, seed=seed)
    instances = phop.gen_dataset(spec)
    ok = all(
        phop.findp(i.tokens, i.p) == (i.hop_chain[-1], i.hop_chain)
        and i.hop_chain[-1] >= 1
        and i.label == i.tokens[i.hop_chain[-1] - 1]
        and phop.split_tag(i) == i.split
        for i in instances
    )
    checks.record("phop oracle recomputation matches stored instances", ok)
    frac = sum(1 for i in instances if i.split == phop.ID) / len(instances)
    checks.record("phop split roughly balanced", abs(frac - 0.5) < 0.05, f"ID fraction {frac:.3f}")


def cmd_verify_all(args) -> int:
    checks = Checks()
    _cycle_property_suite(checks, args.quick)
    _icl_property_suite(checks, args.quick, args.seed)
    _shortcut_property_suite(checks, args.quick, args.seed)
    _phop_property_suite(checks, args.quick, args.seed)
    return checks.exit_code()


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iterlab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    cyc = sub.add_parser("cycle", help="iterate-class ERM on the cycle task")
    cyc_sub = cyc.add_subparsers(dest="subcommand", required=True)
    v = cyc_sub.add_parser("verify", help="enumerate minimizers and compare to the prediction")
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--q", type=int, required=True)
    v.add_argument("--k", type=int, required=True)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_cycle_verify)
    d = cyc_sub.add_parser("density", help="scan good exponents and report the density")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--scan-max", type=int, required=True)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_cycle_density)
    c = cyc_sub.add_parser("choose-n", help="find a prime domain size meeting a density budget")
    c.add_argument("--epsilon", type=float, required=True)
    c.add_argument("--search-cap", type=int, default=10**6)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_cycle_choose_n)

    ic = sub.add_parser("icl", help="linear-attention in-context learner")
    ic_sub = ic.add_subparsers(dest="subcommand", required=True)
    s = ic_sub.add_parser("sweep", help="loss/distance table over even iteration counts")
    s.add_argument("--gamma1", type=float, required=True)
    s.add_argument("--gamma2", type=float, required=True)
    s.add_argument("--gammaq", type=float, required=True)
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--kmax", type=int, default=40)
    s.add_argument("--seed", type=int, default=_default_seed())
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_icl_sweep)
    vf = ic_sub.add_parser("verify", help="run the property suite")
    vf.add_argument("--quick", action="store_true")
    vf.add_argument("--seed", type=int, default=_default_seed())
    vf.set_defaults(func=cmd_icl_verify)

    sc = sub.add_parser("shortcut", help="structured/shortcut regularized ERM")
    sc_sub = sc.add_subparsers(dest="subcommand", required=True)
    ss = sc_sub.add_parser("sweep", help="bounds and losses over k")
    ss.add_argument("--p", type=int, required=True)
    ss.add_argument("--theta", type=str, required=True, help="comma-separated nonnegative values")
    ss.add_argument("--tau", type=float, required=True)
    ss.add_argument("--lambda", dest="lam", type=float, required=True)
    ss.add_argument("--kmax", type=int, default=12)
    ss.add_argument("--seed", type=int, default=_default_seed())
    ss.add_argument("--out", default=None)
    ss.set_defaults(func=cmd_shortcut_sweep)
    we = sc_sub.add_parser("worked-example", help="reproduce the reference numeric example")
    we.add_argument("--out", default=None)
    we.set_defaults(func=cmd_shortcut_worked_example)

    ph = sub.add_parser("phop", help="multi-hop dataset generator")
    ph_sub = ph.add_subparsers(dest="subcommand", required=True)
    g = ph_sub.add_parser("gen", help="generate a dataset file")
    g.add_argument("--n", type=int, default=12)
    g.add_argument("--p", type=int, default=4)
    g.add_argument("--vocab", type=int, default=4)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=_default_seed())
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_phop_gen)

    va = sub.add_parser("verify-all", help="cross-module property suite")
    va.add_argument("--quick", action="store_true")
    va.add_argument("--seed", type=int, default=_default_seed())
    va.set_defaults(func=cmd_verify_all)
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own message
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"FAIL  invariant violated: {exc} (lhs={exc.lhs}, rhs={exc.rhs})", file=sys.stderr)
        return 1
    except (ParseError, VersionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:  # capacity / search / generation limits
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
