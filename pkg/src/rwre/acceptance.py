"""The acceptance suite: one function per criterion, plus the driver.

Each criterion runs at its pinned scale and tolerance on seeds derived
from the master seed, writes its artifacts (deterministic content only)
into the output directory, and reports pass/fail.  The determinism
criterion re-runs the entire suite into a sibling directory and
byte-compares every artifact.
"""

from __future__ import annotations

import filecmp
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import criteria, hypercube, regeneration, rng, stats, walk
from .cli import write_csv, write_json
from .environment import Dirichlet, Environment, Expl, TrapSym, TrapTransient, UniformDrift
from .lattice import UnitHypercube


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float
    details: dict


def _run_expl_walks(seed: int):
    """The shared ballistic-example run: 100 walks of 10^5 steps, d=2."""
    law = Expl(2, 0.2)
    env = Environment(law, rng.derive_key(seed, "c1_env"))
    n, W = 100_000, 100
    keys = walk.walk_keys(rng.derive_key(seed, "c1_walks"), W)
    res = walk.run_fixed_batch(env, np.zeros(2, dtype=np.int64), n, keys,
                               record_steps=True)
    ell = np.ones(2) / np.sqrt(2.0)
    params = regeneration.RegenParams((float(ell[0]), float(ell[1])))
    records = [regeneration.extract_from_steps(res.steps[w], (0, 0), params, n)
               for w in range(W)]
    return law, res, records, n


def crit1_ballistic_velocity(seed: int, outdir: str, shared,
                             shared_seconds: float = 0.0) -> CriterionResult:
    t0 = time.time() - shared_seconds   # bill the shared simulation here
    law, res, records, n = shared
    ell0 = np.ones(2)  # lattice-level projection: X . (e_1 + e_2)
    ren = regeneration.renewal_velocity(records)
    direct = regeneration.direct_velocity(res.final, n)
    vr = float(ren.v @ ell0)
    vd = float(direct.v @ ell0)
    passed = ren.ok and 0.59 <= vr <= 0.61 and 0.59 <= vd <= 0.61
    config = {"criterion": 1, "law": "expl", "d": 2, "eps": 0.2,
              "steps": n, "walks": len(records), "seed": seed}
    write_json(os.path.join(outdir, "c01_ballistic_velocity.json"),
               {"renewal_v_ell0": vr, "direct_v_ell0": vd,
                "renewal_v": ren.v, "direct_v": direct.v,
                "renewal_ci": [ren.ci_low, ren.ci_high],
                "direct_ci": [direct.ci_low, direct.ci_high],
                "target": [0.59, 0.61]}, config)
    regeneration.records_to_csv(records[:5],
                                os.path.join(outdir, "c01_regenerations_sample.csv"))
    return CriterionResult(1, "ballistic-example-velocity", passed,
                           time.time() - t0,
                           {"renewal": vr, "direct": vd})


def crit2_zero_speed(seed: int, outdir: str) -> CriterionResult:
    t0 = time.time()
    law = TrapTransient(1)
    W, scales = 200, [10_000, 100_000, 1_000_000]
    env_seeds = np.array([rng.derive_key(seed, "c2_env", i) for i in range(W)],
                         dtype=np.uint64)
    env = criteria.MultiSeedEnvironment(law, env_seeds)
    keys = walk.walk_keys(rng.derive_key(seed, "c2_walks"), W)
    res = walk.run_fixed_batch(env, np.zeros(2, dtype=np.int64), scales[-1],
                               keys, checkpoints=scales[:-1])
    finals = {n: (res.checkpoints[n] if n in res.checkpoints else res.final)
              for n in scales}
    vels = [float(finals[n][:, 1].mean()) / n for n in scales]
    frac = hypercube.fractional_moment(law, 1.0, 4000,
                                       rng.derive_key(seed, "c2_frac"))
    passed = (vels[0] > vels[1] > vels[2] and vels[2] < 0.05
              and frac.verdict == "moment-appears-infinite")
    config = {"criterion": 2, "law": "trap_transient", "d": 1,
              "walks": W, "scales": scales, "seed": seed}
    write_json(os.path.join(outdir, "c02_zero_speed.json"),
               {"velocities": dict(zip(map(str, scales), vels)),
                "fractional_moment": frac.to_dict()}, config)
    return CriterionResult(2, "zero-speed-example", passed, time.time() - t0,
                           {"velocities": vels, "fracmom": frac.verdict})


IDENTITY_LAWS = [("uniform", lambda: UniformDrift(2)),
                 ("dirichlet_1111", lambda: Dirichlet((1.0,) * 4)),
                 ("expl", lambda: Expl(2, 0.3))]


def crit3_exact_identities(seed: int, outdir: str) -> CriterionResult:
    t0 = time.time()
    cube = UnitHypercube((0, 0))
    tol = 1e-10
    worst: dict[str, dict] = {}
    passed = True
    for name, mk in IDENTITY_LAWS:
        law = mk()
        seeds = [rng.derive_key(seed, "c3", name, i) for i in range(1000)]
        ana = hypercube.analyze_batch(law, seeds, cube, 2)
        viol = ana.check_identities(tol)
        worst[name] = viol
        passed = passed and all(v <= tol for v in viol.values())
    config = {"criterion": 3, "replicates": 1000, "seed": seed, "tol": tol}
    write_json(os.path.join(outdir, "c03_exact_identities.json"),
               {"max_violations": worst}, config)
    return CriterionResult(3, "exact-hypercube-identities", passed,
                           time.time() - t0, worst)


def crit4_golden_values(seed: int, outdir: str) -> CriterionResult:
    t0 = time.time()
    env = Environment(UniformDrift(2), rng.derive_key(seed, "c4"))
    ana = hypercube.analyze(env, UnitHypercube((0, 0)), 2)
    got = {"mean_exit": float(ana.mean_exit[0, 0]),
           "Qtilde_row_0": float(ana.Qtilde_row[0, 0]),
           "Qtilde_00": float(ana.Qtilde[0, 0, 0]),
           "Qtilde_0_diag": float(ana.Qtilde[0, 0, 3]),
           "N_00": float(ana.fundamental[0, 0, 0])}
    want = {"mean_exit": 2.0, "Qtilde_row_0": 6.0 / 7.0, "Qtilde_00": 0.5,
            "Qtilde_0_diag": 1.0 / 14.0, "N_00": 7.0 / 6.0}
    passed = all(abs(got[k] - want[k]) <= 1e-12 for k in want)
    config = {"criterion": 4, "seed": seed, "tol": 1e-12}
    write_json(os.path.join(outdir, "c04_golden_values.json"),
               {"got": got, "want": want}, config)
    write_csv(os.path.join(outdir, "c04_uniform_cube.csv"),
              ["corner", "Q", "Qtilde_row", "mean_exit"],
              [[j, ana.Q[0, j], ana.Qtilde_row[0, j], ana.mean_exit[0, j]]
               for j in range(4)], config)
    return CriterionResult(4, "uniform-golden-values", passed,
                           time.time() - t0, got)


def crit5_visit_law(seed: int, outdir: str) -> CriterionResult:
    t0 = time.time()
    env = Environment(UniformDrift(2), rng.derive_key(seed, "c5_env"))
    cube = UnitHypercube((0, 0))
    pvals = []
    for rep in range(100):
        r = hypercube.visit_law_check(env, cube, 0, 100_000,
                                      rng.derive_key(seed, "c5", rep))
        pvals.append(r.p_value)
    n_pass = int(np.sum(np.asarray(pvals) > 0.01))
    passed = n_pass >= 95
    config = {"criterion": 5, "runs": 100_000, "repetitions": 100, "seed": seed}
    write_json(os.path.join(outdir, "c05_visit_law.json"),
               {"p_values": pvals, "n_above_0.01": n_pass}, config)
    return CriterionResult(5, "geometric-visit-law", passed, time.time() - t0,
                           {"n_pass": n_pass})


def crit6_regeneration_structure(seed: int, outdir: str, shared) -> CriterionResult:
    t0 = time.time()
    law, res, records, n = shared
    first_halves, second_halves = [], []
    for rec in records:
        it = rec.inter_times
        h = len(it) // 2
        first_halves.append(it[:h])
        second_halves.append(it[h:])
    a = np.concatenate(first_halves).astype(float)
    b = np.concatenate(second_halves).astype(float)
    ks_stat, ks_crit = stats.ks_two_sample(a, b, level=0.01)
    ren = regeneration.renewal_velocity(records)
    direct = regeneration.direct_velocity(res.final, n)
    ell0 = np.ones(2)
    vr, vd = float(ren.v @ ell0), float(direct.v @ ell0)
    hw_r = float(np.abs(ren.ci_high - ren.v) @ np.abs(ell0))
    hw_d = float(np.abs(direct.ci_high - direct.v) @ np.abs(ell0))
    agree = abs(vr - vd) <= hw_r + hw_d
    passed = ks_stat < ks_crit and agree
    config = {"criterion": 6, "seed": seed}
    write_json(os.path.join(outdir, "c06_regeneration_structure.json"),
               {"ks_stat": ks_stat, "ks_critical_1pct": ks_crit,
                "renewal_v": vr, "direct_v": vd,
                "combined_halfwidth": hw_r + hw_d,
                "n_intertimes": [len(a), len(b)]}, config)
    return CriterionResult(6, "regeneration-structure", passed,
                           time.time() - t0,
                           {"ks": ks_stat, "crit": ks_crit, "agree": agree})


def crit7_mark_sums(seed: int, outdir: str) -> CriterionResult:
    t0 = time.time()
    law = Expl(2, 0.25)
    phi = np.full(4, 0.4)
    policy = criteria.EprimePolicy(delta=1.0 / 8.0, phi=phi)
    gammas = criteria.gamma_exponents(phi, 2)
    target = 2 * phi.sum() - 0.8
    n_ok, n_audit = 0, 0
    events = []
    for r in range(1000):
        env = Environment(law, rng.derive_key(seed, "c7", r))
        mmh = criteria.discover(env, policy)       # audits on construction
        n_audit += 1
        s = criteria.mark_sum(mmh, gammas)
        events.append(mmh.meta.get("event_index"))
        if abs(s - target) <= 1e-12:
            n_ok += 1
    passed = n_ok == 1000 and n_audit == 1000
    config = {"criterion": 7, "phi": 0.4, "replicates": 1000, "seed": seed}
    write_json(os.path.join(outdir, "c07_mark_sums.json"),
               {"n_exact": n_ok, "target": target,
                "event_histogram": {str(k): int(np.sum(np.array(events) == k))
                                    for k in sorted(set(events))}}, config)
    return CriterionResult(7, "mark-sum-identity", passed, time.time() - t0,
                           {"n_exact": n_ok, "target": target})


def crit8_discrimination(seed: int, outdir: str) -> CriterionResult:
    t0 = time.time()
    law = Expl(2, 0.2)
    probe = criteria.eprime_probe(law, 1.0 / 8.0, 20_000,
                                  rng.derive_key(seed, "c8_probe"))
    kt = criteria.check_ktilde(law, 2.0, 20_000, rng.derive_key(seed, "c8_kt"))
    min_q = kt.details["min_Q_sample"]
    bound_ok = min_q >= 0.2 / 2 - 1e-12       # Q_x >= eps/d on every sample
    probe_inf = all(v == "moment-appears-infinite"
                    for v in probe.details["per_direction"])
    passed = (probe_inf and kt.verdict == "satisfied-empirically" and bound_ok)
    config = {"criterion": 8, "replicates": 20_000, "seed": seed}
    write_json(os.path.join(outdir, "c08_discrimination.json"),
               {"eprime_probe_verdicts": probe.details["per_direction"],
                "ktilde_verdict": kt.verdict, "min_Q_sample": min_q,
                "eps_over_d": 0.1}, config)
    return CriterionResult(8, "criterion-discrimination", passed,
                           time.time() - t0,
                           {"probe": probe.verdict, "ktilde": kt.verdict,
                            "min_q": min_q})


def crit9_trap_tail(seed: int, outdir: str) -> CriterionResult:
    t0 = time.time()
    law = TrapSym(2)
    seeds = [rng.derive_key(seed, "c9", i) for i in range(10_000)]
    ana = hypercube.analyze_batch(law, seeds, UnitHypercube((0, 0)), 1)
    samples = ana.mean_exit[:, 0]              # quenched E_0[T_exit]
    # The trapped-orientation event has probability 4^-4 = 1/256, so only
    # the top few dozen order statistics follow the asymptotic power law;
    # k is pinned inside that Hill-plot stability window.
    est = stats.hill(samples, k=24)
    curve = {k: stats.hill(samples, k).index for k in (16, 20, 24, 32, 48)}
    passed = 0.8 <= est.index <= 1.2
    config = {"criterion": 9, "replicates": 10_000, "k": 24, "seed": seed}
    write_json(os.path.join(outdir, "c09_trap_tail.json"),
               {"hill": est.to_dict(), "target": [0.8, 1.2],
                "hill_curve": {str(k): v for k, v in curve.items()}}, config)
    return CriterionResult(9, "trap-tail-exponent", passed, time.time() - t0,
                           {"hill_index": est.index})


def crit10_path_bundles(seed: int, outdir: str) -> CriterionResult:
    t0 = time.time()
    failures = 0
    checked = 0
    for name, law in [("uniform", UniformDrift(2)), ("expl", Expl(2, 0.2))]:
        policy = criteria.EprimePolicy()
        for r in range(1000):
            env = Environment(law, rng.derive_key(seed, "c10", name, r))
            mmh = criteria.discover(env, policy)
            try:
                criteria.paths(env, mmh, 5)    # asserts the pi lower bound
            except AssertionError:
                failures += 1
            checked += 1
    passed = failures == 0 and checked == 2000
    config = {"criterion": 10, "n": 5, "replicates": 2000, "seed": seed}
    write_json(os.path.join(outdir, "c10_path_bundles.json"),
               {"checked": checked, "failures": failures}, config)
    return CriterionResult(10, "path-bundle-bound", passed, time.time() - t0,
                           {"failures": failures})


def crit11_slab_decay(seed: int, outdir: str) -> CriterionResult:
    t0 = time.time()
    law = Expl(2, 0.2)
    ell = np.ones(2) / np.sqrt(2.0)
    rep = criteria.slab_exit(law, ell, 1.0, [8, 16, 32, 64], 60_000, 2,
                             rng.derive_key(seed, "c11"),
                             estimator="splitting", n_per_level=192,
                             repeats=3, level_width=0.7, gammas=(1.0,))
    fit = rep.fits[1.0]
    passed = (fit is not None and fit.n_points == 4
              and fit.slope < 0 and fit.slope_ci[1] < 0)
    config = {"criterion": 11, "b": 1.0, "L_grid": [8, 16, 32, 64], "seed": seed}
    write_json(os.path.join(outdir, "c11_slab_decay.json"),
               {"report": rep.to_dict()}, config)
    return CriterionResult(11, "slab-decay-shape", passed, time.time() - t0,
                           {"slope": None if fit is None else fit.slope,
                            "ci": None if fit is None else fit.slope_ci})


def run_criteria(seed: int, outdir: str) -> list[CriterionResult]:
    os.makedirs(outdir, exist_ok=True)
    t_shared = time.time()
    shared = _run_expl_walks(seed)
    t_shared = time.time() - t_shared
    results = [crit1_ballistic_velocity(seed, outdir, shared, t_shared),
               crit2_zero_speed(seed, outdir),
               crit3_exact_identities(seed, outdir),
               crit4_golden_values(seed, outdir),
               crit5_visit_law(seed, outdir),
               crit6_regeneration_structure(seed, outdir, shared),
               crit7_mark_sums(seed, outdir),
               crit8_discrimination(seed, outdir),
               crit9_trap_tail(seed, outdir),
               crit10_path_bundles(seed, outdir),
               crit11_slab_decay(seed, outdir)]
    return results


def run_all(seed: int, outdir: str):
    """Run criteria 1-11 twice and byte-compare artifacts (criterion 12)."""
    os.makedirs(outdir, exist_ok=True)
    dir1 = os.path.join(outdir, "run1")
    dir2 = os.path.join(outdir, "run2")
    results = run_criteria(seed, dir1)
    t0 = time.time()
    run_criteria(seed, dir2)
    names = sorted(os.listdir(dir1))
    same = (names == sorted(os.listdir(dir2)))
    mismatches = []
    for name in names:
        if not filecmp.cmp(os.path.join(dir1, name), os.path.join(dir2, name),
                           shallow=False):
            same = False
            mismatches.append(name)
    results.append(CriterionResult(12, "determinism", same, time.time() - t0,
                                   {"artifacts": len(names),
                                    "mismatches": mismatches}))
    summary = {"seed": seed,
               "criteria": [{"number": r.number, "name": r.name,
                             "passed": bool(r.passed),
                             "seconds": round(r.seconds, 2),
                             "details": _plain(r.details)} for r in results],
               "all_passed": bool(all(r.passed for r in results))}
    summary_path = os.path.join(outdir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, default=str)
    return results, summary_path


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
