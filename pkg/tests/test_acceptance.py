"""Acceptance gate: the nine headline checks at their stated tolerances.

Each test prints exactly one summary line of the form

    [criterion N] description: PASS|FAIL (numbers)

so a verification run can be skimmed from the captured output. The whole
module targets a single-digit minute budget; seeds are fixed so the run is
reproducible bit for bit.
"""

import math

import numpy as np

from skewsim import cli
from skewsim.core import derive_stream, make_grid, sample_wiener
from skewsim.coupling import (
    coupled_terminal_ensemble,
    check_ordering,
    corollary_distance_experiment,
    ordering_experiment,
    randomized_bound_checks,
)
from skewsim.gdiff import (
    coefficient_profile,
    continuity_experiment,
    make_frame,
    rho_tail_experiment,
    small_local_time_check,
)
from skewsim.sbm import (
    LocalTimeLaw,
    SbmParams,
    drift_for_skew,
    expected_local_time,
    limit_sigma,
    local_time_cdf,
    local_time_cdf_right,
    local_time_resolution,
    sample_local_time,
    simulate_sbm_transformed,
    terminal_ensemble,
    transformed_terminal_ensemble,
)
from skewsim.stats import (
    EmpiricalCdf,
    ks_critical,
    ks_distance,
    mc_summary,
    monotone_trend,
)

SEED = 7
WORKERS = 4


def _report(number, description, ok, detail):
    line = f"[criterion {number}] {description}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# criterion 1: shared-driver distance identity


def test_c1_distance_identity():
    results = []
    for x in (0.0, 1.0):
        rep = corollary_distance_experiment(x, 0.6, 0.2, 1.0, dt=1e-4,
                                            paths=10_000, seed=SEED,
                                            workers=WORKERS)
        results.append((x, rep))
    ok = all(rep.passed for _, rep in results)
    detail = "; ".join(
        f"x={x:g}: est {rep.estimate.mean:.5f} vs target {rep.target:.5f}"
        for x, rep in results)
    _report(1, "mean distance equals skew gap times mean local time", ok, detail)


# ---------------------------------------------------------------------------
# criterion 2: reflected coupling order is exact


def test_c2_reflected_ordering_exact():
    grid = make_grid(1.0, 10_000)
    plus = coupled_terminal_ensemble(SbmParams(1.0, 0.0, 256),
                                     SbmParams(1.0, 0.5, 256),
                                     grid, 10_000, seed=SEED, workers=WORKERS)
    minus = coupled_terminal_ensemble(SbmParams(-1.0, -0.5, 256),
                                      SbmParams(-1.0, 0.0, 256),
                                      grid, 10_000, seed=SEED, workers=WORKERS)
    rep_p = check_ordering(plus, tolerance=0.0)
    rep_m = check_ordering(minus, tolerance=0.0)
    ok = (rep_p.max_violation == 0.0 and rep_p.violating_fraction == 0.0
          and rep_m.max_violation == 0.0 and rep_m.violating_fraction == 0.0)
    detail = (f"q=+1 worst {rep_p.max_violation:g}, "
              f"q=-1 worst {rep_m.max_violation:g}, 10000 pairs each")
    _report(2, "reflected pairs stay ordered with zero tolerance", ok, detail)


# ---------------------------------------------------------------------------
# criterion 3: mollified coupling order within scheme noise


def test_c3_mollified_ordering():
    coarse = ordering_experiment(0.2, 0.6, 0.0, 0.0, 1.0, dt=1e-4,
                                 paths=1000, seed=SEED, workers=WORKERS)
    fine = ordering_experiment(0.2, 0.6, 0.0, 0.0, 1.0, dt=2.5e-5,
                               paths=1000, seed=SEED, workers=WORKERS)
    ok = (coarse.violating_fraction <= 0.01
          and fine.violating_fraction <= coarse.violating_fraction)
    detail = (f"violating fraction {coarse.violating_fraction:.4f} at dt=1e-4, "
              f"{fine.violating_fraction:.4f} at dt/4")
    _report(3, "mollified pairs ordered within one increment of noise", ok, detail)


# ---------------------------------------------------------------------------
# criterion 4: local-time law, exact sampler and scheme histogram


def test_c4_local_time_law():
    law0 = LocalTimeLaw(0.0, 1.0)
    draws = sample_local_time(law0, derive_stream(SEED, 0), size=100_000)
    ks_sampler = ks_distance(EmpiricalCdf.from_samples(draws),
                             lambda a: local_time_cdf_right(law0, a),
                             lambda a: local_time_cdf(law0, a))
    ok = ks_sampler <= ks_critical(100_000, 0.01)
    details = [f"sampler KS {ks_sampler:.5f} <= {ks_critical(100_000, 0.01):.5f}"]

    grid = make_grid(1.0, 10_000)
    floor = local_time_resolution(drift_for_skew(0.6, 256), 0.6, 1.0)
    for x0 in (0.0, 1.0):
        params = SbmParams(0.6, x0, 256)
        ens = terminal_ensemble(params, grid, 10_000, seed=SEED, workers=WORKERS)
        summary = mc_summary(ens.eta)
        target = expected_local_time(x0, 1.0)
        mean_ok = abs(summary.mean - target) <= summary.halfwidth + 0.05 * target
        law = LocalTimeLaw(x0, 1.0)
        snapped = np.where(ens.eta < floor, 0.0, ens.eta)
        ks = ks_distance(EmpiricalCdf.from_samples(snapped),
                         lambda a: local_time_cdf_right(law, a),
                         lambda a: local_time_cdf(law, a))
        ok = ok and mean_ok and ks <= 0.05
        details.append(f"x0={x0:g}: mean {summary.mean:.4f} vs {target:.4f}, "
                       f"KS {ks:.4f}")
    _report(4, "terminal local time follows the reflection law", ok,
            "; ".join(details))


# ---------------------------------------------------------------------------
# criterion 5: randomized bound battery


def test_c5_randomized_bounds():
    reports = randomized_bound_checks(sets=20, seed=0, dt=5e-4, paths=4000,
                                      workers=WORKERS)
    sets_seen = {rep.label.split(":")[0] for rep in reports}
    ok = all(rep.passed for rep in reports) and len(sets_seen) == 20
    worst = min(rep.bound - (rep.estimate.mean - rep.estimate.halfwidth)
                for rep in reports)
    detail = (f"{len(reports)} bound checks over {len(sets_seen)} parameter "
              f"sets, worst margin {worst:+.5f}")
    _report(5, "randomized distance bounds hold within three sigma", ok, detail)


# ---------------------------------------------------------------------------
# criterion 6: shared-noise continuity in the starting point


def test_c6_continuity_trend():
    frame = make_frame(np.eye(3)[0])
    coeffs = coefficient_profile("sinusoidal", 3, 0.5)
    sizes = (0.0, 0.4, 0.2, 0.1, 0.05)
    offsets = [s * frame.normal for s in sizes]
    estimates = continuity_experiment(coeffs, frame, np.zeros(3), offsets,
                                      1.0, 0.25, paths=4000, seed=SEED,
                                      dt=2.5e-4, workers=WORKERS)
    control = estimates[0]
    decay = estimates[1:]
    trend = monotone_trend([e.probability for e in decay],
                           [e.halfwidth for e in decay])
    ok = control.probability == 0.0 and trend
    detail = ("control " + f"{control.probability:g}" + ", probabilities " +
              " -> ".join(f"{e.probability:.4f}" for e in decay))
    _report(6, "gap exceedance decays as the start offset shrinks", ok, detail)


# ---------------------------------------------------------------------------
# criterion 7: clock tail and small-local-time bounds


def test_c7_tail_bounds():
    rho = rho_tail_experiment(0.0, 0.5, 4.0, t_max=1.0, dt=4e-3,
                              paths=100_000, seed=SEED, workers=WORKERS)
    small = small_local_time_check(1.0, 0.5, dt=1e-4, paths=100_000,
                                   seed=SEED, workers=WORKERS)
    analytic_ok = (abs(small.cdf_value - 0.382925) < 5e-7
                   and abs(small.bound - 0.398942) < 5e-7)
    ok = rho.passed and small.passed and analytic_ok
    detail = (f"clock tail {rho.frequency:.4f} <= {rho.bound:.4f}; "
              f"small-time cdf {small.cdf_value:.6f} <= {small.bound:.6f}, "
              f"mc {small.mc_frequency:.4f}")
    _report(7, "inverse-clock and small-local-time bounds hold", ok, detail)


# ---------------------------------------------------------------------------
# criterion 8: transformed scheme agrees in law and in quadratic variation


def test_c8_transformed_scheme():
    params = SbmParams(0.6, 0.0, 256)
    grid = make_grid(1.0, 10_000)
    ratios = []
    for i in range(6):
        wiener = sample_wiener(grid, derive_stream(21, i))
        tp = simulate_sbm_transformed(params, wiener)
        qv = float(np.sum(np.diff(tp.y) ** 2))
        sig = limit_sigma(params.q, tp.y[:-1])
        integral = float(np.sum(sig ** 2) * grid.dt)
        ratios.append(qv / integral)
    qv_ok = all(abs(r - 1.0) <= 0.10 for r in ratios)

    ens = terminal_ensemble(params, grid, 10_000, seed=SEED, workers=WORKERS)
    other = transformed_terminal_ensemble(params, grid, 10_000, seed=SEED,
                                          first_index=1_000_000,
                                          workers=WORKERS)
    ks = ks_distance(EmpiricalCdf.from_samples(ens.x),
                     EmpiricalCdf.from_samples(other))
    ok = qv_ok and ks <= 0.03
    detail = (f"qv ratios {min(ratios):.3f}..{max(ratios):.3f}, "
              f"cross-scheme KS {ks:.4f} <= 0.03")
    _report(8, "transformed coordinates carry the right volatility and law",
            ok, detail)


# ---------------------------------------------------------------------------
# criterion 9: outputs independent of worker count


def test_c9_worker_byte_identity(tmp_path):
    invocations = [
        ["couple", "--experiment", "corollary1", "--dt", "1e-3",
         "--paths", "2000", "--seed", str(SEED)],
        ["continuity", "--paths", "300", "--dt", "1e-3", "--seed", "5",
         "--offsets", "0.4,0.2,0.1"],
    ]
    ok = True
    for j, args in enumerate(invocations):
        texts = []
        codes = []
        for workers in ("1", "4", "16"):
            out = tmp_path / f"run{j}_w{workers}.json"
            codes.append(cli.run(args + ["--workers", workers, "--out", str(out)]))
            texts.append(out.read_bytes())
        # identity is about the run, not the verdict: the exit code must
        # merely agree across worker counts
        ok = ok and texts[0] == texts[1] == texts[2] and len(set(codes)) == 1
    _report(9, "results are byte-identical for 1, 4, and 16 workers", ok,
            f"{len(invocations)} experiments compared")
