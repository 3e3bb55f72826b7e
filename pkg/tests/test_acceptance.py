"""Acceptance criteria 1-12 at desk scale (64x64 reference scenario).

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary.  Run alone with::

    pytest tests/test_acceptance.py -v

Expected runtime is about five minutes.
"""

import sys

import numpy as np
import pytest

from nsfsim.diagnostics import min_principle_audit, theta_tilde_track
from nsfsim.experiments import RECIPE_DEFAULTS, contraction, decay, mms, simulate, smallness, split
from nsfsim.io import RunConfig

pytestmark = pytest.mark.acceptance

REFERENCE = RunConfig()  # pudding, theta_min=10, m=l=1, 64^2, dt=2e-3, t_end=2


def verdict(log, n, what, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {what} [{detail}]"
    print(line)
    log.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def ref():
    return simulate(REFERENCE)


@pytest.fixture(scope="module")
def ref_split(ref):
    return split(REFERENCE, ref)


def _energy(res):
    led0 = res.ledger_rows[0]
    e0 = led0[2] + led0[3]
    e = res.series("kinetic") + res.series("thermal")
    return res.series("time"), e0, e


def test_c01_mass(ref, acceptance_log):
    m0 = ref.ledger_rows[0][1]
    m = ref.series("mass")
    drift = float(np.max(np.abs(m - m0)) / m0)
    verdict(
        acceptance_log, 1, f"relative mass drift over {len(m)} steps", drift <= 1e-12 and len(m) >= 1000, f"{drift:.3e} <= 1e-12"
    )


def test_c02_energy(ref, acceptance_log):
    t, e0, e = _energy(ref)
    drift = abs(e[-1] - e0) / e0
    # halved dt over [0, 0.5]: by then the flow has stopped and the drift is final
    half_t = 0.5
    k = int(np.argmin(np.abs(t - half_t)))
    d_coarse = abs(e[k] - e0) / e0
    fine = simulate(REFERENCE.replace(dt=REFERENCE.dt / 2, t_end=half_t), keep_snapshots=False)
    _, f0, fe = _energy(fine)
    d_fine = abs(fe[-1] - f0) / f0
    ratio = d_coarse / d_fine
    settled = abs(d_coarse - drift) <= 1e-3 * drift
    ok = drift <= 0.01 and 1.6 <= ratio <= 2.4 and settled
    verdict(
        acceptance_log,
        2,
        "total energy drift and its dt-halving ratio",
        ok,
        f"drift {drift:.3e} <= 1e-2; ratio {ratio:.3f} in [1.6, 2.4]; drift at t=0.5 {d_coarse:.4e} vs T {drift:.4e}",
    )


@pytest.fixture(scope="module")
def other_scenarios():
    out = {}
    for name in ("rest", "random"):
        out[name] = simulate(REFERENCE.replace(scenario=name, t_end=0.2), keep_snapshots=False)
    return out


def test_c03_minimum_principle(ref, other_scenarios, acceptance_log):
    margins = {}
    for name, res in [("pudding", ref), *other_scenarios.items()]:
        margins[name] = float(np.min(res.series("min_theta"))) - res.law.theta_min
        if res.snapshots:
            margins[name] = min(margins[name], min_principle_audit((s.theta for s in res.snapshots), res.law.theta_min))
    worst = min(margins.values())
    detail = ", ".join(f"{k} {v:.2e}" for k, v in margins.items())
    verdict(acceptance_log, 3, "min theta - theta_min over all steps and scenarios", worst >= -1e-9, f"{detail}; >= -1e-9")


def test_c04_energy_transfer(ref, acceptance_log):
    loss, heat, kin = ref.series("viscous_loss"), ref.series("heat_input"), ref.series("kinetic")
    # kinetic energy at the start of each step
    kin_prev = np.concatenate([[ref.ledger_rows[0][2]], kin[:-1]])
    mism = np.abs(loss - heat)
    ok = bool(np.all(mism <= 1e-8 * kin_prev))
    # the flow comes to rest: kinetic energy underflows to 0 late in the run
    moving = kin_prev > 0
    worst = float(np.max(mism[moving] / kin_prev[moving]))
    detail = f"{worst:.3e} <= 1e-8 over {int(moving.sum())} steps with motion; mismatch exactly 0 on the rest"
    verdict(acceptance_log, 4, "|viscous kinetic loss - dt * dissipation| / kinetic energy, worst step", ok, detail)


def test_c05_density_bound(ref, acceptance_log):
    dev = np.concatenate([[float(np.max(np.abs(ref.initial.rho - 1)))], ref.series("rho_dev")])
    worst = float(np.max(np.diff(dev)))
    verdict(acceptance_log, 5, "largest step increase of max|rho - 1|", worst <= 4 * np.finfo(float).eps, f"{worst:.3e} <= 4 eps")


def test_c06_decay_scaling(acceptance_log):
    res = decay(REFERENCE.replace(**RECIPE_DEFAULTS["decay"]))
    rates = [r[3] for r in res.rows[:2]]
    ratio = res.rows[2][3]
    verdict(
        acceptance_log,
        6,
        "fitted velocity decay rates at nu_min and 2 nu_min",
        res.passed,
        f"slopes {-rates[0]:.3f}, {-rates[1]:.3f} < 0; ratio {ratio:.3f} in [1.6, 2.4]",
    )


def test_c07_contraction(acceptance_log):
    res = contraction(REFERENCE.replace(**RECIPE_DEFAULTS["contraction"]))
    c1, c2 = res.rows[0][1], res.rows[1][1]
    verdict(
        acceptance_log, 7, "Picard contraction certificate at dt=1e-3 and 5e-4", res.passed, f"{c1:.4f} < 1; {c2:.4f} <= {c1:.4f}"
    )


def test_c08_split(ref_split, acceptance_log):
    checks = {c.label: c for c in ref_split.checks}
    keys = ["|N(0)|", "|H(0)|", "E mean drift", "S log-linear fit residual / log range"]
    ok = all(checks[k].passed for k in keys)
    detail = "; ".join(f"{k} {checks[k].value:.2e} {checks[k].bound}" for k in keys)
    verdict(acceptance_log, 8, "split into semigroup and nonlinear parts", ok, detail)


def test_c09_smallness(acceptance_log):
    res = smallness(REFERENCE.replace(**RECIPE_DEFAULTS["smallness"]))
    Ks = [r[1] for r in res.rows]
    detail = "K " + ", ".join(f"{k:.4g}" for k in Ks) + " for theta_min 1, 10, 100"
    verdict(acceptance_log, 9, "smallness indicator and coefficient ratios decrease in theta_min", res.passed, detail)


def test_c10_proxy_bounded(ref_split, acceptance_log):
    chk = next(c for c in ref_split.checks if c.label.startswith("proxy"))
    verdict(
        acceptance_log,
        10,
        "proxy norm at T=1 vs 2T=2",
        chk.passed,
        f"relative change {chk.value:.3e} <= 0.05; {ref_split.notes[0]}",
    )


def test_c11_mms(acceptance_log):
    res = mms(REFERENCE.replace(**RECIPE_DEFAULTS["mms"]))
    ou = min(r[3] for r in res.rows[1:])
    ot = min(r[4] for r in res.rows[1:])
    md = max(r[5] for r in res.rows)
    verdict(
        acceptance_log,
        11,
        "manufactured-solution orders on 32-64-128",
        res.passed,
        f"velocity {ou:.3f}, temperature {ot:.3f} >= 1.8; max|div v| {md:.2e} <= 1e-10",
    )


def test_c12_theta_tilde(ref, acceptance_log):
    tr = theta_tilde_track(ref.snapshots, ref.law, ref.heat_added)
    worst = float(np.max(np.abs(tr.weighted_residual)))
    fit = tr.fit
    ok = worst <= 1e-8 * tr.mass and fit is not None and fit.slope < 0
    slope = float("nan") if fit is None else fit.slope
    verdict(
        acceptance_log,
        12,
        "theta-tilde weighted residual and L2 residual decay",
        ok,
        f"max |weighted residual| {worst:.3e} <= {1e-8 * tr.mass:.1e}; fitted slope {slope:.3f} < 0",
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
