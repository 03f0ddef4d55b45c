import numpy as np
import pytest

from stxdiff import models
from stxdiff import problems as P
from stxdiff.diagnostics import (
    ConvergenceRecord, entropy_series, flux_error_indicator, log_linear_fit, observed_rates,
    probe_series, solve_on_mesh, waiting_time_track,
)
from stxdiff.errors import InvalidArgument
from stxdiff.fespace import FeSpace, interpolate
from stxdiff.mesh import build_cartesian


def test_rates_pair_with_coarser_level_of_same_order():
    recs = [ConvergenceRecord(0.5, 1, 0.0, 4e-2), ConvergenceRecord(0.25, 1, 0.0, 1e-2),
            ConvergenceRecord(0.5, 2, 0.0, 8e-3), ConvergenceRecord(0.25, 2, 0.0, 1e-3),
            ConvergenceRecord(0.125, 2, 0.0, None, converged=False)]
    observed_rates(recs)
    assert recs[0].rate is None and recs[2].rate is None
    assert recs[1].rate == pytest.approx(2.0) and recs[3].rate == pytest.approx(3.0)
    assert recs[4].rate is None


def _space(value, p=2, N=1):
    space = FeSpace(build_cartesian(0, 1, 1, 3, 3), p, N)
    return space, interpolate(space, lambda x, t: np.full(np.shape(x) + (N,), value))


def test_constant_state_gives_constant_series():
    space, c = _space(0.3)
    sysm = models.heat()
    times = np.linspace(0, 1, 6)
    ser = entropy_series(space, c, sysm, times)
    assert np.allclose(ser.entropy, ser.entropy[0]) and np.allclose(ser.dissipation, 0)
    pr = probe_series(space, c, sysm.entropy.u, times, x=0.4)
    assert np.allclose(pr.values, pr.values[0])
    avg = probe_series(space, c, sysm.entropy.u, times, subdomain=(0.2, 0.7))
    assert np.allclose(avg.values, sysm.entropy.u(np.array([0.3])))


def test_series_argument_checks():
    space, c = _space(0.0)
    sysm = models.heat()
    with pytest.raises(InvalidArgument):
        entropy_series(space, c, sysm, [0.5, 0.2])
    with pytest.raises(InvalidArgument):
        probe_series(space, c, sysm.entropy.u, [0.1], x=0.1, subdomain=(0, 1))
    with pytest.raises(InvalidArgument):
        probe_series(space, c, sysm.entropy.u, [0.1], x=2.0)
    with pytest.raises(InvalidArgument):
        waiting_time_track(space, c, 1.5, 0.01, sysm.entropy.u)


def test_heat_entropy_decays_exponentially():
    prob = P.heat_manufactured()
    rep = solve_on_mesh(prob, prob.mesh(16, 16), 2, delta0=0.1)
    ctx = rep.context
    times = np.linspace(0.1, 1.0, 10)
    ser = entropy_series(ctx.space, rep.coeffs, ctx.system, times)
    slope, r2 = log_linear_fit(times, ser.entropy)
    assert slope < 0 and r2 >= 0.99
    assert np.all(np.diff(ser.entropy) <= 1e-8)
    assert np.all(ser.entropy >= 0)


def test_log_linear_fit_exact_exponential():
    t = np.linspace(0, 3, 7)
    slope, r2 = log_linear_fit(t, 2.0 * np.exp(-1.5 * t))
    assert slope == pytest.approx(-1.5) and r2 == pytest.approx(1.0)


def test_flux_indicator_vanishes_for_continuous_flux():
    space = FeSpace(build_cartesian(0, 1, 1, 4, 3), 2, 1)
    c = interpolate(space, lambda x, t: (0.3 * x - 0.1)[..., None])
    eta = flux_error_indicator(space, c, models.porous_medium(2.0))
    assert eta.max() <= 1e-12


def test_flux_indicator_converges_at_twice_the_order():
    prob = P.fisher_wave()
    for p in (1, 2):
        sums = []
        for n in (8, 16):
            rep = solve_on_mesh(prob, prob.mesh(n, n, "simplicial"), p)
            ctx = rep.context
            sums.append((flux_error_indicator(ctx.space, rep.coeffs, ctx.system) ** 2).sum())
        assert np.log2(sums[0] / sums[1]) >= 2 * p - 0.15


def test_waiting_time_without_crossing_reports_infinity():
    space, c = _space(-50.0)
    t_first, times, vals = waiting_time_track(space, c, 0.5, 0.01, models.heat().entropy.u, 100)
    assert t_first == np.inf and len(times) == 100 and np.all(vals < 0.01)
