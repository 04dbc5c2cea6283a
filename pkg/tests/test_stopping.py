import csv
import math

import numpy as np
import pytest
from scipy import stats as sps

from isstop.errors import DataError, DegenerateWeightsError, SingularCovarianceError
from isstop.gaussian import make_setting
from isstop.numerics import chisq_quantile, make_rng
from isstop.stopping import (
    StopConfig,
    in_region,
    padding_s,
    region_volume,
    run_until_stop,
    threshold_L,
    write_trace_csv,
)


def test_volume_p1_is_interval_width():
    sigma = 1.7
    n = 400
    width = 2 * sps.norm.ppf(0.975) * sigma / math.sqrt(n)
    assert region_volume([[sigma**2]], n, 0.05) == pytest.approx(width, rel=1e-6)


def test_volume_unit_disk():
    n = chisq_quantile(0.95, 2)
    # n is not an integer, but the formula is continuous in n.
    assert region_volume(np.eye(2), n, 0.05) == pytest.approx(math.pi, rel=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3, 6])
def test_volume_scaling(p, rng):
    a = rng.normal(size=(p, p))
    om = a @ a.T + np.eye(p)
    ratio = region_volume(4 * om, 50, 0.1) / region_volume(om, 50, 0.1)
    assert ratio == pytest.approx(2.0**p, rel=1e-12)


def test_volume_singular():
    with pytest.raises(SingularCovarianceError):
        region_volume(np.diag([1.0, 0.0]), 10, 0.05)


def test_in_region_examples():
    assert in_region([0.0], [0.0], [[1.0]], 100, 0.05)
    assert not in_region([0.0], [0.3], [[1.0]], 100, 0.05)
    q = chisq_quantile(0.95, 1)
    # n * d^2 == q exactly: the boundary counts as outside.
    assert not in_region([0.0], [1.0], [[1.0]], q, 0.05)
    assert in_region([0.0], [0.999999], [[1.0]], q, 0.05)
    with pytest.raises(SingularCovarianceError):
        in_region([0.0, 0.0], [0.0, 0.0], np.zeros((2, 2)), 10, 0.05)


def test_threshold_examples():
    assert threshold_L(0.05, 0.1, 1) == pytest.approx(4 * 3.841459 / 0.01, rel=1e-6)
    assert threshold_L(0.05, 0.05, 2) == pytest.approx(math.pi * 5.991465 / 0.0025, rel=1e-6)
    for p in (1, 2, 5):
        assert threshold_L(0.05, 0.05, p) == pytest.approx(4 * threshold_L(0.05, 0.1, p), rel=1e-12)


def test_threshold_monotone():
    eps = [0.3, 0.2, 0.1, 0.05, 0.01]
    vals = [threshold_L(0.05, e, 3) for e in eps]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    # Smaller alpha means a larger chi-squared quantile.
    assert threshold_L(0.01, 0.1, 3) > threshold_L(0.05, 0.1, 3) > threshold_L(0.2, 0.1, 3)


def test_padding():
    assert padding_s(10, 0.1, 2.0, 1000) == pytest.approx(0.2 + 0.1)
    assert padding_s(1000, 0.1, 2.0, 1000) == pytest.approx(1e-3)
    assert padding_s(10**9, 0.1, 2.0, 1000) < 1e-8
    # Before n_star the rule can never pass: vol^(1/p) + s(n) > eps * r_n.
    assert 0.0 + padding_s(999, 0.1, 2.0, 1000) > 0.1 * 2.0
    with pytest.raises(DataError):
        padding_s(0, 0.1, 1.0, 10)


@pytest.mark.parametrize("kwargs", [
    dict(alpha=0.0, epsilon=0.1, p=2),
    dict(alpha=0.05, epsilon=0.0, p=2),
    dict(alpha=0.05, epsilon=0.1, p=2, n_star=2),
    dict(alpha=0.05, epsilon=0.1, p=2, check_every=0),
    dict(alpha=0.05, epsilon=0.1, p=2, max_n=10),
])
def test_config_validation(kwargs):
    with pytest.raises(DataError):
        StopConfig(**kwargs)


def test_config_defaults():
    assert StopConfig(0.05, 0.1, 2).n_star == 1000
    assert StopConfig(0.05, 0.1, 200).n_star == 2000


def _gauss(setting=1):
    prob = make_setting(setting, 2)
    return prob.sample, prob.h


def test_controller_stops_after_n_star():
    sampler, h = _gauss()
    cfg = StopConfig(0.05, 0.2, 2, n_star=1000, check_every=100)
    for rep in range(20):
        out = run_until_stop(sampler, h, "SNIS", cfg, make_rng(3, rep))
        assert out.terminated
        assert out.n_final >= 1000
        assert out.n_final % 100 == 0
        assert out.checks[-1].stopped and not any(c.stopped for c in out.checks[:-1])
        # Terminal M-ESS clears L up to the 1/n padding.
        assert out.mess_final >= out.threshold_L * (1 - 1e-2)


def test_controller_terminal_state():
    sampler, h = _gauss(2)
    cfg = StopConfig(0.05, 0.1, 2, check_every=250)
    out = run_until_stop(sampler, h, "SNIS", cfg, make_rng(9))
    assert out.terminated
    assert out.stats.n == out.n_final
    assert out.mu_star.shape == (2,)
    assert out.volume == pytest.approx(region_volume(out.omega_hat, out.n_final, 0.05))


def test_equivalence_ratios():
    sampler, h = _gauss(3)
    cfg = StopConfig(0.05, 0.05, 2, check_every=200)
    out = run_until_stop(sampler, h, "SNIS", cfg, make_rng(4))
    for c in out.checks:
        if c.n >= cfg.n_star:
            assert c.volume_ratio == pytest.approx(c.mess_ratio, rel=1e-9)


def test_max_n_reported():
    sampler, h = _gauss()
    cfg = StopConfig(0.05, 0.001, 2, n_star=1000, check_every=1000, max_n=3000)
    out = run_until_stop(sampler, h, "UIS", cfg, make_rng(0))
    assert not out.terminated
    assert out.n_final == 3000
    assert len(out.mess_per_n) == 3


def test_zero_weights_abort():
    def sampler(rng, m):
        return rng.normal(size=(m, 1)), np.full(m, -np.inf)

    with pytest.raises(DegenerateWeightsError):
        run_until_stop(sampler, lambda x: x, "SNIS", StopConfig(0.05, 0.1, 1), make_rng(0))


def test_singular_checks_continue():
    # h is constant for the first 2000 draws, so every early check is singular.
    state = {"n": 0}

    def sampler(rng, m):
        x = rng.normal(size=(m, 1))
        if state["n"] < 2000:
            x[:] = 1.0
        state["n"] += m
        return x, np.zeros(m)

    cfg = StopConfig(0.05, 0.2, 1, n_star=100, check_every=500)
    out = run_until_stop(sampler, lambda x: x, "SNIS", cfg, make_rng(0))
    assert out.singular_checks == 4
    assert out.terminated and out.n_final > 2000


def test_custom_r_hook():
    sampler, h = _gauss()
    cfg = StopConfig(0.05, 0.2, 2, check_every=500)
    seen = []

    def hook(sigma, stats):
        seen.append(stats.n)
        return 1e6

    out = run_until_stop(sampler, h, "SNIS", cfg, make_rng(1), r_hook=hook)
    assert out.n_final == cfg.n_star
    assert seen == [500, 1000]


def test_trace_csv(tmp_path):
    sampler, h = _gauss()
    out = run_until_stop(sampler, h, "SNIS", StopConfig(0.05, 0.2, 2, check_every=500), make_rng(2))
    path = tmp_path / "trace.csv"
    write_trace_csv(out.checks, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["n", "volume", "mess", "kong", "threshold_L", "stopped"]
    assert len(rows) == 1 + len(out.checks)
    assert rows[-1][-1] == "1"
