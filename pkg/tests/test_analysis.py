import io
import math

import numpy as np
import pytest

from conftest import linear_config
from memodiff.analysis import (AttractorSnapshot, absorbing_check, absorbing_entry_time, ball_ensemble,
                               contraction_check, dissipative_bound_check, dissipation_constant, energy_inequality_check,
                               ensemble_directions, hausdorff_semidistance, mt_norm_sq, pullback_attractor_approx)
from memodiff.dynamics import evolve, evolve_many
from memodiff.errors import ComparabilityError, ConfigurationError, EmptySetError, NormRangeError
from memodiff.memory import constant_past_history, zero_history
from memodiff.model import NonlinearitySpec, SystemState, make_config, zero_state


@pytest.fixture(scope="module")
def unforced():
    return make_config(n_modes=8, n_quad=32, s_step=0.05, g=None, nonlinearity=NonlinearitySpec(l=0.0))


def test_mt_norm_examples(default_config):
    cfg = default_config
    assert mt_norm_sq(zero_state(cfg), cfg, 0) == 0.0
    u = cfg.basis.mode(1)
    z = SystemState(0.0, u, zero_history(cfg.grid, cfg.basis.n_modes))
    assert mt_norm_sq(z, cfg, 0) == pytest.approx(1.5, rel=1e-14)
    z = SystemState(0.0, u, constant_past_history(u, cfg.grid))
    assert mt_norm_sq(z, cfg, 1) == pytest.approx(3.5, abs=1e-6)


@pytest.mark.parametrize("sigma", [-0.5, 1.5])
def test_mt_norm_range(small_config, sigma):
    with pytest.raises(NormRangeError):
        mt_norm_sq(zero_state(small_config), small_config, sigma)


def test_absorbing_entry_time_examples():
    assert absorbing_entry_time(1.0, 3.0, 0.4) == 0.0
    alpha, Q = 0.4, 2.0
    assert absorbing_entry_time(math.sqrt(math.exp(alpha) * (1 + Q)), Q, alpha) == pytest.approx(1.0, rel=1e-14)
    # R^2 = e^{2 alpha}(1+Q) with alpha = 0.5 is ln(e)/0.5 = 2
    assert absorbing_entry_time(math.sqrt(math.exp(1.0) * (1 + Q)), Q, 0.5) == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(ConfigurationError):
        absorbing_entry_time(10.0, 1.0, 0.0)


def test_entry_time_four():
    assert absorbing_entry_time(math.sqrt(math.exp(2.0) * 4.0), 3.0, 0.5) == pytest.approx(4.0, rel=1e-14)


def test_dissipative_unforced_is_pure_decay(unforced):
    z = ball_ensemble(unforced, 1, 50.0)[0]
    tr = evolve(z, 0.0, 10.0, 0.05, unforced, sample_every=0.25, keep_states=False)
    rep = dissipative_bound_check(tr, unforced)
    assert rep.info["Q"] == 0.0 and rep.passed


def test_dissipative_zero_data(unforced):
    tr = evolve(zero_state(unforced), 0.0, 2.0, 0.05, unforced, sample_every=0.5)
    rep = dissipative_bound_check(tr, unforced)
    assert rep.passed and not np.any(rep.lhs) and not np.any(rep.rhs)


def test_dissipative_and_absorbing_small(small_config):
    zs = ball_ensemble(small_config, 4, [1.0, 10.0, 50.0, 100.0])
    trs = evolve_many(zs, 0.0, 20.0, 0.05, small_config, sample_every=0.25, keep_states=False)
    assert all(dissipative_bound_check(tr, small_config).passed for tr in trs)
    assert all(energy_inequality_check(tr, small_config).passed for tr in trs)
    rep = absorbing_check(trs, small_config, 10.0)
    assert rep.passed
    Q, _ = dissipation_constant(trs, small_config)
    assert rep.info["t0"] == absorbing_entry_time(10.0, Q, small_config.alpha)


def test_contraction_identical_data(small_config):
    z = ball_ensemble(small_config, 1, 4.0)[0]
    a = evolve(z, 0.0, 2.0, 0.05, small_config, sample_every=0.5)
    b = evolve(z, 0.0, 2.0, 0.05, small_config, sample_every=0.5)
    for rep in contraction_check(a, b, small_config):
        assert rep.passed and not np.any(rep.lhs)
        np.testing.assert_array_equal(rep.margin, rep.rhs)


def test_contraction_without_l_is_nonexpansive(unforced):
    za, zb = ball_ensemble(unforced, 2, [9.0, 25.0])
    a = evolve(za, 0.0, 5.0, 0.05, unforced, sample_every=0.25)
    b = evolve(zb, 0.0, 5.0, 0.05, unforced, sample_every=0.25)
    uniq, dec = contraction_check(a, b, unforced, lipschitz_slack=0.0)
    assert uniq.passed and dec.passed
    assert np.all(np.diff(uniq.lhs) <= 0)


def test_contraction_decomposition_default_pair(default_config):
    za, zb = ball_ensemble(default_config, 2, [50.0, 100.0])
    a, b = evolve_many([za, zb], 0.0, 20.0, 0.01, default_config, sample_every=0.5)
    uniq, dec = contraction_check(a, b, default_config)
    assert dec.passed
    late = dec.t >= 10.0
    psi = dec.rhs - np.exp(-default_config.alpha_strong * (dec.t - dec.t[0])) * dec.lhs[0]
    assert np.all(psi[late] > np.exp(-default_config.alpha_strong * (dec.t[late] - dec.t[0])) * dec.lhs[0])


def test_contraction_needs_same_grid(small_config):
    z = zero_state(small_config)
    a = evolve(z, 0.0, 1.0, 0.05, small_config, sample_every=0.5)
    b = evolve(z, 0.0, 1.0, 0.1, small_config, sample_every=0.5)
    with pytest.raises(ComparabilityError):
        contraction_check(a, b, small_config)


def test_hausdorff_examples(small_config):
    zs = ball_ensemble(small_config, 4, [1.0, 2.0, 3.0, 4.0])
    assert hausdorff_semidistance(zs, zs, small_config) == 0.0
    d = hausdorff_semidistance(zs[:1], zs[1:2], small_config)
    assert d == pytest.approx(mt_norm_sq(zs[0] - zs[1], small_config) ** 0.5, rel=1e-12)
    assert hausdorff_semidistance(zs[:2], zs, small_config) == 0.0
    with pytest.raises(EmptySetError):
        hausdorff_semidistance([], zs, small_config)
    with pytest.raises(ComparabilityError):
        hausdorff_semidistance(zs[:1], [zs[1].at(1.0)], small_config)


def test_ball_ensemble_norms(default_config):
    targets = np.geomspace(1.0, 100.0, 5)
    zs = ball_ensemble(default_config, 5, targets)
    np.testing.assert_allclose([mt_norm_sq(z, default_config) for z in zs], targets, rtol=1e-12)
    assert all(z.eta.is_valid() for z in zs)


def test_ensemble_directions_are_deterministic_units():
    a, b = ensemble_directions(7), ensemble_directions(7)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0, rtol=1e-14)


def test_pullback_single_tau(small_config):
    snap, rep = pullback_attractor_approx(0.0, [-2.0], 1, 3.0, small_config, dt=0.05)
    assert len(snap.points) == 1 and rep.lhs[0] == 0.0 and rep.passed


def test_pullback_unforced_collapses(unforced):
    snap, rep = pullback_attractor_approx(0.0, [-5.0, -10.0, -15.0], 3, 5.0, unforced, dt=0.05,
                                          reference=[zero_state(unforced)])
    assert rep.passed
    assert np.all(rep.lhs[1:] / rep.lhs[:-1] <= np.exp(-unforced.alpha / 2 * 5.0))
    buf = io.StringIO()
    snap.write_csv(buf)
    assert len(buf.getvalue().splitlines()) == 4


def test_pullback_rejects_increasing_taus(small_config):
    with pytest.raises(ConfigurationError):
        pullback_attractor_approx(0.0, [-10.0, -5.0], 1, 1.0, small_config)


def test_snapshot_requires_common_time(small_config):
    with pytest.raises(ComparabilityError):
        AttractorSnapshot(0.0, [zero_state(small_config, 1.0)], (-1.0,), 1.0, small_config)


def test_linear_dissipative_bound():
    cfg = linear_config(eps0=1.0, s_step=0.05, n_modes=4, n_quad=16)
    z = SystemState(0.0, cfg.basis.mode(1), zero_history(cfg.grid, 4))
    rep = dissipative_bound_check(evolve(z, 0.0, 5.0, 0.05, cfg, sample_every=0.5), cfg)
    assert rep.passed and rep.info["Q"] == 0.0
