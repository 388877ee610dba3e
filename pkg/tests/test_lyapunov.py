"""Per-shell energy functionals, coercivity margins, and the residual check."""

import numpy as np
import pytest

from eulerfourier.grid import PeriodicGrid, StateFields
from eulerfourier.littlewood import LittlewoodPaley
from eulerfourier.lyapunov import (
    StrideTooCoarse,
    coercivity_margin,
    commutator_remainders,
    high_freq_functionals,
    low_freq_functionals,
    lyapunov_residual,
    mode_energy_record,
)
from eulerfourier.randfields import ball_field
from eulerfourier.solver import SolverConfig, TrajectoryRecord, integrate

GRID = PeriodicGrid(dim=1, npts=256, length=8.0 * np.pi)
LP = LittlewoodPaley(GRID)


def _mode_state(component, k, amp=1e-2):
    (x,) = GRID.coordinates()
    state = StateFields.zeros(GRID)
    f = amp * np.cos(k * x)
    if component == "a":
        state.a = f
    elif component == "u":
        state.u[0] = f
    else:
        state.theta = f
    return state


def test_functionals_vanish_on_zero_state():
    zero = StateFields.zeros(GRID)
    for j in (-1, 0, 2):
        assert low_freq_functionals(LP, zero, j) == (0.0, 0.0)
        assert high_freq_functionals(LP, zero, j) == (0.0, 0.0)


def test_low_functionals_on_single_component_modes():
    k, j = 1.0, 0  # mode lands in shells {-1, 0}
    eta = 0.1
    a_state = _mode_state("a", k)
    a_j = GRID.l2_norm(LP.block(a_state.a, j))
    e1, d1 = low_freq_functionals(LP, a_state, j, eta1=eta)
    assert np.isclose(e1, 0.5 * a_j**2, rtol=1e-12)
    assert np.isclose(d1, eta * k**2 * a_j**2, rtol=1e-12)

    th_state = _mode_state("theta", k)
    th_j = GRID.l2_norm(LP.block(th_state.theta, j))
    e1, d1 = low_freq_functionals(LP, th_state, j, eta1=eta)
    assert np.isclose(e1, 0.5 * th_j**2, rtol=1e-12)
    assert np.isclose(d1, k**2 * th_j**2, rtol=1e-12)

    u_state = _mode_state("u", k)
    u_j = GRID.l2_norm(LP.block(u_state.u[0], j))
    e1, d1 = low_freq_functionals(LP, u_state, j, eta1=eta)
    assert np.isclose(e1, 0.5 * u_j**2, rtol=1e-12)
    # 1d velocity is all divergence: D1 = (1 - eta k^2) |u_j|^2
    assert np.isclose(d1, (1.0 - eta * k**2) * u_j**2, rtol=1e-12)


def test_high_functionals_on_single_component_modes():
    k, j, eta = 2.0, 1, 0.1
    beta = eta * 2.0 ** (-2 * j)
    u_state = _mode_state("u", k)
    u_j = GRID.l2_norm(LP.block(u_state.u[0], j))
    e2, d2 = high_freq_functionals(LP, u_state, j, eta2=eta)
    assert np.isclose(e2, 0.5 * u_j**2, rtol=1e-12)
    assert np.isclose(d2, (1.0 - beta * k**2) * u_j**2, rtol=1e-12)

    th_state = _mode_state("theta", k)
    th_j = GRID.l2_norm(LP.block(th_state.theta, j))
    e2, d2 = high_freq_functionals(LP, th_state, j, eta2=eta)
    assert np.isclose(e2, 0.5 * th_j**2, rtol=1e-12)
    assert np.isclose(d2, k**2 * th_j**2, rtol=1e-12)


def test_energy_weight_uses_unfiltered_state():
    # With a nonzero background the density term carries (1+theta)/(1+a)^2.
    k, j = 1.0, 0
    state = _mode_state("a", k, amp=5e-2)
    weight = (1.0 + state.theta) / (1.0 + state.a) ** 2
    a_j = LP.block(state.a, j)
    expected = 0.5 * GRID.cell_volume * np.sum(weight * a_j * a_j)
    e2, _ = high_freq_functionals(LP, state, j)
    assert np.isclose(e2, expected, rtol=1e-12)


def test_eta_range_is_validated():
    state = _mode_state("a", 1.0)
    with pytest.raises(ValueError, match="eta1"):
        low_freq_functionals(LP, state, 0, eta1=1.5)
    with pytest.raises(ValueError, match="eta2"):
        high_freq_functionals(LP, state, 0, eta2=0.0)


def test_low_energy_equivalence_on_far_low_shells(rng):
    # For j <= -2 the cross term is bounded by eta * (8/3) 2^j algebraically,
    # so E1 is pinned to the quadratic shell norm with that margin.
    eta = 0.1
    grid = PeriodicGrid(dim=1, npts=256, length=64.0 * np.pi)
    lp = LittlewoodPaley(grid)
    for j in (-3, -2):
        slack = eta * (8.0 / 3.0) * 2.0**j
        for _ in range(25):
            state = StateFields.zeros(grid)
            state.a = ball_field(grid, rng, scale_j=j, cutoffs=lp.cutoffs)
            state.u[0] = ball_field(grid, rng, scale_j=j, cutoffs=lp.cutoffs)
            state.theta = ball_field(grid, rng, scale_j=j, cutoffs=lp.cutoffs)
            q = 0.5 * sum(
                grid.l2_norm(lp.block(f, j)) ** 2 for f in state.components()
            )
            if q == 0.0:
                continue
            e1, _ = low_freq_functionals(lp, state, j, eta1=eta)
            assert (1.0 - slack) * q - 1e-12 <= e1 <= (1.0 + slack) * q + 1e-12


def test_coercivity_margins_by_regime():
    # Low-frequency form is coercive only up to the split, high-frequency
    # from just below it; the margins are strictly positive there.
    for j in (-4, -2, 0):
        m = coercivity_margin(j, eta=0.1, regime="low")
        assert 0.0 < m <= 1.0
    for j in (-1, 0, 2, 4):
        m = coercivity_margin(j, eta=0.1, regime="high")
        assert 0.0 < m <= 1.0
    with pytest.raises(ValueError, match="coercivity"):
        coercivity_margin(2, eta=0.1, regime="low")
    with pytest.raises(ValueError, match="regime"):
        coercivity_margin(0, eta=0.1, regime="middle")


def test_commutators_vanish_for_constant_coefficients(rng):
    # Uniform a and u make every commutator coefficient constant; a varying
    # temperature keeps the Delta-theta remainder from being trivially zero.
    state = StateFields.zeros(GRID)
    state.a = np.full(GRID.shape, 0.05)
    state.u[0] = np.full(GRID.shape, 0.1)
    fhat = GRID.forward(rng.standard_normal(GRID.shape))
    fhat[GRID.kmag > 4.0] = 0.0
    state.theta = 0.1 * GRID.inverse(fhat)
    r1, r2, r3 = commutator_remainders(LP, state, j=0)
    assert GRID.l2_norm(r1) < 1e-13
    assert max(GRID.l2_norm(c) for c in r2) < 1e-13
    assert GRID.l2_norm(r3) < 1e-13


def test_commutators_are_nonzero_for_varying_coefficients(rng):
    state = StateFields.zeros(GRID)
    fhat = GRID.forward(rng.standard_normal(GRID.shape))
    fhat[GRID.kmag > 4.0] = 0.0
    state.a = 0.1 * GRID.inverse(fhat)
    state.u[0] = 0.1 * GRID.inverse(fhat * np.exp(0.5j))
    state.theta = 0.1 * GRID.inverse(fhat * np.exp(1.0j))
    r1, _, _ = commutator_remainders(LP, state, j=0)
    assert GRID.l2_norm(r1) > 1e-8


def test_mode_energy_record_row():
    rec = mode_energy_record(LP, _mode_state("a", 1.0), j=0)
    row = rec.as_row()
    assert {"j", "E1", "D1", "E2", "D2"} <= set(row)
    assert row["E1"] > 0.0


def _small_run(amplitude):
    grid = PeriodicGrid(dim=1, npts=512, length=8.0 * np.pi)
    rng = np.random.default_rng(21)
    state = StateFields.zeros(grid)
    state.a = amplitude * ball_field(grid, rng, scale_j=4)
    state.u[0] = amplitude * ball_field(grid, rng, scale_j=4)
    state.theta = amplitude * ball_field(grid, rng, scale_j=4)
    cfg = SolverConfig(dt=5e-5, t_end=7.5e-4, sample_stride=1,
                       snapshot_stride=1, epsilon0=None)
    return integrate(grid, state, cfg)


@pytest.mark.parametrize("amplitude", [1e-4, 0.05])
def test_residual_inequality_holds_along_runs(amplitude):
    traj = _small_run(amplitude)
    for regime, j in [("low", 0), ("low", -1), ("high", 2), ("high", 0)]:
        series = lyapunov_residual(traj, j, regime=regime)
        assert series.passed, (
            f"{regime} shell {j} at amplitude {amplitude}: "
            f"worst ratio {np.max(series.ratio)}"
        )
        assert series.coercivity_margin > 0.0


def test_residual_is_vacuous_on_spectrally_empty_shells():
    # data band-limited far below shell 3: that shell only ever holds the
    # solve's roundoff, and the residual must report vacuous passes there
    # instead of differencing noise against a tiny nonlinear bound
    grid = PeriodicGrid(dim=1, npts=512, length=8.0 * np.pi)
    rng = np.random.default_rng(33)
    state = StateFields.zeros(grid)
    state.a = 1e-3 * ball_field(grid, rng, scale_j=0)
    state.u[0] = 1e-3 * ball_field(grid, rng, scale_j=0)
    state.theta = 1e-3 * ball_field(grid, rng, scale_j=0)
    cfg = SolverConfig(dt=5e-5, t_end=7.5e-4, sample_stride=1,
                       snapshot_stride=1, epsilon0=None)
    traj = integrate(grid, state, cfg)
    series = lyapunov_residual(traj, 3, regime="high")
    assert series.passed
    assert np.all(series.ratio == 0.0), "empty shell must pass vacuously"


def test_residual_requires_enough_snapshots():
    traj = _small_run(1e-4)
    starved = TrajectoryRecord(
        grid=traj.grid, config=traj.config, dt=traj.dt, times=traj.times,
        shell_a=traj.shell_a, shell_u=traj.shell_u, shell_theta=traj.shell_theta,
        mean_a=traj.mean_a, max_speed=traj.max_speed,
        snapshot_times=traj.snapshot_times[:4], snapshots=traj.snapshots[:4],
        shells=traj.shells,
    )
    with pytest.raises(StrideTooCoarse, match="five snapshots"):
        lyapunov_residual(starved, 0, regime="low")


def test_residual_rejects_coarse_sampling():
    # A fast oscillation sampled at a tenth of its period leaves the centered
    # difference with more error than dissipation at every snapshot.
    grid = PeriodicGrid(dim=1, npts=64, length=2.0 * np.pi)
    (x,) = grid.coordinates()
    times = 0.1 * np.arange(10)
    snaps = []
    for t in times:
        s = StateFields.zeros(grid)
        s.a = 0.1 * (1.0 + 0.5 * np.sin(20.0 * t)) * np.cos(5.0 * x)
        snaps.append(s)
    traj = TrajectoryRecord(
        grid=grid, config=SolverConfig(dt=0.1, t_end=1.0), dt=0.1,
        times=times, shell_a={}, shell_u={}, shell_theta={},
        mean_a=np.zeros_like(times), max_speed=np.zeros_like(times),
        snapshot_times=list(times), snapshots=snaps,
        shells=list(LittlewoodPaley(grid).shells),
    )
    with pytest.raises(StrideTooCoarse, match="differencing error"):
        lyapunov_residual(traj, 2, regime="high")
