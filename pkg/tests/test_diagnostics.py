import math
import random
from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest

from toppler.diagnostics import (KernelRangeError, Unsupported, avg_level, check_energy_m2,
                                 check_trace, closed_forms, energy, exact_diagonal,
                                 exact_exit_time, find_large_mass, fit_kappa, harmonic_residual,
                                 mc_exit_time, mc_green_decay, mc_speed, potential_kernel,
                                 second_moment)
from toppler.diagnostics.walks import _lamp_walks
from toppler.graphs import Comb, DaryTree, Lamplighter, Lattice, ProductTree, RegularTree
from toppler.mass import MassDist
from toppler.strategies import greedy

Z1, Z2, Z3 = Lattice(1), Lattice(2), Lattice(3)


@pytest.fixture(scope="module")
def k2():
    return potential_kernel(2, 64)


@pytest.fixture(scope="module")
def k3():
    return potential_kernel(3, 32)


# -- moments -------------------------------------------------------------------

def test_second_moment_examples():
    assert second_moment(MassDist.delta(Z2)) == 0
    assert second_moment(MassDist(Z1, {(-1,): F(1, 2), (1,): F(1, 2)}, exact=True)) == 1
    with pytest.raises(Unsupported):
        second_moment(MassDist.delta(Comb()))


def test_second_moment_gains_toppled_mass():
    res = greedy(Z2, 6, 0.5, record=True)
    total = sum(r.mass for r in res.trace.records)
    assert abs(second_moment(res.dist) - total) < 1e-9


def test_avg_level_examples():
    T = DaryTree(2)
    assert avg_level(MassDist.delta(T)) == 0
    assert find_large_mass(MassDist.delta(T), 0) == ()
    lvl2 = MassDist(T, {v: F(1, 4) for v in product(range(2), repeat=2)}, exact=True)
    assert avg_level(lvl2) == 2
    with pytest.raises(Unsupported):
        avg_level(MassDist.delta(Z1))


def test_find_large_mass_absent_is_not_error():
    T = DaryTree(2)
    far = MassDist(T, {v: F(1, 8) for v in product(range(2), repeat=3)}, exact=True)
    assert find_large_mass(far, 1) is None


def test_find_large_mass_random_distributions():
    rng = random.Random(5)
    T = DaryTree(2)
    verts = T.ball(8)
    checked = 0
    while checked < 1000:
        ell = rng.randint(1, 5)
        k = rng.randint(1, 40)
        picks = [verts[rng.randrange(len(verts))] for _ in range(k)]
        w = [rng.random() ** 3 for _ in picks]
        s = sum(w)
        masses = {}
        for v, x in zip(picks, w):
            masses[v] = masses.get(v, 0) + x / s
        mu = MassDist(T, masses)
        if avg_level(mu) <= ell:
            checked += 1
            assert find_large_mass(mu, ell) is not None


# -- kernel --------------------------------------------------------------------

def test_kernel_d1_exact():
    K = potential_kernel(1, 10)
    for x in range(-10, 11):
        assert K((x,)) == abs(x)


def test_kernel_d2_exact_values(k2):
    assert k2((0, 0)) == 0
    assert abs(k2((1, 0)) - 1) < 1e-9
    assert abs(k2((1, 1)) - 4 / math.pi) < 1e-9
    for n in (2, 5, 10, 20, 40, 64):
        assert abs(k2((n, n)) - exact_diagonal(n)) < 1e-8


def test_kernel_symmetry(k2, k3):
    assert np.array_equal(k2.a, k2.a[::-1, ::-1])
    assert np.abs(k2.a - k2.a.T).max() < 1e-14
    assert np.array_equal(k3.g, k3.g[::-1, ::-1, ::-1])


def test_kernel_d2_harmonic(k2):
    assert k2.converged
    assert harmonic_residual(k2) <= 10 * k2.tol


def test_kernel_d2_kappa(k2):
    kappa, spread = fit_kappa(k2, 10, 30)
    assert spread < 0.01
    assert abs(kappa - 1.029) < 0.002
    # agrees with the classical closed form (2 gamma + ln 8) / pi
    assert abs(kappa - (2 * np.euler_gamma + math.log(8)) / math.pi) < 0.002


def test_kernel_d3_green_decay(k3):
    x = np.arange(-32, 33)
    r = np.sqrt(x[:, None, None] ** 2 + x[None, :, None] ** 2 + x[None, None, :] ** 2)
    sel = (r >= 10) & (r <= 30)
    ratio = k3.g[sel] * r[sel] / (3 / (2 * math.pi))
    assert np.abs(ratio - 1).max() < 0.05
    assert harmonic_residual(k3) <= 10 * k3.tol
    assert abs(k3.green((0, 0, 0)) - 1.516386) < 1e-5  # return-time constant of Z^3
    assert k3((0, 0, 0)) == 0


def test_kernel_walk_audit_matches_bessel(k2):
    W = potential_kernel(2, 2, tol=1e-9, method="walk", pad=30)
    assert W.converged
    for x in product(range(-2, 3), repeat=2):
        assert abs(W(x) - k2(x)) < 2e-3
    assert W.raw["partial_sums"]


def test_kernel_errors():
    with pytest.raises(ValueError):
        potential_kernel(2, 65)
    with pytest.raises(KernelRangeError):
        potential_kernel(2, 4)((5, 0))


# -- energy --------------------------------------------------------------------

def test_energy_examples(k2):
    assert energy(MassDist.delta(Z1, exact=True)) == 0
    assert energy(MassDist.delta(Z2), k2) == 0
    two = MassDist(Z1, {(-1,): F(1, 2), (1,): F(1, 2)}, exact=True)
    assert energy(two) == 1
    assert energy(two.to_float()) == 1.0


def test_energy_d1_kernel_table_agrees():
    mu = greedy(Z1, 6, 0.5, exact=True).dist
    assert abs(energy(mu.to_float(), potential_kernel(1, 20)) - float(energy(mu))) < 1e-12


def test_energy_range_error():
    K = potential_kernel(2, 4)
    mu = MassDist(Z2, {(0, 0): 0.5, (5, 0): 0.5})
    with pytest.raises(KernelRangeError):
        energy(mu, K)
    with pytest.raises(ValueError):
        energy(MassDist.delta(Z2))


def test_energy_per_step_identity_exact():
    rng = random.Random(9)
    mu = MassDist.delta(Z1, exact=True)
    e = energy(mu)
    for _ in range(200):
        v = sorted(mu.masses)[rng.randrange(len(mu.masses))]
        m = mu[v] * F(rng.randint(1, 3), 3)
        before = mu[v]
        mu.topple(v, m)
        e2 = energy(mu)
        assert e2 - e == 2 * m * before - m * m
        e = e2


def test_check_energy_trivial_and_greedy():
    rep = check_energy_m2(MassDist.delta(Z1), MassDist.delta(Z1), 0)
    assert rep.ok and rep.lhs == 0 and rep.rhs == 0
    res = greedy(Z1, 8, 0.5, record=True, exact=True)
    rep = check_trace(MassDist.delta(Z1, exact=True), res.trace)
    assert rep.ok and rep.slack >= 0
    assert rep.t == res.moves


def test_check_energy_random_z2(k2):
    rng = random.Random(4)
    for _ in range(100):
        mu = MassDist.delta(Z2, record=True)
        for _ in range(rng.randint(1, 40)):
            cand = sorted(v for v in mu.masses if Z2.distance(v) < 6)
            mu.full_topple(cand[rng.randrange(len(cand))])
        rep = check_trace(MassDist.delta(Z2), mu.trace, k2)
        assert rep.ok, rep


# -- walks ---------------------------------------------------------------------

def test_closed_forms_examples():
    cf = closed_forms(2, 2)
    assert cf["ell"] == pytest.approx(1 / 3) and cf["theta"] == pytest.approx(2)
    cf = closed_forms(3, 1)
    assert cf["h"] == pytest.approx(math.log(3) / 3)
    assert cf["ell"] == pytest.approx(1 / 3) and cf["theta"] == pytest.approx(3)
    with pytest.raises(ValueError):
        closed_forms(1, 2)
    with pytest.raises(ValueError):
        closed_forms(1, 1)


def test_closed_form_identity_all():
    for d in range(1, 7):
        for k in range(1, d + 1):
            if d + k >= 3:
                cf = closed_forms(d, k)
                assert abs(math.exp(cf["h"] / cf["ell"]) - cf["theta"]) <= 1e-12 * cf["theta"]


def test_exact_exit_time_z1():
    for n in (1, 2, 4, 7):
        assert exact_exit_time(Z1, Z1.ball(n)) == pytest.approx(n * n)


def test_mc_exit_time_agrees():
    st = mc_exit_time(Z2, Z2.ball(4), 20_000, seed=2)
    assert abs(st.estimate - exact_exit_time(Z2, Z2.ball(4))) < 5 * st.stderr


def test_speed_regular_tree():
    st = mc_speed(RegularTree(2), 1000, 10_000, seed=3)
    assert abs(st.estimate / (1 / 3) - 1) < 0.02


def test_speed_product_tree():
    st = mc_speed(ProductTree(3, 2), 1000, 10_000, seed=4)
    assert abs(st.estimate / (3 / 7) - 1) < 0.02


def test_speed_generic_walker_agrees_with_fast_path():
    g = ProductTree(2, 2)
    fast = mc_speed(g, 60, 4000, seed=1)

    class Wrapped:
        origin = g.origin
        neighbors = staticmethod(g.neighbors)
        distance = staticmethod(g.distance)

    slow = mc_speed(Wrapped(), 60, 4000, seed=1)
    assert abs(fast.estimate - slow.estimate) < 5 * math.hypot(fast.stderr, slow.stderr)


def test_stderr_shrinks_with_samples():
    a = mc_speed(ProductTree(2, 2), 200, 4000, seed=1)
    b = mc_speed(ProductTree(2, 2), 200, 16000, seed=2)
    assert 1.6 < a.stderr / b.stderr < 2.4


def test_lamplighter_walker_distance_law():
    # exact expected shell visits over steps 0..3 by enumerating all 8^3 paths
    L = Lamplighter()
    expect = np.zeros(8)
    frontier = {L.origin: 1.0}
    for step in range(4):
        for v, w in frontier.items():
            expect[L.distance(v)] += w
        nxt = {}
        for v, w in frontier.items():
            for u in L.neighbors(v):
                nxt[u] = nxt.get(u, 0) + w / 8
        frontier = nxt
    out = np.zeros(8)
    N = 400_000
    _lamp_walks(N, 3, 7, 123, out)
    est = out / N
    assert np.abs(est - expect).max() < 0.01


def test_green_decay_properties():
    st = mc_green_decay(Lamplighter(), 8, 20_000, seed=1, steps=300)
    g = st.extra["g_hat"]
    assert g[0] >= 1
    assert all(b <= a for a, b in zip(g, g[1:]))
    assert st.estimate < 0 and abs(st.estimate) / st.stderr > 3
    with pytest.raises(ValueError):
        mc_green_decay(Z2)
