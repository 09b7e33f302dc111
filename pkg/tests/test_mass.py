import csv
import io
import random
from fractions import Fraction as F

import pytest

from toppler.graphs import Comb, DaryTree, Lattice
from toppler.mass import InvalidMove, MassDist, compare, mass_outside

Z1, Z2 = Lattice(1), Lattice(2)


def test_topple_z1_unit():
    mu = MassDist.delta(Z1, exact=True)
    mu.topple((0,), 1)
    assert mu.masses == {(-1,): F(1, 2), (1,): F(1, 2)}
    assert mu.moves == 1


def test_topple_z2_unit():
    mu = MassDist.delta(Z2, exact=True)
    mu.topple((0, 0), 1)
    assert mu.masses == {v: F(1, 4) for v in [(-1, 0), (0, -1), (0, 1), (1, 0)]}


def test_three_move_sequence():
    mu = MassDist.delta(Z1, exact=True, record=True)
    mu.topple((0,), 1)
    mu.topple((1,), F(1, 2))
    assert mu.masses == {(-1,): F(1, 2), (0,): F(1, 4), (2,): F(1, 4)}
    mu.topple((-1,), F(1, 2))
    assert mu.masses == {(-2,): F(1, 4), (0,): F(1, 2), (2,): F(1, 4)}
    assert [r.index for r in mu.trace.records] == [1, 2, 3]
    assert [r.mass for r in mu.trace.records] == [1, F(1, 2), F(1, 2)]


def test_full_topple_same_examples():
    mu = MassDist.delta(Z1, exact=True)
    mu.full_topple((0,))
    mu.full_topple((1,))
    mu.full_topple((-1,))
    assert mu.masses == {(-2,): F(1, 4), (0,): F(1, 2), (2,): F(1, 4)}
    assert (1,) not in mu.masses


def test_float_matches_exact_on_dyadic_sequence():
    a = MassDist.delta(Z1)
    b = MassDist.delta(Z1, exact=True)
    for v in [(0,), (1,), (-1,)]:
        a.full_topple(v)
        b.full_topple(v)
    assert compare(a, b) == 0


def test_invalid_moves():
    mu = MassDist.delta(Z1, exact=True)
    with pytest.raises(InvalidMove):
        mu.topple((0,), 0)
    with pytest.raises(InvalidMove):
        mu.topple((0,), -1)
    with pytest.raises(InvalidMove):
        mu.topple((0,), 2)
    with pytest.raises(InvalidMove):
        mu.full_topple((5,))


def test_float_clamp_is_counted():
    mu = MassDist.delta(Z1)
    mu.topple((0,), 1.0 + 5e-13)
    assert mu.clamps == 1
    assert (0,) not in mu.masses
    with pytest.raises(InvalidMove):
        MassDist.delta(Z1).topple((0,), 1.0 + 1e-9)


def test_mass_outside_examples():
    mu = MassDist.delta(Z1, exact=True)
    assert mass_outside(mu, 1) == 0
    assert mass_outside(mu, 0) == 1
    mu = MassDist(Z1, {(-2,): F(1, 4), (0,): F(1, 2), (2,): F(1, 4)}, exact=True)
    assert mass_outside(mu, 2) == F(1, 2)


def test_registered_radius_tracks_incrementally():
    rng = random.Random(0)
    for g in (Z2, Comb(), DaryTree(2)):
        mu = MassDist.delta(g, exact=True)
        mu.register_radius(3)
        for _ in range(40):
            v = sorted(mu.masses)[rng.randrange(len(mu.masses))]
            mu.topple(v, mu[v] * F(rng.randint(1, 3), 3))
            assert mu.mass_outside() == mass_outside(mu, 3)


def test_random_run_float_vs_exact():
    rng = random.Random(7)
    a = MassDist.delta(Z2)
    b = MassDist.delta(Z2, exact=True)
    for _ in range(1000):
        v = sorted(b.masses)[rng.randrange(len(b.masses))]
        a.full_topple(v)
        b.full_topple(v)
    assert compare(a, b) <= 1e-12
    assert b.total() == 1
    assert abs(a.total() - 1) < 1e-9


def test_copy_is_independent():
    mu = MassDist.delta(Z1)
    nu = mu.copy()
    nu.full_topple((0,))
    assert mu.masses == {(0,): 1.0}


def test_to_exact_preserves_values():
    mu = MassDist.delta(Z2)
    for v in [(0, 0), (1, 0), (0, 1)]:
        mu.full_topple(v)
    assert compare(mu, mu.to_exact()) == 0


def test_dump_csv_sorted():
    mu = MassDist.delta(Z1, exact=True)
    mu.full_topple((0,))
    text = mu.dump_csv()
    assert text.splitlines() == ["vertex_encoding,mass", "(-1),1/2", "(1),1/2"]
    fl = MassDist.delta(Z2)
    fl.full_topple((0, 0))
    rows = list(csv.reader(io.StringIO(fl.dump_csv())))[1:]
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)
    assert rows[0] == ["(-1,0)", "0.25"]
    assert {Z2.decode(e) for e, _ in rows} == set(fl.masses)


def test_negative_initial_mass_rejected():
    with pytest.raises(ValueError):
        MassDist(Z1, {(0,): 1.5, (1,): -0.5})
