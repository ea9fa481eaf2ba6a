import itertools

import numpy as np
import pytest

from qampnc.constellation import pam, psk, qam
from qampnc.gaussian import GaussianInt, GaussianRational
from qampnc.singular_fades import (
    ConstraintError,
    ConstraintSet,
    constraints_for,
    coprime_pairs,
    count_closed_form,
    count_pam,
    count_psk,
    count_qam,
    enumerate_singular_fades,
    fade_class,
    upper_bound_qam,
)


def brute_ratios(points: np.ndarray) -> set[tuple[float, float]]:
    """All -d_k/d_l over nonzero differences, rounded for set comparison."""
    d = {complex(round(x.real, 9), round(x.imag, 9)) for x in (points[:, None] - points[None, :]).ravel()}
    d.discard(0j)
    out = set()
    for dk, dl in itertools.product(d, repeat=2):
        r = -dk / dl
        out.add((round(r.real, 7) + 0.0, round(r.imag, 7) + 0.0))
    return out


@pytest.mark.parametrize("C", [pam(2), pam(3), pam(5), qam(4), qam(16), psk(4), psk(8)], ids=lambda C: C.name)
def test_enumeration_matches_brute_force(C):
    H = enumerate_singular_fades(C)
    got = {(round(v.real, 7) + 0.0, round(v.imag, 7) + 0.0) for v in H.values}
    assert got == brute_ratios(C.points)
    assert len(H) == count_closed_form(C)


def test_known_counts():
    assert [count_pam(n) for n in range(2, 9)] == [2, 6, 14, 22, 38, 46, 70]
    assert count_qam(4) == 12 and count_qam(16) == 388
    assert coprime_pairs(16) == 48
    assert [count_psk(M) for M in (4, 8, 16)] == [12, 104, 912]


def test_qam_count_below_psk_and_upper_bound():
    for M in (4, 16, 64):
        assert count_qam(M) <= upper_bound_qam(M)
    # 4-QAM is a rotated 4-PSK, so the two agree there
    assert count_qam(4) == count_psk(4)
    assert count_qam(16) < count_psk(16) and count_qam(64) < count_psk(64)


def test_states_closed_under_plane_symmetries():
    H = enumerate_singular_fades(qam(16))
    j = GaussianRational(1j)
    for z in H.states:
        for w in (z.inverse(), j * z, z.conjugate(), -z):
            assert w in H


def test_states_sorted_and_indexed():
    H = enumerate_singular_fades(qam(16))
    keys = [z.sort_key() for z in H.states]
    assert keys == sorted(keys)
    assert H.index_of(GaussianRational(GaussianInt(2, 1))) == H.states.index(GaussianRational(GaussianInt(2, 1)))
    assert H.index_of(2 + 1j) == H.index_of(GaussianRational(GaussianInt(2, 1)))
    with pytest.raises(KeyError):
        H.index_of(2 + 0.9j)


def test_fade_classes():
    H = enumerate_singular_fades(qam(16))
    by = H.by_class()
    assert len(by["exterior"]) == len(by["interior"])
    assert sum(len(v) for v in by.values()) == 388
    assert fade_class(1j) == "unit-circle"
    assert fade_class(GaussianRational(GaussianInt(1, 1), 2)) == "interior"


def relay_groups(points: np.ndarray, z: complex) -> set[frozenset]:
    M = len(points)
    keys: dict = {}
    for k in range(M):
        for l in range(M):
            v = points[k] + z * points[l]
            keys.setdefault((round(v.real, 7), round(v.imag, 7)), []).append((k, l))
    return {frozenset(g) for g in keys.values() if len(g) > 1}


@pytest.mark.parametrize("z", [GaussianRational(1), GaussianRational(GaussianInt(2, 1)),
                               GaussianRational(GaussianInt(1, 1), 2), GaussianRational(GaussianInt(0, 1))],
                         ids=str)
def test_constraints_match_relay_collisions(z):
    C = qam(16)
    cons = constraints_for(C, z)
    cons.validate()
    assert {frozenset(c) for c in cons.classes} == relay_groups(C.points, complex(z))


def test_constraints_at_one_for_4pam():
    cons = constraints_for(pam(4), GaussianRational(1))
    # pairs with equal label sums collide
    assert sorted(sorted(c) for c in cons.classes) == [
        [(0, 1), (1, 0)],
        [(0, 2), (1, 1), (2, 0)],
        [(0, 3), (1, 2), (2, 1), (3, 0)],
        [(1, 3), (2, 2), (3, 1)],
        [(2, 3), (3, 2)],
    ]


def test_constraints_numeric_for_psk():
    C = psk(8)
    H = enumerate_singular_fades(C)
    z = complex(H.values[5])
    cons = constraints_for(C, z)
    assert {frozenset(c) for c in cons.classes} == relay_groups(C.points, z)


def test_non_singular_state_rejected():
    with pytest.raises(ConstraintError):
        constraints_for(qam(16), 2 + 0.9j)


def test_constraint_set_validation():
    with pytest.raises(ConstraintError):
        ConstraintSet(4, (((0, 0), (0, 1)),)).validate()
    with pytest.raises(ConstraintError):
        ConstraintSet(4, (((0, 0), (1, 1)), ((1, 1), (2, 2)))).validate()
    cs = ConstraintSet(2, (((0, 1), (1, 0)),))
    assert len(cs.all_classes()) == 3
