import itertools

import pytest

from helpers import fixture_path, load_fixture
from qpcf.errors import InputError
from qpcf.lamination import (Angle, CriticalPortrait, DepthInsufficient, Lamination, Leaf, Parallel,
                             check_certificate, ParallelCertificate, PortraitIncompatible, parallel_test, pullback_lamination, reflect)
from qpcf.mating import (DepthExhausted, HubbardTreeInput, MatingVerdict, hubbard_from_json,
                         hubbard_is_simplicial, lamination_of, load_mating_input, mateability,
                         validate_verdict)
from qpcf.treedyn import NotSimplicial, subdivide


def leafset(L):
    return {tuple(sorted(str(x) for x in l.endpoints)) for l in L.leaves}


def A(s):
    return Angle(s)


def corabbit():
    L, P = load_mating_input(fixture_path("rabbit.json"))
    leaves = tuple(Leaf(reflect(l.a), reflect(l.b)) for l in L.leaves)
    chords = tuple(Leaf(reflect(c.a), reflect(c.b)) for c in P.chords)
    return Lamination(leaves, 2, 0), CriticalPortrait(chords, 2)


def pool():
    out = {n: load_mating_input(fixture_path(f"{n}.json")) for n in ("basilica", "rabbit", "empty")}
    out["corabbit"] = corabbit()
    out["basilica_tree"] = load_mating_input(fixture_path("basilica_tree.json"))
    return out


POOL = pool()
PAIRS = list(itertools.product(sorted(POOL), repeat=2))


# ---- Hubbard trees

def test_simplicial_examples():
    H = hubbard_from_json(load_fixture("basilica_tree.json"))
    assert hubbard_is_simplicial(H) == (True, [])
    assert hubbard_is_simplicial(hubbard_from_json(load_fixture("trivial_tree.json")))[0]
    H = hubbard_from_json(load_fixture("preperiodic_tree.json"))
    ok, diag = hubbard_is_simplicial(H)
    assert not ok and len(diag) == 1 and "q-a" in diag[0]
    S, _ = subdivide(H.tree)
    assert hubbard_is_simplicial(HubbardTreeInput(S, H.degree))[0]


def test_hubbard_degree_consistency():
    obj = load_fixture("basilica_tree.json")
    obj["degree"] = 3
    with pytest.raises(InputError):
        hubbard_from_json(obj)


def test_lamination_of_basilica():
    H = hubbard_from_json(load_fixture("basilica_tree.json"))
    L0, _ = lamination_of(H, 0)
    assert leafset(L0) == {("1/3", "2/3")}
    L1, _ = lamination_of(H, 1)
    assert leafset(L1) == {("1/3", "2/3"), ("1/6", "5/6")}


def test_lamination_of_trivial_tree():
    H = hubbard_from_json(load_fixture("trivial_tree.json"))
    for k in range(4):
        L, P = lamination_of(H, k)
        assert len(L) == 0 and P.degree == 3


def test_lamination_of_not_simplicial():
    with pytest.raises(NotSimplicial):
        lamination_of(hubbard_from_json(load_fixture("preperiodic_tree.json")), 1)


def test_derived_portrait_matches_fixture():
    (_, Pt), (_, Pf) = load_mating_input(fixture_path("rabbit_tree.json")), POOL["rabbit"]
    assert Pt == Pf


def test_portrait_choice_does_not_change_pullback():
    L, _ = POOL["basilica"]
    for chord in [("1/5", "7/10"), ("3/10", "4/5"), ("1/4", "3/4")]:
        P = CriticalPortrait((Leaf(A(chord[0]), A(chord[1])),), 2)
        assert leafset(pullback_lamination(L, P, 1)) == {("1/3", "2/3"), ("1/6", "5/6")}
    # a chord ending on a preimage of a leaf endpoint leaves the matching ambiguous
    with pytest.raises(PortraitIncompatible):
        pullback_lamination(L, CriticalPortrait((Leaf(A("1/6"), A("2/3")),), 2), 1)


# ---- verdicts

def verdict(a, b, depth=8):
    (Lp, Pp), (Lm, Pm) = POOL[a], POOL[b]
    return mateability(Lp, Lm, depth, (Pp, Pm))


def test_mate_examples():
    v = verdict("rabbit", "basilica")
    assert v.outcome == "Mateable" and v.depth_used <= 8
    v = verdict("basilica", "basilica")
    assert v.outcome == "Obstructed"
    assert sorted(str(a) for a in v.certificate.cycle) == ["1/3", "2/3"]
    assert verdict("empty", "empty").outcome == "Mateable"
    assert verdict("rabbit", "corabbit").outcome == "Obstructed"
    assert verdict("rabbit", "rabbit").outcome == "Mateable"


def test_verdict_json():
    assert verdict("basilica", "basilica").to_json() == {"outcome": "Obstructed",
                                                         "certificate": ["1/3", "2/3"], "depth": 0}
    js = verdict("rabbit", "basilica").to_json()
    assert js["outcome"] == "Mateable" and js["certificate"]["stable_depths"] == [0, 1]


def test_degree_mismatch():
    L3, P3 = load_mating_input(fixture_path("trivial_tree.json"))
    with pytest.raises(InputError):
        mateability(POOL["basilica"][0], L3, 4, (POOL["basilica"][1], P3))


def test_depth_exhausted():
    Lp, Pp = POOL["rabbit"]
    # at max_depth 0 a NonParallel outcome cannot have stabilised yet
    with pytest.raises(DepthExhausted):
        mateability(Lp, POOL["basilica"][0], 0, (Pp, POOL["basilica"][1]))


@pytest.mark.parametrize("a,b", PAIRS)
def test_symmetry_and_certificates(a, b):
    v, w = verdict(a, b), verdict(b, a)
    assert v.outcome == w.outcome
    (Lp, Pp), (Lm, Pm) = POOL[a], POOL[b]
    if v.outcome == "Obstructed":
        P = pullback_lamination(Lp, Pp, v.depth_used)
        M = pullback_lamination(Lm, Pm, v.depth_used)
        assert check_certificate(v.certificate, P, M)
        assert validate_verdict(v, P, M)
        # the reflected cycle certifies the swapped pair, as does the swapped verdict
        c = v.certificate.cycle
        mirrored = tuple(reflect(x) for x in c[1:] + c[:1])
        assert check_certificate(ParallelCertificate(mirrored), M, P)
        assert check_certificate(w.certificate, M, P)


@pytest.mark.parametrize("a,b", PAIRS)
def test_parallel_monotone_in_depth(a, b):
    (Lp, Pp), (Lm, Pm) = POOL[a], POOL[b]
    seen = False
    for k in range(6):
        P, M = pullback_lamination(Lp, Pp, k), pullback_lamination(Lm, Pm, k)
        try:
            par = isinstance(parallel_test(P, M, k), Parallel)
        except DepthInsufficient:
            continue
        assert par or not seen
        seen = seen or par


def test_verdict_type():
    assert isinstance(verdict("empty", "empty"), MatingVerdict)
