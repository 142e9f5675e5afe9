import itertools

import numpy as np
import pytest

from oracles import normal_order_sign

from sescc.fockspace import (
    DOWN,
    UP,
    apply_string_det,
    basis_state,
    build_sector,
    build_spin_sector,
    det_from_occ,
    det_from_string,
    det_to_string,
    number_op,
    occ_tuple,
    parity_below,
    projector,
    remap_orbitals,
    spin_of,
    sq_op,
    to_matrix,
)

from frozen import GROUND_ENERGY


def test_det_string_round_trip():
    det = det_from_string("100110")
    assert det_to_string(det, 6) == "100110"
    assert occ_tuple(det) == (0, 3, 4)
    assert det_from_occ([0, 3, 4]) == det
    with pytest.raises(ValueError):
        det_from_occ([1, 1])
    with pytest.raises(ValueError):
        det_from_string("10x")


def test_spin_convention():
    assert spin_of(0, 6) == UP and spin_of(2, 6) == UP
    assert spin_of(3, 6) == DOWN and spin_of(5, 6) == DOWN


def test_sector_sizes_and_order():
    sec = build_sector(6, 3)
    assert len(sec) == 20
    assert det_from_string("100110") in sec.dets
    # combinations order: occupied tuples are lexicographically sorted
    occs = [occ_tuple(d) for d in sec.dets]
    assert occs == sorted(occs)
    assert occs[0] == (0, 1, 2)
    assert len(build_sector(6, 2)) == 15
    vac = build_sector(2, 0)
    assert vac.dets == (0,)


def test_sector_determinism_and_position():
    a, b = build_sector(6, 3), build_sector(6, 3)
    assert a.dets == b.dets
    assert a.position(det_from_string("100110")) == b.position(det_from_string("100110"))
    with pytest.raises(KeyError):
        a.position(det_from_occ([0, 1]))


def test_spin_sector_block():
    blk = build_spin_sector(6, 1, 2)
    assert len(blk) == 9
    for d in blk.dets:
        ups = sum(d >> p & 1 for p in range(3))
        downs = sum(d >> p & 1 for p in range(3, 6))
        assert (ups, downs) == (1, 2)
    assert det_from_string("100110") in blk.dets


def test_apply_string_known_signs():
    ref = det_from_string("100110")
    # annihilating the leftmost occupied orbital costs no sign
    assert apply_string_det(((0, False),), ref) == (1, det_from_string("000110"))
    # strings act rightmost-first: a_1^dag a_0 hops 0 -> 1
    assert apply_string_det(((1, True), (0, False)), ref) == (
        1, det_from_string("010110"))
    # killing an empty orbital or doubling an occupied one vanishes
    assert apply_string_det(((1, False),), ref) is None
    assert apply_string_det(((0, True),), ref) is None


def test_parity_below_matches_popcount():
    det = det_from_string("110101")
    for p in range(6):
        below = bin(det & ((1 << p) - 1)).count("1")
        assert parity_below(det, p) == (-1) ** below


def test_apply_string_against_normal_ordering_oracle():
    rng = np.random.default_rng(7)
    dets = build_sector(6, 3).dets
    orbs = range(6)
    for _ in range(300):
        det = dets[rng.integers(len(dets))]
        k = rng.integers(1, 5)
        string = tuple(
            (int(rng.choice(orbs)), bool(rng.integers(2))) for _ in range(k)
        )
        got = apply_string_det(string, det)
        want = normal_order_sign(string, det)
        assert got == want


def _mat(op, dom, cod):
    return to_matrix(op, dom, cod).toarray()


def test_canonical_anticommutators():
    m = 4
    s1, s2, s3 = build_sector(m, 1), build_sector(m, 2), build_sector(m, 3)
    for p in range(m):
        for q in range(m):
            ap = sq_op([(1.0, [(p, 0)])])
            aq_dag = sq_op([(1.0, [(q, 1)])])
            # {a_p, a_q^dag} = delta_pq on the two-electron sector
            anti = _mat(ap, s3, s2) @ _mat(aq_dag, s2, s3) \
                 + _mat(aq_dag, s1, s2) @ _mat(ap, s2, s1)
            assert np.allclose(anti, (p == q) * np.eye(len(s2)))
            # {a_p, a_q} = 0
            aq = sq_op([(1.0, [(q, 0)])])
            anti2 = _mat(ap, s1, build_sector(m, 0)) @ _mat(aq, s2, s1)
            anti2 += _mat(aq, s1, build_sector(m, 0)) @ _mat(ap, s2, s1)
            assert np.allclose(anti2, 0.0)


def test_number_operator_total(paper):
    sec = paper["sec"]
    nmat = _mat(number_op(range(6)), sec, sec)
    assert np.allclose(nmat, 3.0 * np.eye(len(sec)))
    # single-orbital number op is the occupation indicator
    n0 = _mat(number_op([0]), sec, sec)
    diag = [float(d >> 0 & 1) for d in sec.dets]
    assert np.allclose(n0, np.diag(diag))


def test_hamiltonian_block_structure(paper):
    h, sec = paper["h"], paper["sec"]
    hm = _mat(h, sec, sec)
    assert np.allclose(hm, hm.T)
    nmat = _mat(number_op(range(6)), sec, sec)
    assert np.allclose(hm @ nmat - nmat @ hm, 0.0)
    assert np.linalg.eigvalsh(hm)[0] == pytest.approx(GROUND_ENERGY, abs=1e-9)


def test_spin_blocks_decouple(paper):
    # H conserves S_z: no matrix elements between different spin blocks
    h, sec = paper["h"], paper["sec"]
    hm = _mat(h, sec, sec)
    blk = build_spin_sector(6, 1, 2)
    inside = [sec.position(d) for d in blk.dets]
    outside = [i for i in range(len(sec)) if i not in inside]
    assert np.allclose(hm[np.ix_(outside, inside)], 0.0)


def test_projector_partition(paper):
    sec, ref = paper["sec"], paper["ref"]
    pref = projector([ref], sec).toarray()
    assert pref[sec.position(ref), sec.position(ref)] == 1.0
    assert pref.sum() == 1.0
    assert np.allclose(projector(sec.dets, sec).toarray(), np.eye(len(sec)))
    # reference + internal + external tiles the reachable spin block
    blk = build_spin_sector(6, 1, 2)
    internal = [det_from_string("010110")]
    rest = [d for d in blk.dets if d != ref and d not in internal]
    total = (projector([ref], sec) + projector(internal, sec)
             + projector(rest, sec)).toarray()
    assert np.allclose(total, projector(blk.dets, sec).toarray())


def test_basis_state_one_hot(paper):
    sec, ref = paper["sec"], paper["ref"]
    v = basis_state(sec, ref)
    assert v.coeffs.sum() == 1.0
    assert v.coeffs[sec.position(ref)] == 1.0


def test_remap_orbitals_relabels():
    op = sq_op([(0.7, [(0, 1), (1, 0)]), (-2.0, [(1, 1), (1, 0)])])
    moved = remap_orbitals(op, {0: 4, 1: 6})
    assert moved.terms == sq_op(
        [(0.7, [(4, 1), (6, 0)]), (-2.0, [(6, 1), (6, 0)])]
    ).terms
    assert moved.support() == {4, 6}


def test_op_algebra_helpers():
    a = sq_op([(1.0, [(0, 1), (0, 0)])])
    b = sq_op([(2.0, [(1, 1), (1, 0)])])
    both = a + b
    assert len(both.terms) == 2
    assert both.support() == {0, 1}
    assert a.scaled(3.0).terms[0][0] == 3.0
