import numpy as np
import pytest

from conftest import nsl_fragments

from sescc.ccgf import uniform_grid
from sescc.fockspace import (
    DOWN,
    UP,
    build_sector,
    build_spin_sector,
    det_from_occ,
    det_from_string,
    sq_op,
    to_matrix,
)
from sescc.model import (
    SiamParams,
    build_composite,
    build_siam,
    double_occupancy_probe,
    exact_diagonalize,
    frontier_active,
    impurity_orbitals,
    impurity_site,
    lehmann_gf,
    lehmann_poles,
    paper_params,
    siam_fragments,
    siam_reference,
    site_order,
    spin_orbital,
)

from frozen import GROUND_ENERGY


def test_params_validation():
    with pytest.raises(ValueError):
        SiamParams(eps_c=0.0, mu=0.0, U=1.0, eps_d=(1.0,), V=(1.0, 2.0))
    with pytest.raises(ValueError):
        SiamParams(eps_c=np.nan, mu=0.0, U=1.0, eps_d=(), V=())
    p = paper_params()
    assert (p.n_bath, p.n_sites, p.n_orbitals) == (2, 3, 6)


def test_site_layout():
    p = paper_params()
    assert site_order(p) == [("bath", 0), ("imp", None), ("bath", 1)]
    assert impurity_site(p) == 1
    assert impurity_orbitals(p) == (1, 4)
    assert spin_orbital(p, 0, UP) == 0 and spin_orbital(p, 0, DOWN) == 3
    with pytest.raises(ValueError):
        spin_orbital(p, 0, "sideways")


def test_site_layout_stable_along_half_filling_line():
    # ranking the impurity by eps_c + U/2 keeps the aufbau reference off
    # the doubly-occupied impurity as U grows with eps_c = -U/2
    for u in (0.5, 1.0, 2.0, 4.0):
        p = SiamParams(eps_c=-u / 2, mu=0.0, U=u, eps_d=(-1.0, 1.0), V=(1.0, 1.0))
        assert site_order(p) == [("bath", 0), ("imp", None), ("bath", 1)]
        assert siam_reference(p) == det_from_string("100110")


def test_reference_fillings():
    p = paper_params()
    assert siam_reference(p) == det_from_string("100110")
    assert siam_reference(p, 2) == det_from_occ([0, 3])
    assert siam_reference(p, 4) == det_from_occ([0, 1, 3, 4])
    with pytest.raises(ValueError):
        siam_reference(p, 7)


def test_frontier_active():
    act = frontier_active(paper_params())
    assert act.R == frozenset({0})
    assert act.S == frozenset({1})


def _dense_siam(p, sector):
    """One-body matrix plus diagonal repulsion, assembled independently."""
    m = p.n_orbitals
    h1 = np.zeros((m, m))
    order = site_order(p)
    imp = impurity_site(p)
    for spin_shift in (0, p.n_sites):
        h1[imp + spin_shift, imp + spin_shift] = p.eps_c - p.mu
        for site, (kind, b) in enumerate(order):
            if kind != "bath":
                continue
            h1[site + spin_shift, site + spin_shift] = p.eps_d[b] - p.mu
            h1[imp + spin_shift, site + spin_shift] = p.V[b]
            h1[site + spin_shift, imp + spin_shift] = p.V[b]
    iu, idn = impurity_orbitals(p)
    dim = len(sector)
    out = np.zeros((dim, dim))
    for j, det in enumerate(sector.dets):
        for q in range(m):
            if not det >> q & 1:
                continue
            out[j, j] += h1[q, q]
            for pp in range(m):
                if pp == q or det >> pp & 1:
                    continue
                hop = h1[pp, q]
                if hop == 0.0:
                    continue
                image = det & ~(1 << q) | (1 << pp)
                mask_q = bin(det & ((1 << q) - 1)).count("1")
                interm = det & ~(1 << q)
                mask_p = bin(interm & ((1 << pp) - 1)).count("1")
                sign = (-1) ** (mask_q + mask_p)
                out[sector.position(image), j] += sign * hop
        if det >> iu & 1 and det >> idn & 1:
            out[j, j] += p.U
    return out


def test_build_siam_against_independent_assembly():
    p = SiamParams(eps_c=-2.0, mu=0.0, U=4.0, eps_d=(-1.0, 1.0), V=(1.0, 1.0))
    sec = build_sector(p.n_orbitals, 3)
    lib = to_matrix(build_siam(p), sec, sec).toarray()
    assert np.allclose(lib, _dense_siam(p, sec), atol=1e-12)


def test_noninteracting_ground_energy():
    p = SiamParams(eps_c=-0.5, mu=0.0, U=0.0, eps_d=(-1.0, 1.0), V=(0.0, 0.0))
    sec = build_sector(6, 3)
    ed = exact_diagonalize(build_siam(p), sec)
    # fill the three lowest decoupled levels: -1, -1, -0.5
    assert ed.ground_energy() == pytest.approx(-2.5, abs=1e-12)


def test_benchmark_ground_energy(paper):
    assert paper["ed"].ground_energy() == pytest.approx(GROUND_ENERGY, abs=1e-12)
    assert not paper["ed"].ground_degenerate()


def test_full_sector_ground_is_spin_degenerate(paper):
    ed = exact_diagonalize(paper["h"], paper["sec"])
    assert ed.ground_degenerate()
    assert ed.ground_energy() == pytest.approx(GROUND_ENERGY, abs=1e-12)


def test_exact_diagonalize_rejects_nonsymmetric():
    op = sq_op([(1.0, [(0, 1), (1, 0)])])  # one-way hop
    with pytest.raises(ValueError):
        exact_diagonalize(op, build_sector(2, 1))


def test_single_site_closed_form():
    p = SiamParams(eps_c=-0.3, mu=0.0, U=1.7, eps_d=(), V=())
    h = build_siam(p)
    # N=1 is spin degenerate in the full sector; resolve S_z for the ground
    ed = {0: exact_diagonalize(h, build_sector(2, 0)),
          1: exact_diagonalize(h, build_spin_sector(2, 0, 1)),
          2: exact_diagonalize(h, build_sector(2, 2))}
    grid = uniform_grid(-3.0, 3.0, 0.05, eta=0.1)
    ref = siam_reference(p)  # odd electron occupies the down orbital
    assert ref == det_from_occ([1])
    gf = lehmann_gf(ed[1], ed[0], ed[2], [0, 1], grid)
    w = grid.omegas
    # occupied down orbital: pure ionization pole at eps_c
    want_dn = 1.0 / (w - p.eps_c - 1j * grid.eta)
    assert np.allclose(gf.xpart[:, 1, 1], want_dn)
    assert np.allclose(gf.ypart[:, 1, 1], 0.0)
    # empty up orbital: pure attachment pole at eps_c + U
    want_up = 1.0 / (w - (p.eps_c + p.U) + 1j * grid.eta)
    assert np.allclose(gf.ypart[:, 0, 0], want_up)
    assert np.allclose(gf.xpart[:, 0, 0], 0.0)
    poles = lehmann_poles(ed[1], ed[0], ed[2], 1)
    assert poles["X"][0] == pytest.approx([p.eps_c])
    assert poles["X"][1] == pytest.approx([1.0])
    assert np.allclose(poles["Y"][1], 0.0)


def test_lehmann_requires_nondegenerate_ground(paper):
    ed_full = exact_diagonalize(paper["h"], paper["sec"])
    grid = uniform_grid(-1.0, 1.0, 0.5, eta=0.1)
    ed2 = exact_diagonalize(paper["h"], build_sector(6, 2))
    ed4 = exact_diagonalize(paper["h"], build_sector(6, 4))
    with pytest.raises(ValueError):
        lehmann_gf(ed_full, ed2, ed4, [0], grid)


def test_lehmann_requires_complete_sectors(paper):
    # a truncated spin block of N-1 cannot absorb every probe image
    grid = uniform_grid(-1.0, 1.0, 0.5, eta=0.1)
    ed2_blk = exact_diagonalize(paper["h"], build_spin_sector(6, 1, 1))
    ed4 = exact_diagonalize(paper["h"], build_sector(6, 4))
    with pytest.raises(ValueError, match="full particle-number sectors"):
        lehmann_gf(paper["ed"], ed2_blk, ed4, list(range(6)), grid)


def test_lehmann_sum_rule_single_site():
    p = SiamParams(eps_c=-0.3, mu=0.0, U=1.7, eps_d=(), V=())
    h = build_siam(p)
    ed = {0: exact_diagonalize(h, build_sector(2, 0)),
          1: exact_diagonalize(h, build_spin_sector(2, 0, 1)),
          2: exact_diagonalize(h, build_sector(2, 2))}
    grid = uniform_grid(-40.0, 40.0, 0.01, eta=0.02)
    gf = lehmann_gf(ed[1], ed[0], ed[2], [0, 1], grid)
    for val in gf.sum_rule():
        assert val == pytest.approx(1.0, abs=0.02)


def test_fragments_rebuild_model():
    p = paper_params()
    imp, bath, hyb = siam_fragments(p)
    rebuilt = build_composite(imp, bath, hyb, 1.0)
    assert sorted(rebuilt.terms) == sorted(build_siam(p).terms)
    assert not (imp.support() & bath.support())


def test_fragment_decoupling_spectrum():
    p = paper_params()
    imp, bath, hyb = siam_fragments(p)
    h0 = build_composite(imp, bath, hyb, 0.0)
    sec = build_sector(6, 3)
    vals = exact_diagonalize(h0, sec).eigenvalues
    # decoupled: energies are sums of impurity and bath level fillings
    imp_levels = {0: 0.0, 1: p.eps_c, 2: 2 * p.eps_c + p.U}
    bath_vals = {}
    for nb in range(5):
        secb = build_sector(6, nb)
        edb = exact_diagonalize(bath, secb)
        bath_vals[nb] = edb.ground_energy()
    want = min(imp_levels[k] + bath_vals[3 - k] for k in (0, 1, 2))
    assert vals[0] == pytest.approx(want, abs=1e-10)


def test_composite_overlap_rejected():
    ha, hb, coupling = nsl_fragments()
    with pytest.raises(ValueError, match="overlap"):
        build_composite(ha, ha, coupling, 1.0)


def test_composite_decoupled_spectrum(nsl):
    # at zero coupling the composite ground energy is the best split of
    # four electrons between the fragments
    h0, m = nsl["h0"], nsl["m"]
    sec = build_sector(m, 4)
    e0 = exact_diagonalize(h0, sec).ground_energy()
    pa = SiamParams(eps_c=-0.5, mu=0.0, U=1.0, eps_d=(-1.0,), V=(1.0,))
    ha_local = build_siam(pa)
    hb_local = sq_op([
        (-2.0, [(0, 1), (0, 0)]), (1.0, [(1, 1), (1, 0)]),
        (-2.0, [(2, 1), (2, 0)]), (1.0, [(3, 1), (3, 0)]),
        (0.7, [(0, 1), (1, 0)]), (0.7, [(1, 1), (0, 0)]),
        (0.7, [(2, 1), (3, 0)]), (0.7, [(3, 1), (2, 0)]),
    ])
    ea = {n: exact_diagonalize(ha_local, build_sector(4, n)).ground_energy()
          for n in range(5)}
    eb = {n: exact_diagonalize(hb_local, build_sector(4, n)).ground_energy()
          for n in range(5)}
    want = min(ea[k] + eb[4 - k] for k in range(5))
    assert e0 == pytest.approx(want, abs=1e-10)


def test_double_occupancy_probe_is_diagonal(paper):
    sec = paper["sec"]
    mat = to_matrix(double_occupancy_probe(paper["p"]), sec, sec).toarray()
    iu, idn = impurity_orbitals(paper["p"])
    diag = [float((d >> iu & 1) and (d >> idn & 1)) for d in sec.dets]
    assert np.allclose(mat, np.diag(diag))
