import numpy as np
import pytest

from sescc.ccsolver import SolverConfig, solve_lambda, solve_s_ext, solve_t
from sescc.cluster import ActiveSpace, split
from sescc.fockspace import (
    build_sector,
    build_spin_sector,
    det_from_occ,
    remap_orbitals,
    sq_op,
    to_matrix,
)
from sescc.model import (
    SiamParams,
    build_composite,
    build_siam,
    exact_diagonalize,
    paper_params,
    siam_reference,
)


@pytest.fixture(scope="session")
def paper():
    """Benchmark model, its sectors, and the exact N-electron solution."""
    p = paper_params()
    h = build_siam(p)
    m = p.n_orbitals
    ref = siam_reference(p)
    sec = build_sector(m, 3)
    spin = build_spin_sector(m, 1, 2)  # S_z block of the reference
    ed = exact_diagonalize(h, spin, label="N=3 Sz=-1/2")
    return {
        "p": p, "h": h, "m": m, "ref": ref,
        "sec": sec, "spin": spin, "ed": ed,
        "act": ActiveSpace(frozenset({0}), frozenset({1})),
    }


@pytest.fixture(scope="session")
def solved(paper):
    """Converged T, Lambda, and external-S for the benchmark model."""
    h, ref, m = paper["h"], paper["ref"], paper["m"]
    sol = solve_t(h, ref, m, rank_max=2)
    hmat = to_matrix(h, paper["sec"], paper["sec"]).toarray()
    from sescc.cluster import similarity_transform

    hbar = similarity_transform(hmat, sol.t, paper["sec"])
    lam = solve_lambda(hbar, sol.t)
    lam_int, _ = split(lam, paper["act"])
    s_ext = solve_s_ext(hbar, paper["act"], lam_int)
    return {"sol": sol, "t": sol.t, "hbar": hbar, "lam": lam, "s_ext": s_ext}


def nsl_fragments():
    """Two decoupled fragments on eight spin orbitals.

    Fragment A is a two-site impurity model on orbitals {0,1,4,5}
    (bath up, impurity up, bath down, impurity down).  Fragment B is a
    hopping dimer on {2,3,6,7} with levels -2 and +1.  The coupling
    hybridizes the impurity with B's low level in both spin channels.
    """
    pa = SiamParams(eps_c=-0.5, mu=0.0, U=1.0, eps_d=(-1.0,), V=(1.0,))
    ha = remap_orbitals(build_siam(pa), {0: 0, 1: 1, 2: 4, 3: 5})
    hb = sq_op([
        (-2.0, [(2, 1), (2, 0)]), (1.0, [(3, 1), (3, 0)]),
        (-2.0, [(6, 1), (6, 0)]), (1.0, [(7, 1), (7, 0)]),
        (0.7, [(2, 1), (3, 0)]), (0.7, [(3, 1), (2, 0)]),
        (0.7, [(6, 1), (7, 0)]), (0.7, [(7, 1), (6, 0)]),
    ])
    coupling = sq_op([
        (0.4, [(1, 1), (2, 0)]), (0.4, [(2, 1), (1, 0)]),
        (0.4, [(5, 1), (6, 0)]), (0.4, [(6, 1), (5, 0)]),
    ])
    return ha, hb, coupling


@pytest.fixture(scope="session")
def nsl():
    ha, hb, coupling = nsl_fragments()
    h0 = build_composite(ha, hb, coupling, 0.0)
    m = 8
    ref = det_from_occ([0, 2, 4, 5])
    active_a = ActiveSpace(frozenset({0, 4, 5}), frozenset({1}))
    tight = SolverConfig(max_iter=400, tol=1e-13)
    return {
        "ha": ha, "hb": hb, "coupling": coupling, "h0": h0,
        "m": m, "ref": ref, "active_a": active_a, "tight": tight,
    }


@pytest.fixture(scope="session")
def nsl_solved(nsl):
    """Tightly converged amplitudes for the composite and both isolated
    fragments; the decoupling identities need residuals well below the
    comparison tolerances."""
    from sescc.cluster import similarity_transform
    from sescc.fockspace import build_sector, to_matrix

    tight = nsl["tight"]

    def full_solve(h, ref, m, rank_max):
        n = bin(ref).count("1")
        sec = build_sector(m, n)
        sol = solve_t(h, ref, m, rank_max, cfg=tight)
        hbar = similarity_transform(to_matrix(h, sec, sec).toarray(), sol.t, sec)
        lam = solve_lambda(hbar, sol.t, cfg=tight)
        return {"sol": sol, "t": sol.t, "lam": lam, "sec": sec, "hbar": hbar}

    composite = full_solve(nsl["h0"], nsl["ref"], nsl["m"], 2)

    pa = SiamParams(eps_c=-0.5, mu=0.0, U=1.0, eps_d=(-1.0,), V=(1.0,))
    ha_local = build_siam(pa)
    ref_a = det_from_occ([0, 2, 3])  # bath up, bath down, impurity down
    isolated_a = full_solve(ha_local, ref_a, 4, 2)

    hb_local = sq_op([
        (-2.0, [(0, 1), (0, 0)]), (1.0, [(1, 1), (1, 0)]),
        (-2.0, [(2, 1), (2, 0)]), (1.0, [(3, 1), (3, 0)]),
        (0.7, [(0, 1), (1, 0)]), (0.7, [(1, 1), (0, 0)]),
        (0.7, [(2, 1), (3, 0)]), (0.7, [(3, 1), (2, 0)]),
    ])
    ref_b = det_from_occ([0])
    isolated_b = full_solve(hb_local, ref_b, 4, 1)

    return {"composite": composite, "a": isolated_a, "b": isolated_b,
            "ha_local": ha_local, "hb_local": hb_local}


def rng(seed):
    return np.random.default_rng(seed)
