"""Model Hamiltonians and exact-diagonalization oracles.

Single-impurity Anderson models (one correlated site hybridized with a
few discrete bath levels) plus a composite builder for two decoupled
fragments joined by a scalable coupling.  The exact-diagonalization
results feed an eigenstate-sum Green's function used as the reference
for the cluster-based one.

Spin-orbital layout: spatial sites are sorted by on-site energy
(impurity first on ties), the up-spin block comes first, so orbital
p = site + spin * n_sites.  With this ordering the reference
determinant fills a contiguous low-index block per spin and an odd
electron goes into the down channel.
"""

from dataclasses import dataclass

import numpy as np

from .ccgf import GreenFunctionResult
from .cluster import ActiveSpace
from .fockspace import DOWN, UP, StateVector, det_from_occ, sq_op, to_matrix

DEGENERACY_GAP = 1.0e-10
RESIDUAL_TOL = 1.0e-10


@dataclass
class SiamParams:
    eps_c: float
    mu: float
    U: float
    eps_d: tuple
    V: tuple

    def __post_init__(self):
        self.eps_d = tuple(float(e) for e in self.eps_d)
        self.V = tuple(float(v) for v in self.V)
        if len(self.eps_d) != len(self.V):
            raise ValueError("eps_d and V must have matching lengths")
        vals = (self.eps_c, self.mu, self.U) + self.eps_d + self.V
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("SIAM parameters must be finite")

    @property
    def n_bath(self):
        return len(self.eps_d)

    @property
    def n_sites(self):
        return self.n_bath + 1

    @property
    def n_orbitals(self):
        return 2 * self.n_sites


def paper_params():
    """The particle-hole-symmetric two-bath benchmark point."""
    return SiamParams(eps_c=-0.5, mu=0.0, U=1.0, eps_d=(-1.0, 1.0), V=(1.0, 1.0))


def site_order(p):
    """Spatial sites sorted by aufbau weight: ('imp', None) / ('bath', i).

    The impurity is ranked by its mean-field level eps_c + U/2 (the
    half-filled reference sees half the repulsion), so the layout stays
    put as U grows along eps_c = -U/2 lines and the filled determinant
    never double-occupies the impurity.
    """
    entries = [(p.eps_c + 0.5 * p.U, 0, "imp", None)]
    entries += [(p.eps_d[i], 1, "bath", i) for i in range(p.n_bath)]
    entries.sort(key=lambda e: (e[0], e[1]))
    return [(kind, idx) for _, _, kind, idx in entries]


def impurity_site(p):
    return site_order(p).index(("imp", None))


def spin_orbital(p, site, spin):
    if spin not in (UP, DOWN):
        raise ValueError(f"spin must be {UP!r} or {DOWN!r}, got {spin!r}")
    return site + (0 if spin == UP else 1) * p.n_sites


def impurity_orbitals(p):
    s = impurity_site(p)
    return (spin_orbital(p, s, UP), spin_orbital(p, s, DOWN))


def build_siam(p):
    """Impurity + bath + hybridization Hamiltonian over both spins."""
    order = site_order(p)
    imp = impurity_site(p)
    terms = []
    for spin in (UP, DOWN):
        pi = spin_orbital(p, imp, spin)
        terms.append((p.eps_c - p.mu, [(pi, 1), (pi, 0)]))
    iu, idn = impurity_orbitals(p)
    terms.append((p.U, [(iu, 1), (iu, 0), (idn, 1), (idn, 0)]))
    for site, (kind, b) in enumerate(order):
        if kind != "bath":
            continue
        for spin in (UP, DOWN):
            pb = spin_orbital(p, site, spin)
            pi = spin_orbital(p, imp, spin)
            terms.append((p.eps_d[b] - p.mu, [(pb, 1), (pb, 0)]))
            terms.append((p.V[b], [(pi, 1), (pb, 0)]))
            terms.append((p.V[b], [(pb, 1), (pi, 0)]))
    return sq_op(terms)


def siam_reference(p, n_electrons=None):
    """Aufbau determinant: sites filled in energy order, odd electron down."""
    if n_electrons is None:
        n_electrons = p.n_sites
    if not 0 <= n_electrons <= p.n_orbitals:
        raise ValueError(f"electron count {n_electrons} out of range")
    fill = []
    for site in range(p.n_sites):
        fill.append(spin_orbital(p, site, DOWN))
        fill.append(spin_orbital(p, site, UP))
    return det_from_occ(fill[:n_electrons])


def frontier_active(p, n_electrons=None):
    """Single-pair active space: frontier up-spin hole and particle."""
    ref = siam_reference(p, n_electrons)
    ups = [spin_orbital(p, s, UP) for s in range(p.n_sites)]
    occ = [q for q in ups if (ref >> q) & 1]
    vir = [q for q in ups if not (ref >> q) & 1]
    if not occ or not vir:
        raise ValueError("no frontier pair: one spin channel is full or empty")
    return ActiveSpace(frozenset({max(occ)}), frozenset({min(vir)}))


def double_occupancy_probe(p):
    """n_up n_down on the impurity site, for response evaluation."""
    iu, idn = impurity_orbitals(p)
    return sq_op([(1.0, [(iu, 1), (iu, 0), (idn, 1), (idn, 0)])])


def siam_fragments(p):
    """(impurity, bath, hybridization) pieces of the SIAM Hamiltonian.

    build_composite(impurity, bath, hybridization, 1.0) rebuilds the
    full model term by term; scaling the coupling toward zero decouples
    the impurity block.
    """
    order = site_order(p)
    imp = impurity_site(p)
    imp_terms, bath_terms, hyb_terms = [], [], []
    for spin in (UP, DOWN):
        pi = spin_orbital(p, imp, spin)
        imp_terms.append((p.eps_c - p.mu, [(pi, 1), (pi, 0)]))
    iu, idn = impurity_orbitals(p)
    imp_terms.append((p.U, [(iu, 1), (iu, 0), (idn, 1), (idn, 0)]))
    for site, (kind, b) in enumerate(order):
        if kind != "bath":
            continue
        for spin in (UP, DOWN):
            pb = spin_orbital(p, site, spin)
            pi = spin_orbital(p, imp, spin)
            bath_terms.append((p.eps_d[b] - p.mu, [(pb, 1), (pb, 0)]))
            hyb_terms.append((p.V[b], [(pi, 1), (pb, 0)]))
            hyb_terms.append((p.V[b], [(pb, 1), (pi, 0)]))
    return sq_op(imp_terms), sq_op(bath_terms), sq_op(hyb_terms)


def build_composite(ha, hb, coupling, lam):
    """H_A + H_B + lam * coupling; fragments must not share orbitals."""
    sa, sb = ha.support(), hb.support()
    shared = sa & sb
    if shared:
        raise ValueError(f"fragment supports overlap on orbitals {sorted(shared)}")
    return ha + hb + coupling.scaled(lam)


@dataclass
class EDResult:
    eigenvalues: np.ndarray
    eigenvectors: list
    sector: object
    label: str = ""

    def ground_energy(self):
        return float(self.eigenvalues[0])

    def ground_state(self):
        return self.eigenvectors[0]

    def ground_degenerate(self, gap=DEGENERACY_GAP):
        if len(self.eigenvalues) < 2:
            return False
        return self.eigenvalues[1] - self.eigenvalues[0] < gap


def exact_diagonalize(h, sector, label=""):
    """Dense full spectrum on one sector; Hermiticity and residuals checked."""
    mat = to_matrix(h, sector, sector).toarray()
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise ValueError("Hamiltonian matrix is not symmetric on this sector")
    vals, vecs = np.linalg.eigh(mat)
    for i in range(len(vals)):
        resid = np.max(np.abs(mat @ vecs[:, i] - vals[i] * vecs[:, i]))
        if resid > RESIDUAL_TOL * max(1.0, np.max(np.abs(vals))):
            raise RuntimeError(f"eigenpair residual {resid:.2e} at index {i}")
    states = [StateVector(sector, vecs[:, i].copy()) for i in range(len(vals))]
    return EDResult(eigenvalues=vals, eigenvectors=states, sector=sector,
                    label=label)


def _transition_amplitudes(ed_ground, ed_states, op):
    """<m| op |0> for every eigenstate m, as one vector."""
    mat = to_matrix(op, ed_ground.sector, ed_states.sector).toarray()
    image = mat @ ed_ground.ground_state().coeffs
    basis = np.column_stack([s.coeffs for s in ed_states.eigenvectors])
    return basis.T @ image


def lehmann_gf(ed_n, ed_nm1, ed_np1, orbitals, grid):
    """Eigenstate-sum Green's function over a probe orbital list.

    Ionization branch: sum over (N-1)-sector states at poles
    E_0 - E_m with the -i.eta placement; attachment branch over
    (N+1)-sector states at E_m - E_0 with +i.eta.  Branch parts are
    stored separately with the same bookkeeping as the cluster route,
    so both the literal and retarded combinations line up.

    The (N-1)/(N+1) results must span the full image of the probe
    operators; a per-orbital completeness identity (anticommutator
    expectation equal to one) is checked and raised on violation.
    """
    if ed_n.ground_degenerate():
        raise ValueError(
            "degenerate ground state: diagonalize a symmetry-resolved sector")
    e0 = ed_n.ground_energy()
    amp_ion, amp_att = {}, {}
    for k in orbitals:
        a_k = sq_op([(1.0, [(k, 0)])])
        c_k = sq_op([(1.0, [(k, 1)])])
        amp_ion[k] = _transition_amplitudes(ed_n, ed_nm1, a_k)
        amp_att[k] = _transition_amplitudes(ed_n, ed_np1, c_k)
        total = np.sum(amp_ion[k] ** 2) + np.sum(amp_att[k] ** 2)
        if abs(total - 1.0) > 1e-8:
            raise ValueError(
                f"orbital {k}: completeness sum {total:.12f} != 1; "
                "pass full particle-number sectors for N-1 and N+1")
    pos_ion = e0 - ed_nm1.eigenvalues
    pos_att = ed_np1.eigenvalues - e0
    nw, np_ = len(grid), len(orbitals)
    xpart = np.zeros((nw, np_, np_), dtype=complex)
    ypart = np.zeros((nw, np_, np_), dtype=complex)
    wgrid = grid.omegas[:, None]
    for i, k in enumerate(orbitals):
        for j, l in enumerate(orbitals):
            num_x = amp_ion[l] * amp_ion[k]
            num_y = amp_att[k] * amp_att[l]
            xpart[:, i, j] = np.sum(
                num_x[None, :] / (wgrid - pos_ion[None, :] - 1j * grid.eta),
                axis=1)
            ypart[:, i, j] = np.sum(
                num_y[None, :] / (wgrid - pos_att[None, :] + 1j * grid.eta),
                axis=1)
    return GreenFunctionResult(grid=grid, orbitals=tuple(orbitals),
                               xpart=xpart, ypart=ypart)


def lehmann_poles(ed_n, ed_nm1, ed_np1, orbital):
    """Pole positions and diagonal weights, keyed like the cluster route."""
    if ed_n.ground_degenerate():
        raise ValueError(
            "degenerate ground state: diagonalize a symmetry-resolved sector")
    e0 = ed_n.ground_energy()
    a_k = sq_op([(1.0, [(orbital, 0)])])
    c_k = sq_op([(1.0, [(orbital, 1)])])
    ion = _transition_amplitudes(ed_n, ed_nm1, a_k) ** 2
    att = _transition_amplitudes(ed_n, ed_np1, c_k) ** 2
    pos_ion = e0 - ed_nm1.eigenvalues
    pos_att = ed_np1.eigenvalues - e0
    oi, oa = np.argsort(pos_ion), np.argsort(pos_att)
    return {"X": (pos_ion[oi], ion[oi]), "Y": (pos_att[oa], att[oa])}
