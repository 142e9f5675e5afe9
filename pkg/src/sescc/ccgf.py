"""Frequency-dependent Green's functions from cluster amplitudes.

The single-particle Green's function is assembled from two families of
sector linear solves: ionization vectors X_K(w) in the (N-1)-electron
space and attachment vectors Y_L(w) in the (N+1)-electron space, with
similarity-transformed probe operators

    abar_K = a_K + [a_K, T],      abar_L+ = a_L+ + [a_L+, T]

(the commutator series terminates at one term because a second
commutator with T vanishes identically).

Branch bookkeeping: the defining equations place the ionization branch
at (w - i.eta + Hbar_N) and the attachment branch at (w + i.eta -
Hbar_N).  GreenFunctionResult keeps the two branch parts separate;
`literal` sums them as defined, while `retarded` conjugates the
ionization part so that -(1/pi) Im G_KK is a nonnegative spectral
function satisfying the sum rule.  All comparisons against the
eigenstate-sum oracle use matching conventions.
"""

from dataclasses import dataclass, field

import numpy as np

from .cluster import (
    KIND_LAMBDA,
    KIND_S,
    AmplitudeSet,
    bra_row,
    excitation_matrix,
    exp_map,
    occupied_orbitals,
    similarity_transform,
    split,
)
from .fockspace import build_sector, occ_tuple, sq_op, to_matrix
from .sesflow import FLAVOR_BAR, build_heff, diagonalize_heff

RESIDUAL_TOL = 1.0e-10


@dataclass
class FrequencyGrid:
    omegas: np.ndarray
    eta: float

    def __post_init__(self):
        self.omegas = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        if self.omegas.size == 0:
            raise ValueError("frequency grid is empty")
        if self.eta <= 0:
            raise ValueError("broadening eta must be positive")

    def __len__(self):
        return len(self.omegas)


def uniform_grid(lo, hi, spacing, eta):
    n = int(round((hi - lo) / spacing)) + 1
    return FrequencyGrid(np.linspace(lo, hi, n), eta)


@dataclass
class XYSolution:
    orbital: int
    kind: str             # "X" (N-1 sector) or "Y" (N+1 sector)
    omega: float
    vector: np.ndarray
    sector: object
    internal: np.ndarray = None   # per-determinant active-space tags

    def tagged(self, reference, active):
        """Copy with internal/external membership tags filled in."""
        mask = internal_mask(self.sector, reference, active)
        return XYSolution(self.orbital, self.kind, self.omega,
                          self.vector, self.sector, internal=mask)


@dataclass
class GreenFunctionResult:
    """Per-frequency G matrices over a probe orbital list.

    xpart holds the ionization-branch contribution and ypart the
    attachment branch, each of shape (n_omega, n_probe, n_probe).
    """

    grid: FrequencyGrid
    orbitals: tuple
    xpart: np.ndarray
    ypart: np.ndarray
    labels: dict = field(default_factory=dict)
    center_blocks: dict = field(default_factory=dict)

    def literal(self):
        return self.xpart + self.ypart

    def retarded(self):
        return np.conj(self.xpart) + self.ypart

    def element(self, k, l, which="retarded"):
        i, j = self.orbitals.index(k), self.orbitals.index(l)
        g = self.retarded() if which == "retarded" else self.literal()
        return g[:, i, j]

    def spectral(self):
        """A_K(w) = -(1/pi) Im G_KK(w), one column per probe orbital."""
        diag = np.diagonal(self.retarded(), axis1=1, axis2=2)
        return -np.imag(diag) / np.pi

    def sum_rule(self):
        """Trapezoid integral of each A_K over the grid (exact value 1)."""
        return np.trapezoid(self.spectral(), self.grid.omegas, axis=0)


def transformed_probe(p, dagger, t, sec_from, sec_to):
    """Matrix of abar between sectors: bare probe plus one commutator."""
    op = sq_op([(1.0, [(p, 1 if dagger else 0)])])
    a = to_matrix(op, sec_from, sec_to).toarray()
    t_from = excitation_matrix(t, sec_from)
    t_to = excitation_matrix(t, sec_to)
    return a + a @ t_from - t_to @ a


# short name used in the formula displays
abar = transformed_probe


def sector_hbar(h, t, sector):
    """exp(-T) H exp(T) as a dense matrix on an arbitrary sector."""
    hmat = to_matrix(h, sector, sector).toarray()
    return similarity_transform(hmat, t, sector)


def solve_xy(hbar_n, rhs, kind, grid, orbital=None, sector=None):
    """Direct dense solves of the branch equations, one per frequency.

    hbar_n is the energy-shifted sector matrix (Hbar - E_CC); the X
    branch solves (w - i.eta + hbar_n) x = rhs, the Y branch
    (w + i.eta - hbar_n) y = rhs.  Residuals are checked against an
    absolute 1e-10 bound.
    """
    if kind not in ("X", "Y"):
        raise ValueError(f"kind must be 'X' or 'Y', got {kind!r}")
    hbar_n = np.asarray(hbar_n)
    dim = hbar_n.shape[0]
    eye = np.eye(dim)
    out = []
    for w in grid.omegas:
        if kind == "X":
            a = (w - 1j * grid.eta) * eye + hbar_n
        else:
            a = (w + 1j * grid.eta) * eye - hbar_n
        v = np.linalg.solve(a, rhs.astype(complex))
        resid = np.max(np.abs(a @ v - rhs))
        if resid > RESIDUAL_TOL * max(1.0, np.max(np.abs(rhs))):
            raise RuntimeError(f"resolvent solve residual {resid:.2e} at w={w}")
        out.append(XYSolution(orbital=orbital, kind=kind, omega=float(w),
                              vector=v, sector=sector))
    return out


@dataclass
class XYBundle:
    """Everything needed to contract Green's function elements.

    Holds the three sector bases, the similarity-transformed sector
    matrices, transformed probe matrices in all four sector placements,
    X/Y solution arrays per probe, and the left-state rows.
    """

    reference: int
    m: int
    probes: tuple
    grid: FrequencyGrid
    e_cc: float
    sector_n: object
    sector_m1: object
    sector_p1: object
    hbar_m1: np.ndarray
    hbar_p1: np.ndarray
    ann_down: dict        # abar_K:  N   -> N-1
    ann_up: dict          # abar_K:  N+1 -> N
    cre_down: dict        # abar_K+: N-1 -> N
    cre_up: dict          # abar_K+: N   -> N+1
    xsol: dict            # K -> (n_omega, dim_m1) complex
    ysol: dict            # L -> (n_omega, dim_p1) complex
    row_n: np.ndarray     # <ref|(1 + Lambda) over sector_n


def build_xy(h, t, lam, probes, grid):
    """Solve the X and Y equations for every probe orbital.

    The full sectors play the role of the projection Q in the defining
    equations (no truncation at this scale); E_CC is read off the
    transformed N-sector matrix.
    """
    reference, m = t.reference, t.m
    n = len(occupied_orbitals(reference, m))
    sec_n = build_sector(m, n)
    sec_m1 = build_sector(m, n - 1)
    sec_p1 = build_sector(m, n + 1)
    hbar_n = sector_hbar(h, t, sec_n)
    e_cc = hbar_n[sec_n.position(reference), sec_n.position(reference)]
    hbar_m1 = sector_hbar(h, t, sec_m1) - e_cc * np.eye(len(sec_m1))
    hbar_p1 = sector_hbar(h, t, sec_p1) - e_cc * np.eye(len(sec_p1))
    ref_vec = np.zeros(len(sec_n))
    ref_vec[sec_n.position(reference)] = 1.0
    row_n = bra_row(lam, sec_n)

    ann_down, ann_up, cre_down, cre_up = {}, {}, {}, {}
    xsol, ysol = {}, {}
    for p in probes:
        ann_down[p] = transformed_probe(p, False, t, sec_n, sec_m1)
        ann_up[p] = transformed_probe(p, False, t, sec_p1, sec_n)
        cre_down[p] = transformed_probe(p, True, t, sec_m1, sec_n)
        cre_up[p] = transformed_probe(p, True, t, sec_n, sec_p1)
        bx = ann_down[p] @ ref_vec
        by = cre_up[p] @ ref_vec
        xs = solve_xy(hbar_m1, bx, "X", grid, orbital=p, sector=sec_m1)
        ys = solve_xy(hbar_p1, by, "Y", grid, orbital=p, sector=sec_p1)
        xsol[p] = np.array([s.vector for s in xs])
        ysol[p] = np.array([s.vector for s in ys])
    return XYBundle(reference=reference, m=m, probes=tuple(probes), grid=grid,
                    e_cc=float(e_cc), sector_n=sec_n, sector_m1=sec_m1,
                    sector_p1=sec_p1, hbar_m1=hbar_m1, hbar_p1=hbar_p1,
                    ann_down=ann_down, ann_up=ann_up, cre_down=cre_down,
                    cre_up=cre_up, xsol=xsol, ysol=ysol, row_n=row_n)


def gf_element(k, l, bundle, row_n=None):
    """One Green's function element per frequency, as branch parts.

    Returns (xpart, ypart) arrays: the contraction of <ref|(1+Lambda)
    abar_L+ with X_K and of <ref|(1+Lambda) abar_K with Y_L.
    """
    row = bundle.row_n if row_n is None else row_n
    row_cre = row @ bundle.cre_down[l]
    row_ann = row @ bundle.ann_up[k]
    xp = bundle.xsol[k] @ row_cre
    yp = bundle.ysol[l] @ row_ann
    return xp, yp


def ccgf_matrix(h, t, lam, probes, grid, labels=None):
    """Full Green's function matrix over a probe orbital list."""
    bundle = build_xy(h, t, lam, probes, grid)
    nw, np_ = len(grid), len(probes)
    xpart = np.zeros((nw, np_, np_), dtype=complex)
    ypart = np.zeros((nw, np_, np_), dtype=complex)
    for i, k in enumerate(probes):
        for j, l in enumerate(probes):
            xp, yp = gf_element(k, l, bundle)
            xpart[:, i, j] = xp
            ypart[:, i, j] = yp
    return GreenFunctionResult(grid=grid, orbitals=tuple(probes),
                               xpart=xpart, ypart=ypart, labels=labels or {})


def internal_mask(sector, reference, active):
    """Boolean mask marking the active-space determinants of a sector.

    A determinant is internal when all its holes relative to the
    reference lie in R and all its particles lie in S; this realizes
    the active-space projectors of the ionized and attached sectors.
    """
    ro = set(occ_tuple(reference))
    mask = np.zeros(len(sector), dtype=bool)
    for i, d in enumerate(sector.dets):
        do = set(occ_tuple(d))
        if (ro - do) <= active.R and (do - ro) <= active.S:
            mask[i] = True
    return mask


def gf_split(bundle, lam, active):
    """Internal/external decomposition of the Green's function.

    The internal part contracts (1 + Lambda_int) with the active-space
    components of X and Y; the external part collects the
    (exp(S_ext) - 1) dressing acting on the full solutions.  Their sum
    reproduces the literal branch parts of the full G for active-space
    probes.  Returns (internal, external) GreenFunctionResults.
    """
    reference, m = bundle.reference, bundle.m
    lam_int, _ = split(lam, active)
    s_full = _s_of_lambda(lam, bundle.sector_n)
    _, s_ext = split(s_full, active)
    row_int = bra_row(lam_int, bundle.sector_n)
    es = exp_map(s_ext, bundle.sector_n)
    row_dress = row_int @ (es - np.eye(len(bundle.sector_n)))
    mask_m1 = internal_mask(bundle.sector_m1, reference, active)
    mask_p1 = internal_mask(bundle.sector_p1, reference, active)

    nw, np_ = len(bundle.grid), len(bundle.probes)
    shape = (nw, np_, np_)
    gi_x, gi_y = np.zeros(shape, dtype=complex), np.zeros(shape, dtype=complex)
    ge_x, ge_y = np.zeros(shape, dtype=complex), np.zeros(shape, dtype=complex)
    for i, k in enumerate(bundle.probes):
        for j, l in enumerate(bundle.probes):
            row_cre_int = row_int @ bundle.cre_down[l]
            row_ann_int = row_int @ bundle.ann_up[k]
            gi_x[:, i, j] = (bundle.xsol[k] * mask_m1) @ row_cre_int
            gi_y[:, i, j] = (bundle.ysol[l] * mask_p1) @ row_ann_int
            row_cre_ext = row_dress @ bundle.cre_down[l]
            row_ann_ext = row_dress @ bundle.ann_up[k]
            ge_x[:, i, j] = bundle.xsol[k] @ row_cre_ext
            ge_y[:, i, j] = bundle.ysol[l] @ row_ann_ext
    mk = lambda xp, yp: GreenFunctionResult(grid=bundle.grid,
                                            orbitals=bundle.probes,
                                            xpart=xp, ypart=yp)
    return mk(gi_x, gi_y), mk(ge_x, ge_y)


def _s_of_lambda(lam, sector):
    from .cluster import s_from_lambda
    return s_from_lambda(lam, sector)


def gf_effective(h, t, lam, active, probes, grid):
    """Embedded-block Green's function from active-space resolvents.

    The left and right internal states come from the bar-flavor
    effective Hamiltonian; the resolvents invert the active-space
    projection of the external similarity transform, shifted by the
    coupled-cluster energy; probes are dressed with external amplitudes
    only.  Reduces to the full matrix when the active space spans
    everything.
    """
    reference, m = t.reference, t.m
    n = len(occupied_orbitals(reference, m))
    sec_n = build_sector(m, n)
    sec_m1 = build_sector(m, n - 1)
    sec_p1 = build_sector(m, n + 1)
    t_int, t_ext = split(t, active)
    s_full = _s_of_lambda(lam, sec_n)
    _, s_ext = split(s_full, active)

    heff = build_heff(FLAVOR_BAR, h, reference, m, active, t_ext, sector=sec_n)
    pair = diagonalize_heff(heff)
    e_cc = pair.energy
    right = np.zeros(len(sec_n))
    left = np.zeros(len(sec_n))
    for c_r, c_l, d, s in zip(pair.right, pair.left, heff.basis, heff.signs):
        right[sec_n.position(d)] = s * c_r
        left[sec_n.position(d)] = s * c_l
    w_op = (exp_map(t_int, sec_n) @ exp_map(s_ext, sec_n)
            @ exp_map(_neg(t_int), sec_n))
    left_w = left @ w_op

    idx_m1 = np.nonzero(internal_mask(sec_m1, reference, active))[0]
    idx_p1 = np.nonzero(internal_mask(sec_p1, reference, active))[0]
    if idx_m1.size == 0 or idx_p1.size == 0:
        raise ValueError("active space supports no ionized or attached states")
    hm1 = sector_hbar(h, t_ext, sec_m1)[np.ix_(idx_m1, idx_m1)] - e_cc * np.eye(len(idx_m1))
    hp1 = sector_hbar(h, t_ext, sec_p1)[np.ix_(idx_p1, idx_p1)] - e_cc * np.eye(len(idx_p1))

    nw, np_ = len(grid), len(probes)
    xpart = np.zeros((nw, np_, np_), dtype=complex)
    ypart = np.zeros((nw, np_, np_), dtype=complex)
    mats = {}
    for p in probes:
        mats[p] = {
            "ann_down": transformed_probe(p, False, t_ext, sec_n, sec_m1),
            "ann_up": transformed_probe(p, False, t_ext, sec_p1, sec_n),
            "cre_down": transformed_probe(p, True, t_ext, sec_m1, sec_n),
            "cre_up": transformed_probe(p, True, t_ext, sec_n, sec_p1),
        }
    eye_m1 = np.eye(len(idx_m1))
    eye_p1 = np.eye(len(idx_p1))
    for i, k in enumerate(probes):
        bx = (mats[k]["ann_down"] @ right)[idx_m1]
        for j, l in enumerate(probes):
            rx = (left_w @ mats[l]["cre_down"])[idx_m1]
            ry = (left_w @ mats[k]["ann_up"])[idx_p1]
            by = (mats[l]["cre_up"] @ right)[idx_p1]
            for iw, w in enumerate(grid.omegas):
                xv = np.linalg.solve((w - 1j * grid.eta) * eye_m1 + hm1,
                                     bx.astype(complex))
                xpart[iw, i, j] = rx @ xv
                yv = np.linalg.solve((w + 1j * grid.eta) * eye_p1 - hp1,
                                     by.astype(complex))
                ypart[iw, i, j] = ry @ yv
    labels = {(k, l): "emb" for k in probes for l in probes}
    return GreenFunctionResult(grid=grid, orbitals=tuple(probes),
                               xpart=xpart, ypart=ypart, labels=labels)


def _neg(amps):
    return AmplitudeSet(amps.kind, amps.reference, amps.m,
                        {e: -v for e, v in amps.amps.items()})


def gf_block_matrix(h, t, lam, active_probes, inactive_probes, grid,
                    centers=None):
    """Labeled block Green's function over a partitioned probe list.

    Single-center mode labels elements emb / env,1 / env,2 / env,3 by
    row/column membership in the active probe list.  Multi-center mode
    takes SubsystemSpec centers and attaches, per center, the internal
    part of its own active-space decomposition as an embedded block.
    """
    overlap = set(active_probes) & set(inactive_probes)
    if overlap:
        raise ValueError(f"probe partitions overlap: {sorted(overlap)}")
    probes = tuple(active_probes) + tuple(inactive_probes)
    result = ccgf_matrix(h, t, lam, probes, grid)
    act = set(active_probes)
    for k in probes:
        for l in probes:
            if k in act and l in act:
                result.labels[(k, l)] = "emb"
            elif k in act:
                result.labels[(k, l)] = "env,1"
            elif l in act:
                result.labels[(k, l)] = "env,2"
            else:
                result.labels[(k, l)] = "env,3"
    if centers:
        bundle = build_xy(h, t, lam, probes, grid)
        for idx_c, spec in enumerate(centers, start=1):
            gi, _ = gf_split(bundle, lam, spec.active)
            cp = tuple(sorted(spec.active.R | spec.active.S))
            sel = [probes.index(p) for p in cp]
            result.center_blocks[f"emb({idx_c})"] = GreenFunctionResult(
                grid=grid, orbitals=cp,
                xpart=gi.xpart[np.ix_(range(len(grid)), sel, sel)],
                ypart=gi.ypart[np.ix_(range(len(grid)), sel, sel)],
            )
            for k in cp:
                for l in cp:
                    result.labels[(k, l)] = f"emb({idx_c})"
    return result


def spectral_function(result):
    """Per-orbital spectral arrays A_K(w) of a GreenFunctionResult."""
    return result.spectral()


def gf_poles(bundle, probe):
    """Pole positions and diagonal weights of one probe's G_KK.

    Eigen-decomposes the shifted sector matrices: ionization poles sit
    at E_CC - eig(Hbar(N-1)) with weights from the branch contractions,
    attachment poles at eig(Hbar(N+1)) - E_CC.  Zero-weight poles are
    reported with their (numerically zero) weights; callers filter.
    """
    out = {}
    for kind in ("X", "Y"):
        if kind == "X":
            hn = bundle.hbar_m1
            row = bundle.row_n @ bundle.cre_down[probe]
            rhs = bundle.ann_down[probe] @ _ref_vec(bundle)
        else:
            hn = bundle.hbar_p1
            row = bundle.row_n @ bundle.ann_up[probe]
            rhs = bundle.cre_up[probe] @ _ref_vec(bundle)
        w, v = np.linalg.eig(hn)
        vin = np.linalg.inv(v)
        weights = (row @ v) * (vin @ rhs)
        positions = -w.real if kind == "X" else w.real
        order = np.argsort(positions)
        out[kind] = (positions[order], weights.real[order])
    return out


def _ref_vec(bundle):
    v = np.zeros(len(bundle.sector_n))
    v[bundle.sector_n.position(bundle.reference)] = 1.0
    return v


def find_peaks(omegas, values, min_height=1e-6):
    """Grid local maxima with parabolic refinement of the position."""
    omegas = np.asarray(omegas)
    values = np.asarray(values)
    peaks = []
    for i in range(1, len(values) - 1):
        if values[i] >= values[i - 1] and values[i] > values[i + 1] \
                and values[i] > min_height:
            denom = values[i - 1] - 2 * values[i] + values[i + 1]
            shift = 0.0
            if abs(denom) > 1e-300:
                shift = 0.5 * (values[i - 1] - values[i + 1]) / denom
            step = omegas[min(i + 1, len(omegas) - 1)] - omegas[i]
            peaks.append(float(omegas[i] + shift * step))
    return peaks
