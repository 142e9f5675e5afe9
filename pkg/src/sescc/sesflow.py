"""Active-space effective Hamiltonians and the multi-subsystem flow.

Three downfolded Hamiltonians share one small basis, the reference plus
the determinants generated by the active space:

  bar        exp(-T_ext) H exp(T_ext), projected
  doublebar  exp(S_ext) Hbar exp(-S_ext), projected (Hbar uses full T)
  tilde      W Hbar_ext with W = exp(T_int) exp(S_ext) exp(-T_int)

Each has the coupled-cluster ground energy as its lowest eigenvalue
when built from converged external amplitudes; the internal amplitudes
are read off its eigenvectors.  The flow cycles over several active
spaces, re-solving each small eigenproblem against the current global
amplitude pool and synchronizing shared amplitudes, until every
subsystem reports the same energy.
"""

from dataclasses import dataclass

import numpy as np

from .cluster import (
    KIND_S,
    KIND_T,
    AmplitudeSet,
    all_excitations,
    bra_row,
    cluster_analyze_bra,
    cluster_analyze_ket,
    excitation_det,
    excitation_sign,
    exp_map,
    internal_excitations,
    merge,
    occupied_orbitals,
    similarity_transform,
    split,
)
from .ccsolver import ConvergenceError, SolverConfig
from .fockspace import build_sector, to_matrix

FLAVOR_BAR = "bar"
FLAVOR_DOUBLEBAR = "doublebar"
FLAVOR_TILDE = "tilde"
_FLAVORS = (FLAVOR_BAR, FLAVOR_DOUBLEBAR, FLAVOR_TILDE)

IMAG_TOL = 1.0e-10


@dataclass
class EffectiveHamiltonian:
    flavor: str
    active: object
    reference: int
    m: int
    basis: tuple          # determinants, reference first
    signs: tuple          # configuration-basis signs, +1 for the reference
    matrix: np.ndarray
    internal: tuple       # internal excitation signatures in basis order


@dataclass
class InternalEigenpair:
    energy: float
    right: np.ndarray
    left: np.ndarray
    overlap: float


def _negate(amps):
    return AmplitudeSet(amps.kind, amps.reference, amps.m,
                        {e: -v for e, v in amps.amps.items()})


def build_heff(flavor, h, reference, m, active, t_ext,
               s_ext=None, t_int=None, sector=None):
    """Project a transformed Hamiltonian onto the reference + active block.

    t_ext must contain no internal signatures of `active`.  The
    doublebar flavor needs both s_ext and t_int (its inner transform
    uses the full cluster operator); tilde needs s_ext and t_int for W.
    """
    if flavor not in _FLAVORS:
        raise ValueError(f"flavor must be one of {_FLAVORS}, got {flavor!r}")
    bad = [e for e in t_ext.amps if active.contains(e)]
    if bad:
        raise ValueError(f"t_ext contains internal signatures: {bad[:3]}")
    if flavor in (FLAVOR_DOUBLEBAR, FLAVOR_TILDE):
        if s_ext is None or t_int is None:
            raise ValueError(f"{flavor} flavor needs s_ext and t_int")
    n = len(occupied_orbitals(reference, m))
    sector = sector or build_sector(m, n)
    hmat = to_matrix(h, sector, sector).toarray()

    if flavor == FLAVOR_BAR:
        full = similarity_transform(hmat, t_ext, sector)
    elif flavor == FLAVOR_DOUBLEBAR:
        hbar = similarity_transform(hmat, merge(t_int, t_ext), sector)
        es = exp_map(s_ext, sector)
        esi = exp_map(_negate(s_ext), sector)
        full = es @ hbar @ esi
    else:
        hbar_ext = similarity_transform(hmat, t_ext, sector)
        et = exp_map(t_int, sector)
        eti = exp_map(_negate(t_int), sector)
        w = et @ exp_map(s_ext, sector) @ eti
        full = w @ hbar_ext

    ints = tuple(internal_excitations(active, reference, m))
    basis = (reference,) + tuple(excitation_det(e, reference) for e in ints)
    signs = (1.0,) + tuple(float(excitation_sign(e, reference)) for e in ints)
    idx = [sector.position(d) for d in basis]
    sub = full[np.ix_(idx, idx)]
    sgn = np.asarray(signs)
    mat = sub * np.outer(sgn, sgn)
    return EffectiveHamiltonian(flavor, active, reference, m,
                                basis, signs, mat, ints)


def _reference_combination(cols):
    """Eigenspace member with the largest reference coefficient.

    Orthonormalizes the (degenerate) eigenvector columns and projects
    the reference axis onto their span; unique whenever the reference
    determinant selects a symmetry block of the degenerate multiplet.
    """
    q, _ = np.linalg.qr(np.real(cols))
    v = q @ q[0, :]
    if np.linalg.norm(v) < 1e-10:
        raise ValueError(
            "degenerate lowest eigenvalue with no reference component; "
            "cannot select an internal state")
    return v


def diagonalize_heff(heff):
    """Lowest eigenpair with balanced biorthonormal left/right vectors.

    Both vectors are scaled to equal norm with <left|right> = 1 and a
    positive reference coefficient.  A degenerate lowest eigenvalue is
    resolved toward the reference determinant; a lowest eigenvalue with
    imaginary part beyond 1e-10 signals inconsistent external
    amplitudes and raises.
    """
    mat = heff.matrix
    wr, vr = np.linalg.eig(mat)
    wl, vl = np.linalg.eig(mat.T)
    k = int(np.argmin(wr.real))
    scale = max(1.0, np.max(np.abs(mat)))
    if abs(wr[k].imag) > IMAG_TOL * scale:
        raise ValueError(
            f"lowest effective eigenvalue is complex ({wr[k]:.3e}); "
            "external amplitudes are inconsistent"
        )
    grp_r = np.nonzero(np.abs(wr - wr[k]) < 1e-9 * scale)[0]
    grp_l = np.nonzero(np.abs(wl - wr[k]) < 1e-9 * scale)[0]
    if len(grp_r) == 1:
        kl = int(np.argmin(np.abs(wl - wr[k])))
        right = np.real(vr[:, k])
        left = np.real(vl[:, kl])
    else:
        right = _reference_combination(vr[:, grp_r])
        left = _reference_combination(vl[:, grp_l])
    right = right / np.linalg.norm(right)
    left = left / np.linalg.norm(left)
    if right[0] < 0:
        right = -right
    if left[0] < 0:
        left = -left
    s = float(left @ right)
    if s <= 0:
        raise ValueError("left/right eigenvectors are orthogonal; cannot normalize")
    right = right / np.sqrt(s)
    left = left / np.sqrt(s)
    return InternalEigenpair(energy=float(wr[k].real), right=right, left=left,
                             overlap=float(left @ right))


def _embed_column(vec, heff, sector):
    out = np.zeros(len(sector))
    for c, d, s in zip(vec, heff.basis, heff.signs):
        out[sector.position(d)] = s * c
    return out


def extract_internal(pair, heff, sector=None):
    """Internal amplitudes encoded in an eigenpair.

    bar: T_int from the right vector (the left one carries no clean
    exponential structure).  doublebar: S_int from the left vector.
    tilde: both, the left one unwound through exp(T_int).
    """
    n = len(occupied_orbitals(heff.reference, heff.m))
    sector = sector or build_sector(heff.m, n)
    kmax = max((e.rank for e in heff.internal), default=0)
    if kmax == 0:
        empty_t = AmplitudeSet(KIND_T, heff.reference, heff.m, {})
        empty_s = AmplitudeSet(KIND_S, heff.reference, heff.m, {})
        if heff.flavor == FLAVOR_BAR:
            return empty_t, None
        if heff.flavor == FLAVOR_DOUBLEBAR:
            return None, empty_s
        return empty_t, empty_s
    if abs(pair.right[0]) < 1e-12 or abs(pair.left[0]) < 1e-12:
        raise ValueError("vanishing reference coefficient in eigenvector")

    def t_from_right():
        col = _embed_column(pair.right, heff, sector)
        amps = cluster_analyze_ket(col, sector, heff.reference, kmax)
        keep = {e: amps.get(e) for e in heff.internal}
        return AmplitudeSet(KIND_T, heff.reference, heff.m, keep)

    def s_from_left(t_int=None):
        row = _embed_column(pair.left, heff, sector)
        if t_int is not None:
            # left vector represents <ref| exp(S_int) exp(-T_int); undo T
            row = row @ exp_map(t_int, sector)
        amps = cluster_analyze_bra(row, sector, heff.reference, kmax, kind=KIND_S)
        keep = {e: amps.get(e) for e in heff.internal}
        return AmplitudeSet(KIND_S, heff.reference, heff.m, keep)

    if heff.flavor == FLAVOR_BAR:
        return t_from_right(), None
    if heff.flavor == FLAVOR_DOUBLEBAR:
        return None, s_from_left()
    t_int = t_from_right()
    return t_int, s_from_left(t_int)


@dataclass
class FlowState:
    subsystems: list
    t: AmplitudeSet
    energies: list
    energy: float
    iteration: int
    spread: float
    uncovered: tuple
    trace: list


def flow_iterate(h, reference, m, subsystems, cfg=None, rank_max=None,
                 uncovered="freeze"):
    """Cycle over subsystem eigenproblems until their energies agree.

    Each sweep visits the subsystems in list order; every active space
    gets a bar-flavor effective Hamiltonian built from the current
    global amplitudes, is diagonalized, and writes its internal
    amplitudes back.  Signatures claimed by several subsystems are
    averaged over the sweep's proposals.  Signatures claimed by none
    are frozen at zero (default) or relaxed by damped residual steps
    (uncovered="residual").

    Converged when the spread of subsystem energies and the largest
    amplitude change both drop below cfg.tol.
    """
    if uncovered not in ("freeze", "residual"):
        raise ValueError(f"uncovered must be 'freeze' or 'residual', got {uncovered!r}")
    if not subsystems:
        raise ValueError("flow needs at least one subsystem")
    cfg = cfg or SolverConfig()
    labels = [sub.label for sub in subsystems]
    if len(set(labels)) != len(labels):
        raise ValueError("subsystem labels must be unique")
    n = len(occupied_orbitals(reference, m))
    sector = build_sector(m, n)
    hmat = to_matrix(h, sector, sector).toarray()
    ref_idx = sector.position(reference)

    internal_sets = {
        sub.label: set(internal_excitations(sub.active, reference, m))
        for sub in subsystems
    }
    covered = set().union(*internal_sets.values()) if subsystems else set()
    if rank_max is None:
        rank_max = max((e.rank for e in covered), default=0)
    pool = all_excitations(reference, m, rank_max)
    frozen = tuple(e for e in pool if e not in covered)

    t = {e: 0.0 for e in pool}
    trace = []
    energies = [np.inf] * len(subsystems)
    for it in range(1, cfg.max_iter + 1):
        t_prev = dict(t)
        proposals = {}
        for j, sub in enumerate(subsystems):
            amps = AmplitudeSet(KIND_T, reference, m, t)
            _, t_ext = split(amps, sub.active)
            heff = build_heff(FLAVOR_BAR, h, reference, m, sub.active, t_ext,
                              sector=sector)
            pair = diagonalize_heff(heff)
            t_int, _ = extract_internal(pair, heff, sector=sector)
            delta = max((abs(t_int.get(e) - t[e]) for e in internal_sets[sub.label]),
                        default=0.0)
            for e in internal_sets[sub.label]:
                proposals.setdefault(e, []).append(t_int.get(e))
                t[e] = t_int.get(e)
            energies[j] = pair.energy
            trace.append({"iteration": it, "subsystem": sub.label,
                          "energy": pair.energy, "residual": delta})
        # synchronize overlaps: mean of this sweep's proposals
        for e, vals in proposals.items():
            if len(vals) > 1:
                t[e] = float(np.mean(vals))
        if uncovered == "residual" and frozen:
            amps = AmplitudeSet(KIND_T, reference, m, t)
            hbar = similarity_transform(hmat, amps, sector)
            e0 = hbar[ref_idx, ref_idx]
            for e in frozen:
                i = sector.position(excitation_det(e, reference))
                r = excitation_sign(e, reference) * hbar[i, ref_idx]
                d = hbar[i, i] - e0
                t[e] -= cfg.mixing * (r / d if abs(d) > 1e-8 else r)
        spread = float(np.max(energies) - np.min(energies))
        change = max(abs(t[e] - t_prev[e]) for e in pool) if pool else 0.0
        if spread < cfg.tol and change < cfg.tol:
            amps = AmplitudeSet(KIND_T, reference, m, t)
            return FlowState(subsystems=list(subsystems), t=amps,
                             energies=list(energies),
                             energy=float(np.mean(energies)), iteration=it,
                             spread=spread, uncovered=frozen, trace=trace)
    raise ConvergenceError(
        f"flow not converged after {cfg.max_iter} sweeps "
        f"(energy spread {spread:.3e}, amplitude change {change:.3e})",
        residual_norm=change,
        trace=[(r["iteration"], r["energy"], r["residual"]) for r in trace],
    )


def double_occupancy(t, lam, probe, sector=None):
    """Left/right expectation value of a number-operator product.

    Evaluates <ref|(1 + Lambda) exp(-T) probe exp(T)|ref> as dense
    matrices; with exact-limit amplitudes this equals the eigenstate
    expectation value.
    """
    reference, m = t.reference, t.m
    n = len(occupied_orbitals(reference, m))
    sector = sector or build_sector(m, n)
    pmat = to_matrix(probe, sector, sector).toarray()
    dressed = similarity_transform(pmat, t, sector)
    u = bra_row(lam, sector)
    return float(u @ dressed[:, sector.position(reference)])
