"""Excitation signatures, amplitude sets, and cluster-operator algebra.

An excitation is a (holes, particles) signature relative to a fixed
reference determinant.  The rank-k operator string follows

    a^dag_{a1} ... a^dag_{ak} a_{ik} ... a_{i1}

with i1 < ... < ik and a1 < ... < ak, which fixes the sign convention
for every amplitude.  De-excitation kinds (Lambda, S) use the conjugate
string, i.e. the transposed matrix.

Amplitude sets of kind T and S are nilpotent as operators, so their
exponentials are exact finite polynomials; similarity transforms and
cluster analysis below rely only on that.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .fockspace import (
    SecondQuantizedOp,
    apply_string_det,
    build_sector,
    det_to_string,
    occ_tuple,
    sq_op,
    to_matrix,
)

KIND_T = "T"
KIND_LAMBDA = "Lambda"
KIND_S = "S"
_KINDS = (KIND_T, KIND_LAMBDA, KIND_S)

# De-excitation parametrizations live on the bra side.
_DEEXCITE = {KIND_T: False, KIND_LAMBDA: True, KIND_S: True}


@dataclass(frozen=True, order=True)
class Excitation:
    """Hole/particle signature; tuples strictly ascending, equal rank."""

    holes: tuple
    particles: tuple

    def __post_init__(self):
        if len(self.holes) != len(self.particles) or not self.holes:
            raise ValueError(f"bad signature {self.holes} -> {self.particles}")
        for t in (self.holes, self.particles):
            if any(a >= b for a, b in zip(t, t[1:])):
                raise ValueError(f"indices must be strictly ascending, got {t}")

    @property
    def rank(self):
        return len(self.holes)

    def opstring(self):
        """Literal (orbital, dagger) string of the excitation operator."""
        return tuple((a, 1) for a in self.particles) + tuple(
            (i, 0) for i in reversed(self.holes)
        )

    def __str__(self):
        h = "".join(str(i) for i in self.holes)
        p = "".join(str(a) for a in self.particles)
        return f"{h}->{p}"


@dataclass(frozen=True)
class ActiveSpace:
    """Active occupied set R and active virtual set S of an SES."""

    R: frozenset
    S: frozenset

    def __post_init__(self):
        object.__setattr__(self, "R", frozenset(self.R))
        object.__setattr__(self, "S", frozenset(self.S))

    def contains(self, exc):
        return set(exc.holes) <= self.R and set(exc.particles) <= self.S

    def label(self):
        r = ",".join(str(i) for i in sorted(self.R))
        s = ",".join(str(a) for a in sorted(self.S))
        return f"({r}|{s})"


@dataclass(frozen=True)
class SubsystemSpec:
    active: ActiveSpace
    label: str


@dataclass
class AmplitudeSet:
    """Map from excitation signatures to real amplitudes.

    kind selects the operator realization: T excites the ket; Lambda and
    S de-excite (conjugate strings).  The reference determinant and
    orbital count pin down the hole/particle pools.
    """

    kind: str
    reference: int
    m: int
    amps: dict

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")

    def __len__(self):
        return len(self.amps)

    def get(self, exc, default=0.0):
        return self.amps.get(exc, default)

    def copy(self, kind=None):
        return AmplitudeSet(kind or self.kind, self.reference, self.m, dict(self.amps))

    def nonzero(self, cut=0.0):
        return {e: t for e, t in self.amps.items() if abs(t) > cut}

    def max_rank(self):
        return max((e.rank for e in self.amps), default=0)

    def max_abs_diff(self, other):
        keys = set(self.amps) | set(other.amps)
        return max((abs(self.get(e) - other.get(e)) for e in keys), default=0.0)


def empty_amplitudes(kind, reference, m):
    return AmplitudeSet(kind, reference, m, {})


def occupied_orbitals(reference, m):
    return occ_tuple(reference)


def virtual_orbitals(reference, m):
    return tuple(p for p in range(m) if not reference >> p & 1)


def all_excitations(reference, m, rank_max):
    """Every signature up to rank_max, rank-major then lexicographic."""
    occ = occupied_orbitals(reference, m)
    vir = virtual_orbitals(reference, m)
    excs = []
    for k in range(1, rank_max + 1):
        if k > len(occ) or k > len(vir):
            break
        for holes in combinations(occ, k):
            for particles in combinations(vir, k):
                excs.append(Excitation(holes, particles))
    return excs


def internal_excitations(active, reference, m):
    """Signatures generated by the SES: holes in R, particles in S."""
    occ = set(occupied_orbitals(reference, m))
    vir = set(virtual_orbitals(reference, m))
    if not active.R <= occ:
        raise ValueError(f"active R {sorted(active.R)} not within occupied {sorted(occ)}")
    if not active.S <= vir:
        raise ValueError(f"active S {sorted(active.S)} not within virtual {sorted(vir)}")
    kmax = min(len(active.R), len(active.S))
    return [e for e in all_excitations(reference, m, kmax) if active.contains(e)]


def excitation_det(exc, reference):
    """Determinant reached by applying the signature to the reference."""
    det = reference
    for i in exc.holes:
        if not det >> i & 1:
            raise ValueError(f"hole {i} not occupied in {det_to_string(reference, 32)}")
        det &= ~(1 << i)
    for a in exc.particles:
        if det >> a & 1:
            raise ValueError(f"particle {a} already occupied")
        det |= 1 << a
    return det


def excitation_sign(exc, reference):
    """Sign sigma with E_mu |ref> = sigma |det_mu>."""
    hit = apply_string_det(exc.opstring(), reference)
    if hit is None:
        raise ValueError(f"signature {exc} incompatible with reference")
    return hit[0]


def split(amps, active):
    """Partition into (internal, external) by active-space membership."""
    internal, external = {}, {}
    for exc, t in amps.amps.items():
        (internal if active.contains(exc) else external)[exc] = t
    mk = lambda d: AmplitudeSet(amps.kind, amps.reference, amps.m, d)
    return mk(internal), mk(external)


def merge(*sets):
    """Union of amplitude sets with disjoint signatures."""
    first = sets[0]
    out = {}
    for s in sets:
        if (s.kind, s.reference, s.m) != (first.kind, first.reference, first.m):
            raise ValueError("cannot merge amplitude sets with different kind/reference")
        for exc, t in s.amps.items():
            if exc in out:
                raise ValueError(f"duplicate signature {exc} in merge")
            out[exc] = t
    return AmplitudeSet(first.kind, first.reference, first.m, out)


def excitation_op(amps):
    """SecondQuantizedOp realizing the amplitude set's operator."""
    terms = []
    for exc, t in amps.amps.items():
        s = exc.opstring()
        if _DEEXCITE[amps.kind]:
            # conjugate string: reverse order, flip daggers
            s = tuple((p, 1 - d) for p, d in reversed(s))
        terms.append((t, s))
    return sq_op(terms)


def excitation_matrix(amps, sector):
    """Dense matrix of the amplitude set's operator on a sector."""
    if not amps.amps:
        return np.zeros((len(sector), len(sector)))
    return to_matrix(excitation_op(amps), sector, sector).toarray()


def exp_map(amps, sector):
    """Exact exponential of a nilpotent T- or S-kind operator.

    The power series terminates because excitations (de-excitations)
    strictly raise (lower) rank; Lambda-kind input is rejected since the
    left state is parametrized linearly as (1 + Lambda).
    """
    if amps.kind == KIND_LAMBDA:
        raise ValueError("Lambda parametrization is linear; exp_map takes T or S kinds")
    dim = len(sector)
    mat = excitation_matrix(amps, sector)
    out = np.eye(dim)
    term = np.eye(dim)
    k = 0
    while True:
        k += 1
        term = term @ mat / k
        if not np.count_nonzero(term):
            break
        out += term
        if k > sector.n_electrons + 1:
            raise RuntimeError("exponential series failed to terminate")
    return out


def similarity_transform(hmat, amps, sector):
    """exp(-A) H exp(A) with the amplitude set's operator A."""
    e = exp_map(amps, sector)
    ei = exp_map(
        AmplitudeSet(amps.kind, amps.reference, amps.m,
                     {x: -t for x, t in amps.amps.items()}),
        sector,
    )
    return ei @ np.asarray(hmat) @ e


def bra_row(lam, sector):
    """Row vector of <ref| (1 + Lambda) over the sector basis."""
    if lam.kind != KIND_LAMBDA:
        raise ValueError(f"expected Lambda kind, got {lam.kind}")
    row = np.zeros(len(sector))
    row[sector.position(lam.reference)] = 1.0
    for exc, v in lam.amps.items():
        row[sector.position(excitation_det(exc, lam.reference))] += (
            v * excitation_sign(exc, lam.reference)
        )
    return row


def _extract(target, read_known, reference, m, rank_max, kind):
    """Rank-ascending amplitude extraction shared by ket and bra analysis.

    target maps determinant -> coefficient of the normalized vector; at
    each rank the deviation from the exponential of the lower ranks is
    the new amplitude (products of lower-rank pieces never reach a rank
    they do not sum to, so one ascending pass is exact).
    """
    out = {}
    for k in range(1, rank_max + 1):
        excs = [e for e in all_excitations(reference, m, k) if e.rank == k]
        if not excs:
            break
        known = read_known(AmplitudeSet(kind, reference, m, out))
        for exc in excs:
            det = excitation_det(exc, reference)
            sigma = excitation_sign(exc, reference)
            out[exc] = sigma * (target.get(det, 0.0) - known.get(det, 0.0))
    return out


def cluster_analyze_ket(coeffs, sector, reference, rank_max, kind=KIND_T):
    """Amplitudes T with exp(T)|ref> equal to the given vector.

    The vector is intermediate-normalized internally; the reference
    coefficient must be nonzero.
    """
    c = np.asarray(coeffs, dtype=float)
    ref_idx = sector.position(reference)
    if abs(c[ref_idx]) < 1e-12:
        raise ValueError("vanishing reference coefficient; cluster analysis undefined")
    c = c / c[ref_idx]
    target = {d: c[i] for i, d in enumerate(sector.dets)}

    def read_known(partial):
        v = exp_map(partial, sector)[:, ref_idx]
        return {d: v[i] for i, d in enumerate(sector.dets)}

    amps = _extract(target, read_known, reference, sector.m, rank_max, kind)
    return AmplitudeSet(kind, reference, sector.m, amps)


def cluster_analyze_bra(row, sector, reference, rank_max, kind=KIND_S):
    """Amplitudes S with <ref| exp(S) equal to the given row vector.

    Bra-side mirror of cluster_analyze_ket, used to read de-excitation
    amplitudes off left eigenvectors and off (1 + Lambda) rows.
    """
    u = np.asarray(row, dtype=float)
    ref_idx = sector.position(reference)
    if abs(u[ref_idx]) < 1e-12:
        raise ValueError("vanishing reference coefficient; cluster analysis undefined")
    u = u / u[ref_idx]
    target = {d: u[i] for i, d in enumerate(sector.dets)}

    def read_known(partial):
        w = exp_map(partial, sector)[ref_idx, :]
        return {d: w[i] for i, d in enumerate(sector.dets)}

    amps = _extract(target, read_known, reference, sector.m, rank_max, kind)
    return AmplitudeSet(kind, reference, sector.m, amps)


def _full_rank(reference, m):
    n = len(occupied_orbitals(reference, m))
    return min(n, m - n)


def lambda_from_s(s, sector=None):
    """Linear-parametrization amplitudes of the left state <ref| exp(S).

    Projects <ref| exp(S) onto each de-excited configuration; the rank-1
    entries coincide with S and higher ranks pick up products of
    lower-rank pieces.  Internal/external splits commute with this map
    because [S_int, S_ext] = 0.
    """
    if s.kind != KIND_S:
        raise ValueError(f"expected S kind, got {s.kind}")
    n = len(occupied_orbitals(s.reference, s.m))
    sector = sector or build_sector(s.m, n)
    ref_idx = sector.position(s.reference)
    u = exp_map(s, sector)[ref_idx, :]
    out = {}
    for exc in all_excitations(s.reference, s.m, _full_rank(s.reference, s.m)):
        v = u[sector.position(excitation_det(exc, s.reference))]
        if v != 0.0:
            out[exc] = excitation_sign(exc, s.reference) * v
    return AmplitudeSet(KIND_LAMBDA, s.reference, s.m, out)


def s_from_lambda(lam, sector=None):
    """Inverse of lambda_from_s: exponential amplitudes of <ref|(1+Lambda)."""
    if lam.kind != KIND_LAMBDA:
        raise ValueError(f"expected Lambda kind, got {lam.kind}")
    n = len(occupied_orbitals(lam.reference, lam.m))
    sector = sector or build_sector(lam.m, n)
    row = bra_row(lam, sector)
    s = cluster_analyze_bra(row, sector, lam.reference, _full_rank(lam.reference, lam.m))
    s.amps = {e: v for e, v in s.amps.items() if v != 0.0}
    return s
