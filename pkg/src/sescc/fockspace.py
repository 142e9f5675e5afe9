"""Determinant-basis Fock-space algebra for small fermionic models.

Determinants are occupation bitmasks: bit p is set iff spin-orbital p is
occupied.  Spin-orbitals use the up-block-first convention: indices
0 .. M/2-1 carry up spin, M/2 .. M-1 carry down spin, so orbital p and
p + M/2 are the two spin channels of the same spatial site.

Operator strings are applied literally, rightmost operator first, with
the fermionic sign of each elementary step given by the parity of the
occupied orbitals below the acted index.  Everything here is exact
integer/bit arithmetic plus sparse matrices; no normal ordering, no
truncation.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class SpinOrbital:
    """A labeled spin-orbital: index within [0, M), spin channel, locality tag."""

    index: int
    spin: str
    tag: str = "bath"

    def __post_init__(self):
        if self.spin not in (UP, DOWN):
            raise ValueError(f"spin must be 'up' or 'down', got {self.spin!r}")


def spin_of(p, m):
    """Spin channel of orbital p under the up-block-first convention."""
    return UP if p < m // 2 else DOWN


def det_from_occ(occ):
    """Bitmask determinant from an iterable of occupied orbital indices."""
    det = 0
    for p in occ:
        if det >> p & 1:
            raise ValueError(f"orbital {p} listed twice")
        det |= 1 << p
    return det


def occ_tuple(det):
    """Ascending tuple of occupied orbital indices."""
    occ = []
    p = 0
    while det >> p:
        if det >> p & 1:
            occ.append(p)
        p += 1
    return tuple(occ)


def det_to_string(det, m):
    """Ket string with orbital 0 leftmost, e.g. 0b011001, m=6 -> '100110'."""
    return "".join("1" if det >> p & 1 else "0" for p in range(m))


def det_from_string(s):
    """Inverse of det_to_string."""
    if set(s) - {"0", "1"}:
        raise ValueError(f"occupation string must be binary, got {s!r}")
    return sum(1 << p for p, c in enumerate(s) if c == "1")


def parity_below(det, p):
    """(-1)**(number of occupied orbitals with index < p)."""
    return -1 if bin(det & ((1 << p) - 1)).count("1") & 1 else 1


@dataclass(frozen=True)
class SectorBasis:
    """All determinants of a fixed particle number, in canonical order.

    The order is lexicographic on the ascending tuples of occupied
    orbitals, i.e. the order itertools.combinations emits; two
    constructions of the same sector are identical.
    """

    m: int
    n_electrons: int
    dets: tuple
    index: dict = field(repr=False, compare=False)

    def __len__(self):
        return len(self.dets)

    def position(self, det):
        try:
            return self.index[det]
        except KeyError:
            raise KeyError(
                f"determinant {det_to_string(det, self.m)} not in sector "
                f"(M={self.m}, N={self.n_electrons})"
            ) from None


def build_sector(m, n):
    """Full C(M, n) determinant basis of the n-electron sector.

    Parameters
    ----------
    m : int
        Number of spin-orbitals.
    n : int
        Electron count, 0 <= n <= m.
    """
    if not 0 <= n <= m:
        raise ValueError(f"electron count {n} outside [0, {m}]")
    dets = tuple(det_from_occ(c) for c in combinations(range(m), n))
    return SectorBasis(m, n, dets, {d: i for i, d in enumerate(dets)})


def build_spin_sector(m, n_up, n_down):
    """Determinant basis with fixed up and down electron counts.

    Restriction of build_sector(m, n_up + n_down) to determinants whose
    up-block popcount is n_up; used when a spin-conserving Hamiltonian
    has degenerate ground states across S_z blocks and a single block
    must be diagonalized on its own.
    """
    half = m // 2
    up_mask = (1 << half) - 1
    full = build_sector(m, n_up + n_down)
    dets = tuple(d for d in full.dets if bin(d & up_mask).count("1") == n_up)
    if not dets:
        raise ValueError(f"empty spin sector (m={m}, n_up={n_up}, n_down={n_down})")
    return SectorBasis(m, n_up + n_down, dets, {d: i for i, d in enumerate(dets)})


@dataclass
class StateVector:
    """Dense coefficient vector over a sector basis."""

    sector: SectorBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs)
        if self.coeffs.shape != (len(self.sector),):
            raise ValueError(
                f"coefficient length {self.coeffs.shape} does not match "
                f"sector size {len(self.sector)}"
            )


def basis_state(sector, det):
    """Unit StateVector on one determinant."""
    v = np.zeros(len(sector))
    v[sector.position(det)] = 1.0
    return StateVector(sector, v)


@dataclass(frozen=True)
class SecondQuantizedOp:
    """Sum of coefficient-weighted operator strings.

    terms is a tuple of (coeff, opstring); an opstring is a tuple of
    (orbital, dagger) pairs read left to right in operator order, so the
    rightmost pair acts on the ket first.
    """

    terms: tuple

    def __add__(self, other):
        return SecondQuantizedOp(self.terms + other.terms)

    def scaled(self, factor):
        return SecondQuantizedOp(
            tuple((factor * c, s) for c, s in self.terms)
        )

    def support(self):
        """Set of orbital indices touched by any term."""
        return {p for _, s in self.terms for p, _ in s}


def sq_op(terms):
    """SecondQuantizedOp from a list of (coeff, [(orbital, dagger), ...])."""
    return SecondQuantizedOp(
        tuple((float(c), tuple((int(p), bool(d)) for p, d in s)) for c, s in terms)
    )


def number_op(orbitals):
    """Sum of a_p^dag a_p over the given orbitals."""
    return sq_op([(1.0, [(p, 1), (p, 0)]) for p in orbitals])


def remap_orbitals(op, mapping):
    """Relabel every orbital index through a dict; used to place a
    fragment Hamiltonian inside a larger composite orbital range."""
    return SecondQuantizedOp(
        tuple((c, tuple((mapping[p], d) for p, d in s)) for c, s in op.terms)
    )


def apply_string_det(opstring, det):
    """Apply one opstring to a single determinant.

    Returns (sign, det) or None when the string annihilates the state
    (emptying an empty orbital or filling an occupied one).
    """
    sign = 1
    for p, dagger in reversed(opstring):
        occupied = det >> p & 1
        if dagger:
            if occupied:
                return None
            sign *= parity_below(det, p)
            det |= 1 << p
        else:
            if not occupied:
                return None
            sign *= parity_below(det, p)
            det &= ~(1 << p)
    return sign, det


def apply_op(op, v, out):
    """Apply a SecondQuantizedOp to a StateVector, landing in sector `out`.

    Image components on determinants absent from `out` are dropped, so
    passing a restricted sector projects onto it; for particle-number-
    and spin-conserving operators on matching sectors nothing is lost.
    """
    res = np.zeros(len(out), dtype=v.coeffs.dtype)
    nz = np.nonzero(v.coeffs)[0]
    for j in nz:
        cj = v.coeffs[j]
        det = v.sector.dets[j]
        for coeff, opstring in op.terms:
            hit = apply_string_det(opstring, det)
            if hit is None:
                continue
            sign, image = hit
            i = out.index.get(image)
            if i is not None:
                res[i] += coeff * sign * cj
    return StateVector(out, res)


def to_matrix(op, dom, cod):
    """Sparse matrix of `op` mapping sector `dom` into sector `cod`.

    Column j is the image of the j-th domain determinant.  Entries are
    exact (no drop tolerance).
    """
    rows, cols, vals = [], [], []
    for j, det in enumerate(dom.dets):
        for coeff, opstring in op.terms:
            hit = apply_string_det(opstring, det)
            if hit is None:
                continue
            sign, image = hit
            i = cod.index.get(image)
            if i is not None:
                rows.append(i)
                cols.append(j)
                vals.append(coeff * sign)
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(cod), len(dom)), dtype=float
    )


def projector(dets, sector):
    """Diagonal 0/1 projector onto a subset of the sector's determinants."""
    diag = np.zeros(len(sector))
    for d in dets:
        diag[sector.position(d)] = 1.0
    return sp.diags(diag).tocsr()
