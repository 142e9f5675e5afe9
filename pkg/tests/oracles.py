"""Independent reference implementations used to cross-check the library.

Everything here deliberately avoids the library's fast paths: signs come
from a normal-ordering simulation, resolvents from dense linear solves,
Lambda from the transformed ground-state bra.  Slow and only usable on
tiny sectors, which is the point.
"""

import numpy as np

from sescc.cluster import exp_map
from sescc.fockspace import occ_tuple


def _expand(seq):
    """Normal-order a creation/annihilation sequence acting on the vacuum.

    Returns {occupied_tuple: coefficient}.  Moves the rightmost
    annihilator (only creations sit to its right) one slot right per
    step via a_p A = {a_p, A} - A a_p, branching on contractions;
    exponential, fine for short strings.
    """
    i = next(
        (k for k in range(len(seq) - 1, -1, -1) if not seq[k][1]), None
    )
    if i is None:
        orbs = [p for p, _ in seq]
        if len(set(orbs)) != len(orbs):
            return {}
        sign = 1
        arr = list(orbs)
        for a in range(len(arr)):
            for b in range(len(arr) - 1 - a):
                if arr[b] > arr[b + 1]:
                    arr[b], arr[b + 1] = arr[b + 1], arr[b]
                    sign = -sign
        return {tuple(sorted(orbs)): sign}
    p = seq[i][0]
    if i + 1 == len(seq):
        return {}  # annihilator hit the vacuum
    q, dag = seq[i + 1]
    swapped = seq[:i] + [seq[i + 1], seq[i]] + seq[i + 2:]
    out = {}
    for det, c in _expand(swapped).items():
        out[det] = out.get(det, 0) - c
    if dag and q == p:
        for det, c in _expand(seq[:i] + seq[i + 2:]).items():
            out[det] = out.get(det, 0) + c
    return {d: c for d, c in out.items() if c != 0}


def normal_order_sign(opstring, det):
    """Apply an (orbital, dagger) string to a determinant symbolically.

    The determinant is the ascending product of creation operators on
    the vacuum; the combined sequence is normal-ordered by explicit
    anticommutations.  Returns (sign, new_det) or None when the result
    vanishes.
    """
    seq = [(p, bool(d)) for p, d in opstring]
    seq += [(q, True) for q in occ_tuple(det)]
    result = _expand(seq)
    if not result:
        return None
    assert len(result) == 1, "operator string produced several determinants"
    (occ, coeff), = result.items()
    assert coeff in (1, -1)
    out = 0
    for p in occ:
        out |= 1 << p
    return coeff, out


def dense_resolvent(hbar_shifted, rhs, omega, eta, kind):
    """Solve the frequency-domain linear system with a dense factorization."""
    dim = hbar_shifted.shape[0]
    eye = np.eye(dim)
    if kind == "X":
        mat = (omega - 1j * eta) * eye + hbar_shifted
    elif kind == "Y":
        mat = (omega + 1j * eta) * eye - hbar_shifted
    else:
        raise ValueError(kind)
    return np.linalg.solve(mat, rhs)


def lambda_row_oracle(ground, t, sector):
    """Left ground-state row of the similarity-transformed Hamiltonian.

    <L| = <gs| exp(T) up to scale; intermediate normalization fixes the
    scale through the reference component.
    """
    row = ground @ exp_map(t, sector)
    iref = sector.position(t.reference)
    if abs(row[iref]) < 1e-12:
        raise ValueError("ground state has no reference component")
    return row / row[iref]


def embed(vec, small_sector, big_sector):
    out = np.zeros(len(big_sector.dets), dtype=vec.dtype)
    for c, d in zip(vec, small_sector.dets):
        out[big_sector.position(d)] = c
    return out
