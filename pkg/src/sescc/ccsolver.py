"""Iterative solvers for cluster amplitudes and their left-state partners.

All three solvers share the same machinery: residuals read off rows or
columns of exactly transformed sector matrices, Jacobi steps scaled by
similarity-transformed diagonal denominators, and DIIS acceleration.
Initial guesses are zero and iteration order is fixed, so results are
deterministic for a given configuration.
"""

from dataclasses import dataclass

import numpy as np

from .cluster import (
    KIND_LAMBDA,
    KIND_S,
    KIND_T,
    AmplitudeSet,
    all_excitations,
    bra_row,
    cluster_analyze_ket,
    exp_map,
    excitation_det,
    excitation_sign,
    occupied_orbitals,
    similarity_transform,
)
from .fockspace import build_sector, to_matrix

DIVERGENCE_LIMIT = 1.0e3
SMALL_DENOMINATOR = 1.0e-8


@dataclass
class SolverConfig:
    max_iter: int = 200
    tol: float = 1.0e-10
    mixing: float = 1.0
    diis_depth: int = 6

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.mixing <= 1:
            raise ValueError("mixing must lie in (0, 1]")
        if self.diis_depth < 0:
            raise ValueError("diis_depth must be >= 0 (0 disables DIIS)")


class ConvergenceError(RuntimeError):
    """Solver failed to reach tolerance; carries the last residual norm."""

    def __init__(self, message, residual_norm=None, trace=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.trace = trace or []


@dataclass
class CCSolution:
    t: AmplitudeSet
    energy: float
    residual_norm: float
    iterations: int


class _Diis:
    """Pulay extrapolation over flattened amplitude vectors."""

    def __init__(self, depth):
        self.depth = depth
        self.xs = []
        self.errs = []

    def step(self, x, err):
        if self.depth == 0:
            return x
        self.xs.append(x.copy())
        self.errs.append(err.copy())
        if len(self.xs) > self.depth:
            self.xs.pop(0)
            self.errs.pop(0)
        n = len(self.xs)
        if n < 2:
            return x
        b = np.empty((n + 1, n + 1))
        b[:n, :n] = np.array(
            [[ei @ ej for ej in self.errs] for ei in self.errs]
        )
        b[n, :] = 1.0
        b[:, n] = 1.0
        b[n, n] = 0.0
        rhs = np.zeros(n + 1)
        rhs[n] = 1.0
        try:
            c = np.linalg.solve(b, rhs)[:n]
        except np.linalg.LinAlgError:
            # near-linear-dependent history; restart from the plain step
            self.xs, self.errs = [self.xs[-1]], [self.errs[-1]]
            return x
        return sum(ci * xi for ci, xi in zip(c, self.xs))


def _signature_arrays(excs, reference, sector):
    idx = np.array([sector.position(excitation_det(e, reference)) for e in excs],
                   dtype=int)
    signs = np.array([excitation_sign(e, reference) for e in excs], dtype=float)
    return idx, signs


def _run(update, n_amps, cfg, label):
    """Shared fixed-point driver: update(t) -> (residual, energy)."""
    t = np.zeros(n_amps)
    diis = _Diis(cfg.diis_depth)
    trace = []
    for it in range(1, cfg.max_iter + 1):
        r, energy, denom = update(t)
        rnorm = float(np.max(np.abs(r))) if r.size else 0.0
        trace.append((it, energy, rnorm))
        if rnorm < cfg.tol:
            return t, energy, rnorm, it
        if rnorm > DIVERGENCE_LIMIT:
            raise ConvergenceError(
                f"{label} diverged at iteration {it} (|r| = {rnorm:.3e})",
                residual_norm=rnorm, trace=trace,
            )
        safe = np.abs(denom) > SMALL_DENOMINATOR
        step = np.where(safe, r / np.where(safe, denom, 1.0), r)
        t = diis.step(t - cfg.mixing * step, r)
    raise ConvergenceError(
        f"{label} not converged after {cfg.max_iter} iterations "
        f"(|r| = {rnorm:.3e}, tol = {cfg.tol:.1e})",
        residual_norm=rnorm, trace=trace,
    )


def solve_t(h, reference, m, rank_max, cfg=None, sector=None):
    """Converge the amplitude equations for excitations up to rank_max.

    Projections of exp(-T) H exp(T) |ref> onto every excited
    configuration up to rank_max are driven below cfg.tol; the returned
    energy is the reference expectation of the transformed Hamiltonian.

    Parameters
    ----------
    h : SecondQuantizedOp
        Particle-conserving Hamiltonian.
    reference : int
        Reference determinant bitmask.
    m : int
        Number of spin-orbitals.
    rank_max : int
        Highest excitation rank kept in T.
    """
    cfg = cfg or SolverConfig()
    n = len(occupied_orbitals(reference, m))
    sector = sector or build_sector(m, n)
    if rank_max > n:
        raise ValueError(f"rank_max {rank_max} exceeds electron count {n}")
    hmat = to_matrix(h, sector, sector).toarray()
    ref_idx = sector.position(reference)
    excs = all_excitations(reference, m, rank_max)
    idx, signs = _signature_arrays(excs, reference, sector)

    def update(t):
        amps = AmplitudeSet(KIND_T, reference, m, dict(zip(excs, t)))
        hbar = similarity_transform(hmat, amps, sector)
        energy = hbar[ref_idx, ref_idx]
        r = signs * hbar[idx, ref_idx]
        denom = hbar[idx, idx] - energy
        return r, energy, denom

    t, energy, rnorm, it = _run(update, len(excs), cfg, "amplitude solve")
    amps = AmplitudeSet(KIND_T, reference, m, dict(zip(excs, t)))
    return CCSolution(t=amps, energy=energy, residual_norm=rnorm, iterations=it)


def solve_lambda(hbar, t, cfg=None, rank_max=None, sector=None):
    """Left-state amplitudes: <ref|(1 + Lambda) is a left eigenrow of hbar.

    hbar must be the similarity transform produced by the converged t on
    the same sector.  Residuals are the projections of the row equation
    u (hbar - E) = 0 onto each de-excited configuration.
    """
    cfg = cfg or SolverConfig()
    reference, m = t.reference, t.m
    n = len(occupied_orbitals(reference, m))
    sector = sector or build_sector(m, n)
    hbar = np.asarray(hbar)
    ref_idx = sector.position(reference)
    rank_max = rank_max if rank_max is not None else t.max_rank()
    excs = all_excitations(reference, m, rank_max)
    idx, signs = _signature_arrays(excs, reference, sector)
    energy = hbar[ref_idx, ref_idx]
    denom_full = hbar[idx, idx] - energy

    def update(l):
        lam = AmplitudeSet(KIND_LAMBDA, reference, m, dict(zip(excs, l)))
        u = bra_row(lam, sector)
        row = u @ hbar - energy * u
        r = signs * row[idx]
        return r, energy, denom_full

    l, energy, rnorm, it = _run(update, len(excs), cfg, "left-state solve")
    return AmplitudeSet(KIND_LAMBDA, reference, m, dict(zip(excs, l)))


def solve_s_ext(hbar, active, lambda_int, cfg=None, rank_max=None, sector=None):
    """External exponential de-excitation amplitudes of the left state.

    Solves the projections of <ref|(1 + Lambda_int) exp(S_ext) hbar
    exp(-S_ext) onto external configurations; lambda_int supplies the
    frozen internal part.  The full active space leaves nothing to
    solve and an empty set is returned.
    """
    cfg = cfg or SolverConfig()
    reference, m = lambda_int.reference, lambda_int.m
    n = len(occupied_orbitals(reference, m))
    sector = sector or build_sector(m, n)
    hbar = np.asarray(hbar)
    ref_idx = sector.position(reference)
    rank_max = rank_max if rank_max is not None else min(n, m - n)
    excs = [e for e in all_excitations(reference, m, rank_max)
            if not active.contains(e)]
    if not excs:
        return AmplitudeSet(KIND_S, reference, m, {})
    idx, signs = _signature_arrays(excs, reference, sector)
    energy = hbar[ref_idx, ref_idx]
    denom_full = hbar[idx, idx] - energy
    u_int = bra_row(lambda_int.copy(kind=KIND_LAMBDA), sector)

    def update(s):
        sext = AmplitudeSet(KIND_S, reference, m, dict(zip(excs, s)))
        es = exp_map(sext, sector)
        esi = exp_map(
            AmplitudeSet(KIND_S, reference, m, {x: -v for x, v in sext.amps.items()}),
            sector,
        )
        row = u_int @ es @ hbar @ esi
        r = signs * row[idx]
        return r, energy, denom_full

    s, _, rnorm, it = _run(update, len(excs), cfg, "external de-excitation solve")
    return AmplitudeSet(KIND_S, reference, m, dict(zip(excs, s)))


def cluster_analyze_fci(fci_ground, reference, rank_max=None):
    """Exact cluster amplitudes of a ground-state vector.

    T is defined by exp(T)|ref> = v / <ref|v>; computed by recursive
    subtraction of lower-rank products, so feeding the result back
    through exp_map reproduces the intermediate-normalized input
    exactly.  Serves as the independent oracle for solve_t.
    """
    sector = fci_ground.sector
    n = len(occupied_orbitals(reference, sector.m))
    rank_max = rank_max if rank_max is not None else min(n, sector.m - n)
    return cluster_analyze_ket(fci_ground.coeffs, sector, reference, rank_max)
