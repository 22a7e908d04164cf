"""Metrological quantities for phase estimation.

Quantum Fisher information is computed from the symmetric logarithmic
derivative in the eigenbasis of rho,

    F^2 = sum_{j,k: p_j + p_k > eps} 2 |rho'_{jk}|^2 / (p_j + p_k),

which on a pure unitary family reduces to 4 Var(H).  The quantum
Cramer-Rao bound is delta_phi >= 1/F.  Readout performance is judged by
error propagation, delta_phi = sqrt(Var O) / |d<O>/dphi|, scanned over
operating points phi where the signal slope does not vanish.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .fock import (
    BasisMismatchError,
    BlockStructureError,
    DensityOperator,
    HermitianOperator,
    NumericalError,
    PSD_FLOOR,
    TwoModeBasis,
    assemble_blocks,
    block_split,
    expectation,
    lowering_power,
)
from .interferometer import (
    NoonLikeSpec,
    SuperpositionSpec,
    branch_amplitudes,
    phase_rate,
)
from .loss import lossy_state_blocks, survival_table

logger = logging.getLogger(__name__)

# eigenvalues below this fraction of the largest one count as kernel
RANK_CUTOFF_FACTOR = 1e-12
# |d<O>/dphi| below this fraction of ||O|| marks a degenerate operating point
DEGENERACY_FACTOR = 1e-12
# variance below this fraction of <O^2> + <O>^2 is round-off, not signal:
# <O^2> - <O>^2 cancels catastrophically right where the slope vanishes,
# so such points belong to the degenerate neighborhood as well
VARIANCE_FLOOR_FACTOR = 1e-8
GOLDEN_TOL = 1e-10


class DegenerateOperatingPointError(RuntimeError):
    """The signal slope vanishes, so error propagation is ill-conditioned."""


class UndefinedBoundError(ValueError):
    """The Cramer-Rao bound is undefined at zero Fisher information."""


@dataclass
class QfiResult:
    """Fisher information F^2 (so that (delta phi)^2 >= 1/qfi) plus diagnostics."""

    qfi: float
    rank_cutoff: float
    spectrum: np.ndarray


@dataclass
class ReadoutResult:
    """Uncertainty scan of one observable over a phase grid."""

    phi_grid: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    delta_phi: np.ndarray
    min_delta_phi: float
    argmin_phi: float


def spectral_norm(matrix: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh(matrix)).max())


def qfi_pure_analytic(N: int, k: int, chi: float) -> float:
    """Closed-form pure-state Fisher information of the two-branch input:
    (N - 2k + chi N^2/2 - chi N k)^2."""
    if not 0 <= k <= N:
        raise ValueError(f"k={k} outside [0, {N}]")
    base = (N - 2 * k) + 0.5 * chi * N * N - chi * N * k
    return base * base


def qcrb(qfi: float) -> float:
    """Cramer-Rao bound on delta_phi: 1/sqrt(qfi)."""
    if qfi <= 0.0:
        raise UndefinedBoundError("bound undefined for non-positive Fisher information")
    return 1.0 / math.sqrt(qfi)


def _clamped_probabilities(values: np.ndarray, context: str) -> np.ndarray:
    lo = values.min() if values.size else 0.0
    if lo < PSD_FLOOR:
        raise ValueError(f"{context}: eigenvalue {lo:.3e} below PSD floor")
    if lo < 0.0:
        logger.debug("%s: clamping %d negative eigenvalues (min %.3e) to 0",
                     context, int((values < 0).sum()), lo)
        values = np.clip(values, 0.0, None)
    return values


def _qfi_from_block_pairs(pairs) -> QfiResult:
    """QFI from matching (rho block, rho' block) pairs sharing one basis."""
    decomposed = []
    spectrum = []
    for rho_block, rhop_block in pairs:
        if not rho_block.any():
            # empty block: all probabilities 0, every pair is below cutoff
            spectrum.append(np.zeros(rho_block.shape[0]))
            continue
        vals, vecs = np.linalg.eigh(rho_block)
        decomposed.append((vals, vecs, rhop_block))
        spectrum.append(vals)
    spectrum = np.sort(np.concatenate(spectrum)) if spectrum else np.zeros(0)
    probs = _clamped_probabilities(spectrum.copy(), "qfi")
    cutoff = RANK_CUTOFF_FACTOR * (probs.max() if probs.size else 0.0)
    total = 0.0
    for vals, vecs, rhop_block in decomposed:
        p = _clamped_probabilities(vals, "qfi block")
        a = vecs.conj().T @ rhop_block @ vecs
        psum = p[:, None] + p[None, :]
        mask = psum > cutoff
        if mask.any():
            total += float((2.0 * np.abs(a[mask]) ** 2 / psum[mask]).sum())
    return QfiResult(qfi=total, rank_cutoff=cutoff, spectrum=spectrum)


def qfi(rho: DensityOperator, rho_prime: HermitianOperator) -> QfiResult:
    """Fisher information of a state and its phase derivative.

    Uses the total-photon-number block structure when present (every state
    built in this package has it); a full-matrix eigendecomposition is the
    fallback for inputs without it.
    """
    if rho.basis != rho_prime.basis:
        raise BasisMismatchError("rho and rho_prime live on different bases")
    try:
        rho_blocks = block_split(rho)
        rhop_blocks = block_split(rho_prime)
        pairs = [(rb, pb) for (_, rb), (_, pb) in zip(rho_blocks, rhop_blocks)]
    except BlockStructureError:
        logger.debug("qfi falling back to a full-matrix eigendecomposition")
        pairs = [(rho.matrix, rho_prime.matrix)]
    return _qfi_from_block_pairs(pairs)


def sld(rho: DensityOperator, rho_prime: HermitianOperator,
        rank_tol: float | None = None) -> HermitianOperator:
    """Symmetric logarithmic derivative L solving rho' = (L rho + rho L)/2.

    Built in the eigenbasis of rho as L_jk = 2 rho'_jk / (p_j + p_k) on
    eigenvalue pairs above rank_tol (zero elsewhere), then rotated back to
    the computational basis.
    """
    if rho.basis != rho_prime.basis:
        raise BasisMismatchError("rho and rho_prime live on different bases")
    vals, vecs = np.linalg.eigh(rho.matrix)
    probs = _clamped_probabilities(vals, "sld")
    if rank_tol is None:
        rank_tol = RANK_CUTOFF_FACTOR * probs.max()
    a = vecs.conj().T @ rho_prime.matrix @ vecs
    psum = probs[:, None] + probs[None, :]
    core = np.where(psum > rank_tol, 2.0 * a / np.where(psum > rank_tol, psum, 1.0), 0.0)
    matrix = vecs @ core @ vecs.conj().T
    return HermitianOperator(rho.basis, 0.5 * (matrix + matrix.conj().T))


def measurement_m(basis: TwoModeBasis) -> HermitianOperator:
    """Photon-count-difference readout in internal modes: i(a2^dag a1 - a1^dag a2)."""
    a1 = lowering_power(1, 1, basis)
    a2 = lowering_power(2, 1, basis)
    x = a2.conj().T @ a1
    return HermitianOperator(basis, 1j * (x - x.conj().T))


def measurement_mm(m: int, basis: TwoModeBasis) -> HermitianOperator:
    """m-photon coincidence readout: i[(a1^dag)^m a2^m - a1^m (a2^dag)^m].

    At m = 1 this is the negative of ``measurement_m``; both operators are
    kept with these exact signs, and moments/uncertainties do not depend
    on the global sign.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    a1m = lowering_power(1, m, basis)
    a2m = lowering_power(2, m, basis)
    x = a1m.conj().T @ a2m
    return HermitianOperator(basis, 1j * (x - x.conj().T))


def moments(rho, obs: HermitianOperator) -> tuple[float, float]:
    """Mean and variance of an observable: Tr[rho O], Tr[rho O^2] - mean^2."""
    mean = expectation(rho, obs)
    second = expectation(rho, HermitianOperator(obs.basis, obs.matrix @ obs.matrix))
    variance = second - mean * mean
    # round-off in the subtraction scales with the observable's magnitude
    scale = max(1.0, abs(second) + mean * mean)
    if variance < PSD_FLOOR * scale:
        raise NumericalError(f"variance {variance:.3e} below round-off floor")
    if variance < 0.0:
        logger.debug("clamping variance %.3e to 0", variance)
        variance = 0.0
    return mean, variance


class PhasedFamily:
    """phi-parameterized lossy output family of one fixed-N input.

    rho(phi) is the photon-loss channel applied to the phase-evolved
    input; rho'(phi) is available analytically (term-by-term derivative of
    the branch phase factors) or by Richardson-extrapolated central
    differences with step ``fd_step``.
    """

    def __init__(self, input_spec, chi: float = 0.0, eta: float = 1.0,
                 derivative: str = "analytic", fd_step: float = 1e-3,
                 basis: TwoModeBasis | None = None):
        if not isinstance(input_spec, (NoonLikeSpec, SuperpositionSpec)):
            raise TypeError(f"unsupported input spec {type(input_spec).__name__}")
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta={eta} outside [0, 1]")
        if chi < 0:
            raise ValueError("chi must be non-negative")
        if derivative not in ("analytic", "fd"):
            raise ValueError("derivative mode must be 'analytic' or 'fd'")
        if fd_step <= 0:
            raise ValueError("fd_step must be positive")
        self.input_spec = input_spec
        self.chi = float(chi)
        self.eta = float(eta)
        self.derivative = derivative
        self.fd_step = float(fd_step)
        self.basis = basis if basis is not None else TwoModeBasis(input_spec.N)
        if self.basis.n_total_max < input_spec.N:
            raise ValueError("basis truncation below the input photon number")

    def rho_blocks(self, phi: float):
        return lossy_state_blocks(self.input_spec, self.eta, phi, self.chi)

    def rho_and_prime_blocks(self, phi: float):
        return lossy_state_blocks(self.input_spec, self.eta, phi, self.chi,
                                  with_derivative=True)

    def rho(self, phi: float) -> DensityOperator:
        matrix = assemble_blocks(self.basis, self.rho_blocks(phi))
        return DensityOperator(self.basis, 0.5 * (matrix + matrix.conj().T))

    def rho_prime(self, phi: float) -> HermitianOperator:
        if self.derivative == "analytic":
            _, dblocks = self.rho_and_prime_blocks(phi)
            matrix = assemble_blocks(self.basis, dblocks)
        else:
            matrix = self._finite_difference(phi)
        matrix = 0.5 * (matrix + matrix.conj().T)
        trace = abs(matrix.trace())
        if trace > 1e-10:
            raise NumericalError(f"phase derivative has trace {trace:.3e}")
        return HermitianOperator(self.basis, matrix)

    def _finite_difference(self, phi: float) -> np.ndarray:
        h = self.fd_step
        if h < 100 * np.finfo(float).eps * max(1.0, abs(phi)):
            raise NumericalError(f"finite-difference step {h:.3e} too small; "
                                 "cancellation would dominate")
        def at(x):
            return assemble_blocks(self.basis, self.rho_blocks(x))
        coarse = (at(phi + h) - at(phi - h)) / (2 * h)
        fine = (at(phi + h / 2) - at(phi - h / 2)) / h
        return (4.0 * fine - coarse) / 3.0

    def qfi(self, phi: float = 0.0) -> QfiResult:
        blocks, dblocks = self.rho_and_prime_blocks(phi)
        trace = sum(b.trace().real for _, b in blocks)
        if abs(trace - 1.0) > 1e-10:
            raise NumericalError(f"family state trace {trace!r} deviates from 1")
        pairs = [(0.5 * (rb + rb.conj().T), 0.5 * (db + db.conj().T))
                 for (_, rb), (_, db) in zip(blocks, dblocks)]
        return _qfi_from_block_pairs(pairs)

    def moment_profile(self, obs: HermitianOperator) -> "MomentProfile":
        """Exact scan machinery: phase-frequency decomposition of <O>(phi)
        and <O^2>(phi) over branch pairs of the closed-form channel output."""
        if obs.basis != self.basis:
            raise BasisMismatchError("observable basis does not match the family")
        spec = self.input_spec
        N = spec.N
        branches = branch_amplitudes(spec)
        kappa = survival_table(N, self.eta)
        omat = obs.matrix
        omat2 = omat @ omat
        rates = [phase_rate(n1, n2, self.chi) for n1, n2, _ in branches]
        freqs, w_mean, w_sq = [], [], []
        for (n1, n2, amp), h in zip(branches, rates):
            for (m1, m2, amp_b), h_b in zip(branches, rates):
                q = np.arange(min(n1, m1) + 1)
                p = np.arange(min(n2, m2) + 1)
                kq = kappa[n1, q] * kappa[m1, q]
                kp = kappa[n2, p] * kappa[m2, p]
                coeff = amp * amp_b * np.outer(kq, kp)
                ket1 = n1 - q[:, None]
                ket2 = n2 - p[None, :]
                tot = ket1 + ket2
                row = tot * (tot + 1) // 2 + ket1
                col = tot * (tot + 1) // 2 + (m1 - q[:, None])
                freqs.append(h - h_b)
                w_mean.append(np.sum(coeff * omat[col, row]))
                w_sq.append(np.sum(coeff * omat2[col, row]))
        return MomentProfile(np.asarray(freqs), np.asarray(w_mean),
                             np.asarray(w_sq), spectral_norm(omat))


class MomentProfile:
    """<O>(phi) = Re sum_j w_j e^{i phi d_j} and friends, exact per family."""

    def __init__(self, freqs: np.ndarray, w_mean: np.ndarray,
                 w_sq: np.ndarray, obs_norm: float):
        self.freqs = freqs
        self.w_mean = w_mean.astype(complex)
        self.w_sq = w_sq.astype(complex)
        self.obs_norm = obs_norm
        self.slope_floor = DEGENERACY_FACTOR * obs_norm

    def _phases(self, phi):
        return np.exp(1j * np.multiply.outer(np.asarray(phi, dtype=float),
                                             self.freqs))

    def mean(self, phi):
        return (self._phases(phi) @ self.w_mean).real

    def second_moment(self, phi):
        return (self._phases(phi) @ self.w_sq).real

    def variance(self, phi):
        var = self.second_moment(phi) - self.mean(phi) ** 2
        lo = np.min(var)
        if lo < PSD_FLOOR * max(1.0, self.obs_norm ** 2):
            raise NumericalError(f"variance {lo:.3e} below round-off floor")
        if lo < 0.0:
            logger.debug("clamping %d negative variances (min %.3e) to 0",
                         int(np.sum(var < 0)), lo)
        return np.clip(var, 0.0, None)

    def slope(self, phi):
        return (self._phases(phi) @ (1j * self.freqs * self.w_mean)).real

    def delta_phi(self, phi):
        """sqrt(Var)/|slope| with NaN at degenerate operating points.

        A point counts as degenerate when the signal slope falls below its
        threshold or the variance falls below its round-off floor; for the
        sinusoidal readouts here both happen in the same neighborhoods.
        """
        slope = np.abs(self.slope(phi))
        mean = self.mean(phi)
        second = self.second_moment(phi)
        var = np.clip(second - mean ** 2, 0.0, None)
        good = (slope >= self.slope_floor) & (
            var >= VARIANCE_FLOOR_FACTOR * (np.abs(second) + mean ** 2))
        out = np.full(np.shape(phi), np.nan, dtype=float)
        np.divide(np.sqrt(var), slope, out=out, where=good)
        return out


def rho_prime(family: PhasedFamily, phi: float) -> HermitianOperator:
    """Phase derivative of the family state at phi (analytic or FD mode)."""
    return family.rho_prime(phi)


def max_qfi_over_k(N: int, eta: float, chi: float,
                   phi: float = 0.0) -> tuple[int, float]:
    """Scan the branch index k of the two-branch family and return the
    maximizing (k, qfi); ties break toward smaller k."""
    if N < 1:
        raise ValueError("N must be at least 1")
    best_k, best = 0, -np.inf
    for k in range(N + 1):
        value = PhasedFamily(NoonLikeSpec(N, k), chi=chi, eta=eta).qfi(phi).qfi
        if value > best:
            best_k, best = k, value
    return best_k, best


def delta_phi(family: PhasedFamily, obs: HermitianOperator, phi: float) -> float:
    """Error-propagation uncertainty sqrt(Var O)/|d<O>/dphi| at one phi.

    Raises at degenerate operating points: vanishing signal slope, or a
    variance so small that its computed value is round-off noise.
    """
    if obs.basis != family.basis:
        raise BasisMismatchError("observable basis does not match the family")
    rho = family.rho(phi)
    mean = expectation(rho, obs)
    second = expectation(rho, HermitianOperator(obs.basis,
                                                obs.matrix @ obs.matrix))
    variance = max(second - mean * mean, 0.0)
    rhop = family.rho_prime(phi)
    slope = float(np.sum(rhop.matrix * obs.matrix.T).real)
    if abs(slope) < DEGENERACY_FACTOR * spectral_norm(obs.matrix):
        raise DegenerateOperatingPointError(
            f"|d<O>/dphi| = {abs(slope):.3e} at phi={phi}; no operating point")
    if variance < VARIANCE_FLOOR_FACTOR * (abs(second) + mean * mean):
        raise DegenerateOperatingPointError(
            f"variance {variance:.3e} at phi={phi} is below its round-off floor")
    return math.sqrt(variance) / abs(slope)


def _golden_section(f, lo: float, hi: float, tol: float):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    best_x, best_f = lo, f(lo)
    for x in (hi,):
        fx = f(x)
        if fx < best_f:
            best_x, best_f = x, fx
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        for x, fx in ((c, fc), (d, fd)):
            if fx < best_f:
                best_x, best_f = x, fx
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return best_x, best_f


def min_delta_phi(family: PhasedFamily, obs: HermitianOperator,
                  grid: np.ndarray | None = None) -> ReadoutResult:
    """Scan delta_phi over a grid (default: 2001 points on [0, pi]), skip
    degenerate points, and refine the best bracket by golden section."""
    if grid is None:
        grid = np.linspace(0.0, np.pi, 2001)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    if family.derivative == "analytic":
        profile = family.moment_profile(obs)
        mean = profile.mean(grid)
        variance = profile.variance(grid)
        deltas = profile.delta_phi(grid)
        evaluate = lambda x: float(profile.delta_phi(np.atleast_1d(x))[0])
    else:
        mean = np.empty_like(grid)
        variance = np.empty_like(grid)
        deltas = np.full_like(grid, np.nan)
        for i, x in enumerate(grid):
            mean[i], variance[i] = moments(family.rho(x), obs)
            try:
                deltas[i] = delta_phi(family, obs, x)
            except DegenerateOperatingPointError:
                pass
        def evaluate(x):
            try:
                return delta_phi(family, obs, float(x))
            except DegenerateOperatingPointError:
                return np.inf
    if not np.isfinite(deltas).any():
        raise DegenerateOperatingPointError(
            "the signal slope vanishes on every grid point")
    i_best = int(np.nanargmin(deltas))
    lo = grid[max(i_best - 1, 0)]
    hi = grid[min(i_best + 1, grid.size - 1)]
    guarded = lambda x: np.nan_to_num(evaluate(x), nan=np.inf)
    if hi > lo:
        x_star, f_star = _golden_section(guarded, lo, hi, GOLDEN_TOL)
    else:
        x_star, f_star = float(grid[i_best]), float(deltas[i_best])
    if f_star > deltas[i_best]:
        x_star, f_star = float(grid[i_best]), float(deltas[i_best])
    return ReadoutResult(phi_grid=grid, mean=mean, variance=variance,
                         delta_phi=deltas, min_delta_phi=float(f_star),
                         argmin_phi=float(x_star))
