"""Truncated Fock-space states and operators for one and two optical modes.

Conventions used throughout the package:

* Quadratures are scaled so that ``a = (X + iP)/sqrt(2)``; the vacuum
  quadrature variance is 1/2 and a real displacement by ``alpha`` shifts
  the position mean to ``X0 = alpha*sqrt(2)``.
* Rotated quadrature eigenstates decompose as ``<n|x,theta> =
  psi_n(x) * exp(i*n*theta)`` with ``psi_n`` the real harmonic-oscillator
  eigenfunctions.
* Two-mode kets are ordered ``|m>_A |k>_B -> index m*dim + k`` (mode A is
  the slow index), matching ``numpy.kron``.
* The Wigner function is normalized to ``integral W dx dp = 1`` so the
  vacuum takes the value ``1/pi`` at the origin.

All state objects are immutable after construction and every operation is
a pure function, so everything here is safe to call concurrently.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import DegenerateConditionError, TruncationWarning

# Population allowed on the trailing diagonal of any mode before a
# truncation warning is emitted.  Silent truncation error is the dominant
# failure mode of Fock-basis numerics, hence the aggressive default.
TRAILING_POPULATION_BUDGET = 1e-6

_HERMITIAN_ATOL = 1e-10
_TRACE_ATOL = 1e-8
_PSD_ATOL = 1e-8


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian state operator on a truncated Fock space.

    ``dim`` is the per-mode truncation, ``modes`` is 1 or 2 and ``data``
    is the complex matrix of size ``dim**modes`` squared.  The array is
    frozen (read-only) on construction.
    """

    dim: int
    modes: int
    data: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.modes not in (1, 2):
            raise ValueError(f"modes must be 1 or 2, got {self.modes}")
        d = self.dim**self.modes
        arr = np.ascontiguousarray(self.data, dtype=complex)
        if arr.shape != (d, d):
            raise ValueError(f"expected shape {(d, d)}, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_pure(cls, vec: np.ndarray, dim: int, modes: int) -> "DensityMatrix":
        """Rank-1 density matrix |v><v| / <v|v> from a ket."""
        v = np.asarray(vec, dtype=complex).ravel()
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("cannot build a state from the zero vector")
        v = v / norm
        return cls(dim=dim, modes=modes, data=np.outer(v, v.conj()))

    @classmethod
    def vacuum(cls, dim: int, modes: int = 1) -> "DensityMatrix":
        d = dim**modes
        vec = np.zeros(d)
        vec[0] = 1.0
        return cls.from_pure(vec, dim, modes)

    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def normalize(self) -> "DensityMatrix":
        tr = np.trace(self.data)
        if abs(tr) == 0.0:
            raise ValueError("cannot normalize a traceless operator")
        return DensityMatrix(self.dim, self.modes, self.data / tr)

    def validate(self, check_psd: bool = False) -> None:
        """Raise if Hermiticity/trace (optionally positivity) are violated."""
        dev = np.abs(self.data - self.data.conj().T).max()
        if dev > _HERMITIAN_ATOL:
            raise ValueError(f"matrix is not Hermitian: max deviation {dev:.3e}")
        tr = self.trace()
        if abs(tr - 1.0) > _TRACE_ATOL:
            raise ValueError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
        if check_psd:
            lo = float(np.linalg.eigvalsh(self.data)[0])
            if lo < -_PSD_ATOL:
                raise ValueError(f"matrix is not PSD: min eigenvalue {lo:.3e}")

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "modes": self.modes,
            "re": self.data.real.ravel().tolist(),
            "im": self.data.imag.ravel().tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DensityMatrix":
        dim = int(doc["dim"])
        modes = int(doc["modes"])
        d = dim**modes
        re = np.asarray(doc["re"], dtype=float).reshape(d, d)
        im = np.asarray(doc["im"], dtype=float).reshape(d, d)
        rho = cls(dim=dim, modes=modes, data=re + 1j * im)
        rho.validate()
        return rho

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "DensityMatrix":
        return cls.from_json_dict(json.loads(text))


def _check_trailing_population(rho: DensityMatrix) -> None:
    worst = photon_number_pmf(rho, 0)[-1]
    if rho.modes == 2:
        worst = max(worst, photon_number_pmf(rho, 1)[-1])
    if worst > TRAILING_POPULATION_BUDGET:
        warnings.warn(
            f"trailing Fock level holds population {worst:.2e}; "
            "increase dim to avoid truncation error",
            TruncationWarning,
            stacklevel=3,
        )


def displacement_matrix(alpha: complex, dim: int) -> np.ndarray:
    """Matrix elements ``<m|D(alpha)|n>`` for m, n < dim.

    Uses the closed-form associated-Laguerre expression with log-space
    factorial prefactors; each element is exact up to float rounding, so
    the result is the truncation of the infinite-dimensional operator
    (approximately unitary only while ``|alpha|**2`` is well below dim).
    Column 0 holds the coherent-state amplitudes
    ``exp(-|alpha|^2/2) alpha^m / sqrt(m!)``.
    """
    if dim < 2:
        raise ValueError(f"dim must be at least 2, got {dim}")
    alpha = complex(alpha)
    if alpha == 0:
        return np.eye(dim, dtype=complex)
    if abs(alpha) ** 2 > dim / 4:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha)**2:.3g} exceeds dim/4 = {dim/4:.3g}; "
            "displacement is truncation-dominated",
            TruncationWarning,
            stacklevel=2,
        )
    a = abs(alpha)
    x = a * a
    theta = np.angle(alpha)
    n = np.arange(dim)
    row, col = np.meshgrid(n, n, indexing="ij")
    p = np.minimum(row, col)
    k = np.abs(row - col)
    logmag = 0.5 * (gammaln(p + 1) - gammaln(p + k + 1)) + k * np.log(a) - x / 2.0
    mag = np.exp(logmag) * eval_genlaguerre(p, k, x)
    # row >= col carries alpha^k, row < col carries (-conj(alpha))^k
    phase = np.where(
        row >= col,
        np.exp(1j * k * theta),
        (-1.0) ** k * np.exp(-1j * k * theta),
    )
    return mag * phase


def displaced_fock(alpha: complex, n: int, dim: int) -> np.ndarray:
    """Ket of ``D(alpha)|n>`` in the truncated basis."""
    if not 0 <= n < dim:
        raise ValueError(f"Fock index {n} outside [0, {dim})")
    return displacement_matrix(alpha, dim)[:, n].copy()


def loss_kraus_operators(eta: float, dim: int) -> list[np.ndarray]:
    """Kraus decomposition of the single-mode bosonic loss channel.

    ``K_j`` removes j photons: ``<n-j|K_j|n> =
    sqrt(C(n, j) * (1-eta)^j * eta^(n-j))``.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    if eta == 1.0:
        return [np.eye(dim, dtype=complex)]
    if eta == 0.0:  # every photon is lost: K_j = |0><j|
        ops = []
        for j in range(dim):
            K = np.zeros((dim, dim), dtype=complex)
            K[0, j] = 1.0
            ops.append(K)
        return ops
    n = np.arange(dim)
    log1m = np.log1p(-eta)
    logeta = np.log(eta)
    ops = []
    for j in range(dim):
        kept = n[j:]  # source levels n >= j
        loga = 0.5 * (
            gammaln(kept + 1)
            - gammaln(j + 1)
            - gammaln(kept - j + 1)
            + j * log1m
            + (kept - j) * logeta
        )
        K = np.zeros((dim, dim), dtype=complex)
        K[np.arange(dim - j), kept] = np.exp(loga)
        ops.append(K)
    return ops


def apply_loss(rho: DensityMatrix, eta: float, mode: int = 0) -> DensityMatrix:
    """Bosonic loss channel of transmissivity ``eta`` on one mode.

    Trace-preserving by construction (photons lost above the truncation
    edge stay accounted for because the Kraus family is complete on the
    truncated space).
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    if mode not in range(rho.modes):
        raise ValueError(f"mode {mode} invalid for a {rho.modes}-mode state")
    if eta == 1.0:
        return rho
    d = rho.dim
    # terms below 1e-14 elementwise contribute < 1e-28 to the output
    kraus = [K for K in loss_kraus_operators(eta, d) if np.abs(K).max() > 1e-14]
    if rho.modes == 1:
        out = np.zeros_like(rho.data)
        for K in kraus:
            out += K @ rho.data @ K.conj().T
        return DensityMatrix(d, 1, out)
    t = rho.data.reshape(d, d, d, d)  # (mA, kB, nA, lB)
    out = np.zeros_like(t)
    if mode == 0:
        for K in kraus:
            # out[m,k,n,l] = K[m,i] t[i,k,j,l] conj(K[n,j])
            step = np.tensordot(K, t, axes=([1], [0]))  # (m,k,j,l)
            out += np.tensordot(step, K.conj(), axes=([2], [1])).transpose(0, 1, 3, 2)
    else:
        for K in kraus:
            # out[m,k,a,j] = K[k,i] t[m,i,a,l] conj(K[j,l])
            step = np.tensordot(K, t, axes=([1], [1]))  # (k,m,a,l)
            out += np.tensordot(step, K.conj(), axes=([3], [1])).transpose(1, 0, 2, 3)
    return DensityMatrix(d, 2, out.reshape(d * d, d * d))


def delocalized_photon_state(phi: float, dim: int) -> np.ndarray:
    """Ket of the single photon shared between two modes.

    ``(|0>_A |1>_B + e^{i phi} |1>_A |0>_B) / sqrt(2)``
    """
    if dim < 2:
        raise ValueError("dim must be at least 2")
    ket01 = np.zeros(dim * dim, dtype=complex)
    ket10 = np.zeros(dim * dim, dtype=complex)
    ket01[1] = 1.0  # |0>_A |1>_B
    ket10[dim] = 1.0  # |1>_A |0>_B
    return (ket01 + np.exp(1j * phi) * ket10) / np.sqrt(2.0)


def build_macro_state(alpha: float, phi: float, dim: int) -> DensityMatrix:
    """Two-mode pure state with both arms displaced by ``alpha``.

    ``(D(a)|0>_A D(a)|1>_B + e^{i phi} D(a)|1>_A D(a)|0>_B)/sqrt(2)``
    as a rank-1 density matrix.  ``alpha = 0`` reduces to the delocalized
    single photon.
    """
    D = displacement_matrix(alpha, dim)
    d0 = D[:, 0]
    d1 = D[:, 1]
    vec = (np.kron(d0, d1) + np.exp(1j * phi) * np.kron(d1, d0)) / np.sqrt(2.0)
    rho = DensityMatrix.from_pure(vec, dim, 2)
    _check_trailing_population(rho)
    return rho


def partial_trace(rho: DensityMatrix, keep: int) -> DensityMatrix:
    """Reduce a two-mode state to the given mode (0 = A, 1 = B)."""
    if rho.modes != 2:
        raise ValueError("partial_trace expects a two-mode state")
    if keep not in (0, 1):
        raise ValueError("keep must be 0 or 1")
    d = rho.dim
    t = rho.data.reshape(d, d, d, d)
    out = np.einsum("mknk->mn", t) if keep == 0 else np.einsum("kmkn->mn", t)
    return DensityMatrix(d, 1, out)


def photon_number_pmf(rho: DensityMatrix, mode: int = 0) -> np.ndarray:
    """Photon-number distribution of one mode (real, clipped at 0)."""
    if rho.modes == 1:
        if mode != 0:
            raise ValueError("single-mode state has only mode 0")
        p = np.diag(rho.data).real
    else:
        d = rho.dim
        t = rho.data.reshape(d, d, d, d)
        p = np.einsum("mkmk->m", t).real if mode == 0 else np.einsum("kmkm->m", t).real
    return np.clip(p, 0.0, None)


def photon_moments(rho: DensityMatrix, mode: int = 0) -> tuple[float, float]:
    """Mean and variance of the photon number in the selected mode."""
    p = photon_number_pmf(rho, mode)
    n = np.arange(rho.dim)
    mean = float(np.dot(n, p))
    var = float(np.dot(n * n, p)) - mean * mean
    return mean, var


def conditional_bob_state(n_a: int, alpha: float, phi: float, dim: int) -> np.ndarray:
    """Bob's pure state after Alice counts ``n_a`` photons.

    The relative weight between the displaced vacuum and the displaced
    single photon is set by the coherent-amplitude decomposition: the
    state is ``xi1(n_a) D(a)|0> + e^{i phi} xi0(n_a) D(a)|1>``, normalized.
    Raises :class:`DegenerateConditionError` when both weights underflow
    (|n_a - alpha^2| absurdly large).
    """
    if n_a < 0:
        raise ValueError(f"photon number must be nonnegative, got {n_a}")
    if alpha <= 0:
        raise ValueError("alpha must be positive for a conditional state")
    # log-space weights; only their ratio survives normalization
    log_xi0 = -alpha * alpha / 2.0 + n_a * np.log(alpha) - 0.5 * gammaln(n_a + 1)
    ratio = n_a / alpha - alpha  # xi1 / xi0
    log_peak = log_xi0 + np.log1p(abs(ratio))
    if not np.isfinite(ratio) or log_peak < np.log(np.finfo(float).tiny):
        raise DegenerateConditionError(
            f"both conditioning amplitudes vanish for n_a={n_a}, alpha={alpha}"
        )
    norm = np.hypot(abs(ratio), 1.0)
    D = displacement_matrix(alpha, dim)
    vec = (ratio * D[:, 0] + np.exp(1j * phi) * D[:, 1]) / norm
    return vec


def hermite_functions(x: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal oscillator eigenfunctions ``psi_n(x)`` for n < dim.

    Stable three-term recurrence on the normalized functions
    ``psi_n = sqrt(2/n) x psi_{n-1} - sqrt((n-1)/n) psi_{n-2}``;
    raw Hermite polynomials overflow near n ~ 30, this does not.
    Returns shape ``(len(x), dim)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((x.size, dim))
    out[:, 0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if dim > 1:
        out[:, 1] = np.sqrt(2.0) * x * out[:, 0]
    for n in range(2, dim):
        out[:, n] = np.sqrt(2.0 / n) * x * out[:, n - 1] - np.sqrt((n - 1) / n) * out[:, n - 2]
    return out


def quadrature_basis(x: np.ndarray, theta: float, dim: int) -> np.ndarray:
    """Overlap ``<n|x, theta> = psi_n(x) exp(i n theta)``, shape (len(x), dim)."""
    psi = hermite_functions(np.asarray(x, dtype=float), dim)
    phases = np.exp(1j * theta * np.arange(dim))
    return psi * phases[None, :]


def quadrature_marginal(rho: DensityMatrix, theta: float, grid: np.ndarray) -> np.ndarray:
    """Probability density ``pr(x | theta)`` of a single-mode state on ``grid``.

    The grid must extend at least six units beyond the quadrature mean so
    the density integrates to 1 within the contract tolerance.
    """
    if rho.modes != 1:
        raise ValueError("quadrature_marginal expects a single-mode state")
    rho.validate()
    grid = np.asarray(grid, dtype=float)
    d = rho.dim
    a_op = np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)
    mean_a = complex(np.trace(a_op @ rho.data))
    mean_x = np.sqrt(2.0) * (mean_a * np.exp(-1j * theta)).real
    if grid[0] > mean_x - 6.0 or grid[-1] < mean_x + 6.0:
        raise ValueError(
            f"grid [{grid[0]}, {grid[-1]}] does not cover the quadrature mean "
            f"{mean_x:.3f} +- 6"
        )
    basis = quadrature_basis(grid, theta, d)
    dens = np.einsum("xm,mn,xn->x", basis.conj(), rho.data, basis).real
    return np.clip(dens, 0.0, None)


def wigner(rho: DensityMatrix, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    """Wigner function of a single-mode state on a phase-space grid.

    Evaluated through the displaced-parity identity
    ``W(x, p) = (1/pi) Tr[rho D(2 gamma) PI]`` with
    ``gamma = (x + i p)/sqrt(2)``, which reuses the analytic
    displacement-matrix elements.  Returns shape ``(len(xs), len(ps))``;
    normalized so that ``sum(W) dx dp -> 1``.
    """
    if rho.modes != 1:
        raise ValueError("wigner expects a single-mode state")
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    for g, name in ((xs, "x"), (ps, "p")):
        if g.size > 1 and np.diff(g).max() > 0.5:
            raise ValueError(f"{name}-grid spacing exceeds 0.5; refine the grid")
    d = rho.dim
    X, P = np.meshgrid(xs, ps, indexing="ij")
    beta = np.sqrt(2.0) * (X + 1j * P)  # 2*gamma
    b2 = np.abs(beta) ** 2
    expfac = np.exp(-0.5 * b2)
    W = np.zeros(X.shape)
    signs = (-1.0) ** np.arange(d)
    for m in range(d):
        for n in range(m, d):
            # <n|D(beta)|m> for n >= m
            k = n - m
            pref = np.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
            elem = pref * beta**k * eval_genlaguerre(m, k, b2) * expfac
            term = rho.data[m, n] * signs[m] * elem
            if n == m:
                W += term.real
            else:
                # conjugate pair (m, n) and (n, m)
                W += 2.0 * term.real
    return W / np.pi
