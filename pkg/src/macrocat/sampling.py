"""Seeded, reproducible samplers for synthetic detection records.

Reproducibility contract
------------------------
Every sampler consumes a fixed number of 64-bit Philox words per shot
(padded to a multiple of 4, the Philox counter granularity), and all
uniform-to-target transforms are inverse-CDF based (no rejection loops).
Shot ``i`` of stream ``(seed, stream)`` therefore always sees the same
uniforms regardless of how the shot range is partitioned: generating
shots ``[0, N)`` in one call, in chunks, or per shot yields bit-identical
records.  The generator identity is fixed per release: numpy's Philox-4x64
counter-based generator keyed by ``(seed, stream)``.

Record containers hold one numpy array per column; CSV serialization uses
17 significant digits so that round-trips are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtri

from . import fock
from .counting import CountModelParams
from .errors import NumericError

_PHILOX_WORDS_PER_TICK = 4
_WORDS_COUNTS = 8  # component, 3 primary normals, sign, partner normal, 2 pad
_WORDS_EXACT = 4  # joint cell, reference A, reference B, 1 pad
_WORDS_QUAD = 4  # x_A cell+fraction, x_B cell+fraction, 2 pad

# Exact discrete enumeration is limited to amplitudes where a 4*alpha^2
# truncation stays tractable.
EXACT_ALPHA_MAX = 30.0

_U_LO = 2.0**-53
_U_HI = 1.0 - 2.0**-53


@dataclass(frozen=True)
class CountSample:
    """Reference-subtracted photon counts for a block of shots."""

    dn_a: np.ndarray
    dn_b: np.ndarray
    phi: float
    start_shot: int = 0

    def __len__(self) -> int:
        return self.dn_a.size

    @property
    def shots(self) -> np.ndarray:
        return self.start_shot + np.arange(len(self), dtype=np.int64)


@dataclass(frozen=True)
class QuadratureSample:
    """Homodyne outcomes (theta_A, x_A, theta_B, x_B) for a block of shots."""

    theta_a: np.ndarray
    x_a: np.ndarray
    theta_b: np.ndarray
    x_b: np.ndarray
    start_shot: int = 0

    def __len__(self) -> int:
        return self.x_a.size

    @property
    def shots(self) -> np.ndarray:
        return self.start_shot + np.arange(len(self), dtype=np.int64)


def shot_uniforms(
    seed: int, stream: int, start_shot: int, n_shots: int, words_per_shot: int
) -> np.ndarray:
    """Uniform table whose row i belongs to absolute shot ``start_shot + i``.

    ``words_per_shot`` must be a multiple of 4 so blocks align with the
    Philox counter; values are clipped into the open interval (0, 1) for
    safe inverse-CDF transforms.
    """
    if words_per_shot % _PHILOX_WORDS_PER_TICK:
        raise ValueError("words_per_shot must be a multiple of 4")
    bg = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))
    bg.advance(start_shot * words_per_shot // _PHILOX_WORDS_PER_TICK)
    u = np.random.Generator(bg).random((n_shots, words_per_shot))
    return np.clip(u, _U_LO, _U_HI)


def _maxwell_radius(u1, u2, u3):
    # |u| for the u^2-weighted Gaussian of unit scale: chi with 3 dof
    z1, z2, z3 = ndtri(u1), ndtri(u2), ndtri(u3)
    return np.sqrt(z1 * z1 + z2 * z2 + z3 * z3)


def sample_counts(
    params: CountModelParams,
    n_shots: int,
    seed: int,
    stream: int = 0,
    start_shot: int = 0,
    chunk_shots: int = 1 << 20,
) -> CountSample:
    """Draw i.i.d. reference-subtracted count pairs from the joint law.

    Sampling is exact: in rotated coordinates ``u = (nA+nB)/sqrt(2)``,
    ``v = (nA-nB)/sqrt(2)`` the density factorizes into a three-component
    mixture (quadratically weighted Gaussian in u, same in v, plain
    Gaussian) with weights ``eta(1+cos phi)/4``, ``eta(1-cos phi)/4`` and
    ``1 - eta/2``; the quadratic components are signed chi(3)-distributed
    radii.  Cost per shot is constant in alpha.
    """
    params.require_gaussian_regime()
    if n_shots < 1:
        raise ValueError(f"n_shots must be positive, got {n_shots}")
    sigma = math.sqrt(2.0) * params.alpha
    cph = math.cos(params.phi)
    w_u = params.eta * (1.0 + cph) / 4.0
    w_v = params.eta * (1.0 - cph) / 4.0
    dn_a = np.empty(n_shots)
    dn_b = np.empty(n_shots)
    done = 0
    while done < n_shots:
        m = min(chunk_shots, n_shots - done)
        tab = shot_uniforms(seed, stream, start_shot + done, m, _WORDS_COUNTS)
        comp_u = tab[:, 0] < w_u
        comp_v = (tab[:, 0] >= w_u) & (tab[:, 0] < w_u + w_v)
        comp_c = ~(comp_u | comp_v)
        sign = np.where(tab[:, 4] < 0.5, -1.0, 1.0)
        radius = sigma * _maxwell_radius(tab[:, 1], tab[:, 2], tab[:, 3])
        plain = sigma * ndtri(tab[:, 1])
        partner = sigma * ndtri(tab[:, 5])
        u = np.where(comp_u, sign * radius, np.where(comp_c, plain, partner))
        v = np.where(comp_v, sign * radius, partner)
        dn_a[done : done + m] = (u + v) / math.sqrt(2.0)
        dn_b[done : done + m] = (u - v) / math.sqrt(2.0)
        done += m
    return CountSample(dn_a=dn_a, dn_b=dn_b, phi=params.phi, start_shot=start_shot)


def _discrete_joint_table(alpha: float, eta: float, phi: float) -> np.ndarray:
    """Exact joint photon-number law on ``[0, 4 alpha^2]^2`` before the
    reference subtraction."""
    n_max = int(math.ceil(4.0 * alpha * alpha))
    n = np.arange(n_max + 1, dtype=float)
    x0 = np.exp(-alpha * alpha / 2.0 + n * np.log(alpha) - 0.5 * gammaln(n + 1))
    x1 = x0 * (n / alpha - alpha)
    a0, a1, cross = x0 * x0, x1 * x1, x0 * x1
    table = 0.5 * eta * (
        np.outer(a0, a1) + np.outer(a1, a0) + 2.0 * math.cos(phi) * np.outer(cross, cross)
    )
    table += (1.0 - eta) * np.outer(a0, a0)
    np.clip(table, 0.0, None, out=table)
    return table / table.sum()


def _poisson_pmf(lam: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1, dtype=float)
    pmf = np.exp(-lam + n * np.log(lam) - gammaln(n + 1))
    return pmf / pmf.sum()


def _table_draw(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.searchsorted(cum, u * cum[-1], side="left")


def sample_counts_exact(
    alpha: float,
    eta: float,
    phi: float,
    n_shots: int,
    seed: int,
    stream: int = 0,
    start_shot: int = 0,
) -> CountSample:
    """Exact Fock-basis counterpart of :func:`sample_counts`.

    Draws the signal pair from the enumerated discrete joint law, then
    subtracts an independent Poissonian reference count of mean
    ``alpha^2`` per arm (the balanced-detection model: one extra unit of
    shot noise each).  Limited to ``alpha <= EXACT_ALPHA_MAX``.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if alpha > EXACT_ALPHA_MAX:
        raise ValueError(
            f"alpha={alpha} exceeds {EXACT_ALPHA_MAX}; use the Gaussian sampler"
        )
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if n_shots < 1:
        raise ValueError(f"n_shots must be positive, got {n_shots}")
    table = _discrete_joint_table(alpha, eta, phi)
    side = table.shape[0]
    cum_joint = np.cumsum(table.ravel())
    cum_ref = np.cumsum(_poisson_pmf(alpha * alpha, side - 1))
    tab = shot_uniforms(seed, stream, start_shot, n_shots, _WORDS_EXACT)
    cell = _table_draw(cum_joint, tab[:, 0])
    n_a = (cell // side).astype(float)
    n_b = (cell % side).astype(float)
    ref_a = _table_draw(cum_ref, tab[:, 1]).astype(float)
    ref_b = _table_draw(cum_ref, tab[:, 2]).astype(float)
    return CountSample(
        dn_a=n_a - ref_a, dn_b=n_b - ref_b, phi=phi, start_shot=start_shot
    )


def joint_quadrature_density(
    rho: fock.DensityMatrix, theta_a: float, theta_b: float, grid: np.ndarray
) -> np.ndarray:
    """Two-mode homodyne outcome density ``p(x_A, x_B)`` on a square grid."""
    if rho.modes != 2:
        raise ValueError("expected a two-mode state")
    d = rho.dim
    fa = fock.quadrature_basis(grid, theta_a, d)
    fb = fock.quadrature_basis(grid, theta_b, d)
    ta = (fa.conj()[:, :, None] * fa[:, None, :]).reshape(grid.size, d * d)
    tb = (fb.conj()[:, :, None] * fb[:, None, :]).reshape(grid.size, d * d)
    r2 = rho.data.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    dens = (ta @ r2 @ tb.T).real
    return np.clip(dens, 0.0, None)


def _inverse_cell_draw(
    cum: np.ndarray, grid: np.ndarray, step: float, u: np.ndarray
) -> np.ndarray:
    """Map uniforms through the piecewise-linear CDF of tabulated cell masses."""
    target = u * cum[-1]
    j = np.searchsorted(cum, target, side="left")
    lo = np.where(j > 0, cum[np.maximum(j - 1, 0)], 0.0)
    frac = (target - lo) / np.maximum(cum[j] - lo, 1e-300)
    return grid[j] + (frac - 0.5) * step


class _GridSampler:
    """Conditional inverse-CDF sampler over a tabulated joint density.

    The density is treated as piecewise constant on cells centered at the
    grid points, making the per-coordinate CDF piecewise linear and the
    inverse transform exact for that discretization.
    """

    def __init__(self, rho, theta_a, theta_b, grid):
        self.grid = grid
        self.step = float(grid[1] - grid[0])
        mass = joint_quadrature_density(rho, theta_a, theta_b, grid) * self.step**2
        total = mass.sum()
        if abs(total - 1.0) > 1e-3:
            raise NumericError(
                f"grid captures only {total:.6f} of the quadrature density; "
                "enlarge or refine the grid"
            )
        self.mass = mass / total
        self.cum_a = np.cumsum(self.mass.sum(axis=1))
        self.cum_b_rows = np.cumsum(self.mass, axis=1)

    def draw(self, u_a: np.ndarray, u_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        target = u_a * self.cum_a[-1]
        ja = np.searchsorted(self.cum_a, target, side="left")
        lo = np.where(ja > 0, self.cum_a[np.maximum(ja - 1, 0)], 0.0)
        frac = (target - lo) / np.maximum(self.cum_a[ja] - lo, 1e-300)
        x_a = self.grid[ja] + (frac - 0.5) * self.step
        # group shots sharing an x_A cell so each conditional row is scanned once
        x_b = np.empty_like(x_a)
        order = np.argsort(ja, kind="stable")
        bounds = np.flatnonzero(np.diff(ja[order])) + 1
        for seg in np.split(order, bounds):
            row = self.cum_b_rows[ja[seg[0]]]
            x_b[seg] = _inverse_cell_draw(row, self.grid, self.step, u_b[seg])
        return x_a, x_b


def default_quadrature_grid(span: float = 8.0, step: float = 0.02) -> np.ndarray:
    if step > 0.02:
        raise ValueError("quadrature sampling grid spacing must be <= 0.02")
    n = int(round(2 * span / step)) + 1
    return np.linspace(-span, span, n)


def sample_quadratures(
    rho: fock.DensityMatrix,
    theta_a: float,
    theta_b: float,
    n_shots: int,
    seed: int,
    stream: int = 0,
    start_shot: int = 0,
    grid: np.ndarray | None = None,
) -> QuadratureSample:
    """Joint homodyne samples of a two-mode state at fixed LO phases."""
    if n_shots < 1:
        raise ValueError(f"n_shots must be positive, got {n_shots}")
    if grid is None:
        grid = default_quadrature_grid()
    sampler = _GridSampler(rho, theta_a, theta_b, grid)
    tab = shot_uniforms(seed, stream, start_shot, n_shots, _WORDS_QUAD)
    x_a, x_b = sampler.draw(tab[:, 0], tab[:, 1])
    return QuadratureSample(
        theta_a=np.full(n_shots, float(theta_a)),
        x_a=x_a,
        theta_b=np.full(n_shots, float(theta_b)),
        x_b=x_b,
        start_shot=start_shot,
    )


def sample_quadrature_schedule(
    rho: fock.DensityMatrix,
    schedule: list[tuple[float, float]],
    n_shots: int,
    seed: int,
    stream: int = 0,
    grid: np.ndarray | None = None,
) -> QuadratureSample:
    """Homodyne samples with shots assigned round-robin over a phase schedule.

    Shot ``i`` is measured at ``schedule[i % len(schedule)]``; the uniforms
    for shot ``i`` are the same as in the single-setting samplers, so the
    record set is reproducible independent of how settings are processed.
    """
    if n_shots < 1:
        raise ValueError(f"n_shots must be positive, got {n_shots}")
    if not schedule:
        raise ValueError("schedule must contain at least one setting")
    if grid is None:
        grid = default_quadrature_grid()
    tab = shot_uniforms(seed, stream, 0, n_shots, _WORDS_QUAD)
    theta_a = np.empty(n_shots)
    x_a = np.empty(n_shots)
    theta_b = np.empty(n_shots)
    x_b = np.empty(n_shots)
    for k, (ta, tb) in enumerate(schedule):
        idx = np.arange(k, n_shots, len(schedule))
        if idx.size == 0:
            continue
        sampler = _GridSampler(rho, ta, tb, grid)
        xa, xb = sampler.draw(tab[idx, 0], tab[idx, 1])
        theta_a[idx] = ta
        x_a[idx] = xa
        theta_b[idx] = tb
        x_b[idx] = xb
    return QuadratureSample(theta_a=theta_a, x_a=x_a, theta_b=theta_b, x_b=x_b)


def phase_schedule(n_settings: int, mode: str = "sweep") -> list[tuple[float, float]]:
    """LO phase settings for two-mode tomography.

    ``sweep``: Alice's phase steps uniformly over [0, 2*pi) while Bob's LO
    stays locked at 0 (the measurement protocol this package models).
    ``locked``: both LOs step together (common-phase variant).
    At least 4 settings are required for an informationally complete scan
    of the one-photon subspace.
    """
    if n_settings < 4:
        raise ValueError(f"need at least 4 settings, got {n_settings}")
    if mode not in ("sweep", "locked"):
        raise ValueError(f"unknown schedule mode {mode!r}")
    thetas = [2.0 * math.pi * j / n_settings for j in range(n_settings)]
    if mode == "sweep":
        return [(t, 0.0) for t in thetas]
    return [(t, t) for t in thetas]


# ---------------------------------------------------------------------------
# CSV serialization (17 significant digits, exact round-trip)

def write_count_csv(path, sample: CountSample) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("shot,dnA,dnB,phi\n")
        phi = sample.phi
        for s, a, b in zip(sample.shots, sample.dn_a, sample.dn_b):
            fh.write(f"{s},{a:.17g},{b:.17g},{phi:.17g}\n")


def read_count_csv(path) -> CountSample:
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    phi = np.unique(data["phi"])
    if phi.size != 1:
        raise ValueError("count CSV mixes phase settings")
    start = int(data["shot"][0])
    return CountSample(
        dn_a=np.asarray(data["dnA"], dtype=float),
        dn_b=np.asarray(data["dnB"], dtype=float),
        phi=float(phi[0]),
        start_shot=start,
    )


def write_quadrature_csv(path, sample: QuadratureSample) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("shot,thetaA,xA,thetaB,xB\n")
        for s, ta, xa, tb, xb in zip(
            sample.shots, sample.theta_a, sample.x_a, sample.theta_b, sample.x_b
        ):
            fh.write(f"{s},{ta:.17g},{xa:.17g},{tb:.17g},{xb:.17g}\n")


def read_quadrature_csv(path) -> QuadratureSample:
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    return QuadratureSample(
        theta_a=np.asarray(data["thetaA"], dtype=float),
        x_a=np.asarray(data["xA"], dtype=float),
        theta_b=np.asarray(data["thetaB"], dtype=float),
        x_b=np.asarray(data["xB"], dtype=float),
        start_shot=int(data["shot"][0]),
    )
