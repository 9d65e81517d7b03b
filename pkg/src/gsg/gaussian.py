"""Gaussian states in the covariance-matrix picture.

Quadratures are interleaved as (x1, p1, x2, p2, ...) with x = (a + a^dag)/sqrt(2),
p = (a - a^dag)/(i sqrt(2)), so the vacuum covariance is I/2.  Every lossless
element is an affine map ``mean -> S @ mean + shift``, ``cov -> S @ cov @ S.T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import sqrtm

SYMMETRY_TOL = 1e-10
PURITY_TOL = 1e-6
UNCERTAINTY_TOL = 1e-9
DB_PER_NEPER = 20.0 * math.log10(math.e)


def omega(n_modes: int) -> np.ndarray:
    """Symplectic form for interleaved ordering."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Quadrature means and covariance of an N-mode Gaussian state."""

    n_modes: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        dim = 2 * self.n_modes
        if mean.shape != (dim,) or cov.shape != (dim, dim):
            raise ValueError(
                f"expected mean of length {dim} and {dim}x{dim} cov, "
                f"got {mean.shape} and {cov.shape}"
            )
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > SYMMETRY_TOL * scale:
            raise ValueError("covariance matrix is not symmetric")
        mean.setflags(write=False)
        cov = _symmetrize(cov)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        nu = self.symplectic_eigenvalues()
        if nu.min() < 0.5 - UNCERTAINTY_TOL * scale:
            raise ValueError(f"covariance violates the uncertainty principle (symplectic eigenvalue {nu.min():.6g})")

    @property
    def purity(self) -> float:
        """Tr(rho^2) = 1 / sqrt(det(2 cov))."""
        return 1.0 / math.sqrt(np.linalg.det(2.0 * self.cov))

    def is_pure(self, tol: float = PURITY_TOL) -> bool:
        return abs(np.linalg.det(2.0 * self.cov) - 1.0) <= tol

    def symplectic_eigenvalues(self) -> np.ndarray:
        """Positive spectrum of i*Omega*cov, ascending."""
        ev = np.linalg.eigvals(1j * omega(self.n_modes) @ self.cov)
        return np.sort(np.abs(ev.real))[::2]

    def mode_indices(self, mode: int) -> list[int]:
        return [2 * mode, 2 * mode + 1]

    def reduced(self, keep: Sequence[int]) -> "GaussianState":
        """Partial trace: keep the listed modes, in the given order."""
        idx = [i for m in keep for i in (2 * m, 2 * m + 1)]
        return GaussianState(len(keep), self.mean[idx], self.cov[np.ix_(idx, idx)])

    def drop_mode(self, mode: int) -> "GaussianState":
        return self.reduced([m for m in range(self.n_modes) if m != mode])

    def photon_number(self, mode: int) -> float:
        """Mean photon number of one mode."""
        i, j = self.mode_indices(mode)
        return 0.5 * (self.cov[i, i] + self.cov[j, j] + self.mean[i] ** 2 + self.mean[j] ** 2) - 0.5

    def complex_mean(self) -> np.ndarray:
        """<a_k> for each mode."""
        return (self.mean[0::2] + 1j * self.mean[1::2]) / math.sqrt(2.0)

    def to_dict(self) -> dict:
        return {"n_modes": self.n_modes, "mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianState":
        return cls(int(data["n_modes"]), np.array(data["mean"], float), np.array(data["cov"], float))


@dataclass(frozen=True, eq=False)
class SymplecticOp:
    """Affine phase-space map: ``mean -> matrix @ mean + shift``."""

    matrix: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        shift = np.asarray(self.shift, dtype=float).reshape(-1)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
            raise ValueError("matrix must be square with even dimension")
        if shift.shape != (matrix.shape[0],):
            raise ValueError("shift length must match matrix dimension")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "shift", shift)
        scale = max(1.0, float(np.abs(matrix).max()) ** 2)
        if self.symplectic_residual() > SYMMETRY_TOL * scale:
            raise ValueError(f"matrix is not symplectic (residual {self.symplectic_residual():.3g})")

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def symplectic_residual(self) -> float:
        om = omega(self.n_modes)
        return float(np.max(np.abs(self.matrix @ om @ self.matrix.T - om)))

    def then(self, other: "SymplecticOp") -> "SymplecticOp":
        """Composite map: apply ``self`` first, then ``other``."""
        return SymplecticOp(other.matrix @ self.matrix, other.matrix @ self.shift + other.shift)

    @classmethod
    def identity(cls, n_modes: int) -> "SymplecticOp":
        return cls(np.eye(2 * n_modes), np.zeros(2 * n_modes))


def _check_mode(mode: int, n_modes: int):
    if not 0 <= mode < n_modes:
        raise ValueError(f"mode {mode} out of range for {n_modes} modes")


def _embed(block: np.ndarray, modes: Sequence[int], n_modes: int) -> np.ndarray:
    for m in modes:
        _check_mode(m, n_modes)
    full = np.eye(2 * n_modes)
    idx = [i for m in modes for i in (2 * m, 2 * m + 1)]
    full[np.ix_(idx, idx)] = block
    return full


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def vacuum(n_modes: int) -> GaussianState:
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    return GaussianState(n_modes, np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes))


def coherent(alpha: Sequence[complex] | complex) -> GaussianState:
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    return apply(vacuum(len(alpha)), displacement_op(alpha))


def rotation_op(theta: float, mode: int, n_modes: int) -> SymplecticOp:
    """Clockwise phase-space rotation, a -> a exp(-i theta)."""
    theta = math.fmod(theta, 2 * math.pi)
    return SymplecticOp(_embed(_rot(theta), [mode], n_modes), np.zeros(2 * n_modes))


def squeezer_op(r: float, phi: float, mode: int, n_modes: int) -> SymplecticOp:
    """Single-mode squeezer.

    With ``phi = 0`` the x quadrature is squeezed (variance e^{-2r}/2); ``phi``
    rotates the squeezing axis, so ``phi = pi/2`` squeezes p instead.
    """
    if r < 0:
        raise ValueError("squeezing parameter r must be >= 0; encode the axis through phi")
    rot = _rot(phi)
    block = rot @ np.diag([math.exp(-r), math.exp(r)]) @ rot.T
    return SymplecticOp(_embed(block, [mode], n_modes), np.zeros(2 * n_modes))


def passive_op(unitary: np.ndarray, modes: Sequence[int], n_modes: int) -> SymplecticOp:
    """Symplectic map of a passive linear-optical transfer ``<a> -> U <a>``."""
    u = np.asarray(unitary, dtype=complex)
    k = len(modes)
    if u.shape != (k, k):
        raise ValueError("unitary shape does not match the number of modes")
    if len(set(modes)) != k:
        raise ValueError("modes must be distinct")
    if np.abs(u.conj().T @ u - np.eye(k)).max() > SYMMETRY_TOL:
        raise ValueError("transfer matrix is not unitary")
    block = np.zeros((2 * k, 2 * k))
    block[0::2, 0::2] = u.real
    block[0::2, 1::2] = -u.imag
    block[1::2, 0::2] = u.imag
    block[1::2, 1::2] = u.real
    return SymplecticOp(_embed(block, modes, n_modes), np.zeros(2 * n_modes))


def beamsplitter_matrix(eta: float) -> np.ndarray:
    """Real mixing matrix with cross-coupling sqrt(eta)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"beamsplitter eta={eta} outside [0, 1]")
    t, s = math.sqrt(1.0 - eta), math.sqrt(eta)
    return np.array([[t, s], [-s, t]])


def beamsplitter_op(eta: float, modes: tuple[int, int], n_modes: int) -> SymplecticOp:
    j, k = modes
    if j == k:
        raise ValueError("beamsplitter needs two distinct modes")
    return passive_op(beamsplitter_matrix(eta), [j, k], n_modes)


def displacement_op(alpha: Sequence[complex] | complex, n_modes: int | None = None,
                    mode: int | None = None) -> SymplecticOp:
    """Displacement D(alpha); ``<x_k>`` shifts by sqrt(2) Re(alpha_k).

    Either pass one complex amplitude per mode, or a scalar with ``mode`` and
    ``n_modes``.
    """
    if mode is None:
        alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
        n_modes = len(alpha) if n_modes is None else n_modes
        if len(alpha) != n_modes:
            raise ValueError("alpha length must equal n_modes")
    else:
        _check_mode(mode, n_modes)
        vec = np.zeros(n_modes, dtype=complex)
        vec[mode] = complex(alpha)
        alpha = vec
    shift = np.empty(2 * n_modes)
    shift[0::2] = math.sqrt(2.0) * alpha.real
    shift[1::2] = math.sqrt(2.0) * alpha.imag
    return SymplecticOp(np.eye(2 * n_modes), shift)


def apply(state: GaussianState, op: SymplecticOp) -> GaussianState:
    if op.n_modes != state.n_modes:
        raise ValueError(f"op acts on {op.n_modes} modes, state has {state.n_modes}")
    s = op.matrix
    return GaussianState(state.n_modes, s @ state.mean + op.shift, s @ state.cov @ s.T)


def loss_channel(state: GaussianState, tau: float, mode: int) -> GaussianState:
    """Pure-loss channel of intensity transmission ``tau`` on one mode."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"transmission tau={tau} outside [0, 1]")
    _check_mode(mode, state.n_modes)
    g = np.ones(2 * state.n_modes)
    g[2 * mode: 2 * mode + 2] = math.sqrt(tau)
    cov = state.cov * np.outer(g, g)
    cov[2 * mode, 2 * mode] += 0.5 * (1.0 - tau)
    cov[2 * mode + 1, 2 * mode + 1] += 0.5 * (1.0 - tau)
    return GaussianState(state.n_modes, state.mean * g, cov)


def wigner(state: GaussianState, point: Sequence[float]) -> float:
    xi = np.asarray(point, dtype=float) - state.mean
    det = np.linalg.det(state.cov)
    if det <= 0.0:
        raise np.linalg.LinAlgError("covariance matrix is singular")
    quad = xi @ np.linalg.solve(state.cov, xi)
    return float(math.exp(-0.5 * quad) / ((2 * math.pi) ** state.n_modes * math.sqrt(det)))


AXIS_NAMES = ("x", "p")


def axis_index(name: str) -> int:
    """'x1' -> 0, 'p1' -> 1, 'x2' -> 2, ... (modes numbered from 1)."""
    name = name.strip().lower()
    if len(name) < 2 or name[0] not in AXIS_NAMES or not name[1:].isdigit() or int(name[1:]) < 1:
        raise ValueError(f"bad quadrature axis name {name!r}")
    return 2 * (int(name[1:]) - 1) + AXIS_NAMES.index(name[0])


def axis_name(index: int) -> str:
    return f"{AXIS_NAMES[index % 2]}{index // 2 + 1}"


@dataclass(frozen=True)
class WignerSlice:
    """Wigner function sampled on a 2D grid; ``values[i, j]`` at (u[i], v[j])."""

    axes: tuple[int, int]
    u: np.ndarray
    v: np.ndarray
    values: np.ndarray
    fixed: dict

    @property
    def axis_names(self) -> tuple[str, str]:
        return axis_name(self.axes[0]), axis_name(self.axes[1])


def wigner_slice(state: GaussianState, axes: tuple[int, int], fixed: dict | None = None,
                 lo: float = -6.0, hi: float = 6.0, n: int = 201) -> WignerSlice:
    """Evaluate the Wigner function on a square grid over two quadrature axes.

    ``fixed`` maps remaining quadrature indices to their values (default 0).
    """
    i, j = axes
    dim = 2 * state.n_modes
    if i == j:
        raise ValueError("slice axes must differ")
    if not (0 <= i < dim and 0 <= j < dim):
        raise ValueError("slice axis out of range")
    if n < 2 or not hi > lo:
        raise ValueError("degenerate grid")
    fixed = dict(fixed or {})
    base = np.zeros(dim)
    for k, val in fixed.items():
        if k in (i, j):
            raise ValueError("fixed values may not include the slice axes")
        base[k] = val
    det = np.linalg.det(state.cov)
    if det <= 0.0:
        raise np.linalg.LinAlgError("covariance matrix is singular")
    prec = np.linalg.inv(state.cov)
    grid = np.linspace(lo, hi, n)
    uu, vv = np.meshgrid(grid, grid, indexing="ij")
    pts = np.broadcast_to(base - state.mean, (n, n, dim)).copy()
    pts[..., i] += uu
    pts[..., j] += vv
    quad = np.einsum("abi,ij,abj->ab", pts, prec, pts)
    values = np.exp(-0.5 * quad) / ((2 * math.pi) ** state.n_modes * math.sqrt(det))
    return WignerSlice((i, j), grid, grid.copy(), values, fixed)


def fidelity(pure_target: GaussianState, actual: GaussianState, purity_tol: float = PURITY_TOL) -> float:
    """Uhlmann fidelity <psi|rho|psi> for a pure Gaussian target."""
    if pure_target.n_modes != actual.n_modes:
        raise ValueError("states have different numbers of modes")
    det_target = np.linalg.det(2.0 * pure_target.cov)
    if abs(det_target - 1.0) > purity_tol:
        raise ValueError(f"target is not pure: det(2 cov) = {det_target:.9g}")
    total = pure_target.cov + actual.cov
    delta = actual.mean - pure_target.mean
    quad = delta @ np.linalg.solve(total, delta)
    f = math.exp(-0.5 * quad) / math.sqrt(np.linalg.det(total))
    return min(max(f, 0.0), 1.0)


def uhlmann_fidelity(a: GaussianState, b: GaussianState) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2 for arbitrary Gaussian states.

    Falls back to the pure-target formula when either state is pure.
    """
    if a.n_modes != b.n_modes:
        raise ValueError("states have different numbers of modes")
    for target, other in ((a, b), (b, a)):
        if abs(np.linalg.det(2.0 * target.cov) - 1.0) <= PURITY_TOL:
            return fidelity(target, other)
    n = a.n_modes
    om = omega(n)
    total = a.cov + b.cov
    v_aux = om.T @ np.linalg.solve(total, om / 4.0 + b.cov @ om @ a.cov)
    inv = np.linalg.inv(v_aux @ om)
    root = sqrtm(np.eye(2 * n) + inv @ inv / 4.0)
    f_tot = np.linalg.det(2.0 * (root + np.eye(2 * n)) @ v_aux) / np.linalg.det(total)
    delta = a.mean - b.mean
    f = math.sqrt(abs(float(np.real(f_tot)))) * math.exp(-0.5 * delta @ np.linalg.solve(total, delta))
    return min(max(f, 0.0), 1.0)


def squeezing_db(r: float) -> float:
    if r < 0:
        raise ValueError("r must be >= 0")
    return DB_PER_NEPER * r


def db_to_r(db: float) -> float:
    return db / DB_PER_NEPER


def squeezing_after_loss(s0_db: float, transmission: float) -> float:
    """Measurable squeezing (positive dB) left after total transmission T."""
    if s0_db < 0:
        raise ValueError("s0_db must be >= 0")
    if not 0.0 <= transmission <= 1.0:
        raise ValueError("transmission outside [0, 1]")
    if transmission == 1.0:
        return float(s0_db)
    if transmission == 0.0:
        return 0.0
    return -10.0 * math.log10(transmission * 10.0 ** (-s0_db / 10.0) + (1.0 - transmission))


def measured_squeezing_db(state: GaussianState, mode: int = 0) -> float:
    """Squeezing below vacuum (dB) along the mode's least-noisy quadrature."""
    i = 2 * mode
    block = state.cov[i:i + 2, i:i + 2]
    return -10.0 * math.log10(np.linalg.eigvalsh(block)[0] / 0.5)
