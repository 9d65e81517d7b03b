"""Truncated Fock-space simulator used to cross-check the Gaussian formalism.

A :class:`FockState` is a dense amplitude tensor of shape ``(cutoff,) * n_modes``
together with an ``offset``: a classical displacement frame, so the physical
state is ``D(offset) |amplitudes>`` up to a global phase.  The frame lets a
bright coherent ancilla (|alpha0| ~ 40) ride along exactly, because every
Gaussian unitary U satisfies ``U D(beta) = D(beta') U`` for a linear beta'.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

DEFAULT_TAIL_TOL = 1e-8
MAX_MODES = 4
MAX_CUTOFF = 40


class TruncationError(RuntimeError):
    """Raised when probability leaks past the Fock cutoff beyond tolerance."""


@dataclass(frozen=True, eq=False)
class FockState:
    n_modes: int
    cutoff: int
    amplitudes: np.ndarray
    offset: np.ndarray = None
    tail_tol: float = DEFAULT_TAIL_TOL
    lost: float = 0.0  # probability dropped by truncation so far

    def __post_init__(self):
        if self.cutoff < 2:
            raise ValueError("cutoff must be >= 2")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.cutoff,) * self.n_modes:
            raise ValueError(f"amplitude tensor has shape {amps.shape}")
        off = np.zeros(self.n_modes, complex) if self.offset is None else np.asarray(self.offset, complex)
        if off.shape != (self.n_modes,):
            raise ValueError("offset must have one entry per mode")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "offset", off)
        if self.lost > self.tail_tol:
            raise TruncationError(
                f"truncation tail {self.lost:.3g} exceeds tolerance {self.tail_tol:.3g} "
                f"at cutoff {self.cutoff}"
            )

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def _evolve(self, amps: np.ndarray, offset: np.ndarray | None = None) -> "FockState":
        lost = self.lost + max(self.norm - float(np.vdot(amps, amps).real), 0.0)
        return FockState(self.n_modes, self.cutoff, amps,
                         self.offset if offset is None else offset, self.tail_tol, lost)


def fock_vacuum(n_modes: int, cutoff: int, tail_tol: float = DEFAULT_TAIL_TOL) -> FockState:
    amps = np.zeros((cutoff,) * n_modes, complex)
    amps[(0,) * n_modes] = 1.0
    return FockState(n_modes, cutoff, amps, tail_tol=tail_tol)


def fock_basis_state(photons, cutoff: int, tail_tol: float = DEFAULT_TAIL_TOL) -> FockState:
    photons = tuple(int(n) for n in photons)
    amps = np.zeros((cutoff,) * len(photons), complex)
    amps[photons] = 1.0
    return FockState(len(photons), cutoff, amps, tail_tol=tail_tol)


def _annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1)


def _padding(cutoff: int) -> int:
    return cutoff + max(40, cutoff)


@lru_cache(maxsize=256)
def _single_mode_unitary(kind: str, p1: float, p2: float, cutoff: int) -> np.ndarray:
    """Evolve under the truncated generator at a padded cutoff, then project."""
    dim = _padding(cutoff)
    a = _annihilation(dim)
    ad = a.conj().T
    if kind == "squeeze":
        r, phi = p1, p2
        # R(phi) S0(r) R(phi)^dag with S0 = exp(r/2 (a^2 - a^dag^2))
        gen = 0.5 * r * (np.exp(2j * phi) * (a @ a) - np.exp(-2j * phi) * (ad @ ad))
    elif kind == "displace":
        alpha = complex(p1, p2)
        gen = alpha * ad - np.conj(alpha) * a
    else:
        raise ValueError(kind)
    return expm(gen)[:cutoff, :cutoff]


def _apply_single(amps: np.ndarray, u: np.ndarray, mode: int) -> np.ndarray:
    out = np.tensordot(u, amps, axes=([1], [mode]))
    return np.moveaxis(out, 0, mode)


def _check_mode(state: FockState, mode: int):
    if not 0 <= mode < state.n_modes:
        raise ValueError(f"mode {mode} out of range for {state.n_modes} modes")


def fock_squeeze(state: FockState, r: float, phi: float, mode: int) -> FockState:
    """Squeeze one mode; ``phi = 0`` squeezes x, matching ``squeezer_op``."""
    _check_mode(state, mode)
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0:
        return state
    u = _single_mode_unitary("squeeze", float(r), float(phi), state.cutoff)
    b = state.offset[mode]
    offset = state.offset.copy()
    offset[mode] = b * math.cosh(r) - np.conj(b) * np.exp(-2j * phi) * math.sinh(r)
    return state._evolve(_apply_single(state.amplitudes, u, mode), offset)


def fock_displace(state: FockState, alpha: complex, mode: int, frame: bool = False) -> FockState:
    """Displace one mode.

    With ``frame=True`` the displacement is absorbed into the classical offset
    instead of the amplitudes (exact up to a global phase).
    """
    _check_mode(state, mode)
    alpha = complex(alpha)
    if frame:
        offset = state.offset.copy()
        offset[mode] += alpha
        return FockState(state.n_modes, state.cutoff, state.amplitudes, offset, state.tail_tol, state.lost)
    if alpha == 0:
        return state
    u = _single_mode_unitary("displace", alpha.real, alpha.imag, state.cutoff)
    return state._evolve(_apply_single(state.amplitudes, u, mode))


def fock_phase_shift(state: FockState, theta: float, mode: int) -> FockState:
    """exp(-i theta n): clockwise phase-space rotation."""
    _check_mode(state, mode)
    phases = np.exp(-1j * theta * np.arange(state.cutoff))
    offset = state.offset.copy()
    offset[mode] *= np.exp(-1j * theta)
    return FockState(state.n_modes, state.cutoff, _apply_single(state.amplitudes, np.diag(phases), mode),
                     offset, state.tail_tol, state.lost)


def _two_mode_passive_unitary(v: np.ndarray, cutoff: int) -> np.ndarray:
    """Fock representation of ``<a> -> V <a>`` for a 2x2 unitary V.

    Built block by block in fixed total photon number, where the generator
    sum_jk H_jk a_j^dag a_k (H = log V) is exact; components landing above the
    cutoff are dropped.
    """
    from scipy.linalg import logm

    h = logm(np.asarray(v, complex))
    dim = cutoff * cutoff
    full = np.zeros((dim, dim), complex)
    for total in range(2 * cutoff - 1):
        k = np.arange(total + 1)  # photons in the first mode
        g = np.diag(h[0, 0] * k + h[1, 1] * (total - k)).astype(complex)
        # a0^dag a1 : |k, n-k> -> sqrt((k+1)(n-k)) |k+1, n-k-1>
        up = np.sqrt((k[:-1] + 1) * (total - k[:-1]))
        g[k[1:], k[:-1]] += h[0, 1] * up
        # a1^dag a0 : |k, n-k> -> sqrt(k (n-k+1)) |k-1, n-k+1>
        g[k[:-1], k[1:]] += h[1, 0] * up
        block = expm(g)
        keep = (k < cutoff) & (total - k < cutoff)
        idx = k[keep] * cutoff + (total - k[keep])
        full[np.ix_(idx, idx)] = block[np.ix_(keep, keep)]
    return full


@lru_cache(maxsize=64)
def _cached_two_mode(key: tuple, cutoff: int) -> np.ndarray:
    v = np.array(key, dtype=complex).reshape(2, 2)
    return _two_mode_passive_unitary(v, cutoff)


def fock_passive(state: FockState, v: np.ndarray, modes: tuple[int, int]) -> FockState:
    j, k = modes
    _check_mode(state, j)
    _check_mode(state, k)
    if j == k:
        raise ValueError("two distinct modes required")
    v = np.asarray(v, complex)
    u = _cached_two_mode(tuple(np.round(v.reshape(-1), 15)), state.cutoff)
    c = state.cutoff
    amps = np.moveaxis(state.amplitudes, (j, k), (0, 1))
    rest = amps.shape[2:]
    out = (u @ amps.reshape(c * c, -1)).reshape((c, c) + rest)
    out = np.moveaxis(out, (0, 1), (j, k))
    offset = state.offset.copy()
    offset[[j, k]] = v @ state.offset[[j, k]]
    return state._evolve(out, offset)


def fock_beamsplitter(state: FockState, eta: float, modes: tuple[int, int]) -> FockState:
    """Real mixing with cross-coupling sqrt(eta), the Gaussian-core convention.

    Generator delta (a_j^dag a_k - a_k^dag a_j) with sin(delta) = sqrt(eta).
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta outside [0, 1]")
    t, s = math.sqrt(1.0 - eta), math.sqrt(eta)
    return fock_passive(state, np.array([[t, s], [-s, t]]), modes)


def _lower(amps: np.ndarray, mode: int) -> np.ndarray:
    """a_mode applied to the amplitude tensor."""
    c = amps.shape[mode]
    moved = np.moveaxis(amps, mode, 0)
    out = np.zeros_like(moved)
    out[:-1] = moved[1:] * np.sqrt(np.arange(1, c)).reshape((-1,) + (1,) * (amps.ndim - 1))
    return np.moveaxis(out, 0, mode)


def moments(state: FockState) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature means and symmetrized covariance from ladder expectations."""
    psi = state.amplitudes / math.sqrt(state.norm)
    n = state.n_modes
    lowered = [_lower(psi, k) for k in range(n)]
    a_mean = np.array([np.vdot(psi, lowered[k]) for k in range(n)])
    aa = np.empty((n, n), complex)   # <a_j a_k>
    ada = np.empty((n, n), complex)  # <a_j^dag a_k>
    for j in range(n):
        for k in range(n):
            aa[j, k] = np.vdot(psi, _lower(lowered[k], j))
            ada[j, k] = np.vdot(lowered[j], lowered[k])
    m = aa - np.outer(a_mean, a_mean)
    nn = ada - np.outer(a_mean.conj(), a_mean)
    # G = <d b_u d b_v> for b = (a_1..a_n, a_1^dag..a_n^dag)
    g = np.block([[m, nn.T + np.eye(n)], [nn, m.conj()]])
    lin = np.zeros((2 * n, 2 * n), complex)
    s2 = 1.0 / math.sqrt(2.0)
    for k in range(n):
        lin[2 * k, k], lin[2 * k, n + k] = s2, s2
        lin[2 * k + 1, k], lin[2 * k + 1, n + k] = -1j * s2, 1j * s2
    cov = (lin @ g @ lin.T).real
    cov = 0.5 * (cov + cov.T)
    total = a_mean + state.offset
    mean = np.empty(2 * n)
    mean[0::2] = math.sqrt(2.0) * total.real
    mean[1::2] = math.sqrt(2.0) * total.imag
    return mean, cov


def _relative(a: FockState, b: FockState) -> np.ndarray:
    """Amplitudes of b expressed in a's displacement frame."""
    if a.n_modes != b.n_modes or a.cutoff != b.cutoff:
        raise ValueError("states have different shapes")
    out = b
    for mode, d in enumerate(b.offset - a.offset):
        if d != 0:
            out = fock_displace(out, d, mode)
    return out.amplitudes


def fock_fidelity(a: FockState, b: FockState) -> float:
    """|<a|b>|^2 for normalized pure states."""
    amps_b = _relative(a, b)
    ov = np.vdot(a.amplitudes, amps_b) / math.sqrt(a.norm * b.norm)
    return float(abs(ov) ** 2)


def partial_trace_mode(state: FockState, mode: int) -> tuple[np.ndarray, np.ndarray]:
    """Means and covariance of the remaining modes after tracing out ``mode``."""
    if state.n_modes < 2:
        raise ValueError("need at least two modes to trace one out")
    _check_mode(state, mode)
    mean, cov = moments(state)
    keep = [i for i in range(2 * state.n_modes) if i // 2 != mode]
    return mean[keep], cov[np.ix_(keep, keep)]


def reduced_overlap(target: FockState, state: FockState, traced_mode: int) -> float:
    """<t| Tr_m(|psi><psi|) |t> for a pure target on the remaining modes."""
    _check_mode(state, traced_mode)
    if target.n_modes != state.n_modes - 1 or target.cutoff != state.cutoff:
        raise ValueError("target must cover exactly the untraced modes at the same cutoff")
    kept = [m for m in range(state.n_modes) if m != traced_mode]
    shifted = state
    for tm, m in enumerate(kept):
        d = state.offset[m] - target.offset[tm]
        if d != 0:
            shifted = fock_displace(shifted, d, m)
    psi = shifted.amplitudes / math.sqrt(state.norm)
    t = target.amplitudes / math.sqrt(target.norm)
    contracted = np.tensordot(t.conj(), psi, axes=(list(range(target.n_modes)), kept))
    return float(np.sum(np.abs(contracted) ** 2))


def squeezed_tail(r: float, cutoff: int) -> float:
    """P(n >= cutoff) for squeezed vacuum."""
    if r == 0:
        return 0.0
    m = np.arange(0, cutoff // 2 + 1)
    t = math.tanh(r)
    logp = gammaln(2 * m + 1) - 2 * m * math.log(2) - 2 * gammaln(m + 1) + 2 * m * math.log(t) - math.log(math.cosh(r))
    p = np.exp(logp)
    return float(max(1.0 - p[2 * m < cutoff].sum(), 0.0))


def estimate_cutoff(r: float, alpha_mag: float, tol: float = DEFAULT_TAIL_TOL,
                    max_cutoff: int = 4 * MAX_CUTOFF) -> int:
    """Smallest cutoff whose estimated photon-number tail is below ``tol``.

    Treats the squeezed and coherent photon numbers as independent, which is
    a heuristic for displaced squeezed light, not a bound.
    """
    for c in range(2, max_cutoff + 1):
        p_sq = -np.diff([squeezed_tail(r, n) for n in range(c + 1)])
        p_coh = poisson.pmf(np.arange(c), alpha_mag ** 2)
        if 1.0 - np.convolve(p_sq, p_coh)[:c].sum() < tol:
            return c
    return max_cutoff
