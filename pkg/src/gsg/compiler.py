"""Compile pure Gaussian targets into circuit programs.

A pure target is written as D(alpha) R(zeta) S(r)|0>: squeezed vacua, a
passive rotation realised by an MZI mesh, then the cascaded displacement.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .circuit import (
    DEFAULT_ALPHA0,
    DISPLACEMENT_ETA_MAX,
    MZI,
    Ancilla,
    ChipParams,
    CircuitProgram,
    Element,
    LossModel,
    PhaseShift,
    Squeezer,
    VoltageFrame,
    build_two_mode_chip,
    cascade_displacement_elements,
    cascade_eta,
    cascade_stages,
    mzi_transfer,
    near_swap_phi,
    params_to_voltages,
    propagate_mean,
    simulate,
    with_losses,
)
from .gaussian import (
    GaussianState,
    apply,
    displacement_op,
    fidelity,
    loss_channel,
    passive_op,
    squeezer_op,
    vacuum,
)

UNITARY_TOL = 1e-10
SYMMETRY_TOL = 1e-10
PURITY_TOL = 1e-6

# eta bound constants (a, b, c) per fidelity level, dB = a * r**b + c
BOUND_CONSTANTS = {
    0.95: (-30.35, 0.39, 16.11),
    0.98: (-40.61, 0.29, 22.15),
}


class InfeasibleError(ValueError):
    """A requested displacement or compensation cannot be realised."""


class EtaBudgetWarning(UserWarning):
    pass


def _check_unitary(u: np.ndarray, name: str = "zeta"):
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"{name} must be square")
    err = np.abs(u.conj().T @ u - np.eye(len(u))).max()
    if err > UNITARY_TOL:
        raise ValueError(f"{name} is not unitary (residual {err:.3g})")
    return u


# --- Takagi -------------------------------------------------------------------

def takagi(beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (U, d) with U beta U^T = diag(d), d >= 0 sorted descending.

    Uses the real symmetric embedding [[A, B], [B, -A]] of beta = A + iB,
    whose positive eigenvectors (x, y) give Takagi vectors x + iy.
    """
    beta = np.atleast_2d(np.asarray(beta, dtype=complex))
    n = beta.shape[0]
    if beta.shape != (n, n):
        raise ValueError("beta must be square")
    asym = np.abs(beta - beta.T).max()
    if asym > SYMMETRY_TOL:
        raise ValueError(f"beta is not symmetric (residual {asym:.3g})")
    beta = 0.5 * (beta + beta.T)
    a, b = beta.real, beta.imag
    evals, evecs = np.linalg.eigh(np.block([[a, b], [b, -a]]))
    scale = max(1.0, np.abs(beta).max())
    keep = evals > 1e-12 * scale
    q = evecs[:n, keep] + 1j * evecs[n:, keep]
    d = evals[keep]
    if q.shape[1] < n:
        # null space: complete the orthonormal set from the identity columns
        cols = [q[:, i] for i in range(q.shape[1])]
        for e in np.eye(n, dtype=complex):
            v = e - sum(c * (c.conj() @ e) for c in cols)
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                cols.append(v / nv)
            if len(cols) == n:
                break
        q = np.column_stack(cols)
        d = np.concatenate([d, np.zeros(n - len(d))])
    order = np.argsort(-d, kind="stable")
    q, d = q[:, order], d[order]
    return q.conj().T, d


# --- targets ------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianTarget:
    """D(alpha) R(zeta) S(r)|0> with every squeezer along x."""

    alpha: np.ndarray
    zeta: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=complex))
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        zeta = _check_unitary(np.atleast_2d(self.zeta))
        if not (len(alpha) == len(r) == len(zeta)):
            raise ValueError("alpha, zeta and r sizes disagree")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise ValueError("r must be finite and non-negative")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "r", r)

    @property
    def n_modes(self) -> int:
        return len(self.r)

    def state(self) -> GaussianState:
        n = self.n_modes
        st = vacuum(n)
        for k, rk in enumerate(self.r):
            st = apply(st, squeezer_op(rk, 0.0, k, n))
        st = apply(st, passive_op(self.zeta, range(n), n))
        return apply(st, displacement_op(self.alpha))

    def to_dict(self) -> dict:
        return {
            "alpha": [[z.real, z.imag] for z in self.alpha],
            "zeta": [[[z.real, z.imag] for z in row] for row in self.zeta],
            "r": list(self.r),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianTarget":
        if "mean" in data and "cov" in data:
            return decompose_pure_state(np.asarray(data["mean"], float), np.asarray(data["cov"], float))
        cplx = lambda v: complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
        alpha = [cplx(v) for v in data["alpha"]]
        zeta = [[cplx(v) for v in row] for row in data["zeta"]]
        return cls(np.array(alpha), np.array(zeta), np.array(data["r"], float))


def decompose_pure_state(mean: np.ndarray, cov: np.ndarray) -> GaussianTarget:
    """Recover (alpha, zeta, r) of a pure state from its moments.

    The complex correlation M = <da da^T> of R(zeta)S(r)|0> equals
    -zeta diag(sinh 2r) zeta^T / 2, so a Takagi factorisation of -2M gives
    both the rotation and the squeezings.  Any rotation applied before the
    squeezers is absorbed by the vacuum and never appears.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = len(mean) // 2
    if mean.shape != (2 * n,) or cov.shape != (2 * n, 2 * n):
        raise ValueError("mean and cov shapes disagree")
    det = np.linalg.det(2.0 * cov)
    if abs(det - 1.0) > PURITY_TOL:
        raise ValueError(f"state is not pure: det(2 cov) = {det:.9g}, purity = {1 / math.sqrt(abs(det)):.9g}")
    x, p = slice(0, None, 2), slice(1, None, 2)
    alpha = (mean[x] + 1j * mean[p]) / math.sqrt(2.0)
    m = 0.5 * (cov[x, x] - cov[p, p] + 1j * (cov[x, p] + cov[p, x]))
    u, d = takagi(-2.0 * m)
    return GaussianTarget(alpha, u.conj().T, 0.5 * np.arcsinh(d))


# --- mesh ----------------------------------------------------------------------

@dataclass(frozen=True)
class MZICell:
    modes: tuple[int, int]
    internal_phi: float
    external_theta: float

    @property
    def eta(self) -> float:
        return math.sin(self.internal_phi / 2) ** 2


@dataclass(frozen=True)
class MeshDecomposition:
    """Cells in application order, preceded by per-mode input phase shifts.

    The transfer matrix is cells[-1] ... cells[0] @ diag(exp(-i input_phases)).
    """

    n_modes: int
    cells: tuple[MZICell, ...]
    input_phases: np.ndarray

    def matrix(self) -> np.ndarray:
        u = np.diag(np.exp(-1j * self.input_phases))
        for cell in self.cells:
            t = np.eye(self.n_modes, dtype=complex)
            i, j = cell.modes
            t[np.ix_([i, j], [i, j])] = mzi_transfer(cell.internal_phi, cell.external_theta)
            u = t @ u
        return u


def _embed(block: np.ndarray, m: int, n: int) -> np.ndarray:
    t = np.eye(n, dtype=complex)
    t[m:m + 2, m:m + 2] = block
    return t


def _rot(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s], [-s, c]], dtype=complex)


def _phase(theta: float) -> np.ndarray:
    return np.diag([np.exp(-1j * theta), 1.0])


def _wrap(angle: float) -> float:
    """Map to (-pi, pi]."""
    w = math.remainder(angle, 2 * math.pi)
    return math.pi if w == -math.pi else w


def _null_rows(u: np.ndarray, m: int, col: int):
    """Left cell on rows (m, m+1) whose inverse nulls u[m+1, col]."""
    a_, b_ = u[m, col], u[m + 1, col]
    if abs(b_) < 1e-300:
        a, theta = 0.0, 0.0
    elif abs(a_) < 1e-300:
        a, theta = math.pi / 2, 0.0
    else:
        ratio = b_ / a_
        a = math.atan(abs(ratio))
        theta = float(np.angle(-ratio))
    tinv = _rot(-a) @ np.diag([np.exp(1j * theta), 1.0])
    return a, theta, tinv


def _null_cols(u: np.ndarray, m: int, row: int):
    """Column operation on (m, m+1) nulling u[row, m]; returns (a, psi, X)."""
    a_, b_ = u[row, m], u[row, m + 1]
    if abs(a_) < 1e-300:
        a, psi = 0.0, 0.0
    elif abs(b_) < 1e-300:
        a, psi = math.pi / 2, 0.0
    else:
        a = math.atan(abs(a_) / abs(b_))
        psi = float(np.angle(-(b_ / abs(b_)) / (a_ / abs(a_))))
    x = np.diag([np.exp(1j * psi), 1.0]) @ _rot(-a)
    return a, psi, x


def mesh_decompose(zeta: np.ndarray, scheme: str = "clements") -> MeshDecomposition:
    """Nearest-neighbour MZI mesh for a unitary.

    ``scheme`` is "clements" (rectangular, default) or "reck" (triangular).
    """
    u = _check_unitary(zeta).copy()
    n = len(u)
    left: list[tuple[int, float, float]] = []   # matrices T = P(theta) R(a), in product order
    right: list[tuple[int, float, float]] = []  # Y = R(a) P(psi), in removal order

    if scheme == "reck":
        for col in range(n - 1):
            for row in range(n - 1, col, -1):
                a, th, tinv = _null_rows(u, row - 1, col)
                u = _embed(tinv, row - 1, n) @ u
                left.append((row - 1, a, th))
    elif scheme == "clements":
        for i in range(n - 1):
            if i % 2 == 0:
                for j in range(i + 1):
                    m, row = i - j, n - 1 - j
                    a, psi, x = _null_cols(u, m, row)
                    u = u @ _embed(x, m, n)
                    right.append((m, a, psi))
            else:
                for j in range(i + 1):
                    m, col = n - 2 - i + j, j
                    a, th, tinv = _null_rows(u, m, col)
                    u = _embed(tinv, m, n) @ u
                    left.append((m, a, th))
    else:
        raise ValueError(f"unknown mesh scheme {scheme!r}")

    d = np.diag(u).copy()
    # zeta = L_1 ... L_k D Y_last ... Y_1; push D through each Y to the right
    pushed: list[MZICell] = []
    for m, a, psi in reversed(right):
        d1, d2 = d[m], d[m + 1]
        theta = -float(np.angle(d1 / d2))
        pushed.append(MZICell((m, m + 1), 2 * a, _wrap(theta)))
        d[m], d[m + 1] = d2 * np.exp(-1j * psi), d2
    product = [MZICell((m, m + 1), 2 * a, _wrap(th)) for m, a, th in left] + pushed
    cells = tuple(reversed(product))
    input_phases = np.array([_wrap(-float(np.angle(z))) for z in d])
    return MeshDecomposition(n, cells, input_phases)


# --- cascade -----------------------------------------------------------------

@dataclass(frozen=True)
class CascadeSolution:
    alpha0: float
    etas: tuple[float, ...]
    phis: tuple[float, ...]
    residual: complex


def solve_cascade(alphas: Sequence[complex], alpha0_mag: float) -> CascadeSolution:
    """Splitting ratios and phases so that stage k delivers alphas[k-1].

    Stage k passes sqrt(eta_k) of the remaining ancilla amplitude A_k to the
    signal and keeps -sqrt(1 - eta_k) A_k, so sqrt(eta_k) = |alpha_k| / |A_k|.
    """
    if alpha0_mag <= 0:
        raise ValueError("alpha0 must be positive")
    amp = complex(alpha0_mag)
    etas, phis = [], []
    for k, target in enumerate(alphas, start=1):
        target = complex(target)
        if target == 0:
            etas.append(0.0)
            phis.append(0.0)
            amp = -amp
            continue
        sigma = abs(target) / abs(amp) if amp != 0 else math.inf
        # sigma = 1 would be a full swap that throws the signal away
        if sigma >= 1.0:
            raise InfeasibleError(
                f"cascade stage {k}: |alpha_{k}| = {abs(target):.6g} is not below the remaining "
                f"ancilla amplitude {abs(amp):.6g}"
            )
        eta = sigma * sigma
        phi = _wrap(float(np.angle(target)) - float(np.angle(amp)))
        etas.append(eta)
        phis.append(phi)
        amp = -math.sqrt(1.0 - eta) * amp * np.exp(1j * phi)
    return CascadeSolution(float(alpha0_mag), tuple(etas), tuple(phis), complex(amp))


def eta_budget(r_max: float, fidelity_level: float) -> float:
    """Largest cascade splitting ratio (dB) keeping fidelity above the level."""
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    for level, (a, b, c) in BOUND_CONSTANTS.items():
        if math.isclose(fidelity_level, level, abs_tol=1e-12):
            return a * r_max ** b + c
    raise ValueError(
        f"no tabulated bound for fidelity level {fidelity_level}; "
        f"supported: {sorted(BOUND_CONSTANTS)} (use the analysis sweep for others)"
    )


def displaced_squeezed_fidelity_estimate(r: float, eta: float) -> float:
    """Fidelity of a squeezed vacuum after the loss an eta coupler imposes."""
    ideal = apply(vacuum(1), squeezer_op(r, 0.0, 0, 1))
    return fidelity(ideal, loss_channel(ideal, 1.0 - eta, 0))


# --- loss compensation ---------------------------------------------------------

def _output_amplitude(mean: np.ndarray, mode: int) -> complex:
    return complex(mean[2 * mode], mean[2 * mode + 1]) / math.sqrt(2.0)


def compensate_displacement_for_loss(program: CircuitProgram, loss: LossModel | None,
                                     tol: float = 1e-14, max_iter: int = 60) -> CircuitProgram:
    """Rescale cascade splitting ratios so the lossy output mean hits the lossless one.

    Loss is phase-insensitive, so only magnitudes need correcting.  The
    lossless stage magnitudes are recorded on the returned program, which
    makes a second pass a no-op.  Simulate the result with the same loss model.
    """
    stages = cascade_stages(program)
    if loss is None or loss.is_lossless or not stages:
        return program
    if program.displacement_targets is not None:
        wants = program.displacement_targets
        if len(wants) != len(stages):
            raise ValueError("displacement_targets does not match the cascade stages")
    else:
        target = propagate_mean(program)
        wants = tuple(abs(_output_amplitude(target, program.elements[i].modes[0])) for _, i in stages.values())
    elements = list(program.elements)
    for (k, (_, idx)), want in zip(stages.items(), wants):
        el = elements[idx]
        out_mode = el.modes[0]
        for _ in range(max_iter):
            eta = cascade_eta(el)
            if want == 0.0:
                new_eta = 0.0
            else:
                current = replace(program, elements=tuple(elements))
                got = abs(_output_amplitude(propagate_mean(with_losses(current, loss)), out_mode))
                if got == 0.0:
                    raise InfeasibleError(f"cascade stage {k} delivers no displacement")
                new_eta = eta * (want / got) ** 2
            if new_eta > 1.0:
                raise InfeasibleError(
                    f"cascade stage {k}: compensating the loss needs eta = {new_eta:.6g} > 1"
                )
            if new_eta != eta:
                el = replace(el, internal_phi=near_swap_phi(new_eta))
                elements[idx] = el
            if abs(new_eta - eta) <= tol * max(new_eta, 1e-300):
                break
    return replace(program, elements=tuple(elements), displacement_targets=wants)


# --- compile -------------------------------------------------------------------

@dataclass
class CompiledProgram:
    target: GaussianTarget
    squeezers: tuple[tuple[float, float], ...]
    mesh: MeshDecomposition
    cascade: CascadeSolution
    program: CircuitProgram
    loss: LossModel | None = None
    voltages: VoltageFrame | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def etas(self) -> tuple[float, ...]:
        """Cascade splitting ratios as programmed (after any compensation)."""
        return tuple(cascade_eta(self.program.elements[i]) for _, i in cascade_stages(self.program).values())

    def simulate(self):
        return simulate(self.program, self.loss)

    def fidelity(self) -> float:
        return fidelity(self.target.state(), self.simulate().output)

    def to_dict(self) -> dict:
        out = self.program.to_dict()
        out["compiled"] = {
            "target": self.target.to_dict(),
            "squeezers": [{"r": r, "phi": phi} for r, phi in self.squeezers],
            "mesh": {
                "cells": [
                    {"modes": list(c.modes), "internal_phi": c.internal_phi, "external_theta": c.external_theta}
                    for c in self.mesh.cells
                ],
                "input_phases": list(self.mesh.input_phases),
            },
            "cascade": {
                "alpha0": self.cascade.alpha0,
                "etas": list(self.etas),
                "phis": list(self.cascade.phis),
                "residual": [self.cascade.residual.real, self.cascade.residual.imag],
            },
        }
        if self.loss is not None:
            out["loss"] = self.loss.to_dict()
        if self.voltages is not None:
            out["voltages"] = self.voltages.to_dict()
        return out


def build_program(r: Sequence[float], mesh: MeshDecomposition, cascade: CascadeSolution) -> CircuitProgram:
    """Ancilla in mode 0, signals in 1..N; outputs land in 0..N-1 and mode N is discarded."""
    n = len(r)
    els: list[Element] = []
    for k, rk in enumerate(r):
        els.append(Squeezer(float(rk), 0.0, k + 1, label=f"squeeze:{k + 1}"))
    for k, ph in enumerate(mesh.input_phases):
        if ph != 0.0:
            els.append(PhaseShift(float(ph), k + 1, label=f"mesh-input:{k + 1}"))
    for c in mesh.cells:
        els.append(MZI(c.internal_phi, c.external_theta, (c.modes[0] + 1, c.modes[1] + 1), label="mesh"))
    els.extend(cascade_displacement_elements(cascade.alpha0, cascade.etas, cascade.phis))
    return CircuitProgram(n + 1, tuple(els), Ancilla(mode=0, discard=n))


def _mod_pi(angle: float) -> float:
    return angle % math.pi


def chip_frame(r: Sequence[float], mesh: MeshDecomposition, cascade: CascadeSolution) -> VoltageFrame:
    """Express a two-mode compilation as chip voltages (raises ValueError if out of range)."""
    (cell,) = mesh.cells
    rel = cell.external_theta % (2 * math.pi)
    theta6, theta7 = (rel, 0.0) if rel <= math.pi else (0.0, 2 * math.pi - rel)
    # squeezed vacuum is invariant under a rotation by pi, so inputs only matter mod pi
    theta2 = _mod_pi(mesh.input_phases[0] - theta7)
    theta4 = _mod_pi(mesh.input_phases[1] - theta7)
    params = ChipParams(
        r1=float(r[0]), r2=float(r[1]), theta2=theta2, theta4=theta4, eta_mix=cell.eta,
        theta6=theta6, theta7=theta7, phi8=cascade.phis[0], eta9=cascade.etas[0],
        phi10=cascade.phis[1], eta11=cascade.etas[1], alpha0=cascade.alpha0,
    )
    return params_to_voltages(params)


def compile_target(target: GaussianTarget, alpha0_mag: float = DEFAULT_ALPHA0,
                   loss: LossModel | None = None, fidelity_level: float | None = 0.95,
                   scheme: str = "clements") -> CompiledProgram:
    """Compile a target state end to end.

    The eta budget check warns (EtaBudgetWarning) rather than failing; pass
    ``fidelity_level=None`` to skip it.
    """
    mesh = mesh_decompose(target.zeta, scheme)
    cascade = solve_cascade(target.alpha, alpha0_mag)
    notes: list[str] = []
    r_max = float(target.r.max()) if target.n_modes else 0.0
    if fidelity_level is not None and r_max > 0:
        bound_db = eta_budget(r_max, fidelity_level)
        worst = max(cascade.etas)
        if worst > 0 and 10 * math.log10(worst) > bound_db:
            est = displaced_squeezed_fidelity_estimate(r_max, worst)
            msg = (f"cascade eta {10 * math.log10(worst):.3f} dB exceeds the {fidelity_level:g} budget "
                   f"{bound_db:.3f} dB at r = {r_max:.4g}; estimated per-mode fidelity {est:.6f}")
            notes.append(msg)
            warnings.warn(msg, EtaBudgetWarning, stacklevel=2)

    frame = None
    program = build_program(target.r, mesh, cascade)
    if target.n_modes == 2 and len(mesh.cells) == 1:
        try:
            frame = chip_frame(target.r, mesh, cascade)
        except ValueError as exc:
            notes.append(f"no chip voltages: {exc}")
        else:
            program = build_two_mode_chip(frame)
    program = compensate_displacement_for_loss(program, loss)
    if frame is not None and loss is not None and not loss.is_lossless:
        stages = cascade_stages(program)
        e9, e11 = (cascade_eta(program.elements[i]) for _, i in stages.values())
        try:
            frame = replace(frame, v9=e9 / DISPLACEMENT_ETA_MAX, v11=e11 / DISPLACEMENT_ETA_MAX)
        except ValueError as exc:
            notes.append(f"no chip voltages after compensation: {exc}")
            frame = None
    squeezers = tuple((float(rk), 0.0) for rk in target.r)
    return CompiledProgram(target, squeezers, mesh, cascade, program, loss, frame, notes)
