"""Circuit descriptions, loss placement, the two-mode chip and simulation.

Mode 0 is the displacement ancilla whenever a cascade stage is present.  The
cascade swaps every signal down by one mode, so after it signal k sits in mode
k-1 and the ancilla leaves through mode N, which is discarded.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import ClassVar, Sequence

import numpy as np

from . import fock
from .gaussian import (
    GaussianState,
    SymplecticOp,
    apply,
    beamsplitter_op,
    displacement_op,
    loss_channel,
    passive_op,
    rotation_op,
    squeezer_op,
    vacuum,
)

R_MAX = 1.0
DISPLACEMENT_ETA_MAX = 0.0125
DEFAULT_ALPHA0 = 40.0
CASCADE_RE = re.compile(r"cascade:(\d+)")
CASCADE_PHASE_RE = re.compile(r"cascade-phase:(\d+)")


def db_to_transmission(db: float) -> float:
    return 10.0 ** (-db / 10.0)


def _complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _complex_json(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


@dataclass(frozen=True)
class Element:
    kind: ClassVar[str] = ""
    label: str = field(default="", kw_only=True)

    @property
    def modes(self) -> tuple[int, ...]:
        raise NotImplementedError

    def op(self, n_modes: int) -> SymplecticOp:
        raise NotImplementedError

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name, val in self.__dict__.items():
            if name == "label":
                continue
            if isinstance(val, complex):
                val = _complex_json(val)
            elif isinstance(val, tuple):
                val = list(val)
            out[name] = val
        if self.label:
            out["label"] = self.label
        return out


@dataclass(frozen=True)
class Squeezer(Element):
    kind: ClassVar[str] = "Squeezer"
    r: float
    phi: float
    mode: int

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("squeezer r must be >= 0")

    @property
    def modes(self):
        return (self.mode,)

    def op(self, n_modes):
        return squeezer_op(self.r, self.phi, self.mode, n_modes)


@dataclass(frozen=True)
class PhaseShift(Element):
    kind: ClassVar[str] = "PhaseShift"
    theta: float
    mode: int

    @property
    def modes(self):
        return (self.mode,)

    def op(self, n_modes):
        return rotation_op(self.theta, self.mode, n_modes)

    def transfer(self) -> np.ndarray:
        return np.array([[np.exp(-1j * self.theta)]])


@dataclass(frozen=True)
class BeamSplitter(Element):
    kind: ClassVar[str] = "BeamSplitter"
    eta: float
    modes_: tuple[int, int]

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"beamsplitter eta={self.eta} outside [0, 1]")
        if self.modes_[0] == self.modes_[1]:
            raise ValueError("beamsplitter needs two distinct modes")
        object.__setattr__(self, "modes_", tuple(int(m) for m in self.modes_))

    @property
    def modes(self):
        return self.modes_

    def op(self, n_modes):
        return beamsplitter_op(self.eta, self.modes_, n_modes)

    def transfer(self) -> np.ndarray:
        t, s = math.sqrt(1.0 - self.eta), math.sqrt(self.eta)
        return np.array([[t, s], [-s, t]], dtype=complex)

    def to_dict(self):
        out = super().to_dict()
        out["modes"] = out.pop("modes_")
        return out


def mzi_transfer(internal_phi: float, external_theta: float) -> np.ndarray:
    """diag(exp(-i theta), 1) @ [[cos(phi/2), sin(phi/2)], [-sin(phi/2), cos(phi/2)]].

    Cross-coupled power is sin^2(phi/2); phi = 0 is the bar state.  The
    coupler phases of a physical MZI are fixed offsets absorbed into the
    neighbouring phase shifters.
    """
    c, s = math.cos(internal_phi / 2), math.sin(internal_phi / 2)
    return np.diag([np.exp(-1j * external_theta), 1.0]) @ np.array([[c, s], [-s, c]])


@dataclass(frozen=True)
class MZI(Element):
    kind: ClassVar[str] = "MZI"
    internal_phi: float
    external_theta: float
    modes_: tuple[int, int]

    def __post_init__(self):
        if self.modes_[0] == self.modes_[1]:
            raise ValueError("MZI needs two distinct modes")
        object.__setattr__(self, "modes_", tuple(int(m) for m in self.modes_))

    @property
    def modes(self):
        return self.modes_

    @property
    def eta(self) -> float:
        return math.sin(self.internal_phi / 2) ** 2

    def transfer(self) -> np.ndarray:
        return mzi_transfer(self.internal_phi, self.external_theta)

    def op(self, n_modes):
        return passive_op(self.transfer(), self.modes_, n_modes)

    def to_dict(self):
        out = super().to_dict()
        out["modes"] = out.pop("modes_")
        return out


@dataclass(frozen=True)
class Loss(Element):
    kind: ClassVar[str] = "Loss"
    tau: float
    mode: int

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"loss transmission tau={self.tau} outside [0, 1]")

    @property
    def modes(self):
        return (self.mode,)


@dataclass(frozen=True)
class Displace(Element):
    kind: ClassVar[str] = "Displace"
    alpha: complex
    mode: int

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))

    @property
    def modes(self):
        return (self.mode,)

    def op(self, n_modes):
        return displacement_op(self.alpha, n_modes, mode=self.mode)


ELEMENT_KINDS = {cls.kind: cls for cls in (Squeezer, PhaseShift, BeamSplitter, MZI, Loss, Displace)}


def element_from_dict(data: dict) -> Element:
    data = dict(data)
    try:
        cls = ELEMENT_KINDS[data.pop("kind")]
    except KeyError as exc:
        raise ValueError(f"unknown element kind {exc.args[0]!r}") from None
    label = data.pop("label", "")
    if "modes" in data:
        data["modes_"] = tuple(data.pop("modes"))
    if "alpha" in data:
        data["alpha"] = _complex(data["alpha"])
    return cls(**data, label=label)


@dataclass(frozen=True)
class Ancilla:
    """Displacement ancilla: injected into ``mode``, leaves through ``discard``."""

    mode: int = 0
    discard: int = 0


@dataclass(frozen=True)
class CircuitProgram:
    n_modes: int
    elements: tuple[Element, ...] = ()
    ancilla: Ancilla | None = None
    # lossless stage displacement magnitudes, recorded by loss compensation
    displacement_targets: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.displacement_targets is not None:
            object.__setattr__(self, "displacement_targets", tuple(float(t) for t in self.displacement_targets))
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        for el in self.elements:
            for m in el.modes:
                if not 0 <= m < self.n_modes:
                    raise ValueError(f"{el.kind} acts on mode {m}, program has {self.n_modes} modes")
        if self.ancilla is not None:
            for m in (self.ancilla.mode, self.ancilla.discard):
                if not 0 <= m < self.n_modes:
                    raise ValueError("ancilla mode out of range")

    def to_dict(self) -> dict:
        out = {"n_modes": self.n_modes, "elements": [el.to_dict() for el in self.elements]}
        if self.ancilla is not None:
            out["ancilla"] = {"mode": self.ancilla.mode, "discard": self.ancilla.discard}
        if self.displacement_targets is not None:
            out["displacement_targets"] = list(self.displacement_targets)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitProgram":
        anc = data.get("ancilla")
        return cls(
            int(data["n_modes"]),
            tuple(element_from_dict(el) for el in data.get("elements", [])),
            Ancilla(int(anc.get("mode", 0)), int(anc.get("discard", 0))) if anc else None,
            data.get("displacement_targets"),
        )

    def count(self, kind: str) -> int:
        return sum(el.kind == kind for el in self.elements)


@dataclass(frozen=True)
class LossModel:
    """Per-element insertion losses in dB."""

    mzi_loss_db: float = 0.0
    phase_shifter_loss_db: float = 0.0
    coupler_loss_db: float = 0.0
    squeezer_loss_db: float = 0.0

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if val < 0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def from_mzi_loss(cls, mzi_loss_db: float, fraction: float = 1.0 / 3.0,
                      squeezer_loss_db: float = 0.0) -> "LossModel":
        """Couplers and phase shifters each carry ``fraction`` of the MZI loss."""
        return cls(mzi_loss_db, fraction * mzi_loss_db, fraction * mzi_loss_db, squeezer_loss_db)

    @property
    def is_lossless(self) -> bool:
        return not any(self.__dict__.values())

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "LossModel":
        fields = ("mzi_loss_db", "phase_shifter_loss_db", "coupler_loss_db", "squeezer_loss_db")
        return cls(**{k: float(data[k]) for k in fields if k in data})


def with_losses(program: CircuitProgram, loss: LossModel | None) -> CircuitProgram:
    """Insert Loss elements around each component.

    Squeezers and phase shifters get one loss after them; couplers and MZIs
    get half their loss before and half after, on each of their two modes.
    """
    if loss is None or loss.is_lossless:
        return program
    out: list[Element] = []
    for el in program.elements:
        if isinstance(el, (BeamSplitter, MZI)):
            db = loss.mzi_loss_db if isinstance(el, MZI) else loss.coupler_loss_db
            tau = db_to_transmission(db / 2.0)
            tag = f"loss:{el.label or el.kind}"
            if db > 0:
                out.extend(Loss(tau, m, label=tag) for m in el.modes)
            out.append(el)
            if db > 0:
                out.extend(Loss(tau, m, label=tag) for m in el.modes)
        elif isinstance(el, (Squeezer, PhaseShift)):
            db = loss.squeezer_loss_db if isinstance(el, Squeezer) else loss.phase_shifter_loss_db
            out.append(el)
            if db > 0:
                out.append(Loss(db_to_transmission(db), el.mode, label=f"loss:{el.label or el.kind}"))
        else:
            out.append(el)
    return replace(program, elements=tuple(out))


# --- cascaded displacement -------------------------------------------------

def near_swap_phi(eta: float) -> float:
    """MZI internal phase whose cross-coupling is 1 - eta."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"cascade eta={eta} outside [0, 1]")
    return 2.0 * math.acos(math.sqrt(eta))


def cascade_eta(element: MZI) -> float:
    return math.cos(element.internal_phi / 2) ** 2


def cascade_displacement_elements(alpha0: complex, etas: Sequence[float], phis: Sequence[float],
                                  ancilla_mode: int = 0) -> list[Element]:
    """Ancilla injection plus one phase shifter and near-swap coupler per stage.

    Stage k rotates the ancilla (in mode ancilla_mode + k - 1) by ``phis[k-1]``
    in the counter-clockwise sense, then couples it to the next mode with an
    MZI whose bar transmission is ``etas[k-1]``.
    """
    if len(etas) != len(phis):
        raise ValueError("etas and phis must have equal length")
    out: list[Element] = [Displace(complex(alpha0), ancilla_mode, label="ancilla")]
    for k, (eta, phi) in enumerate(zip(etas, phis), start=1):
        if not 0.0 <= eta < 1.0:
            raise ValueError(f"cascade eta_{k}={eta} outside [0, 1)")
        a = ancilla_mode + k - 1
        out.append(PhaseShift(-phi, a, label=f"cascade-phase:{k}"))
        out.append(MZI(near_swap_phi(eta), 0.0, (a, a + 1), label=f"cascade:{k}"))
    return out


def cascade_stages(program: CircuitProgram) -> dict[int, tuple[int, int]]:
    """Map stage k -> (index of its phase shifter, index of its coupler)."""
    phases, couplers = {}, {}
    for i, el in enumerate(program.elements):
        m = CASCADE_PHASE_RE.search(el.label)
        if m:
            phases[int(m.group(1))] = i
            continue
        m = CASCADE_RE.search(el.label)
        if m and isinstance(el, MZI):
            couplers[int(m.group(1))] = i
    return {k: (phases.get(k), couplers[k]) for k in sorted(couplers)}


# --- the two-mode chip -------------------------------------------------------

@dataclass(frozen=True)
class VoltageFrame:
    """Normalized electrode settings of the two-mode chip."""

    v1: float = 0.0
    v2: float = 0.0
    v3: float = 0.0
    v4: float = 0.0
    v5: float = 0.0
    v6: float = 0.0
    v7: float = 0.0
    v8: float = 0.0
    v9: float = 0.0
    v10: float = 0.0
    v11: float = 0.0
    alpha0: float = DEFAULT_ALPHA0

    RANGES: ClassVar[dict] = {
        **{f"v{i}": (0.0, 1.0) for i in (1, 2, 3, 4, 5, 6, 7, 9, 11)},
        "v8": (-1.0, 1.0),
        "v10": (-1.0, 1.0),
    }

    def __post_init__(self):
        for name, (lo, hi) in self.RANGES.items():
            val = getattr(self, name)
            if not lo <= val <= hi:
                raise ValueError(f"{name}={val} outside [{lo}, {hi}]")
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be >= 0")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> "VoltageFrame":
        kw = {k: float(v) for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**kw)


@dataclass(frozen=True)
class ChipParams:
    r1: float
    r2: float
    theta2: float
    theta4: float
    eta_mix: float
    theta6: float
    theta7: float
    phi8: float
    eta9: float
    phi10: float
    eta11: float
    alpha0: float


def voltage_to_params(frame: VoltageFrame) -> ChipParams:
    return ChipParams(
        r1=frame.v1 * R_MAX,
        r2=frame.v3 * R_MAX,
        theta2=frame.v2 * math.pi,
        theta4=frame.v4 * math.pi,
        eta_mix=1.0 - frame.v5,
        theta6=frame.v6 * math.pi,
        theta7=frame.v7 * math.pi,
        phi8=frame.v8 * math.pi,
        eta9=frame.v9 * DISPLACEMENT_ETA_MAX,
        phi10=frame.v10 * math.pi,
        eta11=frame.v11 * DISPLACEMENT_ETA_MAX,
        alpha0=frame.alpha0,
    )


def params_to_voltages(p: ChipParams) -> VoltageFrame:
    return VoltageFrame(
        v1=p.r1 / R_MAX, v2=p.theta2 / math.pi, v3=p.r2 / R_MAX, v4=p.theta4 / math.pi,
        v5=1.0 - p.eta_mix, v6=p.theta6 / math.pi, v7=p.theta7 / math.pi,
        v8=p.phi8 / math.pi, v9=p.eta9 / DISPLACEMENT_ETA_MAX,
        v10=p.phi10 / math.pi, v11=p.eta11 / DISPLACEMENT_ETA_MAX, alpha0=p.alpha0,
    )


def build_two_mode_chip(frame: VoltageFrame, loss: LossModel | None = None) -> CircuitProgram:
    """Ancilla in mode 0, signals in modes 1 and 2; outputs land in modes 0 and 1."""
    p = voltage_to_params(frame)
    elements: list[Element] = [
        Squeezer(p.r1, 0.0, 1, label="v1"),
        PhaseShift(p.theta2, 1, label="v2"),
        Squeezer(p.r2, 0.0, 2, label="v3"),
        PhaseShift(p.theta4, 2, label="v4"),
        MZI(2.0 * math.asin(math.sqrt(p.eta_mix)), 0.0, (1, 2), label="v5"),
        PhaseShift(p.theta6, 1, label="v6"),
        PhaseShift(p.theta7, 2, label="v7"),
    ]
    cascade = cascade_displacement_elements(p.alpha0, [p.eta9, p.eta11], [p.phi8, p.phi10])
    for el, name in zip(cascade[1:], ("v8", "v9", "v10", "v11")):
        elements.append(replace(el, label=f"{name} {el.label}"))
    program = CircuitProgram(3, (cascade[0], *elements), Ancilla(mode=0, discard=2))
    return with_losses(program, loss)


# --- simulation --------------------------------------------------------------

@dataclass
class SimulationResult:
    full: GaussianState
    reduced: GaussianState | None = None
    fock_state: fock.FockState | None = None
    oracle_mean: np.ndarray | None = None
    oracle_cov: np.ndarray | None = None
    cutoff: int | None = None

    @property
    def output(self) -> GaussianState:
        """The delivered state: ancilla traced out when there is one."""
        return self.reduced if self.reduced is not None else self.full


def run_gaussian(program: CircuitProgram, state: GaussianState | None = None) -> GaussianState:
    state = vacuum(program.n_modes) if state is None else state
    if state.n_modes != program.n_modes:
        raise ValueError("initial state mode count does not match program")
    for el in program.elements:
        if isinstance(el, Loss):
            state = loss_channel(state, el.tau, el.mode)
        else:
            state = apply(state, el.op(program.n_modes))
    return state


def propagate_mean(program: CircuitProgram) -> np.ndarray:
    """Output quadrature means only (cheaper than a full run)."""
    mean = np.zeros(2 * program.n_modes)
    for el in program.elements:
        if isinstance(el, Loss):
            mean[2 * el.mode: 2 * el.mode + 2] *= math.sqrt(el.tau)
        else:
            op = el.op(program.n_modes)
            mean = op.matrix @ mean + op.shift
    return mean


FRAME_THRESHOLD = 2.0


def run_fock(program: CircuitProgram, cutoff: int, tail_tol: float = fock.DEFAULT_TAIL_TOL) -> fock.FockState:
    """Lossless program in the truncated Fock basis.

    Displacements larger than FRAME_THRESHOLD go into the classical frame.
    """
    if program.n_modes > fock.MAX_MODES or cutoff > fock.MAX_CUTOFF:
        raise ValueError(
            f"Fock envelope is N <= {fock.MAX_MODES}, cutoff <= {fock.MAX_CUTOFF}; "
            f"got N = {program.n_modes}, cutoff = {cutoff}"
        )
    st = fock.fock_vacuum(program.n_modes, cutoff, tail_tol)
    for el in program.elements:
        if isinstance(el, Squeezer):
            st = fock.fock_squeeze(st, el.r, el.phi, el.mode)
        elif isinstance(el, PhaseShift):
            st = fock.fock_phase_shift(st, el.theta, el.mode)
        elif isinstance(el, (BeamSplitter, MZI)):
            st = fock.fock_passive(st, el.transfer(), el.modes)
        elif isinstance(el, Displace):
            st = fock.fock_displace(st, el.alpha, el.mode, frame=abs(el.alpha) > FRAME_THRESHOLD)
        elif isinstance(el, Loss):
            raise ValueError("the Fock oracle simulates lossless programs only")
    return st


def default_cutoff(program: CircuitProgram, tol: float = fock.DEFAULT_TAIL_TOL) -> int:
    """Cutoff heuristic from the program's total squeezing and in-basis displacement."""
    n_sq = sum(math.sinh(el.r) ** 2 for el in program.elements if isinstance(el, Squeezer))
    disp = sum(abs(el.alpha) for el in program.elements
               if isinstance(el, Displace) and abs(el.alpha) <= FRAME_THRESHOLD)
    return fock.estimate_cutoff(math.asinh(math.sqrt(n_sq)), disp, tol)


def simulate(program: CircuitProgram, loss: LossModel | None = None, oracle: bool = False,
             cutoff: int | None = None, tail_tol: float = fock.DEFAULT_TAIL_TOL) -> SimulationResult:
    """Fold the program through the Gaussian simulator, optionally also the Fock oracle."""
    lossy = with_losses(program, loss)
    full = run_gaussian(lossy)
    reduced = full.drop_mode(program.ancilla.discard) if program.ancilla is not None else None
    result = SimulationResult(full, reduced)
    if oracle:
        if lossy.count("Loss"):
            raise ValueError("oracle simulation requires a lossless program")
        cutoff = default_cutoff(program, tail_tol) if cutoff is None else cutoff
        st = run_fock(lossy, cutoff, tail_tol)
        result.fock_state = st
        result.oracle_mean, result.oracle_cov = fock.moments(st)
        result.cutoff = cutoff
    return result
