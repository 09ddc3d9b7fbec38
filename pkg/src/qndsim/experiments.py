"""The three measurement circuits, their estimators, and conditional outputs.

State preparation uses a three-parameter circuit (two y rotations plus a
controlled y rotation) whose output is conveniently written in the Bell
basis with the sign conventions

    psi_pm = (|10> +/- |01>) / sqrt(2),   phi_pm = (|11> +/- |00>) / sqrt(2),
    |+/-> = (|1> +/- |0>) / sqrt(2).

Two nondemolition circuits are provided. Circuit 1 writes the x-rotated
parity of the pair onto one ancilla and estimates concurrence as |p1 - p0|.
Circuit 2 entangles two ancillas with the pair and, depending on the
rotation setting, estimates coherence, population imbalance, or concurrence
from the joint ancilla statistics.

Rotation-convention note: the measurement settings are specified as rotation
vectors. Writing them as exp(-i sigma.vec) (no half angle) does *not*
reproduce the known closed-form outputs of circuit 2; the half-angle reading
exp(-i sigma.vec / 2) does, and is the default here. Both variants remain
constructible so the regression suite can pin which one is algebraically
correct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import circuits as circ
from .circuits import (
    Circuit,
    EmptyBranchError,
    OutcomeCounts,
    cnot,
    cry,
    h,
    rot3d,
    rx,
    ry,
)
from .observables import ObservableValue
from .qmath import (
    DensityMatrix,
    StateVector,
    append_ancillas,
    append_ancillas_rho,
    basis_state,
    partial_trace,
    tensor,
)

SQRT_HALF = 1.0 / math.sqrt(2.0)

# Bell-basis kets in the package index convention (qubit A most significant).
PSI_MINUS = np.array([0, -SQRT_HALF, SQRT_HALF, 0], dtype=complex)
PSI_PLUS = np.array([0, SQRT_HALF, SQRT_HALF, 0], dtype=complex)
PHI_MINUS = np.array([-SQRT_HALF, 0, 0, SQRT_HALF], dtype=complex)
PHI_PLUS = np.array([SQRT_HALF, 0, 0, SQRT_HALF], dtype=complex)

KET_PLUS = np.array([SQRT_HALF, SQRT_HALF], dtype=complex)
KET_MINUS = np.array([-SQRT_HALF, SQRT_HALF], dtype=complex)
KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)

# A post-selection branch counts as reliable when its theoretical probability
# (squared amplitude in the pre-measurement state) reaches this floor.
RELIABLE_BRANCH_PROB = 0.25

OBSERVABLES = ("VA", "VB", "PA", "PB", "C1", "C2")


@dataclass(frozen=True)
class PrepParams:
    """Angles of the input-state preparation circuit, each in [0, 2*pi]."""

    phi: float
    theta: float = 0.0
    lam: float = 0.0

    def __post_init__(self) -> None:
        for name in ("phi", "theta", "lam"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 2 * math.pi + 1e-12:
                raise ValueError(f"{name} must lie in [0, 2*pi], got {v}")


@dataclass(frozen=True)
class BellCoefficients:
    """Real Bell-basis coefficients (alpha, beta, gamma, eta) of the input state."""

    alpha: float
    beta: float
    gamma: float
    eta: float

    def __post_init__(self) -> None:
        norm = self.alpha**2 + self.beta**2 + self.gamma**2 + self.eta**2
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"coefficients not normalized: {norm!r}")

    def state_vector(self) -> StateVector:
        """Expand alpha*psi_minus + beta*psi_plus + gamma*phi_minus + eta*phi_plus."""
        amps = (
            self.alpha * PSI_MINUS
            + self.beta * PSI_PLUS
            + self.gamma * PHI_MINUS
            + self.eta * PHI_PLUS
        )
        return StateVector(2, amps)


def bell_coefficients(p: PrepParams) -> BellCoefficients:
    """Closed-form Bell coefficients of the preparation circuit output."""
    cp, sp = math.cos(p.phi / 2), math.sin(p.phi / 2)
    ct, st = math.cos(p.theta / 2), math.sin(p.theta / 2)
    cl, sl = math.cos(p.lam / 2), math.sin(p.lam / 2)
    alpha = SQRT_HALF * (cl * ct * sp - sl * (cp + sp * st))
    beta = SQRT_HALF * (cl * ct * sp + sl * (cp - sp * st))
    gamma = SQRT_HALF * (-cp * cl + sp * math.sin(p.theta / 2 + p.lam / 2))
    eta = SQRT_HALF * (cp * cl + sp * math.sin(p.theta / 2 + p.lam / 2))
    return BellCoefficients(alpha, beta, gamma, eta)


def prep_circuit(p: PrepParams) -> Circuit:
    """Two-qubit preparation circuit: RY(phi) on A, RY(lam) on B, CRY(theta) A->B."""
    return Circuit(2, (ry(0, p.phi), ry(1, p.lam), cry(0, 1, p.theta)), "prep")


@dataclass(frozen=True)
class MeasurementSetting:
    """Which observable circuit 1/2 measures, with its three rotation vectors."""

    observable: str  # 'visibility' | 'predictability' | 'concurrence1' | 'concurrence2'
    theta1: tuple[float, float, float] = (0.0, 0.0, 0.0)
    theta2: tuple[float, float, float] = (0.0, 0.0, 0.0)
    theta3: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        expected = _CANONICAL_VECTORS.get(self.observable)
        if expected is None:
            raise ValueError(f"unknown observable {self.observable!r}")
        got = (self.theta1, self.theta2, self.theta3)
        if any(not np.allclose(g, e, atol=1e-12) for g, e in zip(got, expected)):
            raise ValueError(f"rotation vectors do not match the {self.observable} setting")

    @property
    def num_qubits(self) -> int:
        return 3 if self.observable == "concurrence1" else 4

    @property
    def ancilla_qubits(self) -> tuple[int, ...]:
        return (2,) if self.observable == "concurrence1" else (2, 3)


_HALF_PI = math.pi / 2
_CANONICAL_VECTORS = {
    "visibility": ((0.0, _HALF_PI, 0.0), (0.0, -_HALF_PI, 0.0), (0.0, 0.0, 0.0)),
    "predictability": ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
    "concurrence2": ((_HALF_PI, 0.0, 0.0), (-_HALF_PI, 0.0, 0.0), (0.0, _HALF_PI, 0.0)),
    "concurrence1": ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
}


def visibility_setting() -> MeasurementSetting:
    return MeasurementSetting("visibility", *_CANONICAL_VECTORS["visibility"])


def predictability_setting() -> MeasurementSetting:
    return MeasurementSetting("predictability")


def concurrence1_setting() -> MeasurementSetting:
    return MeasurementSetting("concurrence1")


def concurrence2_setting() -> MeasurementSetting:
    return MeasurementSetting("concurrence2", *_CANONICAL_VECTORS["concurrence2"])


def setting_for(observable: str) -> MeasurementSetting:
    """Measurement setting that yields the named observable (VA, ..., C2)."""
    table = {
        "VA": visibility_setting,
        "VB": visibility_setting,
        "PA": predictability_setting,
        "PB": predictability_setting,
        "C1": concurrence1_setting,
        "C2": concurrence2_setting,
    }
    if observable not in table:
        raise ValueError(f"unknown observable {observable!r}")
    return table[observable]()


def _rotation_gates(qubit: int, vec: tuple[float, float, float], half_angle: bool):
    """Gates realizing the setting rotation on one qubit, or none for a zero vector."""
    vx, vy, vz = vec
    norm = math.sqrt(vx * vx + vy * vy + vz * vz)
    if norm < 1e-15:
        return ()
    if half_angle:
        if vy == 0.0 and vz == 0.0:
            return (rx(qubit, vx),)
        if vx == 0.0 and vz == 0.0:
            return (ry(qubit, vy),)
        return (rot3d(qubit, (vx / norm, vy / norm, vz / norm), norm / 2),)
    return (rot3d(qubit, (vx / norm, vy / norm, vz / norm), norm),)


def qnd1_circuit() -> Circuit:
    """Three-qubit concurrence circuit: x-rotated pair parity onto ancilla C."""
    gates = (
        rx(0, _HALF_PI),
        rx(1, _HALF_PI),
        cnot(0, 2),
        cnot(1, 2),
        rx(0, -_HALF_PI),
        rx(1, -_HALF_PI),
    )
    return Circuit(3, gates, "qnd-concurrence-1anc")


def qnd2_circuit(s: MeasurementSetting, half_angle: bool = True) -> Circuit:
    """Four-qubit circuit measuring the configured observable via ancillas C, D.

    Layout: setting rotation theta1 on A and B; ancilla block (theta3 on C,
    CNOT C->D); CNOT A->C; CNOT B->D; setting rotation theta2 on A and B.
    The caller measures C and D.
    """
    if s.observable == "concurrence1":
        raise ValueError("the single-ancilla concurrence setting uses qnd1_circuit")
    gates = (
        *_rotation_gates(0, s.theta1, half_angle),
        *_rotation_gates(1, s.theta1, half_angle),
        *_rotation_gates(2, s.theta3, half_angle),
        cnot(2, 3),
        cnot(0, 2),
        cnot(1, 3),
        *_rotation_gates(0, s.theta2, half_angle),
        *_rotation_gates(1, s.theta2, half_angle),
    )
    return Circuit(4, gates, f"qnd-{s.observable}")


def bell_basis_rotation() -> Circuit:
    """Maps the four ancilla Bell states onto computational outcomes.

    After CNOT C->D and H on C: phi_plus -> 00, psi_plus -> 01,
    phi_minus -> 10, psi_minus -> 11 (up to irrelevant global signs).
    """
    return Circuit(4, (cnot(2, 3), h(2)), "bell-basis")


def measurement_circuit(s: MeasurementSetting, half_angle: bool = True) -> Circuit:
    """The full ancilla-measurement circuit for a setting.

    For the two-ancilla concurrence setting this appends the Bell-basis
    rotation so that plain computational readout of C, D realizes the
    Bell-basis probabilities the estimator needs.
    """
    if s.observable == "concurrence1":
        return qnd1_circuit()
    c = qnd2_circuit(s, half_angle)
    if s.observable == "concurrence2":
        c = c.then(bell_basis_rotation())
    return c


def _frequencies(counts: OutcomeCounts | dict) -> dict[str, float]:
    if isinstance(counts, OutcomeCounts):
        return counts.frequencies()
    return dict(counts)


def estimate_observable(
    s: MeasurementSetting, counts: OutcomeCounts | dict
) -> dict[str, ObservableValue]:
    """Observable estimates from ancilla statistics.

    ``counts`` holds the computational-basis results on C (circuit 1) or
    C, D (circuit 2, after the Bell rotation for the concurrence setting);
    exact probability maps are accepted in place of counts.

    Returns {'VA', 'VB'} or {'PA', 'PB'} or {'C1'} or {'C2'} as appropriate.
    """
    f = _frequencies(counts)
    if s.observable == "concurrence1":
        signed = f.get("1", 0.0) - f.get("0", 0.0)
        return {"C1": ObservableValue("C1", abs(signed), signed)}
    p00 = f.get("00", 0.0)
    p01 = f.get("01", 0.0)
    p10 = f.get("10", 0.0)
    p11 = f.get("11", 0.0)
    if s.observable == "visibility":
        sa = p00 + p01 - p10 - p11
        sb = p00 + p10 - p01 - p11
        return {
            "VA": ObservableValue("VA", abs(sa), sa),
            "VB": ObservableValue("VB", abs(sb), sb),
        }
    if s.observable == "predictability":
        sa = p00 + p01 - p10 - p11
        sb = p00 + p10 - p01 - p11
        return {
            "PA": ObservableValue("PA", abs(sa), sa),
            "PB": ObservableValue("PB", abs(sb), sb),
        }
    # Two-ancilla concurrence: the outgoing ancilla state populates exactly
    # two Bell branches, psi_plus (outcome 01) with weight alpha^2 + eta^2 and
    # phi_plus (outcome 00) with weight beta^2 + gamma^2; the state-vector
    # oracle in the test suite pins this mapping.
    signed = p01 - p00
    return {"C2": ObservableValue("C2", abs(signed), signed)}


_VIS_BRANCHES = {
    # outcome -> (coefficient in Bell coefficients, A ket, B ket)
    "00": (lambda c: c.eta - c.beta, KET_MINUS, KET_MINUS),
    "01": (lambda c: c.alpha + c.gamma, KET_MINUS, KET_PLUS),
    "10": (lambda c: c.gamma - c.alpha, KET_PLUS, KET_MINUS),
    "11": (lambda c: c.eta + c.beta, KET_PLUS, KET_PLUS),
}

_PRED_BRANCHES = {
    "00": (lambda c: c.eta - c.gamma, KET_0, KET_0),
    "01": (lambda c: c.beta - c.alpha, KET_0, KET_1),
    "10": (lambda c: c.alpha + c.beta, KET_1, KET_0),
    "11": (lambda c: c.gamma + c.eta, KET_1, KET_1),
}


def _conc2_branch_vectors(c: BellCoefficients) -> dict[str, np.ndarray]:
    # Outcome labels are the Bell-rotated computational readouts of C, D.
    return {
        "01": c.alpha * PSI_MINUS + c.eta * PHI_PLUS,
        "00": c.gamma * PHI_MINUS + c.beta * PSI_PLUS,
        "10": np.zeros(4, dtype=complex),
        "11": np.zeros(4, dtype=complex),
    }


def branch_outcomes(s: MeasurementSetting) -> tuple[str, ...]:
    if s.observable == "concurrence1":
        return ("0", "1")
    return ("00", "01", "10", "11")


def conditional_target_state(
    s: MeasurementSetting, c: BellCoefficients, ancilla_outcome: str
) -> tuple[StateVector, float]:
    """Closed-form conditional pair state and branch probability.

    Only defined for the two-ancilla settings; the single-ancilla concurrence
    circuit has no closed form here and is characterized by simulation
    (see :func:`simulated_branches`).
    """
    if s.observable == "visibility" or s.observable == "predictability":
        table = _VIS_BRANCHES if s.observable == "visibility" else _PRED_BRANCHES
        if ancilla_outcome not in table:
            raise ValueError(f"invalid outcome {ancilla_outcome!r}")
        coeff_fn, ket_a, ket_b = table[ancilla_outcome]
        coeff = coeff_fn(c)
        prob = coeff * coeff / 2.0
        if prob < 1e-12:
            raise EmptyBranchError(f"branch {ancilla_outcome!r} has zero weight")
        return StateVector(2, tensor(ket_a.reshape(2, 1), ket_b.reshape(2, 1)).reshape(-1)), prob
    if s.observable == "concurrence2":
        vectors = _conc2_branch_vectors(c)
        if ancilla_outcome not in vectors:
            raise ValueError(f"invalid outcome {ancilla_outcome!r}")
        vec = vectors[ancilla_outcome]
        prob = float(np.sum(np.abs(vec) ** 2))
        if prob < 1e-12:
            raise EmptyBranchError(f"branch {ancilla_outcome!r} has zero weight")
        return StateVector(2, vec / math.sqrt(prob)), prob
    raise ValueError("no closed-form conditional state for this setting")


def qnd_output_state(s: MeasurementSetting, c: BellCoefficients) -> StateVector:
    """Closed-form four-qubit state right before the ancilla readout.

    Given in the same basis the measurement happens in, i.e. including the
    Bell rotation for the two-ancilla concurrence setting, so it can be
    compared directly against :func:`measurement_circuit` output.
    """
    amps = np.zeros(16, dtype=complex)
    if s.observable in ("visibility", "predictability"):
        table = _VIS_BRANCHES if s.observable == "visibility" else _PRED_BRANCHES
        for outcome, (coeff_fn, ket_a, ket_b) in table.items():
            anc = int(outcome, 2)
            pair = np.kron(ket_a, ket_b)
            for i in range(4):
                amps[i * 4 + anc] += SQRT_HALF * coeff_fn(c) * pair[i]
    elif s.observable == "concurrence2":
        for outcome, vec in _conc2_branch_vectors(c).items():
            anc = int(outcome, 2)
            for i in range(4):
                amps[i * 4 + anc] += vec[i]
    else:
        raise ValueError("no closed-form output state for this setting")
    return StateVector(4, amps)


@dataclass(frozen=True)
class BranchInfo:
    outcome: str
    probability: float
    reliable: bool


def branch_table(s: MeasurementSetting, p: PrepParams) -> tuple[BranchInfo, ...]:
    """Theoretical branch probabilities and reliability flags for a setting."""
    if s.observable == "concurrence1":
        probs = {o: pr for o, _, pr in simulated_branches(s, p)}
    else:
        c = bell_coefficients(p)
        probs = {}
        for outcome in branch_outcomes(s):
            try:
                _, prob = conditional_target_state(s, c, outcome)
            except EmptyBranchError:
                prob = 0.0
            probs[outcome] = prob
    return tuple(
        BranchInfo(o, probs[o], probs[o] >= RELIABLE_BRANCH_PROB)
        for o in branch_outcomes(s)
    )


def simulated_branches(
    s: MeasurementSetting, p: PrepParams
) -> list[tuple[str, StateVector | None, float]]:
    """Noiseless conditional states obtained by actually running the circuit.

    Cross-checks the closed forms, and is the defining characterization for
    the single-ancilla concurrence circuit.
    """
    n = s.num_qubits
    full = prep_circuit(p).widened(n).then(measurement_circuit(s))
    out = circ.run_pure(full, basis_state(n))
    branches: list[tuple[str, StateVector | None, float]] = []
    for outcome in branch_outcomes(s):
        try:
            state, prob = circ.postselect(out, s.ancilla_qubits, outcome)
        except EmptyBranchError:
            state, prob = None, 0.0
        branches.append((outcome, state, prob))
    return branches


def ideal_output_mixture(s: MeasurementSetting, p: PrepParams) -> DensityMatrix:
    """Pair state after the ancilla readout when the outcome is discarded.

    The pre-measurement state couples orthogonal ancilla kets to each branch,
    so this is the probability mixture of the conditional branch states.
    """
    if s.observable == "concurrence1":
        entries = [(st, pr) for _, st, pr in simulated_branches(s, p) if st is not None]
    else:
        c = bell_coefficients(p)
        entries = []
        for outcome in branch_outcomes(s):
            try:
                st, pr = conditional_target_state(s, c, outcome)
            except EmptyBranchError:
                continue
            entries.append((st, pr))
    m = np.zeros((4, 4), dtype=complex)
    for st, pr in entries:
        m += pr * np.outer(st.amplitudes, st.amplitudes.conj())
    m /= np.trace(m).real
    return DensityMatrix(2, m)


def qnd_estimates_exact(
    s: MeasurementSetting, pair_state: StateVector | DensityMatrix, half_angle: bool = True
) -> dict[str, ObservableValue]:
    """Infinite-shot estimator values for a given two-qubit input state.

    Adjoins fresh |0> ancillas, runs the measurement circuit exactly, and
    feeds the exact ancilla probabilities to the estimator. Accepts a mixed
    input so repeated (nondemolition) measurements can be chained.
    """
    n_anc = s.num_qubits - 2
    mc = measurement_circuit(s, half_angle)
    if isinstance(pair_state, StateVector):
        full = append_ancillas(pair_state, n_anc)
        out: StateVector | DensityMatrix = circ.run_pure(mc, full)
    else:
        full_rho = append_ancillas_rho(pair_state, n_anc)
        out = circ.run_noisy(mc, full_rho, circ.NoiseModel.none())
    probs = circ.exact_probabilities(out, s.ancilla_qubits)
    return estimate_observable(s, probs)


def post_measurement_pair_state(
    s: MeasurementSetting, pair_state: StateVector | DensityMatrix
) -> DensityMatrix:
    """Unconditional pair state after one exact measurement-circuit pass."""
    n_anc = s.num_qubits - 2
    mc = measurement_circuit(s)
    if isinstance(pair_state, StateVector):
        out = circ.run_pure(mc, append_ancillas(pair_state, n_anc)).density()
    else:
        out = circ.run_noisy(mc, append_ancillas_rho(pair_state, n_anc), circ.NoiseModel.none())
    return partial_trace(out, (0, 1))


# --- explicit operator cross-check for the visibility setting ----------------

_R_QUARTER = np.array(
    [[math.cos(math.pi / 4), -math.sin(math.pi / 4)],
     [math.sin(math.pi / 4), math.cos(math.pi / 4)]],
    dtype=complex,
)


def _cnot_first_to_third() -> np.ndarray:
    m = np.eye(8, dtype=complex)
    m[[4, 5]] = m[[5, 4]]
    m[[6, 7]] = m[[7, 6]]
    return m


def visibility_identity_deviation(p: PrepParams) -> float:
    """Max elementwise deviation between the explicit-operator evolution and
    the closed-form visibility output, as density matrices.

    The operator is assembled from raw matrices (the pi/4 y rotation and the
    first-to-third CNOT), independently of the gate machinery.
    """
    eye2 = np.eye(2, dtype=complex)
    r, rinv = _R_QUARTER, _R_QUARTER.conj().T
    c13 = _cnot_first_to_third()
    u = (
        tensor(rinv, rinv, eye2, eye2)
        @ tensor(eye2, c13)
        @ tensor(c13, eye2)
        @ tensor(r, r, eye2, eye2)
    )
    chi = bell_coefficients(p).state_vector().amplitudes
    anc = np.zeros(4, dtype=complex)
    anc[0] = 1.0
    full_in = np.kron(chi, anc)
    rho_in = np.outer(full_in, full_in.conj())
    evolved = u @ rho_in @ u.conj().T
    target = qnd_output_state(visibility_setting(), bell_coefficients(p)).amplitudes
    rho_target = np.outer(target, target.conj())
    return float(np.max(np.abs(evolved - rho_target)))


def visibility_identity_check(params: list[PrepParams] | None = None, atol: float = 1e-8) -> bool:
    """True when the explicit operator reproduces the closed-form output.

    Defaults to a 5x5 grid over (phi, theta) with lam = 0.
    """
    if params is None:
        grid = np.linspace(0.0, 2 * math.pi, 5)
        params = [PrepParams(phi, theta) for phi in grid for theta in grid]
    return all(visibility_identity_deviation(p) <= atol for p in params)
