"""Outcome probability functions, their closure constructors, and checkers.

An OPF maps pure states to outcome probabilities; a full measurement is a
finite list of OPFs summing to 1 on every pure state.  This module builds
OPFs from quantum POVM elements and from catalog devices, implements the
three closure constructors (mixtures, composition with unitaries, system
composition), and provides the analysis tools: a sampling-based closure
checker, a least-squares witness for the quadratic (quantum) form of an
OPF, a state-estimation-assumption checker, and a feasibility certificate
for linear post-measurement update maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .devices import (
    Bit,
    DeviceSpec,
    IntegerLabel,
    MatrixDescription,
    Outcome,
    RealValue,
    target_dimension,
)
from .qcore import (
    Ensemble,
    FactorSpace,
    POVMSet,
    PureState,
    RandomStream,
    random_pure_state,
    random_unitary,
    tensor_product,
)

RANGE_ATOL = 1e-9
CLOSURE_TOL = 1e-8
QUADRATIC_RESIDUAL_TOL = 1e-6
VIOLATION_THRESHOLD = 0.1
MAX_OUTCOME_LIST = 64


class OPF:
    """Evaluatable outcome probability function on pure states.

    ``operator`` is set when the OPF is known to have the quantum quadratic
    form <psi|Q|psi>; the closure constructors propagate it.
    """

    __slots__ = ("space", "evaluator", "provenance", "operator")

    def __init__(self, space: FactorSpace, evaluator: Callable[[PureState], float],
                 provenance: str, operator: np.ndarray | None = None):
        self.space = space
        self.evaluator = evaluator
        self.provenance = provenance
        if operator is not None:
            operator = np.array(operator, dtype=complex)
            operator.setflags(write=False)
        self.operator = operator

    def __call__(self, state: PureState) -> float:
        if state.space.dims != self.space.dims:
            raise ValueError("state space does not match the OPF's space")
        return float(self.evaluator(state))

    def on_ensemble(self, ensemble: Ensemble) -> float:
        """Expected value sum_r p_r f(psi_r) on a proper mixture."""
        return float(sum(w * self(s) for s, w in ensemble.members))

    def __repr__(self):
        return f"OPF(dims={self.space.dims}, provenance={self.provenance!r})"


@dataclass(frozen=True)
class FullMeasurement:
    """Finite list of OPFs that should sum to 1 on every pure state."""

    outcomes: tuple[OPF, ...]

    @property
    def space(self) -> FactorSpace:
        return self.outcomes[0].space

    def completeness_violation(self, states: Sequence[PureState]) -> float:
        worst = 0.0
        for psi in states:
            total = sum(f(psi) for f in self.outcomes)
            worst = max(worst, abs(total - 1.0))
        return worst

    @classmethod
    def from_povm(cls, povm: POVMSet, space: FactorSpace) -> "FullMeasurement":
        return cls(tuple(opf_from_quantum(q, space) for q in povm.elements))


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def opf_from_quantum(element: np.ndarray, space: FactorSpace | None = None) -> OPF:
    """OPF of a quantum POVM element: f(psi) = <psi|Q|psi>, with 0 <= Q <= I."""
    q = np.array(element, dtype=complex)
    dim = q.shape[0]
    if q.ndim != 2 or q.shape[1] != dim:
        raise ValueError("POVM element must be a square matrix")
    if np.max(np.abs(q - q.conj().T)) > 1e-9:
        raise ValueError("POVM element must be Hermitian")
    vals = np.linalg.eigvalsh(q)
    if vals[0] < -1e-9 or vals[-1] > 1.0 + 1e-9:
        raise ValueError("POVM element must satisfy 0 <= Q <= I")
    if space is None:
        space = FactorSpace((dim,))
    elif space.total_dim != dim:
        raise ValueError("declared space does not match the element's dimension")

    def evaluate(psi: PureState) -> float:
        return float(np.real(np.vdot(psi.amplitudes, q @ psi.amplitudes)))

    return OPF(space, evaluate, "quantum", operator=q)


def opf_from_device(spec: DeviceSpec, selector: Outcome, space: FactorSpace,
                    target) -> OPF:
    """OPF of one device outcome, evaluated analytically (never by sampling)."""
    probe = PureState.basis_state(space, 0)
    spec.probability_of(probe, target, selector)  # validates selector kind early

    def evaluate(psi: PureState) -> float:
        return spec.probability_of(psi, target, selector)

    return OPF(space, evaluate, f"device:{spec.kind}")


def readout_opf(phi: PureState) -> OPF:
    """Readout OPF f_phi: value 1 exactly on phi (up to phase), else 0."""
    spec = DeviceSpec("Readout")
    selector = MatrixDescription(phi.density())
    target = phi.space.indices()
    return opf_from_device(spec, selector, phi.space, target)


def constant_opf(space: FactorSpace, value: float) -> OPF:
    if not -RANGE_ATOL <= value <= 1.0 + RANGE_ATOL:
        raise ValueError("constant OPF value must lie in [0, 1]")
    return OPF(space, lambda psi: value, "constant",
               operator=value * np.eye(space.total_dim))


def mix(opfs: Sequence[OPF], weights: Sequence[float]) -> OPF:
    """Pointwise convex combination of OPFs (closure under mixtures)."""
    opfs = list(opfs)
    w = np.asarray(weights, dtype=float)
    if len(opfs) != w.size or len(opfs) == 0:
        raise ValueError("need one weight per OPF")
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    dims = opfs[0].space.dims
    if any(f.space.dims != dims for f in opfs):
        raise ValueError("mixed OPFs must share one space")

    operator = None
    if all(f.operator is not None for f in opfs):
        operator = sum(wi * f.operator for wi, f in zip(w, opfs))

    def evaluate(psi: PureState) -> float:
        return float(sum(wi * f(psi) for wi, f in zip(w, opfs)))

    return OPF(opfs[0].space, evaluate, "mixture", operator=operator)


def compose_unitary(f: OPF, unitary: np.ndarray) -> OPF:
    """(f o U)(psi) = f(U psi) (closure under composition with unitaries)."""
    u = np.asarray(unitary, dtype=complex)
    if u.shape != (f.space.total_dim, f.space.total_dim):
        raise ValueError("unitary dimension does not match the OPF's space")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > 1e-9:
        raise ValueError("matrix is not unitary within tolerance")
    operator = None if f.operator is None else u.conj().T @ f.operator @ u

    def evaluate(psi: PureState) -> float:
        return f(PureState.normalized(f.space, u @ psi.amplitudes))

    return OPF(f.space, evaluate, "unitary-composed", operator=operator)


def compose_system(g: OPF, phi: PureState) -> OPF:
    """f(psi) = g(psi (x) phi) (closure under system composition).

    ``phi`` is the background state on the trailing factors of g's space;
    the result lives on the leading factors.
    """
    g_dims = g.space.dims
    b_dims = phi.space.dims
    if len(b_dims) >= len(g_dims) or g_dims[len(g_dims) - len(b_dims):] != b_dims:
        raise ValueError("background state must live on the trailing factors of g")
    lead = FactorSpace(g_dims[: len(g_dims) - len(b_dims)])

    operator = None
    if g.operator is not None:
        d, b = lead.total_dim, phi.space.total_dim
        q4 = g.operator.reshape(d, b, d, b)
        operator = np.einsum("k,ikjl,l->ij", phi.amplitudes.conj(), q4, phi.amplitudes)

    def evaluate(psi: PureState) -> float:
        return g(tensor_product(psi, phi))

    return OPF(lead, evaluate, "system-composed", operator=operator)


def mix_measurements(first: FullMeasurement, second: FullMeasurement, weight: float,
                     pairing: Sequence[tuple[int, int]]) -> FullMeasurement:
    """Mixture of two full measurements under an explicit outcome pairing.

    ``pairing`` lists (i, j) outcome indices that are declared identical;
    unpaired outcomes survive with their single-branch weight.  There is no
    canonical identification across outcome alphabets, so the caller must
    supply one.
    """
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must lie in [0, 1]")
    if first.space.dims != second.space.dims:
        raise ValueError("measurements must share one space")
    used_i = {i for i, _ in pairing}
    used_j = {j for _, j in pairing}
    if len(used_i) != len(pairing) or len(used_j) != len(pairing):
        raise ValueError("pairing must not repeat outcomes")
    space = first.space
    out: list[OPF] = []
    for i, j in pairing:
        f, g = first.outcomes[i], second.outcomes[j]
        op = None
        if f.operator is not None and g.operator is not None:
            op = weight * f.operator + (1.0 - weight) * g.operator
        out.append(OPF(space,
                       lambda psi, f=f, g=g: weight * f(psi) + (1.0 - weight) * g(psi),
                       "mixture", operator=op))
    for i, f in enumerate(first.outcomes):
        if i not in used_i:
            op = None if f.operator is None else weight * f.operator
            out.append(OPF(space, lambda psi, f=f: weight * f(psi), "mixture",
                           operator=op))
    for j, g in enumerate(second.outcomes):
        if j not in used_j:
            op = None if g.operator is None else (1.0 - weight) * g.operator
            out.append(OPF(space, lambda psi, g=g: (1.0 - weight) * g(psi), "mixture",
                           operator=op))
    return FullMeasurement(tuple(out))


# ---------------------------------------------------------------------------
# Entropy-meter full measurements
# ---------------------------------------------------------------------------

def entropy_outcome_values(target_dim: int, precision: int) -> tuple[float, ...]:
    """All reachable finite-precision entropy outputs on a target of this size.

    The entropy lies in [0, log2 d], so the quantized outputs are the
    multiples k 2^-m for k = 0 .. round(2^m log2 d).
    """
    top = int(round(math.ldexp(math.log2(target_dim), precision)))
    return tuple(math.ldexp(k, -precision) for k in range(top + 1))


def entropy_meter_measurement(space: FactorSpace, target, precision: int,
                              alpha: float = 1.0) -> FullMeasurement:
    """Finite-precision entropy meter as a full measurement (one OPF per output)."""
    spec = DeviceSpec("EntropyMeter", {"alpha": alpha, "precision": precision})
    d_t = target_dimension(space, target)
    outcomes = tuple(
        opf_from_device(spec, RealValue(v), space, target)
        for v in entropy_outcome_values(d_t, precision)
    )
    return FullMeasurement(outcomes)


# ---------------------------------------------------------------------------
# Closure checker
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosureReport:
    """Sampled verification of completeness and the three closure properties."""

    samples: int
    completeness_violation: float
    mixture_violation: float
    unitary_violation: float
    composition_violation: float | None
    tolerance: float = CLOSURE_TOL

    @property
    def max_violation(self) -> float:
        parts = [self.completeness_violation, self.mixture_violation,
                 self.unitary_violation]
        if self.composition_violation is not None:
            parts.append(self.composition_violation)
        return max(parts)

    @property
    def passed(self) -> bool:
        return self.max_violation < self.tolerance

    def record_fields(self) -> dict:
        return {
            "check": "closure",
            "samples": self.samples,
            "completeness_violation": self.completeness_violation,
            "mixture_violation": self.mixture_violation,
            "unitary_violation": self.unitary_violation,
            "composition_violation": (
                -1.0 if self.composition_violation is None else self.composition_violation),
            "max_violation": self.max_violation,
            "passed": self.passed,
        }


def _range_violation(value: float) -> float:
    return max(0.0, value - 1.0, -value)


def check_closure(measurement: FullMeasurement, samples: int,
                  rng: RandomStream) -> ClosureReport:
    """Verify completeness and closure membership on sampled inputs.

    Completeness tests sum_i f_i = 1 on random states.  The property checks
    build random mixtures, unitary compositions, and (on multi-factor
    spaces) background compositions, and verify the constructed OPFs are
    valid: values inside [0, 1] and completeness preserved.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    space = measurement.space
    states = [random_pure_state(space, rng.derive(t)) for t in range(samples)]
    completeness = measurement.completeness_violation(states)

    n_out = len(measurement.outcomes)
    aux = rng.derive(samples + 1)
    probes = states[: min(len(states), 50)]

    mixture_violation = 0.0
    for _ in range(10):
        w = aux.generator.dirichlet(np.ones(n_out)) if n_out > 1 else np.ones(1)
        mixed = mix(measurement.outcomes, w)
        for psi in probes:
            mixture_violation = max(mixture_violation, _range_violation(mixed(psi)))

    unitary_violation = 0.0
    for _ in range(10):
        u = random_unitary(space.total_dim, aux)
        composed = FullMeasurement(tuple(compose_unitary(f, u)
                                         for f in measurement.outcomes))
        unitary_violation = max(unitary_violation,
                                composed.completeness_violation(probes))
        for f in composed.outcomes:
            for psi in probes[:10]:
                unitary_violation = max(unitary_violation, _range_violation(f(psi)))

    composition_violation: float | None = None
    if space.n_factors >= 2:
        composition_violation = 0.0
        lead = FactorSpace(space.dims[:-1])
        back = FactorSpace((space.dims[-1],))
        lead_probes = [random_pure_state(lead, aux) for _ in range(10)]
        for _ in range(10):
            phi = random_pure_state(back, aux)
            composed = FullMeasurement(tuple(compose_system(f, phi)
                                             for f in measurement.outcomes))
            composition_violation = max(composition_violation,
                                        composed.completeness_violation(lead_probes))
            for f in composed.outcomes:
                for psi in lead_probes:
                    composition_violation = max(composition_violation,
                                                _range_violation(f(psi)))

    return ClosureReport(samples, completeness, mixture_violation,
                         unitary_violation, composition_violation)


# ---------------------------------------------------------------------------
# Hermitian parametrization and probe states
# ---------------------------------------------------------------------------

def hermitian_basis(dim: int) -> list[np.ndarray]:
    """Hilbert-Schmidt orthonormal basis of the Hermitian matrices."""
    out = []
    for j in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[j, j] = 1.0
        out.append(e)
    for j in range(dim):
        for k in range(j + 1, dim):
            s = np.zeros((dim, dim), dtype=complex)
            s[j, k] = s[k, j] = 1.0 / math.sqrt(2.0)
            out.append(s)
            a = np.zeros((dim, dim), dtype=complex)
            a[j, k] = -1j / math.sqrt(2.0)
            a[k, j] = 1j / math.sqrt(2.0)
            out.append(a)
    return out


def hermitian_coords(matrix: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([float(np.trace(h @ matrix).real) for h in basis])


def canonical_probe_states(dim: int) -> list[np.ndarray]:
    """d^2 pure-state vectors whose projectors span the Hermitian space."""
    eye = np.eye(dim, dtype=complex)
    probes = [eye[j] for j in range(dim)]
    for j in range(dim):
        for k in range(j + 1, dim):
            probes.append((eye[j] + eye[k]) / math.sqrt(2.0))
            probes.append((eye[j] + 1j * eye[k]) / math.sqrt(2.0))
    return probes


def _witness_probe_states(dim: int) -> list[np.ndarray]:
    """Deterministic overcomplete probe set for quadratic-form fitting."""
    eye = np.eye(dim, dtype=complex)
    probes = [eye[j] for j in range(dim)]
    for j in range(dim):
        for k in range(j + 1, dim):
            for sign in (1.0, -1.0):
                probes.append((eye[j] + sign * eye[k]) / math.sqrt(2.0))
                probes.append((eye[j] + sign * 1j * eye[k]) / math.sqrt(2.0))
    probes.append(np.ones(dim, dtype=complex) / math.sqrt(dim))
    salt = RandomStream(0x9E3779B9, experiment=dim)
    for _ in range(2 * dim):
        v = salt.complex_normal(dim)
        probes.append(v / np.linalg.norm(v))
    return probes


# ---------------------------------------------------------------------------
# Product-form (quadratic) witness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductFormCertificate:
    """Least-squares evidence for or against the quadratic form of an OPF.

    ``residual`` is the worst absolute deviation |f(psi) - <psi|Q|psi>|
    over the probe set for the best-fitting Hermitian Q.  A residual below
    ``QUADRATIC_RESIDUAL_TOL`` is consistent with the quantum form; one
    above ``VIOLATION_THRESHOLD`` certifies that no such form exists.
    """

    residual: float
    operator: np.ndarray
    probe_count: int
    quadratic_tol: float = QUADRATIC_RESIDUAL_TOL
    violation_threshold: float = VIOLATION_THRESHOLD

    @property
    def verdict(self) -> str:
        if self.residual < self.quadratic_tol:
            return "QUADRATIC"
        if self.residual > self.violation_threshold:
            return "VIOLATION"
        return "INCONCLUSIVE"

    def record_fields(self) -> dict:
        return {
            "check": "product_form",
            "residual": self.residual,
            "probe_count": self.probe_count,
            "verdict": self.verdict,
        }


def product_form_witness(f: OPF, extra_probes: Sequence[PureState] = ()
                         ) -> ProductFormCertificate:
    """Fit a single operator Q with f(psi) = <psi|Q|psi> over a spanning probe set.

    The probe set is deterministic and overcomplete (it contains a complete
    operator-basis probe set, so the fit is unique whenever f is quadratic);
    callers may append extra probe states without changing the verdict of a
    genuinely quadratic OPF.
    """
    dim = f.space.total_dim
    if dim > 16:
        raise ValueError("quadratic-form witness supports total dimension <= 16")
    probes = [PureState.normalized(f.space, v) for v in _witness_probe_states(dim)]
    probes.extend(extra_probes)

    basis = hermitian_basis(dim)
    design = np.array([hermitian_coords(psi.density(), basis) for psi in probes])
    values = np.array([f(psi) for psi in probes])
    coeffs, *_ = np.linalg.lstsq(design, values, rcond=None)
    fitted = design @ coeffs
    residual = float(np.max(np.abs(values - fitted)))
    operator = sum(c * h for c, h in zip(coeffs, basis))
    return ProductFormCertificate(residual, operator, len(probes))


# ---------------------------------------------------------------------------
# State-estimation assumption checker
# ---------------------------------------------------------------------------

ESTIMATION_FAMILIES = ("quantum_povm", "entropy_meter", "spod", "erd_sevrd", "readout")


@dataclass(frozen=True)
class EstimationWitness:
    """Two ensembles with one density matrix that a finite list cannot separate."""

    ensemble_a: Ensemble
    ensemble_b: Ensemble
    distinguishing: OPF
    value_a: float
    value_b: float
    list_agreement: float  # worst |difference| of the supplied list across the pair
    list_size: int


@dataclass(frozen=True)
class EstimationVerdict:
    family: str
    dimension: int
    verdict: str  # SATISFIED | SATISFIED-TRIVIALLY | FAILS
    outcomes: tuple[OPF, ...] = ()
    witness: EstimationWitness | None = None
    evidence: float = 0.0

    def record_fields(self) -> dict:
        fields = {
            "check": "estimation_assumption",
            "family": self.family,
            "d": self.dimension,
            "verdict": self.verdict,
            "outcome_count": len(self.outcomes),
            "evidence": self.evidence,
        }
        if self.witness is not None:
            w = self.witness
            fields.update({
                "witness_value_a": w.value_a,
                "witness_value_b": w.value_b,
                "witness_list_agreement": w.list_agreement,
                "witness_list_size": w.list_size,
                "witness_states_a": [s.amplitudes for s, _ in w.ensemble_a.members],
                "witness_states_b": [s.amplitudes for s, _ in w.ensemble_b.members],
            })
        return fields


def ic_projector_states(dim: int) -> list[np.ndarray]:
    """d^2 - 1 pure states whose projector weights determine a density matrix.

    Together with the unit-trace constraint, the projectors span the
    Hermitian space; for a qubit these are the Pauli +1/-1 eigenstates
    |1>, |+>, |+i>.
    """
    return canonical_probe_states(dim)[1:]


def density_from_projector_values(states: Sequence[np.ndarray], values: Sequence[float],
                                  dim: int) -> np.ndarray:
    """Reconstruct rho from Tr(P_a rho) values plus the unit-trace constraint."""
    basis = hermitian_basis(dim)
    rows = [hermitian_coords(np.outer(s, s.conj()), basis) for s in states]
    rows.append(hermitian_coords(np.eye(dim, dtype=complex), basis))
    rhs = list(values) + [1.0]
    coeffs, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    return sum(c * h for c, h in zip(coeffs, basis))


def _ic_outcomes(family: str, dim: int) -> tuple[OPF, ...]:
    space = FactorSpace((dim,))
    target = space.indices()
    out = []
    for vec in ic_projector_states(dim):
        proj = np.outer(vec, vec.conj())
        if family == "quantum_povm":
            out.append(opf_from_quantum(proj, space))
        elif family == "spod":
            povm = POVMSet((proj, np.eye(dim) - proj))
            spec = DeviceSpec("PovmSampler", {"povm": povm})
            out.append(opf_from_device(spec, IntegerLabel(1), space, target))
        elif family == "erd_sevrd":
            spec = DeviceSpec("EigenvalueSampler",
                              {"observable": proj, "variant": "bit"})
            out.append(opf_from_device(spec, Bit(1), space, target))
        else:
            raise AssertionError(family)
    return tuple(out)


def _readout_witness_pair(dim: int, unitary: np.ndarray) -> tuple[Ensemble, Ensemble]:
    """Same-density ensembles {u0, u1} vs {(u0+u1)/sqrt2, (u0-u1)/sqrt2}."""
    space = FactorSpace((dim,))
    u0, u1 = unitary[:, 0], unitary[:, 1]
    a = Ensemble((
        (PureState.normalized(space, u0), 0.5),
        (PureState.normalized(space, u1), 0.5),
    ))
    b = Ensemble((
        (PureState.normalized(space, (u0 + u1) / math.sqrt(2.0)), 0.5),
        (PureState.normalized(space, (u0 - u1) / math.sqrt(2.0)), 0.5),
    ))
    return a, b


def check_estimation_assumption(family: str, dim: int, rng: RandomStream,
                                outcome_list: Sequence[OPF] | None = None
                                ) -> EstimationVerdict:
    """Decide whether a measurement family admits a finite estimating outcome list.

    For the POVM-statistics families the verdict is SATISFIED, with the
    d^2 - 1 informationally complete outcomes returned as the list.  The
    entropy-meter family is SATISFIED-TRIVIALLY: its OPFs are constant on
    pure states, hence on ensembles.  The readout family FAILS: the verdict
    carries two ensembles with one density matrix on which every supplied
    outcome agrees while a readout OPF separates them.
    """
    if family not in ESTIMATION_FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {ESTIMATION_FAMILIES}")
    if not 2 <= dim <= 4:
        raise ValueError("estimation checker supports 2 <= d <= 4")

    space = FactorSpace((dim,))

    if family in ("quantum_povm", "spod", "erd_sevrd"):
        outcomes = _ic_outcomes(family, dim)
        # evidence: worst reconstruction error of random mixed states from
        # the outcome values alone
        worst = 0.0
        for trial in range(20):
            ens = _random_ensemble(space, rng.derive(trial), members=3)
            values = [f.on_ensemble(ens) for f in outcomes]
            rho = density_from_projector_values(ic_projector_states(dim), values, dim)
            worst = max(worst, float(np.max(np.abs(rho - ens.density().entries))))
        return EstimationVerdict(family, dim, "SATISFIED", outcomes=outcomes,
                                 evidence=worst)

    if family == "entropy_meter":
        measurement = entropy_meter_measurement(space, space.indices(), precision=4)
        f0 = measurement.outcomes[0]
        worst = 0.0
        for trial in range(100):
            psi = random_pure_state(space, rng.derive(trial))
            worst = max(worst, abs(f0(psi) - 1.0))
        return EstimationVerdict(family, dim, "SATISFIED-TRIVIALLY", outcomes=(),
                                 evidence=worst)

    # readout family
    supplied = tuple(outcome_list) if outcome_list is not None else _ic_outcomes(
        "quantum_povm", dim)
    if len(supplied) > MAX_OUTCOME_LIST:
        raise ValueError(f"outcome list is bounded at {MAX_OUTCOME_LIST} entries")
    for attempt in range(100):
        unitary = np.eye(dim, dtype=complex) if attempt == 0 else random_unitary(
            dim, rng.derive(1000 + attempt))
        ens_a, ens_b = _readout_witness_pair(dim, unitary)
        agreement = max(
            (abs(f.on_ensemble(ens_a) - f.on_ensemble(ens_b)) for f in supplied),
            default=0.0)
        if agreement > 1e-9:
            continue  # a supplied outcome separates this pair; rotate and retry
        separator = readout_opf(ens_a.members[0][0])
        va, vb = separator.on_ensemble(ens_a), separator.on_ensemble(ens_b)
        if abs(va - vb) < 0.25:
            continue
        witness = EstimationWitness(ens_a, ens_b, separator, va, vb,
                                    agreement, len(supplied))
        return EstimationVerdict(family, dim, "FAILS", witness=witness,
                                 evidence=abs(va - vb))
    raise ValueError("could not build a witness pair the supplied list cannot separate")


def _random_ensemble(space: FactorSpace, rng: RandomStream, members: int) -> Ensemble:
    weights = rng.generator.dirichlet(np.ones(members))
    return Ensemble(tuple(
        (random_pure_state(space, rng), float(w)) for w in weights
    ))


# ---------------------------------------------------------------------------
# Post-measurement update-map feasibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CPMapCandidate:
    """Linear map on density matrices, as a matrix over a Hermitian basis."""

    dimension: int
    matrix: np.ndarray  # (d^2, d^2) real, acting on Hermitian coordinates

    def apply(self, rho: np.ndarray) -> np.ndarray:
        basis = hermitian_basis(self.dimension)
        coords = hermitian_coords(rho, basis)
        out_coords = self.matrix @ coords
        return sum(c * h for c, h in zip(out_coords, basis))


@dataclass(frozen=True)
class UpdateMapCertificate:
    """Feasibility evidence for a state-independent linear update map.

    The map is fitted on the probe constraints Lambda(P_phi) =
    <phi|A|phi> P_phi and the residual is the worst Frobenius violation
    over the probes plus a canonical validation set.  A large residual
    certifies that no state-independent linear map reproduces the trivial
    update for this POVM element.
    """

    dimension: int
    residual: float
    candidate: CPMapCandidate
    feasible_tol: float = 1e-8

    @property
    def feasible(self) -> bool:
        return self.residual < self.feasible_tol

    def record_fields(self) -> dict:
        return {
            "check": "update_map",
            "d": self.dimension,
            "residual": self.residual,
            "feasible": self.feasible,
        }


def update_map_feasibility(element: np.ndarray, probe_states: Sequence[PureState]
                           ) -> UpdateMapCertificate:
    """Solve for a linear update map consistent with the trivial update.

    ``probe_states`` must span the Hermitian operator space (d^2 states
    suffice).  The fitted map is then validated on additional canonical
    states; the certificate's residual is the worst violation seen.
    """
    a = np.asarray(element, dtype=complex)
    dim = a.shape[0]
    basis = hermitian_basis(dim)

    probe_vecs = [np.asarray(p.amplitudes) for p in probe_states]
    design = np.array([hermitian_coords(np.outer(v, v.conj()), basis)
                       for v in probe_vecs])
    if np.linalg.matrix_rank(design, tol=1e-9) < dim * dim:
        raise ValueError("probe states do not span the Hermitian operator space")

    targets = np.array([
        float(np.real(np.vdot(v, a @ v))) * hermitian_coords(np.outer(v, v.conj()), basis)
        for v in probe_vecs
    ])
    solution, *_ = np.linalg.lstsq(design, targets, rcond=None)
    lmap = solution.T  # acts on Hermitian coordinates from the left

    candidate = CPMapCandidate(dim, lmap)
    validation = probe_vecs + canonical_probe_states(dim)
    space = FactorSpace((dim,))
    extra = RandomStream(0x51D, experiment=dim)
    validation = validation + [random_pure_state(space, extra).amplitudes
                               for _ in range(2 * dim)]
    residual = 0.0
    for v in validation:
        proj = np.outer(v, v.conj())
        want = float(np.real(np.vdot(v, a @ v))) * proj
        got = candidate.apply(proj)
        residual = max(residual, float(np.linalg.norm(got - want)))
    return UpdateMapCertificate(dim, residual, candidate)


QUBIT_PROBE_STATES = tuple(
    PureState.normalized(FactorSpace((2,)), v) for v in (
        np.array([1.0, 0.0]),
        np.array([0.0, 1.0]),
        np.array([1.0, 1.0]) / math.sqrt(2.0),
        np.array([1.0, 1j]) / math.sqrt(2.0),
    )
)
