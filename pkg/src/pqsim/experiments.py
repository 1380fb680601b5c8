"""Executable counterexamples, demonstrations, and state-estimation protocols.

Every experiment is a deterministic function of its parameters and the
seed carried by the supplied :class:`~pqsim.qcore.RandomStream`: identical
inputs reproduce identical verdicts and evidence.  Experiments return
either a :class:`Certificate` (pass/fail constructions) or an
:class:`EstimationReport` (statistical protocols); both serialize to the
CLI's record format through ``record_fields``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.stats

from .devices import entropy_meter, overlap_test, readout_density, sample_povm
from .opf import (
    QUBIT_PROBE_STATES,
    entropy_meter_measurement,
    hermitian_basis,
    hermitian_coords,
    product_form_witness,
    update_map_feasibility,
)
from .qcore import (
    DensityMatrix,
    Ensemble,
    FactorSpace,
    HermitianObservable,
    POVMSet,
    PureState,
    RandomStream,
    fidelity,
    measure_projective,
    random_pure_state,
    schmidt_decompose,
    tensor_product,
)

VIOLATION_CERTIFIED = "VIOLATION_CERTIFIED"
CONSISTENT = "CONSISTENT"
FAIL = "FAIL"

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class Certificate:
    """Verdict plus numeric evidence for one experiment run."""

    experiment: str
    verdict: str
    evidence: dict
    seed: int

    def record_fields(self) -> dict:
        fields = {"experiment": self.experiment, "verdict": self.verdict,
                  "seed": self.seed}
        fields.update(self.evidence)
        return fields


@dataclass(frozen=True)
class OutcomeStat:
    """Frequency estimate with its confidence interval and trial count."""

    frequency: float
    interval: tuple[float, float]
    trials: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trial count must be at least 1")
        lo, hi = self.interval
        if not lo - 1e-12 <= self.frequency <= hi + 1e-12:
            raise ValueError("interval must contain the frequency estimate")


@dataclass(frozen=True)
class EstimationReport:
    """Result of a statistical estimation protocol.

    ``recovered`` holds (amplitudes, weight) pairs for ensemble estimates;
    ``estimate_matrix`` holds the reconstructed density matrix for
    tomography.  ``passed`` is set only when the protocol's own declared
    criterion is met by the computed numbers.
    """

    protocol: str
    outcome_stats: tuple[OutcomeStat, ...]
    metric_name: str
    metric_value: float
    confidence: float
    threshold: float
    passed: bool
    seed: int
    status: str = "OK"
    estimate_matrix: np.ndarray | None = None
    recovered: tuple[tuple[np.ndarray, float], ...] = ()
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.metric_value < 0:
            raise ValueError("achieved metric must be nonnegative")

    def record_fields(self) -> dict:
        fields = {
            "experiment": self.protocol,
            "metric": self.metric_name,
            "metric_value": self.metric_value,
            "confidence": self.confidence,
            "threshold": self.threshold,
            "passed": self.passed,
            "status": self.status,
            "seed": self.seed,
            "outcome_frequencies": [s.frequency for s in self.outcome_stats],
            "outcome_trials": [s.trials for s in self.outcome_stats],
            "recovered_weights": [w for _, w in self.recovered],
        }
        fields.update(self.extras)
        return fields


def wilson_interval(successes: int, trials: int, confidence: float) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    z = float(scipy.stats.norm.ppf(0.5 + confidence / 2.0))
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    # the score interval always contains phat; enforce against float fuzz
    return (max(min(center - half, phat), 0.0), min(max(center + half, phat), 1.0))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


# ---------------------------------------------------------------------------
# Refutation experiments
# ---------------------------------------------------------------------------

def fpvnem_refutation(d: int, m: int, samples: int, rng: RandomStream,
                      include_entangled: bool = True) -> Certificate:
    """Finite-precision entropy meter vs the quadratic measurement form.

    Checks (i) the outcome set is bounded by ceil(2^m log2 d) + 1, (ii) the
    outcome-0 OPF equals 1 on random product states, (iii) it equals 0 on a
    maximally entangled state, and (iv) no single operator Q reproduces it
    as <psi|Q|psi> (large least-squares residual).  With
    ``include_entangled=False`` only product states are probed, and no
    violation is observable.
    """
    if not 2 <= d <= 4:
        raise ValueError("refutation runs at 2 <= d <= 4")
    if m > 8:
        raise ValueError("precision capped at m <= 8 for outcome enumeration")
    space = FactorSpace((d, d))
    factor = FactorSpace((d,))
    measurement = entropy_meter_measurement(space, (0,), precision=m)
    bound = math.ceil(2 ** m * math.log2(d)) + 1
    outcome_count = len(measurement.outcomes)
    f0 = measurement.outcomes[0]

    worst_product = 0.0
    for trial in range(samples):
        child = rng.derive(trial)
        psi = tensor_product(random_pure_state(factor, child),
                             random_pure_state(factor, child))
        worst_product = max(worst_product, abs(f0(psi) - 1.0))

    evidence = {
        "d": d, "m": m, "samples": samples,
        "outcome_count": outcome_count, "outcome_bound": bound,
        "max_product_deviation": worst_product,
    }

    if not include_entangled:
        residual = _product_probe_residual(f0, d)
        evidence["residual"] = residual
        verdict = CONSISTENT if (outcome_count <= bound and worst_product <= 1e-9
                                 and residual < 1e-6) else FAIL
        return Certificate("fpvnem", verdict, evidence, rng.seed)

    bell_amps = np.eye(d).reshape(-1) / math.sqrt(d)
    bell = PureState(space, bell_amps)
    f0_bell = f0(bell)
    witness = product_form_witness(f0)
    evidence.update({"f0_bell": f0_bell, "residual": witness.residual})

    ok = (outcome_count <= bound and worst_product <= 1e-9
          and f0_bell == 0.0 and witness.residual > 0.1)
    return Certificate("fpvnem", VIOLATION_CERTIFIED if ok else FAIL,
                       evidence, rng.seed)


def _product_probe_residual(f, d: int) -> float:
    """Best quadratic-form fit of an OPF restricted to product states."""
    eye = np.eye(d, dtype=complex)
    factor_probes = [eye[j] for j in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            factor_probes.append((eye[j] + eye[k]) / math.sqrt(2))
            factor_probes.append((eye[j] - eye[k]) / math.sqrt(2))
            factor_probes.append((eye[j] + 1j * eye[k]) / math.sqrt(2))
    space = FactorSpace((d, d))
    probes = [PureState.normalized(space, np.kron(a, b))
              for a in factor_probes for b in factor_probes]
    basis = hermitian_basis(d * d)
    design = np.array([hermitian_coords(p.density(), basis) for p in probes])
    values = np.array([f(p) for p in probes])
    coeffs, *_ = np.linalg.lstsq(design, values, rcond=None)
    return float(np.max(np.abs(values - design @ coeffs)))


_SPOD_ELEMENTS = {
    "projector0": np.array([[1, 0], [0, 0]], dtype=complex),
    "half_identity": np.eye(2, dtype=complex) / 2,
    "zero": np.zeros((2, 2), dtype=complex),
}


def spod_update_refutation(rng: RandomStream, element: str = "projector0") -> Certificate:
    """POVM-statistics device vs the linear state-update postulate.

    First confirms the trivial update across repeated applications, then
    certifies (for a generic POVM element) that no state-independent
    linear map reproduces it; the half-identity and zero controls remain
    feasible.
    """
    if element not in _SPOD_ELEMENTS:
        raise ValueError(f"element must be one of {sorted(_SPOD_ELEMENTS)}")
    space = FactorSpace((2, 2))
    min_update_fidelity = 1.0
    for trial in range(100):
        child = rng.derive(trial)
        psi = random_pure_state(space, child)
        before = DensityMatrix.from_pure(psi)
        b = np.diag([0.2 + 0.6 * child.uniform(), 0.2 + 0.6 * child.uniform()])
        sample_povm(psi, (0,), POVMSet((b, np.eye(2) - b)), child)
        after = DensityMatrix.from_pure(psi)  # devices never touch the state
        min_update_fidelity = min(min_update_fidelity, fidelity(before, after))

    cert = update_map_feasibility(_SPOD_ELEMENTS[element], QUBIT_PROBE_STATES)
    control = update_map_feasibility(_SPOD_ELEMENTS["half_identity"], QUBIT_PROBE_STATES)

    evidence = {
        "element": element,
        "min_update_fidelity": min_update_fidelity,
        "residual": cert.residual,
        "control_residual": control.residual,
    }
    trivial_ok = min_update_fidelity >= 1.0 - 1e-12
    if not trivial_ok or control.residual >= 1e-10:
        verdict = FAIL
    elif cert.residual > 0.1:
        verdict = VIOLATION_CERTIFIED
    elif cert.feasible:
        verdict = CONSISTENT
    else:
        verdict = FAIL
    return Certificate("spod-update", verdict, evidence, rng.seed)


def no_signalling_demo(rng: RandomStream,
                       schmidt_weights: Sequence[float] = (0.5, 0.5)) -> Certificate:
    """Remote measurement made visible through a local entropy meter.

    Prepares sum_i sqrt(p_i)|ii> on two qubits, reads the entropy of the
    first factor, performs a projective measurement of the second factor
    in the Schmidt basis, and reads the entropy again.  Any change is a
    signal that quantum measurements alone could never produce.
    """
    weights = np.asarray(schmidt_weights, dtype=float)
    if weights.size not in (1, 2) or np.any(weights < 0):
        raise ValueError("schmidt_weights must be one or two nonnegative numbers")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("schmidt_weights must sum to 1")
    space = FactorSpace((2, 2))
    amps = np.zeros(4)
    amps[0] = math.sqrt(weights[0])
    if weights.size == 2:
        amps[3] = math.sqrt(weights[1])
    state = PureState(space, amps)

    before = entropy_meter(state, (0,), alpha=1.0).value

    dec = schmidt_decompose(state, (0,))
    basis = _complete_basis([chi.amplitudes for chi in dec.right_states], 2)
    observable = HermitianObservable(sum(
        (k + 1.0) * np.outer(b, b.conj()) for k, b in enumerate(basis)))
    outcome, post = measure_projective(state, observable, (1,), rng)
    after = entropy_meter(post, (0,), alpha=1.0).value

    evidence = {
        "weights": [float(w) for w in weights],
        "entropy_before": before,
        "entropy_after": after,
        "remote_outcome": outcome,
    }
    verdict = VIOLATION_CERTIFIED if abs(before - after) > 1e-6 else CONSISTENT
    return Certificate("no-signalling", verdict, evidence, rng.seed)


def _complete_basis(vectors: Sequence[np.ndarray], dim: int) -> list[np.ndarray]:
    """Extend orthonormal vectors to a full orthonormal basis."""
    basis = [np.asarray(v, dtype=complex) for v in vectors]
    for j in range(dim):
        candidate = np.zeros(dim, dtype=complex)
        candidate[j] = 1.0
        for b in basis:
            candidate = candidate - np.vdot(b, candidate) * b
        norm = np.linalg.norm(candidate)
        if norm > 1e-8:
            basis.append(candidate / norm)
        if len(basis) == dim:
            break
    return basis


def cloning_demo(d: int, rng: RandomStream, precision: int | None = None,
                 trials: int = 100, success_quota: float = 0.95) -> Certificate:
    """State readout as a cloning machine for unknown pure states.

    Each trial reads out the reduced density matrix of an unknown state,
    reconstructs the state from the rank-1 description, and prepares two
    copies.  Infinite precision demands copy fidelity >= 1 - 1e-9 on every
    trial; at finite precision m the quota is fidelity >= 1 - 10*2^-m on
    at least ``success_quota`` of the trials.
    """
    if not 2 <= d <= 4:
        raise ValueError("cloning demo runs at 2 <= d <= 4")
    factor = FactorSpace((d,))
    blank = PureState.basis_state(FactorSpace((2,)), 0)
    threshold = 1.0 - 1e-9 if precision is None else 1.0 - 10.0 * 2.0 ** (-precision)

    fidelities = []
    for trial in range(trials):
        child = rng.derive(trial)
        psi = random_pure_state(factor, child)
        joint = tensor_product(psi, blank)
        description = readout_density(joint, (0,), precision=precision)
        vals, vecs = np.linalg.eigh(description.matrix)
        if precision is None and (vals[-1] < 1.0 - 1e-9 or vals[-2] > 1e-9):
            return Certificate("cloning", FAIL,
                               {"d": d, "trial": trial, "rank_defect": float(vals[-2])},
                               rng.seed)
        reconstructed = PureState.normalized(factor, vecs[:, -1])
        copies = (reconstructed, PureState.normalized(factor, vecs[:, -1]))
        overlap = abs(np.vdot(copies[0].amplitudes, psi.amplitudes)) ** 2
        overlap2 = abs(np.vdot(copies[1].amplitudes, psi.amplitudes)) ** 2
        fidelities.append(min(overlap, overlap2))

    successes = sum(f >= threshold for f in fidelities)
    required = trials if precision is None else math.ceil(success_quota * trials)
    evidence = {
        "d": d, "trials": trials,
        "precision": -1 if precision is None else precision,
        "fidelity_threshold": threshold,
        "min_fidelity": min(fidelities),
        "successes": successes,
    }
    verdict = VIOLATION_CERTIFIED if successes >= required else FAIL
    return Certificate("cloning", verdict, evidence, rng.seed)


# ---------------------------------------------------------------------------
# Estimation protocols
# ---------------------------------------------------------------------------

def _source_density(source: Union[Ensemble, PureState]) -> np.ndarray:
    if isinstance(source, Ensemble):
        return source.density().entries
    return source.density()


def tomography_estimate(source: Union[Ensemble, PureState], n_trials: int,
                        rng: RandomStream, confidence: float = 0.95,
                        threshold: float = 0.02) -> EstimationReport:
    """Qubit state tomography from three informationally complete outcomes.

    Splits the trial budget across the +1 eigenprojectors of the three
    Pauli axes, reconstructs the Bloch vector from the frequencies, and
    projects the linear-inversion estimate onto the physical cone
    (eigenvalue clipping plus trace renormalization).
    """
    space = source.space if isinstance(source, Ensemble) else source.space
    if space.total_dim != 2:
        raise ValueError("tomography protocol is implemented for d = 2")
    if n_trials < 100:
        raise ValueError("need at least 100 trials for the confidence recipe")

    rho_true = _source_density(source)
    budgets = [n_trials // 3 + (1 if i < n_trials % 3 else 0) for i in range(3)]
    stats = []
    bloch = np.zeros(3)
    for i, (pauli, budget) in enumerate(zip(PAULI, budgets)):
        q = (np.eye(2) + pauli) / 2.0
        p = float(np.trace(q @ rho_true).real)
        successes = int(rng.derive(i).generator.binomial(budget, min(max(p, 0.0), 1.0)))
        freq = successes / budget
        stats.append(OutcomeStat(freq, wilson_interval(successes, budget, confidence),
                                 budget))
        bloch[i] = 2.0 * freq - 1.0

    raw = (np.eye(2, dtype=complex)
           + bloch[0] * PAULI[0] + bloch[1] * PAULI[1] + bloch[2] * PAULI[2]) / 2.0
    estimate = _project_to_physical(raw)
    metric = trace_distance(estimate, rho_true)
    return EstimationReport(
        protocol="tomography", outcome_stats=tuple(stats),
        metric_name="trace_distance", metric_value=metric,
        confidence=confidence, threshold=threshold,
        passed=metric < threshold, seed=rng.seed, estimate_matrix=estimate,
    )


def _project_to_physical(matrix: np.ndarray) -> np.ndarray:
    """Nearest PSD unit-trace matrix by eigenvalue clipping."""
    sym = (matrix + matrix.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    if vals.sum() <= 0:
        return np.eye(matrix.shape[0], dtype=complex) / matrix.shape[0]
    vals /= vals.sum()
    return (vecs * vals) @ vecs.conj().T


def _phase_fixed(vector: np.ndarray) -> np.ndarray:
    """Normalize the global phase: largest component becomes real positive."""
    idx = int(np.argmax(np.abs(vector)))
    phase = vector[idx] / abs(vector[idx])
    return vector / phase


def _state_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max amplitude-component distance after global-phase alignment."""
    inner = np.vdot(a, b)
    phase = inner / abs(inner) if abs(inner) > 1e-12 else 1.0
    return float(np.max(np.abs(a * phase - b)))


def ensemble_estimate_readout(source: Ensemble, n_draws: int, rng: RandomStream,
                              precision_schedule: Sequence[int] | None = None,
                              confidence: float = 0.95,
                              threshold: float = 0.05) -> EstimationReport:
    """Recover a finite ensemble by repeated state readout.

    Draws states from the ensemble and clusters the readout descriptions;
    identical descriptions identify identical members at infinite
    precision, while at finite precision two reconstructions are
    identified when their phase-aligned amplitudes differ by less than
    2^-(m-1), the quantization cell size.  The achieved metric is the
    total variation sum |p_i - p_i^e| against the true weights.
    """
    if n_draws < 100:
        raise ValueError("need at least 100 draws")
    members = source.members
    weights = source.weights

    if precision_schedule is not None and len(precision_schedule) == 0:
        raise ValueError("precision schedule must be nonempty")

    # group draws by (member, precision); the draw sequence is multinomial
    groups: dict[tuple[int, int | None], int] = {}
    if precision_schedule is None:
        counts = rng.derive(0).generator.multinomial(n_draws, weights)
        for r, c in enumerate(counts):
            if c > 0:
                groups[(r, None)] = int(c)
    else:
        schedule = list(precision_schedule)
        member_draws = rng.derive(0).generator.choice(
            len(members), size=n_draws, p=weights)
        for t, r in enumerate(member_draws):
            m_t = schedule[min(t, len(schedule) - 1)]
            key = (int(r), int(m_t))
            groups[key] = groups.get(key, 0) + 1

    # one readout per distinct (member, precision) group
    clusters: list[dict] = []
    for (r, m_t), count in sorted(groups.items(), key=lambda kv: -kv[1]):
        state = members[r][0]
        description = readout_density(state, state.space.indices(), precision=m_t)
        vals, vecs = np.linalg.eigh(description.matrix)
        reconstructed = _phase_fixed(vecs[:, -1])
        tol = 0.0 if m_t is None else 2.0 ** (-(m_t - 1))
        placed = False
        for cluster in clusters:
            cell = max(tol, cluster["tol"], 1e-9)
            if _state_distance(cluster["state"], reconstructed) < cell:
                cluster["count"] += count
                placed = True
                break
        if not placed:
            clusters.append({"state": reconstructed, "count": count, "tol": tol})

    recovered = tuple((c["state"], c["count"] / n_draws) for c in clusters)
    stats = tuple(
        OutcomeStat(c["count"] / n_draws,
                    wilson_interval(c["count"], n_draws, confidence), n_draws)
        for c in clusters)

    # match recovered clusters to true members for the metric
    estimated = {r: 0.0 for r in range(len(members))}
    ghost_mass = 0.0
    max_member_deviation = 0.0
    for state, weight in recovered:
        distances = [_state_distance(state, mem.amplitudes) for mem, _ in members]
        best = int(np.argmin(distances))
        cell = 2.0 ** (-(min(s for s in (precision_schedule or [60])) - 1))
        if distances[best] < max(cell, 1e-6):
            estimated[best] += weight
            max_member_deviation = max(max_member_deviation, distances[best])
        else:
            ghost_mass += weight
    total_variation = sum(abs(weights[r] - estimated[r]) for r in estimated) + ghost_mass

    return EstimationReport(
        protocol="ensemble-readout", outcome_stats=stats,
        metric_name="total_variation", metric_value=total_variation,
        confidence=confidence, threshold=threshold,
        passed=total_variation < threshold, seed=rng.seed,
        recovered=recovered,
        extras={"members": len(members), "draws": n_draws,
                "max_member_deviation": max_member_deviation,
                "finite_precision": precision_schedule is not None},
    )


def recovered_supports_disjoint(a: EstimationReport, b: EstimationReport,
                                atol: float = 1e-6) -> bool:
    """Whether two ensemble estimates share no recovered state (up to phase)."""
    for state_a, _ in a.recovered:
        for state_b, _ in b.recovered:
            if _state_distance(state_a, state_b) < atol:
                return False
    return True


# ---------------------------------------------------------------------------
# Overlap-device estimation
# ---------------------------------------------------------------------------

def _bloch_vector(amplitudes: np.ndarray) -> np.ndarray:
    a, b = amplitudes
    return np.array([2 * (np.conj(a) * b).real, 2 * (np.conj(a) * b).imag,
                     abs(a) ** 2 - abs(b) ** 2])


def _bloch_state(vector: np.ndarray) -> np.ndarray:
    v = vector / np.linalg.norm(vector)
    theta = math.acos(min(max(v[2], -1.0), 1.0))
    phi = math.atan2(v[1], v[0])
    return np.array([math.cos(theta / 2), math.sin(theta / 2) * complex(math.cos(phi),
                                                                        math.sin(phi))])


def fibonacci_net(size: int) -> list[np.ndarray]:
    """Deterministic quasi-uniform net of qubit states on the Bloch sphere."""
    golden = (1 + math.sqrt(5)) / 2
    states = []
    for i in range(size):
        z = 1.0 - 2.0 * (i + 0.5) / size
        phi = 2 * math.pi * i / golden
        r = math.sqrt(max(1.0 - z * z, 0.0))
        states.append(_bloch_state(np.array([r * math.cos(phi), r * math.sin(phi), z])))
    return states


def _net_size_for(epsilon: float) -> int:
    # overlap > 1 - eps means Bloch angle < arccos(1 - 2 eps); the covering
    # radius of an N-point Fibonacci net is below 3.5/sqrt(N)
    theta = math.acos(1.0 - 2.0 * epsilon)
    return max(int(math.ceil((3.5 / theta) ** 2)), 8)


def ensemble_estimate_overlap(source: Ensemble, epsilon_schedule: Sequence[float],
                              n_draws: int, rng: RandomStream,
                              confidence: float = 0.95, threshold: float = 0.05,
                              net_cap: int = 4000) -> EstimationReport:
    """Recover a qubit ensemble using only threshold overlap tests.

    Each round probes every draw with the hard overlap device against a
    deterministic net of target states at acceptance threshold 1 - eps;
    the firing pattern identifies the drawn state to within the net
    resolution.  Rounds run at decreasing eps; the final round's clusters
    give the estimate (cluster state = Bloch centroid of firing targets).
    """
    if source.space.total_dim != 2:
        raise ValueError("overlap estimation is implemented for d = 2")
    schedule = [float(e) for e in epsilon_schedule]
    if len(schedule) == 0:
        raise ValueError("epsilon schedule must be nonempty")
    if any(not 0.0 < e < 1.0 for e in schedule):
        raise ValueError("epsilon values must lie in (0, 1)")

    members = source.members
    weights = source.weights
    counts = rng.derive(0).generator.multinomial(n_draws, weights)
    space = source.space

    rounds = []
    final_clusters: dict[frozenset, dict] = {}
    for round_idx, eps in enumerate(schedule):
        size = _net_size_for(eps)
        if size > net_cap:
            return EstimationReport(
                protocol="ensemble-overlap", outcome_stats=(),
                metric_name="total_variation", metric_value=0.0,
                confidence=confidence, threshold=threshold, passed=False,
                seed=rng.seed, status=FAIL,
                extras={"net_cap": net_cap, "requested_net": size, "epsilon": eps})
        net = [PureState(space, v) for v in fibonacci_net(size)]
        rounds.append({"epsilon": eps, "net_size": size})

        pattern_cache: dict[bytes, frozenset] = {}
        clusters: dict[frozenset, dict] = {}
        for r, count in enumerate(counts):
            if count == 0:
                continue
            state = members[r][0]
            key = state.amplitudes.tobytes()
            if key not in pattern_cache:
                pattern_cache[key] = frozenset(
                    j for j, phi in enumerate(net)
                    if overlap_test(state, state.space.indices(), phi, 1.0 - eps).value == 1)
            fired = pattern_cache[key]
            if not fired:
                fired = frozenset({-1})  # net failed to cover: ghost cluster
            entry = clusters.setdefault(fired, {"count": 0})
            entry["count"] += int(count)
        for fired, entry in clusters.items():
            if -1 in fired:
                entry["state"] = None
                continue
            centroid = np.sum([_bloch_vector(net[j].amplitudes) for j in fired], axis=0)
            entry["state"] = _phase_fixed(_bloch_state(centroid))
        final_clusters = clusters

    recovered = tuple((entry["state"], entry["count"] / n_draws)
                      for entry in final_clusters.values()
                      if entry["state"] is not None)
    stats = tuple(
        OutcomeStat(entry["count"] / n_draws,
                    wilson_interval(entry["count"], n_draws, confidence), n_draws)
        for entry in final_clusters.values())

    final_eps = schedule[-1]
    estimated = {r: 0.0 for r in range(len(members))}
    ghost_mass = sum(entry["count"] / n_draws for entry in final_clusters.values()
                     if entry["state"] is None)
    worst_overlap = 1.0
    for state, weight in recovered:
        overlaps = [abs(np.vdot(state, mem.amplitudes)) ** 2 for mem, _ in members]
        best = int(np.argmax(overlaps))
        if overlaps[best] > 1.0 - final_eps:
            estimated[best] += weight
            worst_overlap = min(worst_overlap, overlaps[best])
        else:
            ghost_mass += weight
    total_variation = sum(abs(weights[r] - estimated[r]) for r in estimated) + ghost_mass

    return EstimationReport(
        protocol="ensemble-overlap", outcome_stats=stats,
        metric_name="total_variation", metric_value=total_variation,
        confidence=confidence, threshold=threshold,
        passed=total_variation < threshold, seed=rng.seed,
        recovered=recovered,
        extras={"rounds": len(rounds), "final_epsilon": final_eps,
                "final_net_size": rounds[-1]["net_size"],
                "min_matched_overlap": worst_overlap,
                "draws": n_draws},
    )
