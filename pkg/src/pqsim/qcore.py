"""Finite-dimensional quantum states, linear algebra, and seeded randomness.

Everything downstream (device catalog, outcome probability functions,
experiments) is built on the value types defined here.  All types are
immutable after construction and safe to share across threads; randomness
is confined to explicit :class:`RandomStream` arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

# Construction tolerances.  These are contracts, not knobs: validation uses
# them to reject unphysical inputs rather than to silently repair them.
NORM_ATOL = 1e-9
HERMITIAN_ATOL = 1e-9
TRACE_ATOL = 1e-9
EIGENVALUE_FLOOR = 1e-12
DEGENERACY_RTOL = 1e-9
PROJECTOR_ATOL = 1e-8
SELECTION_FLOOR = 1e-12  # outcomes below this probability are never sampled


@dataclass(frozen=True)
class FactorSpace:
    """Tensor factorization C^{d_1} x ... x C^{d_n} with every d_i >= 2."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 1:
            raise ValueError("FactorSpace needs at least one factor")
        if any(d < 2 for d in dims):
            raise ValueError(f"every factor dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_factors(self) -> int:
        return len(self.dims)

    def indices(self) -> tuple[int, ...]:
        return tuple(range(len(self.dims)))

    def complement(self, subset: Sequence[int]) -> tuple[int, ...]:
        chosen = set(subset)
        return tuple(i for i in range(len(self.dims)) if i not in chosen)

    def subspace(self, subset: Sequence[int]) -> "FactorSpace":
        return FactorSpace(tuple(self.dims[i] for i in subset))


def _normalize_subset(space: FactorSpace, subset: Union[int, Sequence[int]]) -> tuple[int, ...]:
    """Validate a subsystem index set and return it as a sorted tuple."""
    if isinstance(subset, (int, np.integer)):
        subset = (int(subset),)
    out = tuple(sorted(int(i) for i in subset))
    if len(out) == 0:
        raise ValueError("subsystem index set must be nonempty")
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate subsystem indices in {out}")
    if out[0] < 0 or out[-1] >= space.n_factors:
        raise ValueError(f"subsystem indices {out} out of range for {space.n_factors} factors")
    return out


class PureState:
    """Normalized complex amplitude vector over a declared factorization.

    The amplitudes are renormalized exactly at construction (construction
    rejects vectors whose norm deviates from 1 by more than ``NORM_ATOL``)
    and are exposed read-only.  Equality of physical states is always up to
    a global phase; use :meth:`equals_up_to_phase`.
    """

    __slots__ = ("space", "amplitudes")

    def __init__(self, space: FactorSpace, amplitudes):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size != space.total_dim:
            raise ValueError(
                f"amplitude vector of length {amps.size} does not match total_dim {space.total_dim}"
            )
        nrm = float(np.linalg.norm(amps))
        if abs(nrm - 1.0) > NORM_ATOL:
            raise ValueError(f"state norm {nrm} deviates from 1 by more than {NORM_ATOL}")
        amps = amps / nrm
        amps.setflags(write=False)
        self.space = space
        self.amplitudes = amps

    @classmethod
    def normalized(cls, space: FactorSpace, amplitudes) -> "PureState":
        """Construct from any nonzero vector, dividing out its norm."""
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        nrm = float(np.linalg.norm(amps))
        if nrm <= 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(space, amps / nrm)

    @classmethod
    def basis_state(cls, space: FactorSpace, labels: Union[int, Sequence[int]]) -> "PureState":
        """Computational basis ket, by flat index or per-factor labels."""
        if isinstance(labels, (int, np.integer)):
            flat = int(labels)
        else:
            labels = tuple(int(x) for x in labels)
            if len(labels) != space.n_factors:
                raise ValueError(f"need one label per factor, got {labels} for dims {space.dims}")
            flat = 0
            for lab, d in zip(labels, space.dims):
                if not 0 <= lab < d:
                    raise ValueError(f"label {lab} out of range for dimension {d}")
                flat = flat * d + lab
        amps = np.zeros(space.total_dim, dtype=complex)
        amps[flat] = 1.0
        return cls(space, amps)

    def density(self) -> np.ndarray:
        """Rank-1 projector |psi><psi| as a plain array."""
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def equals_up_to_phase(self, other: "PureState", atol: float = 1e-9) -> bool:
        if self.space.dims != other.space.dims:
            return False
        return 1.0 - abs(self.overlap(other)) <= atol

    def __repr__(self):
        return f"PureState(dims={self.space.dims})"


class DensityMatrix:
    """Hermitian, positive semi-definite, unit-trace complex matrix."""

    __slots__ = ("dim", "entries")

    def __init__(self, entries):
        mat = np.array(entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_ATOL:
            raise ValueError("density matrix is not Hermitian within tolerance")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"density matrix trace {tr} deviates from 1")
        if float(np.linalg.eigvalsh(mat)[0]) < -NORM_ATOL:
            raise ValueError("density matrix has a negative eigenvalue beyond tolerance")
        mat.setflags(write=False)
        self.dim = mat.shape[0]
        self.entries = mat

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityMatrix":
        return cls(state.density())

    @classmethod
    def from_ensemble(cls, ensemble: "Ensemble") -> "DensityMatrix":
        dim = ensemble.members[0][0].space.total_dim
        rho = np.zeros((dim, dim), dtype=complex)
        for state, weight in ensemble.members:
            rho += weight * state.density()
        return cls(rho)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


@dataclass(frozen=True)
class Ensemble:
    """Finite weighted list of pure states: a proper mixture."""

    members: tuple[tuple[PureState, float], ...]

    def __post_init__(self):
        members = tuple((s, float(w)) for s, w in self.members)
        if len(members) == 0:
            raise ValueError("ensemble must have at least one member")
        if any(w <= 0.0 for _, w in members):
            raise ValueError("ensemble weights must be positive")
        total = sum(w for _, w in members)
        if abs(total - 1.0) > NORM_ATOL:
            raise ValueError(f"ensemble weights sum to {total}, not 1")
        dims0 = members[0][0].space.dims
        if any(s.space.dims != dims0 for s, _ in members):
            raise ValueError("all ensemble members must share one FactorSpace")
        object.__setattr__(self, "members", members)

    @property
    def space(self) -> FactorSpace:
        return self.members[0][0].space

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.members])

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_ensemble(self)


class HermitianObservable:
    """Hermitian matrix with its eigenvalues clustered into eigenspaces.

    Numerical eigensolvers split exact degeneracies, so eigenvalues within
    ``DEGENERACY_RTOL * (1 + |lambda|)`` of each other are merged into one
    cluster with a single projector.  Clusters are ordered ascending.
    """

    __slots__ = ("dim", "entries", "eigenvalues", "projectors")

    def __init__(self, entries):
        mat = np.array(entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"observable must be square, got shape {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_ATOL:
            raise ValueError("observable is not Hermitian within tolerance")
        mat.setflags(write=False)
        self.dim = mat.shape[0]
        self.entries = mat

        w, v = np.linalg.eigh(mat)
        clusters: list[list[int]] = [[0]]
        for i in range(1, len(w)):
            lam = w[clusters[-1][0]]
            if abs(w[i] - lam) < DEGENERACY_RTOL * (1.0 + abs(lam)):
                clusters[-1].append(i)
            else:
                clusters.append([i])
        values = []
        projectors = []
        for idx in clusters:
            vecs = v[:, idx]
            proj = vecs @ vecs.conj().T
            proj.setflags(write=False)
            values.append(float(np.mean(w[idx])))
            projectors.append(proj)
        self.eigenvalues = tuple(values)
        self.projectors = tuple(projectors)

        resolution = sum(self.projectors)
        if np.max(np.abs(resolution - np.eye(self.dim))) > NORM_ATOL:
            raise ValueError("eigenspace projectors do not resolve the identity")
        for i, p in enumerate(self.projectors):
            for j, q in enumerate(self.projectors):
                expect = p if i == j else np.zeros_like(p)
                if np.max(np.abs(p @ q - expect)) > PROJECTOR_ATOL:
                    raise ValueError("eigenspace projectors are not orthogonal")

    @property
    def n_clusters(self) -> int:
        return len(self.eigenvalues)

    def __repr__(self):
        return f"HermitianObservable(dim={self.dim}, clusters={self.n_clusters})"


@dataclass(frozen=True)
class POVMSet:
    """Finite list of positive semi-definite operators summing to identity."""

    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        elems = []
        for a in self.elements:
            mat = np.array(a, dtype=complex)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError("POVM elements must be square matrices")
            if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_ATOL:
                raise ValueError("POVM element is not Hermitian within tolerance")
            if float(np.linalg.eigvalsh(mat)[0]) < -NORM_ATOL:
                raise ValueError("POVM element has a negative eigenvalue beyond tolerance")
            mat.setflags(write=False)
            elems.append(mat)
        if len(elems) == 0:
            raise ValueError("POVM must have at least one element")
        dim = elems[0].shape[0]
        if any(e.shape[0] != dim for e in elems):
            raise ValueError("POVM elements must share one dimension")
        total = sum(elems)
        if np.max(np.abs(total - np.eye(dim))) > NORM_ATOL:
            raise ValueError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", tuple(elems))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self):
        return len(self.elements)


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Bi-orthogonal expansion psi = sum_i sqrt(p_i) phi_i x chi_i."""

    weights: tuple[float, ...]
    left_states: tuple[PureState, ...]
    right_states: tuple[PureState, ...]

    @property
    def rank(self) -> int:
        return len(self.weights)


class RandomStream:
    """Reproducible random source keyed by (seed, experiment, trial).

    Identical keys yield identical sample sequences across runs and
    platforms.  A stream is stateful and must not be shared between
    concurrent consumers; derive per-trial children instead.
    """

    __slots__ = ("seed", "experiment", "trial", "_gen")

    def __init__(self, seed: int, experiment: int = 0, trial: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.experiment = int(experiment)
        self.trial = int(trial)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.experiment, self.trial))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def stream_id(self) -> tuple[int, int]:
        return (self.experiment, self.trial)

    def derive(self, trial: int, experiment: int | None = None) -> "RandomStream":
        """Fresh stream for a sub-task; never reuses this stream's state."""
        exp = self.experiment if experiment is None else experiment
        return RandomStream(self.seed, experiment=exp, trial=trial)

    @property
    def generator(self) -> np.random.Generator:
        """Underlying numpy generator, for bulk draws (binomial etc.)."""
        return self._gen

    def uniform(self) -> float:
        return float(self._gen.random())

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def complex_normal(self, size: int) -> np.ndarray:
        block = self._gen.standard_normal(2 * size)
        return block[:size] + 1j * block[size:]

    def choose(self, probabilities) -> int:
        """Inverse-CDF sample over a full-precision probability vector.

        Entries below ``SELECTION_FLOOR`` are never selected.  The vector
        is used as-is; probabilities are not quantized before sampling.
        """
        p = np.asarray(probabilities, dtype=float)
        if p.size == 0:
            raise ValueError("cannot sample from an empty probability vector")
        p = np.where(p < SELECTION_FLOOR, 0.0, p)
        cdf = np.cumsum(p)
        total = cdf[-1]
        if total <= 0.0:
            raise ValueError("all probabilities are below the selection floor")
        u = self.uniform() * total
        idx = int(np.searchsorted(cdf, u, side="right"))
        if idx >= p.size or p[idx] == 0.0:
            idx = int(np.max(np.nonzero(p)[0]))
        return idx

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


# ---------------------------------------------------------------------------
# Random object constructors
# ---------------------------------------------------------------------------

def random_pure_state(space: FactorSpace, rng: RandomStream) -> PureState:
    """Haar-random pure state on the given space."""
    return PureState.normalized(space, rng.complex_normal(space.total_dim))


def random_unitary(dim: int, rng: RandomStream) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    g = rng.complex_normal(dim * dim).reshape(dim, dim)
    q, r = np.linalg.qr(g)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def random_density_matrix(dim: int, rng: RandomStream, rank: int | None = None) -> DensityMatrix:
    """Random mixed state from a normalized Wishart matrix."""
    k = dim if rank is None else int(rank)
    g = rng.complex_normal(dim * k).reshape(dim, k)
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def tensor_product(a: PureState, b: PureState) -> PureState:
    """Joint state on the concatenated factorization; Kronecker amplitudes."""
    space = FactorSpace(a.space.dims + b.space.dims)
    return PureState(space, np.kron(a.amplitudes, b.amplitudes))


def apply_on_factors(amplitudes: np.ndarray, dims: Sequence[int], op: np.ndarray,
                     subset: Sequence[int]) -> np.ndarray:
    """Apply an operator to the chosen tensor factors of an amplitude vector."""
    n = len(dims)
    subset = tuple(subset)
    rest = tuple(i for i in range(n) if i not in set(subset))
    d_sub = int(np.prod([dims[i] for i in subset]))
    d_rest = int(np.prod([dims[i] for i in rest])) if rest else 1
    tensor = amplitudes.reshape(dims)
    tensor = np.transpose(tensor, subset + rest).reshape(d_sub, d_rest)
    tensor = op @ tensor
    tensor = tensor.reshape([dims[i] for i in subset + rest])
    inverse = np.argsort(subset + rest)
    return np.transpose(tensor, inverse).reshape(-1)


def apply_unitary(state: PureState, unitary: np.ndarray,
                  on: Union[int, Sequence[int], None] = None) -> PureState:
    """U|psi>, on the whole space or on the chosen factors only."""
    u = np.asarray(unitary, dtype=complex)
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > NORM_ATOL:
        raise ValueError("matrix is not unitary within tolerance")
    if on is None:
        if u.shape[0] != state.space.total_dim:
            raise ValueError("unitary dimension does not match the state")
        return PureState.normalized(state.space, u @ state.amplitudes)
    subset = _normalize_subset(state.space, on)
    d_sub = int(np.prod([state.space.dims[i] for i in subset]))
    if u.shape[0] != d_sub:
        raise ValueError("unitary dimension does not match the chosen factors")
    amps = apply_on_factors(state.amplitudes, state.space.dims, u, subset)
    return PureState.normalized(state.space, amps)


def partial_trace(state: Union[PureState, DensityMatrix], keep: Union[int, Sequence[int]],
                  space: FactorSpace | None = None) -> DensityMatrix:
    """Reduced density matrix on the kept factors.

    ``keep`` must be a nonempty proper subset of the subsystem indices;
    the trivial cases (trace of everything, or of nothing) are rejected.
    For a :class:`DensityMatrix` input the factorization must be supplied.
    """
    if isinstance(state, PureState):
        space = state.space
    elif space is None:
        raise ValueError("partial_trace of a DensityMatrix needs an explicit FactorSpace")
    keep_t = _normalize_subset(space, keep)
    if len(keep_t) >= space.n_factors:
        raise ValueError("keep must be a proper subset of the subsystem indices")
    rest = space.complement(keep_t)
    dims = space.dims
    d_keep = int(np.prod([dims[i] for i in keep_t]))
    d_rest = int(np.prod([dims[i] for i in rest]))

    if isinstance(state, PureState):
        mat = state.amplitudes.reshape(dims)
        mat = np.transpose(mat, keep_t + rest).reshape(d_keep, d_rest)
        rho = mat @ mat.conj().T
    else:
        perm = keep_t + rest
        tensor = state.entries.reshape(dims + dims)
        order = perm + tuple(space.n_factors + i for i in perm)
        tensor = np.transpose(tensor, order).reshape(d_keep, d_rest, d_keep, d_rest)
        rho = np.einsum("irjr->ij", tensor)
    rho = (rho + rho.conj().T) / 2.0
    return DensityMatrix(rho)


def schmidt_decompose(state: PureState, cut: Union[int, Sequence[int]]) -> SchmidtDecomposition:
    """Schmidt decomposition across the (cut | complement) bipartition.

    Weights are the squared singular values in descending order; terms
    below ``EIGENVALUE_FLOOR`` are dropped, so ``rank`` counts only the
    genuinely occupied Schmidt vectors.
    """
    space = state.space
    cut_t = _normalize_subset(space, cut)
    if len(cut_t) >= space.n_factors:
        raise ValueError("cut must be a proper subset of the subsystem indices")
    rest = space.complement(cut_t)
    dims = space.dims
    d_left = int(np.prod([dims[i] for i in cut_t]))
    d_right = int(np.prod([dims[i] for i in rest]))

    mat = state.amplitudes.reshape(dims)
    mat = np.transpose(mat, cut_t + rest).reshape(d_left, d_right)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)

    left_space = space.subspace(cut_t)
    right_space = space.subspace(rest)
    weights, lefts, rights = [], [], []
    for i, sv in enumerate(s):
        p = float(sv * sv)
        if p <= EIGENVALUE_FLOOR:
            continue
        weights.append(p)
        lefts.append(PureState.normalized(left_space, u[:, i]))
        rights.append(PureState.normalized(right_space, vh[i, :]))
    return SchmidtDecomposition(tuple(weights), tuple(lefts), tuple(rights))


def born_probabilities(rho: DensityMatrix, povm: POVMSet) -> np.ndarray:
    """Outcome probabilities Tr(A_i rho), clamped at tiny negatives."""
    if povm.dim != rho.dim:
        raise ValueError(f"POVM dimension {povm.dim} does not match state dimension {rho.dim}")
    probs = np.array([float(np.trace(a @ rho.entries).real) for a in povm.elements])
    if np.min(probs) < -1e-12:
        raise ValueError("Born probability below tolerance; invalid POVM or state")
    probs = np.clip(probs, 0.0, None)
    if abs(float(np.sum(probs)) - 1.0) > NORM_ATOL:
        raise ValueError("Born probabilities do not sum to 1 within tolerance")
    return probs


def measure_projective(state: PureState, observable: HermitianObservable,
                       on: Union[int, Sequence[int]], rng: RandomStream
                       ) -> tuple[int, PureState]:
    """Projective measurement on the chosen factors, with state collapse.

    Returns the sampled eigenvalue-cluster index and the renormalized
    post-measurement state (P_i x I)|psi>.  Clusters with probability
    below the selection floor are never chosen.
    """
    subset = _normalize_subset(state.space, on)
    d_sub = int(np.prod([state.space.dims[i] for i in subset]))
    if observable.dim != d_sub:
        raise ValueError("observable dimension does not match the chosen factors")
    branches = []
    probs = []
    for proj in observable.projectors:
        amps = apply_on_factors(state.amplitudes, state.space.dims, proj, subset)
        branches.append(amps)
        probs.append(float(np.real(np.vdot(amps, amps))))
    idx = rng.choose(probs)
    post = PureState.normalized(state.space, branches[idx])
    return idx, post


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity F(rho, sigma) = Tr(sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.dim != sigma.dim:
        raise ValueError("fidelity needs matrices of equal dimension")
    w, v = np.linalg.eigh(rho.entries)
    sqrt_rho = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    inner = sqrt_rho @ sigma.entries @ sqrt_rho
    vals = np.linalg.eigvalsh((inner + inner.conj().T) / 2.0)
    root = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))))
    return min(root * root, 1.0)


def quantize(x: float, m: int) -> float:
    """Nearest multiple of 2^-m, ties rounded to the even multiple."""
    m = int(m)
    if m < 1:
        raise ValueError("precision m must be a positive integer")
    return math.ldexp(float(round(math.ldexp(float(x), m))), -m)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-sum(lambda log2 lambda) in bits, over eigenvalues above the floor."""
    vals = rho.eigenvalues()
    vals = vals[vals > EIGENVALUE_FLOOR]
    # + 0.0 normalizes -0.0, which would leak into record output
    return max(float(-np.sum(vals * np.log2(vals))), 0.0) + 0.0


def renyi_entropy(rho: DensityMatrix, alpha: float) -> float:
    """Renyi entropy (1/(1-alpha)) log2 Tr(rho^alpha) in bits, alpha != 1."""
    alpha = float(alpha)
    if alpha < 0.0:
        raise ValueError("alpha must be nonnegative")
    if abs(alpha - 1.0) <= 1e-9:
        raise ValueError("alpha = 1 is the von Neumann case; use von_neumann_entropy")
    vals = rho.eigenvalues()
    vals = vals[vals > EIGENVALUE_FLOOR]
    # + 0.0 normalizes -0.0, as in von_neumann_entropy
    return max(float(np.log2(np.sum(vals ** alpha)) / (1.0 - alpha)), 0.0) + 0.0


def entropy(rho: DensityMatrix, alpha: float = 1.0) -> float:
    """Entropy of order alpha in bits; alpha = 1 routes to von Neumann."""
    if abs(float(alpha) - 1.0) <= 1e-9:
        return von_neumann_entropy(rho)
    return renyi_entropy(rho, alpha)
