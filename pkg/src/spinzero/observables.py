"""Spectral observables: Pauli embeddings, the shipped collective
observables F and G, functional-dependence checking, and rotation-invariance
audits.

An observable is specified by its spectral data (eigenvalue -> orthonormal
eigenbasis), never reconstructed from a matrix on the main path; collapse
semantics depend on eigenspaces, and the eigensolver stays a cross-check
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qcore import (
    IDENTITY_2,
    MAX_QUBITS,
    TOL_CLUSTER,
    TOL_HERM,
    TOL_INVARIANCE,
    TOL_ORTH,
    CapacityError,
    DimensionMismatchError,
    NonUnitaryError,
    as_operator,
    commutator,
    hermitian_eigen,
    max_abs,
)
from .states import spin_zero_basis

_SQRT2 = np.sqrt(2.0)

_PAULI_EIGENBASES = {
    "x": ((1.0, np.array([1.0, 1.0], dtype=complex) / _SQRT2),
          (-1.0, np.array([1.0, -1.0], dtype=complex) / _SQRT2)),
    "y": ((1.0, np.array([1.0, 1.0j], dtype=complex) / _SQRT2),
          (-1.0, np.array([1.0, -1.0j], dtype=complex) / _SQRT2)),
    "z": ((1.0, np.array([1.0, 0.0], dtype=complex)),
          (-1.0, np.array([0.0, 1.0], dtype=complex))),
}


class NonCommutingError(ValueError):
    """Observables required to commute do not."""


@dataclass(frozen=True, eq=False)
class SpectralObservable:
    """Hermitian observable as (eigenvalue, orthonormal eigenbasis) branches.

    Each branch basis is a dim x k column block; across branches the columns
    form an orthonormal basis of the whole space, so the branch projectors
    resolve the identity.  `sites` records which 1-indexed qubits the
    observable acts on (maintained by `embed` for disjointness bookkeeping).
    """

    branches: tuple[tuple[float, np.ndarray], ...]
    sites: tuple[int, ...] | None = None
    name: str = ""

    def __post_init__(self):
        branches = []
        for eigenvalue, basis in self.branches:
            basis = np.asarray(basis, dtype=complex)
            if basis.ndim == 1:
                basis = basis.reshape(-1, 1)
            branches.append((float(eigenvalue), basis))
        object.__setattr__(self, "branches", tuple(branches))
        if not self.branches:
            raise ValueError("observable needs at least one branch")
        dim = self.branches[0][1].shape[0]
        total = 0
        for eigenvalue, basis in self.branches:
            if not np.isfinite(eigenvalue):
                raise ValueError("eigenvalues must be finite")
            if basis.shape[0] != dim:
                raise DimensionMismatchError("all branch bases must share one dimension")
            total += basis.shape[1]
        if total != dim:
            raise ValueError(f"branch bases supply {total} vectors for dimension {dim}")
        values = [ev for ev, _ in self.branches]
        for i, vi in enumerate(values):
            for vj in values[i + 1:]:
                if abs(vi - vj) <= TOL_CLUSTER:
                    raise ValueError(f"branch eigenvalues {vi} and {vj} are not separated")
        union = np.hstack([basis for _, basis in self.branches])
        gram_dev = max_abs(union.conj().T @ union - np.eye(dim))
        if gram_dev > TOL_ORTH:
            raise ValueError(f"branch bases are not orthonormal: deviation {gram_dev:.3e}")

    @property
    def dim(self) -> int:
        return self.branches[0][1].shape[0]

    @property
    def n_qubits(self) -> int:
        n = self.dim.bit_length() - 1
        if 2 ** n != self.dim:
            raise DimensionMismatchError(f"dimension {self.dim} is not a power of two")
        return n

    @property
    def eigenvalues(self) -> tuple[float, ...]:
        return tuple(ev for ev, _ in self.branches)

    def branch_basis(self, eigenvalue: float) -> np.ndarray:
        for ev, basis in self.branches:
            if ev == eigenvalue or abs(ev - eigenvalue) <= 1e-12:
                return basis
        raise KeyError(f"{eigenvalue} is not in the spectrum {self.eigenvalues}")

    def projector(self, eigenvalue: float) -> np.ndarray:
        basis = self.branch_basis(eigenvalue)
        return basis @ basis.conj().T

    def matrix(self) -> np.ndarray:
        """Hermitian matrix form: the eigenvalue-weighted sum of projectors."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for ev, basis in self.branches:
            if ev != 0.0:
                out += ev * (basis @ basis.conj().T)
        return out


def pauli(axis: str, site: int, n: int) -> SpectralObservable:
    """Single-site Pauli observable on an n-qubit register.

    Eigenvalues are +1 and -1, each with a 2**(n-1)-dimensional eigenbasis;
    the matrix form is the identity everywhere except `site`.
    """
    key = str(axis).lower()
    if key not in _PAULI_EIGENBASES:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    if not 1 <= site <= n:
        raise ValueError(f"site {site} out of range 1..{n}")
    single = SpectralObservable(branches=_PAULI_EIGENBASES[key])
    lifted = embed(single, [site], n)
    return SpectralObservable(branches=lifted.branches, sites=(site,),
                              name=f"sigma_{key}{site}")


def _orthonormal_completion(seed_vectors, dim: int) -> np.ndarray:
    """Complete seed vectors to an orthonormal basis via Gram-Schmidt over
    the computational basis in index order; returns only the new columns."""
    basis = [np.asarray(v, dtype=complex) for v in seed_vectors]
    added = []
    for k in range(dim):
        v = np.zeros(dim, dtype=complex)
        v[k] = 1.0
        for _ in range(2):  # second pass keeps orthogonality at 1e-15 level
            for b in basis:
                v = v - np.vdot(b, v) * b
        nrm = np.linalg.norm(v)
        if nrm > 1e-7:
            v = v / nrm
            basis.append(v)
            added.append(v)
    return np.column_stack(added)


def _collective_observable(name: str) -> SpectralObservable:
    pair = spin_zero_basis()
    completion = _orthonormal_completion([pair.phi0, pair.phi1], 16)
    return SpectralObservable(
        branches=((1.0, pair.phi1.reshape(-1, 1)),
                  (-1.0, pair.phi0.reshape(-1, 1)),
                  (0.0, completion)),
        sites=(1, 2, 3, 4),
        name=name)


def observable_f() -> SpectralObservable:
    """The four-qubit collective observable F of the shipped audit.

    Outcome +1 on one spin-zero basis vector, -1 on the other, and 0 on the
    14-dimensional orthocomplement (produced by deterministic completion).
    """
    return _collective_observable("F")


def observable_g() -> SpectralObservable:
    """The second party's counterpart of F, built from the same spin-zero
    pair; it acts on that party's four qubits once embedded."""
    return _collective_observable("G")


def _embedding_axes(sites, n: int) -> list[int]:
    """Transpose axes mapping the (sites..., complement...) qubit ordering
    onto ascending register sites."""
    sites = [int(s) for s in sites]
    if len(set(sites)) != len(sites):
        raise ValueError(f"sites must be distinct, got {sites}")
    for s in sites:
        if not 1 <= s <= n:
            raise ValueError(f"site {s} out of range 1..{n}")
    complement = [s for s in range(1, n + 1) if s not in sites]
    source = sites + complement
    return [source.index(t + 1) for t in range(n)]


def _lift_columns(basis: np.ndarray, sites, n: int) -> np.ndarray:
    """Tensor each basis column with the identity on the complement sites,
    then reorder qubits so `sites` land at their register positions."""
    k = len(sites)
    rest = 2 ** (n - k)
    block = np.kron(basis, np.eye(rest, dtype=complex))
    axes = _embedding_axes(sites, n)
    cols = block.shape[1]
    return block.reshape([2] * n + [cols]).transpose(axes + [n]).reshape(2 ** n, cols)


def embed(obs: SpectralObservable, sites, n: int) -> SpectralObservable:
    """Lift an observable onto `sites` of an n-qubit register (identity
    elsewhere).  Eigenvalues are preserved; each eigenspace dimension is
    multiplied by 2**(n - len(sites))."""
    sites = [int(s) for s in sites]
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceed the {MAX_QUBITS}-qubit maximum")
    if len(sites) != obs.n_qubits:
        raise ValueError(f"observable covers {obs.n_qubits} qubits, got {len(sites)} sites")
    branches = tuple((ev, _lift_columns(basis, sites, n)) for ev, basis in obs.branches)
    return SpectralObservable(branches=branches, sites=tuple(sites), name=obs.name)


def from_matrix(m, *, cluster_tol: float = TOL_CLUSTER, herm_tol: float = TOL_HERM,
                name: str = "") -> SpectralObservable:
    """Spectral observable from a Hermitian matrix.

    Runs the Jacobi eigensolver and groups eigenvalues closer than
    cluster_tol into one eigenspace; each branch eigenvalue is the cluster
    mean.
    """
    decomp = hermitian_eigen(as_operator(m), herm_tol=herm_tol)
    eigenvalues = decomp.eigenvalues
    branches = []
    start = 0
    for k in range(1, len(eigenvalues) + 1):
        if k == len(eigenvalues) or eigenvalues[start] - eigenvalues[k] > cluster_tol:
            cluster = eigenvalues[start:k]
            branches.append((float(np.mean(cluster)), decomp.eigenvectors[:, start:k]))
            start = k
    return SpectralObservable(branches=tuple(branches), name=name)


@dataclass(frozen=True)
class FunctionReport:
    """Outcome of a functional-dependence check.

    Exactly one of value_table / witness is present: the table maps each
    joint outcome tuple of the generators to the checked observable's
    eigenvalue there, and the witness names a joint outcome whose eigenspace
    straddles several eigenspaces of the checked observable.
    """

    is_function: bool
    value_table: dict[tuple[float, ...], float] | None = None
    witness: str | None = None
    witness_outcome: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.is_function and (self.value_table is None or self.witness is not None):
            raise ValueError("a positive report carries a value table and no witness")
        if not self.is_function and (self.witness is None or self.value_table is not None):
            raise ValueError("a negative report carries a witness and no value table")


def _orthonormal_columns(block: np.ndarray, rank_tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the column span, empty when the span is trivial."""
    if block.shape[1] == 0:
        return block
    u, s, _ = np.linalg.svd(block, full_matrices=False)
    return u[:, s > rank_tol]


def _check_commuting(observables, tol: float) -> None:
    mats = None
    for i in range(len(observables)):
        for j in range(i + 1, len(observables)):
            a, b = observables[i], observables[j]
            if a.dim != b.dim:
                raise DimensionMismatchError(
                    f"observables have dims {a.dim} and {b.dim}")
            if (a.sites is not None and b.sites is not None
                    and not set(a.sites) & set(b.sites)):
                continue  # disjoint supports commute exactly
            if mats is None:
                mats = {k: obs.matrix() for k, obs in enumerate(observables)}
            dev = max_abs(commutator(mats[i], mats[j]))
            if dev > tol:
                raise NonCommutingError(
                    f"observables {a.name or i} and {b.name or j} do not commute "
                    f"(max commutator entry {dev:.3e})")


def joint_eigenspaces(generators, *, commute_tol: float = 1e-10,
                      rank_tol: float = 1e-9):
    """Joint eigenspace decomposition of a commuting set.

    Returns a list of (outcome tuple, orthonormal basis columns) covering
    every realizable joint outcome, refined generator by generator in branch
    order.
    """
    generators = list(generators)
    if not generators:
        raise ValueError("need at least one generator")
    _check_commuting(generators, commute_tol)
    dim = generators[0].dim
    spaces = [((), np.eye(dim, dtype=complex))]
    for gen in generators:
        refined = []
        for outcome, basis in spaces:
            for ev, branch in gen.branches:
                projected = branch @ (branch.conj().T @ basis)
                q = _orthonormal_columns(projected, rank_tol)
                if q.shape[1] > 0:
                    refined.append((outcome + (ev,), q))
        spaces = refined
    return spaces


def is_function_of(f: SpectralObservable, generators, *,
                   commute_tol: float = 1e-10,
                   contain_tol: float = 1e-9) -> FunctionReport:
    """Decide whether f is a function of a commuting generator set.

    f is a function of the set exactly when every joint eigenspace of the
    generators lies inside a single eigenspace of f, so that the joint
    outcome determines f's value.  Decided structurally by eigenspace
    containment, not by polynomial fitting.
    """
    generators = list(generators)
    for gen in generators:
        if gen.dim != f.dim:
            raise DimensionMismatchError(
                f"generator dim {gen.dim} does not match f dim {f.dim}")
    table: dict[tuple[float, ...], float] = {}
    for outcome, basis in joint_eigenspaces(generators, commute_tol=commute_tol):
        value = None
        for ev, branch in f.branches:
            residual = max_abs(branch @ (branch.conj().T @ basis) - basis)
            if residual <= contain_tol:
                value = ev
                break
        if value is None:
            label = _format_outcome(outcome)
            return FunctionReport(
                is_function=False,
                witness=(f"joint outcome {label}: its eigenspace is not contained "
                         f"in a single eigenspace of {f.name or 'the observable'}"),
                witness_outcome=outcome)
        table[outcome] = value
    return FunctionReport(is_function=True, value_table=table)


def _format_outcome(outcome) -> str:
    parts = []
    for v in outcome:
        if v == 1.0:
            parts.append("+")
        elif v == -1.0:
            parts.append("-")
        else:
            parts.append(f"{v:g}")
    return "(" + ",".join(parts) + ")"


@dataclass(frozen=True)
class InvarianceReport:
    """Conjugation-invariance audit over one or more rotation trials."""

    invariant: bool
    max_deviation: float
    trials: int
    deviations: tuple[float, ...] = field(default=(), repr=False)


def _su2_from_rng(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform SU(2) element from a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    q = q / np.linalg.norm(q)
    a, b, c, d = q
    return np.array([[a + 1j * b, c + 1j * d],
                     [-c + 1j * d, a - 1j * b]], dtype=complex)


def random_su2(seed: int) -> np.ndarray:
    """Deterministic Haar-uniform single-qubit rotation for a seed."""
    return _su2_from_rng(np.random.default_rng(seed))


def _require_unitary(u: np.ndarray, tol: float) -> np.ndarray:
    u = as_operator(u)
    if u.shape != (2, 2):
        raise DimensionMismatchError(f"rotations must be 2x2, got {u.shape}")
    dev = max_abs(u.conj().T @ u - IDENTITY_2)
    if dev > tol:
        raise NonUnitaryError(f"rotation is not unitary: deviation {dev:.3e}")
    return u


def _kron_chain(factors) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def check_invariance(obs: SpectralObservable, rotation=None, *,
                     pattern: str = "equal", trials: int = 1, seed: int = 0,
                     tol: float = TOL_INVARIANCE,
                     herm_tol: float = TOL_HERM) -> InvarianceReport:
    """Audit invariance of an observable under tensor-product rotations.

    pattern "equal" conjugates by u x u x ... x u; pattern "per_site" uses an
    independent rotation on every qubit.  With `rotation` given, runs that
    single trial (a 2x2 unitary, or a sequence of per-site 2x2 unitaries);
    otherwise draws `trials` seeded Haar-random rotations.
    """
    if pattern not in ("equal", "per_site"):
        raise ValueError(f"pattern must be 'equal' or 'per_site', got {pattern!r}")
    n = obs.n_qubits
    m = obs.matrix()
    rotation_sets = []
    if rotation is not None:
        if pattern == "equal":
            rotation_sets.append([_require_unitary(rotation, herm_tol)] * n)
        else:
            factors = [_require_unitary(u, herm_tol) for u in rotation]
            if len(factors) != n:
                raise ValueError(f"per_site pattern needs {n} rotations, got {len(factors)}")
            rotation_sets.append(factors)
    else:
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            if pattern == "equal":
                rotation_sets.append([_su2_from_rng(rng)] * n)
            else:
                rotation_sets.append([_su2_from_rng(rng) for _ in range(n)])
    deviations = []
    for factors in rotation_sets:
        v = _kron_chain(factors)
        deviations.append(max_abs(v @ m @ v.conj().T - m))
    max_dev = max(deviations)
    return InvarianceReport(invariant=max_dev < tol, max_deviation=max_dev,
                            trials=len(deviations), deviations=tuple(deviations))
