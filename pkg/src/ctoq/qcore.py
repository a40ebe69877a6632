"""Quantum objects: states, channels, measurements, bases, entropies.

Channels are kept in Kraus form throughout; isometries are converted to
Kraus operators by slicing an environment basis.  All types validate their
defining invariants on construction and are immutable afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from .linop import Operator, operator, permute, sqrtm_psd

__all__ = [
    "Channel",
    "Povm",
    "OrthoBasis",
    "ProbDist",
    "max_entangled",
    "max_correlated_classical",
    "apply_channel",
    "compose",
    "reduce_kraus",
    "bhattacharyya",
    "collision_entropy",
    "overlap_distribution",
    "pauli_basis",
    "fourier_basis",
    "computational_basis",
    "purify",
    "identity_channel",
    "unitary_channel",
    "depolarizing_channel",
    "dephasing_channel",
    "povm_channel",
    "measure_prepare_channel",
    "is_mub",
]


@dataclass(frozen=True, eq=False)
class OrthoBasis:
    """Ordered orthonormal basis: the columns of a d x d unitary."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("basis matrix must be square")
        gram = m.conj().T @ m
        err = np.max(np.abs(gram - np.eye(m.shape[0])))
        if err > DEFAULT_TOLS.spectral:
            raise ValueError(f"basis is not orthonormal (Gram error {err:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def column(self, j: int) -> np.ndarray:
        return self.matrix[:, j]

    def conj(self) -> "OrthoBasis":
        """Entrywise conjugate basis {|j*>} (in the computational basis)."""
        return OrthoBasis(self.matrix.conj())


@dataclass(frozen=True, eq=False)
class ProbDist:
    """Probability vector; tiny normalization drift is silently repaired."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64).copy()
        if w.ndim != 1:
            raise ValueError("weights must be a vector")
        if w.size and w.min() < -DEFAULT_TOLS.prob_norm:
            raise ValueError(f"negative weight {w.min():.3e}")
        w = np.clip(w, 0.0, None)
        total = float(w.sum())
        if abs(total - 1.0) > DEFAULT_TOLS.prob_norm:
            raise ValueError(f"weights sum to {total:.12g}, expected 1")
        w /= total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True, eq=False)
class Channel:
    """Completely positive trace-preserving map in Kraus form."""

    kraus: tuple[Operator, ...]
    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]

    def __post_init__(self) -> None:
        ks = tuple(self.kraus)
        if not ks:
            raise ValueError("a channel needs at least one Kraus operator")
        in_dims = tuple(int(d) for d in self.in_dims)
        out_dims = tuple(int(d) for d in self.out_dims)
        for k in ks:
            if k.col_dims != in_dims or k.row_dims != out_dims:
                raise ValueError(
                    f"Kraus dims {k.row_dims}x{k.col_dims} do not match "
                    f"channel dims {out_dims}x{in_dims}"
                )
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "in_dims", in_dims)
        object.__setattr__(self, "out_dims", out_dims)

    @property
    def dim_in(self) -> int:
        return math.prod(self.in_dims)

    @property
    def dim_out(self) -> int:
        return math.prod(self.out_dims)

    def kraus_stack(self) -> np.ndarray:
        """All Kraus operators as one (n, dim_out, dim_in) array, cached."""
        cached = getattr(self, "_stack", None)
        if cached is None:
            cached = np.stack([k.data for k in self.kraus])
            cached.setflags(write=False)
            object.__setattr__(self, "_stack", cached)
        return cached


def channel(
    kraus: Iterable[np.ndarray],
    in_dims: Sequence[int],
    out_dims: Sequence[int],
    tp_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLS,
) -> Channel:
    """Build a Channel from raw Kraus matrices, checking trace preservation."""
    in_dims = tuple(int(d) for d in in_dims)
    out_dims = tuple(int(d) for d in out_dims)
    stack = np.stack([np.asarray(k) for k in kraus]).astype(
        np.complex128, copy=False
    )
    if tp_tol is None:
        tp_tol = tols.channel_tp
    flat = stack.reshape(-1, stack.shape[2])
    total = flat.conj().T @ flat
    err = np.max(np.abs(total - np.eye(math.prod(in_dims))))
    if err > tp_tol:
        raise ValueError(f"Kraus set is not trace preserving (error {err:.3e})")
    ch = Channel(
        tuple(Operator(k, out_dims, in_dims) for k in stack), in_dims, out_dims
    )
    stack.setflags(write=False)
    object.__setattr__(ch, "_stack", stack)
    return ch


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered positive operators summing to the identity."""

    elements: tuple[Operator, ...]

    def __post_init__(self) -> None:
        els = tuple(self.elements)
        if not els:
            raise ValueError("a POVM needs at least one element")
        dims = els[0].row_dims
        total = np.zeros((els[0].dim_row, els[0].dim_row), dtype=np.complex128)
        for e in els:
            if e.row_dims != dims or e.col_dims != dims:
                raise ValueError("POVM elements must share a common square space")
            w = np.linalg.eigvalsh((e.data + e.data.conj().T) / 2)
            if w.size and w[0] < -DEFAULT_TOLS.povm:
                raise ValueError(f"POVM element not PSD (min eig {w[0]:.3e})")
            total += e.data
        err = np.max(np.abs(total - np.eye(els[0].dim_row)))
        if err > DEFAULT_TOLS.povm:
            raise ValueError(f"POVM does not sum to identity (error {err:.3e})")
        object.__setattr__(self, "elements", els)

    @property
    def n_outcomes(self) -> int:
        return len(self.elements)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(range(len(self.elements)))

    @property
    def dim(self) -> int:
        return self.elements[0].dim_row

    def __iter__(self):
        return iter(self.elements)


# ---------------------------------------------------------------------------
# states


def max_entangled_vector(d: int) -> np.ndarray:
    vec = np.zeros(d * d, dtype=np.complex128)
    vec[:: d + 1] = 1.0 / math.sqrt(d)
    return vec


def max_entangled(d: int) -> Operator:
    """Maximally entangled state d^{-1/2} sum_j |jj> as a density operator."""
    if d < 1:
        raise ValueError("d must be >= 1")
    vec = max_entangled_vector(d)
    return Operator(np.outer(vec, vec.conj()), (d, d), (d, d))


def max_correlated_classical(
    basis: OrthoBasis, conjugate_second: bool = False
) -> Operator:
    """Maximally correlated classical state d^{-1} sum_j |jj><jj| in a basis.

    With ``conjugate_second`` the second factor uses the conjugate basis
    {|j*>}, the convention under which the state is the dephased half of the
    maximally entangled state.
    """
    d = basis.dim
    first = basis.matrix
    second = basis.matrix.conj() if conjugate_second else basis.matrix
    out = np.zeros((d * d, d * d), dtype=np.complex128)
    for j in range(d):
        pa = np.outer(first[:, j], first[:, j].conj())
        pb = np.outer(second[:, j], second[:, j].conj())
        out += np.kron(pa, pb)
    return Operator(out / d, (d, d), (d, d))


def purify(rho: Operator, tols: Tolerances = DEFAULT_TOLS) -> Operator:
    """Purification sum_i sqrt(lambda_i) |v_i>|i> of a density operator.

    Returns the pure density operator on system (x) copy; the copy system has
    the same dimension as the input.
    """
    vec, dims = purify_vector(rho, tols)
    return Operator(np.outer(vec, vec.conj()), dims, dims)


def purify_vector(
    rho: Operator, tols: Tolerances = DEFAULT_TOLS
) -> tuple[np.ndarray, tuple[int, ...]]:
    """State vector of the eigendecomposition purification."""
    if not rho.is_square:
        raise ValueError("purify needs a density operator")
    d = rho.dim_row
    herm = (rho.data + rho.data.conj().T) / 2
    w, v = np.linalg.eigh(herm)
    if w[0] < -tols.psd:
        raise ValueError(f"state not PSD (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    # vec[(a, i)] = sqrt(w_i) v[a, i], copy index least significant
    vec = (v * np.sqrt(w)).reshape(-1)
    return vec, rho.row_dims + (d,)


# ---------------------------------------------------------------------------
# channel application and composition


def _resolve_targets(
    state: Operator, ch: Channel, targets: Sequence[int] | None
) -> list[int]:
    dims = state.row_dims
    if targets is None:
        targets = tuple(range(len(ch.in_dims)))
    targets = [int(t) for t in targets]
    if sorted(set(targets)) != targets:
        raise ValueError("targets must be strictly ascending")
    if any(t < 0 or t >= len(dims) for t in targets):
        raise IndexError(f"targets {targets} out of range")
    tdims = tuple(dims[t] for t in targets)
    if tdims != ch.in_dims:
        raise ValueError(
            f"target dims {tdims} do not match channel input {ch.in_dims}"
        )
    return targets


def apply_channel(
    ch: Channel,
    state: Operator,
    targets: Sequence[int] | None = None,
) -> Operator:
    """Kraus sum on the target subsystems, identity on the rest.

    The channel's output subsystems take the position of the first target;
    untouched subsystems keep their relative order.
    """
    if not state.is_square:
        raise ValueError("apply_channel needs a square state")
    dims = state.row_dims
    n = len(dims)
    targets = _resolve_targets(state, ch, targets)
    ks = ch.kraus_stack()

    if len(targets) == n:
        out = np.einsum(
            "nij,jk,nlk->il", ks, state.data, ks.conj(), optimize=True
        )
        return Operator(out, ch.out_dims, ch.out_dims)

    rest = [i for i in range(n) if i not in targets]
    dt = math.prod(ch.in_dims)
    dr = math.prod(dims[i] for i in rest)
    tensor = state.data.reshape(dims + dims)
    axes = targets + rest
    tensor = tensor.transpose(axes + [n + i for i in axes])
    st4 = tensor.reshape(dt, dr, dt, dr)
    out4 = np.einsum("not,tasb,nps->oapb", ks, st4, ks.conj(), optimize=True)

    do = math.prod(ch.out_dims)
    out_dims = ch.out_dims + tuple(dims[i] for i in rest)
    result = Operator(out4.reshape(do * dr, do * dr), out_dims, out_dims)

    # current order is [out block, rest...]; move the out block to where the
    # first target subsystem was
    n_out = len(ch.out_dims)
    cur = [("out", j) for j in range(n_out)] + [("rest", i) for i in rest]
    final: list[tuple[str, int]] = []
    for i in range(n):
        if i == targets[0]:
            final.extend(("out", j) for j in range(n_out))
        elif i in targets:
            continue
        else:
            final.append(("rest", i))
    order = [cur.index(x) for x in final]
    if order != list(range(len(cur))):
        result = permute(result, order)
    return result


def compose(
    later: Channel, earlier: Channel, tols: Tolerances = DEFAULT_TOLS
) -> Channel:
    """Channel composition later(earlier(.)) with all pairwise Kraus products."""
    if earlier.out_dims != later.in_dims:
        raise ValueError(
            f"cannot compose: earlier outputs {earlier.out_dims}, "
            f"later expects {later.in_dims}"
        )
    products = [
        b.data @ a.data for b in later.kraus for a in earlier.kraus
    ]
    return channel(
        products,
        earlier.in_dims,
        later.out_dims,
        tp_tol=tols.compose_tp,
        tols=tols,
    )


def reduce_kraus(ch: Channel, tols: Tolerances = DEFAULT_TOLS) -> Channel:
    """Equivalent channel with a minimal Kraus set.

    Diagonalizes sum_k |vec K_k><vec K_k|, which determines the map, and
    keeps the eigenvectors with nonnegligible weight.
    """
    di, do = ch.dim_in, ch.dim_out
    b = ch.kraus_stack().reshape(len(ch.kraus), do * di)
    x = b.T @ b.conj()
    w, v = np.linalg.eigh((x + x.conj().T) / 2)
    cut = tols.rank_tol(do * di) * max(float(w[-1]), 0.0)
    ks = [
        (v[:, i] * math.sqrt(w[i])).reshape(do, di)
        for i in range(w.size)
        if w[i] > cut
    ]
    return channel(ks, ch.in_dims, ch.out_dims, tp_tol=tols.compose_tp, tols=tols)


# ---------------------------------------------------------------------------
# classical helpers


def bhattacharyya(p: ProbDist, q: ProbDist) -> float:
    """Classical fidelity (sum_j sqrt(p_j q_j))^2 between distributions."""
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} vs {len(q)}")
    return float(np.sum(np.sqrt(p.weights * q.weights)) ** 2)


def collision_entropy(rho: Operator) -> float:
    """Renyi-2 entropy -log2 tr(rho^2)."""
    purity = float(np.einsum("ij,ji->", rho.data, rho.data).real)
    return -math.log2(purity)


def overlap_distribution(e: OrthoBasis, f: OrthoBasis, l: int) -> ProbDist:
    """Distribution p_l(j) = |<j_e|l_f>|^2 of one f-vector over the e-basis."""
    if e.dim != f.dim:
        raise ValueError(f"dimension mismatch: {e.dim} vs {f.dim}")
    if not 0 <= l < f.dim:
        raise IndexError(f"outcome {l} out of range for dim {f.dim}")
    amps = e.matrix.conj().T @ f.column(l)
    return ProbDist(np.abs(amps) ** 2)


def is_mub(e: OrthoBasis, f: OrthoBasis, tol: float = 1e-10) -> bool:
    """True when every overlap |<j_e|l_f>|^2 equals 1/d within ``tol``."""
    d = e.dim
    overlaps = np.abs(e.matrix.conj().T @ f.matrix) ** 2
    return bool(np.max(np.abs(overlaps - 1.0 / d)) <= tol)


# ---------------------------------------------------------------------------
# standard bases


def computational_basis(d: int) -> OrthoBasis:
    return OrthoBasis(np.eye(d))


def fourier_basis(d: int) -> OrthoBasis:
    """Discrete Fourier basis F[j, k] = exp(2 pi i jk / d) / sqrt(d)."""
    j = np.arange(d)
    return OrthoBasis(np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d))


_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


def pauli_basis(n_qubits: int, which: str) -> OrthoBasis:
    """Multi-qubit Pauli basis: Z is computational, X is the n-fold
    tensor product of (|0> +/- |1>)/sqrt(2)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    w = which.lower()
    if w == "z":
        return computational_basis(2**n_qubits)
    if w == "x":
        m = reduce(np.kron, [_HADAMARD] * n_qubits)
        return OrthoBasis(m)
    raise ValueError(f"unknown Pauli basis {which!r}, expected 'x' or 'z'")


# ---------------------------------------------------------------------------
# channel constructors


def identity_channel(dims: Sequence[int] | int) -> Channel:
    if isinstance(dims, int):
        dims = (dims,)
    return channel([np.eye(math.prod(dims))], dims, dims)


def unitary_channel(u: Operator) -> Channel:
    return channel([u.data], u.col_dims, u.row_dims)


def depolarizing_channel(d: int) -> Channel:
    """Fully depolarizing channel rho -> tr(rho) I/d."""
    ks = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d), dtype=np.complex128)
            k[i, j] = 1.0 / math.sqrt(d)
            ks.append(k)
    return channel(ks, (d,), (d,))


def dephasing_channel(basis: OrthoBasis) -> Channel:
    """Complete dephasing in the given basis."""
    d = basis.dim
    ks = [
        np.outer(basis.column(j), basis.column(j).conj()) for j in range(d)
    ]
    return channel(ks, (d,), (d,))


def measure_prepare_channel(
    povm: Povm,
    outputs: Sequence[Operator],
    tols: Tolerances = DEFAULT_TOLS,
) -> Channel:
    """Channel rho -> sum_j tr[rho M_j] sigma_j.

    One Kraus operator per (outcome, output eigenvector, input basis vector);
    the outputs must be density operators on a common space.
    """
    if len(outputs) != povm.n_outcomes:
        raise ValueError("need one output state per POVM outcome")
    din = povm.dim
    dout = outputs[0].dim_row
    out_dims = outputs[0].row_dims
    ks = []
    for m, sigma in zip(povm, outputs):
        root = sqrtm_psd(m.data, tols)
        w, v = np.linalg.eigh((sigma.data + sigma.data.conj().T) / 2)
        for a in range(dout):
            if w[a] <= tols.rank_tol(dout) * max(float(w[-1]), 0.0):
                continue
            amp = math.sqrt(float(w[a]))
            for b in range(din):
                ks.append(amp * np.outer(v[:, a], root[b, :]))
    return channel(ks, povm.elements[0].row_dims, out_dims, tols=tols)


def povm_channel(
    povm: Povm, basis: OrthoBasis, tols: Tolerances = DEFAULT_TOLS
) -> Channel:
    """Measure-and-prepare map rho -> sum_j tr[rho M_j] |j_W><j_W|."""
    if povm.n_outcomes != basis.dim:
        raise ValueError("need one POVM outcome per basis vector")
    d = basis.dim
    outputs = [
        operator(np.outer(basis.column(j), basis.column(j).conj()), (d,))
        for j in range(d)
    ]
    return measure_prepare_channel(povm, outputs, tols)
