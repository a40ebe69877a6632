"""Dense complex linear algebra on dimension-tagged operators.

Everything downstream (states, channels, measurements) is carried by
:class:`Operator`: a dense complex matrix together with the list of
subsystem dimensions of its row and column spaces.  The functions here are
the only place the library touches raw spectral decompositions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import DEFAULT_TOLS, Tolerances

__all__ = [
    "Operator",
    "HermitianEig",
    "operator",
    "identity",
    "kron",
    "partial_trace",
    "permute",
    "eig_hermitian",
    "schatten_norm",
    "trace_distance",
    "fidelity",
    "func_on_support",
    "sqrtm_psd",
]


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense complex matrix tagged with subsystem dimensions.

    ``row_dims`` / ``col_dims`` are the tensor-factor dimensions of the row
    and column spaces; their products must match the matrix shape.  The
    left-most factor owns the most significant index (numpy ``kron``
    convention).  Instances are immutable and safe to share.
    """

    data: np.ndarray
    row_dims: tuple[int, ...]
    col_dims: tuple[int, ...]

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(self.data, dtype=np.complex128)
        row_dims = tuple(int(d) for d in self.row_dims)
        col_dims = tuple(int(d) for d in self.col_dims)
        if not row_dims or not col_dims:
            raise ValueError("dimension lists must be non-empty")
        if any(d < 1 for d in row_dims + col_dims):
            raise ValueError("subsystem dimensions must be >= 1")
        if data.ndim != 2:
            raise ValueError(f"expected a matrix, got ndim={data.ndim}")
        if data.shape != (math.prod(row_dims), math.prod(col_dims)):
            raise ValueError(
                f"shape {data.shape} does not match dims "
                f"{row_dims} x {col_dims}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "row_dims", row_dims)
        object.__setattr__(self, "col_dims", col_dims)

    @property
    def dim_row(self) -> int:
        return self.data.shape[0]

    @property
    def dim_col(self) -> int:
        return self.data.shape[1]

    @property
    def is_square(self) -> bool:
        return self.row_dims == self.col_dims

    def dag(self) -> "Operator":
        """Conjugate transpose, with row/col dims swapped."""
        return Operator(self.data.conj().T, self.col_dims, self.row_dims)

    def trace(self) -> complex:
        return complex(np.trace(self.data))


@dataclass(frozen=True, eq=False)
class HermitianEig:
    """Eigendecomposition of a Hermitian operator.

    ``eigenvalues`` are real and ascending; the columns of ``eigenvectors``
    are the matching orthonormal eigenvectors.
    """

    eigenvalues: np.ndarray
    eigenvectors: Operator


def operator(data: np.ndarray, dims: Sequence[int] | int) -> Operator:
    """Wrap a square matrix with identical row and column dims."""
    if isinstance(dims, int):
        dims = (dims,)
    return Operator(np.asarray(data), tuple(dims), tuple(dims))


def identity(dims: Sequence[int] | int) -> Operator:
    if isinstance(dims, int):
        dims = (dims,)
    d = math.prod(dims)
    return Operator(np.eye(d), tuple(dims), tuple(dims))


def kron(a: Operator, b: Operator) -> Operator:
    """Tensor product; dims lists concatenate, left factor most significant."""
    return Operator(
        np.kron(a.data, b.data),
        a.row_dims + b.row_dims,
        a.col_dims + b.col_dims,
    )


def partial_trace(a: Operator, keep: Iterable[int]) -> Operator:
    """Trace out every subsystem not listed in ``keep``.

    Requires matching row/col dims.  The result carries the kept subsystems
    in their original order; the full trace is preserved.
    """
    if not a.is_square:
        raise ValueError("partial trace needs matching row and column dims")
    dims = a.row_dims
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise IndexError(f"keep={keep} out of range for {n} subsystems")
    if keep == list(range(n)):
        return a
    tensor = a.data.reshape(dims + dims)
    row_labels = list(range(n))
    col_labels = [i if i not in keep else n + i for i in range(n)]
    out_labels = [i for i in keep] + [n + i for i in keep]
    out = np.einsum(tensor, row_labels + col_labels, out_labels)
    kept_dims = tuple(dims[i] for i in keep) or (1,)
    d = math.prod(kept_dims)
    return Operator(out.reshape(d, d), kept_dims, kept_dims)


def permute(a: Operator, order: Sequence[int]) -> Operator:
    """Reorder the subsystems of a square operator."""
    if not a.is_square:
        raise ValueError("permute needs matching row and column dims")
    dims = a.row_dims
    n = len(dims)
    order = [int(i) for i in order]
    if sorted(order) != list(range(n)):
        raise ValueError(f"order {order} is not a permutation of 0..{n - 1}")
    tensor = a.data.reshape(dims + dims)
    tensor = tensor.transpose(order + [n + i for i in order])
    new_dims = tuple(dims[i] for i in order)
    d = math.prod(new_dims)
    return Operator(tensor.reshape(d, d), new_dims, new_dims)


def _hermitian_part(
    data: np.ndarray, tols: Tolerances, what: str = "operator"
) -> np.ndarray:
    asym = np.max(np.abs(data - data.conj().T)) if data.size else 0.0
    if asym > tols.hermiticity:
        raise ValueError(f"{what} is not Hermitian (asymmetry {asym:.3e})")
    return (data + data.conj().T) / 2.0


def eig_hermitian(a: Operator, tols: Tolerances = DEFAULT_TOLS) -> HermitianEig:
    """Eigendecomposition of a Hermitian operator.

    Symmetrizes ``(A + A^dag)/2`` first; asymmetry beyond the hermiticity
    tolerance is an error rather than silently absorbed.
    """
    if a.data.shape[0] != a.data.shape[1]:
        raise ValueError("eig_hermitian needs a square matrix")
    herm = _hermitian_part(a.data, tols)
    w, v = np.linalg.eigh(herm)
    return HermitianEig(w, Operator(v, a.row_dims, a.col_dims))


def schatten_norm(a: Operator, p: float) -> float:
    """Schatten p-norm ``(sum_i s_i^p)^(1/p)`` over singular values.

    ``p = inf`` returns the largest singular value.  ``p < 1`` is rejected.
    """
    if p < 1:
        raise ValueError(f"Schatten norm needs p >= 1, got {p}")
    s = np.linalg.svd(a.data, compute_uv=False)
    if math.isinf(p):
        return float(s[0]) if s.size else 0.0
    if p == 1:
        return float(np.sum(s))
    return float(np.sum(s**p) ** (1.0 / p))


def _check_density(rho: Operator, tols: Tolerances, name: str) -> None:
    if not rho.is_square:
        raise ValueError(f"{name} must be square")
    if abs(rho.trace() - 1.0) > tols.state_trace:
        raise ValueError(f"{name} has trace {rho.trace():.6g}, expected 1")


def trace_distance(
    rho: Operator, sigma: Operator, tols: Tolerances = DEFAULT_TOLS
) -> float:
    """Half the trace norm of the difference of two density operators.

    Computed from the eigenvalues of the Hermitian difference, which equals
    the singular-value form for Hermitian arguments.
    """
    if rho.row_dims != sigma.row_dims or rho.col_dims != sigma.col_dims:
        raise ValueError(
            f"dimension mismatch: {rho.row_dims} vs {sigma.row_dims}"
        )
    _check_density(rho, tols, "rho")
    _check_density(sigma, tols, "sigma")
    diff = _hermitian_part(rho.data - sigma.data, tols, "difference")
    w = np.linalg.eigvalsh(diff)
    return float(0.5 * np.sum(np.abs(w)))


def _psd_eigh(
    data: np.ndarray, tols: Tolerances, name: str
) -> tuple[np.ndarray, np.ndarray]:
    herm = _hermitian_part(data, tols, name)
    w, v = np.linalg.eigh(herm)
    floor = -tols.psd * max(1.0, float(w[-1]) if w.size else 1.0)
    if w.size and w[0] < floor:
        raise ValueError(f"{name} is not PSD (min eigenvalue {w[0]:.3e})")
    return np.clip(w, 0.0, None), v


def sqrtm_psd(data: np.ndarray, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Principal square root of a PSD matrix via eigendecomposition.

    Eigenvalues below the numerical-rank cutoff are zeroed first; the square
    root would otherwise amplify O(eps) noise to O(sqrt(eps)).
    """
    w, v = _psd_eigh(data, tols, "matrix")
    cut = tols.rank_tol(data.shape[0]) * (float(w[-1]) if w.size else 0.0)
    w[w <= cut] = 0.0
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(
    rho: Operator, sigma: Operator, tols: Tolerances = DEFAULT_TOLS
) -> float:
    """Uhlmann fidelity ``||sqrt(rho) sqrt(sigma)||_1^2`` between states."""
    if rho.row_dims != sigma.row_dims or rho.col_dims != sigma.col_dims:
        raise ValueError(
            f"dimension mismatch: {rho.row_dims} vs {sigma.row_dims}"
        )
    _check_density(rho, tols, "rho")
    _check_density(sigma, tols, "sigma")
    a = sqrtm_psd(rho.data, tols) @ sqrtm_psd(sigma.data, tols)
    s = np.linalg.svd(a, compute_uv=False)
    return float(np.sum(s) ** 2)


def func_on_support(
    a: Operator,
    f: Callable[[np.ndarray], np.ndarray],
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLS,
) -> Operator:
    """Apply a real function to the spectrum of a PSD operator, on support only.

    Eigenvalues strictly above ``rank_tol * lambda_max`` are mapped through
    ``f``; the rest map to zero.  ``rank_tol`` defaults to the numerical-rank
    convention ``dim * machine_eps``.  A negative eigenvalue below
    ``-10 * rank_tol * lambda_max`` is an error.
    """
    if a.data.shape[0] != a.data.shape[1]:
        raise ValueError("func_on_support needs a square matrix")
    dim = a.data.shape[0]
    if rank_tol is None:
        rank_tol = tols.rank_tol(dim)
    herm = _hermitian_part(a.data, tols)
    w, v = np.linalg.eigh(herm)
    lam_max = max(float(w[-1]), 0.0)
    if w[0] < -10.0 * rank_tol * lam_max:
        raise ValueError(
            f"input not PSD within tolerance (min eigenvalue {w[0]:.3e})"
        )
    cut = rank_tol * lam_max
    on = w > cut
    fw = np.zeros_like(w)
    if np.any(on):
        fw[on] = f(w[on])
    out = (v * fw) @ v.conj().T
    return Operator(out, a.row_dims, a.col_dims)
