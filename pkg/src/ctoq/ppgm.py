"""Projection-based pretty-good measurements and their error bounds.

The measurement discriminates the channel outputs ``tau_j = T(|j><j|)`` using
the *support projectors* of the outputs rather than the outputs themselves:
``M_j = Pi^{-1/2} Pi_j Pi^{-1/2}`` with ``Pi = sum_j Pi_j``.  Its decoding
error is bounded by pairwise support/state overlaps, which in turn are fixed
by collision entropies and the smallest nonzero output eigenvalue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from .linop import Operator, func_on_support
from .qcore import Channel, OrthoBasis, Povm, apply_channel, collision_entropy

__all__ = [
    "PpgmBundle",
    "support_projection",
    "build_ppgm",
    "ppgm_error",
    "pairwise_bound",
    "support_bound",
]


@dataclass(frozen=True, eq=False)
class PpgmBundle:
    """A built measurement together with everything its bounds read.

    ``lambda_min`` is the smallest nonzero eigenvalue over all cached output
    states; instances where it sits within a decade of the support-detection
    cutoff are flagged ``ill_conditioned`` because the overlap bounds blow up
    there.
    """

    povm: Povm
    projectors: tuple[Operator, ...]
    pi_sum: Operator
    tau_states: tuple[Operator, ...]
    tau_avg: Operator
    lambda_min: float
    ill_conditioned: bool
    rank_tol: float


def support_projection(
    rho: Operator,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLS,
) -> Operator:
    """Projector onto the eigenspaces above ``rank_tol * lambda_max``."""
    return func_on_support(rho, np.ones_like, rank_tol=rank_tol, tols=tols)


def build_ppgm(
    chan: Channel,
    basis: OrthoBasis,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLS,
) -> PpgmBundle:
    """Build the measurement for discriminating the channel's basis outputs.

    The deficiency projector ``I - supp(Pi)``, on which no output state has
    weight, is merged into outcome 0 so the POVM has exactly one outcome per
    basis vector.
    """
    d = basis.dim
    if chan.dim_in != d:
        raise ValueError(
            f"channel input dim {chan.dim_in} != basis dim {d}"
        )
    dc = chan.dim_out
    cdims = chan.out_dims
    if rank_tol is None:
        rank_tol = tols.rank_tol(dc)

    ks = chan.kraus_stack()
    taus = []
    lam_min = math.inf
    ill = False
    for j in range(d):
        cols = ks @ basis.column(j)
        tau = cols.T @ cols.conj()
        tau = (tau + tau.conj().T) / 2
        taus.append(Operator(tau, cdims, cdims))
        w = np.linalg.eigvalsh(tau)
        cut = rank_tol * max(float(w[-1]), 0.0)
        nonzero = w[w > cut]
        if nonzero.size == 0:
            raise ValueError(f"output state {j} is numerically zero")
        lam_j = float(nonzero[0])
        lam_min = min(lam_min, lam_j)
        ill = ill or lam_j < 10.0 * cut

    pi_d = Operator(np.eye(d) / d, (d,), (d,))
    tau_avg = apply_channel(chan, pi_d)

    projectors = tuple(
        support_projection(tau, rank_tol=rank_tol, tols=tols) for tau in taus
    )
    pi_sum = Operator(
        sum(p.data for p in projectors), cdims, cdims
    )
    inv_root = func_on_support(
        pi_sum, lambda x: x**-0.5, rank_tol=rank_tol, tols=tols
    )
    elements = []
    for p in projectors:
        m = inv_root.data @ p.data @ inv_root.data
        elements.append((m + m.conj().T) / 2)
    # deficiency of supp(Pi): outputs never land there, fold into outcome 0
    support = func_on_support(pi_sum, np.ones_like, rank_tol=rank_tol, tols=tols)
    elements[0] = elements[0] + (np.eye(dc) - support.data)
    povm = Povm(tuple(Operator(m, cdims, cdims) for m in elements))

    return PpgmBundle(
        povm=povm,
        projectors=projectors,
        pi_sum=pi_sum,
        tau_states=tuple(taus),
        tau_avg=tau_avg,
        lambda_min=lam_min,
        ill_conditioned=ill,
        rank_tol=rank_tol,
    )


def ppgm_error(bundle: PpgmBundle) -> float:
    """Classical decoding error of the measurement on its own channel.

    Reads the cached output states, so every bound below is evaluated on
    exactly the same data.
    """
    d = len(bundle.tau_states)
    total = 0.0
    for i, tau in enumerate(bundle.tau_states):
        for j, m in enumerate(bundle.povm):
            if j == i:
                continue
            total += float(np.einsum("ij,ji->", tau.data, m.data).real)
    return total / d


def pairwise_bound(bundle: PpgmBundle) -> tuple[float, float, float]:
    """Pairwise-overlap bound on the decoding error, in two algebraic forms.

    Returns ``(sum_form, entropy_form, lambda_min)`` where::

        sum_form     = (1 / (d lambda_min)) sum_{i != j} tr[tau_i tau_j]
        entropy_form = (1 / lambda_min) (d 2^{-H2(tau_avg)}
                                         - (1/d) sum_j 2^{-H2(tau_j)})

    The two agree identically because ``tau_avg`` is the mean of the
    ``tau_j``.  Values above 1 are vacuous; they occur when ``lambda_min``
    is small (the flagged ill-conditioned instances).
    """
    d = len(bundle.tau_states)
    lam = bundle.lambda_min
    stack = np.stack([t.data for t in bundle.tau_states])
    gram = np.einsum("iab,jba->ij", stack, stack).real
    off = float(gram.sum() - np.trace(gram))
    sum_form = off / (d * lam)
    h2_avg = collision_entropy(bundle.tau_avg)
    h2_each = [collision_entropy(t) for t in bundle.tau_states]
    entropy_form = (
        d * 2.0**-h2_avg - sum(2.0**-h for h in h2_each) / d
    ) / lam
    return sum_form, entropy_form, lam


def support_bound(bundle: PpgmBundle) -> float:
    """Support-overlap bound ``(1/d) sum_{i != j} tr[Pi_i tau_j]``.

    Sits between the decoding error and the pairwise bound: projectors
    dominate the error analysis, and ``lambda_min Pi_i <= tau_i`` turns each
    projector into a state overlap.
    """
    d = len(bundle.tau_states)
    p = np.stack([q.data for q in bundle.projectors])
    t = np.stack([q.data for q in bundle.tau_states])
    cross = np.einsum("iab,jba->ij", p, t).real
    return float(cross.sum() - np.trace(cross)) / d
