"""Capsule primitives: the squash nonlinearity and routing-by-agreement."""

from __future__ import annotations

import numpy as np


def squash(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shrink vector norms into [0, 1) while preserving direction.

    Computes (|v|^2 / (1 + |v|^2)) * v/|v|, written as v * |v|/(1 + |v|^2)
    so the zero vector maps to the zero vector without a division.
    """
    sq = np.sum(np.square(v), axis=axis, keepdims=True)
    return v * (np.sqrt(sq) / (1.0 + sq))


def route(votes: np.ndarray, iters: int, return_couplings: bool = False):
    """Dynamic routing over vote vectors.

    votes has shape (input_capsules, output_capsules, dim): votes[i, j] is
    input capsule i's prediction for output capsule j. Logits start at zero;
    each of the ``iters`` rounds computes couplings c = softmax over the
    output axis, weighted sums s_j, squashed outputs v_j, and the agreement
    update b_ij += votes_ij . v_j.

    Returns the (output_capsules, dim) array of output vectors, or a
    (outputs, couplings) pair when return_couplings is set — couplings are
    the ones used to form the returned outputs.
    """
    if votes.ndim != 3:
        raise ValueError(f"votes must be (inputs, outputs, dim), got {votes.shape}")
    if iters < 1:
        raise ValueError(f"routing needs at least 1 iteration, got {iters}")

    logits = np.zeros(votes.shape[:2], dtype=np.float64)
    out = couplings = None
    for _ in range(iters):
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        couplings = exp / exp.sum(axis=1, keepdims=True)
        pooled = np.einsum("ij,ijd->jd", couplings, votes)
        out = squash(pooled, axis=-1)
        logits = logits + np.einsum("ijd,jd->ij", votes, out)
    if return_couplings:
        return out, couplings
    return out
