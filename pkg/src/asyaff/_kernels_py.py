"""Pure numpy implementation of the kernels in ``_ext/_kernels.pyx``."""
import numpy as np

from .loss_core import edge_loss_arrays, edge_loss_gradient_arrays


def affinity_loss_grad(logits, a_idx, b_idx, delta, gamma, grad_out):
    if len(a_idx) != len(b_idx):
        raise ValueError("a_idx and b_idx must have equal length")
    if len(a_idx) == 0:
        return 0.0
    loss, ga, gb = edge_loss_gradient_arrays(logits[a_idx], logits[b_idx], delta, gamma)
    n = grad_out.shape[0]
    grad_out += np.bincount(a_idx, weights=ga, minlength=n)
    grad_out += np.bincount(b_idx, weights=gb, minlength=n)
    return float(loss.sum())


def affinity_loss(logits, a_idx, b_idx, delta, gamma):
    if len(a_idx) == 0:
        return 0.0
    return float(edge_loss_arrays(logits[a_idx], logits[b_idx], delta, gamma).sum())
