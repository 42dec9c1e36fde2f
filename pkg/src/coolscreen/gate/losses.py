"""The five GATE loss terms on tape tensors."""

from .. import nncore as nn


class EmptyBatch(ValueError):
    pass


class MissingLabels(ValueError):
    pass


def loss_reg(y, y_hat):
    """Mean squared error over N labelled entries."""
    y, y_hat = nn.as_tensor(y), nn.as_tensor(y_hat)
    if y.shape[0] == 0:
        raise EmptyBatch("regression loss on an empty batch")
    return nn.mse(y_hat, y)


def _mean_row_sq(a, b, op):
    if a.shape != b.shape:
        raise nn.ShapeMismatch(f"{op}: {a.shape} vs {b.shape}")
    return nn.scale(nn.l2_sq(a, b), 1.0 / a.shape[0])


def loss_auto(z, z_hat):
    """(1/N) sum ||z - z_hat||^2 with z_hat = inverse(transfer(z))."""
    return _mean_row_sq(nn.as_tensor(z), nn.as_tensor(z_hat), "loss_auto")


def loss_cons(m_s, m_t):
    """(1/N) sum ||m_s - m_t||^2 for the same molecules under two tasks."""
    return _mean_row_sq(nn.as_tensor(m_s), nn.as_tensor(m_t), "loss_cons")


def loss_map(y_t, y_mapped):
    """MSE of target labels against predictions from the mapped latent."""
    y_t = nn.as_tensor(y_t)
    if y_t.shape[0] == 0:
        raise MissingLabels("mapping loss needs target labels in the batch")
    return nn.mse(nn.as_tensor(y_mapped), y_t)


def loss_dis(pivots, perturbed, transfer_s, transfer_t):
    """Distance-preservation loss.

    ``pivots`` is (N, d); ``perturbed`` is (N*M, d) with the M perturbations
    of pivot i in rows i*M .. i*M+M-1.  Returns
    (1/NM) sum_ij ||(m_i - m_ij)^(s) - (m_i - m_ij)^(t)||^2.
    """
    pivots, perturbed = nn.as_tensor(pivots), nn.as_tensor(perturbed)
    n = pivots.shape[0]
    if n == 0 or perturbed.shape[0] % n or perturbed.shape[1] != pivots.shape[1]:
        raise nn.ShapeMismatch(f"loss_dis: pivots {pivots.shape}, perturbed {perturbed.shape}")
    m = perturbed.shape[0] // n
    diff_s = nn.sub(nn.repeat_rows(transfer_s(pivots), m), transfer_s(perturbed))
    diff_t = nn.sub(nn.repeat_rows(transfer_t(pivots), m), transfer_t(perturbed))
    return nn.scale(nn.l2_sq(diff_s, diff_t), 1.0 / (n * m))
