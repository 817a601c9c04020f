"""Pure-numpy assembly kernels; reference for the compiled ``_assembly`` module."""
import numpy as np


def assemble_cells(data, scatter, kappa, bx, by, c, N, Dx, Dy, W):
    """Accumulate Q1 element matrices into CSR ``data``.

    ``scatter[e, a, b]`` is the position of entry (test a, trial b) of cell
    ``e`` in ``data``, or -1 when either vertex is eliminated.  Coefficient
    arrays hold values at the four quadrature points of every cell.
    """
    grad = np.einsum("q,qa,qb->qab", W, Dx, Dx) + np.einsum("q,qa,qb->qab", W, Dy, Dy)
    adv_x = np.einsum("q,qa,qb->qab", W, N, Dx)
    adv_y = np.einsum("q,qa,qb->qab", W, N, Dy)
    mass = np.einsum("q,qa,qb->qab", W, N, N)
    Ke = (
        np.einsum("eq,qab->eab", kappa, grad)
        + np.einsum("eq,qab->eab", bx, adv_x)
        + np.einsum("eq,qab->eab", by, adv_y)
        + np.einsum("eq,qab->eab", c, mass)
    )
    keep = scatter >= 0
    data += np.bincount(scatter[keep], weights=Ke[keep], minlength=data.shape[0])


def assemble_load(out, scatter, fq, N, W):
    """Accumulate cell load vectors ``sum_q W f N_a`` into ``out``."""
    Fe = np.einsum("eq,q,qa->ea", fq, W, N)
    keep = scatter >= 0
    out += np.bincount(scatter[keep], weights=Fe[keep], minlength=out.shape[0])
