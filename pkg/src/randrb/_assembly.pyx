# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled assembly kernels; same contract as ``randrb._assembly_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def assemble_cells(double[::1] data, const cnp.int64_t[:, :, ::1] scatter,
                   const double[:, ::1] kappa, const double[:, ::1] bx,
                   const double[:, ::1] by, const double[:, ::1] c,
                   const double[:, ::1] N, const double[:, ::1] Dx,
                   const double[:, ::1] Dy, const double[::1] W):
    cdef Py_ssize_t ncell = scatter.shape[0]
    cdef Py_ssize_t nq = W.shape[0]
    cdef Py_ssize_t e, q, a, b
    cdef cnp.int64_t pos
    cdef double grad[4][4][4]
    cdef double advx[4][4][4]
    cdef double advy[4][4][4]
    cdef double mass[4][4][4]
    cdef double ke, kq, bxq, byq, cq
    for q in range(nq):
        for a in range(4):
            for b in range(4):
                grad[q][a][b] = W[q] * (Dx[q, a] * Dx[q, b] + Dy[q, a] * Dy[q, b])
                advx[q][a][b] = W[q] * N[q, a] * Dx[q, b]
                advy[q][a][b] = W[q] * N[q, a] * Dy[q, b]
                mass[q][a][b] = W[q] * N[q, a] * N[q, b]
    with nogil:
        for e in range(ncell):
            for a in range(4):
                for b in range(4):
                    pos = scatter[e, a, b]
                    if pos < 0:
                        continue
                    ke = 0.0
                    for q in range(nq):
                        kq = kappa[e, q]
                        bxq = bx[e, q]
                        byq = by[e, q]
                        cq = c[e, q]
                        ke = ke + kq * grad[q][a][b] + bxq * advx[q][a][b] \
                            + byq * advy[q][a][b] + cq * mass[q][a][b]
                    data[pos] += ke


def assemble_load(double[::1] out, const cnp.int64_t[:, ::1] scatter,
                  const double[:, ::1] fq, const double[:, ::1] N,
                  const double[::1] W):
    cdef Py_ssize_t ncell = scatter.shape[0]
    cdef Py_ssize_t nq = W.shape[0]
    cdef Py_ssize_t e, q, a
    cdef cnp.int64_t pos
    cdef double acc
    with nogil:
        for e in range(ncell):
            for a in range(4):
                pos = scatter[e, a]
                if pos < 0:
                    continue
                acc = 0.0
                for q in range(nq):
                    acc = acc + W[q] * fq[e, q] * N[q, a]
                out[pos] += acc
