# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled training, evaluation and Fisher kernels.

Semantics mirror statesep._kernel_py exactly (same chunk contract, same
predecessor chaining, same stable sigmoid/softmax formulas); only the
execution strategy differs. Floating-point reductions use a fixed 4-way
unrolled order, so results are deterministic run to run but agree with
the numpy backend only to rounding order, not bit for bit.
"""
from libc.math cimport exp, fabs, log, tanh

import numpy as np

BACKEND = "compiled"


cdef inline double _sigmoid(double v) nogil:
    cdef double t = exp(-fabs(v))
    if v >= 0.0:
        return 1.0 / (1.0 + t)
    return t / (1.0 + t)


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) nogil:
    """Fixed-order 4-accumulator dot product."""
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t n4 = n & ~3
    while i < n4:
        s0 += a[i] * b[i]
        s1 += a[i + 1] * b[i + 1]
        s2 += a[i + 2] * b[i + 2]
        s3 += a[i + 3] * b[i + 3]
        i += 4
    while i < n:
        s0 += a[i] * b[i]
        i += 1
    return (s0 + s1) + (s2 + s3)


cdef inline void _axpy(double* y, double a, const double* x, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    for i in range(n):
        y[i] += a * x[i]


cdef void _chain(long[::1] rows, long[::1] pred) nogil:
    cdef Py_ssize_t T = rows.shape[0]
    cdef Py_ssize_t k, j
    for k in range(T):
        pred[k] = -1
        for j in range(k - 1, -1, -1):
            if rows[j] == rows[k]:
                pred[k] = j
                break


cdef void _forward_c(const double* flat, long V, long D, long H,
                     long[::1] ids, long[::1] rows, long[::1] pred,
                     double[:, ::1] c_bank, double[:, ::1] h_bank,
                     double[:, ::1] F, double[:, ::1] I, double[:, ::1] G,
                     double[:, ::1] O, double[:, ::1] C, double[:, ::1] TC,
                     double[:, ::1] Hs, double[:, ::1] Cin,
                     double[:, ::1] Hin, double[:, ::1] logits,
                     double* a) nogil:
    cdef Py_ssize_t T = ids.shape[0]
    cdef const double* wx = flat + V * D
    cdef const double* wh = wx + 4 * H * D
    cdef const double* b = wh + 4 * H * H
    cdef const double* wo = b + 4 * H
    cdef const double* bo = wo + V * H
    cdef Py_ssize_t k, j, v, pk
    cdef const double* x
    cdef double* hin
    cdef double c

    for k in range(T):
        pk = pred[k]
        if pk >= 0:
            for j in range(H):
                Cin[k, j] = C[pk, j]
                Hin[k, j] = Hs[pk, j]
        else:
            for j in range(H):
                Cin[k, j] = c_bank[rows[k], j]
                Hin[k, j] = h_bank[rows[k], j]
        x = flat + ids[k] * D
        hin = &Hin[k, 0]
        for j in range(4 * H):
            a[j] = b[j] + _dot(wx + j * D, x, D) + _dot(wh + j * H, hin, H)
        for j in range(H):
            F[k, j] = _sigmoid(a[j])
            I[k, j] = _sigmoid(a[H + j])
            G[k, j] = tanh(a[2 * H + j])
            O[k, j] = _sigmoid(a[3 * H + j])
            c = F[k, j] * Cin[k, j] + I[k, j] * G[k, j]
            C[k, j] = c
            TC[k, j] = tanh(c)
            Hs[k, j] = O[k, j] * TC[k, j]
        for v in range(V):
            logits[k, v] = bo[v] + _dot(wo + v * H, &Hs[k, 0], H)


cdef void _commit_c(long[::1] rows, double[:, ::1] C, double[:, ::1] Hs,
                    double[:, ::1] c_bank, double[:, ::1] h_bank) nogil:
    cdef Py_ssize_t T = rows.shape[0]
    cdef Py_ssize_t H = C.shape[1]
    cdef Py_ssize_t k, j
    for k in range(T):
        for j in range(H):
            c_bank[rows[k], j] = C[k, j]
            h_bank[rows[k], j] = Hs[k, j]


cdef double _loss_correct_c(double[:, ::1] logits, long[::1] targets,
                            double[:, ::1] probs, long* n_correct) nogil:
    cdef Py_ssize_t T = logits.shape[0]
    cdef Py_ssize_t V = logits.shape[1]
    cdef Py_ssize_t k, v, best
    cdef double mx, s, loss_sum
    loss_sum = 0.0
    n_correct[0] = 0
    for k in range(T):
        mx = logits[k, 0]
        best = 0
        for v in range(1, V):
            if logits[k, v] > mx:
                mx = logits[k, v]
                best = v
        s = 0.0
        for v in range(V):
            probs[k, v] = exp(logits[k, v] - mx)
            s += probs[k, v]
        for v in range(V):
            probs[k, v] /= s
        loss_sum += log(s) - (logits[k, targets[k]] - mx)
        if best == targets[k]:
            n_correct[0] += 1
    return loss_sum


cdef void _gate_grads(double* da, const double* dc_io, const double* dh_io,
                      double[:, ::1] F, double[:, ::1] I, double[:, ::1] G,
                      double[:, ::1] O, double[:, ::1] TC,
                      double[:, ::1] Cin, Py_ssize_t k, Py_ssize_t H,
                      double* dc_out) nogil:
    """Gate preactivation gradients for one step.

    dc_io/dh_io carry the cell/hidden gradients flowing into step k's
    outputs; dc_out receives the total cell gradient (used both for the
    forget-gate term and the predecessor's carry).
    """
    cdef Py_ssize_t j
    cdef double dck, dok
    for j in range(H):
        dck = dc_io[j] + dh_io[j] * O[k, j] * (1.0 - TC[k, j] * TC[k, j])
        dok = dh_io[j] * TC[k, j]
        dc_out[j] = dck
        da[j] = dck * Cin[k, j] * F[k, j] * (1.0 - F[k, j])
        da[H + j] = dck * G[k, j] * I[k, j] * (1.0 - I[k, j])
        da[2 * H + j] = dck * I[k, j] * (1.0 - G[k, j] * G[k, j])
        da[3 * H + j] = dok * O[k, j] * (1.0 - O[k, j])


cdef void _param_grads(double* out, const double* flat, const double* da,
                       long V, long D, long H, long sym,
                       const double* hin) nogil:
    """Accumulate one step's parameter gradients from gate gradients:
    biases, input/recurrent weight outer products, and the embedding row
    via the transposed input weights."""
    cdef const double* wx = flat + V * D
    cdef double* g_wx = out + V * D
    cdef double* g_wh = g_wx + 4 * H * D
    cdef double* g_b = g_wh + 4 * H * H
    cdef double* g_x = out + sym * D
    cdef Py_ssize_t j
    cdef const double* x = flat + sym * D
    for j in range(4 * H):
        g_b[j] += da[j]
        _axpy(g_wx + j * D, da[j], x, D)
        _axpy(g_wh + j * H, da[j], hin, H)
        _axpy(g_x, da[j], wx + j * D, D)


def train_chunk(double[::1] flat, double[::1] grad, long V, long D, long H,
                long[::1] ids, long[::1] targets, long[::1] rows,
                double[:, ::1] c_bank, double[:, ::1] h_bank):
    """Forward and backward over one chunk; same contract as the numpy
    backend's train_chunk."""
    cdef Py_ssize_t T = ids.shape[0]
    cdef Py_ssize_t H4 = 4 * H
    scratch = [np.empty((T, H)) for _ in range(9)]
    cdef double[:, ::1] F = scratch[0]
    cdef double[:, ::1] I = scratch[1]
    cdef double[:, ::1] G = scratch[2]
    cdef double[:, ::1] O = scratch[3]
    cdef double[:, ::1] C = scratch[4]
    cdef double[:, ::1] TC = scratch[5]
    cdef double[:, ::1] Hs = scratch[6]
    cdef double[:, ::1] Cin = scratch[7]
    cdef double[:, ::1] Hin = scratch[8]
    cdef double[:, ::1] logits = np.empty((T, V))
    cdef double[:, ::1] probs = np.empty((T, V))
    cdef double[::1] a = np.empty(H4)
    cdef long[::1] pred = np.empty(T, dtype=np.int64)
    cdef double[:, ::1] dh_acc = np.zeros((T, H))
    cdef double[:, ::1] dc_acc = np.zeros((T, H))
    cdef double[::1] da = np.empty(H4)
    cdef double[::1] dh = np.empty(H)
    cdef double[::1] dc = np.empty(H)

    cdef double* fp = &flat[0]
    cdef double* gp = &grad[0]
    cdef const double* wh = fp + V * D + 4 * H * D
    cdef double* g_wo = gp + V * D + 4 * H * D + 4 * H * H + 4 * H
    cdef double* g_bo = g_wo + V * H
    cdef const double* wo = fp + V * D + 4 * H * D + 4 * H * H + 4 * H
    cdef Py_ssize_t k, j, v, pk
    cdef double loss_sum, dl
    cdef long n_correct

    with nogil:
        _chain(rows, pred)
        _forward_c(fp, V, D, H, ids, rows, pred, c_bank, h_bank,
                   F, I, G, O, C, TC, Hs, Cin, Hin, logits, &a[0])
        loss_sum = _loss_correct_c(logits, targets, probs, &n_correct)

        for j in range(flat.shape[0]):
            gp[j] = 0.0

        # probs becomes dlogits = (softmax - onehot) / T
        for k in range(T):
            probs[k, targets[k]] -= 1.0
            for v in range(V):
                dl = probs[k, v] / T
                probs[k, v] = dl
                g_bo[v] += dl
                _axpy(g_wo + v * H, dl, &Hs[k, 0], H)

        for k in range(T - 1, -1, -1):
            for j in range(H):
                dh[j] = dh_acc[k, j]
            for v in range(V):
                _axpy(&dh[0], probs[k, v], wo + v * H, H)
            _gate_grads(&da[0], &dc_acc[k, 0], &dh[0], F, I, G, O, TC, Cin,
                        k, H, &dc[0])
            pk = pred[k]
            if pk >= 0:
                for j in range(H):
                    dc_acc[pk, j] += dc[j] * F[k, j]
                for j in range(H4):
                    _axpy(&dh_acc[pk, 0], da[j], wh + j * H, H)
            _param_grads(gp, fp, &da[0], V, D, H, ids[k], &Hin[k, 0])

        _commit_c(rows, C, Hs, c_bank, h_bank)
    return loss_sum, int(n_correct)


def eval_chunk(double[::1] flat, long V, long D, long H,
               long[::1] ids, long[::1] targets, long[::1] rows,
               double[:, ::1] c_bank, double[:, ::1] h_bank):
    """Forward-only chunk pass; same contract as the numpy backend."""
    cdef Py_ssize_t T = ids.shape[0]
    scratch = [np.empty((T, H)) for _ in range(9)]
    cdef double[:, ::1] F = scratch[0]
    cdef double[:, ::1] I = scratch[1]
    cdef double[:, ::1] G = scratch[2]
    cdef double[:, ::1] O = scratch[3]
    cdef double[:, ::1] C = scratch[4]
    cdef double[:, ::1] TC = scratch[5]
    cdef double[:, ::1] Hs = scratch[6]
    cdef double[:, ::1] Cin = scratch[7]
    cdef double[:, ::1] Hin = scratch[8]
    cdef double[:, ::1] logits = np.empty((T, V))
    cdef double[:, ::1] probs = np.empty((T, V))
    cdef double[::1] a = np.empty(4 * H)
    cdef long[::1] pred = np.empty(T, dtype=np.int64)
    cdef double loss_sum
    cdef long n_correct
    with nogil:
        _chain(rows, pred)
        _forward_c(&flat[0], V, D, H, ids, rows, pred, c_bank, h_bank,
                   F, I, G, O, C, TC, Hs, Cin, Hin, logits, &a[0])
        loss_sum = _loss_correct_c(logits, targets, probs, &n_correct)
        _commit_c(rows, C, Hs, c_bank, h_bank)
    return loss_sum, int(n_correct)


def fisher_chunk(double[::1] flat, double[::1] fish, long V, long D, long H,
                 long[::1] ids, long[::1] targets, long[::1] rows,
                 double[:, ::1] c_bank, double[:, ::1] h_bank,
                 long[::1] samples):
    """Accumulate squared per-sample log-likelihood gradients into
    ``fish``; same contract as the numpy backend."""
    cdef Py_ssize_t T = ids.shape[0]
    cdef Py_ssize_t H4 = 4 * H
    cdef Py_ssize_t P = flat.shape[0]
    scratch = [np.empty((T, H)) for _ in range(9)]
    cdef double[:, ::1] F = scratch[0]
    cdef double[:, ::1] I = scratch[1]
    cdef double[:, ::1] G = scratch[2]
    cdef double[:, ::1] O = scratch[3]
    cdef double[:, ::1] C = scratch[4]
    cdef double[:, ::1] TC = scratch[5]
    cdef double[:, ::1] Hs = scratch[6]
    cdef double[:, ::1] Cin = scratch[7]
    cdef double[:, ::1] Hin = scratch[8]
    cdef double[:, ::1] logits = np.empty((T, V))
    cdef double[::1] a = np.empty(H4)
    cdef long[::1] pred = np.empty(T, dtype=np.int64)
    cdef double[::1] acc_g = np.empty(P)
    cdef double[::1] da = np.empty(H4)
    cdef double[::1] dh = np.empty(H)
    cdef double[::1] dc = np.empty(H)
    cdef double[::1] dlog = np.empty(V)

    cdef double* fp = &flat[0]
    cdef double* ag = &acc_g[0]
    cdef const double* wh = fp + V * D + 4 * H * D
    cdef const double* wo = fp + V * D + 4 * H * D + 4 * H * H + 4 * H
    cdef double* a_wo = ag + V * D + 4 * H * D + 4 * H * H + 4 * H
    cdef double* a_bo = a_wo + V * H
    cdef Py_ssize_t si, s, k, j, v
    cdef double mx, ssum

    with nogil:
        _chain(rows, pred)
        _forward_c(fp, V, D, H, ids, rows, pred, c_bank, h_bank,
                   F, I, G, O, C, TC, Hs, Cin, Hin, logits, &a[0])
        for si in range(samples.shape[0]):
            s = samples[si]
            mx = logits[s, 0]
            for v in range(1, V):
                if logits[s, v] > mx:
                    mx = logits[s, v]
            ssum = 0.0
            for v in range(V):
                dlog[v] = exp(logits[s, v] - mx)
                ssum += dlog[v]
            for v in range(V):
                dlog[v] /= ssum
            dlog[targets[s]] -= 1.0

            for j in range(P):
                ag[j] = 0.0
            for j in range(H):
                dh[j] = 0.0
                dc[j] = 0.0
            for v in range(V):
                a_bo[v] = dlog[v]
                _axpy(a_wo + v * H, dlog[v], &Hs[s, 0], H)
                _axpy(&dh[0], dlog[v], wo + v * H, H)
            k = s
            while k >= 0:
                _gate_grads(&da[0], &dc[0], &dh[0], F, I, G, O, TC, Cin,
                            k, H, &dc[0])
                _param_grads(ag, fp, &da[0], V, D, H, ids[k], &Hin[k, 0])
                for j in range(H):
                    dh[j] = 0.0
                    dc[j] = dc[j] * F[k, j]
                for j in range(H4):
                    _axpy(&dh[0], da[j], wh + j * H, H)
                k = pred[k]

            for j in range(P):
                fish[j] += ag[j] * ag[j]

        _commit_c(rows, C, Hs, c_bank, h_bank)
    return int(samples.shape[0])
