# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled scan kernels: same recurrence and summation order as _scan_np."""


ctypedef fused real_t:
    float
    double


def scan_fwd(const real_t[:, :, ::1] Abar, const real_t[:, :, ::1] Bbar,
             const real_t[:, :, ::1] Cmat, const real_t[::1] D,
             const real_t[:, ::1] x, real_t[:, ::1] y, real_t[:, :, ::1] h):
    cdef Py_ssize_t P = Abar.shape[0]
    cdef Py_ssize_t C = Abar.shape[1]
    cdef Py_ssize_t N = Abar.shape[2]
    cdef Py_ssize_t p, c, n
    cdef real_t xv, acc, hp, hval

    for p in range(P):
        for c in range(C):
            xv = x[p, c]
            acc = 0
            for n in range(N):
                hp = h[p - 1, c, n] if p > 0 else <real_t>0
                hval = Abar[p, c, n] * hp + Bbar[p, c, n] * xv
                h[p, c, n] = hval
                acc = acc + Cmat[p, c, n] * hval
            y[p, c] = acc + D[c] * xv


def scan_bwd(const real_t[:, :, ::1] Abar, const real_t[:, :, ::1] Bbar,
             const real_t[:, :, ::1] Cmat, const real_t[::1] D,
             const real_t[:, ::1] x, const real_t[:, :, ::1] h, const real_t[:, ::1] gy,
             real_t[:, :, ::1] dA, real_t[:, :, ::1] dB,
             real_t[:, :, ::1] dC, real_t[::1] dD, real_t[:, ::1] dx,
             real_t[:, ::1] carry):
    cdef Py_ssize_t P = Abar.shape[0]
    cdef Py_ssize_t C = Abar.shape[1]
    cdef Py_ssize_t N = Abar.shape[2]
    cdef Py_ssize_t p, c, n
    cdef real_t gyp, xv, gh, hprev, acc

    for p in range(P - 1, -1, -1):
        for c in range(C):
            gyp = gy[p, c]
            xv = x[p, c]
            acc = 0
            for n in range(N):
                gh = gyp * Cmat[p, c, n] + carry[c, n]
                dC[p, c, n] = gyp * h[p, c, n]
                hprev = h[p - 1, c, n] if p > 0 else <real_t>0
                dA[p, c, n] = gh * hprev
                dB[p, c, n] = gh * xv
                acc = acc + gh * Bbar[p, c, n]
                carry[c, n] = gh * Abar[p, c, n]
            dx[p, c] = acc + D[c] * gyp
            dD[c] = dD[c] + gyp * xv
