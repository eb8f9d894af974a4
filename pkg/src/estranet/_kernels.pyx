# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled label-propagation kernel.

Keep in lockstep with ``_fallback.py``: identical RNG stream and the same
floating-point evaluation order, so both backends agree bit for bit.
"""

import numpy as np

from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport calloc, free, malloc
from libc.math cimport NAN

cdef double REL_MOVE_TOL = 1e-12


cdef inline uint64_t _next(uint64_t* st) noexcept nogil:
    st[0] += 0x9E3779B97F4A7C15ULL
    cdef uint64_t z = st[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline void _shuffle(int64_t* a, int64_t n, uint64_t* st) noexcept nogil:
    cdef int64_t i = n - 1, j, tmp
    while i > 0:
        j = <int64_t>(_next(st) % <uint64_t>(i + 1))
        tmp = a[i]
        a[i] = a[j]
        a[j] = tmp
        i -= 1


cdef struct Csr:
    int64_t n
    int64_t* ptr
    int64_t* idx
    double* val


cdef void _csr_free(Csr* m) noexcept nogil:
    free(m.ptr)
    free(m.idx)
    free(m.val)
    m.ptr = NULL
    m.idx = NULL
    m.val = NULL


cdef int _csr_from_arrays(Csr* out, indptr, indices, data) except -1:
    cdef const int64_t[::1] p = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int[::1] ix = np.ascontiguousarray(indices, dtype=np.int32)
    cdef const double[::1] v = np.ascontiguousarray(data, dtype=np.float64)
    cdef int64_t n = p.shape[0] - 1, nnz = p[n], i
    out.n = n
    out.ptr = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    out.idx = <int64_t*>malloc((nnz + 1) * sizeof(int64_t))
    out.val = <double*>malloc((nnz + 1) * sizeof(double))
    if out.ptr == NULL or out.idx == NULL or out.val == NULL:
        _csr_free(out)
        raise MemoryError()
    for i in range(n + 1):
        out.ptr[i] = p[i]
    for i in range(nnz):
        out.idx[i] = ix[i]
        out.val[i] = v[i]
    return 0


cdef void _row_sums(Csr* m, double* out) noexcept nogil:
    cdef int64_t x, p
    cdef double s
    for x in range(m.n):
        s = 0.0
        for p in range(m.ptr[x], m.ptr[x + 1]):
            s += m.val[p]
        out[x] = s


cdef int _sweep_loop(Csr* a, Csr* z, double* strength, double two_m, double lam,
                     int64_t* labels, uint64_t* st, int64_t max_sweeps,
                     int64_t* sweeps_out) noexcept nogil:
    """1 converged, 0 out of sweeps, -1 allocation failure."""
    cdef int64_t n = a.n
    cdef double* K = <double*>calloc(n + 1, sizeof(double))
    cdef double* acc_n = <double*>malloc((n + 1) * sizeof(double))
    cdef double* acc_o = <double*>malloc((n + 1) * sizeof(double))
    cdef char* mark = <char*>calloc(n + 1, sizeof(char))
    cdef int64_t* touched = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef int64_t* perm = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef int64_t x, i, p, j, lab, cur, best, nt, changed, sweep
    cdef double kx, an, ao, cur_score, best_score, s
    cdef int status = 0
    if K == NULL or acc_n == NULL or acc_o == NULL or mark == NULL or touched == NULL or perm == NULL:
        status = -1
    else:
        for x in range(n):
            K[labels[x]] += strength[x]
            perm[x] = x
        sweeps_out[0] = max_sweeps
        for sweep in range(1, max_sweeps + 1):
            _shuffle(perm, n, st)
            changed = 0
            for i in range(n):
                x = perm[i]
                cur = labels[x]
                kx = strength[x]
                nt = 0
                for p in range(a.ptr[x], a.ptr[x + 1]):
                    j = a.idx[p]
                    if j == x:
                        continue
                    lab = labels[j]
                    if not mark[lab]:
                        mark[lab] = 1
                        touched[nt] = lab
                        nt += 1
                        acc_n[lab] = 0.0
                        acc_o[lab] = 0.0
                    acc_n[lab] += a.val[p]
                for p in range(z.ptr[x], z.ptr[x + 1]):
                    j = z.idx[p]
                    if j == x:
                        continue
                    lab = labels[j]
                    if not mark[lab]:
                        mark[lab] = 1
                        touched[nt] = lab
                        nt += 1
                        acc_n[lab] = 0.0
                        acc_o[lab] = 0.0
                    acc_o[lab] += z.val[p]
                if mark[cur]:
                    an = acc_n[cur]
                    ao = acc_o[cur]
                else:
                    an = 0.0
                    ao = 0.0
                cur_score = an - kx * K[cur] / two_m + kx * kx / two_m + lam * ao
                best = -1
                best_score = 0.0
                for j in range(nt):
                    lab = touched[j]
                    mark[lab] = 0
                    if lab == cur:
                        continue
                    s = acc_n[lab] - kx * K[lab] / two_m + lam * acc_o[lab]
                    if best < 0 or s > best_score or (s == best_score and lab < best):
                        best = lab
                        best_score = s
                if best >= 0 and best_score > cur_score + REL_MOVE_TOL * kx:
                    K[cur] -= kx
                    K[best] += kx
                    labels[x] = best
                    changed += 1
            if changed == 0:
                sweeps_out[0] = sweep
                status = 1
                break
    free(K)
    free(acc_n)
    free(acc_o)
    free(mark)
    free(touched)
    free(perm)
    return status


cdef int64_t _compact(int64_t* labels, int64_t n, int64_t* out) noexcept nogil:
    """Relabel into 0..c-1 by increasing label value; returns c, or -1 on failure."""
    cdef int64_t* remap = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef int64_t x, lab, c = 0
    if remap == NULL:
        return -1
    for lab in range(n):
        remap[lab] = -1
    for x in range(n):
        remap[labels[x]] = 0
    for lab in range(n):
        if remap[lab] == 0:
            remap[lab] = c
            c += 1
    for x in range(n):
        out[x] = remap[labels[x]]
    free(remap)
    return c


cdef double _objective(Csr* a, Csr* z, double* strength, double two_m, double lam,
                       int64_t* comm, int64_t c, double ztot) noexcept nogil:
    cdef double* in_c = <double*>calloc(c + 1, sizeof(double))
    cdef double* k_c = <double*>calloc(c + 1, sizeof(double))
    cdef double* z_c = <double*>calloc(c + 1, sizeof(double))
    cdef int64_t x, p, cx, ci
    cdef double q = 0.0, zin = 0.0, f, out
    if in_c == NULL or k_c == NULL or z_c == NULL:
        free(in_c)
        free(k_c)
        free(z_c)
        return NAN
    for x in range(a.n):
        cx = comm[x]
        k_c[cx] += strength[x]
        for p in range(a.ptr[x], a.ptr[x + 1]):
            if comm[a.idx[p]] == cx:
                in_c[cx] += a.val[p]
        for p in range(z.ptr[x], z.ptr[x + 1]):
            if comm[z.idx[p]] == cx:
                z_c[cx] += z.val[p]
    for ci in range(c):
        f = k_c[ci] / two_m
        q += in_c[ci] / two_m - f * f
        zin += z_c[ci]
    out = q + lam * (zin - ztot) / two_m
    free(in_c)
    free(k_c)
    free(z_c)
    return out


cdef int _induce(Csr* m, int64_t* comm, int64_t c, Csr* out) noexcept nogil:
    cdef int64_t n = m.n, nnz = m.ptr[n]
    cdef int64_t* start = <int64_t*>calloc(c + 2, sizeof(int64_t))
    cdef int64_t* members = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef int64_t* fill = <int64_t*>malloc((c + 1) * sizeof(int64_t))
    cdef double* acc = <double*>malloc((c + 1) * sizeof(double))
    cdef char* mark = <char*>calloc(c + 1, sizeof(char))
    cdef int64_t* touched = <int64_t*>malloc((c + 1) * sizeof(int64_t))
    cdef int64_t x, ci, k, p, d, nt, pos = 0
    out.n = c
    out.ptr = <int64_t*>malloc((c + 1) * sizeof(int64_t))
    out.idx = <int64_t*>malloc((nnz + 1) * sizeof(int64_t))
    out.val = <double*>malloc((nnz + 1) * sizeof(double))
    if (start == NULL or members == NULL or fill == NULL or acc == NULL or mark == NULL
            or touched == NULL or out.ptr == NULL or out.idx == NULL or out.val == NULL):
        free(start)
        free(members)
        free(fill)
        free(acc)
        free(mark)
        free(touched)
        _csr_free(out)
        return -1
    # counting sort keeps members in increasing node order
    for x in range(n):
        start[comm[x] + 1] += 1
    for ci in range(c):
        start[ci + 1] += start[ci]
        fill[ci] = start[ci]
    for x in range(n):
        members[fill[comm[x]]] = x
        fill[comm[x]] += 1
    out.ptr[0] = 0
    for ci in range(c):
        nt = 0
        for k in range(start[ci], start[ci + 1]):
            x = members[k]
            for p in range(m.ptr[x], m.ptr[x + 1]):
                d = comm[m.idx[p]]
                if not mark[d]:
                    mark[d] = 1
                    touched[nt] = d
                    nt += 1
                    acc[d] = 0.0
                acc[d] += m.val[p]
        for k in range(nt):
            d = touched[k]
            out.idx[pos] = d
            out.val[pos] = acc[d]
            mark[d] = 0
            pos += 1
        out.ptr[ci + 1] = pos
    free(start)
    free(members)
    free(fill)
    free(acc)
    free(mark)
    free(touched)
    return 0


cdef class Problem:
    """A snapshot and its history weights converted once for repeated runs."""

    cdef Csr a
    cdef Csr z
    cdef double* strength
    cdef double two_m
    cdef double ztot
    cdef readonly int64_t n

    def __cinit__(self, indptr, indices, data, zptr, zidx, zdata):
        cdef int64_t x
        self.a.ptr = NULL
        self.z.ptr = NULL
        self.strength = NULL
        _csr_from_arrays(&self.a, indptr, indices, data)
        _csr_from_arrays(&self.z, zptr, zidx, zdata)
        if self.z.n != self.a.n:
            raise ValueError("history weights do not match the graph")
        self.n = self.a.n
        self.strength = <double*>malloc((self.n + 1) * sizeof(double))
        if self.strength == NULL:
            raise MemoryError()
        _row_sums(&self.a, self.strength)
        self.two_m = 0.0
        for x in range(self.n):
            self.two_m += self.strength[x]
        self.ztot = 0.0
        for x in range(self.z.ptr[self.n]):
            self.ztot += self.z.val[x]

    def __dealloc__(self):
        _csr_free(&self.a)
        _csr_free(&self.z)
        free(self.strength)

    def lpa_level(self, double lam, labels, uint64_t seed, int64_t max_sweeps, on_update=None):
        """Converge label updates on the base level. Returns ``(labels, sweeps, converged)``."""
        if on_update is not None:
            raise NotImplementedError("per-update callbacks need the pure-Python backend")
        out = np.array(labels, dtype=np.int64, copy=True)
        if out.shape[0] != self.n:
            raise ValueError("labels must cover every node")
        cdef int64_t[::1] lab = out
        cdef int64_t sweeps = 0
        cdef uint64_t st = seed
        cdef int status
        with nogil:
            status = _sweep_loop(&self.a, &self.z, self.strength, self.two_m, lam, &lab[0],
                                 &st, max_sweeps, &sweeps)
        if status < 0:
            raise MemoryError()
        return out, int(sweeps), status == 1

    def hlpa(self, double lam, uint64_t seed, int64_t max_sweeps, double level_eps, init=None):
        """One hierarchical run. Returns ``(labels, objective, levels, converged)``."""
        cdef int64_t n = self.n, n_level, x, c, c2, levels = 1, sweeps
        if init is None:
            labels_arr = np.arange(n, dtype=np.int64)
        else:
            labels_arr = np.array(init, dtype=np.int64, copy=True)
            if labels_arr.shape[0] != n:
                raise ValueError("init must cover every node")
        orig_arr = np.empty(n, dtype=np.int64)
        cdef int64_t[::1] labels0 = labels_arr
        cdef int64_t[::1] orig = orig_arr
        cdef int64_t* lab = <int64_t*>malloc((n + 1) * sizeof(int64_t))
        cdef int64_t* comm = <int64_t*>malloc((n + 1) * sizeof(int64_t))
        cdef int64_t* comm2 = <int64_t*>malloc((n + 1) * sizeof(int64_t))
        cdef double* strength = <double*>malloc((n + 1) * sizeof(double))
        cdef double two_m = self.two_m, ztot = self.ztot, best = NAN, obj
        cdef uint64_t st = seed
        cdef int status = 0, failed = 0, owned = 0
        cdef Csr a = self.a, z = self.z, a2, z2
        if lab == NULL or comm == NULL or comm2 == NULL or strength == NULL:
            free(lab)
            free(comm)
            free(comm2)
            free(strength)
            raise MemoryError()
        with nogil:
            for x in range(n):
                lab[x] = labels0[x]
                strength[x] = self.strength[x]
            status = _sweep_loop(&a, &z, strength, two_m, lam, lab, &st, max_sweeps, &sweeps)
            c = _compact(lab, n, comm)
            if status < 0 or c < 0:
                failed = 1
            else:
                for x in range(n):
                    orig[x] = comm[x]
                if status == 1:
                    best = _objective(&a, &z, strength, two_m, lam, comm, c, ztot)
                    n_level = n
                    while 1 < c < n_level:
                        if _induce(&a, comm, c, &a2) < 0:
                            failed = 1
                            break
                        if _induce(&z, comm, c, &z2) < 0:
                            _csr_free(&a2)
                            failed = 1
                            break
                        if owned:
                            _csr_free(&a)
                            _csr_free(&z)
                        a = a2
                        z = z2
                        owned = 1
                        n_level = c
                        _row_sums(&a, strength)
                        for x in range(n_level):
                            lab[x] = x
                        status = _sweep_loop(&a, &z, strength, two_m, lam, lab, &st, max_sweeps, &sweeps)
                        c2 = _compact(lab, n_level, comm2)
                        if status < 0 or c2 < 0:
                            failed = 1
                            break
                        if status == 0:
                            levels += 1
                            for x in range(n):
                                comm[x] = comm2[orig[x]]
                            _compact(comm, n, comm2)
                            for x in range(n):
                                orig[x] = comm2[x]
                            break
                        obj = _objective(&a, &z, strength, two_m, lam, comm2, c2, ztot)
                        if obj <= best + level_eps:
                            break
                        best = obj
                        for x in range(n):
                            orig[x] = comm2[orig[x]]
                        for x in range(n_level):
                            comm[x] = comm2[x]
                        c = c2
                        levels += 1
            if owned:
                _csr_free(&a)
                _csr_free(&z)
        free(lab)
        free(comm)
        free(comm2)
        free(strength)
        if failed:
            raise MemoryError()
        if status == 0:
            return orig_arr, float("nan"), int(levels), False
        return orig_arr, float(best), int(levels), True
