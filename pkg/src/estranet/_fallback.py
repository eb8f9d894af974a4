"""Pure-Python label-propagation kernel.

Mirrors ``_kernels.pyx`` operation for operation (same RNG stream, same
floating-point evaluation order), so both backends return identical
partitions for identical seeds. Also the only backend that supports the
per-update callback used for instrumented runs.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
REL_MOVE_TOL = 1e-12


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def shuffle(self, a: list) -> None:
        for i in range(len(a) - 1, 0, -1):
            j = self.next() % (i + 1)
            a[i], a[j] = a[j], a[i]


def _row_sums(indptr, data, n):
    out = [0.0] * n
    for x in range(n):
        s = 0.0
        for p in range(indptr[x], indptr[x + 1]):
            s += data[p]
        out[x] = s
    return out


def _sweep_loop(n, indptr, indices, data, zptr, zidx, zdata, strength, two_m, lam,
                labels, rng, max_sweeps, on_update=None):
    K = [0.0] * n
    for x in range(n):
        K[labels[x]] += strength[x]
    acc_n = [0.0] * n
    acc_o = [0.0] * n
    mark = [False] * n
    perm = list(range(n))
    for sweep in range(1, max_sweeps + 1):
        rng.shuffle(perm)
        changed = 0
        for x in perm:
            cur = labels[x]
            kx = strength[x]
            touched = []
            for p in range(indptr[x], indptr[x + 1]):
                j = indices[p]
                if j == x:
                    continue
                lab = labels[j]
                if not mark[lab]:
                    mark[lab] = True
                    touched.append(lab)
                    acc_n[lab] = 0.0
                    acc_o[lab] = 0.0
                acc_n[lab] += data[p]
            for p in range(zptr[x], zptr[x + 1]):
                j = zidx[p]
                if j == x:
                    continue
                lab = labels[j]
                if not mark[lab]:
                    mark[lab] = True
                    touched.append(lab)
                    acc_n[lab] = 0.0
                    acc_o[lab] = 0.0
                acc_o[lab] += zdata[p]
            if mark[cur]:
                an, ao = acc_n[cur], acc_o[cur]
            else:
                an, ao = 0.0, 0.0
            cur_score = an - kx * K[cur] / two_m + kx * kx / two_m + lam * ao
            best = -1
            best_score = 0.0
            for lab in touched:
                mark[lab] = False
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
                if on_update is not None:
                    on_update(x, cur, best)
        if changed == 0:
            return sweep, True
    return max_sweeps, False


def _compact(labels, n):
    seen = [False] * n
    for lab in labels:
        seen[lab] = True
    remap = [-1] * n
    c = 0
    for lab in range(n):
        if seen[lab]:
            remap[lab] = c
            c += 1
    return [remap[lab] for lab in labels], c


def _objective(n, indptr, indices, data, zptr, zidx, zdata, strength, two_m, lam, comm, c, ztot):
    in_c = [0.0] * c
    k_c = [0.0] * c
    z_c = [0.0] * c
    for x in range(n):
        cx = comm[x]
        k_c[cx] += strength[x]
        for p in range(indptr[x], indptr[x + 1]):
            if comm[indices[p]] == cx:
                in_c[cx] += data[p]
        for p in range(zptr[x], zptr[x + 1]):
            if comm[zidx[p]] == cx:
                z_c[cx] += zdata[p]
    q = 0.0
    zin = 0.0
    for ci in range(c):
        f = k_c[ci] / two_m
        q += in_c[ci] / two_m - f * f
        zin += z_c[ci]
    return q + lam * (zin - ztot) / two_m


def _induce(n, indptr, indices, data, comm, c):
    members = [[] for _ in range(c)]
    for x in range(n):
        members[comm[x]].append(x)
    acc = [0.0] * c
    mark = [False] * c
    new_ptr = [0]
    new_idx = []
    new_data = []
    for ci in range(c):
        touched = []
        for x in members[ci]:
            for p in range(indptr[x], indptr[x + 1]):
                d = comm[indices[p]]
                if not mark[d]:
                    mark[d] = True
                    touched.append(d)
                    acc[d] = 0.0
                acc[d] += data[p]
        for d in touched:
            new_idx.append(d)
            new_data.append(acc[d])
            mark[d] = False
        new_ptr.append(len(new_idx))
    return new_ptr, new_idx, new_data


class Problem:
    """A snapshot and its history weights converted once for repeated runs."""

    def __init__(self, indptr, indices, data, zptr, zidx, zdata):
        self.indptr, self.indices, self.data = list(indptr), list(indices), list(data)
        self.zptr, self.zidx, self.zdata = list(zptr), list(zidx), list(zdata)
        self.n = len(self.indptr) - 1
        if len(self.zptr) - 1 != self.n:
            raise ValueError("history weights do not match the graph")
        self.strength = _row_sums(self.indptr, self.data, self.n)
        two_m = 0.0
        for s in self.strength:
            two_m += s
        self.two_m = two_m
        ztot = 0.0
        for v in self.zdata:
            ztot += v
        self.ztot = ztot

    def lpa_level(self, lam, labels, seed, max_sweeps, on_update=None):
        """Converge label updates on the base level. Returns ``(labels, sweeps, converged)``."""
        labels = [int(v) for v in labels]
        if len(labels) != self.n:
            raise ValueError("labels must cover every node")
        sweeps, ok = _sweep_loop(self.n, self.indptr, self.indices, self.data, self.zptr,
                                 self.zidx, self.zdata, self.strength, self.two_m, float(lam),
                                 labels, SplitMix64(seed), max_sweeps, on_update)
        return np.asarray(labels, dtype=np.int64), sweeps, ok

    def hlpa(self, lam, seed, max_sweeps, level_eps, init=None):
        """One hierarchical run. Returns ``(labels, objective, levels, converged)``.

        ``labels`` are compact over the original nodes; ``objective`` is
        ``Q - lam*E`` of the returned partition.
        """
        n = self.n
        lam = float(lam)
        indptr, indices, data = self.indptr, self.indices, self.data
        zptr, zidx, zdata = self.zptr, self.zidx, self.zdata
        strength, two_m, ztot = self.strength, self.two_m, self.ztot
        rng = SplitMix64(seed)
        if init is None:
            labels = list(range(n))
        else:
            labels = [int(v) for v in init]
            if len(labels) != n:
                raise ValueError("init must cover every node")
        _, ok = _sweep_loop(n, indptr, indices, data, zptr, zidx, zdata, strength, two_m, lam,
                            labels, rng, max_sweeps)
        comm, c = _compact(labels, n)
        if not ok:
            return np.asarray(comm, dtype=np.int64), float("nan"), 1, False
        best = _objective(n, indptr, indices, data, zptr, zidx, zdata, strength, two_m, lam,
                          comm, c, ztot)
        orig = comm[:]
        levels = 1
        n_level = n
        while 1 < c < n_level:
            indptr, indices, data = _induce(n_level, indptr, indices, data, comm, c)
            zptr, zidx, zdata = _induce(n_level, zptr, zidx, zdata, comm, c)
            n_level = c
            strength = _row_sums(indptr, data, n_level)
            labels = list(range(n_level))
            _, ok = _sweep_loop(n_level, indptr, indices, data, zptr, zidx, zdata, strength,
                                two_m, lam, labels, rng, max_sweeps)
            comm, c = _compact(labels, n_level)
            if not ok:
                out, _ = _compact([comm[o] for o in orig], n)
                return np.asarray(out, dtype=np.int64), float("nan"), levels + 1, False
            obj = _objective(n_level, indptr, indices, data, zptr, zidx, zdata, strength,
                             two_m, lam, comm, c, ztot)
            if obj <= best + level_eps:
                break
            best = obj
            orig = [comm[o] for o in orig]
            levels += 1
        return np.asarray(orig, dtype=np.int64), best, levels, True
