"""Slow, obviously-correct reference implementations.

Everything here is written for auditability, not speed: plain index loops,
no factorization libraries.  The fast paths in the other modules are tested
against these on small instances.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DenseEigReport:
    eigenvalues: np.ndarray  # sorted descending
    eigenvectors: np.ndarray  # orthonormal columns, eigenvectors[:, i] <-> eigenvalues[i]


def dense_eig(a: np.ndarray) -> DenseEigReport:
    """Full spectrum of a symmetric matrix via cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm is <= 1e-12 * ||a||_F.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    m = a.shape[0]
    if m > 4096:
        raise ValueError(f"matrix too large for the Jacobi oracle: {m} > 4096")
    sym_err = float(np.max(np.abs(a - a.T)))
    if sym_err > 1e-8 * max(1.0, float(np.max(np.abs(a)))):
        raise ValueError(f"input not symmetric, max |a - a^T| = {sym_err!r}")

    w = a.copy()
    v = np.eye(m)
    norm_f = float(np.linalg.norm(a))
    if norm_f == 0.0:
        return DenseEigReport(np.zeros(m), np.eye(m))
    target = 1e-12 * norm_f
    # entries this small cannot push the off-diagonal norm past the target
    # even if every one of them survives: m^2 * (target/2m)^2 = target^2/4
    skip = target / (2.0 * m)

    def _off(mat):
        # summed directly over off-diagonal entries; the difference-of-norms
        # form cancels catastrophically near convergence
        return float(np.sqrt(np.sum((mat - np.diag(np.diag(mat))) ** 2)))

    for _ in range(80):  # sweeps; cyclic Jacobi converges far sooner
        if _off(w) <= target:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = w[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rp = w[p, :].copy()
                rq = w[q, :].copy()
                w[p, :] = c * rp - s * rq
                w[q, :] = s * rp + c * rq
                cp = w[:, p].copy()
                cq = w[:, q].copy()
                w[:, p] = c * cp - s * cq
                w[:, q] = s * cp + c * cq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    if _off(w) > target:
        raise RuntimeError("Jacobi sweeps failed to reach the off-diagonal target")
    vals = np.diag(w).copy()
    order = np.argsort(-vals)
    vals = vals[order]
    vecs = v[:, order]
    # deterministic sign: largest-|entry| coordinate positive
    for i in range(m):
        j = int(np.argmax(np.abs(vecs[:, i])))
        if vecs[j, i] < 0:
            vecs[:, i] = -vecs[:, i]
    return DenseEigReport(vals, vecs)


def naive_M(components, g: np.ndarray) -> np.ndarray:
    """Literal d^2 x d^2 matrix sum_{i,j} <g, T(a_i kron a_j)> (a_i kron a_j)(...)^T.

    T(a_i kron a_j) is expanded as sum_l <a_l, a_i> <a_l, a_j> a_l.  Guarded
    to d^4 <= 10^7 entries.
    """
    comps = [np.asarray(c, dtype=np.float64) for c in components]
    d = comps[0].size
    if d**4 > 10**7:
        raise ValueError(f"d^4 = {d**4} exceeds the 10^7 guard")
    g = np.asarray(g, dtype=np.float64)
    m = np.zeros((d * d, d * d))
    for ai in comps:
        for aj in comps:
            coeff = 0.0
            for al in comps:
                coeff += float(g @ al) * float(al @ ai) * float(al @ aj)
            x = np.kron(ai, aj)
            m += coeff * np.outer(x, x)
    return m


def naive_partial_trace(m: np.ndarray) -> np.ndarray:
    """Index-sum partial trace over the first factor: out[j,l] = sum_i m[(i,j),(i,l)]."""
    m = np.asarray(m, dtype=np.float64)
    d = int(round(np.sqrt(m.shape[0])))
    if m.shape != (d * d, d * d):
        raise ValueError(f"expected (d^2, d^2), got {m.shape}")
    out = np.zeros((d, d))
    for j in range(d):
        for l in range(d):
            s = 0.0
            for i in range(d):
                s += m[i * d + j, i * d + l]
            out[j, l] = s
    return out


def naive_ptm(t) -> np.ndarray:
    """Index-sum partial trace of a 3-tensor: sum_i (sum_j t[i,j,j]) * t[i,:,:]."""
    e = np.asarray(t.entries if hasattr(t, "entries") else t, dtype=np.float64)
    d = e.shape[0]
    out = np.zeros((d, d))
    for i in range(d):
        tr = 0.0
        for j in range(d):
            tr += e[i, j, j]
        out += tr * e[i, :, :]
    return out


def greedy_match(truth, found):
    """Greedy maximum-|cosine| matching of found vectors onto true ones.

    Returns (pi, cosines) where pi[i] is the index in `found` matched to
    truth[i] (or -1 when |found| < |truth| leaves it unmatched) and
    cosines[i] = |<truth[i], found[pi[i]]>|.  Ties break toward lower
    indices, so the result is deterministic given input order.
    """
    tm = np.asarray(truth, dtype=np.float64)
    fm = np.asarray(found, dtype=np.float64)
    nt = tm.shape[0]
    nf = fm.shape[0] if fm.size else 0
    if nf > nt:
        raise ValueError(f"|found| = {nf} exceeds |truth| = {nt}")
    pi = np.full(nt, -1, dtype=np.int64)
    cosines = np.zeros(nt)
    if nf == 0:
        return pi, cosines
    c = np.abs(tm @ fm.T)
    cells = sorted(((-c[i, j], i, j) for i in range(nt) for j in range(nf)))
    used_t = set()
    used_f = set()
    for negc, i, j in cells:
        if i in used_t or j in used_f:
            continue
        used_t.add(i)
        used_f.add(j)
        pi[i] = j
        cosines[i] = -negc
        if len(used_f) == nf:
            break
    return pi, cosines
