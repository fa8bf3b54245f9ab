"""Tensor/matrix primitives shared by all three recovery algorithms.

Index convention, fixed globally: a triple (i, j, k) flattens with k varying
fastest (C order), so the mode-1 flattening of ``a (x) b (x) c`` is the d x d^2
matrix ``a (kron(b, c))^T`` and Kronecker identities hold literally.
"""

from dataclasses import dataclass, field

import numpy as np

from .rng import TAG_POWER_START, stream


class NumericError(RuntimeError):
    """Raised when an operator produces non-finite values."""


@dataclass(frozen=True)
class Tensor3:
    """Dense order-3 tensor over R^d, stored as a (d, d, d) float array.

    ``symmetric_hint`` marks tensors built as sums of symmetric rank-one
    terms; it is advisory and never enforced entrywise here.
    """

    entries: np.ndarray
    symmetric_hint: bool = False

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 3 or len(set(e.shape)) != 1:
            raise ValueError(f"expected a cubical (d,d,d) array, got shape {e.shape}")
        object.__setattr__(self, "entries", e)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SymPreconditioner:
    """Operator Pi_sym - c_d * Phi Phi^T on R^{d^2}, where Phi = sum_i e_i (x) e_i.

    The coefficient c_d = (1/d) (1 - sqrt(2/(d+2))) makes the square of this
    operator equal Pi_sym - (1/(d+2)) Phi Phi^T, and its operator norm 1.
    """

    dim: int
    coeff: float = field(init=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        d = self.dim
        object.__setattr__(self, "coeff", (1.0 / d) * (1.0 - np.sqrt(2.0 / (d + 2))))


@dataclass(frozen=True)
class PowerIterSettings:
    max_iters: int = 500
    rq_tolerance: float = 1e-10  # relative Rayleigh-quotient change
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rq_tolerance < 0:
            raise ValueError("rq_tolerance must be >= 0")


@dataclass(frozen=True)
class PowerIterReport:
    eigvec: np.ndarray  # unit vector, largest-|entry| coordinate positive
    eigval: float  # Rayleigh quotient at eigvec (signed)
    second_eigval: float  # from one deflated rerun (signed)
    iters_used: int
    gap_ratio: float  # |second_eigval / eigval|
    converged: bool


def flatten3(t: Tensor3, mode: int) -> np.ndarray:
    """Mode-`mode` flattening of an order-3 tensor into a d x d^2 matrix.

    Mode 1 puts index i on rows and (j, k) on columns with k fastest; modes
    2 and 3 permute accordingly.  For t = sum_i a_i^{(x)3} the mode-1
    flattening is sum_i a_i (a_i (x) a_i)^T.
    """
    d = t.dim
    if mode == 1:
        return t.entries.reshape(d, d * d)
    if mode == 2:
        return t.entries.transpose(1, 0, 2).reshape(d, d * d)
    if mode == 3:
        return t.entries.transpose(2, 0, 1).reshape(d, d * d)
    raise ValueError(f"mode must be 1, 2, or 3, got {mode}")


def unflatten3(m: np.ndarray, symmetric_hint: bool = False) -> Tensor3:
    """Inverse of mode-1 flatten3: d x d^2 back to a Tensor3."""
    m = np.asarray(m, dtype=np.float64)
    d = m.shape[0]
    if m.ndim != 2 or m.shape[1] != d * d:
        raise ValueError(f"expected shape (d, d^2), got {m.shape}")
    return Tensor3(m.reshape(d, d, d), symmetric_hint=symmetric_hint)


def reshape_vec_to_matrix(v: np.ndarray) -> np.ndarray:
    """Reshape a length-d^2 vector to a d x d matrix, entry (i,j) = v[(i,j)].

    Same index convention as flatten3 mode 1, so kron(a, b) maps to a b^T
    and the vector Phi maps to the identity.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"length {v.size} is not a perfect square")
    return v.reshape(d, d)


def partial_trace_first(m: np.ndarray) -> np.ndarray:
    """Partial trace over the first tensor factor: (d^2 x d^2) -> (d x d).

    output[j, l] = sum_i m[(i,j), (i,l)], the linear map with
    Tr_first(A kron B) = Tr(A) * B exactly.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    d = int(round(np.sqrt(m.shape[0])))
    if d * d != m.shape[0]:
        raise ValueError(f"side {m.shape[0]} is not a perfect square")
    return np.einsum("ijil->jl", m.reshape(d, d, d, d))


def precondition_apply(r: SymPreconditioner, v: np.ndarray) -> np.ndarray:
    """Apply the symmetric-subspace preconditioner in O(d^2) time.

    Returns Pi_sym v - c_d <Phi, v> Phi without materializing the d^2 x d^2
    matrix: Pi_sym v symmetrizes the d x d reshaping of v, and <Phi, v> is
    its trace.
    """
    d = r.dim
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != d * d:
        raise ValueError(f"expected length {d * d}, got {v.size}")
    m = v.reshape(d, d)
    out = 0.5 * (m + m.T)
    tr = np.trace(m)
    out = out.copy()
    idx = np.arange(d)
    out[idx, idx] -= r.coeff * tr
    return out.ravel()


def _canonicalize_sign(x: np.ndarray) -> np.ndarray:
    """Flip sign so the largest-magnitude entry is positive."""
    i = int(np.argmax(np.abs(x)))
    return -x if x[i] < 0 else x


def _probe_symmetry(matvec, m: int, rng: np.random.Generator, tol: float = 1e-10):
    for _ in range(2):
        x = rng.standard_normal(m)
        y = rng.standard_normal(m)
        lhs = float(x @ np.asarray(matvec(y)))
        rhs = float(np.asarray(matvec(x)) @ y)
        scale = max(abs(lhs), abs(rhs), 1.0)
        if abs(lhs - rhs) > tol * scale:
            raise ValueError(
                f"matvec is not symmetric: <x,Ay>={lhs!r} vs <Ax,y>={rhs!r}"
            )


def _apply_checked(matvec, x: np.ndarray, m: int) -> np.ndarray:
    y = np.asarray(matvec(x), dtype=np.float64).ravel()
    if y.size != m:
        raise ValueError(f"matvec returned length {y.size}, expected {m}")
    if not np.all(np.isfinite(y)):
        raise NumericError("matvec produced non-finite values")
    return y


def power_iteration(
    matvec,
    m: int,
    settings: PowerIterSettings,
    check_symmetry: bool = False,
    _compute_second: bool = True,
) -> PowerIterReport:
    """Top eigenpair (largest magnitude) of a symmetric black-box operator.

    Starts from an iid standard normal vector seeded by ``settings.seed``,
    iterates until the relative Rayleigh-quotient change drops below
    ``settings.rq_tolerance`` or ``max_iters`` is hit.  The second eigenvalue
    comes from one rerun on the deflated operator
    x -> matvec(x) - eigval <eigvec, x> eigvec.  A degenerate spectrum
    (gap_ratio >= 1 - 1e-9) is reported as converged=False, not an error.

    ``check_symmetry`` runs two random-probe symmetry checks before
    iterating; it is meant for tests and debugging, not benchmark runs.
    """
    if m < 1:
        raise ValueError("operator dimension must be >= 1")
    rng = stream(settings.seed, TAG_POWER_START)
    if check_symmetry:
        # separate stream so probing never shifts the start vector
        _probe_symmetry(matvec, m, stream(settings.seed, TAG_POWER_START, index=1))

    x = rng.standard_normal(m)
    x /= np.linalg.norm(x)
    rq = 0.0
    rq_prev = None
    iters = 0
    rq_converged = False
    restarts = 0
    while iters < settings.max_iters:
        y = _apply_checked(matvec, x, m)
        rq = float(x @ y)
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            # x lies in the nullspace; retry from a fresh direction
            if restarts >= 3:
                rq = 0.0
                rq_converged = True
                break
            restarts += 1
            x = rng.standard_normal(m)
            x /= np.linalg.norm(x)
            continue
        x = y / ny
        iters += 1
        if rq_prev is not None and abs(rq - rq_prev) <= settings.rq_tolerance * max(
            abs(rq), np.finfo(np.float64).tiny
        ):
            rq_converged = True
            rq_prev = rq
            break
        rq_prev = rq

    eigvec = _canonicalize_sign(x)
    eigval = float(eigvec @ _apply_checked(matvec, eigvec, m))

    second = 0.0
    if _compute_second:

        def deflated(z):
            z = np.asarray(z, dtype=np.float64).ravel()
            return _apply_checked(matvec, z, m) - eigval * float(eigvec @ z) * eigvec

        sub = power_iteration(
            deflated,
            m,
            PowerIterSettings(settings.max_iters, settings.rq_tolerance, settings.seed + 1),
            _compute_second=False,
        )
        second = sub.eigval

    if eigval == 0.0:
        gap = 0.0 if second == 0.0 else np.inf
    else:
        gap = abs(second / eigval)
    converged = rq_converged and gap < 1.0 - 1e-9
    return PowerIterReport(
        eigvec=eigvec,
        eigval=eigval,
        second_eigval=second,
        iters_used=iters,
        gap_ratio=gap,
        converged=converged,
    )


def top_singular_pairs(u: np.ndarray, k: int, settings: PowerIterSettings | None = None):
    """Top-k singular triples (sigma, left, right) of a d x d matrix.

    Implemented as power iteration on U^T U with deflation, no general SVD
    routine.  Pairs come out sorted by singular value descending; each
    satisfies U b = sigma a exactly by construction of a.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    d = u.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    if settings is None:
        settings = PowerIterSettings(max_iters=5000, rq_tolerance=1e-15, seed=7)

    gram = u.T @ u
    gram = 0.5 * (gram + gram.T)
    pairs = []
    deflate_vecs = []
    deflate_vals = []
    for j in range(k):

        def matvec(x, _vs=tuple(deflate_vecs), _ls=tuple(deflate_vals)):
            y = gram @ x
            for vec, lam in zip(_vs, _ls):
                y = y - lam * float(vec @ x) * vec
            return y

        rep = power_iteration(
            matvec,
            d,
            PowerIterSettings(settings.max_iters, settings.rq_tolerance, settings.seed + j),
            _compute_second=False,
        )
        lam = max(rep.eigval, 0.0)  # U^T U is PSD up to roundoff
        b = rep.eigvec
        sigma = float(np.sqrt(lam))
        if sigma > 0:
            a = u @ b / sigma
            na = float(np.linalg.norm(a))
            if na > 0:
                a = a / na
        else:
            a = np.zeros(d)
            a[j % d] = 1.0
        pairs.append((sigma, a, b))
        deflate_vecs.append(b)
        deflate_vals.append(lam)
    return pairs
