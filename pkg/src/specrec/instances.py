"""Seeded generators for the three random models, plus instance serialization.

Each generator is a pure function of its arguments including the seed, built
on the Philox streams of :mod:`specrec.rng` so that every sub-object (support
set, sign pattern, i-th basis vector, rotation, noise block) has its own
stream and fixtures stay stable.

Serialization formats (version 1):

JSON -- a single object ``{"format": "specrec-instance", "version": 1,
"kind": <"psv"|"tdecomp"|"tpca">, ...metadata..., "arrays": {name: {"shape":
[...], "data": <base64>}}}`` where ``data`` is the row-major little-endian
float64 buffer.

Binary -- magic ``b"SPECREC1"``, then one byte kind (1=psv, 2=tdecomp,
3=tpca), one byte basis_mode flag (psv only; 0=good, 1=rotated), little-endian
u64 seed, then kind-specific fields and arrays, all little-endian, arrays
row-major float64:

* psv:     u64 n, u64 d, f64 epsilon, v0[n], hidden_good_basis[n*d], W[n*d]
* tdecomp: u64 d, u64 n, components[n*d], tensor[d^3]
* tpca:    u64 d, f64 tau, v[d], tensor[d^3]
"""

import base64
import json
import struct
from dataclasses import dataclass

import numpy as np

from .rng import (
    TAG_DECOMP_COMPONENTS,
    TAG_PSV_BASIS_VEC,
    TAG_PSV_ROTATION,
    TAG_PSV_SIGNS,
    TAG_PSV_SUPPORT,
    TAG_SPIKE_DIRECTION,
    TAG_SPIKE_NOISE,
    stream,
)
from .tensor_core import Tensor3

_MAGIC = b"SPECREC1"


@dataclass(frozen=True)
class SubspaceInstance:
    n: int
    d: int
    epsilon: float
    W: np.ndarray  # n x d, orthonormal columns (the observable)
    v0: np.ndarray  # hidden planted sparse unit vector
    hidden_good_basis: np.ndarray  # n x d columns (v0, v1, ..., v_{d-1})
    seed: int
    basis_mode: str


@dataclass(frozen=True)
class DecompInstance:
    """Rank-n component tensor; entries are bitwise symmetric.

    Each entry is stored as the sorted-index representative of its orbit,
    i.e. entry (i,j,k) holds sum_l (a_l(lo) * a_l(mid)) * a_l(hi) for the
    sorted triple, so all six permutations compare equal exactly.
    """

    d: int
    n: int
    components: np.ndarray  # n x d rows a_i ~ N(0, Id/d)
    tensor: Tensor3  # sum_i a_i^{(x)3}
    seed: int


@dataclass(frozen=True)
class SpikeInstance:
    d: int
    tau: float
    v: np.ndarray  # hidden unit spike
    tensor: Tensor3  # tau * v^{(x)3} + iid N(0,1) noise
    seed: int


def _orthonormalize(cols: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt with one reorthogonalization pass."""
    q = np.array(cols, dtype=np.float64, copy=True)
    n, d = q.shape
    for j in range(d):
        for _ in range(2):  # second pass restores orthogonality lost to roundoff
            for i in range(j):
                q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        nrm = np.linalg.norm(q[:, j])
        if nrm < 1e-12:
            raise ValueError(f"basis column {j} is numerically dependent")
        q[:, j] /= nrm
    return q


def haar_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random d x d orthogonal matrix: Gram-Schmidt on a Gaussian matrix."""
    return _orthonormalize(rng.standard_normal((d, d)))


def gen_planted_sparse(
    n: int, d: int, epsilon: float, seed: int, basis_mode: str = "rotated"
) -> SubspaceInstance:
    """Random d-dim subspace of R^n with a planted k-sparse direction.

    v0 gets a uniform random support of size k = floor(epsilon * n) with
    iid +-1/sqrt(k) entries (so ||v0||_4^4 = 1/k exactly); v_1..v_{d-1} are
    iid N(0, Id/n).  W orthonormalizes [v0 v1 ... v_{d-1}]; in "rotated"
    mode W is right-multiplied by a Haar orthogonal matrix so the sparse
    direction is not axis-aligned in coefficient space.
    """
    if basis_mode not in ("rotated", "good"):
        raise ValueError(f"basis_mode must be 'rotated' or 'good', got {basis_mode!r}")
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= n, got d={d}, n={n}")
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    k = int(np.floor(epsilon * n))
    if k < 1:
        raise ValueError(f"floor(epsilon * n) = 0 for epsilon={epsilon}, n={n}")

    support = stream(seed, TAG_PSV_SUPPORT).choice(n, size=k, replace=False)
    signs = stream(seed, TAG_PSV_SIGNS).integers(0, 2, size=k) * 2 - 1
    v0 = np.zeros(n)
    v0[support] = signs / np.sqrt(k)

    cols = np.empty((n, d))
    cols[:, 0] = v0
    for i in range(1, d):
        cols[:, i] = stream(seed, TAG_PSV_BASIS_VEC, i).standard_normal(n) / np.sqrt(n)
    w = _orthonormalize(cols)
    if basis_mode == "rotated":
        w = w @ haar_orthogonal(d, stream(seed, TAG_PSV_ROTATION))

    gram_err = float(np.max(np.abs(w.T @ w - np.eye(d))))
    if gram_err > 1e-10:
        raise RuntimeError(f"orthonormalization residual {gram_err!r} exceeds 1e-10")
    resid = float(np.linalg.norm(v0 - w @ (w.T @ v0)))
    if resid > 1e-10:
        raise RuntimeError(f"v0 projection residual {resid!r} exceeds 1e-10")
    return SubspaceInstance(
        n=n, d=d, epsilon=epsilon, W=w, v0=v0, hidden_good_basis=cols,
        seed=seed, basis_mode=basis_mode,
    )


def gen_overcomplete(d: int, n: int, seed: int) -> DecompInstance:
    """Rank-n symmetric tensor sum_i a_i^{(x)3} with a_i iid N(0, Id/d)."""
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    comps = stream(seed, TAG_DECOMP_COMPONENTS).standard_normal((n, d)) / np.sqrt(d)
    entries = np.einsum("li,lj,lk->ijk", comps, comps, comps)
    # gather each entry from the sorted-index representative of its orbit:
    # summation order then matches bitwise across all 6 index permutations
    i, j, k = np.indices((d, d, d), sparse=True)
    lo = np.minimum(np.minimum(i, j), k)
    hi = np.maximum(np.maximum(i, j), k)
    mid = i + j + k - lo - hi
    entries = entries[lo, mid, hi]
    return DecompInstance(
        d=d, n=n, components=comps, tensor=Tensor3(entries, symmetric_hint=True),
        seed=seed,
    )


def spike_direction(d: int, seed: int) -> np.ndarray:
    """The hidden unit spike for (d, seed), regenerable independently."""
    v = stream(seed, TAG_SPIKE_DIRECTION).standard_normal(d)
    return v / np.linalg.norm(v)


def spike_noise(d: int, seed: int) -> np.ndarray:
    """The iid N(0,1) noise block for (d, seed), regenerable independently."""
    return stream(seed, TAG_SPIKE_NOISE).standard_normal((d, d, d))


def gen_spiked(d: int, tau: float, seed: int) -> SpikeInstance:
    """Spiked tensor tau * v^{(x)3} + A with v uniform on the sphere."""
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    v = spike_direction(d, seed)
    entries = tau * np.einsum("i,j,k->ijk", v, v, v) + spike_noise(d, seed)
    return SpikeInstance(
        d=d, tau=float(tau), v=v, tensor=Tensor3(entries, symmetric_hint=False),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# serialization


def _b64(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _unb64(obj: dict) -> np.ndarray:
    buf = base64.b64decode(obj["data"])
    return np.frombuffer(buf, dtype="<f8").reshape(obj["shape"]).astype(np.float64)


def to_json(inst) -> str:
    """Serialize an instance to the documented JSON layout."""
    if isinstance(inst, SubspaceInstance):
        doc = {
            "format": "specrec-instance",
            "version": 1,
            "kind": "psv",
            "n": inst.n,
            "d": inst.d,
            "epsilon": inst.epsilon,
            "seed": inst.seed,
            "basis_mode": inst.basis_mode,
            "arrays": {
                "v0": _b64(inst.v0),
                "hidden_good_basis": _b64(inst.hidden_good_basis),
                "W": _b64(inst.W),
            },
        }
    elif isinstance(inst, DecompInstance):
        doc = {
            "format": "specrec-instance",
            "version": 1,
            "kind": "tdecomp",
            "d": inst.d,
            "n": inst.n,
            "seed": inst.seed,
            "arrays": {
                "components": _b64(inst.components),
                "tensor": _b64(inst.tensor.entries),
            },
        }
    elif isinstance(inst, SpikeInstance):
        doc = {
            "format": "specrec-instance",
            "version": 1,
            "kind": "tpca",
            "d": inst.d,
            "tau": inst.tau,
            "seed": inst.seed,
            "arrays": {"v": _b64(inst.v), "tensor": _b64(inst.tensor.entries)},
        }
    else:
        raise TypeError(f"not an instance type: {type(inst)!r}")
    return json.dumps(doc, sort_keys=True)


def from_json(text: str):
    doc = json.loads(text)
    if doc.get("format") != "specrec-instance" or doc.get("version") != 1:
        raise ValueError("not a version-1 specrec instance document")
    kind = doc["kind"]
    arrays = {k: _unb64(v) for k, v in doc["arrays"].items()}
    if kind == "psv":
        return SubspaceInstance(
            n=int(doc["n"]), d=int(doc["d"]), epsilon=float(doc["epsilon"]),
            W=arrays["W"], v0=arrays["v0"],
            hidden_good_basis=arrays["hidden_good_basis"],
            seed=int(doc["seed"]), basis_mode=doc["basis_mode"],
        )
    if kind == "tdecomp":
        return DecompInstance(
            d=int(doc["d"]), n=int(doc["n"]), components=arrays["components"],
            tensor=Tensor3(arrays["tensor"], symmetric_hint=True),
            seed=int(doc["seed"]),
        )
    if kind == "tpca":
        return SpikeInstance(
            d=int(doc["d"]), tau=float(doc["tau"]), v=arrays["v"],
            tensor=Tensor3(arrays["tensor"], symmetric_hint=False),
            seed=int(doc["seed"]),
        )
    raise ValueError(f"unknown instance kind {kind!r}")


def _raw(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def to_binary(inst) -> bytes:
    """Serialize an instance to the documented binary layout."""
    out = bytearray(_MAGIC)
    if isinstance(inst, SubspaceInstance):
        mode = 1 if inst.basis_mode == "rotated" else 0
        out += struct.pack("<BBQ", 1, mode, inst.seed)
        out += struct.pack("<QQd", inst.n, inst.d, inst.epsilon)
        out += _raw(inst.v0) + _raw(inst.hidden_good_basis) + _raw(inst.W)
    elif isinstance(inst, DecompInstance):
        out += struct.pack("<BBQ", 2, 0, inst.seed)
        out += struct.pack("<QQ", inst.d, inst.n)
        out += _raw(inst.components) + _raw(inst.tensor.entries)
    elif isinstance(inst, SpikeInstance):
        out += struct.pack("<BBQ", 3, 0, inst.seed)
        out += struct.pack("<Qd", inst.d, inst.tau)
        out += _raw(inst.v) + _raw(inst.tensor.entries)
    else:
        raise TypeError(f"not an instance type: {type(inst)!r}")
    return bytes(out)


def from_binary(buf: bytes):
    if buf[:8] != _MAGIC:
        raise ValueError("bad magic; not a specrec binary instance")
    kind, mode, seed = struct.unpack_from("<BBQ", buf, 8)
    off = 8 + struct.calcsize("<BBQ")

    def take(count):
        nonlocal off
        a = np.frombuffer(buf, dtype="<f8", count=count, offset=off).astype(np.float64)
        off += 8 * count
        return a

    if kind == 1:
        n, d, epsilon = struct.unpack_from("<QQd", buf, off)
        off += struct.calcsize("<QQd")
        v0 = take(n)
        good = take(n * d).reshape(n, d)
        w = take(n * d).reshape(n, d)
        return SubspaceInstance(
            n=n, d=d, epsilon=epsilon, W=w, v0=v0, hidden_good_basis=good,
            seed=seed, basis_mode="rotated" if mode else "good",
        )
    if kind == 2:
        d, n = struct.unpack_from("<QQ", buf, off)
        off += struct.calcsize("<QQ")
        comps = take(n * d).reshape(n, d)
        tensor = take(d**3).reshape(d, d, d)
        return DecompInstance(
            d=d, n=n, components=comps,
            tensor=Tensor3(tensor, symmetric_hint=True), seed=seed,
        )
    if kind == 3:
        (d,) = struct.unpack_from("<Q", buf, off)
        off += 8
        (tau,) = struct.unpack_from("<d", buf, off)
        off += 8
        v = take(d)
        tensor = take(d**3).reshape(d, d, d)
        return SpikeInstance(
            d=d, tau=tau, v=v, tensor=Tensor3(tensor, symmetric_hint=False),
            seed=seed,
        )
    raise ValueError(f"unknown binary kind {kind}")


def save(inst, path, fmt: str = "json"):
    if fmt == "json":
        with open(path, "w") as f:
            f.write(to_json(inst))
    elif fmt == "bin":
        with open(path, "wb") as f:
            f.write(to_binary(inst))
    else:
        raise ValueError(f"format must be 'json' or 'bin', got {fmt!r}")


def load(path):
    with open(path, "rb") as f:
        head = f.read(8)
        rest = f.read()
    if head == _MAGIC:
        return from_binary(head + rest)
    return from_json((head + rest).decode("utf-8"))
