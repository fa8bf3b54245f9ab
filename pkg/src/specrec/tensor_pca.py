"""Linear-time spike recovery from a noisy rank-one 3-tensor.

Build M = sum_i trace(T_i) * T_i over the first-mode slices T_i in one pass
over the entries, symmetrize, and power-iterate.  Slices may be streamed
from disk (header: little-endian u64 d, then d slices of d^2 little-endian
float64, row-major), so the full tensor never needs to be resident.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .tensor_core import PowerIterReport, PowerIterSettings, Tensor3, power_iteration


@dataclass(frozen=True)
class TpcaResult:
    recovered: np.ndarray  # unit vector, sign resolved via the cubic form
    report: PowerIterReport
    correlation: float | None  # <v, recovered> when ground truth supplied


def partial_trace_matrix(t: Tensor3) -> np.ndarray:
    """sum_i trace(T_i) * T_i over first-mode slices, symmetrized.

    Single pass: all d slice traces, then one accumulation; O(d^3) time and
    O(d^2) auxiliary space.  The output is symmetrized because slices of a
    noisy tensor are not symmetric; (M + M^T)/2 keeps the signal term and
    the quadratic form unchanged.
    """
    e = t.entries
    traces = np.trace(e, axis1=1, axis2=2)
    m = np.einsum("i,ijk->jk", traces, e)
    return 0.5 * (m + m.T)


def partial_trace_matrix_stream(slices, d: int) -> np.ndarray:
    """Same reduction from an iterable of d x d slices, consumed once."""
    m = np.zeros((d, d))
    count = 0
    for s in slices:
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (d, d):
            raise ValueError(f"slice {count} has shape {s.shape}, expected {(d, d)}")
        m += np.trace(s) * s
        count += 1
    if count != d:
        raise ValueError(f"expected {d} slices, got {count}")
    return 0.5 * (m + m.T)


def recover_spike(
    t: Tensor3, settings: PowerIterSettings, v: np.ndarray | None = None
) -> TpcaResult:
    """Top eigenvector of the partial-trace matrix, sign-resolved.

    The sign s in {+1, -1} maximizing T(su, su, su) = s^3 T(u, u, u) is
    chosen, since the spike enters the cubic form positively.
    Non-convergence is reported through the power-iteration report.
    """
    m = partial_trace_matrix(t)
    report = power_iteration(lambda x: m @ x, t.dim, settings)
    u = report.eigvec
    cubic = float(((t.entries @ u) @ u) @ u)
    if cubic < 0:
        u = -u
    corr = None if v is None else float(np.dot(v, u))
    return TpcaResult(recovered=u, report=report, correlation=corr)


# ---------------------------------------------------------------------------
# slice-major binary stream format


def write_slice_stream(path, t: Tensor3):
    """Write the documented slice-major binary format."""
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", t.dim))
        for i in range(t.dim):
            f.write(np.ascontiguousarray(t.entries[i], dtype="<f8").tobytes())


def read_slice_stream(path):
    """Yield (d, slice_iterator); slices are read lazily, one at a time."""
    f = open(path, "rb")
    (d,) = struct.unpack("<Q", f.read(8))

    def slices():
        try:
            for _ in range(d):
                buf = f.read(8 * d * d)
                if len(buf) != 8 * d * d:
                    raise ValueError("truncated slice stream")
                yield np.frombuffer(buf, dtype="<f8").reshape(d, d).astype(np.float64)
        finally:
            f.close()

    return d, slices()


def partial_trace_from_file(path) -> np.ndarray:
    d, slices = read_slice_stream(path)
    return partial_trace_matrix_stream(slices, d)


def recover_spike_from_file(path, settings: PowerIterSettings, v=None) -> TpcaResult:
    """recover_spike from the slice-major stream, never holding the tensor.

    Two passes over the file: one accumulates the partial-trace matrix, one
    evaluates the cubic form for sign resolution.  Auxiliary space O(d^2).
    """
    m = partial_trace_from_file(path)
    d = m.shape[0]
    report = power_iteration(lambda x: m @ x, d, settings)
    u = report.eigvec
    _, slices = read_slice_stream(path)
    cubic = sum(u[i] * float(u @ s @ u) for i, s in enumerate(slices))
    if cubic < 0:
        u = -u
    corr = None if v is None else float(np.dot(v, u))
    return TpcaResult(recovered=u, report=report, correlation=corr)
