import numpy as np
import pytest

from specrec import instances
from specrec.instances import (
    gen_overcomplete,
    gen_planted_sparse,
    gen_spiked,
    spike_direction,
    spike_noise,
)


# ---------------------------------------------------------------------------
# planted sparse subspace


def test_psv_one_dimensional_subspace():
    inst = gen_planted_sparse(16, 1, 0.25, seed=0)
    corr = float(inst.W[:, 0] @ inst.v0) ** 2
    assert abs(corr - 1.0) <= 1e-12


def test_psv_deterministic():
    a = gen_planted_sparse(100, 5, 0.1, seed=42)
    b = gen_planted_sparse(100, 5, 0.1, seed=42)
    assert np.array_equal(a.W, b.W)
    assert np.array_equal(a.v0, b.v0)
    c = gen_planted_sparse(100, 5, 0.1, seed=43)
    assert not np.array_equal(a.v0, c.v0)


def test_psv_four_norm_exact():
    inst = gen_planted_sparse(2000, 20, 0.05, seed=1)
    k = int(np.floor(0.05 * 2000))
    assert np.sum(inst.v0**4) == pytest.approx(1.0 / k, abs=1e-15)
    assert np.count_nonzero(inst.v0) == k
    assert np.linalg.norm(inst.v0) == pytest.approx(1.0, abs=1e-12)


def test_psv_orthonormal_and_span():
    for mode in ("rotated", "good"):
        inst = gen_planted_sparse(500, 12, 0.1, seed=7, basis_mode=mode)
        gram = inst.W.T @ inst.W
        assert np.max(np.abs(gram - np.eye(12))) <= 1e-10
        resid = inst.v0 - inst.W @ (inst.W.T @ inst.v0)
        assert np.linalg.norm(resid) <= 1e-10


def test_psv_spans_agree_with_good_basis():
    inst = gen_planted_sparse(300, 8, 0.1, seed=3)
    g, _ = np.linalg.qr(inst.hidden_good_basis)
    # mutual projection residuals
    for col in inst.W.T:
        assert np.linalg.norm(col - g @ (g.T @ col)) <= 1e-9
    for col in g.T:
        assert np.linalg.norm(col - inst.W @ (inst.W.T @ col)) <= 1e-9


def test_psv_good_mode_first_column_is_v0():
    inst = gen_planted_sparse(200, 6, 0.1, seed=9, basis_mode="good")
    np.testing.assert_allclose(inst.W[:, 0], inst.v0, atol=1e-12)


def test_psv_argument_errors():
    with pytest.raises(ValueError):
        gen_planted_sparse(100, 101, 0.1, seed=0)  # d > n
    with pytest.raises(ValueError):
        gen_planted_sparse(100, 5, 0.001, seed=0)  # floor(eps n) = 0
    with pytest.raises(ValueError):
        gen_planted_sparse(100, 5, 0.1, seed=0, basis_mode="other")


# ---------------------------------------------------------------------------
# overcomplete decomposition instances


def test_overcomplete_single_component_exact():
    inst = gen_overcomplete(3, 1, seed=0)
    a = inst.components[0]
    # entries store the sorted-index association (a_lo * a_mid) * a_hi exactly
    i, j, k = np.indices((3, 3, 3), sparse=True)
    lo = np.minimum(np.minimum(i, j), k)
    hi = np.maximum(np.maximum(i, j), k)
    mid = i + j + k - lo - hi
    np.testing.assert_array_equal(inst.tensor.entries, (a[lo] * a[mid]) * a[hi])
    # and agree with any other association to an ulp
    np.testing.assert_allclose(
        inst.tensor.entries, np.einsum("i,j,k->ijk", a, a, a), rtol=1e-15, atol=0
    )


def test_overcomplete_component_norms_concentrate():
    inst = gen_overcomplete(50, 60, seed=1)
    mean_sq = float(np.mean(np.linalg.norm(inst.components, axis=1) ** 2))
    assert 0.8 <= mean_sq <= 1.2


def test_overcomplete_deterministic():
    a = gen_overcomplete(6, 4, seed=5)
    b = gen_overcomplete(6, 4, seed=5)
    assert np.array_equal(a.components, b.components)
    assert np.array_equal(a.tensor.entries, b.tensor.entries)


def test_overcomplete_tensor_exactly_symmetric():
    inst = gen_overcomplete(5, 7, seed=2)
    e = inst.tensor.entries
    for perm in ((0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        assert np.array_equal(e, np.transpose(e, perm))
    assert inst.tensor.symmetric_hint


def test_overcomplete_entries_match_sum():
    inst = gen_overcomplete(4, 3, seed=3)
    a = inst.components
    expected = sum(np.einsum("i,j,k->ijk", a[l], a[l], a[l]) for l in range(3))
    np.testing.assert_allclose(inst.tensor.entries, expected, atol=1e-12)


# ---------------------------------------------------------------------------
# spiked tensor instances


def test_spiked_pure_noise_frobenius():
    d = 20
    inst = gen_spiked(d, 0.0, seed=0)
    fro2 = float(np.sum(inst.tensor.entries**2))
    assert abs(fro2 - d**3) <= 3 * np.sqrt(2.0 * d**3)


def test_spiked_construction_identity():
    d = 3
    inst = gen_spiked(d, 10.0, seed=11)
    v = spike_direction(d, 11)
    a = spike_noise(d, 11)
    rebuilt = 10.0 * np.einsum("i,j,k->ijk", v, v, v) + a
    assert np.array_equal(inst.tensor.entries, rebuilt)
    np.testing.assert_allclose(
        inst.tensor.entries - a, 10.0 * np.einsum("i,j,k->ijk", v, v, v), atol=1e-12
    )


def test_spiked_deterministic():
    a = gen_spiked(8, 2.5, seed=4)
    b = gen_spiked(8, 2.5, seed=4)
    assert np.array_equal(a.tensor.entries, b.tensor.entries)
    assert np.array_equal(a.v, b.v)


def test_spiked_noise_statistics():
    d = 40
    inst = gen_spiked(d, 5.0, seed=6)
    noise = inst.tensor.entries - 5.0 * np.einsum(
        "i,j,k->ijk", inst.v, inst.v, inst.v
    )
    assert abs(float(np.mean(noise))) <= 5.0 / d**1.5
    assert abs(float(np.var(noise)) - 1.0) <= 0.1


def test_spiked_unit_direction():
    inst = gen_spiked(12, 1.0, seed=8)
    assert np.linalg.norm(inst.v) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# serialization


@pytest.mark.parametrize("fmt", ["json", "bin"])
def test_roundtrip_psv(tmp_path, fmt):
    inst = gen_planted_sparse(50, 4, 0.1, seed=13)
    path = tmp_path / f"inst.{fmt}"
    instances.save(inst, path, fmt)
    back = instances.load(path)
    assert back.n == inst.n and back.d == inst.d and back.epsilon == inst.epsilon
    assert back.basis_mode == inst.basis_mode and back.seed == inst.seed
    assert np.array_equal(back.W, inst.W)
    assert np.array_equal(back.v0, inst.v0)
    assert np.array_equal(back.hidden_good_basis, inst.hidden_good_basis)


@pytest.mark.parametrize("fmt", ["json", "bin"])
def test_roundtrip_decomp(tmp_path, fmt):
    inst = gen_overcomplete(5, 3, seed=14)
    path = tmp_path / f"inst.{fmt}"
    instances.save(inst, path, fmt)
    back = instances.load(path)
    assert back.d == inst.d and back.n == inst.n and back.seed == inst.seed
    assert np.array_equal(back.components, inst.components)
    assert np.array_equal(back.tensor.entries, inst.tensor.entries)
    assert back.tensor.symmetric_hint


@pytest.mark.parametrize("fmt", ["json", "bin"])
def test_roundtrip_spike(tmp_path, fmt):
    inst = gen_spiked(6, 3.5, seed=15)
    path = tmp_path / f"inst.{fmt}"
    instances.save(inst, path, fmt)
    back = instances.load(path)
    assert back.d == inst.d and back.tau == inst.tau and back.seed == inst.seed
    assert np.array_equal(back.v, inst.v)
    assert np.array_equal(back.tensor.entries, inst.tensor.entries)
    assert not back.tensor.symmetric_hint


def test_binary_rejects_garbage(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    with pytest.raises(ValueError):
        instances.load(path)
