import numpy as np
import pytest
import safetensors.numpy as st_ref

from safer.errors import (
    AmbiguousOrientationError,
    ArgumentError,
    SelectorError,
    VerificationError,
)
from safer.patcher import (
    DEFAULT_PATTERN,
    LayerSelector,
    patch_checkpoint,
    verify_patch,
)
from safer.projector import amplify_projector, compose, removal_projector
from safer.store import NamedTensor, TensorStore, load_store, save_store
from safer.subspace import ConceptBasis

from conftest import random_orthonormal


def unit_basis(d, axis=0):
    u = np.zeros((d, 1))
    u[axis, 0] = 1.0
    return ConceptBasis.from_vectors(u, label=f"e{axis}")


def weight_store(rng, d=8, out=320, dtype=np.float64, extra=True):
    store = TensorStore()
    store.add(NamedTensor.from_array(
        "blocks.0.attn2.to_k.weight", rng.standard_normal((out, d)).astype(dtype)))
    store.add(NamedTensor.from_array(
        "blocks.0.attn2.to_v.weight", rng.standard_normal((out, d)).astype(dtype)))
    if extra:
        store.add(NamedTensor.from_array(
            "blocks.0.attn1.to_k.weight", rng.standard_normal((out, out)).astype(dtype)))
        store.add(NamedTensor.from_array(
            "blocks.0.ff.weight", rng.standard_normal((4, 4)).astype(dtype)))
    return store


def test_identity_patch_is_noop(rng):
    ckpt = weight_store(rng, dtype=np.float64)
    proj = amplify_projector(unit_basis(8), 0.0)  # exact identity
    sel = LayerSelector(expected_dim=8)
    patched, report = patch_checkpoint(ckpt, proj, sel)
    assert report.count == 2
    for rec in report.records:
        assert rec.max_delta == 0.0
        assert rec.fro_delta == 0.0
    for name in ckpt.names():
        assert patched[name].tobytes() == ckpt[name].tobytes()


def test_behavioral_contract_float64(rng):
    d = 8
    ckpt = weight_store(rng, d=d, out=320, dtype=np.float64, extra=False)
    proj = removal_projector(random_orthonormal(rng, d, 2))
    sel = LayerSelector(expected_dim=d)
    patched, _ = patch_checkpoint(ckpt, proj, sel)
    w = ckpt["blocks.0.attn2.to_k.weight"].as_f64()
    w_new = patched["blocks.0.attn2.to_k.weight"].as_f64()
    worst = 0.0
    for _ in range(100):
        e = rng.standard_normal(d)
        worst = max(worst, np.max(np.abs(w_new @ e - w @ (proj.matrix @ e))))
    assert worst <= 1e-9


def test_behavioral_contract_float16(rng):
    d = 8
    ckpt = weight_store(rng, d=d, out=64, dtype=np.float16, extra=False)
    proj = removal_projector(random_orthonormal(rng, d, 1))
    sel = LayerSelector(expected_dim=d)
    patched, _ = patch_checkpoint(ckpt, proj, sel)
    assert patched["blocks.0.attn2.to_k.weight"].dtype == "float16"
    w = ckpt["blocks.0.attn2.to_v.weight"].as_f64()
    w_new = patched["blocks.0.attn2.to_v.weight"].as_f64()
    worst = 0.0
    for _ in range(100):
        e = rng.standard_normal(d)
        worst = max(worst, np.max(np.abs(w_new @ e - w @ (proj.matrix @ e))))
    assert worst <= 3e-2


def test_unmatched_tensors_untouched_and_input_not_mutated(rng):
    ckpt = weight_store(rng)
    before = {name: ckpt[name].tobytes() for name in ckpt.names()}
    proj = removal_projector(random_orthonormal(rng, 8, 1))
    patched, report = patch_checkpoint(ckpt, proj, LayerSelector(expected_dim=8))
    assert {r.name for r in report.records} == {
        "blocks.0.attn2.to_k.weight", "blocks.0.attn2.to_v.weight"}
    for name in ("blocks.0.attn1.to_k.weight", "blocks.0.ff.weight"):
        assert patched[name].tobytes() == before[name]
    for name in ckpt.names():  # input store untouched
        assert ckpt[name].tobytes() == before[name]


def test_orientation_input_rows(rng):
    d, out = 8, 16
    store = TensorStore()
    w = rng.standard_normal((d, out))
    store.add(NamedTensor.from_array("layer.attn2.to_k.weight", w))
    proj = removal_projector(random_orthonormal(rng, d, 1))
    sel = LayerSelector(expected_dim=d)  # auto resolves to input-rows
    patched, report = patch_checkpoint(store, proj, sel)
    assert report.records[0].orientation == "input-rows"
    w_new = patched["layer.attn2.to_k.weight"].as_f64()
    e = rng.standard_normal(d)
    np.testing.assert_allclose(w_new.T @ e, w.T @ (proj.matrix @ e), atol=1e-9)


def test_square_weight_requires_explicit_orientation(rng):
    store = TensorStore()
    store.add(NamedTensor.from_array("x.attn2.to_k.weight", rng.standard_normal((8, 8))))
    proj = removal_projector(random_orthonormal(rng, 8, 1))
    with pytest.raises(AmbiguousOrientationError, match="explicit"):
        patch_checkpoint(store, proj, LayerSelector(expected_dim=8))
    patched, report = patch_checkpoint(
        store, proj, LayerSelector(expected_dim=8, orientation="input-cols"))
    assert report.records[0].orientation == "input-cols"
    w = store["x.attn2.to_k.weight"].as_f64()
    np.testing.assert_allclose(patched["x.attn2.to_k.weight"].as_f64(), w @ proj.matrix, atol=1e-12)


def test_selector_no_match_is_error(rng):
    ckpt = weight_store(rng)
    proj = removal_projector(random_orthonormal(rng, 8, 1))
    with pytest.raises(SelectorError, match="matched no tensors"):
        patch_checkpoint(ckpt, proj, LayerSelector(pattern=r"nothing\.matches", expected_dim=8))


def test_no_axis_matches_dim_is_error(rng):
    ckpt = weight_store(rng, d=8)
    proj = removal_projector(random_orthonormal(rng, 12, 1))
    with pytest.raises(ArgumentError, match="no axis"):
        patch_checkpoint(ckpt, proj, LayerSelector(expected_dim=12))


def test_projector_selector_dim_mismatch(rng):
    ckpt = weight_store(rng, d=8)
    proj = removal_projector(random_orthonormal(rng, 12, 1))
    with pytest.raises(ArgumentError, match="expected_dim"):
        patch_checkpoint(ckpt, proj, LayerSelector(expected_dim=8))


def test_matched_non_2d_tensor_is_error(rng):
    store = TensorStore()
    store.add(NamedTensor.from_array("x.attn2.to_k.weight", rng.standard_normal((4, 8, 2))))
    proj = removal_projector(random_orthonormal(rng, 8, 1))
    with pytest.raises(ArgumentError, match="2-D"):
        patch_checkpoint(store, proj, LayerSelector(expected_dim=8))


def test_double_patch_equals_composed_patch(rng):
    d = 8
    ckpt = weight_store(rng, d=d, dtype=np.float64, extra=False)
    pa = removal_projector(random_orthonormal(rng, d, 1))
    pb = removal_projector(random_orthonormal(rng, d, 1))
    sel = LayerSelector(expected_dim=d)
    once_a, _ = patch_checkpoint(ckpt, pa, sel)
    twice, _ = patch_checkpoint(once_a, pb, sel)
    # sequential a-then-b == single patch with compose([a, b]): the later
    # patch's projector acts on the embedding first (two-path oracle below)
    combined, _ = patch_checkpoint(ckpt, compose([pa, pb]), sel)
    for name in ("blocks.0.attn2.to_k.weight", "blocks.0.attn2.to_v.weight"):
        np.testing.assert_allclose(
            twice[name].as_f64(), combined[name].as_f64(), atol=1e-12)
        w = ckpt[name].as_f64()
        w2 = twice[name].as_f64()
        for _ in range(20):
            e = rng.standard_normal(d)
            np.testing.assert_allclose(
                w2 @ e, w @ (pa.matrix @ (pb.matrix @ e)), atol=1e-9)


def test_idempotence_inheritance(rng):
    d = 8
    ckpt = weight_store(rng, d=d, dtype=np.float32, extra=False)
    proj = removal_projector(random_orthonormal(rng, d, 2))
    sel = LayerSelector(expected_dim=d)
    once, _ = patch_checkpoint(ckpt, proj, sel)
    twice, _ = patch_checkpoint(once, proj, sel)
    for name in ckpt.names():
        w1 = once[name].as_f64()
        w2 = twice[name].as_f64()
        for _ in range(20):
            e = rng.standard_normal(d)
            assert np.max(np.abs(w2 @ e - w1 @ e)) <= 2e-4  # 2x float32 tolerance


def test_verify_self_consistency(rng):
    ckpt = weight_store(rng)
    proj = removal_projector(random_orthonormal(rng, 8, 1))
    sel = LayerSelector(expected_dim=8)
    patched, _ = patch_checkpoint(ckpt, proj, sel)
    report = verify_patch(ckpt, patched, proj, sel, trials=100, seed=5)
    assert not report.failures
    assert report.unmatched_checked == 2


def test_verify_negative_control_names_tensors(rng):
    ckpt = weight_store(rng)
    sel = LayerSelector(expected_dim=8)
    proj = removal_projector(random_orthonormal(rng, 8, 1))
    other = removal_projector(random_orthonormal(rng, 8, 1))
    patched, _ = patch_checkpoint(ckpt, proj, sel)
    with pytest.raises(VerificationError) as exc_info:
        verify_patch(ckpt, patched, other, sel, trials=50)
    assert "blocks.0.attn2.to_k.weight" in exc_info.value.failures
    assert "blocks.0.attn2.to_v.weight" in exc_info.value.failures


def test_verify_identity_patch_zero_deltas(rng):
    ckpt = weight_store(rng, dtype=np.float64)
    proj = amplify_projector(unit_basis(8), 0.0)
    sel = LayerSelector(expected_dim=8)
    patched, _ = patch_checkpoint(ckpt, proj, sel)
    report = verify_patch(ckpt, patched, proj, sel, trials=50)
    assert all(r.max_error == 0.0 for r in report.records)


def test_verify_detects_tampered_unmatched_tensor(rng):
    ckpt = weight_store(rng)
    proj = removal_projector(random_orthonormal(rng, 8, 1))
    sel = LayerSelector(expected_dim=8)
    patched, _ = patch_checkpoint(ckpt, proj, sel)
    tampered = patched.copy()
    tampered.replace(NamedTensor.from_array(
        "blocks.0.ff.weight", patched["blocks.0.ff.weight"].as_f64() + 1.0))
    with pytest.raises(VerificationError, match="bytes changed"):
        verify_patch(ckpt, tampered, proj, sel, trials=10)


def test_report_is_sorted_and_hashed(rng):
    ckpt = weight_store(rng)
    proj = removal_projector(random_orthonormal(rng, 8, 1))
    patched, report = patch_checkpoint(ckpt, proj, LayerSelector(expected_dim=8))
    names = [r.name for r in report.records]
    assert names == sorted(names)
    assert len(report.projector_fingerprint) == 64
    assert patched.metadata["safer.patch_report_hash"] == report.text_hash()
    assert report.to_text().count("\n") == report.count + 1


def test_sd_style_checkpoint_patch(sd_checkpoint_path, tmp_path, rng):
    ckpt = load_store(sd_checkpoint_path)
    # cross-check the fixture against the independent reference reader
    ref = st_ref.load_file(sd_checkpoint_path)
    assert len(ref) == 686
    assert set(ref) == set(ckpt.names())
    import re
    pat = re.compile(DEFAULT_PATTERN)
    expected_matches = sorted(n for n in ref if pat.search(n))
    assert len(expected_matches) == 32
    assert all(768 in ref[n].shape for n in expected_matches)

    proj = removal_projector(random_orthonormal(rng, 768, 1))
    sel = LayerSelector(expected_dim=768)
    patched, report = patch_checkpoint(ckpt, proj, sel)
    assert [r.name for r in report.records] == expected_matches
    assert report.count == 32

    out = tmp_path / "patched.safetensors"
    save_store(patched, out)
    verify_patch(load_store(sd_checkpoint_path), load_store(out), proj, sel, trials=20)

    # byte-diff every unpatched payload via the reference reader
    ref_patched = st_ref.load_file(out)
    matched = set(expected_matches)
    for name in ref:
        if name not in matched:
            assert ref_patched[name].tobytes() == ref[name].tobytes()
        else:
            assert ref_patched[name].tobytes() != ref[name].tobytes()
