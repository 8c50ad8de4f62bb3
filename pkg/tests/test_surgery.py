import json
import struct

import numpy as np
import pytest

from conftest import NUMPY_DTYPES, make_checkpoint
from sidkit.surgery import (
    CheckpointFormatError,
    NamingScheme,
    SchemeError,
    SurgeryError,
    group_coverage,
    layer_group,
    mav_report,
    read_checkpoint,
    revert_layers,
    swap_layers,
    write_checkpoint,
)

SCHEME = NamingScheme()


# ---------------------------------------------------------------------------
# Container round trips
# ---------------------------------------------------------------------------


def test_read_write_round_trip_byte_identical(tmp_path):
    src = make_checkpoint(tmp_path / "a.safetensors", seed=1)
    cp = read_checkpoint(src)
    dst = tmp_path / "b.safetensors"
    write_checkpoint(
        dst,
        {e.name: (e.dtype, e.shape, cp.tensor_bytes(e.name)) for e in cp.index.entries},
        metadata=cp.index.metadata,
    )
    assert src.read_bytes() == dst.read_bytes()


def test_empty_tensor_set_is_a_valid_container(tmp_path):
    path = tmp_path / "empty.safetensors"
    write_checkpoint(path, {})
    cp = read_checkpoint(path)
    assert cp.names() == []


def test_random_tensors_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    tensors = {}
    for i in range(100):
        dtype = rng.choice(["F64", "F32", "F16"])
        shape = tuple(int(d) for d in rng.integers(1, 5, size=rng.integers(0, 4)))
        data = rng.standard_normal(shape).astype(NUMPY_DTYPES[dtype]).tobytes()
        tensors[f"t.{i}"] = (dtype, shape, data)
    path = tmp_path / "rand.safetensors"
    write_checkpoint(path, tensors)
    cp = read_checkpoint(path)
    assert set(cp.names()) == set(tensors)
    for name, (dtype, shape, data) in tensors.items():
        entry = cp.entry(name)
        assert entry.dtype == dtype
        assert entry.shape == tuple(shape)
        assert cp.tensor_bytes(name) == data


def test_scalar_tensor_round_trip(tmp_path):
    path = tmp_path / "scalar.safetensors"
    data = np.float64(3.25).tobytes()
    write_checkpoint(path, {"s": ("F64", (), data)})
    cp = read_checkpoint(path)
    assert cp.entry("s").shape == ()
    assert cp.tensor_bytes("s") == data


def test_metadata_preserved(tmp_path):
    path = tmp_path / "m.safetensors"
    write_checkpoint(path, {"t": ("F32", (1,), b"\x00" * 4)}, metadata={"k": "v"})
    assert read_checkpoint(path).index.metadata == {"k": "v"}


# ---------------------------------------------------------------------------
# Format errors
# ---------------------------------------------------------------------------


def test_header_length_exceeding_file_size(tmp_path):
    path = tmp_path / "bad.safetensors"
    path.write_bytes(struct.pack("<Q", 10_000) + b"{}")
    with pytest.raises(CheckpointFormatError, match="header length"):
        read_checkpoint(path)


def test_truncated_data_region(tmp_path):
    header = json.dumps(
        {"t": {"dtype": "F32", "shape": [4], "data_offsets": [0, 16]}},
        separators=(",", ":"),
    ).encode()
    path = tmp_path / "short.safetensors"
    path.write_bytes(struct.pack("<Q", len(header)) + header + b"\x00" * 8)
    with pytest.raises(CheckpointFormatError, match="past end"):
        read_checkpoint(path)


def test_overlapping_ranges_rejected(tmp_path):
    header = json.dumps(
        {
            "a": {"dtype": "F32", "shape": [2], "data_offsets": [0, 8]},
            "b": {"dtype": "F32", "shape": [2], "data_offsets": [4, 12]},
        },
        separators=(",", ":"),
    ).encode()
    path = tmp_path / "overlap.safetensors"
    path.write_bytes(struct.pack("<Q", len(header)) + header + b"\x00" * 12)
    with pytest.raises(CheckpointFormatError, match="overlapping"):
        read_checkpoint(path)


def test_inconsistent_range_size_rejected(tmp_path):
    header = json.dumps(
        {"t": {"dtype": "F32", "shape": [4], "data_offsets": [0, 12]}},
        separators=(",", ":"),
    ).encode()
    path = tmp_path / "size.safetensors"
    path.write_bytes(struct.pack("<Q", len(header)) + header + b"\x00" * 12)
    with pytest.raises(CheckpointFormatError, match="imply"):
        read_checkpoint(path)


def test_non_json_header_rejected(tmp_path):
    path = tmp_path / "junk.safetensors"
    path.write_bytes(struct.pack("<Q", 4) + b"junk")
    with pytest.raises(CheckpointFormatError, match="JSON"):
        read_checkpoint(path)


# ---------------------------------------------------------------------------
# Naming scheme and groups
# ---------------------------------------------------------------------------


def test_layer_group_selects_exact_layer(tmp_path):
    cp = read_checkpoint(make_checkpoint(tmp_path / "a.safetensors", seed=2))
    names = layer_group(SCHEME, 0, cp.names())
    assert names == {
        "encoder.layer.0.attention.weight",
        "encoder.layer.0.ffn.weight",
        "encoder.layer.0.norm.bias",
    }


def test_delimiter_aware_matching():
    scheme = NamingScheme(layer_template="encoder.layer.{i}", num_layers=12)
    names = ["encoder.layer.1.w", "encoder.layer.10.w", "encoder.layer.11.w"]
    assert layer_group(scheme, 1, names) == {"encoder.layer.1.w"}
    assert layer_group(scheme, 10, names) == {"encoder.layer.10.w"}


def test_groups_partition_synthetic_checkpoint(tmp_path):
    cp = read_checkpoint(make_checkpoint(tmp_path / "a.safetensors", seed=3))
    coverage = group_coverage(SCHEME, cp.names())
    assert None not in coverage.values()
    union = set()
    for group in ["embeddings", "heads", *range(12)]:
        members = layer_group(SCHEME, group, cp.names())
        assert not union & members  # disjoint
        union |= members
    assert union == set(cp.names())


def test_empty_group_resolution_errors():
    with pytest.raises(SchemeError, match="matches no tensor"):
        layer_group(SCHEME, 3, ["classifier.weight"])


def test_layer_index_out_of_range():
    with pytest.raises(SchemeError, match="outside"):
        layer_group(SCHEME, 12, ["encoder.layer.0.w"])


def test_scheme_validation_and_json_round_trip():
    with pytest.raises(SchemeError):
        NamingScheme(layer_template="encoder.layer.")
    with pytest.raises(SchemeError):
        NamingScheme(num_layers=0)
    scheme = NamingScheme(
        embeddings_prefixes=("embed.", "rel_pos."),
        layer_template="blocks.{i}.",
        head_prefixes=("lm_head.",),
        num_layers=6,
    )
    assert NamingScheme.from_json(scheme.to_json()) == scheme


def test_ambiguous_scheme_detected():
    scheme = NamingScheme(
        embeddings_prefixes=("encoder.",), layer_template="encoder.layer.{i}.", num_layers=2
    )
    with pytest.raises(SchemeError, match="several groups"):
        group_coverage(scheme, ["encoder.layer.0.w"])


# ---------------------------------------------------------------------------
# Revert and swap
# ---------------------------------------------------------------------------


def _tensor_map(path):
    cp = read_checkpoint(path)
    return {name: cp.tensor_bytes(name) for name in cp.names()}


def test_revert_no_groups_is_identity(tmp_path):
    finetuned = make_checkpoint(tmp_path / "ft.safetensors", seed=4)
    pretrained = make_checkpoint(tmp_path / "pt.safetensors", seed=5)
    out = tmp_path / "out.safetensors"
    revert_layers(finetuned, pretrained, [], SCHEME, out)
    assert out.read_bytes() == finetuned.read_bytes()


def test_revert_all_groups_restores_pretrained(tmp_path):
    finetuned = make_checkpoint(tmp_path / "ft.safetensors", seed=6)
    pretrained = make_checkpoint(tmp_path / "pt.safetensors", seed=7)
    out = tmp_path / "out.safetensors"
    revert_layers(
        finetuned, pretrained, ["embeddings", "heads", *range(12)], SCHEME, out
    )
    assert out.read_bytes() == pretrained.read_bytes()


def test_revert_is_idempotent(tmp_path):
    finetuned = make_checkpoint(tmp_path / "ft.safetensors", seed=8)
    pretrained = make_checkpoint(tmp_path / "pt.safetensors", seed=9)
    once = tmp_path / "once.safetensors"
    twice = tmp_path / "twice.safetensors"
    revert_layers(finetuned, pretrained, [0, 1], SCHEME, once)
    revert_layers(once, pretrained, [0, 1], SCHEME, twice)
    assert once.read_bytes() == twice.read_bytes()


def test_revert_frame_rule(tmp_path):
    finetuned = make_checkpoint(tmp_path / "ft.safetensors", seed=10)
    pretrained = make_checkpoint(tmp_path / "pt.safetensors", seed=11)
    out = tmp_path / "out.safetensors"
    revert_layers(finetuned, pretrained, [3, 4], SCHEME, out)
    ft, pt, result = _tensor_map(finetuned), _tensor_map(pretrained), _tensor_map(out)
    reverted = layer_group(SCHEME, 3, ft) | layer_group(SCHEME, 4, ft)
    for name in ft:
        if name in reverted:
            assert result[name] == pt[name], name
        else:
            assert result[name] == ft[name], name


def test_swap_from_self_is_identity(tmp_path):
    a = make_checkpoint(tmp_path / "a.safetensors", seed=12)
    out = tmp_path / "out.safetensors"
    swap_layers(a, a, [0, 1], SCHEME, out, include_embeddings=True)
    assert out.read_bytes() == a.read_bytes()


def test_swap_then_swap_back_restores_original(tmp_path):
    a = make_checkpoint(tmp_path / "a.safetensors", seed=13)
    b = make_checkpoint(tmp_path / "b.safetensors", seed=14)
    ab = tmp_path / "ab.safetensors"
    back = tmp_path / "back.safetensors"
    swap_layers(a, b, [0, 1], SCHEME, ab, include_embeddings=True)
    swap_layers(ab, a, [0, 1], SCHEME, back, include_embeddings=True)
    assert back.read_bytes() == a.read_bytes()


def test_assembled_model_tensor_audit(tmp_path):
    recipient = make_checkpoint(tmp_path / "task.safetensors", seed=15)
    donor = make_checkpoint(tmp_path / "lang.safetensors", seed=16)
    out = tmp_path / "assembled.safetensors"
    swap_layers(recipient, donor, [0, 1], SCHEME, out, include_embeddings=True)
    rec, don, result = _tensor_map(recipient), _tensor_map(donor), _tensor_map(out)
    swapped = (
        layer_group(SCHEME, 0, rec)
        | layer_group(SCHEME, 1, rec)
        | layer_group(SCHEME, "embeddings", rec)
    )
    for name in rec:
        expected = don[name] if name in swapped else rec[name]
        assert result[name] == expected, name
    # heads must come from the recipient
    for name in layer_group(SCHEME, "heads", rec):
        assert result[name] == rec[name]


def test_swap_rejects_non_integer_layers(tmp_path):
    a = make_checkpoint(tmp_path / "a.safetensors", seed=17)
    with pytest.raises(SurgeryError):
        swap_layers(a, a, ["heads"], SCHEME, tmp_path / "x.safetensors")


def test_surgery_reports_missing_tensor(tmp_path):
    finetuned = make_checkpoint(tmp_path / "ft.safetensors", seed=18)
    small = make_checkpoint(tmp_path / "small.safetensors", seed=19, num_layers=2)
    with pytest.raises(SurgeryError, match="encoder.layer.5"):
        revert_layers(finetuned, small, [5], SCHEME, tmp_path / "x.safetensors")


def test_surgery_reports_shape_mismatch(tmp_path):
    a = make_checkpoint(tmp_path / "a.safetensors", seed=20, hidden=4)
    b = make_checkpoint(tmp_path / "b.safetensors", seed=21, hidden=8)
    with pytest.raises(SurgeryError, match="mismatch"):
        revert_layers(a, b, [0], SCHEME, tmp_path / "x.safetensors")


# ---------------------------------------------------------------------------
# MAV
# ---------------------------------------------------------------------------


def test_mav_of_identical_checkpoints_is_zero(tmp_path):
    a = make_checkpoint(tmp_path / "a.safetensors", seed=22)
    report = mav_report(a, a, SCHEME)
    assert report.global_variance == 0.0
    assert set(report.per_group) == {"embeddings", "heads", *(f"layer {i}" for i in range(12))}
    assert all(v == 0.0 for v in report.per_group.values())


def test_mav_constant_shift_on_one_layer(tmp_path):
    a_path = make_checkpoint(tmp_path / "a.safetensors", seed=23, dtype="F64")
    a = read_checkpoint(a_path)
    tensors = {
        e.name: (e.dtype, e.shape, a.tensor_bytes(e.name)) for e in a.index.entries
    }
    shift = 0.125  # exactly representable
    for name in layer_group(SCHEME, 5, a.names()):
        arr = np.frombuffer(a.tensor_bytes(name), dtype="<f8") + shift
        tensors[name] = ("F64", a.entry(name).shape, arr.astype("<f8").tobytes())
    b_path = tmp_path / "b.safetensors"
    write_checkpoint(b_path, tensors, metadata=a.index.metadata)

    report = mav_report(a_path, b_path, SCHEME)
    assert report.per_group["layer 5"] == pytest.approx(shift, rel=0, abs=0)
    for key, value in report.per_group.items():
        if key != "layer 5":
            assert value == 0.0


def test_mav_symmetry_and_linearity(tmp_path):
    a_path = make_checkpoint(tmp_path / "a.safetensors", seed=24, dtype="F64")
    b_path = make_checkpoint(tmp_path / "b.safetensors", seed=25, dtype="F64")
    forward = mav_report(a_path, b_path, SCHEME)
    backward = mav_report(b_path, a_path, SCHEME)
    assert forward.per_group == backward.per_group
    assert forward.global_variance == backward.global_variance

    # c = a + 2(b - a): doubles every difference exactly in float64
    a, b = read_checkpoint(a_path), read_checkpoint(b_path)
    tensors = {}
    for entry in a.index.entries:
        va = np.frombuffer(a.tensor_bytes(entry.name), dtype="<f8")
        vb = np.frombuffer(b.tensor_bytes(entry.name), dtype="<f8")
        tensors[entry.name] = ("F64", entry.shape, (va + 2.0 * (vb - va)).tobytes())
    c_path = tmp_path / "c.safetensors"
    write_checkpoint(c_path, tensors, metadata=a.index.metadata)

    doubled = mav_report(a_path, c_path, SCHEME)
    for key in forward.per_group:
        assert doubled.per_group[key] == pytest.approx(2 * forward.per_group[key], rel=1e-12)
    assert doubled.global_variance == pytest.approx(4 * forward.global_variance, rel=1e-12)


def test_mav_supports_f16_and_bf16(tmp_path):
    values = np.array([1.0, -2.5, 0.5, 3.0])
    f16 = values.astype("<f2")
    bf16_bits = (values.astype("<f4").view("<u4") >> 16).astype("<u2")
    path_a = tmp_path / "a.safetensors"
    path_b = tmp_path / "b.safetensors"
    write_checkpoint(path_a, {
        "embeddings.w": ("F16", (4,), f16.tobytes()),
        "encoder.layer.0.w": ("BF16", (4,), bf16_bits.tobytes()),
    })
    write_checkpoint(path_b, {
        "embeddings.w": ("F16", (4,), (f16 + np.float16(1.0)).tobytes()),
        "encoder.layer.0.w": ("BF16", (4,), bf16_bits.tobytes()),
    })
    scheme = NamingScheme(num_layers=1)
    report = mav_report(path_a, path_b, scheme)
    assert report.per_group["embeddings"] == pytest.approx(1.0)
    assert report.per_group["layer 0"] == 0.0


def test_mav_rejects_structure_mismatch(tmp_path):
    a = make_checkpoint(tmp_path / "a.safetensors", seed=26)
    b = make_checkpoint(tmp_path / "b.safetensors", seed=27, num_layers=6)
    with pytest.raises(SurgeryError, match="different tensors"):
        mav_report(a, b, SCHEME)


def test_mav_rejects_integer_tensors(tmp_path):
    path_a = tmp_path / "a.safetensors"
    path_b = tmp_path / "b.safetensors"
    data = np.arange(4, dtype="<i4").tobytes()
    for p in (path_a, path_b):
        write_checkpoint(p, {"embeddings.ids": ("I32", (4,), data)})
    with pytest.raises(SurgeryError, match="float"):
        mav_report(path_a, path_b, NamingScheme(num_layers=1))
