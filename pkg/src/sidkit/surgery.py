"""Named-tensor checkpoint containers and layer-level surgery.

Container layout (the safetensors wire format): an 8-byte little-endian
unsigned header length N, then N bytes of JSON mapping each tensor name to
{"dtype": tag, "shape": [...], "data_offsets": [begin, end]} (offsets are
relative to the start of the data region), optionally a "__metadata__"
string map, then the contiguous data region. Canonical files have header
keys sorted and tensor data laid out in that same order; the writer always
emits canonical files, so write(read(f)) == f whenever f is canonical.

Surgery (reverting layers to their pretrained state, swapping layers between
two fine-tuned checkpoints) copies tensor bytes verbatim - no parameter is
ever converted or averaged - and streams one tensor at a time, so checkpoints
far larger than memory are fine. Which tensors belong to the embeddings, to
encoder layer i, or to the task heads is decided by a configurable
NamingScheme, not hard-coded key lists.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np


class CheckpointFormatError(Exception):
    """The container file violates the format contract."""


class SurgeryError(Exception):
    """A surgery operation cannot be applied to these checkpoints."""


class SchemeError(Exception):
    """The naming scheme does not fit the checkpoint's tensor names."""


DTYPE_SIZES: dict[str, int] = {
    "F64": 8, "F32": 4, "F16": 2, "BF16": 2,
    "I64": 8, "I32": 4, "I16": 2, "I8": 1,
    "U8": 1, "BOOL": 1,
}

_FLOAT_NUMPY: dict[str, str] = {"F64": "<f8", "F32": "<f4", "F16": "<f2"}

_HEADER_LEN_BYTES = 8


@dataclass(frozen=True)
class TensorEntry:
    name: str
    dtype: str
    shape: tuple[int, ...]
    data_offsets: tuple[int, int]  # relative to the data region

    def __post_init__(self) -> None:
        if self.dtype not in DTYPE_SIZES:
            raise CheckpointFormatError(f"tensor {self.name!r}: unknown dtype {self.dtype!r}")
        if any(not isinstance(d, int) or d < 0 for d in self.shape):
            raise CheckpointFormatError(f"tensor {self.name!r}: bad shape {self.shape}")
        if len(self.data_offsets) != 2 or not all(isinstance(o, int) for o in self.data_offsets):
            raise CheckpointFormatError(
                f"tensor {self.name!r}: data_offsets must be two integers, got {self.data_offsets}"
            )
        begin, end = self.data_offsets
        if not 0 <= begin <= end:
            raise CheckpointFormatError(f"tensor {self.name!r}: bad byte range [{begin}, {end})")
        if end - begin != self.nbytes:
            raise CheckpointFormatError(
                f"tensor {self.name!r}: byte range holds {end - begin} bytes but "
                f"dtype/shape imply {self.nbytes}"
            )

    @property
    def num_elements(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n

    @property
    def nbytes(self) -> int:
        return self.num_elements * DTYPE_SIZES[self.dtype]


@dataclass(frozen=True)
class CheckpointIndex:
    entries: tuple[TensorEntry, ...]
    metadata: dict[str, str] | None = None

    def __post_init__(self) -> None:
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise CheckpointFormatError("duplicate tensor names in index")
        ordered = sorted(self.entries, key=lambda e: e.data_offsets[0])
        for a, b in zip(ordered, ordered[1:]):
            if b.data_offsets[0] < a.data_offsets[1]:
                raise CheckpointFormatError(
                    f"tensors {a.name!r} and {b.name!r} have overlapping byte ranges"
                )

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def entry(self, name: str) -> TensorEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


class Checkpoint:
    """Read-only handle: parsed index plus lazy, range-based tensor access."""

    def __init__(self, path: str | Path, index: CheckpointIndex, data_start: int) -> None:
        self.path = Path(path)
        self.index = index
        self._data_start = data_start
        self._by_name = {e.name: e for e in index.entries}

    def names(self) -> list[str]:
        return self.index.names()

    def entry(self, name: str) -> TensorEntry:
        try:
            return self._by_name[name]
        except KeyError:
            raise SurgeryError(f"tensor {name!r} not present in {self.path.name}") from None

    def tensor_bytes(self, name: str) -> bytes:
        """Raw little-endian bytes of one tensor (file reopened per call)."""
        entry = self.entry(name)
        begin, end = entry.data_offsets
        with open(self.path, "rb") as fh:
            fh.seek(self._data_start + begin)
            data = fh.read(end - begin)
        if len(data) != end - begin:
            raise CheckpointFormatError(f"tensor {name!r}: data region truncated")
        return data

    def tensor_f64(self, name: str) -> np.ndarray:
        """Tensor decoded to float64 (floats only; BF16 widened manually)."""
        entry = self.entry(name)
        raw = self.tensor_bytes(name)
        if entry.dtype in _FLOAT_NUMPY:
            return np.frombuffer(raw, dtype=_FLOAT_NUMPY[entry.dtype]).astype(np.float64)
        if entry.dtype == "BF16":
            as_u16 = np.frombuffer(raw, dtype="<u2").astype(np.uint32) << 16
            return as_u16.view(np.float32).astype(np.float64)
        raise SurgeryError(f"tensor {name!r}: dtype {entry.dtype} is not a float type")


def read_checkpoint(path: str | Path) -> Checkpoint:
    """Parse the header and validate the index without loading tensor data."""
    path = Path(path)
    file_size = path.stat().st_size
    with open(path, "rb") as fh:
        prefix = fh.read(_HEADER_LEN_BYTES)
        if len(prefix) < _HEADER_LEN_BYTES:
            raise CheckpointFormatError(f"{path.name}: file too small for a header length")
        (header_len,) = struct.unpack("<Q", prefix)
        if _HEADER_LEN_BYTES + header_len > file_size:
            raise CheckpointFormatError(
                f"{path.name}: header length {header_len} exceeds file size {file_size}"
            )
        header_raw = fh.read(header_len)
    try:
        header = json.loads(header_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"{path.name}: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise CheckpointFormatError(f"{path.name}: header must be a JSON object")

    metadata = None
    entries = []
    for name, spec in header.items():
        if name == "__metadata__":
            if not isinstance(spec, dict) or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in spec.items()
            ):
                raise CheckpointFormatError(f"{path.name}: __metadata__ must map strings to strings")
            metadata = dict(spec)
            continue
        try:
            entries.append(
                TensorEntry(
                    name=name,
                    dtype=spec["dtype"],
                    shape=tuple(spec["shape"]),
                    data_offsets=tuple(spec["data_offsets"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise CheckpointFormatError(f"{path.name}: malformed entry for {name!r}: {exc}") from exc

    index = CheckpointIndex(entries=tuple(entries), metadata=metadata)
    data_start = _HEADER_LEN_BYTES + header_len
    data_size = file_size - data_start
    for entry in index.entries:
        if entry.data_offsets[1] > data_size:
            raise CheckpointFormatError(
                f"{path.name}: tensor {entry.name!r} extends past end of file"
            )
    return Checkpoint(path, index, data_start)


TensorSource = Union[bytes, Callable[[], bytes]]


def write_checkpoint(
    path: str | Path,
    tensors: Mapping[str, tuple[str, Sequence[int], TensorSource]],
    metadata: Mapping[str, str] | None = None,
) -> None:
    """Write a canonical container: sorted names, data in name order.

    ``tensors`` maps name -> (dtype, shape, source); a source is either the
    raw bytes or a zero-argument callable producing them, which keeps at most
    one tensor's data in memory during the write.
    """
    names = sorted(tensors)
    header: dict[str, object] = {}
    if metadata is not None:
        header["__metadata__"] = {str(k): str(v) for k, v in sorted(metadata.items())}
    offset = 0
    entries: list[TensorEntry] = []
    for name in names:
        dtype, shape, _ = tensors[name]
        num_elements = 1
        for dim in shape:
            num_elements *= dim
        entry = TensorEntry(
            name=name,
            dtype=dtype,
            shape=tuple(shape),
            data_offsets=(offset, offset + DTYPE_SIZES[dtype] * num_elements),
        )
        entries.append(entry)
        offset = entry.data_offsets[1]
        header[name] = {
            "dtype": entry.dtype,
            "shape": list(entry.shape),
            "data_offsets": list(entry.data_offsets),
        }

    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for name, entry in zip(names, entries):
            source = tensors[name][2]
            data = source() if callable(source) else source
            if len(data) != entry.nbytes:
                raise CheckpointFormatError(
                    f"tensor {name!r}: source provided {len(data)} bytes, expected {entry.nbytes}"
                )
            fh.write(data)


# ---------------------------------------------------------------------------
# Naming schemes and tensor groups
# ---------------------------------------------------------------------------

GroupId = Union[int, str]  # a layer index, "embeddings", or "heads"


@dataclass(frozen=True)
class NamingScheme:
    """Maps tensor names to embeddings / per-layer / head groups.

    ``layer_template`` contains the placeholder ``{i}``; matching is
    delimiter-aware, so with a template of ``encoder.layer.{i}`` the prefix
    for layer 1 does not capture ``encoder.layer.10.*``.
    """

    embeddings_prefixes: tuple[str, ...] = ("embeddings.",)
    layer_template: str = "encoder.layer.{i}."
    head_prefixes: tuple[str, ...] = ("classifier.",)
    num_layers: int = 12

    def __post_init__(self) -> None:
        if self.layer_template.count("{i}") != 1:
            raise SchemeError("layer_template must contain exactly one {i} placeholder")
        if self.num_layers < 1:
            raise SchemeError(f"num_layers must be >= 1, got {self.num_layers}")

    def layer_prefix(self, i: int) -> str:
        if not 0 <= i < self.num_layers:
            raise SchemeError(f"layer index {i} outside [0, {self.num_layers})")
        return self.layer_template.replace("{i}", str(i))

    def classify(self, name: str) -> GroupId | None:
        """Group of one tensor name, or None if it falls outside all groups."""
        hits: list[GroupId] = []
        if any(_prefix_match(name, p) for p in self.embeddings_prefixes):
            hits.append("embeddings")
        if any(_prefix_match(name, p) for p in self.head_prefixes):
            hits.append("heads")
        for i in range(self.num_layers):
            if _prefix_match(name, self.layer_prefix(i)):
                hits.append(i)
                break
        if len(hits) > 1:
            raise SchemeError(f"tensor {name!r} matches several groups: {hits}")
        return hits[0] if hits else None

    def to_json(self) -> str:
        return json.dumps(
            {
                "embeddings_prefixes": list(self.embeddings_prefixes),
                "layer_template": self.layer_template,
                "head_prefixes": list(self.head_prefixes),
                "num_layers": self.num_layers,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "NamingScheme":
        raw = json.loads(text)
        unknown = set(raw) - {"embeddings_prefixes", "layer_template", "head_prefixes", "num_layers"}
        if unknown:
            raise SchemeError(f"unknown scheme keys: {sorted(unknown)}")
        kwargs = {}
        if "embeddings_prefixes" in raw:
            kwargs["embeddings_prefixes"] = tuple(raw["embeddings_prefixes"])
        if "head_prefixes" in raw:
            kwargs["head_prefixes"] = tuple(raw["head_prefixes"])
        if "layer_template" in raw:
            kwargs["layer_template"] = raw["layer_template"]
        if "num_layers" in raw:
            kwargs["num_layers"] = raw["num_layers"]
        return cls(**kwargs)


def _prefix_match(name: str, prefix: str) -> bool:
    # Delimiter-aware: "encoder.layer.1" must not capture "encoder.layer.10.w".
    if name == prefix:
        return True
    if not name.startswith(prefix):
        return False
    return prefix.endswith(".") or name[len(prefix)] == "."


def layer_group(scheme: NamingScheme, group: GroupId, names: Iterable[str]) -> set[str]:
    """All names belonging to one group; empty resolution is an error."""
    names = list(names)
    if group == "embeddings":
        selected = {n for n in names if any(_prefix_match(n, p) for p in scheme.embeddings_prefixes)}
    elif group == "heads":
        selected = {n for n in names if any(_prefix_match(n, p) for p in scheme.head_prefixes)}
    elif isinstance(group, int):
        prefix = scheme.layer_prefix(group)
        selected = {n for n in names if _prefix_match(n, prefix)}
    else:
        raise SchemeError(f"unknown group {group!r}")
    if not selected:
        raise SchemeError(f"group {group!r} matches no tensor names; scheme misconfigured?")
    return selected


def group_coverage(scheme: NamingScheme, names: Iterable[str]) -> dict[str, GroupId | None]:
    """Classification of every name; None marks tensors outside all groups."""
    return {name: scheme.classify(name) for name in names}


# ---------------------------------------------------------------------------
# Surgery
# ---------------------------------------------------------------------------


def _as_checkpoint(cp: Checkpoint | str | Path) -> Checkpoint:
    return cp if isinstance(cp, Checkpoint) else read_checkpoint(cp)


def _splice(
    base: Checkpoint,
    donor: Checkpoint,
    donor_names: set[str],
    out_path: str | Path,
) -> Checkpoint:
    """Write base with the named tensors' bytes taken verbatim from donor."""
    tensors: dict[str, tuple[str, Sequence[int], TensorSource]] = {}
    for entry in base.index.entries:
        if entry.name in donor_names:
            donor_entry = donor.entry(entry.name)
            if donor_entry.dtype != entry.dtype or donor_entry.shape != entry.shape:
                raise SurgeryError(
                    f"tensor {entry.name!r}: dtype/shape mismatch "
                    f"({entry.dtype}{list(entry.shape)} vs "
                    f"{donor_entry.dtype}{list(donor_entry.shape)})"
                )
            source: TensorSource = (lambda n=entry.name: donor.tensor_bytes(n))
        else:
            source = (lambda n=entry.name: base.tensor_bytes(n))
        tensors[entry.name] = (entry.dtype, entry.shape, source)
    write_checkpoint(out_path, tensors, metadata=base.index.metadata)
    return read_checkpoint(out_path)


def _resolve_groups(scheme: NamingScheme, groups: Sequence[GroupId], names: list[str]) -> set[str]:
    selected: set[str] = set()
    for group in groups:
        selected |= layer_group(scheme, group, names)
    return selected


def revert_layers(
    finetuned: Checkpoint | str | Path,
    pretrained: Checkpoint | str | Path,
    groups: Sequence[GroupId],
    scheme: NamingScheme,
    out_path: str | Path,
) -> Checkpoint:
    """Reset the selected groups of a fine-tuned checkpoint to pretrained bytes.

    Passing sequential pairs such as (0, 1), (1, 2), ... reproduces the
    layer-ablation sweep; an empty group list copies the input unchanged.
    """
    finetuned = _as_checkpoint(finetuned)
    pretrained = _as_checkpoint(pretrained)
    selected = _resolve_groups(scheme, groups, finetuned.names())
    return _splice(finetuned, pretrained, selected, out_path)


def swap_layers(
    recipient: Checkpoint | str | Path,
    donor: Checkpoint | str | Path,
    layers: Sequence[int],
    scheme: NamingScheme,
    out_path: str | Path,
    include_embeddings: bool = False,
) -> Checkpoint:
    """Splice the donor's selected encoder layers (and optionally embeddings)
    into the recipient. Task heads are never swapped, and bytes are copied
    verbatim - parameters are never merged or converted.

    The default assembly used for cross-lingual transfer is layers [0, 1]
    plus embeddings.
    """
    for layer in layers:
        if not isinstance(layer, int):
            raise SurgeryError(f"swap layers must be integer indices, got {layer!r}")
    recipient = _as_checkpoint(recipient)
    donor = _as_checkpoint(donor)
    groups: list[GroupId] = list(layers)
    if include_embeddings:
        groups.append("embeddings")
    selected = _resolve_groups(scheme, groups, recipient.names())
    return _splice(recipient, donor, selected, out_path)


# ---------------------------------------------------------------------------
# MAV diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MavReport:
    """Mean absolute parameter difference per group, plus the global variance
    of the per-parameter change (the statistic used to judge whether any
    layer stands out)."""

    per_group: dict[str, float]
    global_variance: float
    parameter_count: int
    per_group_counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "per_group": {k: self.per_group[k] for k in sorted(self.per_group)},
                "per_group_counts": {k: self.per_group_counts[k] for k in sorted(self.per_group_counts)},
                "global_variance": self.global_variance,
                "parameter_count": self.parameter_count,
            },
            indent=2,
        )


def _group_key(group: GroupId | None) -> str:
    if group is None:
        return "other"
    if isinstance(group, int):
        return f"layer {group}"
    return group


def mav_report(
    a: Checkpoint | str | Path,
    b: Checkpoint | str | Path,
    scheme: NamingScheme,
) -> MavReport:
    """Per-group mean |a - b| over all scalar parameters, double accumulation.

    Both checkpoints must hold the same tensors (names, dtypes, shapes).
    The global variance is the population variance of (a_i - b_i) over every
    parameter in the file.
    """
    a = _as_checkpoint(a)
    b = _as_checkpoint(b)
    names_a, names_b = set(a.names()), set(b.names())
    if names_a != names_b:
        missing = sorted(names_a ^ names_b)
        raise SurgeryError(f"checkpoints hold different tensors, e.g. {missing[:3]}")

    abs_sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    diff_sum = 0.0
    diff_sq_sum = 0.0
    total = 0
    for name in sorted(names_a):
        ea, eb = a.entry(name), b.entry(name)
        if ea.dtype != eb.dtype or ea.shape != eb.shape:
            raise SurgeryError(
                f"tensor {name!r}: dtype/shape mismatch "
                f"({ea.dtype}{list(ea.shape)} vs {eb.dtype}{list(eb.shape)})"
            )
        diff = a.tensor_f64(name) - b.tensor_f64(name)
        key = _group_key(scheme.classify(name))
        abs_sums[key] = abs_sums.get(key, 0.0) + float(np.abs(diff).sum())
        counts[key] = counts.get(key, 0) + diff.size
        diff_sum += float(diff.sum())
        diff_sq_sum += float((diff * diff).sum())
        total += diff.size

    if total == 0:
        raise SurgeryError("checkpoints contain no parameters")
    mean = diff_sum / total
    variance = max(diff_sq_sum / total - mean * mean, 0.0)
    return MavReport(
        per_group={key: abs_sums[key] / counts[key] for key in abs_sums},
        global_variance=variance,
        parameter_count=total,
        per_group_counts=counts,
    )
