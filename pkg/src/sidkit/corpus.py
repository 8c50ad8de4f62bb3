"""BIO-annotated slot/intent corpora: parsing, writing, validation, splits.

File format (CoNLL-style blocks, UTF-8):

    # id: 7
    # text: minn mæ på møtet
    # intent: reminder/set_reminder
    minn<TAB>O
    mæ<TAB>O
    på<TAB>O
    møtet<TAB>B-reminder/todo

Blocks are separated by a single blank line; comment lines start with "# " and
carry "key: value" pairs (id, text, intent, variety). Token lines are
tab-separated with a configurable column map (default: column 0 = token,
column 1 = slot tag). Malformed slot tags are kept verbatim by the parser;
``validate_bio`` reports them.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Literal, Sequence

from .rng import SplitMix64, derive_seed, round_half_up


class CorpusError(Exception):
    """Base class for corpus-level data errors."""


class ParseError(CorpusError):
    """Raised when an input file does not follow the block format."""


class BioFormatError(CorpusError):
    """Raised by strict span extraction on the first BIO violation."""

    def __init__(self, violation: "BioViolation") -> None:
        super().__init__(
            f"BIO violation at position {violation.position}: "
            f"{violation.kind} ({violation.detail})"
        )
        self.violation = violation


class SplitError(CorpusError):
    """Raised when a dataset split cannot be carried out as requested."""


RepairPolicy = Literal["strict", "lenient"]


@dataclass(frozen=True)
class Utterance:
    """One example: tokens with BIO slot tags plus an intent label.

    Slot tags are stored verbatim (including malformed ones); only structural
    invariants are enforced here. Use :func:`validate_bio` for tag syntax.
    """

    id: str
    tokens: tuple[str, ...]
    slot_tags: tuple[str, ...]
    intent: str
    variety: str | None = None
    raw_text: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "slot_tags", tuple(self.slot_tags))
        if len(self.tokens) != len(self.slot_tags):
            raise ValueError(
                f"utterance {self.id!r}: {len(self.tokens)} tokens but "
                f"{len(self.slot_tags)} slot tags"
            )
        for tok in self.tokens:
            if not tok:
                raise ValueError(f"utterance {self.id!r}: empty token")
            if any(ch.isspace() for ch in tok):
                raise ValueError(f"utterance {self.id!r}: token {tok!r} contains whitespace")
        # comment-carried fields must survive a write/parse cycle losslessly
        for field_name in ("id", "intent", "variety", "raw_text"):
            value = getattr(self, field_name)
            if value is None:
                continue
            if "\n" in value:
                raise ValueError(f"utterance {self.id!r}: {field_name} contains a newline")
            if value != value.strip():
                raise ValueError(
                    f"utterance {self.id!r}: {field_name} {value!r} has leading/trailing whitespace"
                )

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True, order=True)
class Span:
    """A labeled slot over the half-open token range [start, end)."""

    start: int
    end: int
    label: str

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span range [{self.start}, {self.end})")

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Dataset:
    """An ordered, immutable collection of utterances with unique ids."""

    name: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "utterances", tuple(self.utterances))
        seen: set[str] = set()
        for utt in self.utterances:
            if utt.id in seen:
                raise ValueError(f"dataset {self.name!r}: duplicate utterance id {utt.id!r}")
            seen.add(utt.id)

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self) -> Iterator[Utterance]:
        return iter(self.utterances)

    def by_id(self) -> dict[str, Utterance]:
        return {utt.id: utt for utt in self.utterances}

    def intents(self) -> set[str]:
        return {utt.intent for utt in self.utterances}

    def full_tags(self) -> set[str]:
        return {tag for utt in self.utterances for tag in utt.slot_tags}

    def slot_labels(self) -> set[str]:
        """Distinct slot labels with the B-/I- prefix stripped."""
        return {tag[2:] for tag in self.full_tags() if _is_bi_tag(tag)}


@dataclass(frozen=True)
class BioViolation:
    """One spot where a tag sequence breaks the BIO scheme."""

    utterance_id: str
    position: int
    kind: Literal["I-without-B", "I-label-mismatch", "malformed-tag"]
    detail: str


@dataclass(frozen=True)
class FormatOptions:
    """Column/comment mapping for the block file format."""

    token_col: int = 0
    tag_col: int = 1
    require_intent: bool = True
    variety: str | None = None  # fallback when a block carries no variety comment

    def __post_init__(self) -> None:
        if self.token_col < 0 or self.tag_col < 0:
            raise ValueError("column indices must be non-negative")
        if self.token_col == self.tag_col:
            raise ValueError("token and tag columns must differ")


DEFAULT_FORMAT = FormatOptions()

_COMMENT_PREFIX = "# "
_KNOWN_COMMENT_KEYS = ("id", "text", "intent", "variety")


def _is_bi_tag(tag: str) -> bool:
    return len(tag) > 2 and tag[0] in "BI" and tag[1] == "-"


# ---------------------------------------------------------------------------
# Parsing and writing
# ---------------------------------------------------------------------------


def parse_dataset(
    source: str | Iterable[str],
    options: FormatOptions = DEFAULT_FORMAT,
    name: str = "",
) -> Dataset:
    """Parse blank-line-separated utterance blocks into a Dataset.

    ``source`` may be a whole document string or an iterable of lines.
    Malformed slot tags are kept verbatim; structural problems (ragged token
    lines, missing required intent) raise :class:`ParseError` with a line
    number.
    """
    if isinstance(source, str):
        lines = source.split("\n")
        # A trailing newline yields one final empty chunk, not an empty line.
        if lines and lines[-1] == "":
            lines.pop()
    else:
        lines = [line.rstrip("\n") for line in source]

    utterances: list[Utterance] = []
    block_lines: list[tuple[int, str]] = []

    def flush() -> None:
        if not block_lines:
            return
        utterances.append(_parse_block(block_lines, options, default_id=str(len(utterances))))
        block_lines.clear()

    for lineno, line in enumerate(lines, start=1):
        if line.strip() == "":
            flush()
        else:
            block_lines.append((lineno, line))
    flush()

    try:
        return Dataset(name=name, utterances=tuple(utterances))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _parse_block(
    block: list[tuple[int, str]],
    options: FormatOptions,
    default_id: str,
) -> Utterance:
    comments: dict[str, str] = {}
    tokens: list[str] = []
    tags: list[str] = []
    needed = max(options.token_col, options.tag_col) + 1
    first_lineno = block[0][0]

    for lineno, line in block:
        if line.startswith(_COMMENT_PREFIX):
            key, sep, value = line[len(_COMMENT_PREFIX) :].partition(":")
            if sep and key.strip() in _KNOWN_COMMENT_KEYS:
                comments[key.strip()] = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) < needed:
            raise ParseError(
                f"line {lineno}: expected at least {needed} tab-separated columns, "
                f"got {len(cols)}: {line!r}"
            )
        tokens.append(cols[options.token_col])
        tags.append(cols[options.tag_col])

    intent = comments.get("intent")
    if intent is None:
        if options.require_intent:
            raise ParseError(f"block at line {first_lineno}: missing '# intent:' comment")
        intent = ""

    try:
        return Utterance(
            id=comments.get("id", default_id),
            tokens=tuple(tokens),
            slot_tags=tuple(tags),
            intent=intent,
            variety=comments.get("variety", options.variety),
            raw_text=comments.get("text"),
        )
    except ValueError as exc:
        raise ParseError(f"block at line {first_lineno}: {exc}") from exc


def write_dataset(dataset: Dataset, options: FormatOptions = DEFAULT_FORMAT) -> str:
    """Serialize a Dataset to the block format ``parse_dataset`` reads.

    ``parse_dataset(write_dataset(d), options)`` reproduces ``d``
    field-for-field (given ``options.variety`` is None, so varieties are
    carried by block comments alone).
    """
    blocks = [_write_block(utt, options) for utt in dataset.utterances]
    if not blocks:
        return ""
    return "\n\n".join(blocks) + "\n"


def _write_block(utt: Utterance, options: FormatOptions) -> str:
    lines = [f"# id: {utt.id}"]
    if utt.raw_text is not None:
        lines.append(f"# text: {utt.raw_text}")
    lines.append(f"# intent: {utt.intent}")
    if utt.variety is not None:
        lines.append(f"# variety: {utt.variety}")
    width = max(options.token_col, options.tag_col) + 1
    for token, tag in zip(utt.tokens, utt.slot_tags):
        cols = ["_"] * width
        cols[options.token_col] = token
        cols[options.tag_col] = tag
        lines.append("\t".join(cols))
    return "\n".join(lines)


def load_dataset(
    path: str | Path,
    options: FormatOptions = DEFAULT_FORMAT,
    name: str | None = None,
) -> Dataset:
    path = Path(path)
    return parse_dataset(
        path.read_text(encoding="utf-8"), options, name=name if name is not None else path.stem
    )


def save_dataset(dataset: Dataset, path: str | Path, options: FormatOptions = DEFAULT_FORMAT) -> None:
    Path(path).write_text(write_dataset(dataset, options), encoding="utf-8")


# ---------------------------------------------------------------------------
# BIO validation and span extraction
# ---------------------------------------------------------------------------


def _scan_tags(
    tags: Sequence[str], utterance_id: str = ""
) -> tuple[list[Span], list[BioViolation]]:
    """Single pass over a tag sequence: lenient spans plus all violations.

    Lenient semantics: a violating I-X opens a new span (as if it were B-X);
    a malformed tag closes any open span and is otherwise treated as O.
    """
    spans: list[Span] = []
    violations: list[BioViolation] = []
    open_start: int | None = None
    open_label: str | None = None

    def close(end: int) -> None:
        nonlocal open_start, open_label
        if open_start is not None:
            assert open_label is not None
            spans.append(Span(open_start, end, open_label))
        open_start, open_label = None, None

    prev_label: str | None = None  # label of preceding B/I tag, None after O/malformed
    for i, tag in enumerate(tags):
        if tag == "O":
            close(i)
            prev_label = None
        elif _is_bi_tag(tag):
            label = tag[2:]
            if tag[0] == "B":
                close(i)
                open_start, open_label = i, label
            else:  # I-
                if prev_label is None:
                    violations.append(
                        BioViolation(utterance_id, i, "I-without-B", f"{tag} not preceded by B/I tag")
                    )
                    close(i)
                    open_start, open_label = i, label
                elif prev_label != label:
                    violations.append(
                        BioViolation(
                            utterance_id, i, "I-label-mismatch",
                            f"{tag} follows a {prev_label!r} span",
                        )
                    )
                    close(i)
                    open_start, open_label = i, label
                # else: continues the open span
            prev_label = label
        else:
            violations.append(
                BioViolation(utterance_id, i, "malformed-tag", f"{tag!r} is not O, B-<label> or I-<label>")
            )
            close(i)
            prev_label = None
    close(len(tags))
    return spans, violations


def validate_bio(utterance: Utterance) -> list[BioViolation]:
    """All BIO violations in an utterance; empty iff tags are well-formed."""
    _, violations = _scan_tags(utterance.slot_tags, utterance.id)
    return violations


def extract_spans(tags: Sequence[str], repair: RepairPolicy = "strict") -> list[Span]:
    """Maximal slot spans per BIO semantics, sorted by start.

    ``repair="strict"`` raises :class:`BioFormatError` citing the first
    violation; ``repair="lenient"`` opens a new span at each violating I-tag
    and skips malformed tags.
    """
    spans, violations = _scan_tags(tags)
    if repair == "strict" and violations:
        raise BioFormatError(violations[0])
    if repair not in ("strict", "lenient"):
        raise ValueError(f"unknown repair policy {repair!r}")
    return spans


def spans_to_tags(spans: Sequence[Span], length: int) -> tuple[str, ...]:
    """Reconstruct a BIO tag sequence from non-overlapping spans."""
    tags = ["O"] * length
    previous_end = -1
    for span in sorted(spans):
        if span.end > length:
            raise ValueError(f"span {span} exceeds sequence length {length}")
        if span.start < previous_end:
            raise ValueError(f"span {span} overlaps its predecessor")
        previous_end = span.end
        tags[span.start] = f"B-{span.label}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{span.label}"
    return tuple(tags)


# ---------------------------------------------------------------------------
# Inventories and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InventoryReport:
    """Label/intent distribution of one dataset."""

    name: str
    utterance_count: int
    intent_counts: dict[str, int]
    slot_label_counts: dict[str, int]  # B/I merged, counted per tag occurrence
    full_tag_counts: dict[str, int]

    @property
    def num_intents(self) -> int:
        return len(self.intent_counts)

    @property
    def num_slot_labels(self) -> int:
        return len(self.slot_label_counts)

    @property
    def num_full_tags(self) -> int:
        return len(self.full_tag_counts)

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "utterances": self.utterance_count,
            "num_intents": self.num_intents,
            "num_slot_labels": self.num_slot_labels,
            "num_full_tags": self.num_full_tags,
            "intents": dict(sorted(self.intent_counts.items())),
            "slot_labels": dict(sorted(self.slot_label_counts.items())),
            "full_tags": dict(sorted(self.full_tag_counts.items())),
        }
        return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=False)

    def to_tsv(self) -> str:
        rows = [("kind", "item", "count")]
        for intent, count in sorted(self.intent_counts.items()):
            rows.append(("intent", intent, str(count)))
        for label, count in sorted(self.slot_label_counts.items()):
            rows.append(("slot_label", label, str(count)))
        for tag, count in sorted(self.full_tag_counts.items()):
            rows.append(("full_tag", tag, str(count)))
        rows.append(("utterances", "", str(self.utterance_count)))
        return "\n".join("\t".join(row) for row in rows) + "\n"


def label_inventory(dataset: Dataset) -> InventoryReport:
    """Count distinct intents, slot labels (B/I merged), and full tags."""
    intents: Counter[str] = Counter()
    slot_labels: Counter[str] = Counter()
    full_tags: Counter[str] = Counter()
    for utt in dataset.utterances:
        intents[utt.intent] += 1
        for tag in utt.slot_tags:
            full_tags[tag] += 1
            if _is_bi_tag(tag):
                slot_labels[tag[2:]] += 1
    return InventoryReport(
        name=dataset.name,
        utterance_count=len(dataset),
        intent_counts=dict(intents),
        slot_label_counts=dict(slot_labels),
        full_tag_counts=dict(full_tags),
    )


@dataclass(frozen=True)
class UnseenReport:
    """Labels present in the evaluation data but absent from training.

    ``unseen_i_tags_with_seen_b`` singles out I-X tags whose slot label X was
    observed in training (via B-X or I-X): exactly the tags a model restricted
    to its training tag set can never produce.
    """

    train_name: str
    eval_name: str
    unseen_intents: dict[str, int]
    unseen_slot_labels: dict[str, int]
    unseen_full_tags: dict[str, int]
    unseen_i_tags_with_seen_b: tuple[str, ...]

    def to_json(self) -> str:
        payload = {
            "train": self.train_name,
            "eval": self.eval_name,
            "unseen_intents": dict(sorted(self.unseen_intents.items())),
            "unseen_slot_labels": dict(sorted(self.unseen_slot_labels.items())),
            "unseen_full_tags": dict(sorted(self.unseen_full_tags.items())),
            "unseen_i_tags_with_seen_b": sorted(self.unseen_i_tags_with_seen_b),
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)

    def to_tsv(self) -> str:
        rows = [("kind", "item", "eval_count")]
        for intent, count in sorted(self.unseen_intents.items()):
            rows.append(("intent", intent, str(count)))
        for label, count in sorted(self.unseen_slot_labels.items()):
            rows.append(("slot_label", label, str(count)))
        for tag, count in sorted(self.unseen_full_tags.items()):
            rows.append(("full_tag", tag, str(count)))
        for tag in sorted(self.unseen_i_tags_with_seen_b):
            rows.append(("i_tag_with_seen_b", tag, str(self.unseen_full_tags[tag])))
        return "\n".join("\t".join(row) for row in rows) + "\n"


def unseen_label_report(train: Dataset, eval: Dataset) -> UnseenReport:
    """Intents, slot labels, and full tags in ``eval`` never seen in ``train``."""
    eval_inv = label_inventory(eval)
    train_intents = train.intents()
    train_labels = train.slot_labels()
    train_tags = train.full_tags()

    unseen_full = {
        tag: count for tag, count in eval_inv.full_tag_counts.items() if tag not in train_tags
    }
    return UnseenReport(
        train_name=train.name,
        eval_name=eval.name,
        unseen_intents={
            intent: count
            for intent, count in eval_inv.intent_counts.items()
            if intent not in train_intents
        },
        unseen_slot_labels={
            label: count
            for label, count in eval_inv.slot_label_counts.items()
            if label not in train_labels
        },
        unseen_full_tags=unseen_full,
        unseen_i_tags_with_seen_b=tuple(
            tag for tag in sorted(unseen_full) if tag.startswith("I-") and tag[2:] in train_labels
        ),
    )


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

SplitStrategy = Literal["uniform", "grouped"]


def split_dataset(
    dataset: Dataset,
    ratio: float,
    seed: int,
    strategy: SplitStrategy = "uniform",
    group_delimiter: str = "-",
) -> tuple[Dataset, Dataset]:
    """Partition a dataset into (round(ratio*N), rest), deterministically.

    ``strategy="grouped"`` keeps all utterances sharing a source-sentence key
    (the id prefix before the first ``group_delimiter``) in the same part, so
    translations of one sentence never straddle the split. Whole groups are
    packed first-fit, in seeded random order, up to the target size.

    Both parts preserve the original utterance order.
    """
    if not dataset.utterances:
        raise SplitError("cannot split an empty dataset")
    if not 0.0 < ratio < 1.0:
        raise SplitError(f"ratio must be in (0, 1), got {ratio}")

    n = len(dataset)
    target = round_half_up(ratio * n)
    rng = SplitMix64(derive_seed(seed, b"split"))

    if strategy == "uniform":
        indices = list(range(n))
        rng.shuffle(indices)
        first = set(indices[:target])
    elif strategy == "grouped":
        groups: dict[str, list[int]] = {}
        for i, utt in enumerate(dataset.utterances):
            key, sep, _ = utt.id.partition(group_delimiter)
            if not sep:
                raise SplitError(
                    f"utterance id {utt.id!r} has no group key "
                    f"(missing delimiter {group_delimiter!r})"
                )
            groups.setdefault(key, []).append(i)
        keys = list(groups)
        rng.shuffle(keys)
        first = set()
        for key in keys:
            members = groups[key]
            if len(first) + len(members) <= target:
                first.update(members)
    else:
        raise SplitError(f"unknown split strategy {strategy!r}")

    part1 = tuple(utt for i, utt in enumerate(dataset.utterances) if i in first)
    part2 = tuple(utt for i, utt in enumerate(dataset.utterances) if i not in first)
    return (
        Dataset(name=f"{dataset.name}-part1", utterances=part1),
        Dataset(name=f"{dataset.name}-part2", utterances=part2),
    )
