"""Seeded character-level noise over a dataset's tokens.

Per utterance, a fixed fraction of the purely alphabetic words is selected
(words containing digits, punctuation or other symbols are never touched) and
each selected word receives exactly one edit: a character deletion, an
insertion drawn from a reference alphabet, or both at the same index (a
substitution). Slot tags, intents, ids, and the token count are left intact,
so alignment with the annotation never breaks.

Randomness is keyed per utterance (run seed mixed with a hash of the
utterance id), which makes outputs reproducible, independent of corpus order,
and safe to compute in parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from .corpus import Dataset, Utterance
from .rng import SplitMix64, derive_seed, round_half_up


class NoiseError(Exception):
    """Raised when a noise operation cannot be applied as configured."""


NoiseOp = Literal["delete", "insert", "both"]
_OPS: tuple[NoiseOp, ...] = ("delete", "insert", "both")


@dataclass(frozen=True)
class Alphabet:
    """Insertion inventory: the distinct letters of a reference text."""

    chars: tuple[str, ...]

    def __post_init__(self) -> None:
        for ch in self.chars:
            if len(ch) != 1 or not ch.isalpha():
                raise ValueError(f"alphabet entries must be single letters, got {ch!r}")
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("alphabet contains duplicate characters")

    def __len__(self) -> int:
        return len(self.chars)


def build_alphabet(reference: str) -> Alphabet:
    """Distinct letter-category characters of a text, case preserved.

    Characters are sorted by code point so the alphabet does not depend on
    the order in which the reference text presents them.
    """
    return Alphabet(chars=tuple(sorted({ch for ch in reference if ch.isalpha()})))


def load_alphabet(path: str | Path) -> Alphabet:
    return build_alphabet(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class OpWeights:
    """Relative draw weights for the three edit operations."""

    delete: float = 1.0
    insert: float = 1.0
    both: float = 1.0

    def __post_init__(self) -> None:
        values = (self.delete, self.insert, self.both)
        if any(w < 0 for w in values):
            raise ValueError("operation weights must be non-negative")
        if sum(values) == 0:
            raise ValueError("operation weights must not all be zero")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.delete, self.insert, self.both)


@dataclass(frozen=True)
class NoiseConfig:
    word_fraction: float
    alphabet: Alphabet
    op_weights: OpWeights = OpWeights()
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.word_fraction <= 1.0:
            raise ValueError(f"word_fraction must be in [0, 1], got {self.word_fraction}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "word_fraction": self.word_fraction,
                "alphabet": "".join(self.alphabet.chars),
                "op_weights": {
                    "delete": self.op_weights.delete,
                    "insert": self.op_weights.insert,
                    "both": self.op_weights.both,
                },
                "seed": self.seed,
            },
            ensure_ascii=False,
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "NoiseConfig":
        raw = json.loads(text)
        unknown = set(raw) - {"word_fraction", "alphabet", "op_weights", "seed"}
        if unknown:
            raise ValueError(f"unknown noise config keys: {sorted(unknown)}")
        weights = raw.get("op_weights", {})
        return cls(
            word_fraction=raw["word_fraction"],
            alphabet=Alphabet(chars=tuple(raw["alphabet"])),
            op_weights=OpWeights(
                delete=weights.get("delete", 1.0),
                insert=weights.get("insert", 1.0),
                both=weights.get("both", 1.0),
            ),
            seed=raw.get("seed", 0),
        )


def noise_word(word: str, op: NoiseOp, position: int, insert_char: str | None = None) -> str:
    """Deterministic edit kernel.

    delete removes the character at ``position``; insert places
    ``insert_char`` before ``position``; both does a delete followed by an
    insert at the same index, i.e. a substitution.
    """
    if not word:
        raise NoiseError("cannot noise an empty word")
    if op in ("delete", "both") and len(word) == 1:
        raise NoiseError(f"op {op!r} on a length-1 word would break token alignment")
    if op == "delete":
        if not 0 <= position < len(word):
            raise NoiseError(f"delete position {position} out of range for {word!r}")
        return word[:position] + word[position + 1 :]
    if op == "insert":
        if not 0 <= position <= len(word):
            raise NoiseError(f"insert position {position} out of range for {word!r}")
        if insert_char is None:
            raise NoiseError("insert requires insert_char")
        return word[:position] + insert_char + word[position:]
    if op == "both":
        if not 0 <= position < len(word):
            raise NoiseError(f"substitution position {position} out of range for {word!r}")
        if insert_char is None:
            raise NoiseError("both requires insert_char")
        return word[:position] + insert_char + word[position + 1 :]
    raise NoiseError(f"unknown op {op!r}")


def _noise_token(word: str, rng: SplitMix64, cfg: NoiseConfig) -> str:
    # Draw order is part of the output contract: op, then position, then char.
    if len(word) == 1:
        op: NoiseOp = "insert"  # deletion would empty the token
    else:
        op = rng.weighted_choice(_OPS, cfg.op_weights.as_tuple())

    if op == "delete":
        return noise_word(word, "delete", rng.next_below(len(word)))
    if op == "insert":
        if not cfg.alphabet.chars:
            raise NoiseError("insertion drawn but the alphabet is empty")
        position = rng.next_below(len(word) + 1)
        return noise_word(word, "insert", position, rng.choice(cfg.alphabet.chars))
    position = rng.next_below(len(word))
    # A substitution must change the word, or the per-sentence edit count
    # would silently drop below the configured fraction.
    candidates = tuple(ch for ch in cfg.alphabet.chars if ch != word[position])
    if not candidates:
        raise NoiseError(
            "substitution drawn but the alphabet offers no character different "
            f"from {word[position]!r}"
        )
    return noise_word(word, "both", position, rng.choice(candidates))


def noise_utterance(utterance: Utterance, cfg: NoiseConfig) -> Utterance:
    """Apply seeded noise to one utterance's alphabetic tokens."""
    rng = SplitMix64(derive_seed(cfg.seed, utterance.id.encode("utf-8")))
    alpha_positions = [i for i, tok in enumerate(utterance.tokens) if tok.isalpha()]
    n_select = round_half_up(cfg.word_fraction * len(alpha_positions))
    if n_select == 0:
        return utterance
    selected = sorted(rng.sample(alpha_positions, n_select))
    tokens = list(utterance.tokens)
    for i in selected:
        tokens[i] = _noise_token(tokens[i], rng, cfg)
    return Utterance(
        id=utterance.id,
        tokens=tuple(tokens),
        slot_tags=utterance.slot_tags,
        intent=utterance.intent,
        variety=utterance.variety,
        raw_text=utterance.raw_text,
    )


def noise_dataset(dataset: Dataset, cfg: NoiseConfig) -> Dataset:
    """Noised copy of a dataset; fully determined by (dataset, cfg)."""
    return Dataset(
        name=dataset.name,
        utterances=tuple(noise_utterance(utt, cfg) for utt in dataset.utterances),
    )
