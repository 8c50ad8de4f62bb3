"""Subword split-ratio statistics under a plain vocabulary file.

Words are segmented by greedy longest-match-first lookup (WordPiece-style):
the longest vocabulary prefix is taken, then matching continues on the rest
with the continuation marker prepended to each candidate piece. A word with
no segmentation at some position collapses to the unknown token.

The split-word ratio of a corpus is the fraction of words that either
tokenize into more than one piece or cannot be segmented at all. Differences
in this ratio between training and evaluation corpora are the quantity fed
into the correlation analysis.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .corpus import Dataset


class SubwordError(Exception):
    pass


@dataclass(frozen=True)
class SubwordVocab:
    tokens: frozenset[str]
    continuation_marker: str = "##"
    unk_token: str = "[UNK]"

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", frozenset(self.tokens))
        if not self.tokens:
            raise ValueError("vocabulary must not be empty")
        if self.unk_token not in self.tokens:
            raise ValueError(f"unk token {self.unk_token!r} missing from vocabulary")

    @classmethod
    def from_file(
        cls,
        path: str | Path,
        continuation_marker: str = "##",
        unk_token: str = "[UNK]",
    ) -> "SubwordVocab":
        """One subword per line, UTF-8; blank lines ignored."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(
            tokens=frozenset(line for line in lines if line.strip()),
            continuation_marker=continuation_marker,
            unk_token=unk_token,
        )


def tokenize_word(vocab: SubwordVocab, word: str) -> list[str]:
    """Greedy longest-match segmentation; [unk] when no segmentation exists."""
    if not word:
        raise SubwordError("cannot tokenize an empty word")
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        found = None
        while start < end:
            candidate = word[start:end]
            if start > 0:
                candidate = vocab.continuation_marker + candidate
            if candidate in vocab.tokens:
                found = candidate
                break
            end -= 1
        if found is None:
            return [vocab.unk_token]
        pieces.append(found)
        start = end
    return pieces


Corpus = Union[Dataset, Iterable[str], str]


def _iter_words(corpus: Corpus, letters_only: bool) -> Iterable[str]:
    if isinstance(corpus, Dataset):
        words: Iterable[str] = (tok for utt in corpus.utterances for tok in utt.tokens)
    elif isinstance(corpus, str):
        words = corpus.split()
    else:
        words = corpus
    if letters_only:
        words = (w for w in words if w.isalpha())
    return words


def split_word_ratio(vocab: SubwordVocab, corpus: Corpus, letters_only: bool = False) -> float:
    """Fraction of words split into multiple pieces or unsegmentable.

    Computed over word tokens (every occurrence counts), not types.
    """
    total = 0
    split = 0
    unk = [vocab.unk_token]
    for word in _iter_words(corpus, letters_only):
        total += 1
        pieces = tokenize_word(vocab, word)
        if len(pieces) > 1 or pieces == unk:
            split += 1
    if total == 0:
        raise SubwordError("corpus contains no words")
    return split / total


def ratio_difference(
    vocab: SubwordVocab, train: Corpus, eval: Corpus, letters_only: bool = False
) -> float:
    """Absolute split-ratio gap between two corpora (symmetric)."""
    return abs(
        split_word_ratio(vocab, train, letters_only)
        - split_word_ratio(vocab, eval, letters_only)
    )
