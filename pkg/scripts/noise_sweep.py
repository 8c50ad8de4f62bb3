#!/usr/bin/env python3
"""Sweep noise levels over a synthetic corpus and measure their footprint.

For each word fraction the script reports the realized modified-word rate
(which should sit on the configured fraction) and the split-word-ratio
difference against the clean corpus under a toy subword vocabulary. The
per-level rows are written as a TSV that `sidkit correlate` can consume, e.g.

    python scripts/noise_sweep.py --out-dir /tmp/sweep
    sidkit correlate --in /tmp/sweep/sweep.tsv --x fraction --y ratio_difference
"""

from __future__ import annotations

import argparse
import random
from pathlib import Path

from sidkit.corpus import Dataset, Utterance, save_dataset
from sidkit.noise import NoiseConfig, build_alphabet, noise_dataset
from sidkit.subword import SubwordVocab, split_word_ratio

LETTERS = "abcdefghijklmnopqrstuvwxyzæøå"


def synthetic_corpus(n_sentences: int, seed: int) -> Dataset:
    rng = random.Random(seed)
    utterances = []
    for i in range(n_sentences):
        tokens = [
            "".join(rng.choice(LETTERS) for _ in range(rng.randint(2, 9)))
            for _ in range(rng.randint(8, 12))
        ]
        tags = ["O"] * len(tokens)
        tags[rng.randrange(len(tags))] = "B-datetime"
        utterances.append(
            Utterance(id=str(i), tokens=tuple(tokens), slot_tags=tuple(tags),
                      intent="reminder/set_reminder")
        )
    return Dataset(name="synthetic", utterances=tuple(utterances))


def toy_vocab(corpus: Dataset, max_words: int = 400) -> SubwordVocab:
    """Whole-word vocabulary over the clean corpus plus single-letter pieces."""
    words = {tok for utt in corpus.utterances for tok in utt.tokens}
    pieces = set(list(words)[:max_words])
    pieces |= set(LETTERS)
    pieces |= {"##" + ch for ch in LETTERS}
    pieces.add("[UNK]")
    return SubwordVocab(tokens=frozenset(pieces))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sentences", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--fractions", default="0.0,0.1,0.2,0.3")
    parser.add_argument("--out-dir", default="noise_sweep_out")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    corpus = synthetic_corpus(args.sentences, args.seed)
    save_dataset(corpus, out_dir / "clean.conll")
    alphabet = build_alphabet(LETTERS)
    vocab = toy_vocab(corpus)
    clean_ratio = split_word_ratio(vocab, corpus)

    rows = ["fraction\tmodified_rate\tsplit_word_ratio\tratio_difference"]
    print(f"clean split-word ratio: {clean_ratio:.4f}")
    for spec in args.fractions.split(","):
        fraction = float(spec)
        cfg = NoiseConfig(word_fraction=fraction, alphabet=alphabet, seed=args.seed)
        noised = noise_dataset(corpus, cfg)
        save_dataset(noised, out_dir / f"noised_{int(fraction * 100):02d}.conll")

        total = modified = 0
        for before, after in zip(corpus.utterances, noised.utterances):
            for x, y in zip(before.tokens, after.tokens):
                if x.isalpha():
                    total += 1
                    modified += x != y
        ratio = split_word_ratio(vocab, noised)
        diff = abs(ratio - clean_ratio)
        rows.append(f"{fraction}\t{modified / total:.4f}\t{ratio:.4f}\t{diff:.4f}")
        print(
            f"fraction={fraction:.1f}  modified={modified / total:.4f}  "
            f"split_ratio={ratio:.4f}  diff_vs_clean={diff:.4f}"
        )

    (out_dir / "sweep.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"wrote {out_dir / 'sweep.tsv'}")


if __name__ == "__main__":
    main()
