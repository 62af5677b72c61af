#!/usr/bin/env python3
"""Learn the default BPE vocabulary shipped in difftrace/data.

Reads tools/corpus.txt, learns merge rules by greedy pair-frequency counting
over the same pattern words the tokenizer produces, and writes vocab.json +
merges.txt in the standard layout: byte alphabet, byte alphabet with the
end-of-word marker, merge results in rank order, then the begin/end markers.

Run from the repository root:  python3 tools/build_default_vocab.py
"""

from __future__ import annotations

import json
import sys
from collections import Counter
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from difftrace.tokenizer import (  # noqa: E402
    BEGIN_TOKEN,
    END_OF_WORD,
    END_TOKEN,
    _scan_words,
    byte_alphabet,
)

MAX_MERGES = 1600
MIN_PAIR_COUNT = 2


def pattern_words(text: str) -> list[str]:
    words: list[str] = []
    for chunk in text.lower().split():
        for start, end in _scan_words(chunk):
            words.append(chunk[start:end])
    return words


def learn_merges(word_counts: Counter) -> list[tuple[str, str]]:
    alphabet = byte_alphabet()
    symbolized = {}
    for word, count in word_counts.items():
        symbols = tuple(alphabet[b] for b in word.encode("utf-8"))
        symbols = symbols[:-1] + (symbols[-1] + END_OF_WORD,)
        symbolized[symbols] = symbolized.get(symbols, 0) + count

    merges: list[tuple[str, str]] = []
    while len(merges) < MAX_MERGES:
        pair_counts: Counter = Counter()
        for symbols, count in symbolized.items():
            for k in range(len(symbols) - 1):
                pair_counts[(symbols[k], symbols[k + 1])] += count
        if not pair_counts:
            break
        # Highest count wins; ties broken lexicographically for determinism.
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if best[1] < MIN_PAIR_COUNT:
            break
        first, second = best[0]
        merges.append((first, second))

        updated = {}
        for symbols, count in symbolized.items():
            merged: list[str] = []
            k = 0
            while k < len(symbols):
                if (
                    k < len(symbols) - 1
                    and symbols[k] == first
                    and symbols[k + 1] == second
                ):
                    merged.append(first + second)
                    k += 2
                else:
                    merged.append(symbols[k])
                    k += 1
            key = tuple(merged)
            updated[key] = updated.get(key, 0) + count
        symbolized = updated
    return merges


def main() -> None:
    corpus = (ROOT / "tools" / "corpus.txt").read_text(encoding="utf-8")
    counts = Counter(pattern_words(corpus))
    merges = learn_merges(counts)

    alphabet_symbols = list(byte_alphabet().values())
    tokens = (
        alphabet_symbols
        + [c + END_OF_WORD for c in alphabet_symbols]
        + ["".join(pair) for pair in merges]
        + [BEGIN_TOKEN, END_TOKEN]
    )
    vocab = {token: i for i, token in enumerate(tokens)}
    if len(vocab) != len(tokens):
        raise SystemExit("merge results collide; reduce MAX_MERGES or fix corpus")

    out = ROOT / "src" / "difftrace" / "data"
    out.mkdir(parents=True, exist_ok=True)
    (out / "vocab.json").write_text(
        json.dumps(vocab, ensure_ascii=True, indent=0), encoding="utf-8"
    )
    lines = ["# default difftrace merges, one pair per line, rank = line order"]
    lines += [f"{a} {b}" for a, b in merges]
    (out / "merges.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(vocab)} tokens, {len(merges)} merges")


if __name__ == "__main__":
    main()
