"""Byte-pair-encoding tokenizer with the CLIP vocabulary contract.

A prompt is lowercased, whitespace-collapsed, split into pattern words
(contractions, letter runs, single digits, punctuation runs), mapped to a
byte-level symbol alphabet, and merged greedily by merge rank. Output
sequences are fixed-length: begin marker, content tokens (truncated to fit),
end marker, then padding.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import BinaryIO

END_OF_WORD = "</w>"
BEGIN_TOKEN = "<|startoftext|>"
END_TOKEN = "<|endoftext|>"
PAD_TOKEN = "<|pad|>"
DEFAULT_MAX_LENGTH = 77

_CONTRACTIONS = ("'s", "'t", "'re", "'ve", "'m", "'ll", "'d")


class VocabularyError(ValueError):
    """Raised for malformed vocabulary or merge listings."""


class TokenizerError(ValueError):
    """Raised for ids or symbols that cannot be resolved against a vocabulary."""


@lru_cache(maxsize=1)
def byte_alphabet() -> dict[int, str]:
    """Map every byte value to a printable unicode character.

    Printable bytes map to themselves; the rest are remapped to code points
    starting at 256 so that BPE symbols never contain control characters or
    whitespace.
    """
    keep = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    mapping = {b: chr(b) for b in keep}
    n = 0
    for b in range(256):
        if b not in mapping:
            mapping[b] = chr(256 + n)
            n += 1
    return mapping


@lru_cache(maxsize=1)
def _alphabet_inverse() -> dict[str, int]:
    return {c: b for b, c in byte_alphabet().items()}


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token table plus ordered merge rules."""

    token_to_id: dict[str, int]
    merges: dict[tuple[str, str], int]
    begin_id: int
    end_id: int
    pad_id: int
    max_length: int = DEFAULT_MAX_LENGTH
    id_to_token: dict[int, str] = field(init=False, repr=False)
    _bpe_cache: dict[str, tuple[str, ...]] = field(
        init=False, repr=False, default_factory=dict
    )

    def __post_init__(self):
        if self.max_length < 2:
            raise VocabularyError(f"max_length must be >= 2, got {self.max_length}")
        if self.begin_id == self.end_id:
            raise VocabularyError("begin and end markers must have distinct ids")
        inverse: dict[int, str] = {}
        for token, tid in self.token_to_id.items():
            if tid in inverse:
                raise VocabularyError(
                    f"ids are not unique: {inverse[tid]!r} and {token!r} share id {tid}"
                )
            inverse[tid] = token
        object.__setattr__(self, "id_to_token", inverse)

    def __len__(self) -> int:
        return len(self.token_to_id)


@dataclass(frozen=True)
class TokenSequence:
    """Fixed-length id sequence with per-content-token source spans."""

    ids: tuple[int, ...]
    text_spans: tuple[tuple[int, int], ...]

    def content_slice(self, vocab: Vocabulary) -> tuple[int, ...]:
        """Ids strictly between the begin and end markers."""
        end = self.ids.index(vocab.end_id)
        return self.ids[1:end]


def _parse_vocab_json(vocab_source: BinaryIO | bytes) -> dict[str, int]:
    raw = vocab_source if isinstance(vocab_source, bytes) else vocab_source.read()

    def reject_duplicates(pairs):
        table: dict[str, int] = {}
        for token, tid in pairs:
            if token in table:
                raise VocabularyError(f"duplicate token {token!r} in vocabulary")
            if not isinstance(tid, int) or isinstance(tid, bool):
                raise VocabularyError(f"id for token {token!r} is not an integer")
            table[token] = tid
        return table

    try:
        table = json.loads(raw.decode("utf-8"), object_pairs_hook=reject_duplicates)
    except json.JSONDecodeError as exc:
        raise VocabularyError(f"vocabulary line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(table, dict):
        raise VocabularyError("vocabulary must be a JSON object of token -> id")
    return table


def _parse_merges(merges_source: BinaryIO | bytes) -> list[tuple[str, str]]:
    raw = merges_source if isinstance(merges_source, bytes) else merges_source.read()
    merges: list[tuple[str, str]] = []
    lines = raw.decode("utf-8").split("\n")
    for lineno, line in enumerate(lines, start=1):
        if lineno == 1 and line.startswith("#"):
            continue
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise VocabularyError(
                f"merges line {lineno}: expected two space-separated symbols, got {line!r}"
            )
        merges.append((parts[0], parts[1]))
    return merges


def load_vocabulary(
    vocab_source: BinaryIO | bytes,
    merges_source: BinaryIO | bytes,
    max_length: int = DEFAULT_MAX_LENGTH,
) -> Vocabulary:
    """Load a token table and merge rules from their byte-stream listings.

    The begin/end markers must be present as tokens; the pad id is the
    dedicated pad token's id when one exists, otherwise 0.
    """
    table = _parse_vocab_json(vocab_source)
    merge_list = _parse_merges(merges_source)

    alphabet = set(byte_alphabet().values())
    constructible = alphabet | {c + END_OF_WORD for c in alphabet}
    for index, (left, right) in enumerate(merge_list):
        lineno = index + 2  # line 1 is the comment header
        for symbol in (left, right):
            if symbol not in constructible:
                raise VocabularyError(
                    f"merges line {lineno}: symbol {symbol!r} is not constructible "
                    "from the byte alphabet and earlier merges"
                )
        merged = left + right
        if merged not in table:
            raise VocabularyError(
                f"merges line {lineno}: merge result {merged!r} missing from vocabulary"
            )
        constructible.add(merged)

    for marker in (BEGIN_TOKEN, END_TOKEN):
        if marker not in table:
            raise VocabularyError(f"vocabulary is missing the {marker!r} marker")

    return Vocabulary(
        token_to_id=table,
        merges={pair: rank for rank, pair in enumerate(merge_list)},
        begin_id=table[BEGIN_TOKEN],
        end_id=table[END_TOKEN],
        pad_id=table.get(PAD_TOKEN, 0),
        max_length=max_length,
    )


def load_default_vocabulary(max_length: int = DEFAULT_MAX_LENGTH) -> Vocabulary:
    """Load the vocabulary shipped with the package."""
    data = resources.files("difftrace.data")
    return load_vocabulary(
        (data / "vocab.json").read_bytes(),
        (data / "merges.txt").read_bytes(),
        max_length=max_length,
    )


def _is_letter(ch: str) -> bool:
    return unicodedata.category(ch).startswith("L")


def _is_number(ch: str) -> bool:
    return unicodedata.category(ch).startswith("N")


def _scan_words(chunk: str) -> list[tuple[int, int]]:
    """Split a whitespace-free chunk into pattern words.

    Returns (start, end) character offsets. Alternatives are tried in order at
    each position: apostrophe contraction, letter run, single digit, then a
    run of any other characters.
    """
    words: list[tuple[int, int]] = []
    i = 0
    n = len(chunk)
    while i < n:
        ch = chunk[i]
        if ch == "'":
            matched = False
            for suffix in _CONTRACTIONS:
                if chunk.startswith(suffix[1:], i + 1):
                    words.append((i, i + len(suffix)))
                    i += len(suffix)
                    matched = True
                    break
            if matched:
                continue
        if _is_letter(ch):
            j = i + 1
            while j < n and _is_letter(chunk[j]):
                j += 1
            words.append((i, j))
            i = j
        elif _is_number(ch):
            words.append((i, i + 1))
            i += 1
        else:
            j = i + 1
            while j < n and not (_is_letter(chunk[j]) or _is_number(chunk[j])):
                j += 1
            words.append((i, j))
            i = j
    return words


def _bpe(word: str, vocab: Vocabulary) -> tuple[str, ...]:
    """Apply merges in rank order to one pattern word (already in the byte
    symbol alphabet); the final symbol carries the end-of-word marker."""
    cached = vocab._bpe_cache.get(word)
    if cached is not None:
        return cached

    symbols = tuple(word[:-1]) + (word[-1] + END_OF_WORD,)
    while len(symbols) > 1:
        pairs = {(symbols[k], symbols[k + 1]) for k in range(len(symbols) - 1)}
        best = min(pairs, key=lambda p: vocab.merges.get(p, float("inf")))
        if best not in vocab.merges:
            break
        first, second = best
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
        symbols = tuple(merged)

    vocab._bpe_cache[word] = symbols
    return symbols


def tokenize(prompt: str, vocab: Vocabulary) -> TokenSequence:
    """Tokenize a prompt into a fixed-length id sequence.

    Normalization (lowercase, whitespace runs collapsed, outer whitespace
    stripped) happens before the pattern split; merges then apply in rank
    order until no mergeable pair remains. Inputs longer than the sequence
    budget keep their first ``max_length - 2`` content tokens.
    """
    alphabet = byte_alphabet()

    # Whitespace-free chunks of the lowercased prompt, with each chunk
    # character tagged by the source character index it came from.
    chunks: list[tuple[str, list[int]]] = []
    chars: list[str] = []
    origins: list[int] = []
    for si, ch in enumerate(prompt):
        if ch.isspace():
            if chars:
                chunks.append(("".join(chars), origins))
                chars, origins = [], []
            continue
        for lowered in ch.lower():
            chars.append(lowered)
            origins.append(si)
    if chars:
        chunks.append(("".join(chars), origins))

    content_ids: list[int] = []
    spans: list[tuple[int, int]] = []
    budget = vocab.max_length - 2
    for chunk, origin in chunks:
        if len(content_ids) >= budget:
            break
        for start, end in _scan_words(chunk):
            if len(content_ids) >= budget:
                break
            word = chunk[start:end]
            encoded = word.encode("utf-8")
            symbol_word = "".join(alphabet[b] for b in encoded)
            # Chunk character index owning each byte of the encoded word.
            byte_to_char: list[int] = []
            for ci in range(start, end):
                byte_to_char.extend([ci] * len(chunk[ci].encode("utf-8")))

            offset = 0
            for symbol in _bpe(symbol_word, vocab):
                if len(content_ids) >= budget:
                    break
                plain = symbol[: -len(END_OF_WORD)] if symbol.endswith(END_OF_WORD) else symbol
                token_id = vocab.token_to_id.get(symbol)
                if token_id is None:
                    raise TokenizerError(
                        f"symbol {symbol!r} is not in the vocabulary; the byte "
                        "alphabet is not fully covered"
                    )
                first_char = byte_to_char[offset]
                last_char = byte_to_char[offset + len(plain) - 1]
                content_ids.append(token_id)
                spans.append((origin[first_char], origin[last_char] + 1))
                offset += len(plain)

    ids = (
        [vocab.begin_id]
        + content_ids
        + [vocab.end_id]
        + [vocab.pad_id] * (budget - len(content_ids))
    )
    return TokenSequence(ids=tuple(ids), text_spans=tuple(spans))


def token_strings(seq: TokenSequence, vocab: Vocabulary) -> list[str]:
    """Vocabulary strings for each id, up to and including the end marker."""
    out: list[str] = []
    for tid in seq.ids:
        token = vocab.id_to_token.get(tid)
        if token is None:
            raise TokenizerError(f"id {tid} is not in the vocabulary")
        out.append(token)
        if tid == vocab.end_id and len(out) > 1:
            break
    return out


def detokenize(seq: TokenSequence, vocab: Vocabulary) -> str:
    """Reassemble the prompt text covered by a token sequence.

    Inverse of the byte-symbol mapping with end-of-word markers becoming
    spaces; round-trips exactly on sequences produced by ``tokenize``.
    """
    inverse = _alphabet_inverse()
    pieces: list[str] = []
    # The pad id may collide with a real byte-symbol token, but pads only
    # occur after the end marker, so scanning stops before reaching them.
    for position, tid in enumerate(seq.ids):
        token = vocab.id_to_token.get(tid)
        if token is None:
            raise TokenizerError(f"id {tid} is not in the vocabulary")
        if position == 0 and tid == vocab.begin_id:
            continue
        if tid == vocab.end_id:
            break
        pieces.append(token)
    symbols = "".join(pieces)
    data = bytes(inverse[c] for c in symbols if c in inverse)
    return data.decode("utf-8", errors="replace").replace(END_OF_WORD, " ").strip()
