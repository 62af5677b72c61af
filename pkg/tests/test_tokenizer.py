from __future__ import annotations

import json
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from difftrace.tokenizer import (
    BEGIN_TOKEN,
    END_TOKEN,
    PAD_TOKEN,
    TokenizerError,
    TokenSequence,
    Vocabulary,
    VocabularyError,
    byte_alphabet,
    detokenize,
    load_default_vocabulary,
    load_vocabulary,
    token_strings,
    tokenize,
)

from reference_impls import reference_token_sequence


def _minimal_sources(extra: dict[str, int] | None = None) -> tuple[bytes, bytes]:
    table = {BEGIN_TOKEN: 0, END_TOKEN: 1, PAD_TOKEN: 2, "a": 3}
    table.update(extra or {})
    return json.dumps(table).encode(), b"# header\n"


def test_minimal_vocabulary_loads():
    vocab_bytes, merges_bytes = _minimal_sources()
    vocab = load_vocabulary(vocab_bytes, merges_bytes)
    assert len(vocab) == 4
    assert vocab.begin_id == 0 and vocab.end_id == 1 and vocab.pad_id == 2


def test_official_vocabulary_files_when_available():
    # the published files are not shipped in this environment; point
    # DIFFTRACE_OFFICIAL_VOCAB / DIFFTRACE_OFFICIAL_MERGES at them to run
    import os

    vocab_path = os.environ.get("DIFFTRACE_OFFICIAL_VOCAB")
    merges_path = os.environ.get("DIFFTRACE_OFFICIAL_MERGES")
    if not (vocab_path and merges_path):
        pytest.skip("official vocabulary files not available in this environment")
    with open(vocab_path, "rb") as vf, open(merges_path, "rb") as mf:
        vocab = load_vocabulary(vf.read(), mf.read())
    assert len(vocab) == 49408


def test_default_vocabulary_counts(default_vocab):
    # byte alphabet twice, learned merges, two markers
    merges = len(default_vocab.merges)
    assert len(default_vocab) == 512 + merges + 2
    assert default_vocab.begin_id != default_vocab.end_id
    assert default_vocab.max_length == 77


def test_duplicate_token_rejected():
    raw = b'{"<|startoftext|>": 0, "<|endoftext|>": 1, "a": 2, "a": 3}'
    with pytest.raises(VocabularyError, match="duplicate token 'a'"):
        load_vocabulary(raw, b"#\n")


def test_duplicate_id_rejected():
    raw = json.dumps({BEGIN_TOKEN: 0, END_TOKEN: 1, "a": 1}).encode()
    with pytest.raises(VocabularyError, match="not unique"):
        load_vocabulary(raw, b"#\n")


def test_malformed_merge_line_reports_line_number():
    vocab_bytes, _ = _minimal_sources()
    with pytest.raises(VocabularyError, match="line 3"):
        load_vocabulary(vocab_bytes, b"# header\na b\nno-second-symbol\n")


def test_unresolvable_merge_symbol_reports_line_number():
    vocab_bytes, _ = _minimal_sources({"qz": 4})
    # "qq" is not a byte-alphabet symbol nor an earlier merge result
    with pytest.raises(VocabularyError, match="line 3.*not constructible"):
        load_vocabulary(vocab_bytes, b"# header\nq z\nqq z\n")


def test_merge_result_must_be_in_vocabulary():
    vocab_bytes, _ = _minimal_sources()
    with pytest.raises(VocabularyError, match="missing from vocabulary"):
        load_vocabulary(vocab_bytes, b"# header\nq z\n")


def test_begin_equals_end_rejected():
    raw = json.dumps({BEGIN_TOKEN: 0, END_TOKEN: 0}).encode()
    with pytest.raises(VocabularyError):
        load_vocabulary(raw, b"#\n")


def test_max_length_floor():
    vocab_bytes, merges_bytes = _minimal_sources()
    with pytest.raises(VocabularyError, match="max_length"):
        load_vocabulary(vocab_bytes, merges_bytes, max_length=1)


def test_byte_alphabet_is_a_bijection():
    table = byte_alphabet()
    assert sorted(table) == list(range(256))
    assert len(set(table.values())) == 256


def test_empty_prompt(default_vocab):
    seq = tokenize("", default_vocab)
    assert seq.ids[0] == default_vocab.begin_id
    assert seq.ids[1] == default_vocab.end_id
    assert all(t == default_vocab.pad_id for t in seq.ids[2:])
    assert len(seq.ids) == 77
    assert seq.text_spans == ()


def test_truncation_contract(default_vocab):
    prompt = " ".join(f"word{i}" for i in range(200))
    seq = tokenize(prompt, default_vocab)
    assert len(seq.ids) == 77
    assert seq.ids[-1] == default_vocab.end_id
    assert len(seq.content_slice(default_vocab)) == 75


def test_determinism(default_vocab, prompt_corpus):
    for prompt in prompt_corpus[:20]:
        assert tokenize(prompt, default_vocab) == tokenize(prompt, default_vocab)


def test_prefix_stability(default_vocab):
    base = "a cute and adorable bunny"
    extended = base + " trending on artstation"
    a = tokenize(base, default_vocab)
    b = tokenize(extended, default_vocab)
    n = len(a.content_slice(default_vocab))
    assert a.ids[1 : 1 + n] == b.ids[1 : 1 + n]


def test_reference_equivalence_on_corpus(default_vocab, prompt_corpus):
    encoder = default_vocab.token_to_id
    ranks = default_vocab.merges
    start = time.monotonic()
    for prompt in prompt_corpus:
        expected = reference_token_sequence(
            prompt,
            encoder,
            ranks,
            default_vocab.begin_id,
            default_vocab.end_id,
            default_vocab.pad_id,
        )
        assert list(tokenize(prompt, default_vocab).ids) == expected, prompt
    assert time.monotonic() - start < 5.0


def test_spans_cover_words(default_vocab):
    prompt = "A  Bunny,  detailed!"
    seq = tokenize(prompt, default_vocab)
    for start, end in seq.text_spans:
        assert 0 <= start < end <= len(prompt)
    covered = "".join(
        prompt[start:end].lower() for start, end in seq.text_spans
    )
    assert covered == "abunny,detailed!"


def test_spans_align_with_tokens(default_vocab):
    prompt = "squirrel antidisestablishment"
    seq = tokenize(prompt, default_vocab)
    strings = token_strings(seq, default_vocab)[1:-1]
    assert len(strings) == len(seq.text_spans)
    # each token's plain text must appear inside its span's source slice
    for token, (start, end) in zip(strings, seq.text_spans):
        plain = token.replace("</w>", "")
        assert plain in prompt[start:end].lower()


def test_detokenize_empty(default_vocab):
    seq = tokenize("", default_vocab)
    assert detokenize(seq, default_vocab) == ""


def test_detokenize_round_trip(default_vocab):
    seq = tokenize("hello world", default_vocab)
    assert detokenize(seq, default_vocab) == "hello world"


def test_tokenize_detokenize_ids_round_trip(default_vocab, prompt_corpus):
    for prompt in prompt_corpus[:40]:
        seq = tokenize(prompt, default_vocab)
        again = tokenize(detokenize(seq, default_vocab), default_vocab)
        assert again.ids == seq.ids, prompt


def test_unknown_id_rejected(default_vocab):
    seq = tokenize("bunny", default_vocab)
    bad = TokenSequence(
        ids=(10**9,) + seq.ids[1:], text_spans=seq.text_spans
    )
    with pytest.raises(TokenizerError, match="1000000000"):
        detokenize(bad, default_vocab)


def test_byte_fallback_handles_any_text(default_vocab):
    # arbitrary bytes become content tokens, never an error
    seq = tokenize("\x00\x07 control \x7f bytes \U0001f680", default_vocab)
    assert seq.ids[0] == default_vocab.begin_id
    assert default_vocab.end_id in seq.ids


@settings(max_examples=60, deadline=None)
@given(st.text(max_size=120))
def test_property_fixed_length_and_determinism(prompt):
    vocab = load_default_vocabulary()
    seq = tokenize(prompt, vocab)
    assert len(seq.ids) == vocab.max_length
    assert seq.ids == tokenize(prompt, vocab).ids
    end = seq.ids.index(vocab.end_id)
    assert all(t == vocab.pad_id for t in seq.ids[end + 1 :])


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.text(
            alphabet=st.characters(whitelist_categories=("Ll", "Nd")), min_size=1, max_size=8
        ),
        min_size=1,
        max_size=8,
    )
)
def test_property_prefix_stability(words):
    vocab = load_default_vocabulary()
    base = " ".join(words)
    seq_base = tokenize(base, vocab)
    n = len(seq_base.content_slice(vocab))
    seq_ext = tokenize(base + " extra words appended", vocab)
    if n <= vocab.max_length - 2 and len(seq_ext.content_slice(vocab)) > n:
        assert seq_base.ids[1 : 1 + n] == seq_ext.ids[1 : 1 + n]
