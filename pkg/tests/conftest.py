from __future__ import annotations

import json
from importlib import resources

import pytest

from difftrace.tokenizer import load_default_vocabulary


@pytest.fixture(scope="session")
def default_vocab():
    return load_default_vocabulary()


@pytest.fixture(scope="session")
def catalog_prompts() -> list[dict]:
    raw = (resources.files("difftrace.data") / "prompts.json").read_bytes()
    return json.loads(raw)["prompts"]


def _style_corpus(catalog: list[dict]) -> list[str]:
    subjects = [
        "a cute and adorable bunny",
        "a majestic elephant",
        "a fluffy squirrel",
        "a beautiful cityscape",
        "an ancient castle on a cliff",
        "a friendly robot",
        "a serene mountain lake",
        "a red fox in tall grass",
        "an astronaut riding a horse",
        "a lighthouse in a storm",
        "a dragon curled around a tower",
        "a cozy cabin in a pine forest",
    ]
    styles = [
        "in the style of cute pixar character",
        "as an oil painting",
        "as a watercolor painting",
        "concept art",
        "digital art",
        "photorealistic",
    ]
    modifiers = [
        "detailed",
        "highly detailed",
        "trending on artstation",
        "sharp focus",
        "cinematic lighting",
        "octane render",
    ]
    prompts = [p["text"] for p in catalog]
    for i, subject in enumerate(subjects):
        for j, style in enumerate(styles):
            prompts.append(
                f"{subject}, {style}, {modifiers[(i + j) % len(modifiers)]}, "
                f"{modifiers[(i * 2 + j) % len(modifiers)]}"
            )
    prompts += [
        "",
        "   ",
        "Hello, WORLD!!!",
        "don't stop believin'",
        "it's a 4k render, isn't it?",
        "1girl, 2cats, 35mm photo",
        "naïve café décor, ünïcödé test",
        "emoji \U0001f430 bunny and \U0001f418 elephant",
        "semi-colons; em—dashes—and ellipses...",
        "numbers 1234567890 and symbols #@$%^&*()",
        "a  double  spaced   prompt\twith\ttabs\nand newlines",
        "'s 't 're 've 'm 'll 'd contraction soup",
        "aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa long word",
        "CAPS LOCK PROMPT, Trending On ArtStation",
        "rock'n'roll poster, masterpiece, award winning",
    ]
    assert len(prompts) >= 100
    return prompts[:100]


@pytest.fixture(scope="session")
def prompt_corpus(catalog_prompts) -> list[str]:
    corpus = _style_corpus(catalog_prompts)
    assert len(corpus) == 100
    return corpus
