"""Prompt assets.

The system prompts ship as editable text files inside the package; they are
reasonable defaults, not canonical. The content hash identifies the prompt
version in run manifests and cassette keys.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources


@dataclass(frozen=True)
class PromptAsset:
    name: str
    text: str
    sha256: str


def load_prompt(name: str) -> PromptAsset:
    text = resources.files("ontoekg").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")
    return PromptAsset(name=name, text=text, sha256=hashlib.sha256(text.encode("utf-8")).hexdigest())
