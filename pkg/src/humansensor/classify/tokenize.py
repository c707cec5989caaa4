"""Segmentation-free tokenizer: CJK character bigrams plus case-folded words."""

from __future__ import annotations

import re

# CJK ideographs (unified, extension A, compatibility, extensions B-F),
# kana and hangul syllables.
_CJK = (
    "぀-ヿ"
    "㐀-䶿"
    "一-鿿"
    "가-힯"
    "豈-﫿"
    "\U00020000-\U0002ebef"
)
_WORD = re.compile(r"[^\W_]+")
_RUNS = re.compile(f"([{_CJK}]+)|([^{_CJK}]+)")


def tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    for word in _WORD.findall(text.casefold()):
        for cjk, other in _RUNS.findall(word):
            if cjk:
                if len(cjk) == 1:
                    tokens.append(cjk)
                else:
                    tokens.extend(cjk[i : i + 2] for i in range(len(cjk) - 1))
            else:
                tokens.append(other)
    return tokens
