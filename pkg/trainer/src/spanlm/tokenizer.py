"""Word-level tokenizer with character offset mapping.

Tokens are maximal runs of non-whitespace characters. Offsets let the
trainer map character-level loss spans onto token positions; a token
overlapping a span boundary is included (rounding outward), so clipped
targets are never silently dropped.
"""

import json
import re

_TOKEN = re.compile(r"\S+")

PAD = "<pad>"
UNK = "<unk>"
BOS = "<bos>"
SPECIALS = (PAD, UNK, BOS)


class WordTokenizer:
    def __init__(self, vocab: list[str]):
        self.id_to_token = list(SPECIALS) + [t for t in vocab if t not in SPECIALS]
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        self.pad_id = self.token_to_id[PAD]
        self.unk_id = self.token_to_id[UNK]
        self.bos_id = self.token_to_id[BOS]

    @classmethod
    def fit(cls, texts) -> "WordTokenizer":
        vocab = set()
        for text in texts:
            vocab.update(match.group() for match in _TOKEN.finditer(text))
        return cls(sorted(vocab))

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode(self, text: str) -> tuple[list[int], list[tuple[int, int]]]:
        """Token ids plus (start, end) character offsets per token."""
        ids, offsets = [], []
        for match in _TOKEN.finditer(text):
            ids.append(self.token_to_id.get(match.group(), self.unk_id))
            offsets.append((match.start(), match.end()))
        return ids, offsets

    def decode(self, ids) -> str:
        return " ".join(self.id_to_token[int(i)] for i in ids if int(i) >= len(SPECIALS))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.id_to_token[len(SPECIALS):], handle, ensure_ascii=False)

    @classmethod
    def load(cls, path) -> "WordTokenizer":
        with open(path, encoding="utf-8") as handle:
            return cls(json.load(handle))
