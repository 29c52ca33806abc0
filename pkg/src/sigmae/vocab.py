"""Token vocabularies with the reserved PAD/BOS/EOS rows."""
from pathlib import Path
from typing import Iterable, Sequence

PAD, BOS, EOS = "<pad>", "<bos>", "<eos>"
SPECIALS = (PAD, BOS, EOS)
PAD_ID, BOS_ID, EOS_ID = 0, 1, 2


class Vocab:
    """Bidirectional token/index map. Indices 0-2 are PAD, BOS, EOS."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(SPECIALS)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for tok in tokens:
            self.add(tok)

    @classmethod
    def from_corpus(cls, sequences: Iterable[Sequence[str]]) -> "Vocab":
        seen = sorted({tok for seq in sequences for tok in seq})
        return cls(seen)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos

    def __repr__(self):
        return f"Vocab({len(self)} tokens)"

    pad_id = PAD_ID
    bos_id = BOS_ID
    eos_id = EOS_ID

    def encode(self, tokens: Sequence[str], add_eos: bool = True) -> list[int]:
        try:
            ids = [self.stoi[t] for t in tokens]
        except KeyError as err:
            raise KeyError(f"token {err.args[0]!r} not in vocabulary") from None
        return ids + [EOS_ID] if add_eos else ids

    def decode(self, ids: Iterable[int], strip: bool = True) -> list[str]:
        """Map ids back to tokens, stopping at the first EOS when ``strip``."""
        out = []
        for i in ids:
            i = int(i)
            if strip and i == EOS_ID:
                break
            if strip and i in (PAD_ID, BOS_ID):
                continue
            out.append(self.itos[i])
        return out

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.itos) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(lines[:3]) != SPECIALS:
            raise ValueError(f"{path}: lines 0-2 must be {SPECIALS}")
        return cls(lines[3:])
