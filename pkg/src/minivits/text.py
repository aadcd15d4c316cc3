"""Character-level tokenization over a fixed alphabet file.

The alphabet file holds one symbol per line; the 1-based line number is the
token id. Id 0 is reserved for unknown characters.
"""

from __future__ import annotations

from pathlib import Path

from .errors import EmptyTextError, MissingFileError, SchemaError

UNK_ID = 0


class Alphabet:
    """Bidirectional character <-> token-id map loaded from a file."""

    def __init__(self, symbols: list[str]):
        if not symbols:
            raise SchemaError("alphabet has no symbols")
        if any(len(s) != 1 for s in symbols):
            raise SchemaError("alphabet symbols must be single characters")
        if len(set(symbols)) != len(symbols):
            raise SchemaError("alphabet symbols must be unique")
        self.symbols = list(symbols)
        self._to_id = {s: i + 1 for i, s in enumerate(symbols)}

    @classmethod
    def load(cls, path: str | Path) -> "Alphabet":
        path = Path(path)
        if not path.exists():
            raise MissingFileError(f"alphabet file not found: {path}")
        lines = path.read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines = lines[:-1]
        return cls(lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.symbols) + "\n", encoding="utf-8")

    @property
    def size(self) -> int:
        """Number of distinct token ids including UNK."""
        return len(self.symbols) + 1

    def tokenize(self, text: str) -> list[int]:
        """Map text to token ids; unknown characters become UNK_ID."""
        if not text.strip():
            raise EmptyTextError("text is empty after trimming")
        return [self._to_id.get(ch, UNK_ID) for ch in text]

    def decode(self, ids: list[int]) -> str:
        """Inverse of tokenize on known-alphabet strings; UNK becomes '?'."""
        return "".join(self.symbols[i - 1] if i > 0 else "?" for i in ids)
