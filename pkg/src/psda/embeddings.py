"""Word vectors and POS-augmented final embeddings.

Embeddings arrive as word2vec text files (header ``N d``, then ``word v1
... vd`` per line).  Each word additionally carries a Universal
Dependencies UPOS tag; the tag's one-hot vector is pushed through a frozen
seeded linear projection and concatenated onto the word vector to form the
final embedding used for clustering.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateWordError,
    NonFiniteInputError,
    ParseError,
)
from .util import require_finite

# The 17 UD UPOS categories in a fixed alphabetical order, so one-hot
# indices are stable across runs.
UPOS_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)
UPOS_INDEX = {tag: i for i, tag in enumerate(UPOS_TAGS)}

# Fallback tag for words never seen with a tag.
DEFAULT_TAG = "X"


@dataclass
class VocabStore:
    """Per-language map from word to a fixed-dimension float64 vector."""

    lang: str
    dim: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __getitem__(self, word: str) -> np.ndarray:
        return self.entries[word]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def words(self) -> list[str]:
        return list(self.entries)

    def matrix(self) -> np.ndarray:
        """All vectors stacked in insertion (file) order, shape (n, dim)."""
        if not self.entries:
            return np.zeros((0, self.dim))
        return np.stack([self.entries[w] for w in self.entries])


def load_vectors(path, lang: str) -> VocabStore:
    """Load a word2vec text file into a VocabStore.

    Validates the declared word count and dimension, rejects ragged rows,
    duplicate words, and non-finite components.
    """
    entries: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            raise ParseError("missing 'N d' header", path=path, line=1)
        parts = header.split()
        if len(parts) != 2:
            raise ParseError(f"malformed header {header.strip()!r}", path=path, line=1)
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"malformed header {header.strip()!r}", path=path, line=1) from None
        if count < 0 or dim <= 0:
            raise ParseError(f"invalid header counts {header.strip()!r}", path=path, line=1)
        for lineno, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            cols = raw.rstrip("\n").split(" ")
            word = cols[0]
            values = [c for c in cols[1:] if c]
            if len(values) != dim:
                raise DimensionMismatchError(
                    f"{path}:{lineno}: word {word!r} has {len(values)} components, expected {dim}"
                )
            if word in entries:
                raise DuplicateWordError(f"duplicate word {word!r}", path=path, line=lineno)
            try:
                vec = np.array(values, dtype=np.float64)
            except ValueError:
                raise ParseError(f"non-numeric component for word {word!r}", path=path, line=lineno) from None
            if not np.isfinite(vec).all():
                raise NonFiniteInputError(f"{path}:{lineno}: word {word!r} has NaN/Inf components")
            entries[word] = vec
    if len(entries) != count:
        raise ParseError(f"header declares {count} words, file has {len(entries)}", path=path)
    return VocabStore(lang=lang, dim=dim, entries=entries)


def pos_one_hot(tag: str) -> np.ndarray:
    """One-hot vector of length 17 for a UPOS tag, in the fixed ordering."""
    vec = np.zeros(len(UPOS_TAGS))
    vec[UPOS_INDEX[tag]] = 1.0
    return vec


@dataclass
class PosTagging:
    """Word -> UPOS tags plus the frozen linear tag projection.

    ``projection`` is (p, 17) and ``bias`` has length p; both are drawn
    once from a seeded uniform(-0.1, 0.1) and never updated, keeping the
    pipeline deterministic.
    """

    tags: dict[str, str]
    projection: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.projection = np.asarray(self.projection, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.projection.ndim != 2 or self.projection.shape[1] != len(UPOS_TAGS):
            raise DimensionMismatchError(
                f"projection must be (p, {len(UPOS_TAGS)}), got {self.projection.shape}"
            )
        if self.bias.shape != (self.projection.shape[0],):
            raise DimensionMismatchError(
                f"bias length {self.bias.shape} does not match projection rows "
                f"{self.projection.shape[0]}"
            )
        for word, tag in self.tags.items():
            if tag not in UPOS_INDEX:
                raise ValueError(f"word {word!r} carries unknown UPOS tag {tag!r}")

    @property
    def projection_dim(self) -> int:
        return self.projection.shape[0]

    @classmethod
    def seeded(cls, tags: dict[str, str], projection_dim: int = 17, seed: int = 0) -> "PosTagging":
        """Build a tagging with a frozen seeded projection.

        Draw order is fixed (matrix first, then bias) so a given seed
        always yields the same map.
        """
        rng = np.random.default_rng(seed)
        projection = rng.uniform(-0.1, 0.1, size=(projection_dim, len(UPOS_TAGS)))
        bias = rng.uniform(-0.1, 0.1, size=projection_dim)
        return cls(tags=dict(tags), projection=projection, bias=bias)

    def tag_of(self, word: str) -> str:
        return self.tags.get(word, DEFAULT_TAG)

    def project(self, tag: str) -> np.ndarray:
        """Projected tag block: projection @ one_hot(tag) + bias."""
        return self.projection[:, UPOS_INDEX[tag]] + self.bias


def final_embedding(word_vec: np.ndarray, tag: str, pos: PosTagging) -> np.ndarray:
    """Concatenate the word vector with its projected POS block.

    The first ``d`` components are the word vector bit-exactly; the last
    ``p`` components are ``projection @ one_hot(tag) + bias``.
    """
    word_vec = np.asarray(word_vec, dtype=np.float64)
    require_finite(word_vec, "word vector")
    return np.concatenate([word_vec, pos.project(tag)])


def final_embeddings(store: VocabStore, pos: PosTagging) -> tuple[list[str], np.ndarray]:
    """Final embeddings for every word in a store, in store order.

    Returns the word list and an (n, d + p) matrix.
    """
    words = store.words
    if not words:
        return [], np.zeros((0, store.dim + pos.projection_dim))
    rows = [final_embedding(store[w], pos.tag_of(w), pos) for w in words]
    return words, np.stack(rows)
