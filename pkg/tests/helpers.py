"""Fixture builders shared across the test modules.

Everything here writes tiny, fully deterministic inputs: word2vec text
files, one-line taxonomies, CoNLL-U blocks, and a synthetic synonym
corpus whose ground-truth grouping is known by construction.
"""

import json

import numpy as np

from psda.embeddings import VocabStore


def write_vectors(path, lang: str, entries: dict[str, np.ndarray]) -> None:
    dims = {len(np.atleast_1d(v)) for v in entries.values()}
    dim = dims.pop() if dims else 0
    lines = [f"{len(entries)} {dim}"]
    for word, vec in entries.items():
        lines.append(word + " " + " ".join(repr(float(x)) for x in np.atleast_1d(vec)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_taxonomy(path, families: dict[str, list[str]]) -> None:
    lines = [f"{fam}: {','.join(langs)}" for fam, langs in families.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def conllu_block(lang: str, rows: list[tuple]) -> str:
    """One sentence block; rows are (form, upos, head, deprel)."""
    lines = [f"# lang = {lang}"]
    for i, (form, upos, head, deprel) in enumerate(rows, start=1):
        lines.append(
            "\t".join(
                [str(i), form, form, upos, "_", "_", str(head), deprel, "_", "_"]
            )
        )
    return "\n".join(lines)


def write_conllu(path, blocks: list[str]) -> None:
    path.write_text("\n\n".join(blocks) + "\n", encoding="utf-8")


def store_from(lang: str, entries) -> VocabStore:
    entries = dict(entries)
    dims = {len(np.atleast_1d(v)) for v in entries.values()}
    dim = dims.pop() if dims else 0
    return VocabStore(
        lang=lang,
        dim=dim,
        entries={w: np.asarray(v, dtype=np.float64) for w, v in entries.items()},
    )


def read_stream(path):
    """Parse a JSONL stream file into (meta, records)."""
    meta = None
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            if "meta" in obj and meta is None:
                meta = obj["meta"]
            else:
                records.append(obj)
    return meta, records


def synonym_stores(
    languages: tuple[str, ...] = ("aa", "bb", "cc"),
    groups: int = 10,
    words_per_group: int = 5,
    dim: int = 8,
    noise: float = 0.05,
    center_scale: float = 30.0,
    seed: int = 11,
):
    """Synthetic cross-lingual synonym vocabulary.

    Every group has one center; each language holds ``words_per_group``
    words per group, each center + gaussian noise.  Centers are resampled
    until pairwise separations exceed 10x the noise scale, so the true
    grouping is unambiguous.  Returns (stores, group_of) with
    group_of[(lang, word)] = group id.
    """
    rng = np.random.default_rng(seed)
    while True:
        centers = rng.normal(size=(groups, dim)) * center_scale
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        dist[np.diag_indices(groups)] = np.inf
        if dist.min() >= 10.0 * noise * np.sqrt(dim) * 10:
            break
    stores = {}
    group_of = {}
    for lang in languages:
        entries = {}
        for g in range(groups):
            for w in range(words_per_group):
                word = f"{lang}_g{g}_w{w}"
                entries[word] = centers[g] + rng.normal(size=dim) * noise
                group_of[(lang, word)] = g
        stores[lang] = store_from(lang, entries)
    return stores, group_of
