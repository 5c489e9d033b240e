"""Three-stage chained clustering over language granularities.

Stage one clusters each language's POS-augmented word embeddings with a
GMM.  Each cluster gets a gate-style expert weight (its member share of
the scope), and the weighted cluster centers become the data points of
the next stage: per language family first, then one global pool.  Every
word is finally resolved to a (single, family, multi) cluster chain by
predicting its weighted centers upward through the fitted stages.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .embeddings import PosTagging, VocabStore, final_embeddings
from .errors import DimensionMismatchError, UnknownLanguageError
from .gmm import GmmConfig, GmmModel, gmm_fit, gmm_predict
from .taxonomy import LanguageTaxonomy
from .util import derive_seed

MULTI_SCOPE = "MUL"


@dataclass(frozen=True)
class KPolicy:
    """Per-stage cluster counts; ``None`` means ceil(sqrt(n)) for n points."""

    single: Optional[int] = None
    family: Optional[int] = None
    multi: Optional[int] = None

    def resolve(self, stage: str, n: int) -> tuple[int, Optional[str]]:
        requested = getattr(self, stage)
        k = requested if requested is not None else max(1, math.ceil(math.sqrt(n)))
        if k > n:
            return n, f"{stage}: requested k={k} clamped to {n} points"
        return k, None


@dataclass
class Cluster:
    members: list
    center: np.ndarray
    expert_weight: float


@dataclass
class StageClusters:
    """One scope's clustering: clusters plus the fitted mixture.

    Empty mixture components (no hard-assigned member) are dropped so the
    next stage never sees a zero-weight center; ``component_to_cluster``
    maps surviving GMM component indices to compact cluster ids.
    """

    scope_id: str
    clusters: list[Cluster]
    warnings: list[str] = field(default_factory=list)
    gmm: Optional[GmmModel] = None
    component_to_cluster: dict[int, int] = field(default_factory=dict)

    @property
    def centers(self) -> np.ndarray:
        return np.stack([c.center for c in self.clusters])

    @property
    def expert_weights(self) -> np.ndarray:
        return np.array([c.expert_weight for c in self.clusters])

    def weighted_centers(self) -> np.ndarray:
        """Each cluster's expert weight broadcast over its center vector;
        the data points handed to the parent stage."""
        return self.expert_weights[:, None] * self.centers

    def predict_cluster(self, point: np.ndarray) -> int:
        """Compact cluster id of the mixture component claiming ``point``."""
        if self.gmm is None:
            raise ValueError(f"stage {self.scope_id!r} has no fitted mixture (loaded model?)")
        comp = gmm_predict(self.gmm, point)
        if comp not in self.component_to_cluster:
            raise ValueError(
                f"stage {self.scope_id!r}: point predicted into empty component {comp}"
            )
        return self.component_to_cluster[comp]


def _stage_from_fit(scope_id, member_ids, points, model: GmmModel, warnings) -> StageClusters:
    by_component: dict[int, list] = {}
    for mid, comp in zip(member_ids, model.assignments):
        by_component.setdefault(int(comp), []).append(mid)
    total = len(member_ids)
    clusters = []
    component_to_cluster = {}
    for comp in sorted(by_component):
        component_to_cluster[comp] = len(clusters)
        members = by_component[comp]
        clusters.append(
            Cluster(
                members=members,
                center=model.means[comp].copy(),
                expert_weight=len(members) / total,
            )
        )
    return StageClusters(
        scope_id=scope_id,
        clusters=clusters,
        warnings=list(warnings),
        gmm=model,
        component_to_cluster=component_to_cluster,
    )


def _scope_cfg(cfg: GmmConfig, k: int, *scope) -> GmmConfig:
    return GmmConfig(
        k=k,
        covariance=cfg.covariance,
        max_iter=cfg.max_iter,
        tol=cfg.tol,
        cov_floor=cfg.cov_floor,
        seed=derive_seed(cfg.seed, *scope),
    )


def cluster_single_language(
    lang: str,
    words: list[tuple[str, np.ndarray]],
    k_policy: KPolicy,
    cfg: GmmConfig,
) -> StageClusters:
    """Cluster one language's words in final-embedding space."""
    if not words:
        raise ValueError(f"language {lang!r} has no words to cluster")
    ids = [w for w, _ in words]
    points = np.stack([np.asarray(v, dtype=np.float64) for _, v in words])
    k, warning = k_policy.resolve("single", len(ids))
    model = gmm_fit(points, _scope_cfg(cfg, k, "single", lang))
    return _stage_from_fit(lang, ids, points, model, [warning] if warning else [])


def _cluster_centers_stage(
    scope_kind: str,
    scope_id: str,
    children: list[StageClusters],
    k_policy: KPolicy,
    cfg: GmmConfig,
) -> StageClusters:
    ids = []
    rows = []
    for child in children:
        weighted = child.weighted_centers()
        for t in range(len(child.clusters)):
            ids.append((child.scope_id, t))
            rows.append(weighted[t])
    if not ids:
        raise ValueError(f"{scope_kind} scope {scope_id!r} has no input clusters")
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise DimensionMismatchError(f"{scope_kind} scope {scope_id!r} mixes dims {sorted(dims)}")
    points = np.stack(rows)
    k, warning = k_policy.resolve(scope_kind, len(ids))
    model = gmm_fit(points, _scope_cfg(cfg, k, scope_kind, scope_id))
    return _stage_from_fit(scope_id, ids, points, model, [warning] if warning else [])


def cluster_family(
    family: str,
    per_language: list[StageClusters],
    k_policy: KPolicy,
    cfg: GmmConfig,
) -> StageClusters:
    """Cluster the expert-weighted single-language centers of one family."""
    return _cluster_centers_stage("family", family, per_language, k_policy, cfg)


def cluster_multi(
    tax: LanguageTaxonomy,
    per_family: list[StageClusters],
    k_policy: KPolicy,
    cfg: GmmConfig,
) -> StageClusters:
    """Cluster the expert-weighted family centers of the global pool."""
    return _cluster_centers_stage("multi", MULTI_SCOPE, per_family, k_policy, cfg)


@dataclass
class ClusterModel:
    """Full three-stage result plus the per-word cluster chain.

    ``chain[lang][word]`` is (single_id, family_id, multi_id).  Word
    embeddings (final, d+p) are retained per language, row-aligned with
    the chain's insertion order, so reports can be produced from the
    serialized model alone.
    """

    single: dict[str, StageClusters]
    family: dict[str, StageClusters]
    multi: StageClusters
    chain: dict[str, dict[str, tuple[int, int, int]]]
    embed_dim: int
    seed: int
    k_policy: KPolicy
    word_embeddings: dict[str, np.ndarray] = field(default_factory=dict)

    def chain_of(self, lang: str, word: str) -> tuple[int, int, int]:
        return self.chain[lang][word]

    def has_word(self, lang: str, word: str) -> bool:
        return lang in self.chain and word in self.chain[lang]

    @property
    def warnings(self) -> list[str]:
        out = []
        for stage in list(self.single.values()) + list(self.family.values()) + [self.multi]:
            out.extend(f"{stage.scope_id}: {w}" for w in stage.warnings)
        return out


def build_cluster_model(
    stores: dict[str, VocabStore],
    pos: PosTagging,
    tax: LanguageTaxonomy,
    k_policy: KPolicy,
    cfg: GmmConfig,
) -> ClusterModel:
    """Run the three stages in order and resolve every word's chain.

    A word's family cluster is found by predicting its expert-weighted
    single-stage center into the family mixture; the multi cluster by
    predicting the weighted family center into the global mixture.
    """
    if not stores:
        raise ValueError("no vocabulary stores given")
    langs = sorted(stores)
    for lang in langs:
        tax.family_of(lang)  # raises UnknownLanguageError

    single: dict[str, StageClusters] = {}
    words_by_lang: dict[str, list[str]] = {}
    embeddings_by_lang: dict[str, np.ndarray] = {}
    embed_dim = None
    for lang in langs:
        words, matrix = final_embeddings(stores[lang], pos)
        if embed_dim is None:
            embed_dim = matrix.shape[1]
        elif matrix.shape[1] != embed_dim:
            raise DimensionMismatchError(
                f"store {lang!r} yields dim {matrix.shape[1]}, expected {embed_dim}"
            )
        words_by_lang[lang] = words
        embeddings_by_lang[lang] = matrix
        single[lang] = cluster_single_language(
            lang, list(zip(words, matrix)), k_policy, cfg
        )

    by_family: dict[str, list[str]] = {}
    for lang in langs:
        by_family.setdefault(tax.family_of(lang), []).append(lang)

    family: dict[str, StageClusters] = {}
    for fam in sorted(by_family):
        family[fam] = cluster_family(
            fam, [single[lang] for lang in by_family[fam]], k_policy, cfg
        )

    multi = cluster_multi(tax, [family[fam] for fam in sorted(family)], k_policy, cfg)

    # resolve each single cluster upward once, then chain words through
    family_of_single: dict[tuple[str, int], int] = {}
    for lang in langs:
        fam_stage = family[tax.family_of(lang)]
        weighted = single[lang].weighted_centers()
        for t in range(len(single[lang].clusters)):
            family_of_single[(lang, t)] = fam_stage.predict_cluster(weighted[t])

    multi_of_family: dict[tuple[str, int], int] = {}
    for fam in sorted(family):
        weighted = family[fam].weighted_centers()
        for g in range(len(family[fam].clusters)):
            multi_of_family[(fam, g)] = multi.predict_cluster(weighted[g])

    chain: dict[str, dict[str, tuple[int, int, int]]] = {}
    for lang in langs:
        stage = single[lang]
        fam = tax.family_of(lang)
        lang_chain: dict[str, tuple[int, int, int]] = {}
        for i, word in enumerate(words_by_lang[lang]):
            t = stage.component_to_cluster[int(stage.gmm.assignments[i])]
            g = family_of_single[(lang, t)]
            q = multi_of_family[(fam, g)]
            lang_chain[word] = (t, g, q)
        chain[lang] = lang_chain

    return ClusterModel(
        single=single,
        family=family,
        multi=multi,
        chain=chain,
        embed_dim=int(embed_dim),
        seed=cfg.seed,
        k_policy=k_policy,
        word_embeddings=embeddings_by_lang,
    )
