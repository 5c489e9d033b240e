"""Pipeline configuration: a small key = value file plus overrides.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Relative paths are resolved against the config file's own directory, so
a config can be invoked from anywhere.  Command-line ``--set key=value``
pairs override the file, and ``--seed`` overrides both.

``echo()`` renders the effective configuration in canonical form; it is
embedded in command output so results carry their provenance.  Output
locations are deliberately not configuration, which keeps the echoed
provenance, and therefore the output bytes, independent of where
results are written.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .domino import KPolicy
from .errors import ConfigError
from .gmm import GmmConfig
from .otreg import OtParams

DEFAULTS: dict[str, str] = {
    "seed": "0",
    "copies": "1",
    "oov": "zero",
    "pos.seed": "0",
    "pos.dim": "17",
    "k.single": "auto",
    "k.family": "auto",
    "k.multi": "auto",
    "gmm.covariance": "diagonal",
    "gmm.max_iter": "200",
    "gmm.tol": "1e-06",
    "gmm.cov_floor": "1e-06",
    "ot.epsilon": "0.1",
    "ot.tail": "300",
    "ot.eta": "0.001",
    "ot.power": "1.0",
    "ot.max_iter": "1000",
    "ot.tol": "1e-09",
    "rho": "0.4,0.2,0.4",
    "lam": "0.5,0.5",
}

_PATH_KEYS = ("taxonomy", "corpus")


def _known_key(key: str) -> bool:
    return key in DEFAULTS or key in _PATH_KEYS or key.startswith("embeddings.")


def read_config_file(path) -> dict[str, str]:
    """Parse a config file into a raw key -> value map."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if not _known_key(key):
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate config key {key!r}")
        out[key] = value
    return out


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: expected an integer, got {raw!r}") from None


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: expected a number, got {raw!r}") from None


def _parse_k(raw: str, key: str) -> Optional[int]:
    if raw == "auto":
        return None
    k = _parse_int(raw, key)
    if k < 1:
        raise ConfigError(f"config key {key!r}: cluster count must be positive, got {k}")
    return k


def _parse_floats(raw: str, key: str, count: int) -> tuple[float, ...]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != count:
        raise ConfigError(f"config key {key!r}: expected {count} comma-separated numbers")
    return tuple(_parse_float(p, key) for p in parts)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class PipelineConfig:
    taxonomy_path: Optional[Path] = None
    corpus_path: Optional[Path] = None
    embedding_paths: dict[str, Path] = field(default_factory=dict)
    seed: int = 0
    copies: int = 1
    oov: str = "zero"
    pos_seed: int = 0
    pos_dim: int = 17
    k_single: Optional[int] = None
    k_family: Optional[int] = None
    k_multi: Optional[int] = None
    gmm_covariance: str = "diagonal"
    gmm_max_iter: int = 200
    gmm_tol: float = 1e-6
    gmm_cov_floor: float = 1e-6
    ot_epsilon: float = 0.1
    ot_tail: int = 300
    ot_eta: float = 0.001
    ot_power: float = 1.0
    ot_max_iter: int = 1000
    ot_tol: float = 1e-9
    rho: tuple[float, float, float] = (0.4, 0.2, 0.4)
    lam: tuple[float, float] = (0.5, 0.5)

    def k_policy(self) -> KPolicy:
        return KPolicy(single=self.k_single, family=self.k_family, multi=self.k_multi)

    def gmm_config(self) -> GmmConfig:
        return GmmConfig(
            k=1,  # stages resolve their own k; this is a template
            covariance=self.gmm_covariance,
            max_iter=self.gmm_max_iter,
            tol=self.gmm_tol,
            cov_floor=self.gmm_cov_floor,
            seed=self.seed,
        )

    def ot_params(self) -> OtParams:
        return OtParams(
            epsilon=self.ot_epsilon,
            tail_count=self.ot_tail,
            eta=self.ot_eta,
            rho=self.rho,
            lam=self.lam,
            power=self.ot_power,
            max_iter=self.ot_max_iter,
            tol=self.ot_tol,
        )

    def echo(self) -> dict[str, str]:
        """Effective configuration in canonical string form, sorted keys."""
        out = {
            "seed": _fmt(self.seed),
            "copies": _fmt(self.copies),
            "oov": self.oov,
            "pos.seed": _fmt(self.pos_seed),
            "pos.dim": _fmt(self.pos_dim),
            "k.single": "auto" if self.k_single is None else _fmt(self.k_single),
            "k.family": "auto" if self.k_family is None else _fmt(self.k_family),
            "k.multi": "auto" if self.k_multi is None else _fmt(self.k_multi),
            "gmm.covariance": self.gmm_covariance,
            "gmm.max_iter": _fmt(self.gmm_max_iter),
            "gmm.tol": _fmt(self.gmm_tol),
            "gmm.cov_floor": _fmt(self.gmm_cov_floor),
            "ot.epsilon": _fmt(self.ot_epsilon),
            "ot.tail": _fmt(self.ot_tail),
            "ot.eta": _fmt(self.ot_eta),
            "ot.power": _fmt(self.ot_power),
            "ot.max_iter": _fmt(self.ot_max_iter),
            "ot.tol": _fmt(self.ot_tol),
            "rho": ",".join(repr(x) for x in self.rho),
            "lam": ",".join(repr(x) for x in self.lam),
        }
        if self.taxonomy_path is not None:
            out["taxonomy"] = str(self.taxonomy_path)
        if self.corpus_path is not None:
            out["corpus"] = str(self.corpus_path)
        for lang in sorted(self.embedding_paths):
            out[f"embeddings.{lang}"] = str(self.embedding_paths[lang])
        return dict(sorted(out.items()))


def build_config(raw: dict[str, str], base_dir: Optional[Path] = None) -> PipelineConfig:
    """Materialize a typed config from merged raw values.

    Unset keys take the documented defaults; relative paths are resolved
    against ``base_dir`` when given.
    """
    merged = dict(DEFAULTS)
    merged.update(raw)
    for key in merged:
        if not _known_key(key):
            raise ConfigError(f"unknown config key {key!r}")

    def resolve(p: str) -> Path:
        path = Path(p)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return path

    oov = merged["oov"]
    if oov not in ("zero", "error"):
        raise ConfigError(f"config key 'oov': expected zero or error, got {oov!r}")
    covariance = merged["gmm.covariance"]
    if covariance not in ("diagonal", "spherical"):
        raise ConfigError(
            f"config key 'gmm.covariance': expected diagonal or spherical, got {covariance!r}"
        )

    embedding_paths = {
        key.split(".", 1)[1]: resolve(value)
        for key, value in merged.items()
        if key.startswith("embeddings.")
    }
    copies = _parse_int(merged["copies"], "copies")
    if copies < 1:
        raise ConfigError(f"config key 'copies': must be at least 1, got {copies}")

    try:
        cfg = PipelineConfig(
            taxonomy_path=resolve(merged["taxonomy"]) if "taxonomy" in merged else None,
            corpus_path=resolve(merged["corpus"]) if "corpus" in merged else None,
            embedding_paths=embedding_paths,
            seed=_parse_int(merged["seed"], "seed"),
            copies=copies,
            oov=oov,
            pos_seed=_parse_int(merged["pos.seed"], "pos.seed"),
            pos_dim=_parse_int(merged["pos.dim"], "pos.dim"),
            k_single=_parse_k(merged["k.single"], "k.single"),
            k_family=_parse_k(merged["k.family"], "k.family"),
            k_multi=_parse_k(merged["k.multi"], "k.multi"),
            gmm_covariance=covariance,
            gmm_max_iter=_parse_int(merged["gmm.max_iter"], "gmm.max_iter"),
            gmm_tol=_parse_float(merged["gmm.tol"], "gmm.tol"),
            gmm_cov_floor=_parse_float(merged["gmm.cov_floor"], "gmm.cov_floor"),
            ot_epsilon=_parse_float(merged["ot.epsilon"], "ot.epsilon"),
            ot_tail=_parse_int(merged["ot.tail"], "ot.tail"),
            ot_eta=_parse_float(merged["ot.eta"], "ot.eta"),
            ot_power=_parse_float(merged["ot.power"], "ot.power"),
            ot_max_iter=_parse_int(merged["ot.max_iter"], "ot.max_iter"),
            ot_tol=_parse_float(merged["ot.tol"], "ot.tol"),
            rho=_parse_floats(merged["rho"], "rho", 3),
            lam=_parse_floats(merged["lam"], "lam", 2),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    # fail fast on values the math layer would reject later
    try:
        cfg.ot_params()
    except Exception as exc:
        raise ConfigError(f"invalid transport settings: {exc}") from exc
    # every referenced path must exist up front, not at first use
    named = [("taxonomy", cfg.taxonomy_path), ("corpus", cfg.corpus_path)]
    named += [(f"embeddings.{lang}", p) for lang, p in sorted(cfg.embedding_paths.items())]
    for key, p in named:
        if p is not None and not p.exists():
            raise ConfigError(f"config key {key!r}: path does not exist: {p}")
    return cfg


def load_config(
    path: Optional[str],
    overrides: Optional[dict[str, str]] = None,
    seed: Optional[int] = None,
) -> PipelineConfig:
    """File (optional) + --set overrides + --seed, in increasing precedence."""
    raw: dict[str, str] = {}
    base_dir: Optional[Path] = None
    if path is not None:
        raw.update(read_config_file(path))
        base_dir = Path(path).resolve().parent
    for key, value in (overrides or {}).items():
        if not _known_key(key):
            raise ConfigError(f"unknown config key {key!r}")
        raw[key] = value
    if seed is not None:
        raw["seed"] = str(seed)
    return build_config(raw, base_dir)
