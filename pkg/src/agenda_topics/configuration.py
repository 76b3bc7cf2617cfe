"""Run Configuration.

One YAML file describes a run: input paths, the corpus roster, preprocessing
settings, model hyperparameters and analysis options. Command-line flags
override individual fields; the merged configuration is canonicalized and
hashed, and that hash stamps every output file.
"""

import logging
import os
from datetime import date
from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import BaseModel, Field, PrivateAttr, ValidationError, model_validator
from typing_extensions import Literal

from agenda_topics.errors import ConfigurationError
from agenda_topics.state_model import LikelihoodMode, ModelParams
from agenda_topics.state_text import PreprocessConfig
from agenda_topics.utils import file_sha256, read_word_list, short_hash

# Set up logger for this module
logger = logging.getLogger("agenda.config")

CONFIG_ENV_VAR = "AGENDA_TOPICS_CONFIG"

HCFlavor = Literal["HC0", "HC1", "HC2", "HC3"]

# ===== SCHEMAS =====

class CorpusSpec(BaseModel):
    """One corpus of the run and the attributes used for regression dummies."""

    name: str
    medium: str = Field(description="Channel, e.g. survey, facebook, twitter.")
    actor: str = Field(description="Content layer, e.g. public, politicians, audience.")
    labeled: bool = False


def default_corpora() -> list[CorpusSpec]:
    """Return the five-corpus roster: the coded survey plus two platforms for two actor groups."""
    return [
        CorpusSpec(name="survey", medium="survey", actor="public", labeled=True),
        CorpusSpec(name="facebook-politicians", medium="facebook", actor="politicians"),
        CorpusSpec(name="twitter-politicians", medium="twitter", actor="politicians"),
        CorpusSpec(name="facebook-audience", medium="facebook", actor="audience"),
        CorpusSpec(name="twitter-audience", medium="twitter", actor="audience"),
    ]


class PathsConfig(BaseModel):
    """Input files and the output directory, relative to the config file."""

    records: Optional[Path] = None
    stopwords: Optional[Path] = None
    custom_stopwords: Optional[Path] = None
    name_blocklist: Optional[Path] = None
    seed_scheme: Optional[Path] = None
    topic_metadata: Optional[Path] = None
    output_dir: Path = Path("out")


class EventMarker(BaseModel):
    """A dated event drawn on top of the volume series."""

    day: date
    label: str


class AnalysisOptions(BaseModel):
    """Settings for the downstream analytics."""

    prune: bool = True
    hc: HCFlavor = "HC1"
    top_n: int = Field(default=10, ge=0)
    sample_docs: int = Field(default=5, ge=0, description="Sample documents written per new topic for labeling.")
    subsets: bool = Field(default=True, description="Also fit every regression on seed-only and new-only cells.")
    events: list[EventMarker] = Field(default_factory=list)


class RunConfig(BaseModel):
    """Complete configuration of a run."""

    paths: PathsConfig = Field(default_factory=PathsConfig)
    corpora: list[CorpusSpec] = Field(default_factory=default_corpora)
    preprocess: PreprocessConfig = Field(default_factory=PreprocessConfig)
    model: ModelParams = Field(default_factory=ModelParams)
    analysis: AnalysisOptions = Field(default_factory=AnalysisOptions)

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @model_validator(mode="after")
    def _check_corpora(self) -> "RunConfig":
        names = [c.name for c in self.corpora]
        if len(set(names)) != len(names):
            raise ValueError("corpus names must be unique")
        if sum(c.labeled for c in self.corpora) > 1:
            raise ValueError("at most one corpus may be labeled")
        for pair in self.preprocess.balance:
            for name in (pair.reference, pair.pool):
                if name not in names:
                    raise ValueError(f"balance pair names unknown corpus {name!r}")
        return self

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    @property
    def labeled_corpus(self) -> str | None:
        """Name of the labeled corpus, if any."""
        return next((c.name for c in self.corpora if c.labeled), None)

    @property
    def corpus_names(self) -> list[str]:
        return [c.name for c in self.corpora]

    def corpus(self, name: str) -> CorpusSpec:
        for spec in self.corpora:
            if spec.name == name:
                return spec
        raise ConfigurationError(f"Unknown corpus {name!r}")

    def resolve(self, path: Path | None) -> Path | None:
        """Resolve a configured path against the config file's directory."""
        if path is None:
            return None
        return path if path.is_absolute() else self._base_dir / path

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.paths.output_dir)  # type: ignore[return-value]

# ===== HASHING =====

# Inputs whose contents, not just their paths, shape the preprocessed corpus
_HASHED_INPUTS = ("stopwords", "custom_stopwords", "name_blocklist", "seed_scheme")


def config_hash(config: RunConfig) -> str:
    """Hash of the effective configuration.

    The RNG seed and the output directory are left out, so runs that differ
    only by seed share a hash; the seed is carried separately in the run id
    and every header. Word lists and the seed scheme are hashed by content,
    so editing one in place changes the hash.
    """
    payload = config.model_dump(mode="python")
    payload["model"].pop("rng_seed", None)
    payload["paths"].pop("output_dir", None)
    contents = {}
    for field in _HASHED_INPUTS:
        path = config.resolve(getattr(config.paths, field))
        if path is not None and path.is_file():
            contents[field] = file_sha256(path)
    payload["input_contents"] = contents
    return short_hash(payload)


def run_id(config: RunConfig) -> str:
    """``<config hash>-s<seed>``."""
    return f"{config_hash(config)}-s{config.model.rng_seed}"

# ===== LOADING =====

def load_config(path: Path | str | None = None) -> RunConfig:
    """Load a YAML run configuration.

    Args:
        path: Config file; falls back to the ``AGENDA_TOPICS_CONFIG``
            environment variable, then to built-in defaults

    Raises:
        ConfigurationError: If the file is missing, unparsable or invalid
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        logger.info("No config file given; using built-in defaults")
        return RunConfig()

    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"{path}: invalid YAML ({e})") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")

    config = _validate(data, source=str(path))
    config._base_dir = path.resolve().parent
    logger.info(f"Loaded config {path} (hash {config_hash(config)})")
    return config


def _validate(data: dict[str, Any], source: str) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigurationError(f"{source}: invalid configuration at {where or '<root>'}: {first['msg']}") from e


def apply_overrides(
    config: RunConfig,
    seed: int | None = None,
    sweeps: int | None = None,
    alpha: float | None = None,
    beta: float | None = None,
    likelihood_mode: LikelihoodMode | None = None,
    hc: HCFlavor | None = None,
    out: Path | None = None,
) -> RunConfig:
    """Return a copy of ``config`` with command-line values applied.

    Flags win over the file; the result is re-validated.
    """
    data = config.model_dump(mode="python")
    model_updates = {"rng_seed": seed, "sweeps": sweeps, "alpha": alpha, "beta": beta, "likelihood_mode": likelihood_mode}
    for key, value in model_updates.items():
        if value is not None:
            data["model"][key] = value
    if hc is not None:
        data["analysis"]["hc"] = hc
    if out is not None:
        data["paths"]["output_dir"] = Path(out).resolve()

    merged = _validate(data, source="command line")
    merged._base_dir = config.base_dir
    return merged


def check_paths(config: RunConfig, *names: str) -> None:
    """Require that the named path fields are set and exist."""
    for name in names:
        value = getattr(config.paths, name)
        if value is None:
            raise ConfigurationError(f"paths.{name} is not configured")
        resolved = config.resolve(value)
        if not resolved.exists():
            raise ConfigurationError(f"paths.{name} does not exist: {resolved}")


def ensure_output_dir(config: RunConfig) -> Path:
    """Create the output directory and confirm it is writable."""
    out = config.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigurationError(f"Cannot create output directory {out}: {e}") from e
    if not os.access(out, os.W_OK):
        raise ConfigurationError(f"Output directory is not writable: {out}")
    return out


def build_preprocess_config(config: RunConfig) -> PreprocessConfig:
    """Merge word lists from the configured files into the preprocessing settings."""
    from agenda_topics.text_pipeline import nltk_stopwords

    preprocess = config.preprocess
    stopwords = set(preprocess.stopwords) | read_word_list(config.resolve(config.paths.stopwords))
    if preprocess.stopword_language:
        stopwords |= nltk_stopwords(preprocess.stopword_language)
    return preprocess.model_copy(
        update={
            "stopwords": stopwords,
            "custom_stopwords": set(preprocess.custom_stopwords) | read_word_list(config.resolve(config.paths.custom_stopwords)),
            "name_blocklist": set(preprocess.name_blocklist) | read_word_list(config.resolve(config.paths.name_blocklist)),
        }
    )
