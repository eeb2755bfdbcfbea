"""Configuration management for turnstate."""
import json
from pathlib import Path
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, model_validator
from pydantic_settings import BaseSettings

from errors import ConfigError, ParseError


class Settings(BaseSettings):
    """Process-level settings (environment / .env)."""

    # Preprocessing cache
    database_url: str = "sqlite:///./turnstate_cache.db"
    cache_enabled: bool = True

    # Default run config file (TURNSTATE_CONFIG)
    turnstate_config: Optional[str] = None

    log_level: str = "INFO"
    precision: Literal["float32", "float64"] = "float32"

    class Config:
        env_file = ".env"
        case_sensitive = False
        extra = "ignore"


settings = Settings()


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class ModelConfig(_Strict):
    """Architecture hyper-parameters. Desk-scale defaults."""

    d_model: int = Field(64, ge=2)
    encoder_layers: int = Field(2, ge=0)
    decoder_layers: int = Field(2, ge=0)
    encoder_heads: int = Field(4, ge=1)
    decoder_heads: int = Field(4, ge=1)
    graph_heads: int = Field(4, ge=1)
    emotion_heads: int = Field(4, ge=1)
    ffn_dim: Optional[int] = None
    max_len: int = Field(256, ge=4)
    max_target_len: int = Field(64, ge=2)
    dropout: float = Field(0.0, ge=0.0, lt=1.0)
    tie_output_projection: bool = True

    knowledge_provider: Literal["zeros", "label", "precomputed"] = "zeros"
    knowledge_path: Optional[str] = None

    strategy_teacher_forcing: bool = False
    bow_on_response: bool = True
    bow_normalize: Literal["node", "keyword"] = "node"

    # Ablations
    use_semantics_transition: bool = True
    use_strategy_transition: bool = True
    use_emotion_transition: bool = True
    use_transit_then_interact: bool = True

    @model_validator(mode="after")
    def _check_heads(self):
        for field_name in ("encoder_heads", "decoder_heads", "graph_heads", "emotion_heads"):
            heads = getattr(self, field_name)
            if self.d_model % heads != 0:
                raise ValueError(f"d_model={self.d_model} is not divisible by {field_name}={heads}")
        if self.knowledge_provider == "precomputed" and not self.knowledge_path:
            raise ValueError("knowledge_provider=precomputed requires knowledge_path")
        return self

    @property
    def hidden_dim(self) -> int:
        return self.ffn_dim or 4 * self.d_model

    @classmethod
    def full_size(cls, **overrides) -> "ModelConfig":
        """Full-size variant: 320 hidden units, 16 graph heads, 4 emotion heads."""
        values = dict(d_model=320, encoder_layers=6, decoder_layers=6, encoder_heads=16,
                      decoder_heads=16, graph_heads=16, emotion_heads=4, max_len=512)
        values.update(overrides)
        return cls(**values)


class CorpusConfig(_Strict):
    keywords_k: int = Field(5, ge=1)
    segment_length: int = Field(10, ge=2)
    split_ratio: Tuple[int, int, int] = (8, 1, 1)
    seed: int = 42
    min_df: int = Field(1, ge=1)


class TrainConfig(_Strict):
    gamma: Tuple[float, float, float, float] = (1.0, 0.2, 1.0, 1.0)
    batch_size: int = Field(20, ge=1)
    base_lr: float = Field(2e-5, gt=0)
    warmup_steps: int = Field(120, ge=0)
    max_steps: int = Field(1000, ge=1)
    seed: int = 42
    window_w: int = Field(2, ge=1)

    grad_clip: float = Field(1.0, ge=0)
    weight_decay: float = Field(0.0, ge=0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0)
    lr_schedule: Literal["constant", "linear"] = "constant"
    checkpoint_every: int = Field(100, ge=1)
    eval_every: int = Field(100, ge=1)
    patience: int = Field(3, ge=1)

    @model_validator(mode="after")
    def _check_gamma(self):
        if any(g < 0 for g in self.gamma):
            raise ValueError(f"Loss weights must be non-negative, got {self.gamma}")
        return self


class GenerationConfig(_Strict):
    top_p: float = Field(0.3, gt=0.0, le=1.0)
    top_k: int = Field(30, ge=0)  # 0 disables top-k
    temperature: float = Field(0.7, gt=0.0)
    repetition_penalty: float = Field(1.03, ge=1.0)
    max_new_tokens: int = Field(40, ge=1)
    seed: int = 1


class RunConfig(_Strict):
    model: ModelConfig = Field(default_factory=ModelConfig)
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    generation: GenerationConfig = Field(default_factory=GenerationConfig)

    @classmethod
    def from_file(cls, path: Optional[str]) -> "RunConfig":
        """Load a JSON run config; a missing path yields defaults."""
        if not path:
            return cls()
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"Malformed config JSON in {path}: {e.msg}", line=e.lineno) from e
        return cls.build(raw)

    @classmethod
    def build(cls, raw: dict) -> "RunConfig":
        try:
            return cls.model_validate(raw)
        except PydanticValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    def merged(self, overrides: dict) -> "RunConfig":
        """Return a copy with section-level overrides ({"train": {"base_lr": ...}}) applied."""
        data = self.model_dump()
        for section, values in overrides.items():
            if section not in data:
                raise ConfigError(f"Unknown config section: {section}")
            data[section].update({k: v for k, v in values.items() if v is not None})
        return RunConfig.build(data)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)
