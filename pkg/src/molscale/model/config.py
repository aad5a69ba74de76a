"""Model hyperparameters and named architecture presets."""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from molscale.errors import ConfigError
from molscale.molgraph.models import SPD_VOCAB


class ModelConfig(BaseModel):
    """Dimensions of the two-track network."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = "custom"
    layers: int = Field(ge=1)
    embed_dim: int = Field(ge=1)
    heads: int = Field(ge=1)
    pair_dim: int = Field(ge=1)
    pair_hidden: int = Field(ge=1)
    ffn_dim: int = Field(ge=1)
    gaussian_kernels: int = Field(default=16, ge=1)
    spd_vocab: int = SPD_VOCAB
    max_atoms: int = Field(default=64, ge=1)
    pair_type_buckets: int = Field(default=1024, ge=1)

    # Published training defaults per preset; informational at desk scale
    learning_rate: float = Field(default=1e-4, gt=0)
    batch_size: int = Field(default=1024, ge=1)

    @model_validator(mode="after")
    def _check_dims(self) -> "ModelConfig":
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} is not divisible by heads {self.heads}")
        if self.spd_vocab != SPD_VOCAB:
            raise ValueError(f"spd_vocab must be {SPD_VOCAB}")
        return self

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads


def _preset(name: str, layers: int, embed: int, heads: int, **extra) -> ModelConfig:
    return ModelConfig(
        name=name,
        layers=layers,
        embed_dim=embed,
        heads=heads,
        pair_dim=extra.pop("pair_dim", 512),
        pair_hidden=extra.pop("pair_hidden", 64),
        ffn_dim=extra.pop("ffn_dim", embed),
        **extra,
    )


PRESETS: dict[str, ModelConfig] = {
    "tiny": _preset("tiny", 2, 16, 2, pair_dim=8, pair_hidden=4, ffn_dim=16, gaussian_kernels=8, batch_size=16),
    "42M": _preset("42M", 6, 768, 48),
    "84M": _preset("84M", 12, 768, 48),
    "164M": _preset("164M", 24, 768, 48),
    "310M": _preset("310M", 32, 1024, 64),
    "570M": _preset("570M", 32, 1536, 96),
    "1.1B": _preset("1.1B", 64, 1536, 96),
}


def get_preset(name: str) -> ModelConfig:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(PRESETS)
        raise ConfigError(f"unknown preset '{name}' (known: {known})") from None
