from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, PositiveInt, confloat, validator

Rate = confloat(ge=0.0, lt=1.0)


class ModelConfig(BaseModel):
    """Shape and regularization of the language model."""
    depth: PositiveInt = 10
    hidden: PositiveInt = 830
    embed: Optional[PositiveInt] = None  # defaults to `hidden`
    vocab_size: PositiveInt = 10000
    coupled: bool = True
    use_hsg: bool = True
    dropout_embedding: Rate = 0.0
    dropout_state: Rate = 0.0
    dropout_output: Rate = 0.0
    dropout_hsg: Rate = 0.0
    gate_bias_init: float = -2.5
    precision: int = 64

    @validator('precision')
    def known_precision(cls, v):
        if v not in (32, 64):
            raise ValueError('precision must be 32 or 64')
        return v

    @validator('dropout_hsg')
    def hsg_dropout_needs_hsg(cls, v, values):
        if v > 0 and not values.get('use_hsg', True):
            raise ValueError('dropout_hsg requires use_hsg')
        return v

    @property
    def embedding_size(self) -> int:
        return self.embed or self.hidden

    @property
    def uses_dropout(self) -> bool:
        return any(rate > 0 for rate in (self.dropout_embedding, self.dropout_state,
                                         self.dropout_output, self.dropout_hsg))
