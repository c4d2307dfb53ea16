from typing import Literal
from pydantic_settings import BaseSettings
from pydantic import Field, model_validator


class ObslabSettings(BaseSettings):
    # Enumeration and linear-algebra budget
    BUDGET: int = Field(5_000_000, validation_alias="OBSLAB_BUDGET")

    # Flow window {-W..W} used by window checks on G x Z
    FLOW_WINDOW: int = Field(2, validation_alias="OBSLAB_FLOW_WINDOW")

    # Sampling seed (core mathematics never depends on it)
    SEED: int = Field(0, validation_alias="OBSLAB_SEED")

    # Output
    FORMAT: Literal["text", "json"] = Field("text", validation_alias="OBSLAB_FORMAT")
    LOG_LEVEL: str = Field("INFO", validation_alias="OBSLAB_LOG_LEVEL")

    @model_validator(mode="after")
    def validate_limits(self):
        """Reject budgets and windows the computations cannot honour."""
        if self.BUDGET <= 0:
            raise ValueError(
                "OBSLAB_BUDGET must be a positive integer.\n"
                "  - it bounds enumeration candidates and linear-system sizes\n"
                "  - the default is 5000000"
            )

        if not 1 <= self.FLOW_WINDOW <= 4:
            raise ValueError(
                "OBSLAB_FLOW_WINDOW must lie in 1..4.\n"
                "  - window checks evaluate every tuple with flow components in {-W..W}\n"
                "  - larger windows grow as (|Q|(2W+1))^4"
            )

        if self.LOG_LEVEL.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(
                f"Unknown OBSLAB_LOG_LEVEL '{self.LOG_LEVEL}'. "
                "Use one of DEBUG, INFO, WARNING, ERROR, CRITICAL."
            )

        return self
