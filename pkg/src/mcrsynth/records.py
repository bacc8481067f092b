"""Persisted records: products, scenarios, profiles and conversations.

These are the shapes that cross stage boundaries on disk, so they are pydantic
models; field names are the JSONL wire format.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Speaker = Literal["user", "assistant"]
Action = Literal["open", "chitchat", "recommend", "reject", "accept", "provide_target"]
OpenMode = Literal["text_open", "multimodal_open"]
Status = Literal["accepted", "forced_target", "abandoned"]

MIN_AGE = 13
MAX_AGE = 100


class Record(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def to_json(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


class Product(Record):
    product_id: str = Field(min_length=1)
    title: str = Field(min_length=1)
    description: str = Field(min_length=1)
    image_ref: str = Field(min_length=1)
    category_path: list[str] = Field(default_factory=list)
    summary: Optional[str] = None


class Scenario(Record):
    scenario_id: str = Field(min_length=1)
    text: str = Field(min_length=1)


class BasicUserInfo(Record):
    age: int = Field(ge=MIN_AGE, le=MAX_AGE)
    gender: str = Field(min_length=1)
    occupation: str = Field(min_length=1)
    notes: str = ""


class UserProfile(Record):
    profile_id: str = Field(min_length=1)
    basic: BasicUserInfo
    scenario_id: str = Field(min_length=1)
    target_product_id: str = Field(min_length=1)
    backstory: str = Field(min_length=1)
    scenario_requirements: list[str] = Field(min_length=1)
    target_requirements: list[str] = Field(min_length=1)

    @field_validator("scenario_requirements", "target_requirements")
    @classmethod
    def _no_blank_requirements(cls, value: list[str]) -> list[str]:
        if any(not item.strip() for item in value):
            raise ValueError("requirements must be non-blank strings")
        return value


class ReviewScore(Record):
    content_quality: int = Field(ge=0, le=2)
    logical_fluency: int = Field(ge=0, le=2)
    user_consistency: int = Field(ge=0, le=2)
    total: int = Field(ge=0, le=6)
    threshold: int = Field(ge=0, le=6)
    passed: bool = Field(alias="pass")
    reason: Optional[str] = None

    @model_validator(mode="after")
    def _consistent(self) -> "ReviewScore":
        if self.total != self.content_quality + self.logical_fluency + self.user_consistency:
            raise ValueError("total must equal the sum of the three sub-scores")
        if self.passed != (self.total >= self.threshold):
            raise ValueError("pass must equal total >= threshold")
        return self

    @classmethod
    def from_scores(cls, content: int, logic: int, consistency: int, threshold: int,
                    reason: str | None = None) -> "ReviewScore":
        total = content + logic + consistency
        return cls(content_quality=content, logical_fluency=logic, user_consistency=consistency,
                   total=total, threshold=threshold, passed=total >= threshold, reason=reason)

    @classmethod
    def failed_closed(cls, threshold: int, reason: str) -> "ReviewScore":
        return cls.from_scores(0, 0, 0, threshold, reason=reason)


class Turn(Record):
    index: int = Field(ge=0)
    speaker: Speaker
    action: Action
    text: str
    product_id: Optional[str] = None
    image_refs: list[str] = Field(default_factory=list)
    # requirement named by a reject turn; always one of the profile's target requirements
    cited_requirement: Optional[str] = None


class Conversation(Record):
    conversation_id: str
    profile_id: str
    target_product_id: str
    open_mode: OpenMode
    outfit_item_id: Optional[str] = None
    turns: list[Turn]
    status: Status
    review: Optional[ReviewScore] = None
    abandon_reason: Optional[str] = None

    def recommended_ids(self) -> list[str]:
        return [t.product_id for t in self.turns if t.action == "recommend" and t.product_id]

    def projection(self) -> list[tuple]:
        """Structure of the conversation with the text stripped out."""
        return [(t.speaker, t.action, t.product_id, tuple(t.image_refs)) for t in self.turns]
