from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.analysis.dnorm import CertKind
from app.errors import SchemaError
from app.rationals import parse_rat


class Command(str, Enum):
    ANALYZE = "analyze"
    INDEX = "index"
    ENVELOPE = "envelope"
    DECOMPOSE = "decompose"
    CHECK_CERT = "check-cert"
    SIMPLE_DCS = "simple-dcs"
    WITNESS = "witness"
    DEMO_PROP15 = "demo-prop15"
    CHECK = "check"
    ORACLE = "oracle"


def _canonical(value: str) -> str:
    try:
        parse_rat(value)
    except SchemaError as e:
        raise ValueError(e.message)
    return value


class SpaceDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    leaf: Optional[bool] = None
    prefix: list["SpaceDoc"] = Field(default_factory=list)
    cycle: list["SpaceDoc"] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_shape(self):
        if self.leaf is not None:
            if not self.leaf:
                raise ValueError("leaf must be true when present")
            if self.prefix or self.cycle:
                raise ValueError("a leaf has no children")
        elif not self.cycle:
            raise ValueError("a limit node needs a nonempty cycle")
        return self


class MarkDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mark: bool
    prefix: list["MarkDoc"] = Field(default_factory=list)
    cycle: list["MarkDoc"] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_shape(self):
        if self.prefix and not self.cycle:
            raise ValueError("a limit node needs a nonempty cycle")
        return self


class FnDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    value: str
    prefix: list["FnDoc"] = Field(default_factory=list)
    cycle: list["FnDoc"] = Field(default_factory=list)

    @field_validator("value")
    @classmethod
    def canonical_value(cls, v: str) -> str:
        return _canonical(v)

    @model_validator(mode="after")
    def check_shape(self):
        if self.prefix and not self.cycle:
            raise ValueError("a limit node needs a nonempty cycle")
        return self


class RegionDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    outer: MarkDoc
    minus: MarkDoc


class CertPartDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    function: Optional[FnDoc] = None
    region: Optional[RegionDoc] = None
    cert: "CertDoc"


class CertDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: str
    u: Optional[FnDoc] = None
    v: Optional[FnDoc] = None
    parts: list[CertPartDoc] = Field(default_factory=list)
    region: Optional[RegionDoc] = None
    inner: Optional["CertDoc"] = None
    factor: Optional[int] = None
    support: Optional[RegionDoc] = None

    @model_validator(mode="after")
    def check_kind(self):
        kinds = {k.value for k in CertKind}
        if self.kind not in kinds:
            raise ValueError(f"unknown certificate kind {self.kind!r}")
        if self.kind == CertKind.LSC_SPLIT.value and (self.u is None or self.v is None):
            raise ValueError("lsc_split needs u and v")
        if self.kind == CertKind.EXTENSION.value:
            if self.region is None or self.inner is None:
                raise ValueError("extension needs region and inner")
            if self.factor is None:
                raise ValueError("extension needs a factor")
        if self.kind == CertKind.SUM.value and any(p.function is None for p in self.parts):
            raise ValueError("sum parts need a function")
        if self.kind == CertKind.LOCALIZATION.value and any(p.region is None for p in self.parts):
            raise ValueError("localization parts need a region")
        return self


class CorpusSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=1, ge=0, lt=2**64)
    count: int = Field(default=200, ge=0)
    max_rank: int = Field(default=3, ge=0, le=4)
    value_set: list[str] = Field(default_factory=lambda: ["0", "1", "-1", "1/2", "-1/2", "1/3"])
    cycle_slots: int = Field(default=2, ge=1, le=2)
    prefix_len: int = Field(default=2, ge=0, le=2)

    @field_validator("value_set")
    @classmethod
    def canonical_values(cls, values: list[str]) -> list[str]:
        if not values:
            raise ValueError("value_set must not be empty")
        return [_canonical(v) for v in values]


class Report(BaseModel):
    command: list[str]
    inputs_digest: str
    results: dict[str, Any] = Field(default_factory=dict)
    violations: list[str] = Field(default_factory=list)
    ok: bool = True
    exit_code: int = 0


SpaceDoc.model_rebuild()
MarkDoc.model_rebuild()
FnDoc.model_rebuild()
CertPartDoc.model_rebuild()
CertDoc.model_rebuild()
