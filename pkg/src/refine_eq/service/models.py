"""Request and response bodies for the checking service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class ValidateRequest(BaseModel):
    signature: str


class ValidateResponse(BaseModel):
    status: str  # 'accepted' | 'rejected' | 'unverifiable'
    violations: list[str] = Field(default_factory=list)
    exit_code: int


class InternalizeRequest(BaseModel):
    signature: str


class InternalizeResponse(BaseModel):
    signature: str


class EqRequest(BaseModel):
    signature: str
    query: str
    seeds: bool = True          # seed Gamma with the file's eqtype declarations
    trace: bool = False         # include a derivation / trace rendering
    max_goals: Optional[int] = None


class EqResponse(BaseModel):
    verdict: str  # 'EQUAL' | 'NOT_EQUAL' | 'UNKNOWN'
    reason: Optional[str] = None
    detail: list[str] = Field(default_factory=list)
    goals: int
    expds: int
    defs_count: int
    exit_code: int


class CheckRequest(BaseModel):
    signature: str
    max_goals: Optional[int] = None


class CheckRow(BaseModel):
    index: int
    declaration: str
    verdict: str
    reason: Optional[str] = None
    millis: float


class CheckResponse(BaseModel):
    rows: list[CheckRow]
    exit_code: int


class OracleRequest(BaseModel):
    signature: str
    query: str                  # closed: no context variables
    depth: int = 8
    numerals: int = 8


class OracleResponse(BaseModel):
    difference: Optional[str] = None  # None: no difference at this bound
    exit_code: int


class ArithRequest(BaseModel):
    formula: str


class ArithResponse(BaseModel):
    value: str  # 'true' | 'false' | 'unknown'
    reason: Optional[str] = None
    exit_code: int


class TcmEncodeRequest(BaseModel):
    machine: str
    isorec: bool = False


class TcmEncodeResponse(BaseModel):
    signature: str
    lhs: str
    rhs: str


class TcmRunRequest(BaseModel):
    machine: str
    c1: int = 0
    c2: int = 0
    max_steps: int = 10_000


class TcmRunResponse(BaseModel):
    halted: bool
    steps: int
