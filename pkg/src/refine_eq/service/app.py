"""The checking service.

Every endpoint is stateless: requests carry the signature text, responses
carry verdicts and renderings, so any number of clients can share one
instance.  Exit codes mirror the CLI convention: 0 accepted/equal, 1
violations/not-equal, 2 unknown/unverifiable.
"""

from __future__ import annotations

import time

from fastapi import FastAPI, HTTPException

from .. import __version__, arith, oracle, tcm
from ..core import Signature, TOP, Top, free_arith_vars
from ..equality import check_eq_decl, render_verdict, type_equal, verdict_name
from ..naming import InternalizedSignature, internalize
from ..syntax import (
    ParseError, parse_formula, parse_query, parse_signature, print_eqdecl,
    print_signature, print_type,
)
from ..validity import check_signature, check_type
from .models import (
    ArithRequest, ArithResponse, CheckRequest, CheckResponse, CheckRow,
    EqRequest, EqResponse, InternalizeRequest, InternalizeResponse,
    OracleRequest, OracleResponse, TcmEncodeRequest, TcmEncodeResponse,
    TcmRunRequest, TcmRunResponse, ValidateRequest, ValidateResponse,
)

_EXIT = {"EQUAL": 0, "NOT_EQUAL": 1, "UNKNOWN": 2}


def _bad(detail: str | list[str]) -> HTTPException:
    if isinstance(detail, list):
        detail = "\n".join(detail)
    return HTTPException(status_code=400, detail=detail)


def _load_signature(text: str) -> Signature:
    result = parse_signature(text)
    if result.signature is None:
        raise _bad([str(d) for d in result.diagnostics])
    return result.signature


def _load_accepted(text: str) -> tuple[Signature, InternalizedSignature]:
    sig = _load_signature(text)
    report = check_signature(sig)
    if not report.ok:
        raise _bad("signature not valid:\n" + report.render())
    return sig, internalize(sig)


def create_app() -> FastAPI:
    app = FastAPI(title="refine-eq", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest) -> ValidateResponse:
        result = parse_signature(req.signature)
        if result.signature is None:
            return ValidateResponse(
                status="rejected",
                violations=[str(d) for d in result.diagnostics],
                exit_code=1)
        report = check_signature(result.signature)
        if report.ok:
            return ValidateResponse(status="accepted", exit_code=0)
        status = "unverifiable" if report.unverifiable else "rejected"
        return ValidateResponse(
            status=status,
            violations=[v.render() for v in report.violations],
            exit_code=2 if report.unverifiable else 1)

    @app.post("/internalize", response_model=InternalizeResponse)
    def internalize_endpoint(req: InternalizeRequest) -> InternalizeResponse:
        _, isig = _load_accepted(req.signature)
        return InternalizeResponse(signature=print_signature(isig.signature))

    @app.post("/eq", response_model=EqResponse)
    def eq(req: EqRequest) -> EqResponse:
        sig, isig = _load_accepted(req.signature)
        try:
            vars_, constraint, lhs, rhs = parse_query(req.query, sig)
        except ParseError as err:
            raise _bad(f"query: {err.diagnostic}") from None
        for side in (lhs, rhs):
            report = check_type(vars_, constraint, side, sig)
            if not report.ok:
                raise _bad("query type not valid:\n" + report.render())
        result = type_equal(isig, vars_, constraint, lhs, rhs,
                            seeds=None if req.seeds else (),
                            max_goals=req.max_goals)
        name = verdict_name(result.verdict)
        reason = getattr(result.verdict, "reason", None)
        detail = render_verdict(result, req.trace)
        return EqResponse(verdict=name, reason=reason, detail=detail,
                          goals=result.goals, expds=result.expds,
                          defs_count=result.defs_count,
                          exit_code=_EXIT[name])

    @app.post("/check", response_model=CheckResponse)
    def check(req: CheckRequest) -> CheckResponse:
        sig, isig = _load_accepted(req.signature)
        rows: list[CheckRow] = []
        worst = 0
        for i, decl in enumerate(sig.eqdecls):
            t0 = time.perf_counter()
            result = check_eq_decl(isig, i, req.max_goals)
            millis = (time.perf_counter() - t0) * 1000.0
            name = verdict_name(result.verdict)
            worst = max(worst, _EXIT[name])
            rows.append(CheckRow(
                index=i + 1,
                declaration=print_eqdecl(decl),
                verdict=name,
                reason=getattr(result.verdict, "reason", None),
                millis=millis))
        return CheckResponse(rows=rows, exit_code=worst)

    @app.post("/oracle", response_model=OracleResponse)
    def oracle_endpoint(req: OracleRequest) -> OracleResponse:
        sig = _load_signature(req.signature)
        report = check_signature(sig)
        if not report.ok:
            raise _bad("signature not valid:\n" + report.render())
        try:
            vars_, constraint, lhs, rhs = parse_query(req.query, sig)
        except ParseError as err:
            raise _bad(f"query: {err.diagnostic}") from None
        if vars_ or not isinstance(constraint, Top):
            raise _bad("the oracle takes closed queries (no context)")
        for side in (lhs, rhs):
            rep = check_type((), TOP, side, sig)
            if not rep.ok:
                raise _bad("query type not valid:\n" + rep.render())
        trace = oracle.bisim_bounded(sig, lhs, rhs, req.depth, req.numerals)
        if trace is None:
            return OracleResponse(difference=None, exit_code=0)
        return OracleResponse(difference=trace.render(), exit_code=1)

    @app.post("/arith", response_model=ArithResponse)
    def arith_endpoint(req: ArithRequest) -> ArithResponse:
        try:
            prop = parse_formula(req.formula)
        except ParseError as err:
            raise _bad(f"formula: {err.diagnostic}") from None
        free = free_arith_vars(prop)
        if free:
            raise _bad("formula must be closed; free: " + ", ".join(sorted(free)))
        try:
            value = arith.decide_closed(prop)
        except arith.NonLinearError:
            return ArithResponse(value="unknown", reason="non-linear", exit_code=2)
        except arith.BudgetExceeded:
            return ArithResponse(value="unknown", reason="resource-limit", exit_code=2)
        return ArithResponse(value="true" if value else "false",
                             exit_code=0 if value else 1)

    @app.post("/tcm/encode", response_model=TcmEncodeResponse)
    def tcm_encode(req: TcmEncodeRequest) -> TcmEncodeResponse:
        try:
            machine = tcm.parse_machine(req.machine)
        except ValueError as err:
            raise _bad(f"machine: {err}") from None
        sig, lhs, rhs = tcm.encode(machine, isorec=req.isorec)
        return TcmEncodeResponse(signature=print_signature(sig),
                                 lhs=print_type(lhs), rhs=print_type(rhs))

    @app.post("/tcm/run", response_model=TcmRunResponse)
    def tcm_run(req: TcmRunRequest) -> TcmRunResponse:
        try:
            machine = tcm.parse_machine(req.machine)
        except ValueError as err:
            raise _bad(f"machine: {err}") from None
        if req.c1 < 0 or req.c2 < 0 or req.max_steps < 0:
            raise _bad("counters and step bound must be non-negative")
        result = tcm.run(machine, req.c1, req.c2, req.max_steps)
        return TcmRunResponse(halted=result.halted, steps=result.steps)

    return app
