from __future__ import annotations

from fastapi import FastAPI, Path, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..engine import RANGE_CAP, Engine
from ..errors import BlockBeyondHead, ReliablocksError, UnknownTask
from .schemas import ErrorOut, HealthOut, OperatorOut, ScoreOut, TaskIn, TaskOut

HTTP_STATUS = {"not_found": 404, "beyond_head": 422, "bad_request": 400, "internal": 500}


class ApiError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        self.http_status = HTTP_STATUS[code]
        super().__init__(message)


def _error(code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=HTTP_STATUS[code], content=ErrorOut(code=code, message=message).model_dump()
    )


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="reliablocks", version="0.1.0")
    app.state.engine = engine
    errors = {404: {"model": ErrorOut}, 422: {"model": ErrorOut}, 400: {"model": ErrorOut}}

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return _error(exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def _validation(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        where = ".".join(str(x) for x in first.get("loc", ()))
        return _error("bad_request", f"{where}: {first.get('msg', 'invalid request')}")

    @app.exception_handler(BlockBeyondHead)
    async def _beyond(request: Request, exc: BlockBeyondHead):
        return _error("beyond_head", str(exc))

    @app.exception_handler(UnknownTask)
    async def _unknown_task(request: Request, exc: UnknownTask):
        return _error("not_found", f"unknown task {exc}")

    @app.exception_handler(ReliablocksError)
    async def _domain(request: Request, exc: ReliablocksError):
        return _error("bad_request", str(exc))

    @app.exception_handler(Exception)
    async def _internal(request: Request, exc: Exception):
        return _error("internal", "internal error")

    @app.get("/v1/health", response_model=HealthOut)
    def health():
        return engine.health()

    @app.get("/v1/score/{block}", response_model=ScoreOut, responses=errors)
    def score(block: int = Path(ge=0)):
        return engine.score(block)

    @app.get("/v1/scores", response_model=list[ScoreOut], responses=errors)
    def scores(
        from_: int = Query(alias="from", ge=0),
        to: int = Query(ge=0),
    ):
        if from_ > to:
            raise ApiError("bad_request", f"inverted range {from_}..{to}")
        if to - from_ > RANGE_CAP:
            raise ApiError("bad_request", f"range wider than {RANGE_CAP} blocks")
        return engine.scores(from_, to)

    @app.post("/v1/tasks", response_model=TaskOut, status_code=201, responses=errors)
    def post_task(body: TaskIn):
        return engine.create_task(body.l2_block)

    @app.get("/v1/tasks/{task_id}", response_model=TaskOut, responses=errors)
    def get_task(task_id: str):
        return engine.get_task(task_id)

    @app.get("/v1/operators", response_model=list[OperatorOut])
    def operators():
        return engine.operators()

    return app
