"""
API
---

The HTTP surface of a running platform, the only remote entry point. Third-party services
and the local dashboard authenticate with a bearer API token; every state change they ask for
becomes a ``StateChangeRequest`` stamped with its arrival time, or with the platform clock if
that is later when the platform gets to it.

.. admonition:: **Status codes**

    ===========  ==========================================================
    Code         Meaning
    ===========  ==========================================================
    200          the change was applied
    400          the value is outside the object's domain
    401          missing or unknown token
    403          the token is not granted on the object
    404          unknown AHO, device, attribute or interaction
    409          ``endorsement_denied``, ``tamper_denied`` or ``device_offline``
    ===========  ==========================================================

Notifications are only ever appended, no endpoint deletes them.
"""

from __future__ import annotations

import logging
import time
from typing import TYPE_CHECKING, Annotated

from fastapi import APIRouter, Depends, FastAPI, HTTPException, Request, status
from fastapi.responses import JSONResponse
from fastapi.security import HTTPAuthorizationCredentials, HTTPBearer
from pydantic import BaseModel, ConfigDict

from hendorse.constants import DEFAULT_LISTEN
from hendorse.errors import (
    DeviceOfflineError,
    EndorsementError,
    InvalidRequestError,
    UnknownAhoError,
    UnknownAttributeError,
    UnknownIdError,
    UnknownVerbError,
)
from hendorse.home import AttributeValue, Principal, PrincipalKind
from hendorse.monitor import AhoChange, DeviceAttributeChange, MediationStatus
from hendorse.platform import PhysicalAction, Platform

if TYPE_CHECKING:
    from collections.abc import Callable

    from hendorse.monitor import MediationOutcome

LOGGER = logging.getLogger(__name__)

_ERROR_STATUS: dict[type[EndorsementError], int] = {
    UnknownAhoError: status.HTTP_404_NOT_FOUND,
    UnknownIdError: status.HTTP_404_NOT_FOUND,
    UnknownAttributeError: status.HTTP_404_NOT_FOUND,
    UnknownVerbError: status.HTTP_404_NOT_FOUND,
    DeviceOfflineError: status.HTTP_409_CONFLICT,
    InvalidRequestError: status.HTTP_400_BAD_REQUEST,
}
_ERROR_REASON: dict[type[EndorsementError], str] = {
    DeviceOfflineError: "device_offline",
    InvalidRequestError: "invalid_request",
}
_bearer = HTTPBearer(auto_error=False)


class ValueBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    value: str


class PhysicalBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: dict[str, str] = {}


def _monotonic_ms() -> Callable[[], int]:
    start = time.monotonic_ns()
    return lambda: (time.monotonic_ns() - start) // 1_000_000


def _outcome_response(outcome: MediationOutcome) -> JSONResponse:
    """Maps a mediation outcome on its HTTP response, one status per outcome kind."""
    if outcome.status is MediationStatus.APPLIED:
        return JSONResponse({"status": outcome.status.value})
    if outcome.status is MediationStatus.DENIED_PERMISSION:
        return JSONResponse(
            {"reason": "permission_denied", "detail": outcome.reason}, status_code=status.HTTP_403_FORBIDDEN
        )
    if outcome.status is MediationStatus.DENIED_TAMPER:
        return JSONResponse({"reason": "tamper_denied", "detail": outcome.reason}, status_code=status.HTTP_409_CONFLICT)
    body = {
        "reason": "endorsement_denied",
        "failed_checks": list(outcome.decision.failed_checks) if outcome.decision is not None else [],
        "template_id": outcome.decision.template_id if outcome.decision is not None else None,
    }
    if outcome.notification is not None:
        body["notification"] = outcome.notification.seq
    return JSONResponse(body, status_code=status.HTTP_409_CONFLICT)


async def _endorsement_error(_: Request, error: EndorsementError) -> JSONResponse:
    code = _ERROR_STATUS.get(type(error), status.HTTP_400_BAD_REQUEST)
    reason = _ERROR_REASON.get(type(error), "not_found" if code == status.HTTP_404_NOT_FOUND else "bad_request")
    return JSONResponse({"reason": reason, "detail": str(error)}, status_code=code)


# ----- Dependencies ----- #


def get_platform(request: Request) -> Platform:
    return request.app.state.platform


def request_time(request: Request) -> int:
    """Arrival time of a request; the platform moves it up to its clock when mediating."""
    return request.app.state.clock()


def authenticate(
    request: Request,
    credentials: Annotated[HTTPAuthorizationCredentials | None, Depends(_bearer)],
) -> Principal:
    principal = None if credentials is None else get_platform(request).home.principal_for(credentials.credentials)
    if principal is None:
        raise HTTPException(
            status_code=status.HTTP_401_UNAUTHORIZED,
            detail="unknown token",
            headers={"WWW-Authenticate": "Bearer"},
        )
    return principal


PlatformDep = Annotated[Platform, Depends(get_platform)]
Authenticated = Annotated[Principal, Depends(authenticate)]
RequestTime = Annotated[int, Depends(request_time)]


# ----- Routes ----- #


router = APIRouter(prefix="/api")


@router.post("/aho/{name}")
def set_aho(name: str, body: ValueBody, principal: Authenticated, platform: PlatformDep, now: RequestTime) -> JSONResponse:
    if not platform.home.aho(name).accepts(body.value):
        errmsg = f"'{body.value}' is not a value of {name}"
        raise InvalidRequestError(errmsg)
    LOGGER.info(f"API: {principal} sets {name}={body.value}")
    return _outcome_response(platform.submit_live(principal, AhoChange(name, body.value), now))


@router.post("/device/{device_id}/{attribute}")
def set_attribute(
    device_id: str, attribute: str, body: ValueBody, principal: Authenticated, platform: PlatformDep, now: RequestTime
) -> JSONResponse:
    spec = platform.home.attribute_of(device_id, attribute)
    try:
        value = AttributeValue.parse(body.value)
    except ValueError as error:
        raise InvalidRequestError(str(error)) from error
    if not spec.accepts(value):
        errmsg = f"'{value}' is not a value of {spec.pair}"
        raise InvalidRequestError(errmsg)
    LOGGER.info(f"API: {principal} sets {device_id}.{attribute}={value}")
    return _outcome_response(platform.submit_live(principal, DeviceAttributeChange(device_id, attribute, value), now))


@router.post("/physical/{device_id}/{verb}")
def physical(
    device_id: str,
    verb: str,
    principal: Authenticated,
    platform: PlatformDep,
    now: RequestTime,
    body: PhysicalBody | None = None,
) -> dict:
    if principal.kind is not PrincipalKind.LOCAL_USER:
        raise HTTPException(status_code=status.HTTP_403_FORBIDDEN, detail="physical interaction needs a local token")
    params = body.params if body is not None else {}
    outcomes = platform.apply_physical(PhysicalAction(device_id, verb, params), now, catch_up=True)
    return {"status": "APPLIED", "reports": [outcome.status.value for outcome in outcomes]}


@router.get("/states")
def states(_: Authenticated, platform: PlatformDep) -> dict:
    return {"time": platform.clock.now, "ahos": platform.aho_states(), "devices": platform.device_states()}


@router.get("/notifications")
def notifications(_: Authenticated, platform: PlatformDep) -> list[dict]:
    return [notification.to_dict() for notification in platform.monitor.notifications]


# ----- Application ----- #


def create_app(platform: Platform, time_source: Callable[[], int] | None = None) -> FastAPI:
    """
    Builds the FastAPI application serving ``platform``.

    Args:
        platform (Platform): the booted platform, shared by all requests.
        time_source (Callable[[], int]): logical time of incoming requests in milliseconds.
            Defaults to the milliseconds elapsed on a monotonic timer since this call. The
            platform clock is never moved backwards by it.

    Returns:
        The ``FastAPI`` application.
    """
    app = FastAPI(title="home-endorse", description="Endorsement-mediated smart-home API")
    app.state.platform = platform
    app.state.clock = time_source or _monotonic_ms()
    app.add_exception_handler(EndorsementError, _endorsement_error)
    app.include_router(router)
    return app


def parse_listen(listen: str) -> tuple[str, int]:
    """Splits ``host:port``, raising ``ValueError`` on a missing or invalid port."""
    host, sep, port = listen.rpartition(":")
    if not sep or not host or not port.isdigit():
        errmsg = f"Listen address must look like host:port, got '{listen}'"
        raise ValueError(errmsg)
    return host, int(port)


def serve(platform: Platform, listen: str = DEFAULT_LISTEN) -> None:
    """Serves the platform over HTTP until interrupted."""
    import uvicorn

    host, port = parse_listen(listen)
    LOGGER.info(f"Serving home '{platform.config.name}' on http://{host}:{port}")
    uvicorn.run(create_app(platform), host=host, port=port, log_level="info")
