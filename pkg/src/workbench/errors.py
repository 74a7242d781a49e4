"""Error hierarchy shared by every workbench subsystem.

Each error carries the HTTP status the REST layer should answer with, so
handlers can map exceptions to responses mechanically.
"""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base class for all workbench errors."""

    http_status = 500

    @property
    def code(self) -> str:
        return type(self).__name__


# --- validation -------------------------------------------------------------

class InvalidName(WorkbenchError):
    http_status = 400


class InvalidRequest(WorkbenchError):
    http_status = 400


class InvalidConfig(WorkbenchError):
    http_status = 400


class ParseError(WorkbenchError):
    http_status = 400

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class PathEscape(WorkbenchError):
    http_status = 400


class SelfShare(WorkbenchError):
    http_status = 400


class InvalidAllocatable(WorkbenchError):
    http_status = 400


class MethodUnsupported(WorkbenchError):
    http_status = 400


# --- authn / authz ----------------------------------------------------------

class Unauthorized(WorkbenchError):
    http_status = 401


class Forbidden(WorkbenchError):
    http_status = 403


class NotAMember(WorkbenchError):
    http_status = 403


# --- missing things ---------------------------------------------------------

class NoSuchProject(WorkbenchError):
    http_status = 404


class NoSuchDataset(WorkbenchError):
    http_status = 404


class NoSuchInstance(WorkbenchError):
    http_status = 404


class NoSuchReservation(WorkbenchError):
    http_status = 404


class NoSuchSession(WorkbenchError):
    http_status = 404


class NotFound(WorkbenchError):
    http_status = 404


class UnknownRoute(WorkbenchError):
    http_status = 404


class UnknownInstance(WorkbenchError):
    http_status = 404


# --- conflicts and capacity -------------------------------------------------

class DuplicateName(WorkbenchError):
    http_status = 409


class AlreadyMember(WorkbenchError):
    http_status = 409


class AlreadyRunning(WorkbenchError):
    http_status = 409


class DuplicateRoute(WorkbenchError):
    http_status = 409


class NameInUse(WorkbenchError):
    http_status = 409


class PortInUse(WorkbenchError):
    http_status = 409


class PoolExhausted(WorkbenchError):
    http_status = 409


class InsufficientResources(WorkbenchError):
    http_status = 409


class ResourceDenied(WorkbenchError):
    http_status = 409


class SessionBusy(WorkbenchError):
    http_status = 409


class SessionDead(WorkbenchError):
    http_status = 410


# --- backend failures -------------------------------------------------------

class BackendError(WorkbenchError):
    http_status = 500


class BackendUnreachable(WorkbenchError):
    http_status = 502
