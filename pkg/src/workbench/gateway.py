"""Compute-session gateway: session lifecycle over a toy statement language.

Sessions follow the not_started -> starting -> idle <-> busy lifecycle with
dead reachable from anywhere. Statement code is arithmetic (+ - * / with
parentheses, unicode aliases accepted) evaluated by a small recursive
descent parser, which keeps the whole session protocol deterministic and
testable without any real compute cluster behind it.

Admission is budgeted: a session commits driver plus executor memory and
cores against a configurable gateway budget until it dies.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .errors import (
    MethodUnsupported,
    NoSuchSession,
    ResourceDenied,
    SessionBusy,
    SessionDead,
    Unauthorized,
)
from .sparkconfig import CONNECT_METHOD, SparkSessionConfig, size_to_mib
from .tenancy import Role, Tenancy


# --- statement evaluator ------------------------------------------------------

class StatementError(ValueError):
    """Raised for malformed or unevaluable statement code."""


_ALIASES = str.maketrans({"×": "*", "÷": "/", "−": "-"})


def _tokenize(code: str) -> list[str]:
    text = code.translate(_ALIASES)
    tokens: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "+-*/()":
            tokens.append(ch)
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < len(text) and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            number = text[i:j]
            if number == ".":
                raise StatementError(f"bad number at position {i}")
            tokens.append(number)
            i = j
        else:
            raise StatementError(f"unexpected character {ch!r} at position {i}")
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        token = self.peek()
        if token is None:
            raise StatementError("unexpected end of expression")
        self.pos += 1
        return token

    def expr(self):
        value = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self):
        value = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take()
            rhs = self.factor()
            if op == "*":
                value = value * rhs
            else:
                if rhs == 0:
                    raise StatementError("division by zero")
                if isinstance(value, int) and isinstance(rhs, int) and value % rhs == 0:
                    value = value // rhs
                else:
                    value = value / rhs
        return value

    def factor(self):
        token = self.take()
        if token == "-":
            return -self.factor()
        if token == "(":
            value = self.expr()
            if self.take() != ")":
                raise StatementError("expected closing parenthesis")
            return value
        if token in "+*/()":
            raise StatementError(f"unexpected token {token!r}")
        return float(token) if "." in token else int(token)


def evaluate(code: str) -> str:
    """Evaluate arithmetic code to its printed result. Deterministic."""
    if not code or not code.strip():
        raise StatementError("empty statement")
    parser = _Parser(_tokenize(code))
    value = parser.expr()
    if parser.peek() is not None:
        raise StatementError(f"unexpected token {parser.peek()!r}")
    return repr(value)


# --- sessions ------------------------------------------------------------------

class SessionState(Enum):
    NOT_STARTED = "not_started"
    STARTING = "starting"
    IDLE = "idle"
    BUSY = "busy"
    DEAD = "dead"


class StatementState(Enum):
    WAITING = "waiting"
    RUNNING = "running"
    AVAILABLE = "available"
    ERROR = "error"


LEGAL_SESSION_TRANSITIONS = frozenset(
    {
        (SessionState.NOT_STARTED, SessionState.STARTING),
        (SessionState.STARTING, SessionState.IDLE),
        (SessionState.IDLE, SessionState.BUSY),
        (SessionState.BUSY, SessionState.IDLE),
    }
    | {(s, SessionState.DEAD) for s in SessionState if s is not SessionState.DEAD}
)


@dataclass
class Statement:
    id: int
    code: str
    state: StatementState
    output: str | None = None

    def to_dict(self) -> dict:
        return {"id": self.id, "code": self.code, "state": self.state.value, "output": self.output}


@dataclass
class Session:
    id: int
    project: str
    user: str
    state: SessionState
    config: SparkSessionConfig
    statements: list[Statement] = field(default_factory=list)
    ready_at: float = 0.0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "project": self.project,
            "user": self.user,
            "state": self.state.value,
            "config": self.config.to_dict(),
            "statements": [s.to_dict() for s in self.statements],
        }


TokenResolver = Callable[[str], Optional[tuple[str, str]]]


class SparkGateway:
    """Session registry plus budgeted admission and statement execution."""

    def __init__(
        self,
        token_resolver: TokenResolver,
        tenancy: Tenancy | None = None,
        budget_mem_mib: int = 65536,
        budget_cores: int = 64,
        startup_delay: float = 0.0,
    ):
        self._resolve_token = token_resolver
        self._tenancy = tenancy
        self.budget_mem_mib = budget_mem_mib
        self.budget_cores = budget_cores
        self.startup_delay = startup_delay
        self._lock = threading.RLock()
        self._sessions: dict[int, Session] = {}
        self._next_id = 0
        self._committed_mem = 0
        self._committed_cores = 0
        self._transitions: list[tuple[int, SessionState, SessionState]] = []

    # -- internals -------------------------------------------------------

    def _transition(self, session: Session, to: SessionState) -> None:
        self._transitions.append((session.id, session.state, to))
        session.state = to

    def _refresh(self, session: Session) -> None:
        if session.state is SessionState.STARTING and time.monotonic() >= session.ready_at:
            self._transition(session, SessionState.IDLE)

    def _get(self, session_id: int) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise NoSuchSession(f"no session {session_id}")
        return session

    def _authorize_owner(self, session: Session, token: str) -> None:
        owner = self._resolve_token(token) if token else None
        if owner != (session.project, session.user):
            raise Unauthorized("token does not own this session")

    @staticmethod
    def _needs(cfg: SparkSessionConfig) -> tuple[int, int]:
        mem = size_to_mib(cfg.driver_memory) + cfg.num_executors * size_to_mib(cfg.executor_memory)
        cores = cfg.driver_cores + cfg.num_executors * cfg.executor_cores
        return mem, cores

    # -- operations --------------------------------------------------------

    def connect(self, cfg: SparkSessionConfig, token: str) -> Session:
        cfg.validate()
        if cfg.method != CONNECT_METHOD:
            raise MethodUnsupported(
                f"gateway only manages method={CONNECT_METHOD!r}, got {cfg.method!r}"
            )
        owner = self._resolve_token(token) if token else None
        if owner is None:
            raise Unauthorized("token is not bound to a live workspace")
        mem, cores = self._needs(cfg)
        with self._lock:
            if (
                self._committed_mem + mem > self.budget_mem_mib
                or self._committed_cores + cores > self.budget_cores
            ):
                raise ResourceDenied(
                    f"session needs {mem} MiB / {cores} cores; "
                    f"committed {self._committed_mem}/{self.budget_mem_mib} MiB, "
                    f"{self._committed_cores}/{self.budget_cores} cores"
                )
            self._committed_mem += mem
            self._committed_cores += cores
            self._next_id += 1
            session = Session(
                id=self._next_id,
                project=owner[0],
                user=owner[1],
                state=SessionState.NOT_STARTED,
                config=cfg,
                ready_at=time.monotonic() + self.startup_delay,
            )
            self._sessions[session.id] = session
            self._transition(session, SessionState.STARTING)
            self._refresh(session)
            return session

    def get_session(self, session_id: int, token: str) -> Session:
        with self._lock:
            session = self._get(session_id)
            self._authorize_owner(session, token)
            self._refresh(session)
            return session

    def submit_statement(self, session_id: int, code: str, token: str) -> Statement:
        with self._lock:
            session = self._get(session_id)
            self._authorize_owner(session, token)
            self._refresh(session)
            if session.state is SessionState.DEAD:
                raise SessionDead(f"session {session_id} is dead")
            if session.state is not SessionState.IDLE:
                raise SessionBusy(f"session {session_id} is {session.state.value}")
            statement = Statement(
                id=len(session.statements) + 1, code=code, state=StatementState.RUNNING
            )
            session.statements.append(statement)
            self._transition(session, SessionState.BUSY)
        try:
            output = evaluate(code)
        except StatementError as exc:
            result_state, output = StatementState.ERROR, str(exc)
        else:
            result_state = StatementState.AVAILABLE
        with self._lock:
            statement.state = result_state
            statement.output = output
            if session.state is SessionState.BUSY:
                self._transition(session, SessionState.IDLE)
            return statement

    def get_statement(self, session_id: int, statement_id: int, token: str) -> Statement:
        with self._lock:
            session = self._get(session_id)
            self._authorize_owner(session, token)
            for statement in session.statements:
                if statement.id == statement_id:
                    return statement
            raise NoSuchSession(f"no statement {statement_id} in session {session_id}")

    def close_session(self, session_id: int, token: str) -> None:
        with self._lock:
            session = self._get(session_id)
            owner = self._resolve_token(token) if token else None
            allowed = owner == (session.project, session.user)
            if not allowed and owner is not None and self._tenancy is not None:
                allowed = self._tenancy.role_of(session.project, owner[1]) is Role.DATA_OWNER
            if not allowed:
                raise Unauthorized("token may not close this session")
            self._refresh(session)
            if session.state is SessionState.DEAD:
                raise NoSuchSession(f"session {session_id} is already closed")
            mem, cores = self._needs(session.config)
            self._committed_mem -= mem
            self._committed_cores -= cores
            self._transition(session, SessionState.DEAD)

    def transitions_snapshot(self) -> list[tuple[int, SessionState, SessionState]]:
        with self._lock:
            return list(self._transitions)
