"""Projects, memberships, role-based authorization, and dataset sharing.

A project is the tenancy unit: it groups users (memberships with a role),
datasets, and the per-user workspace instances. Datasets can be shared into
other projects as a metadata record only; the bytes live in exactly one
place regardless of how many projects can see them (projectfs enforces the
single-object side of that contract).

All mutations are serialized through one lock so readers always observe a
consistent membership/share table. Authorization is a pure read.
"""

from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    AlreadyMember,
    DuplicateName,
    Forbidden,
    InvalidName,
    NoSuchDataset,
    NoSuchProject,
    NotAMember,
    NotFound,
    SelfShare,
)

PROJECT_NAME_RE = re.compile(r"^[a-z0-9_]{1,63}$")
# User ids additionally forbid leading/trailing/double underscores so that
# "{project}__{user}" is an injective encoding (the separator is the only
# double underscore followed by a well-formed user id).
USER_ID_RE = re.compile(r"^[a-z0-9](?:_?[a-z0-9]){0,62}$")
DATASET_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\-]{0,63}$")

SCOPED_NAME_SEPARATOR = "__"

# Dataset every project gets at creation; holds per-user package libraries.
BUILTIN_DATASET = "DataSets"


class Role(Enum):
    DATA_OWNER = "DataOwner"
    DATA_SCIENTIST = "DataScientist"


class Action(Enum):
    START_WORKSPACE = "StartWorkspace"
    STOP_WORKSPACE = "StopWorkspace"
    READ_DATA = "ReadData"
    WRITE_DATA = "WriteData"
    QUERY_LOGS = "QueryLogs"
    ADD_MEMBER = "AddMember"
    CREATE_DATASET = "CreateDataset"
    DELETE_DATASET = "DeleteDataset"
    SHARE_DATASET = "ShareDataset"
    REVOKE_SHARE = "RevokeShare"


_DATA_SCIENTIST_ACTIONS = frozenset(
    {
        Action.START_WORKSPACE,
        Action.STOP_WORKSPACE,
        Action.READ_DATA,
        Action.WRITE_DATA,
        Action.QUERY_LOGS,
    }
)

_DATA_OWNER_ACTIONS = _DATA_SCIENTIST_ACTIONS | frozenset(
    {
        Action.ADD_MEMBER,
        Action.CREATE_DATASET,
        Action.DELETE_DATASET,
        Action.SHARE_DATASET,
        Action.REVOKE_SHARE,
    }
)

ROLE_ACTIONS: dict[Role, frozenset[Action]] = {
    Role.DATA_OWNER: _DATA_OWNER_ACTIONS,
    Role.DATA_SCIENTIST: _DATA_SCIENTIST_ACTIONS,
}


class Decision(Enum):
    ALLOW = "Allow"
    DENY = "Deny"


class Permission(Enum):
    READ_ONLY = "ReadOnly"
    READ_WRITE = "ReadWrite"


@dataclass
class Project:
    name: str
    owner: str
    created_at: float
    dataset_names: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class Membership:
    project: str
    user: str
    role: Role


@dataclass(frozen=True)
class DatasetShare:
    source_project: str
    dataset: str
    target_project: str
    permission: Permission


@dataclass(frozen=True)
class ProjectScopedIdentity:
    project: str
    user: str
    scoped_name: str


def scoped_name(project: str, user: str) -> str:
    return f"{project}{SCOPED_NAME_SEPARATOR}{user}"


@dataclass(frozen=True)
class VisibleDataset:
    """One dataset as seen from a project: local or shared in."""

    dataset: str
    origin_project: str
    permission: Permission


class Tenancy:
    """State store for projects, memberships, and dataset shares."""

    def __init__(self):
        self._lock = threading.RLock()
        self._projects: dict[str, Project] = {}
        self._memberships: dict[tuple[str, str], Membership] = {}
        self._shares: dict[tuple[str, str, str], DatasetShare] = {}
        self._dataset_create_events = 0

    # -- projects and members -------------------------------------------

    def create_project(self, name: str, owner: str) -> Project:
        if not PROJECT_NAME_RE.match(name or ""):
            raise InvalidName(f"invalid project name {name!r}")
        if not USER_ID_RE.match(owner or ""):
            raise InvalidName(f"invalid user id {owner!r}")
        with self._lock:
            if name in self._projects:
                raise DuplicateName(f"project {name!r} already exists")
            project = Project(name=name, owner=owner, created_at=time.time())
            self._projects[name] = project
            self._memberships[(name, owner)] = Membership(name, owner, Role.DATA_OWNER)
            self._register_dataset(project, BUILTIN_DATASET)
            return project

    def get_project(self, name: str) -> Project:
        with self._lock:
            project = self._projects.get(name)
            if project is None:
                raise NoSuchProject(f"no project {name!r}")
            return project

    def project_exists(self, name: str) -> bool:
        with self._lock:
            return name in self._projects

    def add_member(self, project: str, user: str, role: Role, actor: str) -> Membership:
        if not USER_ID_RE.match(user or ""):
            raise InvalidName(f"invalid user id {user!r}")
        with self._lock:
            if project not in self._projects:
                raise NoSuchProject(f"no project {project!r}")
            if self.authorize(actor, project, Action.ADD_MEMBER) is not Decision.ALLOW:
                raise Forbidden(f"{actor!r} may not add members to {project!r}")
            if (project, user) in self._memberships:
                raise AlreadyMember(f"{user!r} is already a member of {project!r}")
            membership = Membership(project, user, role)
            self._memberships[(project, user)] = membership
            return membership

    def role_of(self, project: str, user: str) -> Role | None:
        with self._lock:
            membership = self._memberships.get((project, user))
            return membership.role if membership else None

    def is_member(self, project: str, user: str) -> bool:
        return self.role_of(project, user) is not None

    def members_of(self, project: str) -> list[Membership]:
        with self._lock:
            return sorted(
                (m for (p, _), m in self._memberships.items() if p == project),
                key=lambda m: m.user,
            )

    def authorize(self, user: str, project: str, action: Action) -> Decision:
        """Pure decision over the membership table; Deny is a value."""
        with self._lock:
            membership = self._memberships.get((project, user))
        if membership is None:
            return Decision.DENY
        if action in ROLE_ACTIONS[membership.role]:
            return Decision.ALLOW
        return Decision.DENY

    def scoped_identity(self, project: str, user: str) -> ProjectScopedIdentity:
        with self._lock:
            if (project, user) not in self._memberships:
                raise NotAMember(f"{user!r} is not a member of {project!r}")
        return ProjectScopedIdentity(project, user, scoped_name(project, user))

    # -- datasets and shares ----------------------------------------------

    def _register_dataset(self, project: Project, dataset: str) -> None:
        project.dataset_names.add(dataset)
        self._dataset_create_events += 1

    def create_dataset(self, project: str, dataset: str, actor: str) -> str:
        if not DATASET_NAME_RE.match(dataset or ""):
            raise InvalidName(f"invalid dataset name {dataset!r}")
        with self._lock:
            proj = self._projects.get(project)
            if proj is None:
                raise NoSuchProject(f"no project {project!r}")
            if self.authorize(actor, project, Action.CREATE_DATASET) is not Decision.ALLOW:
                raise Forbidden(f"{actor!r} may not create datasets in {project!r}")
            if dataset in proj.dataset_names:
                raise DuplicateName(f"dataset {dataset!r} already exists in {project!r}")
            self._register_dataset(proj, dataset)
            return dataset

    def delete_dataset(self, project: str, dataset: str, actor: str) -> None:
        with self._lock:
            proj = self._projects.get(project)
            if proj is None:
                raise NoSuchProject(f"no project {project!r}")
            if self.authorize(actor, project, Action.DELETE_DATASET) is not Decision.ALLOW:
                raise Forbidden(f"{actor!r} may not delete datasets in {project!r}")
            if dataset not in proj.dataset_names:
                raise NoSuchDataset(f"no dataset {dataset!r} in {project!r}")
            proj.dataset_names.discard(dataset)
            for key in [k for k in self._shares if k[0] == project and k[1] == dataset]:
                del self._shares[key]

    def dataset_exists(self, project: str, dataset: str) -> bool:
        with self._lock:
            proj = self._projects.get(project)
            return proj is not None and dataset in proj.dataset_names

    def share_dataset(
        self,
        source: str,
        dataset: str,
        target: str,
        permission: Permission,
        actor: str,
    ) -> DatasetShare:
        with self._lock:
            if source == target:
                raise SelfShare(f"cannot share {dataset!r} with its own project")
            src = self._projects.get(source)
            if src is None:
                raise NoSuchProject(f"no project {source!r}")
            if target not in self._projects:
                raise NoSuchProject(f"no project {target!r}")
            if self.role_of(source, actor) is not Role.DATA_OWNER:
                raise Forbidden(f"{actor!r} is not a DataOwner of {source!r}")
            if dataset not in src.dataset_names:
                raise NoSuchDataset(f"no dataset {dataset!r} in {source!r}")
            share = DatasetShare(source, dataset, target, permission)
            # Re-sharing updates the permission; there is still one record.
            self._shares[(source, dataset, target)] = share
            return share

    def revoke_share(self, source: str, dataset: str, target: str, actor: str) -> None:
        with self._lock:
            if self.role_of(source, actor) is not Role.DATA_OWNER:
                raise Forbidden(f"{actor!r} is not a DataOwner of {source!r}")
            share = self._shares.pop((source, dataset, target), None)
            if share is None:
                raise NotFound(f"no share of {source!r}/{dataset!r} with {target!r}")

    def shares_into(self, target: str) -> list[DatasetShare]:
        with self._lock:
            return sorted(
                (s for s in self._shares.values() if s.target_project == target),
                key=lambda s: (s.dataset, s.source_project),
            )

    def share_for(self, target: str, source: str, dataset: str) -> DatasetShare | None:
        with self._lock:
            return self._shares.get((source, dataset, target))

    def visible_datasets(self, project: str) -> list[VisibleDataset]:
        """Local datasets (ReadWrite) plus shared-in ones with their grant."""
        with self._lock:
            proj = self._projects.get(project)
            if proj is None:
                raise NoSuchProject(f"no project {project!r}")
            local = [
                VisibleDataset(name, project, Permission.READ_WRITE)
                for name in sorted(proj.dataset_names)
            ]
            shared = [
                VisibleDataset(s.dataset, s.source_project, s.permission)
                for s in self.shares_into(project)
            ]
            return local + shared

    @property
    def dataset_create_events(self) -> int:
        with self._lock:
            return self._dataset_create_events
