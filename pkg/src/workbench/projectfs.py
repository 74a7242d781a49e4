"""Persistent project filesystem with share-without-copy visibility.

Files live in a host-directory-backed object store: one blob per logical
file, addressed by an opaque object id, with an in-memory index mapping
(owner project, dataset, relative path) to that id. Sharing a dataset into
another project adds a metadata edge in tenancy; no blob is ever copied.
The store outlives workspace instances, which is what makes workspace
stop/start loss-free.

Permission checks happen on every read/write against the live share table,
so revoking a share takes effect immediately even for existing views.
"""

from __future__ import annotations

import os
import posixpath
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .errors import Forbidden, NotFound, PathEscape
from .tenancy import (
    BUILTIN_DATASET,
    Permission,
    ProjectScopedIdentity,
    Tenancy,
    VisibleDataset,
)

PROJECTS_ROOT = "/Projects"


@dataclass(frozen=True)
class StoredObject:
    """Metadata for one stored blob; content lives on disk."""

    object_id: str
    owner_project: str
    dataset: str
    relpath: str

    @property
    def logical_path(self) -> str:
        return f"{PROJECTS_ROOT}/{self.owner_project}/{self.dataset}/{self.relpath}"


@dataclass(frozen=True)
class MountView:
    """A project-scoped window onto the store for one member.

    Creating a view copies no data; ``visible_datasets`` is the snapshot at
    mount time, while access checks are re-evaluated per operation.
    """

    project: str
    identity: ProjectScopedIdentity
    root: str
    visible_datasets: tuple[VisibleDataset, ...]


@dataclass
class GcReport:
    object_count: int
    unreachable: list[str] = field(default_factory=list)
    duplicates: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.unreachable and not self.duplicates


@dataclass
class _DatasetTree:
    files: dict[str, str] = field(default_factory=dict)  # relpath -> object_id
    dirs: set[str] = field(default_factory=set)


class ProjectFS:
    def __init__(self, tenancy: Tenancy, root_dir: str | Path):
        self._tenancy = tenancy
        self._root = Path(root_dir)
        self._blob_dir = self._root / "objects"
        self._tmp_dir = self._root / "tmp"
        self._blob_dir.mkdir(parents=True, exist_ok=True)
        self._tmp_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._trees: dict[tuple[str, str], _DatasetTree] = {}
        self._objects: dict[str, StoredObject] = {}
        self._project_roots: set[str] = set()

    # -- tree lifecycle (driven by the control plane) ---------------------

    def ensure_project_root(self, project: str) -> None:
        with self._lock:
            self._project_roots.add(project)
            self._trees.setdefault((project, BUILTIN_DATASET), _DatasetTree())

    def ensure_dataset(self, project: str, dataset: str) -> None:
        with self._lock:
            self._trees.setdefault((project, dataset), _DatasetTree())

    def drop_dataset(self, project: str, dataset: str) -> None:
        with self._lock:
            tree = self._trees.pop((project, dataset), None)
            if tree is None:
                return
            for object_id in tree.files.values():
                self._objects.pop(object_id, None)
                blob = self._blob_dir / object_id
                if blob.exists():
                    blob.unlink()

    # -- views -------------------------------------------------------------

    def mount_view(self, project: str, user: str) -> MountView:
        identity = self._tenancy.scoped_identity(project, user)  # NotAMember if not
        visible = tuple(self._tenancy.visible_datasets(project))
        return MountView(
            project=project,
            identity=identity,
            root=f"{PROJECTS_ROOT}/{project}",
            visible_datasets=visible,
        )

    def _normalize(self, view: MountView, path: str) -> str:
        """Return the path relative to the view root, refusing escapes."""
        raw = path.strip()
        if raw.startswith("/"):
            norm = posixpath.normpath(raw)
            prefix = view.root + "/"
            if norm != view.root and not norm.startswith(prefix):
                raise PathEscape(f"{path!r} resolves outside {view.root}")
            rel = norm[len(prefix):] if norm != view.root else ""
        else:
            rel = posixpath.normpath(raw)
            if rel == ".":
                rel = ""
        if rel == ".." or rel.startswith("../") or rel.startswith("/"):
            raise PathEscape(f"{path!r} resolves outside {view.root}")
        return rel

    def _visibility(self, view: MountView, dataset: str) -> tuple[str, Permission]:
        """Resolve a dataset name to (origin project, live permission).

        Local datasets win over shared-in ones with the same name. A dataset
        that exists somewhere but is not (or no longer) visible yields
        Forbidden; an unknown name yields NotFound.
        """
        project = self._tenancy.get_project(view.project)
        if dataset in project.dataset_names:
            return view.project, Permission.READ_WRITE
        for share in self._tenancy.shares_into(view.project):
            if share.dataset == dataset:
                return share.source_project, share.permission
        with self._lock:
            known = any(d == dataset for (_, d) in self._trees)
        if known:
            raise Forbidden(f"dataset {dataset!r} is not visible to {view.project!r}")
        raise NotFound(f"no dataset {dataset!r} visible to {view.project!r}")

    def _resolve_file(self, view: MountView, path: str) -> tuple[str, str, str, Permission]:
        rel = self._normalize(view, path)
        if "/" not in rel:
            raise NotFound(f"{path!r} is not a file inside a dataset")
        dataset, relpath = rel.split("/", 1)
        origin, permission = self._visibility(view, dataset)
        return origin, dataset, relpath, permission

    # -- file operations -----------------------------------------------------

    def read(self, view: MountView, path: str) -> bytes:
        origin, dataset, relpath, _ = self._resolve_file(view, path)
        with self._lock:
            tree = self._trees.get((origin, dataset))
            object_id = tree.files.get(relpath) if tree else None
        if object_id is None:
            raise NotFound(f"no file {path!r}")
        return (self._blob_dir / object_id).read_bytes()

    def write(self, view: MountView, path: str, data: bytes) -> StoredObject:
        origin, dataset, relpath, permission = self._resolve_file(view, path)
        if permission is not Permission.READ_WRITE:
            raise Forbidden(f"dataset {dataset!r} is read-only for {view.project!r}")
        with self._lock:
            tree = self._trees.setdefault((origin, dataset), _DatasetTree())
            object_id = tree.files.get(relpath)
            if object_id is None:
                object_id = uuid.uuid4().hex
                tree.files[relpath] = object_id
                self._objects[object_id] = StoredObject(object_id, origin, dataset, relpath)
            parent = posixpath.dirname(relpath)
            while parent:
                tree.dirs.add(parent)
                parent = posixpath.dirname(parent)
            meta = self._objects[object_id]
        # Atomic content swap: readers see the old or the new bytes, never a mix.
        tmp = self._tmp_dir / f"{object_id}.{uuid.uuid4().hex}"
        tmp.write_bytes(data)
        os.replace(tmp, self._blob_dir / object_id)
        return meta

    def mkdir(self, view: MountView, path: str) -> None:
        origin, dataset, relpath, permission = self._resolve_file(view, path)
        if permission is not Permission.READ_WRITE:
            raise Forbidden(f"dataset {dataset!r} is read-only for {view.project!r}")
        with self._lock:
            tree = self._trees.setdefault((origin, dataset), _DatasetTree())
            while relpath:
                tree.dirs.add(relpath)
                relpath = posixpath.dirname(relpath)

    def list_dir(self, view: MountView, path: str = "") -> list[str]:
        rel = self._normalize(view, path)
        if not rel:
            seen: list[str] = []
            for vd in view.visible_datasets:
                if vd.dataset not in seen:
                    seen.append(vd.dataset)
            return sorted(seen)
        if "/" in rel:
            dataset, sub = rel.split("/", 1)
        else:
            dataset, sub = rel, ""
        origin, _ = self._visibility(view, dataset)
        prefix = f"{sub}/" if sub else ""
        with self._lock:
            tree = self._trees.get((origin, dataset))
            if tree is None:
                raise NotFound(f"no dataset {dataset!r}")
            if sub and sub not in tree.dirs:
                raise NotFound(f"no directory {path!r}")
            names = set()
            for candidate in list(tree.files) + list(tree.dirs):
                if candidate.startswith(prefix) and candidate != sub:
                    names.add(candidate[len(prefix):].split("/", 1)[0])
        return sorted(names)

    def exists(self, view: MountView, path: str) -> bool:
        try:
            origin, dataset, relpath, _ = self._resolve_file(view, path)
        except (NotFound, PathEscape):
            return False
        with self._lock:
            tree = self._trees.get((origin, dataset))
            return bool(tree and (relpath in tree.files or relpath in tree.dirs))

    def package_lib_path(self, view: MountView) -> str:
        """Per-user package library inside the built-in dataset, auto-created."""
        rel = f"{BUILTIN_DATASET}/Rstudio/.Rpackages/{view.identity.scoped_name}"
        self.mkdir(view, rel)
        return f"{view.root}/{rel}"

    # -- introspection for invariants --------------------------------------

    def object_count(self) -> int:
        with self._lock:
            return len(self._objects)

    def objects_snapshot(self) -> list[StoredObject]:
        with self._lock:
            return sorted(self._objects.values(), key=lambda o: o.logical_path)

    def object_content(self, object_id: str) -> bytes:
        return (self._blob_dir / object_id).read_bytes()

    def gc_check(self) -> GcReport:
        """Cross-check index, object table, and blobs from first principles."""
        with self._lock:
            referenced: dict[str, list[str]] = {}
            path_to_objects: dict[tuple[str, str, str], list[str]] = {}
            for (project, dataset), tree in self._trees.items():
                for relpath, object_id in tree.files.items():
                    referenced.setdefault(object_id, []).append(
                        f"{PROJECTS_ROOT}/{project}/{dataset}/{relpath}"
                    )
                    path_to_objects.setdefault((project, dataset, relpath), []).append(object_id)
            known = set(self._objects)
        on_disk = {p.name for p in self._blob_dir.iterdir()}
        unreachable = sorted((known | on_disk) - set(referenced))
        duplicates = sorted(
            f"{PROJECTS_ROOT}/{p}/{d}/{r}"
            for (p, d, r), ids in path_to_objects.items()
            if len(set(ids)) > 1
        )
        return GcReport(
            object_count=len(known),
            unreachable=unreachable,
            duplicates=duplicates,
        )
