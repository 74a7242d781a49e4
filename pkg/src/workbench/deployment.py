"""Declarative workspace deployment documents.

A deployment describes one user's workspace: a single replica with two
containers (the workspace server and its log collector), an immutable
config document, a secret holding the instance token, and a NodePort-style
service mapping an external port onto the fixed internal port 8787.

Rendering is a pure function: the same request, placement, port, and token
always produce a byte-identical serialized document. The config and secret
types reject mutation after construction, so a rendered spec cannot drift.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from types import MappingProxyType
from typing import TYPE_CHECKING, Mapping

import yaml

from .errors import InvalidRequest
from .sparkconfig import SparkSessionConfig, render_config_yml
from .tenancy import scoped_name

if TYPE_CHECKING:
    from .workspaces import WorkspaceRequest

INTERNAL_PORT = 8787

CONTAINER_ROLE_WORKSPACE = "workspace"
CONTAINER_ROLE_LOGCOLLECTOR = "logcollector"


def deployment_name(project: str, user: str) -> str:
    """Kubernetes-mode name for a user's workspace deployment."""
    return f"rstudio_{project}_{user}"


def container_name(project: str, user: str) -> str:
    """Docker-mode name: the project-scoped user name plus suffix."""
    return f"{scoped_name(project, user)}_rstudio"


@dataclass(frozen=True)
class ImmutableConfigMap:
    entries: Mapping[str, str]
    immutable: bool = True

    def __post_init__(self):
        if not self.immutable:
            raise InvalidRequest("config map must be immutable")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))


@dataclass(frozen=True)
class SecretSpec:
    entries: Mapping[str, bytes]

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))


@dataclass(frozen=True)
class ContainerSpec:
    name: str
    role: str


@dataclass(frozen=True)
class ServiceSpec:
    node_port: int
    type: str = "NodePort"
    target_port: int = INTERNAL_PORT


@dataclass(frozen=True)
class DeploymentSpec:
    namespace: str
    name: str
    containers: tuple[ContainerSpec, ...]
    config_map: ImmutableConfigMap
    secret: SecretSpec
    service: ServiceSpec
    replicas: int = 1

    def __post_init__(self):
        if self.replicas != 1:
            raise InvalidRequest("deployments always run exactly one replica")
        if not self.name.startswith(f"rstudio_{self.namespace}_"):
            raise InvalidRequest(
                f"deployment name {self.name!r} must be rstudio_{{namespace}}_{{user}}"
            )
        roles = sorted(c.role for c in self.containers)
        if roles != [CONTAINER_ROLE_LOGCOLLECTOR, CONTAINER_ROLE_WORKSPACE]:
            raise InvalidRequest(
                "deployment needs exactly two containers: one workspace, one logcollector"
            )
        if "jwt_token" not in self.secret.entries:
            raise InvalidRequest("secret must carry the jwt_token entry")

    def to_dict(self) -> dict:
        return {
            "namespace": self.namespace,
            "name": self.name,
            "replicas": self.replicas,
            "containers": [{"name": c.name, "role": c.role} for c in self.containers],
            "config_map": {
                "immutable": self.config_map.immutable,
                "entries": dict(self.config_map.entries),
            },
            "secret": {
                "entries": {
                    key: base64.b64encode(value).decode("ascii")
                    for key, value in self.secret.entries.items()
                }
            },
            "service": {
                "type": self.service.type,
                "node_port": self.service.node_port,
                "target_port": self.service.target_port,
            },
        }

    def to_yaml(self) -> str:
        """Canonical key-sorted serialization; bit-exact across runs."""
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)


def render_rserver_conf(project: str, user: str) -> str:
    return (
        "www-address=0.0.0.0\n"
        f"www-port={INTERNAL_PORT}\n"
        f"server-user={scoped_name(project, user)}\n"
        "session-timeout-minutes=0\n"
    )


def render_deployment_spec(
    req: "WorkspaceRequest",
    placement: str,
    node_port: int,
    token: str,
    spark_cfg: SparkSessionConfig | None = None,
) -> DeploymentSpec:
    """Pure render of a workspace deployment document.

    ``spark_cfg`` falls back to ``req.spark``; one of the two must be set so
    the config document can embed a complete config.yml.
    """
    del placement  # placement influences scheduling, not the document
    cfg = spark_cfg if spark_cfg is not None else req.spark
    if cfg is None:
        raise InvalidRequest("a spark session config is required to render config.yml")
    entries = {
        "rserver.conf": render_rserver_conf(req.project, req.user),
        "config.yml": render_config_yml(cfg),
    }
    return DeploymentSpec(
        namespace=req.project,
        name=deployment_name(req.project, req.user),
        containers=(
            ContainerSpec(name="rstudio", role=CONTAINER_ROLE_WORKSPACE),
            ContainerSpec(name="filebeat", role=CONTAINER_ROLE_LOGCOLLECTOR),
        ),
        config_map=ImmutableConfigMap(entries=entries),
        secret=SecretSpec(entries={"jwt_token": token.encode("utf-8")}),
        service=ServiceSpec(node_port=node_port),
    )
