/**
 * DOM bootstrap: wires the controllers to the static page.
 *
 * State lives server-side; this file only reads form inputs, renders what
 * the controllers hand back, and keeps the session token in memory (plus
 * a cookie so the proxied workspace link works in the same browser).
 */

import { ApiClient, LogEntry } from "./api.js";
import { ClusterViewController, NodeBar } from "./clusterView.js";
import { LogFollower } from "./logsView.js";
import { WorkspaceFormController } from "./workspaceForm.js";
import { FieldError, WorkspaceFormFields } from "./validation.js";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function readFields(): WorkspaceFormFields {
  const num = (id: string) => Number((el<HTMLInputElement>(id)).value);
  return {
    memoryLimitMib: num("memory-limit"),
    cpuMillicores: num("cpu-limit"),
    driverMemory: el<HTMLInputElement>("driver-memory").value.trim(),
    driverCores: num("driver-cores"),
    executorMemory: el<HTMLInputElement>("executor-memory").value.trim(),
    executorCores: num("executor-cores"),
    numExecutors: num("num-executors"),
  };
}

const formView = {
  showFieldErrors(errors: FieldError[]) {
    const box = el<HTMLUListElement>("field-errors");
    box.innerHTML = "";
    for (const err of errors) {
      const li = document.createElement("li");
      li.textContent = `${err.field}: ${err.message}`;
      box.appendChild(li);
    }
  },
  setBadge(state: string) {
    const badge = el<HTMLSpanElement>("state-badge");
    badge.textContent = state;
    badge.className = `badge badge-${state.toLowerCase()}`;
  },
  setBanner(message: string | null) {
    const banner = el<HTMLDivElement>("banner");
    banner.textContent = message ?? "";
    banner.style.display = message ? "block" : "none";
  },
  setOpenLink(url: string | null) {
    const link = el<HTMLAnchorElement>("open-link");
    if (url) {
      link.href = url;
      link.style.display = "inline";
    } else {
      link.style.display = "none";
    }
  },
};

const formController = new WorkspaceFormController(api, formView);

let session: { user: string; project: string } | null = null;
let follower: LogFollower | null = null;
let followTimer: number | null = null;

function requireSession(): { user: string; project: string } {
  if (!session) throw new Error("not logged in");
  return session;
}

async function onLogin(): Promise<void> {
  const user = el<HTMLInputElement>("login-user").value.trim();
  const password = el<HTMLInputElement>("login-password").value;
  const project = el<HTMLInputElement>("login-project").value.trim();
  try {
    const token = await api.login(user, password);
    document.cookie = `workbench_token=${token}; path=/`;
    session = { user, project };
    el<HTMLDivElement>("login-section").style.display = "none";
    el<HTMLDivElement>("console-section").style.display = "block";
    el<HTMLSpanElement>("who").textContent = `${user} @ ${project}`;
    await refreshStatus();
    await cluster.refreshBars();
  } catch (err) {
    el<HTMLDivElement>("login-error").textContent = String((err as { message?: string }).message ?? err);
  }
}

async function refreshStatus(): Promise<void> {
  const { user, project } = requireSession();
  try {
    const status = await api.workspaceStatus(project, user);
    formView.setBadge(status.state);
    formView.setOpenLink(status.state === "Running" ? `/workspace/${project}/${user}/` : null);
  } catch {
    formView.setBadge("none");
  }
}

async function onSubmit(event: Event): Promise<void> {
  event.preventDefault();
  const { user, project } = requireSession();
  await formController.submit(project, user, readFields());
}

async function onStop(): Promise<void> {
  const { user, project } = requireSession();
  try {
    await api.stopWorkspace(project, user);
  } catch (err) {
    formView.setBanner(String((err as { message?: string }).message ?? err));
  }
  await refreshStatus();
}

const logTarget = {
  appendEntries(entries: LogEntry[]) {
    const pre = el<HTMLPreElement>("log-output");
    for (const e of entries) {
      pre.textContent += `${e.timestamp} ${e.level} [${e.project}/${e.user}] ${e.message}\n`;
    }
    pre.scrollTop = pre.scrollHeight;
  },
  showAccessMessage(message: string) {
    el<HTMLPreElement>("log-output").textContent = message;
  },
};

async function onLogsRefresh(): Promise<void> {
  const { project } = requireSession();
  const userFilter = el<HTMLInputElement>("log-user").value.trim() || undefined;
  el<HTMLPreElement>("log-output").textContent = "";
  follower = new LogFollower(api, logTarget, project, userFilter);
  await follower.poll();
}

function onFollowToggle(): void {
  const checked = el<HTMLInputElement>("log-follow").checked;
  if (followTimer !== null) {
    window.clearInterval(followTimer);
    followTimer = null;
  }
  if (checked) {
    followTimer = window.setInterval(() => {
      follower?.poll();
    }, 1000);
  }
}

const cluster = new ClusterViewController(api, {
  renderBars(bars: NodeBar[]) {
    const box = el<HTMLDivElement>("node-bars");
    box.innerHTML = "";
    for (const bar of bars) {
      const row = document.createElement("div");
      row.className = "node-row";
      row.innerHTML =
        `<span class="node-name">${bar.nodeId}</span>` +
        `<div class="bar"><div class="fill" style="width:${bar.memPercent}%"></div></div>` +
        `<span class="bar-label">mem ${bar.memLabel}</span>` +
        `<div class="bar"><div class="fill cpu" style="width:${bar.cpuPercent}%"></div></div>` +
        `<span class="bar-label">cpu ${bar.cpuLabel}</span>`;
      box.appendChild(row);
    }
  },
  renderPlan(text: string) {
    el<HTMLSpanElement>("plan-result").textContent = text;
  },
});

function wire(): void {
  el<HTMLButtonElement>("login-button").addEventListener("click", () => void onLogin());
  el<HTMLFormElement>("workspace-form").addEventListener("submit", (e) => void onSubmit(e));
  el<HTMLButtonElement>("stop-button").addEventListener("click", () => void onStop());
  el<HTMLButtonElement>("log-refresh").addEventListener("click", () => void onLogsRefresh());
  el<HTMLInputElement>("log-follow").addEventListener("change", onFollowToggle);
  el<HTMLButtonElement>("cluster-refresh").addEventListener("click", () => void cluster.refreshBars());
  el<HTMLButtonElement>("plan-button").addEventListener("click", () => {
    const servers = Number(el<HTMLInputElement>("plan-servers").value);
    void cluster.planFor(servers);
  });
}

document.addEventListener("DOMContentLoaded", wire);
