/**
 * Workspace start form controller.
 *
 * Validation failures never reach the network. A successful submit issues
 * the start call and then polls status, pushing every observed state into
 * the badge until the workspace is Running (or terminally failed).
 * Capacity and duplicate-start rejections surface as human-readable
 * banners; other API errors are shown verbatim with their status code.
 */

import { ApiClient, ApiError, WorkspaceStatus } from "./api.js";
import { FieldError, WorkspaceFormFields, validateWorkspaceForm } from "./validation.js";

export interface WorkspaceFormView {
  showFieldErrors(errors: FieldError[]): void;
  setBadge(state: string): void;
  setBanner(message: string | null): void;
  setOpenLink(url: string | null): void;
}

const TERMINAL = new Set(["Running", "Stopped", "Failed"]);

function isApiError(err: unknown): err is ApiError {
  return typeof err === "object" && err !== null && "status" in err && "error" in err;
}

export class WorkspaceFormController {
  constructor(
    private api: ApiClient,
    private view: WorkspaceFormView,
    private pollIntervalMs = 400,
    private maxPolls = 150,
    private sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
  ) {}

  async submit(project: string, user: string, fields: WorkspaceFormFields): Promise<boolean> {
    const errors = validateWorkspaceForm(fields);
    this.view.showFieldErrors(errors);
    if (errors.length > 0) {
      return false; // invalid input: no API call is made
    }
    this.view.setBanner(null);
    this.view.setOpenLink(null);
    let started: WorkspaceStatus;
    try {
      started = await this.api.startWorkspace(project, {
        memory_limit_mib: fields.memoryLimitMib,
        cpu_millicores: fields.cpuMillicores,
        spark: {
          driverMemory: fields.driverMemory,
          driverCores: fields.driverCores,
          executorMemory: fields.executorMemory,
          executorCores: fields.executorCores,
          numExecutors: fields.numExecutors,
        },
      });
    } catch (err) {
      if (isApiError(err)) {
        if (err.error === "InsufficientResources") {
          this.view.setBanner("Insufficient resources: no node can fit this workspace right now.");
        } else if (err.error === "AlreadyRunning") {
          this.view.setBanner("Already running: stop the existing workspace first.");
        } else {
          this.view.setBanner(`${err.status} ${err.error}: ${err.message}`);
        }
        return false;
      }
      throw err;
    }
    this.view.setBadge(started.state);
    let state = started.state;
    for (let i = 0; i < this.maxPolls && !TERMINAL.has(state); i++) {
      await this.sleep(this.pollIntervalMs);
      const status = await this.api.workspaceStatus(project, user);
      if (status.state !== state) {
        state = status.state;
        this.view.setBadge(state);
      }
    }
    if (state === "Running") {
      this.view.setOpenLink(`/workspace/${project}/${user}/`);
      return true;
    }
    return false;
  }
}
