import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { WorkspaceFormController, WorkspaceFormView } from "../src/workspaceForm.js";
import { FieldError, WorkspaceFormFields } from "../src/validation.js";
import { FakeFetch } from "./helpers.js";

function fields(overrides: Partial<WorkspaceFormFields> = {}): WorkspaceFormFields {
  return {
    memoryLimitMib: 2048,
    cpuMillicores: 1000,
    driverMemory: "2g",
    driverCores: 1,
    executorMemory: "4g",
    executorCores: 2,
    numExecutors: 2,
    ...overrides,
  };
}

class RecordingView implements WorkspaceFormView {
  fieldErrors: FieldError[][] = [];
  badges: string[] = [];
  banners: (string | null)[] = [];
  links: (string | null)[] = [];

  showFieldErrors(errors: FieldError[]): void {
    this.fieldErrors.push(errors);
  }
  setBadge(state: string): void {
    this.badges.push(state);
  }
  setBanner(message: string | null): void {
    this.banners.push(message);
  }
  setOpenLink(url: string | null): void {
    this.links.push(url);
  }
}

function controller(fake: FakeFetch, view: RecordingView): WorkspaceFormController {
  const api = new ApiClient("", "usr_test", fake.fetch);
  return new WorkspaceFormController(api, view, 1, 50, () => Promise.resolve());
}

describe("WorkspaceFormController.submit", () => {
  it("makes zero API calls when numExecutors is invalid", async () => {
    const fake = new FakeFetch();
    const view = new RecordingView();
    const ok = await controller(fake, view).submit("demo", "alice", fields({ numExecutors: 0 }));
    expect(ok).toBe(false);
    expect(fake.calls).toHaveLength(0);
    expect(view.fieldErrors[0].map((e) => e.field)).toContain("numExecutors");
  });

  it("transitions the badge to Running on a valid submit", async () => {
    const fake = new FakeFetch();
    fake.on("POST", "/api/projects/demo/workspaces", {
      status: 201,
      body: { state: "Requested", project: "demo", user: "alice" },
    });
    fake.on(
      "GET",
      "/api/projects/demo/workspaces/alice",
      { status: 200, body: { state: "Scheduled" } },
      { status: 200, body: { state: "Starting" } },
      { status: 200, body: { state: "Running" } },
    );
    const view = new RecordingView();
    const ok = await controller(fake, view).submit("demo", "alice", fields());
    expect(ok).toBe(true);
    expect(view.badges).toEqual(["Requested", "Scheduled", "Starting", "Running"]);
    expect(view.links.at(-1)).toBe("/workspace/demo/alice/");
  });

  it("shows the insufficient-resources banner", async () => {
    const fake = new FakeFetch();
    fake.on("POST", "/api/projects/demo/workspaces", {
      status: 409,
      body: { error: "InsufficientResources", message: "no node can fit" },
    });
    const view = new RecordingView();
    const ok = await controller(fake, view).submit("demo", "alice", fields());
    expect(ok).toBe(false);
    expect(view.banners.at(-1)).toMatch(/Insufficient resources/);
  });

  it("shows the already-running banner", async () => {
    const fake = new FakeFetch();
    fake.on("POST", "/api/projects/demo/workspaces", {
      status: 409,
      body: { error: "AlreadyRunning", message: "instance is Running" },
    });
    const view = new RecordingView();
    await controller(fake, view).submit("demo", "alice", fields());
    expect(view.banners.at(-1)).toMatch(/Already running/);
  });

  it("surfaces other API errors verbatim with status code", async () => {
    const fake = new FakeFetch();
    fake.on("POST", "/api/projects/demo/workspaces", {
      status: 403,
      body: { error: "Forbidden", message: "'alice' may not start workspaces" },
    });
    const view = new RecordingView();
    await controller(fake, view).submit("demo", "alice", fields());
    expect(view.banners.at(-1)).toBe("403 Forbidden: 'alice' may not start workspaces");
  });

  it("sends the validated fields in the start request body", async () => {
    const fake = new FakeFetch();
    fake.on("POST", "/api/projects/demo/workspaces", {
      status: 201,
      body: { state: "Running" },
    });
    const view = new RecordingView();
    await controller(fake, view).submit("demo", "alice", fields({ numExecutors: 3 }));
    expect(fake.calls).toHaveLength(1);
    const body = fake.calls[0].body as {
      memory_limit_mib: number;
      spark: { numExecutors: number };
    };
    expect(body.memory_limit_mib).toBe(2048);
    expect(body.spark.numExecutors).toBe(3);
  });
});
