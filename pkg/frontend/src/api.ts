/**
 * Thin typed client over the control-plane REST API.
 *
 * Every call carries the session bearer token; the console never talks to
 * anything but these endpoints.
 */

export interface ApiError {
  status: number;
  error: string;
  message: string;
}

export interface WorkspaceStatus {
  id: string;
  project: string;
  user: string;
  state: string;
  node: string | null;
  node_port: number | null;
  backend_name: string | null;
  failure_reason: string | null;
  token?: string;
}

export interface LogEntry {
  timestamp: string;
  project: string;
  user: string;
  instance: string;
  level: string;
  message: string;
}

export interface NodeInfo {
  id: string;
  capacity_mem_mib: number;
  capacity_cpu_millicores: number;
  allocatable_mem_mib: number;
  allocatable_cpu_millicores: number;
  reserved_mem_mib: number;
  reserved_cpu_millicores: number;
  free_mem_mib: number;
  free_cpu_millicores: number;
}

export interface CapacityPlan {
  servers: number;
  required_ram_gb: number;
  min_cpus: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private token: string | null = null,
    private fetchImpl: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  get authenticated(): boolean {
    return this.token !== null;
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    if (!resp.ok) {
      let error = "Error";
      let message = text;
      try {
        const payload = JSON.parse(text);
        error = payload.error ?? error;
        message = payload.message ?? message;
      } catch {
        // non-JSON error body; keep raw text
      }
      throw { status: resp.status, error, message } satisfies ApiError;
    }
    return (text ? JSON.parse(text) : {}) as T;
  }

  async login(user: string, password: string): Promise<string> {
    const payload = await this.request<{ token: string }>("POST", "/api/login", {
      user,
      password,
    });
    this.token = payload.token;
    return payload.token;
  }

  startWorkspace(
    project: string,
    body: {
      memory_limit_mib: number;
      cpu_millicores: number;
      spark: {
        driverMemory: string;
        driverCores: number;
        executorMemory: string;
        executorCores: number;
        numExecutors: number;
      };
    },
  ): Promise<WorkspaceStatus> {
    return this.request("POST", `/api/projects/${project}/workspaces`, body);
  }

  workspaceStatus(project: string, user: string): Promise<WorkspaceStatus> {
    return this.request("GET", `/api/projects/${project}/workspaces/${user}`);
  }

  stopWorkspace(project: string, user: string): Promise<WorkspaceStatus> {
    return this.request("DELETE", `/api/projects/${project}/workspaces/${user}`);
  }

  async queryLogs(
    project: string,
    opts: { user?: string; from?: string; limit?: number } = {},
  ): Promise<LogEntry[]> {
    const params = new URLSearchParams();
    if (opts.user) params.set("user", opts.user);
    if (opts.from) params.set("from", opts.from);
    if (opts.limit !== undefined) params.set("limit", String(opts.limit));
    const query = params.toString();
    const resp = await this.fetchImpl(
      `${this.baseUrl}/api/projects/${project}/logs${query ? `?${query}` : ""}`,
      { headers: this.headers() },
    );
    const text = await resp.text();
    if (!resp.ok) {
      let payload: { error?: string; message?: string } = {};
      try {
        payload = JSON.parse(text);
      } catch {
        // fall through with defaults
      }
      throw {
        status: resp.status,
        error: payload.error ?? "Error",
        message: payload.message ?? text,
      } satisfies ApiError;
    }
    return text
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as LogEntry);
  }

  async listNodes(): Promise<NodeInfo[]> {
    const payload = await this.request<{ nodes: NodeInfo[] }>("GET", "/api/cluster/nodes");
    return payload.nodes;
  }

  capacityPlan(servers: number): Promise<CapacityPlan> {
    return this.request("GET", `/api/cluster/capacity-plan?servers=${servers}`);
  }
}
