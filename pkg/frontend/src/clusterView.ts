/**
 * Cluster utilization dashboard: per-node reserved vs allocatable bars
 * plus the capacity-plan widget.
 */

import { ApiClient, CapacityPlan, NodeInfo } from "./api.js";

export interface NodeBar {
  nodeId: string;
  memPercent: number;
  cpuPercent: number;
  memLabel: string;
  cpuLabel: string;
}

export function nodeBars(nodes: NodeInfo[]): NodeBar[] {
  return nodes.map((n) => ({
    nodeId: n.id,
    memPercent:
      n.allocatable_mem_mib > 0
        ? Math.round((100 * n.reserved_mem_mib) / n.allocatable_mem_mib)
        : 0,
    cpuPercent:
      n.allocatable_cpu_millicores > 0
        ? Math.round((100 * n.reserved_cpu_millicores) / n.allocatable_cpu_millicores)
        : 0,
    memLabel: `${n.reserved_mem_mib} / ${n.allocatable_mem_mib} MiB`,
    cpuLabel: `${n.reserved_cpu_millicores} / ${n.allocatable_cpu_millicores} mc`,
  }));
}

export function formatPlan(plan: CapacityPlan): string {
  return `${plan.required_ram_gb} GB / ${plan.min_cpus} CPUs`;
}

export function totalReservedMib(nodes: NodeInfo[]): number {
  return nodes.reduce((acc, n) => acc + n.reserved_mem_mib, 0);
}

export interface ClusterViewTargets {
  renderBars(bars: NodeBar[]): void;
  renderPlan(text: string): void;
}

export class ClusterViewController {
  constructor(private api: ApiClient, private targets: ClusterViewTargets) {}

  async refreshBars(): Promise<NodeBar[]> {
    const bars = nodeBars(await this.api.listNodes());
    this.targets.renderBars(bars);
    return bars;
  }

  async planFor(servers: number): Promise<string> {
    const text = formatPlan(await this.api.capacityPlan(servers));
    this.targets.renderPlan(text);
    return text;
  }
}
