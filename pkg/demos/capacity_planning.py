"""Capacity planning walkthrough.

Answers two operator questions: how much RAM/CPU a target number of
concurrent workspaces needs, and how many workspaces a concrete cluster
admits before the scheduler starts rejecting.

Run: python3 demos/capacity_planning.py
"""

from workbench import Reservation, plan_capacity, simulate_fill, uniform_nodes


def main() -> None:
    print("== Linear capacity plan (3 GB RAM, 0.8 CPUs per concurrent workspace) ==")
    print(f"{'servers':>8} {'ram_gb':>7} {'min_cpus':>9}")
    for servers in (10, 20, 40):
        plan = plan_capacity(servers)
        print(f"{plan.servers:>8} {plan.required_ram_gb:>7} {plan.min_cpus:>9}")

    print()
    print("== Filling the reference cluster ==")
    print("4 worker nodes, 30 GiB each; 8 GiB per node held back for system")
    print("services leaves 22528 MiB allocatable. Every workspace reserves")
    print("2048 MiB. 23 projects x 2 users each try to start one workspace:")
    nodes = uniform_nodes(4, capacity_mem=30720, capacity_cpu=8000)
    report = simulate_fill(nodes, Reservation("probe", 2048, 1), attempts=46)
    for node_id, count in sorted(report.per_node.items()):
        print(f"  {node_id}: {count} workspaces")
    print(f"  admitted {report.admitted}, rejected {report.rejected} of 46 attempts")

    print()
    print("== Horizontal scaling: admitted count as nodes are added ==")
    for node_count in range(1, 9):
        nodes = uniform_nodes(node_count, capacity_mem=30720, capacity_cpu=8000)
        report = simulate_fill(nodes, Reservation("probe", 2048, 1), attempts=200)
        bar = "#" * (report.admitted // 2)
        print(f"  {node_count} node(s): {report.admitted:>3} workspaces {bar}")


if __name__ == "__main__":
    main()
