"""Expert causal graph linking stage-1 conditions, stage-2 behaviour and risk."""
from __future__ import annotations

from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter

from ..factors import OUTCOME, STAGE1_FACTORS, STAGE2_FACTORS


@dataclass
class CausalGraph:
    nodes: list[str]
    edges: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        known = set(self.nodes)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge {a}->{b} references an unknown node")

    def parents(self, node):
        return [a for a, b in self.edges if b == node]

    def children(self, node):
        return [b for a, b in self.edges if a == node]

    def topological_order(self):
        ts = TopologicalSorter({n: set() for n in self.nodes})
        for a, b in self.edges:
            ts.add(b, a)
        return list(ts.static_order())

    def is_acyclic(self):
        try:
            self.topological_order()
        except CycleError:
            return False
        return True

    def descendants(self, node):
        seen, todo = set(), [node]
        while todo:
            for child in self.children(todo.pop()):
                if child not in seen:
                    seen.add(child)
                    todo.append(child)
        return seen

    def sinks(self):
        has_out = {a for a, _ in self.edges}
        return [n for n in self.nodes if n not in has_out]

    def to_dict(self):
        return {"nodes": list(self.nodes), "edges": [list(e) for e in self.edges]}


def default_causal_graph() -> CausalGraph:
    """Static expert graph.

    Per vehicle and per axis: stage-1 speed and acceleration feed the
    stage-2 acceleration, which drives the stage-2 speed, which feeds risk.
    The front vehicle on the original lane has no stage-2 acceleration, so
    its stage-1 signals feed its stage-2 speed directly. Gaps observed in
    stage 1 shape stage-2 gaps and the accelerations of the vehicles that
    bound them; stage-2 gaps feed the LCV's stage-2 acceleration.
    """
    edges = []
    for veh in ("lc", "ft", "bt"):
        for ax in ("x", "y"):
            edges += [
                (f"{veh}_v{ax}1", f"{veh}_a{ax}2"),
                (f"{veh}_a{ax}1", f"{veh}_a{ax}2"),
                (f"{veh}_a{ax}2", f"{veh}_v{ax}2"),
            ]
    for ax in ("x", "y"):
        edges += [(f"fo_v{ax}1", f"fo_v{ax}2"), (f"fo_a{ax}1", f"fo_v{ax}2")]
    for veh in ("lc", "fo", "ft", "bt"):
        for ax in ("x", "y"):
            edges.append((f"{veh}_v{ax}2", OUTCOME))

    gap_targets_stage1 = {
        "d_lc_fo1": ("lc_ax2", "fo_vx2"),
        "d_lc_ftx1": ("lc_ax2", "ft_ax2"),
        "d_lc_fty1": ("lc_ay2", "ft_ay2"),
        "d_lc_btx1": ("lc_ax2", "bt_ax2"),
        "d_lc_bty1": ("lc_ay2", "bt_ay2"),
        "d_ft_bt1": ("ft_ax2", "bt_ax2"),
    }
    for gap, targets in gap_targets_stage1.items():
        edges.append((gap, gap[:-1] + "2"))
        edges += [(gap, t) for t in targets]
    gap_targets_stage2 = {
        "d_lc_fo2": "lc_ax2",
        "d_lc_ftx2": "lc_ax2",
        "d_lc_fty2": "lc_ay2",
        "d_lc_btx2": "lc_ax2",
        "d_lc_bty2": "lc_ay2",
        "d_ft_bt2": "lc_ax2",
    }
    edges += list(gap_targets_stage2.items())
    nodes = list(STAGE1_FACTORS) + list(STAGE2_FACTORS) + [OUTCOME]
    return CausalGraph(nodes=nodes, edges=edges)
