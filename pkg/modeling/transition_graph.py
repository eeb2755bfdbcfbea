"""Turn-level state transition graph.

Each window turn becomes a node carrying a semantics state plus a strategy
state (supporter turns and the response placeholder) or an emotion state
(seeker turns). Typed edges connect every node to all earlier nodes. States
are updated in two steps: transit along same-kind edges, then interact along
cross-kind edges, and the two results are mixed by a learned gate.
"""
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from networkx.readwrite import json_graph

from corpus.dataset import SEEKER, SUPPORTER
from corpus.windows import TransitionWindow
from errors import ConfigError, ContractError, DimensionError
from numerics import tensor as T
from numerics.layers import MASK_VALUE, GatedFusion, Module, MultiHeadAttention, Parameter
from numerics.tensor import Tensor

logger = logging.getLogger(__name__)

SEM, STRAT, EMO = "sem", "strat", "emo"
STATE_KINDS = (SEM, STRAT, EMO)


class EdgeType(Enum):
    SEM_TO_SEM = 0
    STRAT_TO_STRAT = 1
    EMO_TO_EMO = 2
    SEM_TO_STRAT = 3
    EMO_TO_STRAT = 4
    SEM_TO_EMO = 5
    STRAT_TO_EMO = 6

    @property
    def source_kind(self) -> str:
        return _ENDPOINTS[self][0]

    @property
    def target_kind(self) -> str:
        return _ENDPOINTS[self][1]


_ENDPOINTS = {
    EdgeType.SEM_TO_SEM: (SEM, SEM),
    EdgeType.STRAT_TO_STRAT: (STRAT, STRAT),
    EdgeType.EMO_TO_EMO: (EMO, EMO),
    EdgeType.SEM_TO_STRAT: (SEM, STRAT),
    EdgeType.EMO_TO_STRAT: (EMO, STRAT),
    EdgeType.SEM_TO_EMO: (SEM, EMO),
    EdgeType.STRAT_TO_EMO: (STRAT, EMO),
}

TRANSITION_EDGES = frozenset({EdgeType.SEM_TO_SEM, EdgeType.STRAT_TO_STRAT, EdgeType.EMO_TO_EMO})
INTERACTION_EDGES = frozenset({EdgeType.SEM_TO_STRAT, EdgeType.EMO_TO_STRAT,
                               EdgeType.SEM_TO_EMO, EdgeType.STRAT_TO_EMO})


def node_kinds(speaker: str) -> Tuple[str, ...]:
    if speaker == SUPPORTER:
        return (SEM, STRAT)
    if speaker == SEEKER:
        return (SEM, EMO)
    raise ContractError(f"Unknown speaker: {speaker}")


@dataclass
class GraphNode:
    turn_index: int
    speaker: str
    sem_state: Optional[Tensor] = None
    strat_state: Optional[Tensor] = None
    emo_state: Optional[Tensor] = None

    @property
    def kinds(self) -> Tuple[str, ...]:
        return node_kinds(self.speaker)

    def state(self, kind: str) -> Optional[Tensor]:
        return getattr(self, f"{kind}_state")


@dataclass(frozen=True)
class Edge:
    src_turn: int
    dst_turn: int
    type: EdgeType


@dataclass
class TransitionGraph:
    nodes: List[GraphNode]
    edges: List[Edge]
    edge_type_embeddings: Optional[Tensor] = None
    # kind -> stacked [n_kind_nodes, d] rows, ordered like nodes_with(kind)
    states: Dict[str, Tensor] = field(default_factory=dict)

    def __post_init__(self):
        self.position = {node.turn_index: i for i, node in enumerate(self.nodes)}

    def nodes_with(self, kind: str) -> List[int]:
        return [i for i, node in enumerate(self.nodes) if kind in node.kinds]

    def row_of(self, kind: str) -> Dict[int, int]:
        """turn index -> row in `states[kind]`"""
        return {self.nodes[p].turn_index: r for r, p in enumerate(self.nodes_with(kind))}

    def edges_of(self, types: Iterable[EdgeType]) -> List[Edge]:
        wanted = set(types)
        return [e for e in self.edges if e.type in wanted]

    def set_states(self, states: Dict[str, Tensor]) -> None:
        """Install stacked states and expose their rows on the nodes."""
        self.states = dict(states)
        for kind, stacked in self.states.items():
            for row, position in enumerate(self.nodes_with(kind)):
                setattr(self.nodes[position], f"{kind}_state", stacked[row])

    def to_networkx(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        for node in self.nodes:
            g.add_node(node.turn_index, speaker=node.speaker, kinds=list(node.kinds))
        for edge in self.edges:
            g.add_edge(edge.src_turn, edge.dst_turn, key=edge.type.name, type=edge.type.name)
        return g

    def to_json(self) -> str:
        """Adjacency dump: nodes with speaker/kinds, edges with type names."""
        return json.dumps(json_graph.node_link_data(self.to_networkx()), indent=1)


def build_graph(window: TransitionWindow, cls_states: Optional[Tensor] = None,
                kinds: Iterable[str] = STATE_KINDS) -> TransitionGraph:
    """Nodes in turn order; every node gets every applicable edge from each earlier node.

    An edge type applies when both endpoint states exist and both kinds are
    enabled in `kinds`.
    """
    if len(window) == 0:
        raise ContractError("Cannot build a transition graph from an empty window")
    if cls_states is not None and cls_states.shape[0] != len(window):
        raise ContractError(f"Got {cls_states.shape[0]} CLS states for a window of {len(window)} nodes")

    enabled = frozenset(kinds)
    nodes = [GraphNode(turn_index=turn, speaker=speaker) for turn, speaker in window.node_turns]
    edges = []
    for j, dst in enumerate(nodes):
        for src in nodes[:j]:
            for edge_type in EdgeType:
                src_kind, dst_kind = edge_type.source_kind, edge_type.target_kind
                if src_kind not in enabled or dst_kind not in enabled:
                    continue
                if src_kind in src.kinds and dst_kind in dst.kinds:
                    edges.append(Edge(src.turn_index, dst.turn_index, edge_type))
    return TransitionGraph(nodes=nodes, edges=edges)


KnowledgeFn = Callable[[int], Tensor]


def init_states(graph: TransitionGraph, cls_states: Tensor, knowledge: KnowledgeFn) -> TransitionGraph:
    """sem = strat = CLS; emo = CLS + knowledge(turn_index)."""
    if cls_states.shape[0] != len(graph.nodes):
        raise ContractError(f"Got {cls_states.shape[0]} CLS states for {len(graph.nodes)} nodes")
    dim = cls_states.shape[1]
    states = {}
    for kind in STATE_KINDS:
        positions = graph.nodes_with(kind)
        if not positions:
            continue
        rows = cls_states[positions]
        if kind == EMO:
            csk = []
            for p in positions:
                vector = knowledge(graph.nodes[p].turn_index)
                if vector.shape != (dim,):
                    raise ConfigError(f"Knowledge vector shape {vector.shape} does not match model dimension {dim}")
                csk.append(vector)
            rows = rows + T.stack(csk)
        states[kind] = rows
    graph.set_states(states)
    return graph


def r_mha(dst_states: Tensor, src_vectors: Tensor, relations: Tensor, edge_dst: Sequence[int],
          attention: MultiHeadAttention) -> Tensor:
    """Relation-enhanced attention over an edge list.

    Edge e carries a source vector, a relation embedding and a destination
    row. Destination i attends over its incoming edges with query
    (dst_i + r_e), key (src_e + r_e) and value src_e. Rows with no incoming
    edge are returned unchanged.
    """
    n_dst, dim = dst_states.shape
    edge_dst = np.asarray(edge_dst, dtype=np.int64)
    if src_vectors.shape != relations.shape or src_vectors.shape[0] != edge_dst.size:
        raise DimensionError(
            f"r_mha: sources {src_vectors.shape}, relations {relations.shape}, {edge_dst.size} edges"
        )
    if edge_dst.size == 0:
        return dst_states
    if dim != attention.dim:
        raise DimensionError(f"r_mha: state dimension {dim} vs attention dimension {attention.dim}")

    q = attention.split_heads(attention.query(dst_states[edge_dst] + relations))   # [h, E, dh]
    k = attention.split_heads(attention.key(src_vectors + relations))
    v = attention.split_heads(attention.value(src_vectors))
    scores = T.tensor_sum(q * k, axis=-1) / np.sqrt(dim // attention.heads)      # [h, E]

    incidence = edge_dst[None, :] == np.arange(n_dst)[:, None]                   # [n_dst, E]
    grouped = T.reshape(scores, (attention.heads, 1, edge_dst.size)) + np.where(incidence, 0.0, MASK_VALUE)
    weights = T.softmax(grouped, axis=-1)                                        # [h, n_dst, E]
    attended = attention.output(attention.merge_heads(T.matmul(weights, v)))

    has_edge = incidence.any(axis=1)[:, None]
    return T.where(has_edge, attended, dst_states)


class TransitThenInteract(Module):
    """Parameters of the two-step update: edge-type embeddings, attention blocks and fusion gates.

    Semantics states never receive interaction edges, so only strategy and
    emotion have interaction blocks and fusion gates.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        self.dim = dim
        self.edge_type_embeddings = Parameter(rng.normal(0.0, dim ** -0.5, size=(len(EdgeType), dim)))
        self.transit = {kind: MultiHeadAttention(dim, heads, rng) for kind in STATE_KINDS}
        self.interact = {kind: MultiHeadAttention(dim, heads, rng) for kind in (STRAT, EMO)}
        self.fusion = {kind: GatedFusion(dim, rng) for kind in (STRAT, EMO)}

    def relations(self, edge_type: EdgeType, count: int) -> Tensor:
        return self.edge_type_embeddings[np.full(count, edge_type.value)]

    def propagate(self, graph: TransitionGraph, kind: str, group: FrozenSet[EdgeType],
                  sources: Dict[str, Tensor], attention: MultiHeadAttention) -> Tuple[Tensor, np.ndarray]:
        """r_mha for the `kind` rows over the edges of `group`; also returns which rows had edges."""
        dst_rows = graph.row_of(kind)
        parts, relations, edge_dst = [], [], []
        for edge_type in sorted(group, key=lambda t: t.value):
            if edge_type.target_kind != kind:
                continue
            edges = graph.edges_of([edge_type])
            if not edges:
                continue
            if edge_type.source_kind not in sources:
                raise ContractError(f"Edge {edge_type.name} has no {edge_type.source_kind} source states")
            src_rows = graph.row_of(edge_type.source_kind)
            parts.append(sources[edge_type.source_kind][[src_rows[e.src_turn] for e in edges]])
            relations.append(self.relations(edge_type, len(edges)))
            edge_dst.extend(dst_rows[e.dst_turn] for e in edges)

        has_edge = np.zeros(len(dst_rows), dtype=bool)
        if not parts:
            return sources[kind], has_edge
        has_edge[np.asarray(edge_dst, dtype=np.int64)] = True
        updated = r_mha(sources[kind], T.concat(parts, axis=0), T.concat(relations, axis=0), edge_dst, attention)
        return updated, has_edge

    def forward(self, graph: TransitionGraph) -> Dict[str, Tensor]:
        initial = graph.states
        if not initial:
            raise ContractError("Graph states are not initialized")
        for edge in graph.edges:
            if not isinstance(edge.type, EdgeType):
                raise ContractError(f"Unknown edge type: {edge.type!r}")

        transited = {
            kind: self.propagate(graph, kind, TRANSITION_EDGES, initial, self.transit[kind])[0]
            for kind in initial
        }
        updated = dict(transited)
        for kind in (STRAT, EMO):
            if kind not in transited:
                continue
            interacted, has_edge = self.propagate(graph, kind, INTERACTION_EDGES, transited, self.interact[kind])
            if not has_edge.any():
                continue
            fused = self.fusion[kind](transited[kind], interacted)
            updated[kind] = T.where(has_edge[:, None], fused, transited[kind])
        return updated


def transit_then_interact(graph: TransitionGraph, params: TransitThenInteract) -> TransitionGraph:
    """Returns a graph sharing nodes/edges with `graph` whose states are the updated ones."""
    updated = TransitionGraph(nodes=[GraphNode(n.turn_index, n.speaker) for n in graph.nodes],
                              edges=list(graph.edges), edge_type_embeddings=params.edge_type_embeddings)
    updated.set_states(params(graph))
    return updated
