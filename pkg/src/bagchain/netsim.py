"""Discrete-round message transport.

Supports fully-connected and mesh (Erdős–Rényi) topologies. Transmission
delay per link is ⌈size / bandwidth⌉ rounds with a one-round floor; mesh
broadcasts reach neighbors only and rely on receivers re-forwarding
(gossip). Delivery order within a round is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx

from .hashing import derive_seed
from .messages import FetchRequest, FetchResponse


@dataclass
class Topology:
    kind: str  # "full" | "mesh"
    node_ids: list[str]
    graph: nx.Graph  # nodes are indices 0..n-1; edges carry "bandwidth"
    default_bandwidth: float

    def __post_init__(self) -> None:
        self._index = {name: i for i, name in enumerate(self.node_ids)}
        self._paths = dict(nx.all_pairs_shortest_path(self.graph))

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def neighbors(self, node: str) -> list[str]:
        i = self._index[node]
        return [self.node_ids[j] for j in sorted(self.graph.neighbors(i))]

    def bandwidth(self, u: str, v: str) -> float:
        return self.graph.edges[self._index[u], self._index[v]].get(
            "bandwidth", self.default_bandwidth
        )

    def link_delay(self, u: str, v: str, size: float, override: int | None = None) -> int:
        if override is not None:
            return max(1, int(override))
        return max(1, math.ceil(size / self.bandwidth(u, v)))

    def path_delay(self, u: str, v: str, size: float, override: int | None = None) -> int:
        """Delay along the (unweighted) shortest path; direct link in a
        fully-connected network."""
        if u == v:
            return 0
        path = self._paths[self._index[u]][self._index[v]]
        total = 0
        for a, b in zip(path, path[1:]):
            total += self.link_delay(self.node_ids[a], self.node_ids[b], size, override)
        return total

    @classmethod
    def fully_connected(cls, node_ids: list[str], bandwidth: float) -> "Topology":
        graph = nx.complete_graph(len(node_ids))
        return cls("full", list(node_ids), graph, bandwidth)

    @classmethod
    def mesh(
        cls, node_ids: list[str], edge_prob: float, bandwidth: float, seed: int
    ) -> "Topology":
        """Erdős–Rényi mesh; regenerated until connected."""
        n = len(node_ids)
        for attempt in range(1000):
            graph = nx.erdos_renyi_graph(n, edge_prob, seed=derive_seed(seed, "mesh", attempt) % (2**32))
            if n <= 1 or nx.is_connected(graph):
                return cls("mesh", list(node_ids), graph, bandwidth)
        raise ValueError("could not generate a connected mesh; raise edge_prob")

    @classmethod
    def from_file(cls, path: str, node_ids: list[str], default_bandwidth: float) -> "Topology":
        """Adjacency list file: one ``u v bandwidth`` triple per line."""
        graph = nx.Graph()
        graph.add_nodes_from(range(len(node_ids)))
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                u, v, bw = line.split()
                graph.add_edge(int(u), int(v), bandwidth=float(bw))
        if len(node_ids) > 1 and not nx.is_connected(graph):
            raise ValueError(f"topology file {path} does not describe a connected graph")
        return cls("mesh", list(node_ids), graph, default_bandwidth)


@dataclass
class InFlightMessage:
    payload: object
    source: str
    destination: str
    size: float
    deliver_at: int

    def sort_key(self):
        return (self.destination, self.source, self.payload.digest.value)


class Network:
    """Single event queue of in-flight messages for one simulation."""

    def __init__(self, topology: Topology, keyblock_delay: int | None = None):
        self.topology = topology
        self.keyblock_delay = keyblock_delay  # uniform per-link override for Key Blocks
        self.in_flight: list[InFlightMessage] = []
        self.messages_sent = 0

    def _enqueue(self, msg: InFlightMessage) -> InFlightMessage:
        self.in_flight.append(msg)
        self.messages_sent += 1
        return msg

    def broadcast(
        self,
        source: str,
        payload,
        size: float,
        round_: int,
        delay_override: int | None = None,
    ) -> list[InFlightMessage]:
        """Fan a payload out from `source`: every other node in a
        fully-connected network, neighbors only in a mesh."""
        if self.topology.kind == "full":
            targets = [n for n in self.topology.node_ids if n != source]
        else:
            targets = self.topology.neighbors(source)
        out = []
        for dest in targets:
            delay = self.topology.link_delay(source, dest, size, delay_override)
            out.append(
                self._enqueue(InFlightMessage(payload, source, dest, size, round_ + delay))
            )
        return out

    def send(
        self,
        source: str,
        destination: str,
        payload,
        size: float,
        round_: int,
        delay_override: int | None = None,
    ) -> InFlightMessage:
        """Point-to-point transfer routed along the shortest path."""
        delay = max(1, self.topology.path_delay(source, destination, size, delay_override))
        return self._enqueue(
            InFlightMessage(payload, source, destination, size, round_ + delay)
        )

    def inject(self, destination: str, payload, source: str, deliver_at: int) -> InFlightMessage:
        """Schedule an out-of-band delivery (requester publications)."""
        return self._enqueue(InFlightMessage(payload, source, destination, 0.0, deliver_at))

    def fetch(
        self,
        requester_node: str,
        holder_node: str,
        object_id,
        size: float,
        round_: int,
        payload: bytes | None = b"",
    ) -> tuple[InFlightMessage, InFlightMessage]:
        """Request/response pair for a point-to-point object download.

        The response carries `payload` (None models a deferred response for
        an unreleased object) and arrives a size-proportional delay after
        the request reaches the holder.
        """
        request = self.send(
            requester_node, holder_node, FetchRequest(object_id, requester_node), 0.0, round_
        )
        response_payload = FetchResponse(object_id, payload, holder_node)
        resp_size = size if payload is not None else 0.0
        resp_delay = max(1, self.topology.path_delay(holder_node, requester_node, resp_size))
        response = self._enqueue(
            InFlightMessage(
                response_payload,
                holder_node,
                requester_node,
                resp_size,
                request.deliver_at + resp_delay,
            )
        )
        return request, response

    def step(self, round_: int) -> dict[str, list[InFlightMessage]]:
        """Deliver every message due this round, in deterministic order."""
        due = [m for m in self.in_flight if m.deliver_at <= round_]
        if not due:
            return {}
        self.in_flight = [m for m in self.in_flight if m.deliver_at > round_]
        inboxes: dict[str, list[InFlightMessage]] = {}
        for msg in sorted(due, key=InFlightMessage.sort_key):
            inboxes.setdefault(msg.destination, []).append(msg)
        return inboxes
