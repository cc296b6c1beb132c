"""Graph models: complete, random regular (pairing model), directed
configuration model, Erdos-Renyi, plus degree-preserving edge swaps and
discordant-edge counting.

Conventions used throughout the package:

* Graphs are multigraphs by default: parallel edges are distinct edge ids,
  a self-loop occupies two incidence slots of its vertex (as in the
  half-edge pairing construction), so sum(deg) == 2*M always holds.
* Edge ids are stable: rewiring replaces endpoints in place, so Poisson
  clocks attached to edge ids stay attached through swaps.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "Graph",
    "DirectedGraph",
    "generate_complete",
    "generate_random_regular",
    "generate_directed_configuration",
    "generate_erdos_renyi",
    "generate_gnm",
    "rewire_swap",
    "count_discordant",
    "write_edgelist",
    "read_edgelist",
]


class Graph:
    """Mutable undirected multigraph addressed by stable edge ids.

    ``eu[e], ev[e]`` are the endpoints of edge id ``e``; ``inc[v]`` lists the
    edge ids incident to ``v`` (a self-loop id appears twice).  Endpoint
    replacement costs O(deg) for the incidence fix-up and nothing else.
    """

    __slots__ = ("n", "eu", "ev", "inc", "allows_self_loops",
                 "allows_multi_edges", "is_complete")

    def __init__(self, n, *, allows_self_loops=True, allows_multi_edges=True):
        if n < 0:
            raise InvalidParameterError("vertex count must be >= 0")
        self.n = int(n)
        self.eu: list[int] = []
        self.ev: list[int] = []
        self.inc: list[list[int]] = [[] for _ in range(self.n)]
        self.allows_self_loops = allows_self_loops
        self.allows_multi_edges = allows_multi_edges
        self.is_complete = False

    @property
    def m(self) -> int:
        return len(self.eu)

    def add_edge(self, u, v) -> int:
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise InvalidParameterError(f"endpoint out of range: ({u}, {v})")
        if u == v and not self.allows_self_loops:
            raise InvalidParameterError("self-loops are disabled on this graph")
        e = len(self.eu)
        self.eu.append(u)
        self.ev.append(v)
        self.inc[u].append(e)
        self.inc[v].append(e)
        return e

    def endpoints(self, e):
        return self.eu[e], self.ev[e]

    def degree(self, v) -> int:
        return len(self.inc[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self.inc]

    def edges(self):
        return zip(self.eu, self.ev)

    def copy(self) -> "Graph":
        g = Graph(self.n, allows_self_loops=self.allows_self_loops,
                  allows_multi_edges=self.allows_multi_edges)
        g.eu = list(self.eu)
        g.ev = list(self.ev)
        g.inc = [list(a) for a in self.inc]
        g.is_complete = self.is_complete
        return g

    def has_self_loop(self) -> bool:
        return any(u == v for u, v in self.edges())

    def has_multi_edge(self) -> bool:
        seen = set()
        for u, v in self.edges():
            key = (u, v) if u <= v else (v, u)
            if key in seen:
                return True
            seen.add(key)
        return False

    def is_simple(self) -> bool:
        return not self.has_self_loop() and not self.has_multi_edge()

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = bytearray(self.n)
        stack = [0]
        seen[0] = 1
        count = 1
        while stack:
            v = stack.pop()
            for e in self.inc[v]:
                w = self.ev[e] if self.eu[e] == v else self.eu[e]
                if not seen[w]:
                    seen[w] = 1
                    count += 1
                    stack.append(w)
        return count == self.n

    def check_consistency(self):
        """Full rebuild check of the incidence structure and flags."""
        if sum(len(a) for a in self.inc) != 2 * self.m:
            raise AssertionError("handshake violated: sum(deg) != 2M")
        rebuilt = [[] for _ in range(self.n)]
        for e, (u, v) in enumerate(self.edges()):
            rebuilt[u].append(e)
            rebuilt[v].append(e)
        for v in range(self.n):
            if sorted(rebuilt[v]) != sorted(self.inc[v]):
                raise AssertionError(f"incidence list of vertex {v} is stale")
        if not self.allows_self_loops and self.has_self_loop():
            raise AssertionError("self-loop present despite flag")
        if not self.allows_multi_edges and self.has_multi_edge():
            raise AssertionError("multi-edge present despite flag")


class DirectedGraph:
    """Directed multigraph; arc ids are stable, arcs point tail -> head."""

    __slots__ = ("n", "tails", "heads", "out_adj", "in_adj")

    def __init__(self, n):
        if n < 0:
            raise InvalidParameterError("vertex count must be >= 0")
        self.n = int(n)
        self.tails: list[int] = []
        self.heads: list[int] = []
        self.out_adj: list[list[int]] = [[] for _ in range(self.n)]
        self.in_adj: list[list[int]] = [[] for _ in range(self.n)]

    @property
    def m(self) -> int:
        return len(self.tails)

    def add_arc(self, tail, head) -> int:
        if not (0 <= tail < self.n and 0 <= head < self.n):
            raise InvalidParameterError(f"endpoint out of range: ({tail}, {head})")
        a = len(self.tails)
        self.tails.append(tail)
        self.heads.append(head)
        self.out_adj[tail].append(a)
        self.in_adj[head].append(a)
        return a

    def arcs(self):
        return zip(self.tails, self.heads)

    def out_degrees(self) -> list[int]:
        return [len(a) for a in self.out_adj]

    def in_degrees(self) -> list[int]:
        return [len(a) for a in self.in_adj]

    def copy(self) -> "DirectedGraph":
        g = DirectedGraph(self.n)
        g.tails = list(self.tails)
        g.heads = list(self.heads)
        g.out_adj = [list(a) for a in self.out_adj]
        g.in_adj = [list(a) for a in self.in_adj]
        return g


# ----------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------

def generate_complete(n) -> Graph:
    """Simple graph on n >= 2 vertices with all C(n,2) edges."""
    if n < 2:
        raise InvalidParameterError("complete graph needs n >= 2")
    g = Graph(n, allows_self_loops=False, allows_multi_edges=False)
    iu, iv = np.triu_indices(n, k=1)
    g.eu = iu.tolist()
    g.ev = iv.tolist()
    inc = g.inc
    for e in range(len(g.eu)):
        inc[g.eu[e]].append(e)
        inc[g.ev[e]].append(e)
    g.is_complete = True
    return g


def generate_random_regular(n, d, rng, policy="reject") -> Graph:
    """d-regular graph on n vertices via uniform half-edge pairing.

    policy="reject" resamples until the pairing is simple, which yields the
    uniform simple d-regular graph; policy="allow" returns the raw pairing
    multigraph.  Requires n*d even and n > d.
    """
    if d < 1:
        raise InvalidParameterError("degree must be >= 1")
    if n <= d:
        raise InvalidParameterError("need n > d")
    if (n * d) % 2 != 0:
        raise InvalidParameterError("n*d must be even")
    if policy not in ("reject", "allow"):
        raise InvalidParameterError(f"unknown policy {policy!r}")

    owner = np.repeat(np.arange(n), d)
    while True:
        stubs = owner[rng.permutation(n * d)]
        us = stubs[0::2]
        vs = stubs[1::2]
        if policy == "reject":
            if np.any(us == vs):
                continue
            key = np.minimum(us, vs).astype(np.int64) * n + np.maximum(us, vs)
            if len(np.unique(key)) != len(key):
                continue
        g = Graph(n,
                  allows_self_loops=(policy == "allow"),
                  allows_multi_edges=(policy == "allow"))
        for u, v in zip(us.tolist(), vs.tolist()):
            g.add_edge(u, v)
        return g


def generate_directed_configuration(d_in, d_out, rng) -> DirectedGraph:
    """Directed configuration model: uniform pairing of out-stubs to in-stubs."""
    d_in = list(d_in)
    d_out = list(d_out)
    if len(d_in) != len(d_out):
        raise InvalidParameterError("in/out degree sequences differ in length")
    if any(x < 0 for x in d_in) or any(x < 0 for x in d_out):
        raise InvalidParameterError("degrees must be >= 0")
    if sum(d_in) != sum(d_out):
        raise InvalidParameterError("sum(d_in) must equal sum(d_out)")
    n = len(d_in)
    tails = np.repeat(np.arange(n), d_out)
    heads = np.repeat(np.arange(n), d_in)
    heads = heads[rng.permutation(len(heads))]
    g = DirectedGraph(n)
    for t, h in zip(tails.tolist(), heads.tolist()):
        g.add_arc(t, h)
    return g


def generate_erdos_renyi(n, p, rng) -> Graph:
    """Each of the C(n,2) possible edges present independently with prob p."""
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError("edge probability must be in [0,1]")
    if n < 0:
        raise InvalidParameterError("vertex count must be >= 0")
    g = Graph(n, allows_self_loops=False, allows_multi_edges=False)
    if n < 2 or p == 0.0:
        return g
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    for u, v in zip(iu[keep].tolist(), iv[keep].tolist()):
        g.add_edge(u, v)
    return g


def generate_gnm(n, m, rng) -> Graph:
    """Uniform simple graph with exactly m edges (G(n,m))."""
    n_pairs = n * (n - 1) // 2
    if not 0 <= m <= n_pairs:
        raise InvalidParameterError(f"edge count must be in [0, {n_pairs}]")
    g = Graph(n, allows_self_loops=False, allows_multi_edges=False)
    chosen = set()
    while len(chosen) < m:
        u = int(rng.integers(n))
        v = int(rng.integers(n))
        if u == v:
            continue
        if u > v:
            u, v = v, u
        if (u, v) not in chosen:
            chosen.add((u, v))
            g.add_edge(u, v)
    return g


# ----------------------------------------------------------------------
# mutation and bookkeeping
# ----------------------------------------------------------------------

def rewire_swap(g: Graph, e1: int, e2: int, rng) -> None:
    """Swap endpoints of two edge slots, degree-preserving.

    Edges {a,b}, {c,d} become one of the crossed matchings {a,c},{b,d} or
    {a,d},{b,c}, each with probability 1/2.  Self-loops and multi-edges may
    be created; degrees never change.
    """
    if e1 == e2:
        raise InvalidParameterError("edge slots must differ")
    m = g.m
    if not (0 <= e1 < m and 0 <= e2 < m):
        raise InvalidParameterError("edge slot out of range")
    # crossed matchings may produce loops/parallel edges; they are kept
    g.allows_self_loops = True
    g.allows_multi_edges = True
    b = g.ev[e1]
    # coin picks which endpoint of e2 trades places with b
    if rng.random() < 0.5:
        x = g.eu[e2]
        g.eu[e2] = b
    else:
        x = g.ev[e2]
        g.ev[e2] = b
    g.ev[e1] = x
    g.inc[b].remove(e1)
    g.inc[x].append(e1)
    g.inc[x].remove(e2)
    g.inc[b].append(e2)


def count_discordant(g, opinions) -> int:
    """Number of edges whose endpoints hold different opinions.

    Parallel edges count once per edge id; self-loops are never discordant.
    Accepts a raw 0/1 sequence or anything with an ``.opinions`` attribute.
    """
    ops = getattr(opinions, "opinions", opinions)
    if len(ops) != g.n:
        raise InvalidParameterError("opinion vector length != vertex count")
    if isinstance(g, DirectedGraph):
        return sum(1 for t, h in g.arcs() if ops[t] != ops[h])
    return sum(1 for u, v in g.edges() if ops[u] != ops[v])


# ----------------------------------------------------------------------
# serialization: one "u v" pair per line under a "# n=<N> directed=<0|1>" header
# ----------------------------------------------------------------------

def edgelist_text(g) -> str:
    directed = isinstance(g, DirectedGraph)
    lines = [f"# n={g.n} directed={1 if directed else 0}"]
    pairs = g.arcs() if directed else g.edges()
    lines.extend(f"{u} {v}" for u, v in pairs)
    return "\n".join(lines) + "\n"


def write_edgelist(g, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(edgelist_text(g))


def parse_edgelist(text: str):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise InvalidParameterError("missing '# n=<N> directed=<0|1>' header")
    fields = dict(tok.split("=") for tok in lines[0][1:].split())
    n = int(fields["n"])
    directed = bool(int(fields.get("directed", "0")))
    if directed:
        g = DirectedGraph(n)
        for ln in lines[1:]:
            t, h = ln.split()
            g.add_arc(int(t), int(h))
        return g
    g = Graph(n)
    for ln in lines[1:]:
        u, v = ln.split()
        g.add_edge(int(u), int(v))
    return g


def read_edgelist(path):
    with open(path) as fh:
        return parse_edgelist(fh.read())
