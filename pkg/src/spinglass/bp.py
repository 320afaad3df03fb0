"""Belief propagation on pairwise undirected graphical models.

mu(x) proportional to prod_{(i,j) in E} psi_ij(x_i, x_j) over a finite
alphabet.  Messages live on directed edges; one synchronous sweep is

    nu_{i->j}(x_i) <- (1/Z) prod_{k in N(i)\\j} sum_{x_k} psi_ik(x_i, x_k) nu_{k->i}(x_k),

with the empty product (leaves) giving the uniform message.  On a tree
the sweeps converge exactly within diameter-many iterations, which the
enumeration oracle verifies.  The sweep driver accepts any update rule
with the same signature, so other message-passing schemes can plug in;
BP is the one shipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidInputError, ResourceLimitError

EXACT_MAX_STATES = 10_000_000


@dataclass
class GraphicalModel:
    """Simple graph with strictly positive pairwise tables.

    potentials maps (i, j) with i < j to a (q, q) array; orientation
    bookkeeping is psi_ij(a, b) = psi_ji(b, a), i.e. the transpose.
    """

    num_vertices: int
    alphabet: int
    potentials: dict

    def __post_init__(self):
        cleaned = {}
        for (i, j), table in self.potentials.items():
            if i == j:
                raise InvalidInputError("self-loops are not allowed")
            a, b = (i, j) if i < j else (j, i)
            t = np.asarray(table, dtype=float) if i < j else np.asarray(table, dtype=float).T
            if t.shape != (self.alphabet, self.alphabet):
                raise InvalidInputError(f"potential on edge {(a, b)} has shape {t.shape}")
            if np.any(t <= 0):
                raise InvalidInputError("potential tables must be strictly positive")
            if not (0 <= a < self.num_vertices and 0 <= b < self.num_vertices):
                raise InvalidInputError(f"edge {(a, b)} out of range")
            cleaned[(a, b)] = t
        self.potentials = cleaned
        self._build_index()

    def _build_index(self):
        self.edges = sorted(self.potentials)
        self.neighbors = [[] for _ in range(self.num_vertices)]
        for (i, j) in self.edges:
            self.neighbors[i].append(j)
            self.neighbors[j].append(i)
        self.directed = []
        self.dir_index = {}
        for (i, j) in self.edges:
            for (src, dst) in ((i, j), (j, i)):
                self.dir_index[(src, dst)] = len(self.directed)
                self.directed.append((src, dst))

    def table(self, i: int, j: int) -> np.ndarray:
        """psi_ij with the row axis indexed by x_i."""
        if (i, j) in self.potentials:
            return self.potentials[(i, j)]
        return self.potentials[(j, i)].T

    @property
    def num_directed(self) -> int:
        return len(self.directed)


@dataclass
class MessageSet:
    """One probability vector per directed edge, plus a sweep counter."""

    values: np.ndarray  # (num_directed, alphabet)
    iteration: int = 0

    def copy(self) -> "MessageSet":
        return MessageSet(values=self.values.copy(), iteration=self.iteration)

    def max_normalization_error(self) -> float:
        return float(np.max(np.abs(self.values.sum(axis=1) - 1.0)))


def uniform_messages(model: GraphicalModel) -> MessageSet:
    q = model.alphabet
    return MessageSet(values=np.full((model.num_directed, q), 1.0 / q))


def bp_step(model: GraphicalModel, messages: MessageSet, damping: float = 0.0) -> MessageSet:
    """One synchronous sweep reading only the previous message set."""
    if not 0.0 <= damping < 1.0:
        raise InvalidInputError("damping must lie in [0, 1)")
    q = model.alphabet
    old = messages.values
    # incoming aggregate: for each directed edge k->i, the vector
    # sum_{x_k} psi_ik(x_i, x_k) nu_{k->i}(x_k)
    incoming = np.empty_like(old)
    for idx, (k, i) in enumerate(model.directed):
        incoming[idx] = model.table(i, k) @ old[idx]
    new = np.empty_like(old)
    for idx, (i, j) in enumerate(model.directed):
        prod = np.ones(q)
        for k in model.neighbors[i]:
            if k == j:
                continue
            prod = prod * incoming[model.dir_index[(k, i)]]
        z = prod.sum()
        if z <= 0:
            raise InvalidInputError("zero normalizer: potentials must be strictly positive")
        new[idx] = prod / z
    if damping > 0:
        new = damping * old + (1 - damping) * new
        new /= new.sum(axis=1, keepdims=True)
    return MessageSet(values=new, iteration=messages.iteration + 1)


def run_mp(
    model: GraphicalModel,
    sweep,
    max_iters: int,
    tol: float,
    messages: MessageSet | None = None,
) -> tuple[MessageSet, bool, int]:
    """Generic synchronous message-passing driver.

    `sweep(model, messages)` returns the next message set; iteration
    stops when the max directed-edge sup-change drops below tol.
    Non-convergence is a reported state, not an error.
    """
    if max_iters < 1:
        raise InvalidInputError("need at least one sweep")
    msgs = uniform_messages(model) if messages is None else messages
    for it in range(1, max_iters + 1):
        nxt = sweep(model, msgs)
        delta = float(np.max(np.abs(nxt.values - msgs.values))) if msgs.values.size else 0.0
        msgs = nxt
        if delta < tol:
            return msgs, True, it
    return msgs, False, max_iters


def run_bp(
    model: GraphicalModel,
    max_iters: int = 100,
    tol: float = 1e-12,
    damping: float = 0.0,
    messages: MessageSet | None = None,
) -> tuple[MessageSet, bool, int]:
    return run_mp(
        model,
        lambda mdl, msg: bp_step(mdl, msg, damping=damping),
        max_iters=max_iters,
        tol=tol,
        messages=messages,
    )


def bp_marginals(model: GraphicalModel, messages: MessageSet) -> np.ndarray:
    """Beliefs: belief_i proportional to the product over all neighbors
    of the aggregated incoming messages."""
    q = model.alphabet
    out = np.full((model.num_vertices, q), 1.0)
    for i in range(model.num_vertices):
        for k in model.neighbors[i]:
            out[i] *= model.table(i, k) @ messages.values[model.dir_index[(k, i)]]
        out[i] /= out[i].sum()
    return out


def exact_marginals(model: GraphicalModel) -> np.ndarray:
    """Marginals by full enumeration with log-space accumulation."""
    n = model.num_vertices
    q = model.alphabet
    total = q**n
    if total > EXACT_MAX_STATES:
        raise ResourceLimitError(f"state space {total} exceeds {EXACT_MAX_STATES}")
    logt = {e: np.log(t) for e, t in model.potentials.items()}
    acc = np.full((n, q), -np.inf)
    block = 1 << 16
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total))
        states = np.empty((len(idx), n), dtype=np.int64)
        rem = idx.copy()
        for v in range(n - 1, -1, -1):
            states[:, v] = rem % q
            rem //= q
        logw = np.zeros(len(idx))
        for (i, j), lt in logt.items():
            logw += lt[states[:, i], states[:, j]]
        for v in range(n):
            for a in range(q):
                mask = states[:, v] == a
                if np.any(mask):
                    acc[v, a] = np.logaddexp(acc[v, a], logsumexp(logw[mask]))
    out = np.exp(acc - logsumexp(acc, axis=1, keepdims=True))
    return out


def tree_diameter(model: GraphicalModel) -> int:
    """Diameter in edges (BFS twice); assumes the graph is connected."""
    def farthest(start):
        dist = {start: 0}
        frontier = [start]
        far, fard = start, 0
        while frontier:
            nxt = []
            for u in frontier:
                for w in model.neighbors[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        if dist[w] > fard:
                            far, fard = w, dist[w]
                        nxt.append(w)
            frontier = nxt
        return far, fard

    if model.num_vertices <= 1:
        return 0
    a, _ = farthest(0)
    _, d = farthest(a)
    return d


# ---------------------------------------------------------------------------
# model file format


def write_model(model: GraphicalModel) -> str:
    """Edge-list text format: header "n q", then one line per edge
    "i j psi(0,0) psi(0,1) ... psi(q-1,q-1)" row-major in x_i, x_j."""
    lines = [f"{model.num_vertices} {model.alphabet}"]
    for (i, j) in model.edges:
        flat = " ".join(f"{v:.12g}" for v in model.potentials[(i, j)].ravel())
        lines.append(f"{i} {j} {flat}")
    return "\n".join(lines) + "\n"


def read_model(text: str) -> GraphicalModel:
    lines = [ln for ln in text.strip().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise InvalidInputError("empty model file")
    head = lines[0].split()
    if len(head) != 2:
        raise InvalidInputError("header must be 'n alphabet_size'")
    n, q = int(head[0]), int(head[1])
    potentials = {}
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2 + q * q:
            raise InvalidInputError(f"edge line needs {2 + q * q} fields, got {len(parts)}")
        i, j = int(parts[0]), int(parts[1])
        table = np.array([float(v) for v in parts[2:]]).reshape(q, q)
        potentials[(i, j)] = table
    return GraphicalModel(num_vertices=n, alphabet=q, potentials=potentials)


def beliefs_to_csv(beliefs: np.ndarray) -> str:
    q = beliefs.shape[1]
    header = "vertex," + ",".join(f"p{a}" for a in range(q))
    lines = [header]
    for v, row in enumerate(beliefs):
        lines.append(f"{v}," + ",".join(f"{p:.12g}" for p in row))
    return "\n".join(lines) + "\n"
