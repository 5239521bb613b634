"""Rooted event trees and processes adapted to them.

A scenario tree encodes a finite filtration: the depth-t nodes are the atoms
of the time-t information set, and every node carries the conditional
probability of being reached from its parent.  Conditional probabilities are
the stored primitive; absolute node weights are derived as path products so
that measure changes stay node-local.

Processes are stored as flat arrays indexed by node position (depth-first
order).  A predictable holding carried from time t into t+1 lives on the
time-t node, which enforces measurability by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ValidationError

PROB_TOL = 1e-12


@dataclass(frozen=True)
class ScenarioTree:
    """Immutable rooted event tree with strictly positive conditional probs.

    Nodes are kept in depth-first order; ``parents[i]`` is the position of
    node i's parent (-1 for the root) and ``probs[i]`` its conditional
    probability given the parent (exactly 1.0 at the root).
    """

    horizon: int
    ids: tuple[str, ...]
    times: np.ndarray
    parents: np.ndarray
    probs: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.ids)

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.ids)}

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, p in enumerate(self.parents):
            if p >= 0:
                kids[p].append(i)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.times == self.horizon)

    @cached_property
    def leaf_pos(self) -> dict[int, int]:
        return {int(n): k for k, n in enumerate(self.leaves)}

    @cached_property
    def leaf_range(self) -> np.ndarray:
        """Half-open range [lo, hi) of leaf positions under each node.

        Valid because nodes are in depth-first order, so the leaves of a
        subtree are contiguous in the leaf enumeration.
        """
        lo = np.full(self.n_nodes, -1, dtype=np.int64)
        hi = np.full(self.n_nodes, -1, dtype=np.int64)
        for k, n in enumerate(self.leaves):
            m = int(n)
            while m >= 0:
                if lo[m] < 0:
                    lo[m] = k
                hi[m] = k + 1
                m = int(self.parents[m])
        return np.stack([lo, hi], axis=1)

    @cached_property
    def node_weight(self) -> np.ndarray:
        """Absolute probability of each node under the physical measure."""
        w = np.empty(self.n_nodes)
        for i in range(self.n_nodes):
            p = self.parents[i]
            w[i] = self.probs[i] if p < 0 else w[p] * self.probs[i]
        return w

    def nodes_at(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.times == t)

    def node(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise ValidationError(f"unknown node {name!r}") from None


@dataclass(frozen=True)
class AdaptedProcess:
    """Node-indexed values; row i is the value revealed at node i."""

    tree: ScenarioTree
    values: np.ndarray


@dataclass(frozen=True)
class PredictableProcess:
    """Holdings carried one step ahead, stored on the decision node.

    ``values[n]`` is the position held from time(n) into time(n)+1; rows at
    terminal nodes are ignored.
    """

    tree: ScenarioTree
    values: np.ndarray


def build_tree(doc: dict) -> ScenarioTree:
    """Validate a tree-description document and normalize node order.

    The document lists the horizon and the nodes with parent links and
    conditional probabilities.  Node positions are normalized to depth-first
    order (children in document order); sibling probabilities must sum to 1
    within 1e-12 and are renormalized exactly afterwards.
    """
    try:
        horizon = int(doc["horizon"])
        raw_nodes = list(doc["nodes"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed tree document: {exc}") from exc
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    if not raw_nodes:
        raise ValidationError("tree document lists no nodes")

    seen: dict[str, dict] = {}
    for rec in raw_nodes:
        try:
            nid = str(rec["id"])
            rec = {
                "id": nid,
                "time": int(rec["time"]),
                "parent": None if rec["parent"] is None else str(rec["parent"]),
                "prob": float(rec["prob"]),
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed node record {rec!r}: {exc}") from exc
        if nid in seen:
            raise ValidationError(f"duplicate node id {nid!r}")
        seen[nid] = rec

    roots = [r for r in seen.values() if r["parent"] is None]
    if len(roots) != 1:
        raise ValidationError(f"expected exactly one root node, found {len(roots)}")
    root = roots[0]
    if root["time"] != 0:
        raise ValidationError(f"root node {root['id']} must have time 0")
    if abs(root["prob"] - 1.0) > PROB_TOL:
        raise ValidationError(f"root probability must be 1 at node {root['id']}")

    kids: dict[str, list[dict]] = {nid: [] for nid in seen}
    for rec in seen.values():
        if rec["parent"] is None:
            continue
        par = rec["parent"]
        if par not in seen:
            raise ValidationError(f"orphan node {rec['id']} (parent {par} not defined)")
        if rec["time"] != seen[par]["time"] + 1:
            raise ValidationError(
                f"time gap at node {rec['id']}: time {rec['time']} but parent "
                f"{par} has time {seen[par]['time']}"
            )
        kids[par].append(rec)

    for rec in seen.values():
        if rec["prob"] <= 0.0:
            raise ValidationError(f"nonpositive probability at node {rec['id']}")
        if rec["time"] > horizon:
            raise ValidationError(
                f"time gap at node {rec['id']}: time {rec['time']} exceeds horizon"
            )
        group = kids[rec["id"]]
        if rec["time"] < horizon:
            if not group:
                raise ValidationError(
                    f"time gap at node {rec['id']}: no children before horizon"
                )
            total = sum(c["prob"] for c in group)
            if abs(total - 1.0) > PROB_TOL:
                raise ValidationError(
                    f"children probabilities sum ≠ 1 at node {rec['id']}"
                )
        elif group:
            raise ValidationError(
                f"node {rec['id']} at horizon {horizon} has children"
            )

    order: list[dict] = []
    stack = [root]
    while stack:
        rec = stack.pop()
        order.append(rec)
        stack.extend(reversed(kids[rec["id"]]))

    pos = {rec["id"]: i for i, rec in enumerate(order)}
    ids = tuple(rec["id"] for rec in order)
    times = np.array([rec["time"] for rec in order], dtype=np.int64)
    parents = np.array(
        [-1 if rec["parent"] is None else pos[rec["parent"]] for rec in order],
        dtype=np.int64,
    )
    probs = np.array([rec["prob"] for rec in order])

    # Exact renormalization: JSON round-trips leave 1e-16-size residue.
    probs[0] = 1.0
    for rec in order:
        group = kids[rec["id"]]
        if group:
            total = sum(c["prob"] for c in group)
            for c in group:
                probs[pos[c["id"]]] = c["prob"] / total

    tree = ScenarioTree(
        horizon=horizon, ids=ids, times=times, parents=parents, probs=probs
    )
    tree.times.setflags(write=False)
    tree.parents.setflags(write=False)
    tree.probs.setflags(write=False)
    return tree


def tree_to_doc(tree: ScenarioTree) -> dict:
    return {
        "horizon": tree.horizon,
        "nodes": [
            {
                "id": tree.ids[i],
                "time": int(tree.times[i]),
                "parent": None if tree.parents[i] < 0 else tree.ids[tree.parents[i]],
                "prob": float(tree.probs[i]),
            }
            for i in range(tree.n_nodes)
        ],
    }


def _check_conditionals(tree: ScenarioTree, q: np.ndarray) -> None:
    if np.any(q <= 0.0):
        bad = int(np.flatnonzero(q <= 0.0)[0])
        raise ValidationError(f"nonpositive probability at node {tree.ids[bad]}")
    for n in range(tree.n_nodes):
        group = tree.children[n]
        if group and abs(sum(q[c] for c in group) - 1.0) > 1e-9:
            raise ValidationError(
                f"children probabilities sum ≠ 1 at node {tree.ids[n]}"
            )


def conditional_expectation(
    tree: ScenarioTree,
    q: np.ndarray | None,
    values: np.ndarray,
    node: int,
    time: int,
    validate: bool = False,
) -> float | np.ndarray:
    """E_q[X | node] for X observed at ``time``, by backward induction.

    ``q`` holds conditional child probabilities per node (None uses the
    physical measure).  ``values`` must be defined on every time-``time``
    descendant of ``node``; trailing axes are carried through, so vector
    processes work unchanged.  Satisfies the tower identity exactly up to
    float rounding because it is literally iterated one-step averaging.
    """
    if q is None:
        q = tree.probs
    if validate:
        _check_conditionals(tree, q)
    t = int(tree.times[node])
    if t > time:
        raise ValidationError(
            f"node {tree.ids[node]} at time {t} is deeper than target time {time}"
        )
    values = np.asarray(values, dtype=float)
    acc = {int(m): values[m] for m in tree.nodes_at(time)}
    for s in range(time - 1, t - 1, -1):
        nxt = {}
        for m in tree.nodes_at(s):
            nxt[int(m)] = sum(q[c] * acc[c] for c in tree.children[m])
        acc = nxt
    return acc[int(node)]


def one_step_expectation(
    tree: ScenarioTree, q: np.ndarray | None, values: np.ndarray
) -> np.ndarray:
    """Per-node E_q[X_{t+1} | node]; rows at terminal nodes are zero."""
    if q is None:
        q = tree.probs
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    for n in range(tree.n_nodes):
        for c in tree.children[n]:
            out[n] += q[c] * values[c]
    return out


def path_cumsum(tree: ScenarioTree, incr: np.ndarray) -> np.ndarray:
    """Running sum of increments along each path from the root."""
    incr = np.asarray(incr, dtype=float)
    out = incr.copy()
    for n in range(tree.n_nodes):
        p = tree.parents[n]
        if p >= 0:
            out[n] += out[p]
    return out


def leaf_measure_to_conditionals(tree: ScenarioTree, q_leaf: np.ndarray) -> np.ndarray:
    """Convert strictly positive leaf probabilities to conditional probs."""
    q_leaf = np.asarray(q_leaf, dtype=float)
    if q_leaf.shape != tree.leaves.shape:
        raise ValidationError(
            f"measure has {q_leaf.size} entries for {tree.leaves.size} leaves"
        )
    if np.any(q_leaf <= 0.0):
        k = int(np.flatnonzero(q_leaf <= 0.0)[0])
        raise ValidationError(
            f"nonpositive probability at node {tree.ids[tree.leaves[k]]}"
        )
    mass = np.zeros(tree.n_nodes)
    for k, n in enumerate(tree.leaves):
        m = int(n)
        while m >= 0:
            mass[m] += q_leaf[k]
            m = int(tree.parents[m])
    cond = np.ones(tree.n_nodes)
    for n in range(tree.n_nodes):
        p = tree.parents[n]
        if p >= 0:
            cond[n] = mass[n] / mass[p]
    return cond


def conditionals_to_leaf_measure(tree: ScenarioTree, q: np.ndarray) -> np.ndarray:
    w = np.ones(tree.n_nodes)
    for n in range(tree.n_nodes):
        p = tree.parents[n]
        if p >= 0:
            w[n] = w[p] * q[n]
    return w[tree.leaves]
