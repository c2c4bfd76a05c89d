"""Exact inference: variable elimination and dense joint-table helpers.

All probabilities are combined in linear space; callers accumulate logs.
Elimination orderings come from a deterministic min-fill heuristic with
lexicographic tie-breaking so results are bit-reproducible across runs.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .errors import BudgetError, DataError, ZeroSupportError
from .network import Network

DENSE_TABLE_BUDGET = 1 << 16
ENUM_BUDGET = 1 << 20

Factor = tuple[tuple[int, ...], np.ndarray]  # sorted node indices, table


def evidence_indices(net: Network, evidence: Mapping[str, str]) -> dict[int, int]:
    """Map {node name: state label} evidence to {node index: state index}."""
    out = {}
    for name, label in evidence.items():
        if name not in net.node_index:
            raise DataError(f"unknown node {name!r}")
        out[net.node_index[name]] = net.state_index(name, label)
    return out


def _node_factors(net: Network) -> list[Factor]:
    factors = []
    for i in range(len(net.nodes)):
        axes = tuple(net.parent_index[i]) + (i,)
        shape = tuple(net.cards[a] for a in axes)
        table = net.cpts[i].reshape(shape)
        order = tuple(np.argsort(axes))
        factors.append((tuple(sorted(axes)), np.transpose(table, order)))
    return factors


def _clamp(factor: Factor, ev: Mapping[int, int]) -> Factor:
    axes, table = factor
    keep = []
    index: list[object] = []
    for a in axes:
        if a in ev:
            index.append(ev[a])
        else:
            index.append(slice(None))
            keep.append(a)
    return tuple(keep), table[tuple(index)]


def _multiply(f1: Factor, f2: Factor) -> Factor:
    a1, t1 = f1
    a2, t2 = f2
    axes = tuple(sorted(set(a1) | set(a2)))
    def expand(a, t):
        shape = [1] * len(axes)
        for ax, size in zip(a, t.shape):
            shape[axes.index(ax)] = size
        return t.reshape(shape)
    return axes, expand(a1, t1) * expand(a2, t2)


def _sum_out(factor: Factor, v: int) -> Factor:
    axes, table = factor
    pos = axes.index(v)
    return axes[:pos] + axes[pos + 1 :], table.sum(axis=pos)


def _min_fill_order(
    net: Network, scopes: Sequence[tuple[int, ...]], eliminate: set[int]
) -> list[int]:
    """Greedy min-fill over the interaction graph; ties break on node name."""
    adj: dict[int, set[int]] = {}
    for scope in scopes:
        for v in scope:
            adj.setdefault(v, set())
        for v in scope:
            adj[v].update(u for u in scope if u != v)
    for v in eliminate:
        adj.setdefault(v, set())
    order = []
    todo = set(eliminate)
    while todo:
        best = None
        for v in sorted(todo, key=lambda i: net.nodes[i].name):
            nbrs = [u for u in adj[v] if u != v]
            fill = sum(
                1
                for ai in range(len(nbrs))
                for bi in range(ai + 1, len(nbrs))
                if nbrs[bi] not in adj[nbrs[ai]]
            )
            if best is None or fill < best[0]:
                best = (fill, v)
        v = best[1]
        nbrs = [u for u in adj[v] if u != v]
        for a in nbrs:
            for b in nbrs:
                if a != b:
                    adj[a].add(b)
        for u in nbrs:
            adj[u].discard(v)
        del adj[v]
        todo.discard(v)
        order.append(v)
    return order


def _run_ve(
    net: Network, ev: Mapping[int, int], keep: set[int]
) -> tuple[list[Factor], float]:
    """Clamp evidence, eliminate everything outside `keep`, return remains."""
    scalar = 1.0
    factors: list[Factor] = []
    for f in _node_factors(net):
        axes, table = _clamp(f, ev)
        if not axes:
            scalar *= float(table)
        else:
            factors.append((axes, table))
    eliminate = {
        v for axes, _ in factors for v in axes if v not in keep and v not in ev
    }
    order = _min_fill_order(net, [f[0] for f in factors], eliminate)
    for v in order:
        touching = [f for f in factors if v in f[0]]
        if not touching:
            continue
        factors = [f for f in factors if v not in f[0]]
        prod = touching[0]
        for f in touching[1:]:
            prod = _multiply(prod, f)
        axes, table = _sum_out(prod, v)
        if not axes:
            scalar *= float(table)
        else:
            factors.append((axes, table))
    return factors, scalar


def evidence_probability(net: Network, evidence: Mapping[str, str]) -> float:
    """P(X in U) for a missing-value observation, by variable elimination.

    `evidence` holds the observed variables; everything else is summed out.
    """
    ev = evidence_indices(net, evidence)
    factors, scalar = _run_ve(net, ev, keep=set())
    for axes, table in factors:
        scalar *= float(table.sum())
    return scalar


def joint_marginal(
    net: Network, query: Sequence[str], evidence: Mapping[str, str] | None = None
) -> np.ndarray:
    """Unnormalized P(query vars, evidence) as an array over the query cards.

    Axes follow the requested query order; observed query variables carry
    their whole axis with mass only at the observed state.
    """
    evidence = evidence or {}
    qidx = []
    for n in query:
        if n not in net.node_index:
            raise DataError(f"unknown node {n!r}")
        qidx.append(net.node_index[n])
    ev = evidence_indices(net, evidence)
    keep = {i for i in qidx if i not in ev}
    factors, scalar = _run_ve(net, ev, keep)
    prod: Factor | None = None
    for f in factors:
        prod = f if prod is None else _multiply(prod, f)
    out_shape = tuple(net.cards[i] for i in qidx)
    out = np.zeros(out_shape)
    # Embed the eliminated result into the query axes; observed query
    # variables become point coordinates.
    index: list[object] = []
    free_axes: list[int] = []
    for i in qidx:
        if i in ev:
            index.append(ev[i])
        else:
            index.append(slice(None))
            free_axes.append(i)
    if prod is None:
        block = np.array(scalar)
    else:
        axes, table = prod
        extra = [v for v in axes if v not in free_axes]
        for v in extra:  # query-independent leftovers: sum them away
            axes, table = _sum_out((axes, table), v)
        # axes is sorted; rearrange to the order free_axes appear in qidx
        perm = [axes.index(v) for v in sorted(free_axes)]
        table = np.transpose(table, perm) if perm else table
        want = [v for v in qidx if v not in ev]
        cur = sorted(free_axes)
        table = np.transpose(table, [cur.index(v) for v in want])
        block = table * scalar
    out[tuple(index)] = block
    return out


def full_joint_table(net: Network, budget: int = ENUM_BUDGET) -> np.ndarray:
    """Dense joint distribution over all nodes (C order)."""
    if net.n_assignments > budget:
        raise BudgetError(
            f"state space {net.n_assignments} exceeds dense budget {budget}"
        )
    full = np.ones(net.cards)
    k = len(net.nodes)
    for i in range(len(net.nodes)):
        axes = tuple(net.parent_index[i]) + (i,)
        table = net.cpts[i].reshape(tuple(net.cards[a] for a in axes))
        order = tuple(np.argsort(axes))
        table = np.transpose(table, order)
        shape = [1] * k
        for ax, size in zip(sorted(axes), table.shape):
            shape[ax] = size
        full = full * table.reshape(shape)
    return full


def posterior_family_marginals(
    net: Network,
    evidence: Mapping[str, str],
    dense_budget: int = DENSE_TABLE_BUDGET,
) -> dict[str, np.ndarray]:
    """P(node, parents | X in U) per node, shaped like that node's CPT.

    Each table is a proper joint distribution over (parent config, state);
    raises ZeroSupportError when the evidence itself has probability zero.
    Small state spaces marginalize a dense joint table; larger ones run one
    elimination query per family.
    """
    ev = evidence_indices(net, evidence)
    out: dict[str, np.ndarray] = {}
    if net.n_assignments <= dense_budget:
        table = full_joint_table(net)
        index = tuple(ev.get(i, slice(None)) for i in range(len(net.nodes)))
        block = table[index]
        p_ev = float(block.sum())
        if p_ev <= 0.0:
            raise ZeroSupportError("evidence has probability zero under the model")
        free = [i for i in range(len(net.nodes)) if i not in ev]
        for i, spec in enumerate(net.nodes):
            fam = list(net.parent_index[i]) + [i]
            drop = tuple(
                ax for ax, v in enumerate(free) if v not in fam
            )
            sub = block.sum(axis=drop) if drop else block
            # sub has axes for family members missing in the evidence, in
            # node-index order; expand to the full family table.
            fam_free = [v for v in free if v in fam]
            full_fam = np.zeros(tuple(net.cards[v] for v in fam))
            idx = tuple(
                ev[v] if v in ev else slice(None) for v in fam
            )
            want = [v for v in fam if v not in ev]
            cur = sorted(fam_free)
            sub = np.transpose(sub, [cur.index(v) for v in want]) if want else sub
            full_fam[idx] = sub
            out[spec.name] = full_fam.reshape(net.n_rows[i], net.cards[i]) / p_ev
        return out

    p_ev = evidence_probability(net, evidence)
    if p_ev <= 0.0:
        raise ZeroSupportError("evidence has probability zero under the model")
    for i, spec in enumerate(net.nodes):
        fam_names = [net.nodes[p].name for p in net.parent_index[i]] + [spec.name]
        marg = joint_marginal(net, fam_names, evidence)
        out[spec.name] = marg.reshape(net.n_rows[i], net.cards[i]) / p_ev
    return out
