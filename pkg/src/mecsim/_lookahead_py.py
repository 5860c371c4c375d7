"""Pure-Python lookahead search; mirrors ``_lookahead.pyx`` operation for operation."""
from __future__ import annotations


def _child_battery(B, H, theta, B_up, B_max):
    E = 0.0 if B + H >= B_up else B_up - B
    raw = B + H - theta + E
    if raw < 0:
        return -1.0
    return B_max if raw > B_max else raw


def tree_search(stages, harvest, B0, B_low, B_up, B_max):
    """Exhaustive breadth-first expansion of every control sequence.

    ``stages[n][i][j]`` is the slot-n energy of candidate j reached from
    candidate i of slot n-1 (slot 0 has a single parent row). Children whose
    buffer would drop below ``B_low`` are not expanded.

    Returns ``(first, cost, path)``; ``first == -1`` when nothing is feasible.
    Ties on cost go to the lower first index, then to the earlier path.
    """
    level_cand = [0]
    level_cost = [0.0]
    level_B = [B0]
    level_first = [-1]
    cand_levels, parents = [], []
    for n, stage in enumerate(stages):
        H = harvest[n]
        nc, ncost, nB, nfirst, npar = [], [], [], [], []
        for k in range(len(level_cand)):
            row = stage[level_cand[k]]
            B = level_B[k]
            cost = level_cost[k]
            for j in range(len(row)):
                theta = row[j]
                Bn = _child_battery(B, H, theta, B_up, B_max)
                if Bn < B_low:
                    continue
                nc.append(j)
                ncost.append(cost + theta)
                nB.append(Bn)
                nfirst.append(j if n == 0 else level_first[k])
                npar.append(k)
        level_cand, level_cost, level_B, level_first = nc, ncost, nB, nfirst
        cand_levels.append(nc)
        parents.append(npar)
        if not level_cand:
            return -1, float("inf"), []
    best = 0
    for k in range(1, len(level_cand)):
        if level_cost[k] < level_cost[best] or (
                level_cost[k] == level_cost[best] and level_first[k] < level_first[best]):
            best = k
    path = [0] * len(stages)
    node = best
    for n in range(len(stages) - 1, -1, -1):
        path[n] = cand_levels[n][node]
        node = parents[n][node]
    return level_first[best], level_cost[best], path


def dp_search(stages, harvest, B0, B_low, B_up, B_max):
    """Merged-state search keyed on (candidate, first action).

    Exact only when no node can breach ``B_low``; the caller checks that
    certificate before choosing this path. Returns ``(first, cost)``.
    """
    # best[first][j] = minimal accumulated cost at the current depth
    first_row = stages[0][0]
    best = {f: {f: first_row[f]} for f in range(len(first_row))}
    for n in range(1, len(stages)):
        stage = stages[n]
        nxt = {}
        for f, ends in best.items():
            acc = {}
            for i, c in ends.items():
                row = stage[i]
                for j in range(len(row)):
                    v = c + row[j]
                    if j not in acc or v < acc[j]:
                        acc[j] = v
            nxt[f] = acc
        best = nxt
    first, cost = -1, float("inf")
    for f in sorted(best):
        v = min(best[f].values())
        if v < cost:
            first, cost = f, v
    return first, cost
