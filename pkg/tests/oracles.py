"""Independent reference implementations used by the tests.

Nothing here imports the package: trees are plain lists of dicts and every
rule is written straight from its definition, favouring clarity over speed.
"""

from __future__ import annotations

import numpy as np

MAX_DIST = 6


class RefTree:
    """Plain tree: block 0 is genesis."""

    def __init__(self):
        self.parent = [-1]
        self.height = [0]
        self.miner = [None]
        self.refs = [()]
        self.status = ["public"]

    def __len__(self):
        return len(self.parent)

    def add(self, parent, miner, refs=(), status="public"):
        self.parent.append(parent)
        self.height.append(self.height[parent] + 1)
        self.miner.append(miner)
        self.refs.append(tuple(refs))
        self.status.append(status)
        return len(self.parent) - 1

    def path(self, b):
        out = []
        while b != -1:
            out.append(b)
            b = self.parent[b]
        return out

    def score(self, b, weight):
        return sum(1 + weight * len(self.refs[a]) for a in self.path(b) if a != 0)


def eligible(tree: RefTree, parent: int, selfish_view=False, own_only=False):
    """Uncle candidates for a new child of ``parent`` by direct enumeration."""
    path = tree.path(parent)
    on_path = set(path)
    used = {u for a in path for u in tree.refs[a]}
    h_new = tree.height[parent] + 1
    found = []
    for u in range(1, len(tree)):
        if u in on_path or u in used:
            continue
        if tree.parent[u] not in on_path:
            continue
        d = h_new - tree.height[u]
        if not 1 <= d <= MAX_DIST:
            continue
        st = tree.status[u]
        if selfish_view:
            if st == "discarded":
                continue
        elif st != "public":
            continue
        if own_only and tree.miner[u] != "S":
            continue
        found.append((-d, u))
    return [u for _, u in sorted(found)]


def best_tips(tree: RefTree, weight=0):
    pub = [b for b in range(len(tree)) if tree.status[b] == "public"]
    top = max(tree.score(b, weight) for b in pub)
    return [b for b in pub if tree.score(b, weight) == top]


def classify(tree: RefTree, chain):
    """Map block -> 'R' / 'U<d>' / 'S' for every non-genesis block."""
    on_chain = set(chain)
    out = {}
    for b in range(1, len(tree)):
        out[b] = "R" if b in on_chain else "S"
    for b in chain:
        for u in tree.refs[b]:
            out[u] = f"U{tree.height[b] - tree.height[u]}"
    return out


def rewards(tree: RefTree, classes):
    """Revenue per miner letter: regular 1, uncle (8-d)/8, 1/32 per reference."""
    rev = {"H": 0.0, "S": 0.0}
    for b, c in classes.items():
        m = tree.miner[b]
        if c == "R":
            rev[m] += 1.0 + len(tree.refs[b]) / 32
        elif c.startswith("U"):
            rev[m] += (8 - int(c[1:])) / 8
    return rev


def eyal_sirer_markov(alpha, gamma=0.5, n_states=400):
    """Relative selfish revenue from the stationary law of the lead chain.

    States: 0, tie (index 1), lead k at index k+1.  Revenue per transition
    follows the classic accounting.
    """
    a, b = alpha, 1 - alpha
    n = n_states
    P = np.zeros((n, n))
    rs = np.zeros((n, n))
    rh = np.zeros((n, n))
    # 0
    P[0, 2] = a
    P[0, 0] = b
    rh[0, 0] = 1
    # tie resolves to 0 in one block
    P[1, 0] = 1.0
    rs[1, 0] = a * 2 + gamma * b * 1
    rh[1, 0] = gamma * b * 1 + (1 - gamma) * b * 2
    # lead 1
    P[2, 3] = a
    P[2, 1] = b
    # lead 2
    P[3, 4] = a
    P[3, 0] = b
    rs[3, 0] = 2
    for k in range(3, n - 1):
        i = k + 1
        if i + 1 < n:
            P[i, i + 1] = a
        else:
            P[i, i] += a
        P[i, i - 1] = b
        rs[i, i - 1] = 1
    # stationary distribution
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(abs(w - 1))])
    pi = pi / pi.sum()
    # rs[1,0] / rh[1,0] are already expectations over the tie outcome
    ers = sum(pi[i] * (rs[i, j] if i == 1 else P[i, j] * rs[i, j])
              for i in range(n) for j in range(n))
    erh = sum(pi[i] * (rh[i, j] if i == 1 else P[i, j] * rh[i, j])
              for i in range(n) for j in range(n))
    return ers / (ers + erh)
