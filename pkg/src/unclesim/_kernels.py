"""Compiled kernels over the flat block store.

Every block is one row of an ``int32`` matrix (see the column constants
below).  The public wrappers in :mod:`unclesim.chain`, :mod:`unclesim.strategy`
and :mod:`unclesim.engine` call into these functions, so the step logic
exists exactly once and the hot walk loop never leaves compiled code.

Random draws always come from a ``numpy.random.Generator`` passed in by the
caller; numba shares the bit generator state with the Python object.
"""

import numba as nb
import numpy as np

# block store columns
PARENT = 0
HEIGHT = 1
MINER = 2
UNCLE0 = 3
UNCLE1 = 4
PUBLISHED = 5
FIRST_CHILD = 6
NEXT_SIBLING = 7
SCORE = 8
NEXT_SAME_HEIGHT = 9
NCOLS = 10

NONE = -1

# miner identities
HONEST = 0
SELFISH = 1
NO_MINER = -1

# publication status
SECRET = 0
PUBLIC = 1
DISCARDED = 2

# meta slots
M_SIZE = 0
M_BEST = 1
M_NBEST = 2
NMETA = 3

# events
EV_SELFISH = 0
EV_REGULAR = 1
EV_STALE = 2

# uncle strategies
US_ALL = 0
US_OWN = 1
US_NONE = 2

# selfish state slots / phases
S_PHASE = 0
S_BASE = 1
S_TIP = 2
S_LEN = 3
S_OWN = 4
S_RIVAL = 5
NSTATE = 6

IDLE = 0
HIDING = 1
RACING = 2

MAX_DISTANCE = 6
MAX_CANDIDATES = 512

# walk counters
C_EV_SELFISH = 0
C_EV_REGULAR = 1
C_EV_STALE = 2
C_TIE_EVENTS = 3
C_EQUAL_RELEASES = 4
C_WEIGHT_WINS = 5
C_ABANDONED = 6
NCOUNTERS = 7


def new_store(capacity):
    """Allocate an empty store holding only genesis."""
    blocks = np.full((capacity, NCOLS), NONE, dtype=np.int32)
    blocks[0, HEIGHT] = 0
    blocks[0, PUBLISHED] = PUBLIC
    blocks[0, SCORE] = 0
    meta = np.zeros(NMETA, dtype=np.int64)
    meta[M_SIZE] = 1
    meta[M_BEST] = 0
    meta[M_NBEST] = 1
    best = np.zeros(capacity, dtype=np.int32)
    heads = np.full(capacity, NONE, dtype=np.int32)
    heads[0] = 0
    return blocks, meta, best, heads


@nb.njit(cache=True, inline="always")
def randint(gen, k):
    i = int(gen.random() * k)
    return k - 1 if i >= k else i


@nb.njit(cache=True, inline="always")
def publish(blocks, meta, best, b):
    if blocks[b, PUBLISHED] == PUBLIC:
        return
    blocks[b, PUBLISHED] = PUBLIC
    s = blocks[b, SCORE]
    if s > meta[M_BEST]:
        meta[M_BEST] = s
        best[0] = b
        meta[M_NBEST] = 1
    elif s == meta[M_BEST]:
        best[meta[M_NBEST]] = b
        meta[M_NBEST] += 1


@nb.njit(cache=True, inline="always")
def append(blocks, meta, best, heads, parent, miner, u0, u1, published,
           uncle_weight):
    b = meta[M_SIZE]
    h = blocks[parent, HEIGHT] + 1
    blocks[b, PARENT] = parent
    blocks[b, HEIGHT] = h
    blocks[b, NEXT_SAME_HEIGHT] = heads[h]
    heads[h] = b
    blocks[b, MINER] = miner
    blocks[b, UNCLE0] = u0
    blocks[b, UNCLE1] = u1
    blocks[b, PUBLISHED] = SECRET
    blocks[b, FIRST_CHILD] = NONE
    blocks[b, NEXT_SIBLING] = blocks[parent, FIRST_CHILD]
    blocks[parent, FIRST_CHILD] = b
    nref = (1 if u0 >= 0 else 0) + (1 if u1 >= 0 else 0)
    blocks[b, SCORE] = blocks[parent, SCORE] + 1 + uncle_weight * nref
    meta[M_SIZE] = b + 1
    if published:
        publish(blocks, meta, best, b)
    return b


@nb.njit(cache=True)
def eligible(blocks, parent, selfish_view, own_only, out, dist):
    """Fill ``out`` with uncle candidates for a child of ``parent``.

    Candidates are ordered most distant first, then by id.  Returns the
    candidate count.
    """
    refs = np.empty(2 * (MAX_DISTANCE - 1), dtype=np.int32)
    nr = 0
    a = parent
    for _ in range(MAX_DISTANCE - 1):
        if a < 0:
            break
        if blocks[a, UNCLE0] >= 0:
            refs[nr] = blocks[a, UNCLE0]
            nr += 1
        if blocks[a, UNCLE1] >= 0:
            refs[nr] = blocks[a, UNCLE1]
            nr += 1
        a = blocks[a, PARENT]

    n = 0
    child = parent
    anc = blocks[parent, PARENT]
    k = 1
    while anc >= 0 and k <= MAX_DISTANCE:
        c = blocks[anc, FIRST_CHILD]
        while c >= 0:
            ok = c != child
            if ok:
                st = blocks[c, PUBLISHED]
                if selfish_view:
                    ok = st != DISCARDED
                else:
                    ok = st == PUBLIC
            if ok and own_only:
                ok = blocks[c, MINER] == SELFISH
            if ok:
                for j in range(nr):
                    if refs[j] == c:
                        ok = False
                        break
            if ok:
                if n >= out.shape[0]:
                    raise ValueError("too many uncle candidates")
                out[n] = c
                dist[n] = k
                n += 1
            c = blocks[c, NEXT_SIBLING]
        child = anc
        anc = blocks[anc, PARENT]
        k += 1

    # insertion sort: distance descending, id ascending
    for i in range(1, n):
        ci = out[i]
        di = dist[i]
        j = i - 1
        while j >= 0 and (dist[j] < di or (dist[j] == di and out[j] > ci)):
            out[j + 1] = out[j]
            dist[j + 1] = dist[j]
            j -= 1
        out[j + 1] = ci
        dist[j + 1] = di
    return n


@nb.njit(cache=True, inline="always")
def select_uncles(blocks, parent, strategy, selfish_view, p, gen, out, dist):
    """Pick up to two uncle references for a child of ``parent``.

    Slot ``j`` holds the ``j``-th most distant candidate and is filled with
    probability ``p``; an unfilled slot passes its candidate to the next.
    """
    if strategy == US_NONE or p <= 0.0:
        return NONE, NONE
    n = eligible(blocks, parent, selfish_view, strategy == US_OWN, out, dist)
    u0 = NONE
    u1 = NONE
    i = 0
    for slot in range(2):
        if i >= n:
            break
        if p >= 1.0 or gen.random() < p:
            if u0 < 0:
                u0 = out[i]
            else:
                u1 = out[i]
            i += 1
    return u0, u1


@nb.njit(cache=True, inline="always")
def pick_best(meta, best, gen):
    k = meta[M_NBEST]
    if k == 1:
        return best[0]
    return best[randint(gen, k)]


@nb.njit(cache=True, inline="always")
def honest_step(blocks, meta, best, heads, event, strategy, p, miner,
                uncle_weight, gen, out, dist):
    """Mine one honest block; returns its id.  Always published."""
    if event == EV_STALE and meta[M_NBEST] == 1 and best[0] == 0:
        event = EV_REGULAR
    if event == EV_REGULAR:
        parent = pick_best(meta, best, gen)
    else:
        # rival to the best public block: a distinct parent of some public
        # block at tip height
        q = heads[blocks[best[0], HEIGHT]]
        npar = 0
        while q >= 0:
            if blocks[q, PUBLISHED] == PUBLIC:
                par = blocks[q, PARENT]
                seen = False
                for i in range(npar):
                    if out[i] == par:
                        seen = True
                        break
                if not seen:
                    if npar >= out.shape[0]:
                        raise ValueError("too many stale positions")
                    out[npar] = par
                    npar += 1
            q = blocks[q, NEXT_SAME_HEIGHT]
        parent = out[0] if npar == 1 else out[randint(gen, npar)]
    u0, u1 = select_uncles(blocks, parent, strategy, False, p, gen, out, dist)
    return append(blocks, meta, best, heads, parent, miner, u0, u1, True, uncle_weight)


@nb.njit(cache=True, inline="always")
def publish_fork(blocks, meta, best, st, pubs):
    """Publish the secret fork root-first; returns the number published."""
    n = st[S_LEN]
    b = st[S_TIP]
    for i in range(n - 1, -1, -1):
        pubs[i] = b
        b = blocks[b, PARENT]
    for i in range(n):
        publish(blocks, meta, best, pubs[i])
    return n


@nb.njit(cache=True, inline="always")
def discard_fork(blocks, st):
    b = st[S_TIP]
    for _ in range(st[S_LEN]):
        blocks[b, PUBLISHED] = DISCARDED
        b = blocks[b, PARENT]


@nb.njit(cache=True, inline="always")
def reset(st):
    st[S_PHASE] = IDLE
    st[S_BASE] = NONE
    st[S_TIP] = NONE
    st[S_LEN] = 0
    st[S_OWN] = NONE
    st[S_RIVAL] = NONE


@nb.njit(cache=True, inline="always")
def selfish_mine(blocks, meta, best, heads, st, strategy, p, uncle_weight, gen,
                 out, dist, pubs):
    """The selfish miner finds a block; returns the number of publications."""
    phase = st[S_PHASE]
    if phase == IDLE:
        k = meta[M_NBEST]
        nown = 0
        # a tie that includes an own tip is a race in all but name
        for i in range(k if k > 1 else 0):
            if blocks[best[i], MINER] == SELFISH:
                pubs[nown] = best[i]
                nown += 1
        if nown > 0:
            parent = pubs[0] if nown == 1 else pubs[randint(gen, nown)]
            u0, u1 = select_uncles(blocks, parent, strategy, True, p, gen, out, dist)
            b = append(blocks, meta, best, heads, parent, SELFISH, u0, u1, True, uncle_weight)
            pubs[0] = b
            return 1
        parent = pick_best(meta, best, gen)
        u0, u1 = select_uncles(blocks, parent, strategy, True, p, gen, out, dist)
        b = append(blocks, meta, best, heads, parent, SELFISH, u0, u1, False, uncle_weight)
        st[S_PHASE] = HIDING
        st[S_BASE] = parent
        st[S_TIP] = b
        st[S_LEN] = 1
        return 0
    if phase == HIDING:
        parent = st[S_TIP]
        u0, u1 = select_uncles(blocks, parent, strategy, True, p, gen, out, dist)
        b = append(blocks, meta, best, heads, parent, SELFISH, u0, u1, False, uncle_weight)
        st[S_TIP] = b
        st[S_LEN] += 1
        return 0
    # racing: only ever extend the formerly secret block
    parent = st[S_OWN]
    u0, u1 = select_uncles(blocks, parent, strategy, True, p, gen, out, dist)
    b = append(blocks, meta, best, heads, parent, SELFISH, u0, u1, True, uncle_weight)
    pubs[0] = b
    reset(st)
    return 1


@nb.njit(cache=True, inline="always")
def selfish_react(blocks, meta, best, st, prev_best, new_block,
                  pubs, counters):
    """React to an honest block; returns the number of publications.

    ``prev_best`` is the best public score before the honest block arrived.
    """
    phase = st[S_PHASE]
    if phase == IDLE or meta[M_BEST] <= prev_best:
        return 0
    if phase == RACING:
        reset(st)
        return 0
    tip = st[S_TIP]
    lead = blocks[tip, SCORE] - meta[M_BEST]
    if lead >= 2:
        return 0
    if lead < 0:
        # outweighed: give up the fork but let it serve as uncles
        n = publish_fork(blocks, meta, best, st, pubs)
        counters[C_ABANDONED] += 1
        reset(st)
        return n
    # a release: the public best is about to be matched or beaten
    top = best[0]
    if blocks[tip, HEIGHT] == blocks[top, HEIGHT]:
        counters[C_EQUAL_RELEASES] += 1
        if lead > 0:
            counters[C_WEIGHT_WINS] += 1
    n = publish_fork(blocks, meta, best, st, pubs)
    if lead == 0:
        st[S_PHASE] = RACING
        st[S_OWN] = tip
        st[S_RIVAL] = new_block
        st[S_BASE] = NONE
        st[S_TIP] = NONE
        st[S_LEN] = 0
    else:
        reset(st)
    return n


@nb.njit(cache=True, inline="always")
def sample_event(alpha, delta, gen):
    u = gen.random()
    if u < alpha:
        return EV_SELFISH
    if u < alpha + delta * (1.0 - alpha):
        return EV_STALE
    return EV_REGULAR


@nb.njit(cache=True)
def finalize(blocks, meta, best, st, pubs):
    """Resolve a walk's border: publish a strictly better secret fork, else drop it."""
    n = 0
    if st[S_PHASE] == HIDING:
        if blocks[st[S_TIP], SCORE] > meta[M_BEST]:
            n = publish_fork(blocks, meta, best, st, pubs)
        else:
            discard_fork(blocks, st)
    reset(st)
    return n


@nb.njit(cache=True)
def walk(blocks, meta, best, heads, st, n_events, alpha, delta, selfish_mining,
         s_strategy, s_p, h_strategy, h_p, uncle_weight, gen, counters,
         gamma_acc):
    out = np.empty(MAX_CANDIDATES, dtype=np.int32)
    dist = np.empty(MAX_CANDIDATES, dtype=np.int32)
    pubs = np.empty(blocks.shape[0], dtype=np.int32)
    for _ in range(n_events):
        ev = sample_event(alpha, delta, gen)
        miner = HONEST
        if ev == EV_SELFISH:
            counters[C_EV_SELFISH] += 1
            if selfish_mining:
                selfish_mine(blocks, meta, best, heads, st, s_strategy, s_p,
                             uncle_weight, gen, out, dist, pubs)
                continue
            # honest counterfactual: the alpha party publishes like the network
            ev = EV_REGULAR
            miner = SELFISH
        elif ev == EV_STALE and meta[M_NBEST] == 1 and best[0] == 0:
            ev = EV_REGULAR
            counters[C_EV_REGULAR] += 1
        elif ev == EV_STALE:
            counters[C_EV_STALE] += 1
        else:
            counters[C_EV_REGULAR] += 1
        if ev == EV_REGULAR and meta[M_NBEST] > 1:
            counters[C_TIE_EVENTS] += 1
            gamma_acc[0] += 1.0 / meta[M_NBEST]
        prev_best = meta[M_BEST]
        b = honest_step(blocks, meta, best, heads, ev, h_strategy, h_p, miner,
                        uncle_weight, gen, out, dist)
        if selfish_mining:
            selfish_react(blocks, meta, best, st, prev_best, b, pubs, counters)
    if selfish_mining:
        finalize(blocks, meta, best, st, pubs)


@nb.njit(cache=True)
def scores(blocks, n, uncle_weight):
    """Chain score of every block from scratch (height when ``uncle_weight`` is 0)."""
    sc = np.zeros(n, dtype=np.int64)
    for b in range(1, n):
        nref = (1 if blocks[b, UNCLE0] >= 0 else 0) + (1 if blocks[b, UNCLE1] >= 0 else 0)
        sc[b] = sc[blocks[b, PARENT]] + 1 + uncle_weight * nref
    return sc


@nb.njit(cache=True)
def main_chain(blocks, n, uncle_weight, gen):
    """Genesis-to-tip path of the best published chain, ties broken by ``gen``."""
    sc = scores(blocks, n, uncle_weight)
    top = -1
    ntop = 0
    for b in range(n):
        if blocks[b, PUBLISHED] != PUBLIC:
            continue
        if sc[b] > top:
            top = sc[b]
            ntop = 1
        elif sc[b] == top:
            ntop += 1
    pick = 0 if ntop == 1 else randint(gen, ntop)
    tip = 0
    seen = 0
    for b in range(n):
        if blocks[b, PUBLISHED] == PUBLIC and sc[b] == top:
            if seen == pick:
                tip = b
                break
            seen += 1
    length = blocks[tip, HEIGHT] + 1
    chain = np.empty(length, dtype=np.int32)
    b = tip
    for i in range(length - 1, -1, -1):
        chain[i] = b
        b = blocks[b, PARENT]
    return chain


@nb.njit(cache=True)
def tally(blocks, n, chain, nb_r, nb_u, nb_s, rev_r, rev_u, rev_b, hist):
    """Classify against ``chain`` and accumulate counts and revenues per miner.

    Returns ``(regular, uncle, stale, unpublished)`` totals over non-genesis
    blocks; unpublished blocks are not charged to any party.
    """
    regular = np.zeros(n, dtype=np.bool_)
    for i in range(chain.shape[0]):
        regular[chain[i]] = True
    uncle = np.zeros(n, dtype=np.bool_)
    for i in range(1, chain.shape[0]):
        b = chain[i]
        m = blocks[b, MINER]
        nb_r[m] += 1
        rev_r[m] += 1.0
        h = blocks[b, HEIGHT]
        for col in (UNCLE0, UNCLE1):
            u = blocks[b, col]
            if u >= 0:
                d = h - blocks[u, HEIGHT]
                uncle[u] = True
                mu = blocks[u, MINER]
                nb_u[mu] += 1
                rev_u[mu] += (8.0 - d) / 8.0
                rev_b[m] += 1.0 / 32.0
                hist[d] += 1
    tot_r = chain.shape[0] - 1
    tot_u = 0
    tot_s = 0
    unpub = 0
    for b in range(1, n):
        if blocks[b, PUBLISHED] != PUBLIC:
            unpub += 1
        elif uncle[b]:
            tot_u += 1
        elif not regular[b]:
            tot_s += 1
            nb_s[blocks[b, MINER]] += 1
    return tot_r, tot_u, tot_s, unpub
