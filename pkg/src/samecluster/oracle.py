"""Same-cluster oracle: exact and noisy sessions, Classify, majority voting.

All access to ground-truth cluster identity goes through an OracleSession.
Every answered query increments the session ledger, which is the unit of
query complexity everywhere else in the package.
"""

from __future__ import annotations

import numpy as np


class OracleError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    """Raised before the first oracle call that would exceed the query budget.

    Batch helpers attach the work completed within budget as .classified
    (an int64 array of assigned cluster indices) so callers can commit it.
    """

    def __init__(self, msg: str, classified=None):
        super().__init__(msg)
        self.classified = classified if classified is not None else np.empty(0, dtype=np.int64)


class OracleSession:
    """Ground-truth labels + error model + answer cache + query ledger.

    error_prob = 0 gives the exact oracle. Noisy answers are generated
    lazily per unordered pair and cached, so repeating a query returns the
    same answer. An optional budget caps the ledger: a call that would
    push the ledger past the budget raises BudgetExhausted instead of
    answering.
    """

    def __init__(self, truth, error_prob: float = 0.0, rng_seed: int = 0,
                 budget: int | None = None):
        self.truth = np.asarray(truth, dtype=np.int64)
        if self.truth.ndim != 1 or len(self.truth) == 0:
            raise OracleError("truth labels must be a non-empty 1-d sequence")
        if not (0.0 <= error_prob < 0.5):
            raise OracleError(f"error_prob must be in [0, 0.5), got {error_prob}")
        self.error_prob = float(error_prob)
        self.rng_seed = int(rng_seed)
        self._rng = np.random.default_rng(self.rng_seed)
        self.answer_cache: dict[tuple[int, int], bool] = {}
        self.ledger = 0
        self.budget = budget

    @property
    def n_points(self) -> int:
        return len(self.truth)

    @property
    def exact(self) -> bool:
        return self.error_prob == 0.0

    def _charge(self, k: int = 1):
        if self.budget is not None and self.ledger + k > self.budget:
            # Consume what fits, then stop: the ledger never exceeds the budget.
            self.ledger = self.budget
            raise BudgetExhausted(f"query budget {self.budget} exhausted")
        self.ledger += k

    def remaining_budget(self) -> float:
        return float("inf") if self.budget is None else self.budget - self.ledger

    def same_cluster(self, i: int, j: int) -> bool:
        """Answer whether points i and j share a ground-truth cluster."""
        n = len(self.truth)
        if not (0 <= i < n and 0 <= j < n):
            raise OracleError(f"point index out of range: ({i}, {j})")
        self._charge()
        if i == j:
            return True
        truth_ans = bool(self.truth[i] == self.truth[j])
        if self.exact:
            return truth_ans
        key = (i, j) if i < j else (j, i)
        ans = self.answer_cache.get(key)
        if ans is None:
            flip = self._rng.random() < self.error_prob
            ans = truth_ans ^ flip
            self.answer_cache[key] = ans
        return ans


def same_cluster(session: OracleSession, i: int, j: int) -> bool:
    return session.same_cluster(i, j)


class Representatives:
    """Discovered clusters and their representative points.

    Exact mode keeps one representative z_i per discovered cluster i; noisy
    mode keeps a member list Z_i (multiset sizes preserved, queries use
    distinct members).  Cluster indices are 1..L in discovery order.
    """

    def __init__(self, noisy: bool = False):
        self.noisy = noisy
        self.reps: dict[int, int | list[int]] = {}
        # Exact-mode fast lookup: truth label -> discovered index (0 = unseen).
        self._rank_of_label: np.ndarray | None = None

    @property
    def discovered_count(self) -> int:
        return len(self.reps)

    def rep_point(self, i: int) -> int:
        z = self.reps[i]
        return z[0] if self.noisy else z

    def members(self, i: int) -> list[int]:
        if not self.noisy:
            return [self.reps[i]]
        return self.reps[i]

    def add_cluster(self, point_index: int) -> int:
        idx = len(self.reps) + 1
        self.reps[idx] = [int(point_index)] if self.noisy else int(point_index)
        self._rank_of_label = None
        return idx

    def add_member(self, i: int, point_index: int) -> None:
        if not self.noisy:
            raise OracleError("single-representative mode cannot grow Z_i")
        self.reps[i].append(int(point_index))

    def rank_of_label(self, session: OracleSession) -> np.ndarray:
        """Exact mode: map truth label -> discovered index, rebuilt on growth."""
        if self.noisy or not session.exact:
            raise OracleError("label ranks only exist for the exact oracle")
        if self._rank_of_label is None:
            arr = np.zeros(int(session.truth.max()) + 1, dtype=np.int64)
            for i in sorted(self.reps):
                arr[session.truth[self.reps[i]]] = i
            self._rank_of_label = arr
        return self._rank_of_label


def classify(session: OracleSession, x: int, reps: Representatives) -> int:
    """Find x's cluster by querying representatives z_1..z_L in order.

    Returns the first matching discovered index; otherwise registers x as
    the representative of a new cluster L+1 and returns it. Issues at most
    L queries.
    """
    if not session.exact:
        raise OracleError("classify requires the exact oracle; use check_cluster")
    for i in range(1, reps.discovered_count + 1):
        if session.same_cluster(x, reps.rep_point(i)):
            return i
    return reps.add_cluster(x)


def classify_batch(session: OracleSession, xs: np.ndarray, reps: Representatives) -> np.ndarray:
    """Vectorized exact-mode classify over a batch of point indices.

    Ledger accounting and new-cluster registration are identical to calling
    classify() sequentially: a sample of discovered cluster i costs i
    queries, an undiscovered sample costs L and opens cluster L+1.
    Raises BudgetExhausted at exactly the call where a sequential run
    would; samples at and beyond the crossing are not classified.
    """
    xs = np.asarray(xs, dtype=np.int64)
    out = np.empty(len(xs), dtype=np.int64)
    pos = 0
    while pos < len(xs):
        rank = reps.rank_of_label(session)
        labels = session.truth[xs[pos:]]
        ranks = rank[labels]
        new_at = np.flatnonzero(ranks == 0)
        stop = int(new_at[0]) if len(new_at) else len(ranks)
        if stop > 0:
            chunk = ranks[:stop]
            if session.budget is None:
                session.ledger += int(chunk.sum())
            else:
                costs = np.cumsum(chunk)
                remaining = session.remaining_budget()
                if costs[-1] > remaining:
                    n_full = int(np.searchsorted(costs, remaining, side="right"))
                    out[pos:pos + n_full] = chunk[:n_full]
                    session.ledger = session.budget  # mid-classify truncation
                    raise BudgetExhausted(
                        f"query budget {session.budget} exhausted",
                        classified=out[:pos + n_full].copy(),
                    )
                session._charge(int(costs[-1]))
            out[pos:pos + stop] = chunk
            pos += stop
        if stop < len(ranks):
            # New cluster: costs L misses, then registers the point.
            L = reps.discovered_count
            if session.remaining_budget() < L:
                session.ledger = session.budget
                raise BudgetExhausted(
                    f"query budget {session.budget} exhausted",
                    classified=out[:pos].copy(),
                )
            session._charge(L)
            out[pos] = reps.add_cluster(int(xs[pos]))
            pos += 1
    return out


def peek_classify(session: OracleSession, xs: np.ndarray, reps: Representatives):
    """Exact-mode dry run of classify over a batch, without touching state.

    Returns (cl, costs, new_firsts) where cl[i] is the cluster index the
    i-th sample would get, costs[i] the queries the classify would issue,
    and new_firsts the [(position, point_index), ...] of first appearances
    of undiscovered clusters, in order. Provisional indices continue the
    discovery numbering, so committing a prefix of the batch reproduces a
    sequential run exactly.
    """
    if not session.exact:
        raise OracleError("peek_classify requires the exact oracle")
    xs = np.asarray(xs, dtype=np.int64)
    rank = reps.rank_of_label(session)
    labels = session.truth[xs]
    cl = rank[labels].astype(np.int64)
    costs = cl.copy()
    new_firsts: list[tuple[int, int]] = []
    mask = cl == 0
    if mask.any():
        L = reps.discovered_count
        prov: dict[int, int] = {}
        first_pos: dict[int, int] = {}
        for p in np.flatnonzero(mask):
            lab = int(labels[p])
            if lab not in prov:
                prov[lab] = L + 1 + len(prov)
                first_pos[lab] = int(p)
                new_firsts.append((int(p), int(xs[p])))
            cl[p] = prov[lab]
            # First appearance pays one query per cluster discovered so far.
            costs[p] = prov[lab] - 1 if int(p) == first_pos[lab] else prov[lab]
    return cl, costs, new_firsts


def commit_classify(session: OracleSession, reps: Representatives,
                    costs: np.ndarray, new_firsts, upto: int):
    """Charge and register the first `upto` samples of a peeked batch.

    Raises BudgetExhausted at the exact sequential crossing point, with
    the number of fully committed samples in .classified (as a 0-d count).
    """
    if upto <= 0:
        return
    cum = np.cumsum(costs[:upto])
    remaining = session.remaining_budget()
    if cum[-1] > remaining:
        n_full = int(np.searchsorted(cum, remaining, side="right"))
        for p, x in new_firsts:
            if p < n_full:
                reps.add_cluster(x)
        session.ledger = session.budget
        raise BudgetExhausted(
            f"query budget {session.budget} exhausted",
            classified=np.asarray(n_full),
        )
    session._charge(int(cum[-1]))
    for p, x in new_firsts:
        if p < upto:
            reps.add_cluster(x)


def heuristic_classify(session: OracleSession, x: int, centers, reps: Representatives,
                       point_coords=None) -> tuple[int, int]:
    """Classify x by querying discovered clusters in order of center distance.

    centers maps discovered index -> approximate center (every discovered
    cluster must have one). Returns (cluster index, queries used); a point
    of an undiscovered cluster uses L queries and opens cluster L+1.
    Distance ties break toward the lower cluster index.
    """
    L = reps.discovered_count
    if L == 0:
        return reps.add_cluster(x), 0
    if point_coords is None:
        raise OracleError("heuristic_classify needs the coordinates of x")
    coords = np.asarray(point_coords, dtype=np.float64).ravel()
    idxs = np.arange(1, L + 1)
    carr = np.vstack([centers[i] for i in idxs])
    d2 = np.sum((carr - coords) ** 2, axis=1)
    order = idxs[np.argsort(d2, kind="stable")]
    for rank, i in enumerate(order, start=1):
        if session.same_cluster(x, reps.rep_point(int(i))):
            return int(i), rank
    return reps.add_cluster(x), L


def check_cluster(session: OracleSession, x: int, reps: Representatives,
                  restrict=None, early_exit: bool = False) -> int | None:
    """Majority-vote membership test against representative sets Z_i.

    For each candidate cluster i (ascending index order), queries
    same_cluster(x, z) for every distinct z in Z_i and returns i when
    strictly more than half of the answers are true. Ties reject. Returns
    None when no cluster wins a majority. early_exit stops a cluster's
    scan once ceil(|Z_i|/2) + 1 agreeing answers make the majority certain.
    """
    candidates = sorted(restrict) if restrict is not None else sorted(reps.reps)
    for i in candidates:
        members = list(dict.fromkeys(reps.members(i)))
        m = len(members)
        sure = m // 2 + 1 + (m % 2)  # ceil(m/2) + 1
        agree = 0
        for t, z in enumerate(members):
            if session.same_cluster(x, z):
                agree += 1
                if early_exit and agree >= sure:
                    return i
        if agree * 2 > m:
            return i
    return None
