"""D2-sampling with incrementally maintained weights, and rejection sampling.

The sampler keeps one weight per point: its squared distance to the nearest
center added so far. Draws are weighted by prefix-sum inversion; with no
centers yet, draws are uniform (the standard first-draw convention).
"""

from __future__ import annotations

import numpy as np

from . import oracle as _oracle
from .geometry import GeometryError


class FullyCovered(RuntimeError):
    """Every point coincides with a center: D2-sampling has no support."""


class QuotaUnreachable(RuntimeError):
    """Rejection sampling hit its draw cap before filling every quota."""

    def __init__(self, msg, accepted=None, unmet=(), draws=0):
        super().__init__(msg)
        self.accepted = accepted or {}
        self.unmet = tuple(unmet)
        self.draws = draws


class SamplerState:
    """Per-point weights Phi({x}, C) for the current center set C.

    Weights start at 1.0 with an empty C purely as a placeholder; they only
    become meaningful (and draws weight-proportional) once add_center runs.
    """

    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=np.float64)
        n = len(self.points)
        if n == 0:
            raise GeometryError("sampler needs a non-empty point set")
        self.weights = np.ones(n, dtype=np.float64)
        self.total = float(n)
        self.centers_version = 0
        self._cumsum: np.ndarray | None = None

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def has_centers(self) -> bool:
        return self.centers_version > 0

    def cumsum(self) -> np.ndarray:
        if self._cumsum is None:
            self._cumsum = np.cumsum(self.weights)
        return self._cumsum


def make_sampler(points) -> SamplerState:
    return SamplerState(np.asarray(points, dtype=np.float64))


def add_center(state: SamplerState, center) -> SamplerState:
    """Lower each weight to min(weight, ||x - c||^2); one linear pass."""
    c = np.asarray(center, dtype=np.float64).ravel()
    if c.shape[0] != state.points.shape[1]:
        raise GeometryError(
            f"center dimension {c.shape[0]} != point dimension {state.points.shape[1]}"
        )
    diff = state.points - c
    d2 = np.einsum("nd,nd->n", diff, diff)
    if state.has_centers:
        np.minimum(state.weights, d2, out=state.weights)
    else:
        state.weights = d2
    state.total = float(state.weights.sum())
    state.centers_version += 1
    state._cumsum = None
    return state


def d2_sample_batch(state: SamplerState, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw `size` point indices with probability weight/total (uniform if no centers)."""
    if not state.has_centers:
        return rng.integers(0, state.n_points, size=size)
    if state.total <= 0.0:
        raise FullyCovered("all points coincide with the current centers")
    cs = state.cumsum()
    r = rng.random(size) * cs[-1]
    idx = np.searchsorted(cs, r, side="right")
    return np.minimum(idx, state.n_points - 1)


def d2_sample(state: SamplerState, rng: np.random.Generator) -> int:
    return int(d2_sample_batch(state, rng, 1)[0])


def reference_point(sample_indices, state: SamplerState) -> int:
    """Minimum-weight sampled point; ties break toward the lowest point index."""
    idxs = np.unique(np.asarray(list(sample_indices), dtype=np.int64))
    if len(idxs) == 0:
        raise ValueError("reference_point needs at least one sample")
    return int(idxs[np.argmin(state.weights[idxs])])


def acceptance_probability(state: SamplerState, ref_index: int, x_index: int,
                           eps: float, accept_scale: float | None = None) -> float:
    """min(1, scale * w(ref)/w(x)); scale defaults to eps/128 (the analyzed rule)."""
    scale = (eps / 128.0) if accept_scale is None else accept_scale
    wx = state.weights[x_index]
    if wx <= 0.0:
        return 1.0
    return min(1.0, scale * state.weights[ref_index] / wx)


def rej_samp(state: SamplerState, session: _oracle.OracleSession, W, refs: dict,
             T, eps: float, *, rng: np.random.Generator,
             reps: _oracle.Representatives | None = None,
             checker=None, accept_scale: float | None = None,
             draw_cap: int = 10**8, preaccepted: dict | None = None):
    """Rejection sampling: thin D2-draws so accepted points are uniform per cluster.

    Draws, classifies, and for clusters j in W accepts a draw x with
    probability min(1, scale * w(x_j*)/w(x)), looping until every j in W
    holds at least its quota (T: one int for all, or a map j -> int).
    Classification is exact-oracle Classify against `reps` by default; a
    `checker(point_index) -> cluster index or 0` callable replaces it for
    the noisy pipeline. Returns ({j: [point indices]}, draws, queries).

    The implementation processes draws in batches but charges the ledger,
    registers discoveries, and stops exactly where a draw-at-a-time loop
    would; unused tail draws of the final batch are discarded.
    """
    W = sorted(W)
    scale = (eps / 128.0) if accept_scale is None else accept_scale
    quota = {j: (T[j] if isinstance(T, dict) else int(T)) for j in W}
    accepted: dict[int, list[int]] = {j: list(preaccepted.get(j, [])) if preaccepted else []
                                      for j in W}
    for j in W:
        if j not in refs:
            raise ValueError(f"no reference point for cluster {j}")
    ref_w = {j: float(state.weights[refs[j]]) for j in W}

    def need():
        return {j: quota[j] - len(accepted[j]) for j in W}

    queries0 = session.ledger
    if checker is not None:
        draws = _rej_samp_scalar(state, W, ref_w, scale, need, accepted,
                                 rng=rng, checker=checker, draw_cap=draw_cap)
        return accepted, draws, session.ledger - queries0

    draws = 0
    acc_rate_guess = 0.05
    counts_capable = session.budget is None and state.has_centers
    counts_B = 2 ** 22
    w_arr = np.zeros(max(W) + 1)
    in_w_arr = np.zeros(max(W) + 2, dtype=bool)
    for j in W:
        w_arr[j] = ref_w[j]
        in_w_arr[j] = True
    while any(v > 0 for v in need().values()):
        if draws >= draw_cap:
            unmet = [j for j, v in need().items() if v > 0]
            raise QuotaUnreachable(
                f"draw cap {draw_cap} reached with quotas unmet for {unmet}",
                accepted=accepted, unmet=unmet, draws=draws)
        nd = need()
        max_need = max(nd.values())

        if counts_capable and counts_B >= 8192:
            # Far from the quotas, draw order is irrelevant: take the chunk
            # as multinomial counts and binomial acceptances. A chunk that
            # would finish every quota is discarded and retried smaller, so
            # only a short draw-ordered tail remains to place the stop.
            B = int(min(counts_B, draw_cap - draws))
            done, reason = _rej_counts_chunk(state, session, rng, reps, W,
                                             w_arr, in_w_arr, scale, nd,
                                             accepted, B)
            if done is not None:
                draws += done
                gained = sum(q - n for q, n in zip(nd.values(), need().values()))
                acc_rate_guess = max(gained / max(done, 1), 1e-6)
                continue
            if reason == "finishing":
                counts_B //= 4
                continue

        B = int(min(max(4096, max_need / max(acc_rate_guess, 1e-6) * 1.5),
                    2**16, draw_cap - draws))
        idx = d2_sample_batch(state, rng, B)
        cl, costs, new_firsts = _oracle.peek_classify(session, idx, reps)

        w_idx = np.flatnonzero(in_w_arr[np.minimum(cl, len(in_w_arr) - 1)])
        coins = rng.random(len(w_idx))
        wx = state.weights[idx[w_idx]]
        refw = w_arr[cl[w_idx]]
        p = np.minimum(1.0, scale * refw / np.maximum(wx, 1e-300))
        p[wx <= 0.0] = 1.0
        hit = w_idx[coins < p]

        # Earliest draw position by which every quota is filled; a sequential
        # loop would stop right after it.
        cut = B
        hit_cl = cl[hit]
        if all(int(np.count_nonzero(hit_cl == j)) >= nd[j] for j in W):
            fill_pos = [int(hit[hit_cl == j][nd[j] - 1]) for j in W if nd[j] > 0]
            cut = (max(fill_pos) + 1) if fill_pos else 0
        _oracle.commit_classify(session, reps, costs, new_firsts, cut)
        draws += cut
        for pos, j in zip(hit, hit_cl):
            if pos >= cut:
                break
            accepted[int(j)].append(int(idx[pos]))
        acc_rate_guess = max(len(hit) / max(B, 1), 1e-4)
    return accepted, draws, session.ledger - queries0


def _rej_counts_chunk(state, session, rng, reps, W, ref_w_arr, in_w_arr,
                      scale, nd, accepted, B):
    """Order-free rejection chunk.

    Returns (committed draw count, None) on success, or (None, reason) when
    the chunk must instead be taken draw-ordered: "discovery" if an
    undiscovered cluster appeared, "finishing" if the chunk would have
    filled every quota (the exact stopping draw then matters).
    """
    if state.total <= 0.0:
        raise FullyCovered("all points coincide with the current centers")
    pvals = state.weights / state.total
    counts = rng.multinomial(B, pvals)
    sampled = np.flatnonzero(counts)
    rank_arr = reps.rank_of_label(session)
    cl = rank_arr[session.truth[sampled]]
    if (cl == 0).any():
        return None, "discovery"
    mult = counts[sampled].astype(np.int64)
    in_w = in_w_arr[np.minimum(cl, len(in_w_arr) - 1)]
    acc_counts = np.zeros(int(in_w.sum()), dtype=np.int64)
    if len(acc_counts):
        wx = state.weights[sampled[in_w]]
        p = np.minimum(1.0, scale * ref_w_arr[cl[in_w]] / np.maximum(wx, 1e-300))
        p[wx <= 0.0] = 1.0
        acc_counts = rng.binomial(mult[in_w], p)
        got = np.bincount(cl[in_w] - 1, weights=acc_counts,
                          minlength=max(W)).astype(np.int64)
        if all(got[j - 1] >= nd[j] for j in W):
            return None, "finishing"
    session._charge(int((mult * cl).sum()))
    if len(acc_counts):
        pts = sampled[in_w]
        cls = cl[in_w]
        nz = acc_counts > 0
        for x, j, c in zip(pts[nz], cls[nz], acc_counts[nz]):
            accepted[int(j)].extend([int(x)] * int(c))
    return B, None


def _rej_samp_scalar(state, W, ref_w, scale, need, accepted, *, rng, checker, draw_cap):
    """Draw-at-a-time rejection loop for checker-based (noisy) classification."""
    draws = 0
    while any(v > 0 for v in need().values()):
        if draws >= draw_cap:
            unmet = [j for j, v in need().items() if v > 0]
            raise QuotaUnreachable(
                f"draw cap {draw_cap} reached with quotas unmet for {unmet}",
                accepted=accepted, unmet=unmet, draws=draws)
        x = d2_sample(state, rng)
        draws += 1
        j = int(checker(x))
        if j not in ref_w:
            continue
        wx = float(state.weights[x])
        p = 1.0 if wx <= 0.0 else min(1.0, scale * ref_w[j] / wx)
        if rng.random() < p:
            accepted[j].append(x)
    return draws
