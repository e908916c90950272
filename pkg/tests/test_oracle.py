import numpy as np
import pytest

from samecluster.oracle import (
    BudgetExhausted,
    OracleError,
    OracleSession,
    Representatives,
    check_cluster,
    classify,
    classify_batch,
    commit_classify,
    heuristic_classify,
    peek_classify,
    same_cluster,
)

TRUTH = [1, 1, 2, 2, 2, 3, 3, 2, 5, 5]


def make_session(p=0.0, seed=0, budget=None):
    return OracleSession(TRUTH, error_prob=p, rng_seed=seed, budget=budget)


class TestSameCluster:
    def test_exact_true(self):
        s = make_session()
        assert same_cluster(s, 3, 7) is True  # truth 2 == 2

    def test_exact_false(self):
        s = make_session()
        assert same_cluster(s, 3, 8) is False  # truth 2 vs 5

    def test_ledger_counts_every_call(self):
        s = make_session()
        for _ in range(5):
            same_cluster(s, 0, 1)
        assert s.ledger == 5

    def test_noisy_repetition_consistent(self):
        s = make_session(p=0.2, seed=42)
        first = [same_cluster(s, 3, 7) for _ in range(10)]
        assert len(set(first)) == 1

    def test_noisy_replay_identical(self):
        pairs = [(0, 5), (2, 3), (8, 9), (0, 5), (1, 7)]
        a = make_session(p=0.3, seed=9)
        b = make_session(p=0.3, seed=9)
        assert [a.same_cluster(*pr) for pr in pairs] == [b.same_cluster(*pr) for pr in pairs]
        assert a.ledger == b.ledger == len(pairs)

    def test_self_pair_true(self):
        s = make_session(p=0.4, seed=1)
        assert all(same_cluster(s, 4, 4) for _ in range(20))

    def test_out_of_range(self):
        with pytest.raises(OracleError):
            same_cluster(make_session(), 0, 99)

    def test_error_prob_validated(self):
        with pytest.raises(OracleError):
            OracleSession(TRUTH, error_prob=0.5)


class TestClassify:
    def test_matches_second_rep(self):
        s = make_session()
        reps = Representatives()
        for z in (0, 2, 5):  # clusters 1, 2, 3 discovered in this order
            reps.add_cluster(z)
        before = s.ledger
        assert classify(s, 4, reps) == 2  # truth 2 is rep index 2
        assert s.ledger - before == 2

    def test_new_cluster_branch(self):
        s = make_session()
        reps = Representatives()
        for z in (0, 2, 5):
            reps.add_cluster(z)
        before = s.ledger
        got = classify(s, 8, reps)  # truth 5, undiscovered
        assert got == 4
        assert s.ledger - before == 3
        assert reps.discovered_count == 4

    def test_first_point_free(self):
        s = make_session()
        reps = Representatives()
        assert classify(s, 0, reps) == 1
        assert s.ledger == 0

    def test_never_misassigns(self):
        s = make_session()
        reps = Representatives()
        rng = np.random.default_rng(0)
        assigned = {}
        for x in rng.integers(0, len(TRUTH), size=200):
            i = classify(s, int(x), reps)
            lab = TRUTH[x]
            assert assigned.setdefault(i, lab) == lab

    def test_query_bound(self):
        s = make_session()
        reps = Representatives()
        for x in range(len(TRUTH)):
            L = reps.discovered_count
            before = s.ledger
            classify(s, x, reps)
            assert s.ledger - before <= L


class TestClassifyBatch:
    def test_equivalent_to_sequential(self):
        rng = np.random.default_rng(4)
        xs = rng.integers(0, len(TRUTH), size=300)
        s1, r1 = make_session(), Representatives()
        seq = np.array([classify(s1, int(x), r1) for x in xs])
        s2, r2 = make_session(), Representatives()
        got = classify_batch(s2, xs, r2)
        np.testing.assert_array_equal(seq, got)
        assert s1.ledger == s2.ledger
        assert r1.reps == r2.reps

    def test_budget_truncates_exactly(self):
        rng = np.random.default_rng(4)
        xs = rng.integers(0, len(TRUTH), size=100)
        s_full, r_full = make_session(), Representatives()
        classify_batch(s_full, xs, r_full)
        full_ledger = s_full.ledger
        budget = full_ledger // 2
        s, r = make_session(budget=budget), Representatives()
        with pytest.raises(BudgetExhausted):
            classify_batch(s, xs, r)
        assert s.ledger == budget

    def test_peek_commit_matches_batch(self):
        rng = np.random.default_rng(8)
        xs = rng.integers(0, len(TRUTH), size=120)
        s1, r1 = make_session(), Representatives()
        cl1 = classify_batch(s1, xs, r1)
        s2, r2 = make_session(), Representatives()
        cl2, costs, new_firsts = peek_classify(s2, xs, r2)
        assert s2.ledger == 0 and r2.discovered_count == 0
        commit_classify(s2, r2, costs, new_firsts, len(xs))
        np.testing.assert_array_equal(cl1, cl2)
        assert s1.ledger == s2.ledger
        assert r1.reps == r2.reps

    def test_commit_prefix_only(self):
        xs = np.array([0, 2, 5, 8, 1, 3])
        s, r = make_session(), Representatives()
        cl, costs, new_firsts = peek_classify(s, xs, r)
        commit_classify(s, r, costs, new_firsts, 3)
        assert r.discovered_count == 3  # clusters of points 0, 2, 5 only


class TestHeuristicClassify:
    def setup_method(self):
        self.pts = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 0.0], [5.1, 0.0],
                             [0.0, 9.0], [0.1, 9.0]])
        self.session = OracleSession([1, 1, 2, 2, 3, 3])
        self.reps = Representatives()
        for z in (0, 2, 4):
            self.reps.add_cluster(z)
        self.centers = {1: self.pts[0], 2: self.pts[2], 3: self.pts[4]}

    def test_nearest_first(self):
        i, used = heuristic_classify(self.session, 1, self.centers, self.reps,
                                     point_coords=self.pts[1])
        assert (i, used) == (1, 1)

    def test_rank_of_true_cluster(self):
        # Point nearer to cluster 1's center than its own cluster 2's.
        x = np.array([2.0, 0.0])
        session = OracleSession([1, 1, 2, 2, 3, 3, 2])
        reps = Representatives()
        for z in (0, 2, 4):
            reps.add_cluster(z)
        i, used = heuristic_classify(session, 6, self.centers, reps, point_coords=x)
        assert i == 2 and used == 2

    def test_new_cluster_uses_L_queries(self):
        session = OracleSession([1, 1, 2, 2, 3, 3, 9])
        reps = Representatives()
        for z in (0, 2, 4):
            reps.add_cluster(z)
        before = session.ledger
        i, used = heuristic_classify(session, 6, self.centers, reps,
                                     point_coords=[50.0, 50.0])
        assert i == 4 and used == 3
        assert session.ledger - before == 3

    def test_tie_breaks_by_index(self):
        # Equidistant to centers 1 and 2; cluster order decides.
        session = OracleSession([1, 1, 2, 2, 3, 3, 2])
        reps = Representatives()
        for z in (0, 2, 4):
            reps.add_cluster(z)
        centers = {1: np.array([0.0, 0.0]), 2: np.array([5.0, 0.0]),
                   3: np.array([0.0, 9.0])}
        i, used = heuristic_classify(session, 6, centers, reps,
                                     point_coords=[2.5, 0.0])
        assert i == 2 and used == 2


class TestCheckCluster:
    def _noisy_session_with(self, answers, x, members):
        """Session whose cache is pre-seeded to force given answers."""
        s = OracleSession([1] * 20, error_prob=0.1, rng_seed=0)
        for z, ans in zip(members, answers):
            key = (x, z) if x < z else (z, x)
            s.answer_cache[key] = ans
        return s

    def test_majority_three_of_five(self):
        members = [1, 2, 3, 4, 5]
        s = self._noisy_session_with([True, True, False, True, False], 0, members)
        reps = Representatives(noisy=True)
        reps.reps[1] = members
        assert check_cluster(s, 0, reps) == 1
        assert s.ledger == 5

    def test_tie_rejects(self):
        members = [1, 2, 3, 4]
        s = self._noisy_session_with([True, True, False, False], 0, members)
        reps = Representatives(noisy=True)
        reps.reps[1] = members
        assert check_cluster(s, 0, reps) is None

    def test_no_majority_anywhere(self):
        reps = Representatives(noisy=True)
        reps.reps[1] = [1, 2]
        reps.reps[2] = [3, 4]
        s = self._noisy_session_with([False, False], 0, [1, 2])
        for z in (3, 4):
            s.answer_cache[(0, z)] = False
        assert check_cluster(s, 0, reps, restrict=[1, 2]) is None

    def test_early_exit_same_decision_fewer_queries(self):
        members = list(range(1, 10))
        ans = [True] * 9
        s1 = self._noisy_session_with(ans, 0, members)
        s2 = self._noisy_session_with(ans, 0, members)
        reps = Representatives(noisy=True)
        reps.reps[1] = members
        assert check_cluster(s1, 0, reps) == 1
        assert check_cluster(s2, 0, reps, early_exit=True) == 1
        assert s2.ledger < s1.ledger
