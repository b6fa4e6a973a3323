from retrievestack.engine import RetrievalEngine
from retrievestack.stages import DenseStage, PairwiseStage, PointwiseStage, SparseStage
from retrievestack.text import embed, overlap, tokenize

from conftest import synthetic_texts


class TestText:
    def test_tokenize(self):
        assert tokenize("Hello, World 42!") == ["hello", "world", "42"]

    def test_embedding_unit_norm_and_deterministic(self):
        a = embed("some passage text")
        b = embed("some passage text")
        assert (a == b).all()
        assert abs(float(a @ a) - 1.0) < 1e-9

    def test_embedding_similarity_orders_sensibly(self):
        q = embed("cats chase mice")
        near = embed("cats often chase mice around")
        far = embed("volcanic basalt stratigraphy")
        assert float(q @ near) > float(q @ far)

    def test_overlap(self):
        assert overlap(["a", "b"], ["a", "b", "c"]) == 1.0
        assert overlap(["a", "b"], ["a"]) == 0.5
        assert overlap([], ["a"]) == 0.0


class TestStages:
    def test_sparse_exact_match_wins(self):
        texts = {1: "alpha beta gamma", 2: "delta epsilon zeta", 3: "alpha beta"}
        stage = SparseStage(texts)
        ranked = stage.top("alpha beta", 10)
        assert ranked[0][0] in (1, 3)
        assert {pid for pid, _ in ranked} == {1, 3}

    def test_sparse_zero_hits(self):
        stage = SparseStage({1: "alpha"})
        assert stage.top("missing terms", 5) == []

    def test_dense_self_retrieval(self):
        texts = synthetic_texts(n=50, seed=7)
        stage = DenseStage(texts)
        for pid in (1, 10, 25):
            ranked = stage.top(texts[pid], 3)
            assert ranked[0][0] == pid

    def test_pointwise_prefers_matching_passage(self):
        stage = PointwiseStage()
        query = "how tall is the eiffel tower"
        close = "the eiffel tower is 330 meters tall"
        unrelated = "recipe for sourdough bread"
        assert stage.score(query, close) > stage.score(query, unrelated)

    def test_pairwise_symmetric_sum(self):
        pointwise = PointwiseStage()
        stage = PairwiseStage(pointwise)
        query = "blue whales size"
        candidates = [
            (1, "blue whales are the largest animals and their size is immense"),
            (2, "a short text about unrelated gardening"),
            (3, "whales"),
        ]
        ranked = stage.rerank(query, candidates)
        assert ranked[0][0] == 1
        # p(i beats j) and p(j beats i) stay consistent
        assert abs(stage.prob_beats(query, candidates[0][1], candidates[1][1])
                   + stage.prob_beats(query, candidates[1][1], candidates[0][1]) - 1.0) < 1e-9


class TestEngine:
    def test_k_truncation(self, engine, texts):
        query = texts[5]
        assert len(engine.retrieve(query, 1)) == 1
        assert len(engine.retrieve(query, 7)) == 7

    def test_no_duplicate_pids(self, engine, texts):
        candidates = engine.retrieve(texts[17], 50)
        pids = [c.pid for c in candidates]
        assert len(pids) == len(set(pids))

    def test_self_retrieval_top1_through_full_stack(self, engine, texts):
        for pid in (3, 42, 111):
            candidates = engine.retrieve(texts[pid], 1)
            assert candidates[0].pid == pid

    def test_rank10_boundary(self, engine, texts):
        candidates = engine.retrieve(texts[9], 60)
        head = candidates[:10]
        tail = candidates[10:]
        # head members were pointwise top-10: every tail pointwise score is
        # <= the minimum pointwise score of the head (with pid tie-break)
        min_head = min(c.stage_scores["pointwise"] for c in head)
        for candidate in tail:
            assert candidate.stage_scores["pointwise"] <= min_head + 1e-12
        # tail keeps strict pointwise order
        tail_scores = [c.stage_scores["pointwise"] for c in tail]
        assert tail_scores == sorted(tail_scores, reverse=True) or all(
            (a > b) or (a == b and tail[i].pid < tail[i + 1].pid)
            for i, (a, b) in enumerate(zip(tail_scores, tail_scores[1:])))
        # head carries pairwise scores, tail does not
        assert all("pairwise" in c.stage_scores for c in head)
        assert all("pairwise" not in c.stage_scores for c in tail)

    def test_deterministic(self, engine, texts):
        first = [(c.pid, c.stage_scores) for c in engine.retrieve(texts[30], 25)]
        second = [(c.pid, c.stage_scores) for c in engine.retrieve(texts[30], 25)]
        assert first == second

    def test_dense_only_pool_when_sparse_misses(self):
        texts = {1: "alpha beta", 2: "gamma delta"}
        engine = RetrievalEngine(texts)
        # no lexical hit (tokens unseen) but embeddings still score
        candidates = engine.retrieve("επsilon unrelated ζ", 2)
        assert candidates  # dense candidates alone populate the pool
        assert all("sparse" not in c.stage_scores for c in candidates)

    def test_stage_scores_present(self, engine, texts):
        candidates = engine.retrieve(texts[2], 5)
        for c in candidates:
            assert "pointwise" in c.stage_scores
            assert "sparse" in c.stage_scores or "dense" in c.stage_scores
