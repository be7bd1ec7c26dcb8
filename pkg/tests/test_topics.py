import json
import math
import warnings
from collections import Counter

import numpy as np
import pytest

from litmine.corpus import Document
from litmine.embeddings import EmbeddingMatrix, fallback_embed
from litmine.errors import LitmineError
from litmine.topics import (
    NOISE_TOPIC,
    QueryMatch,
    build_topics,
    ctfidf,
    label_topic,
    match_query,
    merge_topics,
    topic_hierarchy,
    topic_trends,
    write_hierarchy_json,
    write_topic_report,
)

# stem-stable nonsense vocabulary, safely outside the stopword list
VOCAB = ["zorp", "blik", "frap", "drog", "mulv", "kest", "harn", "quol"]


def make_docs(texts, years=None):
    years = years or [None] * len(texts)
    return [
        Document(id=f"d{i}", title=text, abstract="", year=y)
        for i, (text, y) in enumerate(zip(texts, years))
    ]


def make_model(groups, top_k=10, years=None, emb_vectors=None, layout=None):
    """groups: list of (label, text); one doc per entry, in order."""
    labels = np.array([g[0] for g in groups], dtype=np.int64)
    texts = [g[1] for g in groups]
    docs = make_docs(texts, years)
    ids = [d.id for d in docs]
    if emb_vectors is None:
        emb = fallback_embed(texts, dim=16, ids=ids)
    else:
        emb = EmbeddingMatrix(ids=tuple(ids), vectors=np.asarray(emb_vectors, dtype=np.float64))
    if layout is None:
        rng = np.random.default_rng(0)
        layout = rng.normal(size=(len(docs), 2))
    model = build_topics(labels, docs, emb, np.asarray(layout, dtype=np.float64), top_k=top_k)
    return model, docs


# ----------------------------------------------------------------- ctfidf


def test_ctfidf_hand_oracle():
    counts = {0: Counter({"apple": 2, "banana": 1}), 1: Counter({"banana": 2, "cherry": 1})}
    scores = ctfidf(counts)
    # totals 3 and 3, A = 3; f(apple)=2, f(banana)=3, f(cherry)=1
    assert scores[0]["apple"] == pytest.approx((2 / 3) * math.log(2.5), abs=1e-9)
    assert scores[0]["apple"] == pytest.approx(0.6108604879161034, abs=1e-9)
    assert scores[0]["banana"] == pytest.approx(0.2310490601866484, abs=1e-9)
    assert scores[1]["banana"] == pytest.approx(0.4620981203732968, abs=1e-9)
    assert scores[1]["cherry"] == pytest.approx(0.4620981203732969, abs=1e-9)


def test_ctfidf_single_class_term_gets_max_idf():
    counts = {0: Counter({"zorp": 4}), 1: Counter({"blik": 4})}
    scores = ctfidf(counts)
    # tf = 1 in both; f(t) equals the in-class count, A = 4
    assert scores[0]["zorp"] == pytest.approx(math.log(1 + 4 / 4))
    assert scores[0]["zorp"] == scores[1]["blik"]


def test_ctfidf_uniform_term_symmetric():
    counts = {0: Counter({"blik": 3, "zorp": 1}), 1: Counter({"blik": 3, "frap": 1})}
    scores = ctfidf(counts)
    assert scores[0]["blik"] == pytest.approx(scores[1]["blik"], abs=1e-12)


def test_ctfidf_empty_class_warns_and_skips():
    counts = {0: Counter({"zorp": 1}), 1: Counter()}
    with pytest.warns(UserWarning, match="class 1 has no terms"):
        scores = ctfidf(counts)
    assert 1 not in scores
    assert 0 in scores


def test_ctfidf_explicit_average_override():
    counts = {0: Counter({"zorp": 2})}
    scores = ctfidf(counts, avg_terms_per_class=10.0)
    assert scores[0]["zorp"] == pytest.approx(1.0 * math.log(1 + 10.0 / 2))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ctfidf_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n_classes = int(rng.integers(2, 6))
    terms = [f"t{i}" for i in range(int(rng.integers(3, 30)))]
    counts = {
        c: Counter(
            {t: int(rng.integers(0, 6)) for t in terms if rng.random() < 0.6}
        )
        for c in range(n_classes)
    }
    for c in counts:
        counts[c] = Counter({t: k for t, k in counts[c].items() if k > 0})

    totals = {c: sum(cc.values()) for c, cc in counts.items()}
    nonempty = [c for c, t in totals.items() if t > 0]
    if not nonempty:
        assert ctfidf(counts) == {}
        return
    avg = sum(totals[c] for c in nonempty) / len(nonempty)
    freq: Counter = Counter()
    for c in nonempty:
        freq.update(counts[c])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scores = ctfidf(counts)
    for c in nonempty:
        for t, k in counts[c].items():
            want = (k / totals[c]) * math.log(1 + avg / freq[t])
            assert scores[c][t] == pytest.approx(want, abs=1e-9)


# ------------------------------------------------------------ build_topics


def test_build_alignment_mismatch():
    docs = make_docs(["zorp", "blik"])
    emb = fallback_embed(["zorp", "blik"], dim=16, ids=["d0", "d1"])
    with pytest.raises(LitmineError, match="alignment mismatch"):
        build_topics(np.array([0]), docs, emb, np.zeros((2, 2)))


def test_build_single_doc_topic_terms():
    model, _ = make_model([(0, "zorp zorp blik")])
    terms = [t for t, _ in model.topics[0].top_terms]
    assert terms[0] == "zorp"
    assert set(terms) == {"zorp", "blik"}


def test_build_disjoint_vocabularies_stay_disjoint():
    model, _ = make_model(
        [(0, "zorp blik frap"), (0, "zorp blik"), (1, "mulv kest harn"), (1, "mulv kest")]
    )
    top0 = {t for t, _ in model.topics[0].top_terms}
    top1 = {t for t, _ in model.topics[1].top_terms}
    assert top0 <= {"zorp", "blik", "frap"}
    assert top1 <= {"mulv", "kest", "harn"}


def test_build_sizes_partition_docs():
    model, _ = make_model(
        [(0, "zorp"), (0, "blik"), (1, "mulv"), (-1, "kest"), (-1, "harn")]
    )
    assert model.topics[0].size == 2
    assert model.topics[1].size == 1
    assert model.topics[NOISE_TOPIC].size == 2
    assert sum(info.size for info in model.topics.values()) == model.n_docs
    assert model.topic_ids() == [0, 1]
    assert model.topic_ids(include_noise=True) == [0, 1, -1]


def test_build_centroids_are_member_means():
    vecs = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 5.0]])
    layout = np.array([[0.0, 0.0], [2.0, 2.0], [9.0, 9.0]])
    model, _ = make_model(
        [(0, "zorp"), (0, "blik"), (1, "mulv")], emb_vectors=vecs, layout=layout
    )
    assert np.allclose(model.topics[0].centroid_embedding, [2.0, 0.0])
    assert np.allclose(model.topics[0].centroid_reduced, [1.0, 1.0])
    assert np.allclose(model.topics[1].centroid_embedding, [0.0, 5.0])


def test_build_term_ties_break_lexicographically():
    model, _ = make_model([(0, "zorp blik")])
    terms = [t for t, _ in model.topics[0].top_terms]
    assert terms == ["blik", "zorp"]


def test_build_top_k_truncates():
    model, _ = make_model([(0, " ".join(VOCAB))], top_k=3)
    assert len(model.topics[0].top_terms) == 3


# ------------------------------------------------------------ merge_topics


def test_merge_noop_returns_same_model():
    model, _ = make_model([(0, "zorp"), (1, "mulv"), (2, "kest")])
    merged = merge_topics(model, 3)
    assert merged is model


def test_merge_target_bounds():
    model, _ = make_model([(0, "zorp"), (1, "mulv")])
    with pytest.raises(ValueError):
        merge_topics(model, 0)
    with pytest.raises(ValueError, match="cannot merge"):
        merge_topics(model, 3)


def test_merge_hand_geometry():
    # sizes (2, 5, 9) at x = 0, 1, 5: the size-2 topic is nearest the
    # size-5 one, so those two fold together
    groups = (
        [(0, "zorp")] * 2 + [(1, "mulv")] * 5 + [(2, "kest")] * 9
    )
    layout = np.array(
        [[0.0, 0.0]] * 2 + [[1.0, 0.0]] * 5 + [[5.0, 0.0]] * 9
    )
    model, _ = make_model(groups, layout=layout)
    merged = merge_topics(model, 2)

    # renumbered by size: the untouched size-9 topic becomes 0
    assert merged.topics[0].size == 9
    assert merged.topics[1].size == 7
    assert np.allclose(merged.topics[1].centroid_reduced, [5.0 / 7.0, 0.0])
    assert np.all(merged.labels[:7] == 1)
    assert np.all(merged.labels[7:] == 0)
    # term mass from both sources lands in the merged class
    assert merged.term_counts[1]["zorp"] == 2
    assert merged.term_counts[1]["mulv"] == 5


def test_merge_conserves_documents_and_noise():
    rng = np.random.default_rng(3)
    groups = []
    for t in range(6):
        for _ in range(int(rng.integers(2, 6))):
            groups.append((t, VOCAB[t]))
    groups += [(-1, "quol")] * 3
    model, _ = make_model(groups)
    for target in (5, 3, 1):
        merged = merge_topics(model, target)
        assert len(merged.topic_ids()) == target
        assert sum(i.size for i in merged.topics.values()) == model.n_docs
        assert merged.topics[NOISE_TOPIC].size == 3
        noise_rows = model.labels == NOISE_TOPIC
        assert np.array_equal(merged.labels == NOISE_TOPIC, noise_rows)


def _partition(model) -> set[frozenset]:
    groups: dict[int, set[int]] = {}
    for i, lb in enumerate(model.labels):
        if int(lb) != NOISE_TOPIC:
            groups.setdefault(int(lb), set()).add(i)
    return {frozenset(v) for v in groups.values()}


def _is_coarsening(fine: set[frozenset], coarse: set[frozenset]) -> bool:
    return all(any(f <= c for c in coarse) for f in fine)


def test_merge_matches_brute_force_trace():
    # twelve topics with assorted sizes; replay the published rule by
    # hand and demand the same final membership at every step down to 5
    rng = np.random.default_rng(4)
    sizes = [int(rng.integers(2, 8)) for _ in range(12)]
    groups = []
    layout_rows = []
    centers = rng.normal(0.0, 5.0, size=(12, 2))
    for t, size in enumerate(sizes):
        for _ in range(size):
            groups.append((t, VOCAB[t % len(VOCAB)]))
            layout_rows.append(centers[t])
    model, _ = make_model(groups, layout=np.asarray(layout_rows))

    # independent simulation over (size, centroid) state
    sim_sizes = {t: model.topics[t].size for t in model.topic_ids()}
    sim_cent = {
        t: np.array(model.topics[t].centroid_reduced, dtype=np.float64)
        for t in model.topic_ids()
    }
    sim_members = {t: {i for i, lb in enumerate(model.labels) if lb == t} for t in sim_sizes}

    prev_partition = _partition(model)
    for target in range(11, 4, -1):
        smallest = min(sim_sizes, key=lambda t: (sim_sizes[t], t))
        others = [t for t in sim_sizes if t != smallest]
        nearest = min(
            others,
            key=lambda t: (float(np.linalg.norm(sim_cent[smallest] - sim_cent[t])), t),
        )
        ns, nn = sim_sizes[smallest], sim_sizes[nearest]
        sim_cent[nearest] = (ns * sim_cent[smallest] + nn * sim_cent[nearest]) / (ns + nn)
        sim_sizes[nearest] += ns
        sim_members[nearest] |= sim_members[smallest]
        del sim_sizes[smallest], sim_cent[smallest], sim_members[smallest]

        merged = merge_topics(model, target)
        assert len(merged.topic_ids()) == target
        expected = {frozenset(m) for m in sim_members.values()}
        got = _partition(merged)
        assert got == expected
        assert _is_coarsening(prev_partition, got)
        prev_partition = got


# ----------------------------------------------------------------- trends


def test_trends_planted_matrix():
    groups = [(0, "zorp"), (0, "blik"), (1, "mulv"), (1, "kest"), (1, "harn"), (-1, "quol"), (0, "frap")]
    years = [2001, 2001, 2001, 2002, 2002, 2003, None]
    model, docs = make_model(groups, years=years)
    trend = topic_trends(model, docs)
    assert trend.years() == [2001, 2002, 2003]
    assert trend.get(2001, 0) == 2
    assert trend.get(2001, 1) == 1
    assert trend.get(2002, 1) == 2
    assert trend.get(2002, 0) == 0
    assert trend.get(2003, NOISE_TOPIC) == 1
    # the year-less doc is absent everywhere
    total = sum(trend.get(y, t) for y in trend.years() for t in trend.topics)
    assert total == 6


def test_trends_single_year():
    groups = [(0, "zorp"), (1, "mulv")]
    model, docs = make_model(groups, years=[1999, 1999])
    trend = topic_trends(model, docs)
    assert trend.years() == [1999]
    assert trend.get(1999, 0) == 1 and trend.get(1999, 1) == 1


def test_trends_csv_format(tmp_path):
    groups = [(0, "zorp"), (1, "mulv"), (-1, "quol")]
    model, docs = make_model(groups, years=[2001, 2002, 2001])
    path = tmp_path / "trends.csv"
    topic_trends(model, docs).write_csv(path)
    assert path.read_bytes() == (
        b"year,topic,count\r\n"
        b"2001,0,1\r\n2001,1,0\r\n2001,-1,1\r\n"
        b"2002,0,0\r\n2002,1,1\r\n2002,-1,0\r\n"
    )


# ------------------------------------------------------------ match_query


def _embedder(dim=16, scale=1.0):
    def embed(text: str) -> np.ndarray:
        return scale * fallback_embed([text], dim=dim).vectors[0]

    return embed


def test_match_disjoint_vocabulary():
    model, _ = make_model(
        [(0, "zorp blik"), (0, "zorp blik"), (1, "mulv kest"), (1, "mulv kest")]
    )
    match = match_query(model, "zorp blik", _embedder())
    assert match.ranking[0][0] == 0
    assert match.ranking[0][1] == pytest.approx(1.0, abs=1e-9)
    assert match.ranking[0][1] > match.ranking[1][1]


def test_match_exact_single_doc_topic():
    model, _ = make_model([(0, "zorp blik frap"), (1, "mulv")])
    match = match_query(model, "zorp blik frap", _embedder())
    assert match.ranking[0] == (0, pytest.approx(1.0, abs=1e-9))


def test_match_scaling_invariance():
    model, _ = make_model([(0, "zorp blik"), (1, "mulv kest"), (2, "frap drog")])
    base = match_query(model, "zorp mulv", _embedder(scale=1.0))
    scaled = match_query(model, "zorp mulv", _embedder(scale=37.5))
    assert [t for t, _ in base.ranking] == [t for t, _ in scaled.ranking]
    for (_, a), (_, b) in zip(base.ranking, scaled.ranking):
        assert a == pytest.approx(b, abs=1e-12)


def test_match_sorted_and_bounded():
    model, _ = make_model([(i, VOCAB[i]) for i in range(5)])
    match = match_query(model, "zorp quol", _embedder())
    sims = [s for _, s in match.ranking]
    assert sims == sorted(sims, reverse=True)
    assert all(-1.0 <= s <= 1.0 for s in sims)


def test_match_dimension_mismatch():
    model, _ = make_model([(0, "zorp"), (1, "mulv")])
    with pytest.raises(LitmineError, match="dim"):
        match_query(model, "zorp", lambda q: np.ones(3))


def test_match_csv_format(tmp_path):
    match = QueryMatch(query="q", ranking=((2, 0.75), (0, -0.125)))
    path = tmp_path / "match.csv"
    match.write_csv(path)
    assert path.read_bytes() == (
        b"query,rank,topic,similarity\r\nq,1,2,0.750000\r\nq,2,0,-0.125000\r\n"
    )


# -------------------------------------------------------------- hierarchy


def _angle_model(degrees):
    vecs = np.array(
        [[math.cos(math.radians(a)), math.sin(math.radians(a))] for a in degrees]
    )
    groups = [(i, VOCAB[i]) for i in range(len(degrees))]
    model, _ = make_model(groups, emb_vectors=vecs)
    return model


def test_hierarchy_two_topics():
    model = _angle_model([0.0, 60.0])
    merges = topic_hierarchy(model)
    assert len(merges) == 1
    a, b, height, size = merges[0]
    assert (a, b) == (0, 1)
    assert height == pytest.approx(1.0 - math.cos(math.radians(60.0)), abs=1e-12)
    assert size == 2


def test_hierarchy_duplicate_centroids_merge_first():
    model = _angle_model([45.0, 45.0, 170.0])
    merges = topic_hierarchy(model)
    assert merges[0][:2] == (0, 1)
    assert merges[0][2] == pytest.approx(0.0, abs=1e-12)


def test_hierarchy_four_topic_hand_linkage():
    model = _angle_model([0.0, 10.0, 90.0, 180.0])
    merges = topic_hierarchy(model)

    d = lambda deg: 1.0 - math.cos(math.radians(deg))
    assert merges[0][:2] == (0, 1)
    assert merges[0][2] == pytest.approx(d(10), abs=1e-12)
    # average linkage: node 4 = {0,1}; d(2,4) = (d(90) + d(80)) / 2
    assert merges[1][:2] == (2, 4)
    assert merges[1][2] == pytest.approx((d(90) + d(80)) / 2, abs=1e-12)
    # node 5 = {0,1,2}; d(3,5) = (1*d(90) + 2*(d(180)+d(170))/2) / 3
    want = (d(90) + 2 * ((d(180) + d(170)) / 2)) / 3
    assert merges[2][:2] == (3, 5)
    assert merges[2][2] == pytest.approx(want, abs=1e-12)
    assert [m[3] for m in merges] == [2, 3, 4]


def test_hierarchy_heights_nondecreasing():
    rng = np.random.default_rng(7)
    vecs = rng.normal(size=(8, 5))
    groups = [(i, VOCAB[i % len(VOCAB)]) for i in range(8)]
    model, _ = make_model(groups, emb_vectors=vecs)
    merges = topic_hierarchy(model)
    heights = [h for _, _, h, _ in merges]
    assert heights == sorted(heights)


def test_hierarchy_needs_two_topics():
    model, _ = make_model([(0, "zorp")])
    with pytest.raises(ValueError):
        topic_hierarchy(model)


def test_hierarchy_json(tmp_path):
    path = tmp_path / "h.json"
    write_hierarchy_json([(0, 1, 0.5, 2)], path)
    assert json.loads(path.read_text()) == [{"a": 0, "b": 1, "height": 0.5, "size": 2}]


# ------------------------------------------------------------ label_topic


class StubChat:
    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        return self.replies.pop(0)


TERMS = [("zorp", 0.9), ("blik", 0.8), ("frap", 0.7), ("drog", 0.6)]


def test_label_accepts_three_words():
    chat = StubChat(["Neural Network Trading"])
    assert label_topic(TERMS, chat) == "Neural Network Trading"
    assert len(chat.prompts) == 1


def test_label_retries_then_accepts():
    chat = StubChat(["way too many words here", "Tidy Topic Name"])
    assert label_topic(TERMS, chat) == "Tidy Topic Name"
    assert len(chat.prompts) == 2


def test_label_falls_back_to_top_terms():
    chat = StubChat(["one", "still not three words"])
    assert label_topic(TERMS, chat) == "zorp blik frap"
    assert len(chat.prompts) == 2


def test_label_strips_whitespace():
    chat = StubChat(["  Clean Topic Title \n"])
    assert label_topic(TERMS, chat) == "Clean Topic Title"


def test_label_empty_terms():
    with pytest.raises(ValueError):
        label_topic([], StubChat([]))


def test_label_prompt_shows_top_ten_only():
    terms = [(f"term{i:02d}", 1.0 - i / 100) for i in range(12)]
    chat = StubChat(["Three Word Reply"])
    label_topic(terms, chat)
    prompt = chat.prompts[0]
    assert "- term00 (1.0000)" in prompt
    assert "term09" in prompt
    assert "term10" not in prompt and "term11" not in prompt


# ---------------------------------------------------------------- report


def test_topic_report_json(tmp_path):
    model, _ = make_model([(0, "zorp zorp"), (1, "mulv"), (-1, "quol")])
    path = tmp_path / "report.json"
    write_topic_report(model, path)
    report = json.loads(path.read_text())
    assert [entry["id"] for entry in report] == [0, 1, -1]
    first = report[0]
    assert first["size"] == 1
    assert first["title"] is None
    assert first["top_terms"][0]["term"] == "zorp"
    assert set(first["top_terms"][0]) == {"term", "score"}
