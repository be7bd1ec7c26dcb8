"""Acceptance suite: one test per headline guarantee of the package.

Every check here runs against the public API with an independent oracle
(hand-counted tables, brute-force reference algorithms, scipy/sklearn)
rather than values echoed back from the implementation.  Timing bounds
are asserted where a guarantee includes one.
"""

import json
import math
import time
from collections import Counter

import numpy as np
import pytest
from click.testing import CliRunner
from scipy.spatial.distance import cdist
from sklearn.manifold import trustworthiness as sk_trustworthiness
from sklearn.metrics import adjusted_rand_score

from litmine.cli import main as cli_main
from litmine.clustering import core_distances, hdbscan, mutual_reachability_mst
from litmine.corpus import Document
from litmine.embeddings import fallback_embed
from litmine.filtering import filter_corpus, packaged_patterns
from litmine.manifold import fuzzy_graph, knn_graph, pairwise_distances, umap
from litmine.qa import (
    CELL_ORDER,
    Answer,
    AnswerRecord,
    QuestionSet,
    bin_frequency,
    build_prompt,
    compare_answers,
    group_loss,
    load_answers,
    regex_baseline,
    run_protocol,
)
from litmine.textstats import packaged_taxonomy
from litmine.topics import build_topics, ctfidf, match_query, merge_topics
from litmine.transports import MockChatTransport, RetryPolicy


# Document frequency rows recorded from a full-size corpus pull, kept
# here as frozen data: (label, abstract hits, title hits, union).
FULL_SCALE_ROWS = (
    ("Algo(rithmic)* trading", 615, 390, 841),
    ("Investment strateg.", 9473, 2921, 11362),
    ("Vola(tility)* trading", 86, 54, 129),
    ("High.frequency trading", 832, 719, 1248),
    ("Investment system.", 870, 174, 963),
    ("Benchmark strateg.", 170, 7, 177),
    ("Pair.trading", 67, 35, 85),
    ("Momentum (trading|strateg.)", 1074, 461, 1315),
    ("Contrarian (trading|strateg.)", 380, 169, 477),
    ("SUM", 13567, 4930, 16597),
)


def planar_blobs(n_per=100, ambient=20, centers=3, seed=0):
    """Gaussian blobs supported on random 2-D subspaces of the ambient space."""
    rng = np.random.default_rng(seed)
    cs = rng.normal(0.0, 10.0, size=(centers, ambient))
    parts = []
    for c in cs:
        basis, _ = np.linalg.qr(rng.normal(size=(ambient, 2)))
        pts = c + rng.normal(0.0, 1.0, size=(n_per, 2)) @ basis.T
        pts += rng.normal(0.0, 0.05, size=(n_per, ambient))
        parts.append(pts)
    return np.vstack(parts), np.repeat(np.arange(centers), n_per)


def good_reply(questions=None):
    qs = questions or QuestionSet.default()
    lines = []
    for i, _ in enumerate(qs.questions, start=1):
        lines.append(f"Q{i}_VERDICT: NO")
        lines.append(f"Q{i}_ELABORATION:")
    lines.append("ATTENTION_CHECK: I answered each screening question for one document.")
    return "\n".join(lines)


# ------------------------------------------------- 1. keyword filtering


def test_filter_reproduces_hand_counted_frequency_table(
    minicorpus_store, data_dir, tmp_path
):
    start = time.perf_counter()
    filtered, table = filter_corpus(minicorpus_store, packaged_patterns())
    elapsed = time.perf_counter() - start

    out = tmp_path / "frequency.csv"
    table.write_csv(out)
    expected = (data_dir / "minicorpus_expected_frequency.csv").read_bytes()
    assert out.read_bytes() == expected
    assert len(filtered) > 0

    for label in table.labels:
        a, t, b = table.row(label)
        assert max(a, t) <= b <= a + t, label
    a, t, b = table.totals()
    assert max(a, t) <= b <= a + t

    for label, a, t, b in FULL_SCALE_ROWS:
        assert max(a, t) <= b <= a + t, label

    assert elapsed < 1.0, f"filtering took {elapsed:.3f}s"


# ------------------------------------------- 2. model-family taxonomy


def _alternation_branches(pattern: str) -> list[str]:
    """Split a regex on its top-level | only (nested groups stay intact)."""
    parts, depth, cur = [], 0, []
    for ch in pattern:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "|" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def test_model_family_regexes_fire_exactly_their_intended_branches(data_dir):
    import re

    taxonomy = packaged_taxonomy("model_families")
    families = {c.label: c.patterns for c in taxonomy.categories}
    snippets = [
        json.loads(line)
        for line in (data_dir / "model_family_snippets.jsonl").read_text().splitlines()
        if line.strip()
    ]
    assert len(snippets) == 30

    start = time.perf_counter()
    for snip in snippets:
        text, family, branch = snip["text"], snip["family"], snip["branch"]
        for name, patterns in families.items():
            fired = any(p.search(text) for p in patterns)
            assert fired == (name == family), (snip["label"], name)
        # within the right family, exactly the intended alternation branch
        branches = _alternation_branches(families[family][0].pattern)
        assert branch in branches, snip["label"]
        for piece in branches:
            hit = re.search(piece, text, re.IGNORECASE) is not None
            assert hit == (piece == branch), (snip["label"], piece)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"taxonomy matching took {elapsed:.3f}s"


# --------------------------------------------------- 3. layout quality


def test_layout_preserves_blob_neighborhoods_and_reproduces():
    X, blob = planar_blobs(n_per=100, ambient=20, centers=3, seed=0)
    assert X.shape == (300, 20)

    start = time.perf_counter()
    result = umap(X, k=15, k_out=2, epochs=200, metric="euclidean", seed=0)
    again = umap(X, k=15, k_out=2, epochs=200, metric="euclidean", seed=0)
    elapsed = time.perf_counter() - start

    assert result.layout.tobytes() == again.layout.tobytes()

    t = sk_trustworthiness(X, result.layout, n_neighbors=15)
    assert t >= 0.95, f"trustworthiness {t:.4f}"

    d = pairwise_distances(result.layout, "euclidean")
    same = d[blob[:, None] == blob[None, :]]
    cross = d[blob[:, None] != blob[None, :]]
    assert same.mean() < cross.mean()

    assert elapsed < 30.0, f"two runs took {elapsed:.1f}s"


# ------------------------------------------------- 4. graph internals


def test_fuzzy_graph_calibration_and_exact_neighbors():
    # per-point weight mass must hit the log2(k) target
    X, _ = planar_blobs(n_per=100, ambient=20, centers=3, seed=0)
    k = 15
    g = knn_graph(X, k=k, metric="euclidean")
    fg = fuzzy_graph(g)
    target = math.log2(k)
    for i in range(X.shape[0]):
        mass = float(
            np.exp(-np.maximum(g.distances[i] - fg.rho[i], 0.0) / fg.sigma[i]).sum()
        )
        assert abs(mass - target) <= 1e-3, f"point {i}: {mass:.6f}"

    # neighbor search agrees with an exhaustive scipy-based scan
    rng = np.random.default_rng(7)
    Y = rng.normal(size=(500, 8))
    ours = knn_graph(Y, k=10, metric="euclidean")
    ref = cdist(Y, Y)
    np.fill_diagonal(ref, np.inf)
    order = np.argsort(ref, axis=1, kind="stable")[:, :10]
    assert np.array_equal(ours.indices, order)
    assert np.allclose(ours.distances, ref[np.arange(500)[:, None], order], atol=1e-9)


# ------------------------------------------------------- 5. clustering


def _kruskal_weights(mreach: np.ndarray) -> list[float]:
    n = mreach.shape[0]
    edges = sorted(
        (mreach[i, j], i, j) for i in range(n) for j in range(i + 1, n)
    )
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    weights: list[float] = []
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            weights.append(w)
            if len(weights) == n - 1:
                break
    return weights


def test_cluster_mst_matches_kruskal_and_recovers_blobs():
    rng = np.random.default_rng(3)
    Y = rng.normal(size=(500, 2))
    core = core_distances(Y, min_samples=15)
    dist = pairwise_distances(Y, "euclidean")
    mreach = np.maximum(dist, np.maximum(core[:, None], core[None, :]))

    start = time.perf_counter()
    mst = mutual_reachability_mst(Y, core)
    ours = np.sort(np.array([w for _, _, w in mst]))
    ref = np.array(_kruskal_weights(mreach))
    assert np.array_equal(ours, ref)
    assert math.fsum(ours) == math.fsum(ref)

    centers = np.array([[0.0, 0.0], [12.0, 0.0], [6.0, 10.0]])
    blob = np.repeat(np.arange(3), 70)
    pts = centers[blob] + rng.normal(0.0, 0.8, size=(210, 2))
    labels, _ = hdbscan(pts, min_cluster_size=15)
    elapsed = time.perf_counter() - start

    mask = labels.labels >= 0
    assert adjusted_rand_score(blob[mask], labels.labels[mask]) >= 0.95
    for cluster, size in Counter(labels.labels[mask]).items():
        assert size >= 15, f"cluster {cluster} has {size} members"

    assert elapsed < 30.0, f"clustering checks took {elapsed:.1f}s"


# ---------------------------------------------------- 6. class tf-idf


def test_class_tfidf_matches_hand_arithmetic():
    counts = {
        0: Counter({"apple": 2, "banana": 1}),
        1: Counter({"banana": 2, "cherry": 1}),
    }
    scores = ctfidf(counts)
    # totals 3 and 3, average mass 3; f(apple)=2, f(banana)=3, f(cherry)=1
    assert scores[0]["apple"] == pytest.approx(0.6108604879161034, abs=1e-9)
    assert scores[0]["banana"] == pytest.approx(0.2310490601866484, abs=1e-9)
    assert scores[1]["banana"] == pytest.approx(0.4620981203732968, abs=1e-9)
    assert scores[1]["cherry"] == pytest.approx(0.4620981203732969, abs=1e-9)

    # a term confined to one class gets the largest idf on offer
    solo = ctfidf({0: Counter({"zorp": 4}), 1: Counter({"blik": 4})})
    assert solo[0]["zorp"] == pytest.approx(math.log(2.0), abs=1e-9)
    assert solo[1]["blik"] == pytest.approx(math.log(2.0), abs=1e-9)

    # perfectly symmetric counts score identically everywhere
    sym = ctfidf(
        {0: Counter({"t": 3, "u": 3}), 1: Counter({"t": 3, "u": 3})}
    )
    expected = 0.5 * math.log(1.0 + 6.0 / 6.0)
    for c in (0, 1):
        for term in ("t", "u"):
            assert sym[c][term] == pytest.approx(expected, abs=1e-9)


# ------------------------------------------------------ 7. topic merge


def test_topic_merging_matches_brute_force_trace():
    rng = np.random.default_rng(11)
    sizes0 = rng.integers(3, 12, size=12)
    labels = np.repeat(np.arange(12), sizes0)
    n = len(labels)
    docs = [
        Document(id=f"d{i:03d}", title=f"w{labels[i]}", abstract=f"w{labels[i]} w{labels[i]}")
        for i in range(n)
    ]
    emb = fallback_embed([f"{d.title} {d.abstract}" for d in docs], dim=16, ids=[d.id for d in docs])
    layout = rng.normal(size=(n, 2))
    model = build_topics(labels, docs, emb, layout)
    assert model.topic_ids() == list(range(12))

    # independent trace from the raw fixture: sizes and layout centroids
    sizes = {t: int((labels == t).sum()) for t in range(12)}
    cents = {t: layout[labels == t].mean(axis=0) for t in range(12)}
    assign = {t: t for t in range(12)}

    for target in range(11, 4, -1):
        smallest = min(sizes, key=lambda t: (sizes[t], t))
        nearest = min(
            (t for t in sizes if t != smallest),
            key=lambda t: (float(np.linalg.norm(cents[smallest] - cents[t])), t),
        )
        total = sizes[smallest] + sizes[nearest]
        cents[nearest] = (
            sizes[smallest] * cents[smallest] + sizes[nearest] * cents[nearest]
        ) / total
        sizes[nearest] = total
        for orig, cur in assign.items():
            if cur == smallest:
                assign[orig] = nearest
        del sizes[smallest], cents[smallest]

        merged = merge_topics(model, target)
        assert len(merged.topic_ids()) == target
        assert sum(merged.size_of(t) for t in merged.topic_ids()) == n

        # partition of the original topics must match the trace exactly
        first_doc = {t: int(np.argmax(labels == t)) for t in range(12)}
        by_final: dict[int, set] = {}
        for orig, i in first_doc.items():
            by_final.setdefault(int(merged.labels[i]), set()).add(orig)
        by_trace: dict[int, set] = {}
        for orig, survivor in assign.items():
            by_trace.setdefault(survivor, set()).add(orig)
        assert sorted(map(frozenset, by_final.values())) == sorted(
            map(frozenset, by_trace.values())
        )


# --------------------------------------------------- 8. query matching


def test_query_matching_ranks_own_vocabulary_first():
    vocab = {0: ("gamma", "vega", "delta"), 1: ("kappa", "theta", "sigma")}
    docs, labels = [], []
    for t, words in vocab.items():
        for i in range(6):
            text = " ".join(words[(i + j) % 3] for j in range(4))
            docs.append(Document(id=f"q{t}{i}", title=words[0], abstract=text))
            labels.append(t)
    labels = np.asarray(labels)
    emb = fallback_embed(
        [f"{d.title} {d.abstract}" for d in docs], dim=32, ids=[d.id for d in docs]
    )
    rng = np.random.default_rng(5)
    model = build_topics(labels, docs, emb, rng.normal(size=(len(docs), 2)))

    def embed_query(q: str) -> np.ndarray:
        return fallback_embed([q], dim=32).vectors[0]

    for t, words in vocab.items():
        query = " ".join(words)
        match = match_query(model, query, embed_query)
        assert match.ranking[0][0] == t, match.ranking

        scaled = match_query(model, query, lambda q: 37.5 * embed_query(q))
        assert [p[0] for p in scaled.ranking] == [p[0] for p in match.ranking]
        for (_, a), (_, b) in zip(scaled.ranking, match.ranking):
            assert a == pytest.approx(b, abs=1e-12)


# ------------------------------------------------ 9. confusion matrix


def _records_from_cells(cells: dict, tag: str) -> list[AnswerRecord]:
    records = []
    i = 0
    for (hpo, comparison), count in cells.items():
        for _ in range(count):
            records.append(
                AnswerRecord(
                    doc_id=f"{tag}-{i:03d}",
                    answers={"hpo": Answer(hpo), "comparison": Answer(comparison)},
                )
            )
            i += 1
    return records


def test_confusion_matrix_reproduces_reference_cells():
    def cells(counts):
        return dict(zip(CELL_ORDER, counts))

    # two sets over the same 176 documents
    a = _records_from_cells(cells((47, 98, 6, 25)), "a")
    b = _records_from_cells(cells((64, 48, 35, 29)), "b")
    m = compare_answers(a, b, axes=("hpo", "comparison"))
    assert [m.cells_a[c] for c in CELL_ORDER] == [47, 98, 6, 25]
    assert [m.cells_b[c] for c in CELL_ORDER] == [64, 48, 35, 29]
    assert (m.total_a, m.total_b) == (176, 176)
    assert [m.difference(c) for c in CELL_ORDER] == [-17, 50, -29, -4]
    assert m.total_difference == 0
    assert m.rows()[-1] == ("Total", 176, 176, 0)

    # sets of unequal size keep their own totals
    a2 = _records_from_cells(cells((6, 51, 5, 84)), "a2")
    b2 = _records_from_cells(cells((47, 98, 6, 25)), "b2")
    m2 = compare_answers(a2, b2, axes=("hpo", "comparison"))
    assert (m2.total_a, m2.total_b) == (146, 176)
    assert [m2.difference(c) for c in CELL_ORDER] == [-41, -47, -1, 59]
    assert m2.total_difference == -30
    assert m2.rows()[-1] == ("Total", 146, 176, -30)


# ------------------------------------------------- 10. regex baseline


def test_regex_baseline_reproduces_expected_verdicts_and_bins(data_dir):
    snippets = [
        json.loads(line)
        for line in (data_dir / "baseline_snippets.jsonl").read_text().splitlines()
        if line.strip()
    ]
    assert len(snippets) == 20
    for snip in snippets:
        doc = Document(id=snip["id"], title="Snippet", abstract=snip["text"])
        record = regex_baseline(doc)
        for key, expected in snip["expected"].items():
            assert record.verdict(key) == expected, (snip["id"], key)

    from importlib import resources

    bins = json.loads(
        resources.files("litmine.data").joinpath("frequency_bins.json").read_text()
    )
    for bin_name, aliases in bins.items():
        for alias in aliases:
            assert bin_frequency(alias) == bin_name, alias
    assert bin_frequency("5-minute intervals") == "Intraday"

    groups = json.loads(
        resources.files("litmine.data").joinpath("loss_groups.json").read_text()
    )
    for group, aliases in groups.items():
        for alias in aliases:
            assert group_loss(alias) == group, alias


# -------------------------------------------------- 11. qa protocol


def test_qa_protocol_is_deterministic_and_accounts_for_every_doc(tmp_path):
    docs = [
        Document(id=f"p{i}", title=f"Study {i}", abstract=f"Abstract number {i}.")
        for i in range(3)
    ]
    reply = good_reply()
    quiet = RetryPolicy(sleep=lambda _: None)

    # byte-identical store and log across two fresh runs
    outputs = []
    for name in ("one", "two"):
        store = tmp_path / name / "answers.jsonl"
        store.parent.mkdir()
        transport = MockChatTransport({"*": [{"content": reply}]})
        summary = run_protocol(docs, transport, store, model="scripted", policy=quiet)
        assert summary.stored == 3
        outputs.append(
            (store.read_bytes(), store.with_suffix(".jsonl.log.jsonl").read_bytes())
        )
    assert outputs[0] == outputs[1]

    # an oversized document is excluded locally but still counted
    big = Document(id="big", title="Huge", abstract="x" * 200_000)
    assert len(build_prompt(big)) > 120_000
    store = tmp_path / "budget.jsonl"
    transport = MockChatTransport({"*": [{"content": reply}]})
    summary = run_protocol(docs + [big], transport, store, model="scripted", policy=quiet)
    assert summary.too_large == 1
    assert summary.stored == 3
    assert [r.doc_id for r in load_answers(store)] == ["p0", "p1", "p2"]

    # two transient failures then success: completed, with retries on record
    store = tmp_path / "flaky.jsonl"
    transport = MockChatTransport(
        {"*": [{"error": "overloaded"}, {"error": "overloaded"}, {"content": reply}]}
    )
    summary = run_protocol(docs[:1], transport, store, model="scripted", policy=quiet)
    assert summary.stored == 1
    assert summary.retries == 2
    log_lines = [
        json.loads(line)
        for line in store.with_suffix(".jsonl.log.jsonl").read_text().splitlines()
    ]
    assert log_lines[0]["status"] == "ok"
    assert log_lines[0]["retries"] == 2


# ------------------------------------------------- 12. full pipeline


def test_pipeline_end_to_end_is_reproducible(minicorpus_path, tmp_path):
    runner = CliRunner()

    def run(outdir, args):
        result = runner.invoke(
            cli_main, ["--output-dir", str(outdir), "--seed", "0", *args]
        )
        assert result.exit_code == 0, result.output
        return result

    def chain(outdir):
        outdir.mkdir()
        run(outdir, ["filter", "--corpus", str(minicorpus_path)])
        run(outdir, ["embed", "fallback", "--corpus", str(outdir / "filtered.jsonl"), "--dim", "32"])
        run(outdir, ["reduce", "--emb", str(outdir / "embeddings.emb"), "--k", "10"])
        run(outdir, ["cluster", "--layout", str(outdir / "layout.csv"), "--min-cluster-size", "5"])
        shared = [
            "--corpus", str(outdir / "filtered.jsonl"),
            "--labels", str(outdir / "labels.csv"),
            "--emb", str(outdir / "embeddings.emb"),
            "--layout", str(outdir / "layout.csv"),
        ]
        run(outdir, ["topics", "build", *shared])
        run(outdir, ["topics", "trends", *shared])

    start = time.perf_counter()
    chain(tmp_path / "a")
    elapsed = time.perf_counter() - start
    chain(tmp_path / "b")

    produced = [
        "filtered.jsonl",
        "frequency.csv",
        "embeddings.emb",
        "layout.csv",
        "labels.csv",
        "condensed_tree.json",
        "topics.json",
        "topic_trends.csv",
    ]
    for name in produced:
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, f"{name} differs between seeded runs"

    assert elapsed < 120.0, f"pipeline took {elapsed:.1f}s"
