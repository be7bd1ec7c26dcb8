"""Command-line surface for the corpus mining pipeline.

Every subcommand reads its inputs, writes its documented output files
under ``--output-dir``, and drops a ``<command>.meta.json`` beside them
recording the seed, parameters, and timing.  Wall-clock time appears
only in metadata files, so primary outputs are byte-stable across reruns
with the same inputs and seed.

Options resolve flag-first, then the ``--config`` JSON file, then the
built-in default.  All randomness flows from the single ``--seed``.
"""

from __future__ import annotations

import csv
import functools
import json
import shutil
import time
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from .clustering import hdbscan, read_labels_csv, write_labels_csv
from .corpus import CorpusStore, load_corpus, sample, write_corpus
from .embeddings import (
    DEFAULT_DIM,
    export_embeddings,
    fallback_embed,
    import_embeddings,
    remote_embed,
)
from .errors import LitmineError
from .filtering import compile_patterns, filter_corpus, load_pattern_spec, packaged_patterns
from .manifold import (
    DEFAULT_EPOCHS,
    DEFAULT_K,
    DEFAULT_K_OUT,
    DEFAULT_MIN_DIST,
    DEFAULT_NEG_SAMPLES,
    DEFAULT_SPREAD,
    read_layout_csv,
    umap,
    write_layout_csv,
)
from .qa import (
    SIZE_BUDGET,
    VERDICT_YES,
    bin_frequency,
    categorize_models,
    compare_answers,
    group_loss,
    load_answers,
    regex_baseline,
    run_protocol,
    tally_verdicts,
    write_bin_csv,
    write_tally_csv,
    append_answer,
)
from .textstats import (
    DATA_CONTEXT_CUES,
    PreprocessConfig,
    gazetteer_entities,
    load_gazetteer,
    load_taxonomy,
    ngrams,
    packaged_gazetteer,
    packaged_taxonomy,
    preprocess,
    taxonomy_trends,
    yearly_share,
)
from .topics import (
    build_topics,
    label_topic,
    match_query,
    merge_topics,
    topic_hierarchy,
    topic_trends,
    write_hierarchy_json,
    write_topic_report,
)
from .transports import (
    HttpChatTransport,
    HttpEmbedTransport,
    MockChatTransport,
    RetryPolicy,
)


class CliState:
    """Resolved global options plus the loaded config mapping."""

    def __init__(self, cfg: dict, output_dir: Path, seed: int) -> None:
        self.cfg = cfg
        self.output_dir = output_dir
        self.seed = seed

    def opt(self, key: str, flag_value, default=None, required: bool = False):
        value = flag_value if flag_value is not None else self.cfg.get(key, default)
        if required and value is None:
            flag = "--" + key.replace("_", "-")
            raise click.ClickException(f"missing {flag} (or config key {key!r})")
        return value

    def out(self, name: str | Path) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.output_dir / path


def _oneline(message: str) -> str:
    return " ".join(str(message).split()) or "unspecified failure"


def guarded(fn):
    """Convert package errors into single-line CLI failures (exit 1)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (LitmineError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise click.ClickException(_oneline(exc)) from exc

    return wrapper


def _write_meta(state: CliState, command: str, params: dict, outputs: list[Path], started: float) -> None:
    meta = {
        "command": command,
        "version": __version__,
        "seed": state.seed,
        "params": {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()},
        "outputs": [p.name for p in outputs],
        "started_at": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(timespec="seconds"),
        "elapsed_seconds": round(time.time() - started, 3),
    }
    path = state.output_dir / f"{command}.meta.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


@click.group()
@click.version_option(version=__version__, prog_name="litmine")
@click.option("--output-dir", type=click.Path(file_okay=False), default=None, help="Directory for outputs (default '.').")
@click.option("--seed", type=int, default=None, help="Seed for every random choice (default 0).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON config; flags override its keys.")
@click.pass_context
def main(ctx: click.Context, output_dir: str | None, seed: int | None, config_path: str | None) -> None:
    """Mine a literature corpus: filter, trend stats, embed, reduce, cluster, topics, QA."""
    cfg: dict = {}
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise click.ClickException(_oneline(f"config {config_path}: {exc}"))
        if not isinstance(cfg, dict):
            raise click.ClickException(f"config {config_path}: expected a JSON object")
    resolved_dir = Path(output_dir if output_dir is not None else cfg.get("output_dir", "."))
    resolved_dir.mkdir(parents=True, exist_ok=True)
    resolved_seed = seed if seed is not None else int(cfg.get("seed", 0))
    ctx.obj = CliState(cfg=cfg, output_dir=resolved_dir, seed=resolved_seed)


def _state(ctx: click.Context) -> CliState:
    return ctx.obj


def _load_store(state: CliState, corpus_flag, strictness: str = "strict") -> CorpusStore:
    corpus_path = state.opt("corpus", corpus_flag, required=True)
    return load_corpus(corpus_path, strictness=strictness)


# ---------------------------------------------------------------- filter


@main.command("filter")
@click.option("--corpus", "corpus_flag", default=None, help="Corpus JSONL path.")
@click.option("--patterns", "patterns_flag", default=None, help="Pattern spec JSONL; default: packaged trading-strategy set.")
@click.option("--strictness", type=click.Choice(["strict", "skip_bad"]), default="strict", show_default=True)
@click.option("--keep-missing-abstract", is_flag=True, help="Keep matching documents whose abstract is empty.")
@click.pass_context
@guarded
def filter_cmd(ctx, corpus_flag, patterns_flag, strictness, keep_missing_abstract):
    """Keyword-filter a corpus; write the subset and its frequency table."""
    state = _state(ctx)
    started = time.time()
    store = _load_store(state, corpus_flag, strictness)
    patterns_path = state.opt("patterns", patterns_flag)
    patterns = (
        compile_patterns(load_pattern_spec(patterns_path))
        if patterns_path
        else packaged_patterns()
    )
    filtered, table = filter_corpus(store, patterns, require_abstract=not keep_missing_abstract)
    out_corpus = state.out("filtered.jsonl")
    out_table = state.out("frequency.csv")
    filtered.write(out_corpus)
    table.write_csv(out_table)
    _write_meta(
        state,
        "filter",
        {
            "corpus": state.opt("corpus", corpus_flag),
            "patterns": patterns_path or "packaged",
            "strictness": strictness,
            "require_abstract": not keep_missing_abstract,
            "input_docs": store.doc_count,
            "skipped_records": store.skipped,
            "kept_docs": len(filtered),
        },
        [out_corpus, out_table],
        started,
    )
    click.echo(f"kept {len(filtered)} of {store.doc_count} documents -> {out_corpus.name}, {out_table.name}")


# ---------------------------------------------------------------- stats


@main.group("stats")
def stats_group():
    """Corpus statistics: n-grams, taxonomy trends, gazetteer counts, yearly share."""


@stats_group.command("ngrams")
@click.option("--corpus", "corpus_flag", default=None)
@click.option("--n", "n_value", type=int, default=2, show_default=True)
@click.option("--top", type=int, default=50, show_default=True, help="Rows to keep, most frequent first.")
@click.pass_context
@guarded
def stats_ngrams(ctx, corpus_flag, n_value, top):
    """Count the most frequent n-grams over preprocessed title+abstract text."""
    state = _state(ctx)
    started = time.time()
    store = _load_store(state, corpus_flag)
    config = PreprocessConfig.default()
    totals: Counter = Counter()
    for doc in store:
        tokens = preprocess(f"{doc.title} {doc.abstract}", config)
        totals.update(ngrams(tokens, n_value))
    out_path = state.out("ngrams.csv")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ngram", "count"])
        ranked = sorted(totals.items(), key=lambda kv: (-kv[1], " ".join(kv[0])))
        for gram, count in ranked[:top]:
            writer.writerow([" ".join(gram), count])
    _write_meta(
        state,
        "stats-ngrams",
        {"corpus": state.opt("corpus", corpus_flag), "n": n_value, "top": top, "distinct": len(totals)},
        [out_path],
        started,
    )
    click.echo(f"{len(totals)} distinct {n_value}-grams -> {out_path.name}")


@stats_group.command("trends")
@click.option("--corpus", "corpus_flag", default=None)
@click.option("--taxonomy", "taxonomy_flag", default=None, help="Packaged taxonomy name or a JSONL path (default model_families).")
@click.option("--context-cues", default=None, help="Comma-separated cue words; 'none' disables. Default: data-context cues for time_horizons, none otherwise.")
@click.option("--context-window", type=int, default=6, show_default=True)
@click.pass_context
@guarded
def stats_trends(ctx, corpus_flag, taxonomy_flag, context_cues, context_window):
    """Per-year category counts for a regex taxonomy."""
    state = _state(ctx)
    started = time.time()
    store = _load_store(state, corpus_flag)
    name = state.opt("taxonomy", taxonomy_flag, default="model_families")
    if context_cues is None:
        cues = DATA_CONTEXT_CUES if name == "time_horizons" else ()
    elif context_cues.strip().lower() == "none":
        cues = ()
    else:
        cues = tuple(c.strip() for c in context_cues.split(",") if c.strip())
    if Path(name).exists():
        taxonomy = load_taxonomy(name, context_cues=cues, context_window=context_window)
    else:
        taxonomy = packaged_taxonomy(name, context_cues=cues, context_window=context_window)
    series = taxonomy_trends(store, taxonomy)
    out_path = state.out("trends.csv")
    series.write_csv(out_path)
    _write_meta(
        state,
        "stats-trends",
        {
            "corpus": state.opt("corpus", corpus_flag),
            "taxonomy": name,
            "context_cues": list(cues),
            "context_window": context_window,
        },
        [out_path],
        started,
    )
    click.echo(f"taxonomy {taxonomy.name!r}: {len(taxonomy.categories)} categories -> {out_path.name}")


@stats_group.command("gazetteer")
@click.option("--corpus", "corpus_flag", default=None)
@click.option("--gazetteer", "gazetteer_flag", default=None, help="Packaged gazetteer name (assets, markets) or a JSONL path (default assets).")
@click.pass_context
@guarded
def stats_gazetteer(ctx, corpus_flag, gazetteer_flag):
    """Per-entity document counts using a fixed alias list."""
    state = _state(ctx)
    started = time.time()
    store = _load_store(state, corpus_flag)
    name = state.opt("gazetteer", gazetteer_flag, default="assets")
    entries = load_gazetteer(name) if Path(name).exists() else packaged_gazetteer(name)
    counts = gazetteer_entities(store, entries)
    out_path = state.out("gazetteer.csv")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "count"])
        for entity, _aliases in entries:
            writer.writerow([entity, counts.get(entity, 0)])
    _write_meta(
        state,
        "stats-gazetteer",
        {"corpus": state.opt("corpus", corpus_flag), "gazetteer": name, "entities": len(entries)},
        [out_path],
        started,
    )
    click.echo(f"{len(entries)} entities -> {out_path.name}")


def _read_year_counts(path: str | Path) -> dict[int, int]:
    counts: dict[int, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0].strip().lower() == "year":
                continue
            counts[int(row[0])] = int(row[1])
    return counts


@stats_group.command("share")
@click.option("--subset", "subset_flag", default=None, help="CSV of year,count for the filtered corpus.")
@click.option("--universe", "universe_flag", default=None, help="CSV of year,count for the whole collection.")
@click.pass_context
@guarded
def stats_share(ctx, subset_flag, universe_flag):
    """Basis points of the universe captured per year: 10000 * subset/universe."""
    state = _state(ctx)
    started = time.time()
    subset_path = state.opt("subset", subset_flag, required=True)
    universe_path = state.opt("universe", universe_flag, required=True)
    share = yearly_share(_read_year_counts(subset_path), _read_year_counts(universe_path))
    out_path = state.out("share.csv")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "bps"])
        for year in sorted(share):
            writer.writerow([year, repr(share[year])])
    _write_meta(
        state,
        "stats-share",
        {"subset": subset_path, "universe": universe_path, "years": len(share)},
        [out_path],
        started,
    )
    click.echo(f"{len(share)} years -> {out_path.name}")


# ---------------------------------------------------------------- embed


@main.group("embed")
def embed_group():
    """Produce or validate document embedding matrices (EMB1 binary files)."""


def _doc_texts(store: CorpusStore) -> tuple[list[str], list[str]]:
    ids, texts = [], []
    for doc in store:
        ids.append(doc.id)
        texts.append(f"{doc.title} {doc.abstract}")
    return ids, texts


@embed_group.command("import")
@click.option("--emb", "emb_flag", default=None, help="EMB1 file to validate and copy into the workspace.")
@click.pass_context
@guarded
def embed_import(ctx, emb_flag):
    """Validate an externally produced EMB1 file and copy it to the output dir."""
    state = _state(ctx)
    started = time.time()
    emb_path = Path(state.opt("emb", emb_flag, required=True))
    matrix = import_embeddings(emb_path)
    out_path = state.out("embeddings.emb")
    if emb_path.resolve() != out_path.resolve():
        shutil.copyfile(emb_path, out_path)
    _write_meta(
        state,
        "embed-import",
        {"emb": emb_path, "n": matrix.n, "dim": matrix.dim},
        [out_path],
        started,
    )
    click.echo(f"validated n={matrix.n}, d={matrix.dim} -> {out_path.name}")


@embed_group.command("fallback")
@click.option("--corpus", "corpus_flag", default=None)
@click.option("--dim", type=int, default=None, help=f"Vector width (default {DEFAULT_DIM}).")
@click.pass_context
@guarded
def embed_fallback(ctx, corpus_flag, dim):
    """Seeded hashing embedder: deterministic vectors with no model or network."""
    state = _state(ctx)
    started = time.time()
    store = _load_store(state, corpus_flag)
    dim = int(state.opt("dim", dim, default=DEFAULT_DIM))
    ids, texts = _doc_texts(store)
    matrix = fallback_embed(texts, dim=dim, seed=state.seed, ids=ids)
    out_path = state.out("embeddings.emb")
    export_embeddings(matrix, out_path)
    _write_meta(
        state,
        "embed-fallback",
        {"corpus": state.opt("corpus", corpus_flag), "dim": dim, "n": matrix.n, "zero_rows": len(matrix.zero_rows)},
        [out_path],
        started,
    )
    click.echo(f"embedded n={matrix.n}, d={dim} ({len(matrix.zero_rows)} empty) -> {out_path.name}")


@embed_group.command("remote")
@click.option("--corpus", "corpus_flag", default=None)
@click.option("--url", "url_flag", default=None, help="Embedding endpoint URL.")
@click.option("--model", "model_flag", default=None, help="Embedding model name.")
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.pass_context
@guarded
def embed_remote(ctx, corpus_flag, url_flag, model_flag, batch_size):
    """Embed documents through an HTTP embedding service (key: LITMINE_EMBED_KEY)."""
    state = _state(ctx)
    started = time.time()
    store = _load_store(state, corpus_flag)
    url = state.opt("embed_url", url_flag, required=True)
    model = state.opt("embed_model", model_flag, required=True)
    ids, texts = _doc_texts(store)
    transport = HttpEmbedTransport(url=url, model=model)
    matrix = remote_embed(texts, transport, batch_size=batch_size, ids=ids)
    out_path = state.out("embeddings.emb")
    export_embeddings(matrix, out_path)
    _write_meta(
        state,
        "embed-remote",
        {"corpus": state.opt("corpus", corpus_flag), "url": url, "model": model, "batch_size": batch_size, "n": matrix.n, "dim": matrix.dim},
        [out_path],
        started,
    )
    click.echo(f"embedded n={matrix.n}, d={matrix.dim} via {model} -> {out_path.name}")


# ---------------------------------------------------------------- reduce


@main.command("reduce")
@click.option("--emb", "emb_flag", default=None, help="EMB1 embedding file.")
@click.option("--k", "k_flag", type=int, default=None, help=f"Neighbors per point (default {DEFAULT_K}).")
@click.option("--k-out", "k_out_flag", type=int, default=None, help=f"Output dimensions (default {DEFAULT_K_OUT}; use 2 for plots).")
@click.option("--min-dist", "min_dist_flag", type=float, default=None, help=f"Minimum spacing in the layout (default {DEFAULT_MIN_DIST}).")
@click.option("--spread", "spread_flag", type=float, default=None, help=f"Scale of the layout (default {DEFAULT_SPREAD}).")
@click.option("--epochs", "epochs_flag", type=int, default=None, help=f"Optimization epochs (default {DEFAULT_EPOCHS}).")
@click.option("--neg-samples", "neg_flag", type=int, default=None, help=f"Negative samples per edge (default {DEFAULT_NEG_SAMPLES}).")
@click.option("--metric", type=click.Choice(["cosine_distance", "euclidean"]), default="cosine_distance", show_default=True)
@click.pass_context
@guarded
def reduce_cmd(ctx, emb_flag, k_flag, k_out_flag, min_dist_flag, spread_flag, epochs_flag, neg_flag, metric):
    """Project embeddings to a low-dimensional layout preserving neighborhoods."""
    state = _state(ctx)
    started = time.time()
    emb_path = state.opt("emb", emb_flag, required=True)
    matrix = import_embeddings(emb_path)
    params = {
        "k": int(state.opt("k", k_flag, default=DEFAULT_K)),
        "k_out": int(state.opt("k_out", k_out_flag, default=DEFAULT_K_OUT)),
        "min_dist": float(state.opt("min_dist", min_dist_flag, default=DEFAULT_MIN_DIST)),
        "spread": float(state.opt("spread", spread_flag, default=DEFAULT_SPREAD)),
        "epochs": int(state.opt("epochs", epochs_flag, default=DEFAULT_EPOCHS)),
        "neg_samples": int(state.opt("neg_samples", neg_flag, default=DEFAULT_NEG_SAMPLES)),
    }
    result = umap(
        matrix.vectors,
        k=params["k"],
        k_out=params["k_out"],
        min_dist=params["min_dist"],
        spread=params["spread"],
        epochs=params["epochs"],
        neg_samples=params["neg_samples"],
        metric=metric,
        seed=state.seed,
    )
    out_path = state.out("layout.csv")
    write_layout_csv(matrix.ids, result.layout, out_path)
    _write_meta(
        state,
        "reduce",
        {"emb": emb_path, "metric": metric, **params, **{k: v for k, v in result.params.items() if k in ("a", "b")}, "init": result.init_mode, "n": matrix.n},
        [out_path],
        started,
    )
    click.echo(f"layout n={matrix.n}, d={params['k_out']} ({result.init_mode} init) -> {out_path.name}")


# ---------------------------------------------------------------- cluster


@main.command("cluster")
@click.option("--layout", "layout_flag", default=None, help="Layout CSV from reduce.")
@click.option("--min-cluster-size", "mcs_flag", type=int, default=None, help="Smallest group that counts as a cluster (default 15).")
@click.option("--min-samples", "ms_flag", type=int, default=None, help="Density smoothing; defaults to min(min_cluster_size, n).")
@click.pass_context
@guarded
def cluster_cmd(ctx, layout_flag, mcs_flag, ms_flag):
    """Density-cluster the layout; noise points get label -1."""
    state = _state(ctx)
    started = time.time()
    layout_path = state.opt("layout", layout_flag, required=True)
    ids, layout = read_layout_csv(layout_path)
    mcs = int(state.opt("min_cluster_size", mcs_flag, default=15))
    ms_opt = state.opt("min_samples", ms_flag)
    labels, tree = hdbscan(layout, min_cluster_size=mcs, min_samples=int(ms_opt) if ms_opt is not None else None)
    out_labels = state.out("labels.csv")
    out_tree = state.out("condensed_tree.json")
    write_labels_csv(ids, labels, out_labels)
    tree.write_json(out_tree)
    noise = int(np.sum(labels.labels < 0))
    _write_meta(
        state,
        "cluster",
        {
            "layout": layout_path,
            "min_cluster_size": mcs,
            "min_samples": int(ms_opt) if ms_opt is not None else None,
            "n": len(ids),
            "clusters": labels.n_clusters,
            "noise": noise,
        },
        [out_labels, out_tree],
        started,
    )
    click.echo(f"{labels.n_clusters} clusters, {noise} noise of {len(ids)} -> {out_labels.name}, {out_tree.name}")


# ---------------------------------------------------------------- topics


def _load_topic_model(state: CliState, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag=None):
    corpus_path = state.opt("corpus", corpus_flag, required=True)
    labels_path = state.opt("labels", labels_flag, required=True)
    emb_path = state.opt("emb", emb_flag, required=True)
    layout_path = state.opt("layout", layout_flag, required=True)
    top_k = int(state.opt("top_k", top_k_flag, default=10))

    store = load_corpus(corpus_path)
    ids, labels = read_labels_csv(labels_path)
    layout_ids, layout = read_layout_csv(layout_path)
    if layout_ids != ids:
        raise LitmineError("labels CSV and layout CSV list different documents or orders")
    by_id = {doc.id: doc for doc in store}
    try:
        docs = [by_id[doc_id] for doc_id in ids]
    except KeyError as exc:
        raise LitmineError(f"labels CSV references unknown document id {exc.args[0]!r}")
    matrix = import_embeddings(emb_path)
    model = build_topics(labels, docs, matrix, layout, top_k=top_k)
    target = state.opt("target", target_flag)
    if target is not None:
        model = merge_topics(model, int(target))
    return model, docs, {
        "corpus": corpus_path,
        "labels": labels_path,
        "emb": emb_path,
        "layout": layout_path,
        "top_k": top_k,
        "target": int(target) if target is not None else None,
    }


def _topic_input_options(fn):
    fn = click.option("--corpus", "corpus_flag", default=None)(fn)
    fn = click.option("--labels", "labels_flag", default=None, help="Labels CSV from cluster.")(fn)
    fn = click.option("--emb", "emb_flag", default=None, help="EMB1 embedding file.")(fn)
    fn = click.option("--layout", "layout_flag", default=None, help="Layout CSV from reduce.")(fn)
    fn = click.option("--top-k", "top_k_flag", type=int, default=None, help="Terms kept per topic (default 10).")(fn)
    return fn


@main.group("topics")
def topics_group():
    """Build, merge, and interrogate the cluster-based topic model."""


@topics_group.command("build")
@_topic_input_options
@click.pass_context
@guarded
def topics_build(ctx, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag):
    """Score per-topic terms and write the topic report."""
    state = _state(ctx)
    started = time.time()
    model, _docs, params = _load_topic_model(state, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag)
    out_path = state.out("topics.json")
    write_topic_report(model, out_path)
    _write_meta(state, "topics-build", {**params, "topics": len(model.topic_ids())}, [out_path], started)
    click.echo(f"{len(model.topic_ids())} topics -> {out_path.name}")


@topics_group.command("merge")
@_topic_input_options
@click.option("--target", "target_flag", type=int, default=None, help="Topic count to merge down to.")
@click.pass_context
@guarded
def topics_merge(ctx, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag):
    """Merge the smallest topics into their nearest neighbors until --target remain."""
    state = _state(ctx)
    started = time.time()
    if state.opt("target", target_flag) is None:
        raise click.ClickException("missing --target (or config key 'target')")
    model, _docs, params = _load_topic_model(state, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag)
    out_report = state.out("merged_topics.json")
    out_labels = state.out("merged_labels.csv")
    write_topic_report(model, out_report)
    with open(out_labels, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "topic_label", "probability_placeholder"])
        for doc_id, lb in zip(model.doc_ids, model.labels):
            writer.writerow([doc_id, int(lb), 1.0 if int(lb) >= 0 else 0.0])
    _write_meta(state, "topics-merge", {**params, "topics": len(model.topic_ids())}, [out_report, out_labels], started)
    click.echo(f"merged to {len(model.topic_ids())} topics -> {out_report.name}, {out_labels.name}")


@topics_group.command("trends")
@_topic_input_options
@click.option("--target", "target_flag", type=int, default=None, help="Merge to this many topics first.")
@click.pass_context
@guarded
def topics_trends(ctx, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag):
    """Per-year document counts for each topic."""
    state = _state(ctx)
    started = time.time()
    model, docs, params = _load_topic_model(state, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag)
    trend = topic_trends(model, docs)
    out_path = state.out("topic_trends.csv")
    trend.write_csv(out_path)
    _write_meta(state, "topics-trends", params, [out_path], started)
    click.echo(f"{len(trend.years())} years x {len(model.topic_ids(include_noise=True))} topics -> {out_path.name}")


@topics_group.command("match")
@_topic_input_options
@click.option("--query", "queries", multiple=True, help="Query text; repeatable.")
@click.option("--target", "target_flag", type=int, default=None, help="Merge to this many topics first.")
@click.pass_context
@guarded
def topics_match(ctx, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, queries, target_flag):
    """Rank topics by cosine similarity to each query."""
    state = _state(ctx)
    started = time.time()
    if not queries:
        queries = tuple(state.cfg.get("queries", ()))
    if not queries:
        raise click.ClickException("missing --query (or config key 'queries')")
    model, _docs, params = _load_topic_model(state, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag)
    real_topics = model.topic_ids()
    if not real_topics:
        raise click.ClickException("no topics to match against (everything is noise)")
    dim = model.topics[real_topics[0]].centroid_embedding.shape[0]

    def embed_query(text: str) -> np.ndarray:
        return fallback_embed([text], dim=dim, seed=state.seed).vectors[0]

    out_path = state.out("query_match.csv")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query", "rank", "topic", "similarity"])
        for query in queries:
            match = match_query(model, query, embed_query)
            for rank, (topic, sim) in enumerate(match.ranking, start=1):
                writer.writerow([query, rank, topic, f"{sim:.6f}"])
    _write_meta(state, "topics-match", {**params, "queries": list(queries)}, [out_path], started)
    click.echo(f"{len(queries)} queries -> {out_path.name}")


@topics_group.command("hierarchy")
@_topic_input_options
@click.option("--target", "target_flag", type=int, default=None, help="Merge to this many topics first.")
@click.pass_context
@guarded
def topics_hierarchy(ctx, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag):
    """Average-linkage merge order of topics by embedding similarity."""
    state = _state(ctx)
    started = time.time()
    model, _docs, params = _load_topic_model(state, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag)
    merges = topic_hierarchy(model)
    out_path = state.out("hierarchy.json")
    write_hierarchy_json(merges, out_path)
    _write_meta(state, "topics-hierarchy", {**params, "merges": len(merges)}, [out_path], started)
    click.echo(f"{len(merges)} merges -> {out_path.name}")


def _chat_transport(state: CliState, mock_flag, url_flag, model_flag):
    mock_path = state.opt("mock", mock_flag)
    if mock_path:
        return MockChatTransport.from_jsonl(mock_path), f"mock:{Path(mock_path).name}"
    url = state.opt("llm_url", url_flag, required=True)
    model = state.opt("llm_model", model_flag, required=True)
    return HttpChatTransport(url=url, model=model), model


@topics_group.command("label")
@_topic_input_options
@click.option("--target", "target_flag", type=int, default=None, help="Merge to this many topics first.")
@click.option("--mock", "mock_flag", default=None, help="Scripted chat transport fixture (JSONL).")
@click.option("--llm-url", "url_flag", default=None, help="Chat endpoint URL (key: LITMINE_LLM_KEY).")
@click.option("--llm-model", "model_flag", default=None, help="Chat model name.")
@click.pass_context
@guarded
def topics_label(ctx, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag, mock_flag, url_flag, model_flag):
    """Ask the chat endpoint for a three-word title per topic."""
    state = _state(ctx)
    started = time.time()
    model, _docs, params = _load_topic_model(state, corpus_flag, labels_flag, emb_flag, layout_flag, top_k_flag, target_flag)
    transport, transport_name = _chat_transport(state, mock_flag, url_flag, model_flag)
    titles = {}
    for topic in model.topic_ids():
        titles[str(topic)] = label_topic(model.topics[topic].top_terms, transport)
    out_path = state.out("titles.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(titles, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    _write_meta(state, "topics-label", {**params, "transport": transport_name}, [out_path], started)
    click.echo(f"titled {len(titles)} topics -> {out_path.name}")


# ---------------------------------------------------------------- qa


@main.group("qa")
def qa_group():
    """Per-document question protocol, regex baseline, and evaluation tables."""


@qa_group.command("run")
@click.option("--corpus", "corpus_flag", default=None)
@click.option("--scope", type=click.Choice(["abstract", "fulltext"]), default="abstract", show_default=True)
@click.option("--store", "store_flag", default=None, help="Answer store JSONL (default answers.jsonl).")
@click.option("--mock", "mock_flag", default=None, help="Scripted chat transport fixture (JSONL).")
@click.option("--llm-url", "url_flag", default=None, help="Chat endpoint URL (key: LITMINE_LLM_KEY).")
@click.option("--llm-model", "model_flag", default=None, help="Chat model name.")
@click.option("--size-budget", type=int, default=None, help=f"Max prompt characters (default {SIZE_BUDGET}).")
@click.option("--max-retries", type=int, default=3, show_default=True)
@click.option("--resume", is_flag=True, help="Skip documents already in the store.")
@click.pass_context
@guarded
def qa_run(ctx, corpus_flag, scope, store_flag, mock_flag, url_flag, model_flag, size_budget, max_retries, resume):
    """Ask every document the five questions; append answers to the store."""
    state = _state(ctx)
    started = time.time()
    store = _load_store(state, corpus_flag)
    transport, transport_name = _chat_transport(state, mock_flag, url_flag, model_flag)
    store_path = state.out(state.opt("store", store_flag, default="answers.jsonl"))
    budget = int(state.opt("size_budget", size_budget, default=SIZE_BUDGET))
    summary = run_protocol(
        store,
        transport,
        store_path,
        scope=scope,
        model=transport_name,
        size_budget=budget,
        policy=RetryPolicy(max_retries=max_retries),
        resume=resume,
    )
    _write_meta(
        state,
        "qa-run",
        {
            "corpus": state.opt("corpus", corpus_flag),
            "scope": scope,
            "store": str(store_path),
            "transport": transport_name,
            "size_budget": budget,
            "resume": resume,
            **summary.to_json_dict(),
        },
        [store_path],
        started,
    )
    click.echo(
        f"stored {summary.stored} of {summary.total} "
        f"(skipped {summary.skipped_existing}, too large {summary.too_large}, "
        f"failed {summary.transport_failed + summary.parse_failed}) -> {store_path.name}"
    )


@qa_group.command("baseline")
@click.option("--corpus", "corpus_flag", default=None)
@click.option("--scope", type=click.Choice(["abstract", "fulltext"]), default="abstract", show_default=True)
@click.option("--store", "store_flag", default=None, help="Answer store JSONL (default answers_baseline.jsonl).")
@click.pass_context
@guarded
def qa_baseline(ctx, corpus_flag, scope, store_flag):
    """Answer the questions by keyword search; also write the verdict tally."""
    state = _state(ctx)
    started = time.time()
    corpus_store = _load_store(state, corpus_flag)
    store_path = state.out(state.opt("store", store_flag, default="answers_baseline.jsonl"))
    if store_path.exists():
        raise click.ClickException(f"answer store {store_path} exists; remove it or choose another name")
    records = []
    for doc in corpus_store:
        record = regex_baseline(doc, scope=scope)
        append_answer(store_path, record)
        records.append(record)
    out_tally = state.out("verdict_tally.csv")
    write_tally_csv(tally_verdicts(records), out_tally)
    _write_meta(
        state,
        "qa-baseline",
        {"corpus": state.opt("corpus", corpus_flag), "scope": scope, "records": len(records)},
        [store_path, out_tally],
        started,
    )
    click.echo(f"answered {len(records)} documents -> {store_path.name}, {out_tally.name}")


@qa_group.command("compare")
@click.option("--a", "a_flag", default=None, help="Answer store A (its cells come first).")
@click.option("--b", "b_flag", default=None, help="Answer store B.")
@click.option("--axes", default="hpo,comparison", show_default=True, help="Two question keys, comma-separated.")
@click.pass_context
@guarded
def qa_compare(ctx, a_flag, b_flag, axes):
    """Cross-tabulate two answer stores into a 2x2 confusion table."""
    state = _state(ctx)
    started = time.time()
    a_path = state.opt("a", a_flag, required=True)
    b_path = state.opt("b", b_flag, required=True)
    keys = tuple(k.strip() for k in axes.split(",") if k.strip())
    if len(keys) != 2:
        raise click.ClickException("--axes needs exactly two question keys")
    matrix = compare_answers(load_answers(a_path), load_answers(b_path), axes=keys)
    out_path = state.out("confusion.csv")
    matrix.write_csv(out_path)
    _write_meta(
        state,
        "qa-compare",
        {"a": a_path, "b": b_path, "axes": list(keys), "total_a": matrix.total_a, "total_b": matrix.total_b},
        [out_path],
        started,
    )
    click.echo(
        f"totals {matrix.total_a}/{matrix.total_b}, difference {matrix.total_difference} -> {out_path.name}"
    )


@qa_group.command("bin")
@click.option("--store", "store_flag", default=None, help="Answer store JSONL to summarize.")
@click.option("--question", type=click.Choice(["frequency", "loss", "best-model"]), default="frequency", show_default=True)
@click.option("--mock", "mock_flag", default=None, help="Chat fixture for best-model categorization.")
@click.option("--llm-url", "url_flag", default=None)
@click.option("--llm-model", "model_flag", default=None)
@click.pass_context
@guarded
def qa_bin(ctx, store_flag, question, mock_flag, url_flag, model_flag):
    """Summarize free-text answers into their coarse bins or categories."""
    state = _state(ctx)
    started = time.time()
    store_path = state.opt("store", store_flag, required=True)
    records = load_answers(store_path)
    if question == "frequency":
        counts = Counter(
            bin_frequency(r.elaboration("frequency") if r.verdict("frequency") == VERDICT_YES else "")
            for r in records
        )
        out_path = state.out("frequency_bins.csv")
        write_bin_csv(counts, out_path, "bin")
    elif question == "loss":
        counts = Counter(
            group_loss(r.elaboration("loss") if r.verdict("loss") == VERDICT_YES else "")
            for r in records
        )
        out_path = state.out("loss_groups.csv")
        write_bin_csv(counts, out_path, "group")
    else:
        transport, _name = _chat_transport(state, mock_flag, url_flag, model_flag)
        counts = categorize_models(records, transport)
        out_path = state.out("model_categories.csv")
        write_bin_csv(counts, out_path, "category")
    _write_meta(
        state,
        "qa-bin",
        {"store": store_path, "question": question, "records": len(records)},
        [out_path],
        started,
    )
    click.echo(f"binned {len(records)} records -> {out_path.name}")


# ---------------------------------------------------------------- sample


@main.command("sample")
@click.option("--corpus", "corpus_flag", default=None)
@click.option("--n", "n_flag", type=int, default=None, help="Sample size (default 50).")
@click.pass_context
@guarded
def sample_cmd(ctx, corpus_flag, n_flag):
    """Draw a seeded validation sample of documents for manual review."""
    state = _state(ctx)
    started = time.time()
    store = _load_store(state, corpus_flag)
    n = int(state.opt("n", n_flag, default=50))
    docs = sample(store, n, seed=state.seed)
    out_path = state.out("sample.jsonl")
    write_corpus(docs, out_path)
    _write_meta(
        state,
        "sample",
        {"corpus": state.opt("corpus", corpus_flag), "n": n},
        [out_path],
        started,
    )
    click.echo(f"sampled {len(docs)} documents -> {out_path.name}")


if __name__ == "__main__":
    main()
