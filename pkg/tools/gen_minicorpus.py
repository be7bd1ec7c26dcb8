#!/usr/bin/env python3
"""Generate the 200-document test minicorpus and its frequency oracle.

The corpus mixes four finance research themes with a background of
unrelated ML papers.  A hand-written plant table decides exactly which
documents carry which keyword phrases, and where (title, abstract, or
both).  The expected frequency table is derived from that plan alone,
never by running the package's own matcher, so the committed CSV is an
independent oracle.

Filler text is built from word pools that contain none of the
substrings "trading", "trade", "investment", "strateg" (checked at the
end), which is sufficient to guarantee no accidental keyword hit: every
shipped pattern needs one of those fragments to fire.

Run from the repo root:

    python3 tools/gen_minicorpus.py --out tests/data
"""

from __future__ import annotations

import argparse
import csv
import json
import random
from pathlib import Path

SEED = 7
N_PER_THEME = {"A": 40, "B": 40, "C": 40, "D": 40, "E": 40}

LABELS = {
    "algo": "Algo(rithmic)* trading",
    "invstrat": "Investment strateg.",
    "vola": "Vola(tility)* trading",
    "hft": "High.frequency trading",
    "invsys": "Investment system.",
    "bench": "Benchmark strateg.",
    "pair": "Pair.trading",
    "momentum": "Momentum (trading|strateg.)",
    "contrarian": "Contrarian (trading|strateg.)",
}
LABEL_ORDER = [
    "Algo(rithmic)* trading",
    "Investment strateg.",
    "Vola(tility)* trading",
    "High.frequency trading",
    "Investment system.",
    "Benchmark strateg.",
    "Pair.trading",
    "Momentum (trading|strateg.)",
    "Contrarian (trading|strateg.)",
]

BANNED_FILLER_SUBSTRINGS = ("trading", "trade", "investment", "strateg")

# Sentence pools per theme.  A: deep sequence models, B: market
# microstructure, C: volatility econometrics, D: portfolio
# construction, E: unrelated machine learning background.
POOLS = {
    "A": {
        "subjects": [
            "The recurrent network",
            "A gated sequence model",
            "The attention encoder",
            "Our convolutional baseline",
            "A stacked LSTM",
            "The pretrained encoder",
            "A naïve persistence model",
        ],
        "verbs": ["captures", "forecasts", "compresses", "regularises", "outperforms", "overfits"],
        "objects": [
            "return seasonality",
            "cross-sectional dispersion",
            "intraday reversals",
            "earnings surprises",
            "lagged order imbalance",
            "sector rotation effects",
        ],
        "tails": [
            "across liquid equities",
            "on daily returns",
            "in out-of-sample folds",
            "under regime shifts",
            "despite heavy regularisation",
            "with calibrated uncertainty",
        ],
        "titles": [
            "Sequence Models",
            "Return Forecasting",
            "Attention Mechanisms",
            "Deep Architectures",
            "Temporal Features",
            "Recurrent Baselines",
        ],
    },
    "B": {
        "subjects": [
            "Order flow imbalance",
            "The limit order book",
            "Quoted depth",
            "The bid-ask spread",
            "Tick-level activity",
            "Queue position",
        ],
        "verbs": ["predicts", "widens with", "absorbs", "mirrors", "lags", "amplifies"],
        "objects": [
            "short-horizon price moves",
            "liquidity shocks",
            "cancellation bursts",
            "auction imbalances",
            "hidden order detection",
            "venue fragmentation",
        ],
        "tails": [
            "at one-minute intervals",
            "during auction opens",
            "on fragmented venues",
            "in tick-level prices sampled every second",
            "after fee changes",
            "for NASDAQ-listed shares",
        ],
        "titles": [
            "Order Flow",
            "Limit Order Books",
            "Liquidity Provision",
            "Market Microstructure",
            "Tick Data",
            "Queue Dynamics",
        ],
    },
    "C": {
        "subjects": [
            "The GARCH filter",
            "Realised variance",
            "A regime-switching model",
            "Conditional kurtosis",
            "The leverage effect",
            "Implied skew",
        ],
        "verbs": ["tracks", "understates", "clusters around", "decays after", "inflates", "dampens"],
        "objects": [
            "heteroskedastic shocks",
            "macro announcement days",
            "heavy-tailed innovations",
            "overnight gaps",
            "persistence in squared residuals",
            "jump intensity",
        ],
        "tails": [
            "in daily data",
            "for index futures",
            "across calm and stressed regimes",
            "when sampled monthly",
            "under long memory",
            "at weekly horizons",
        ],
        "titles": [
            "Volatility Clustering",
            "GARCH Dynamics",
            "Regime Switching",
            "Heavy Tails",
            "Realised Variance",
            "Long Memory",
        ],
    },
    "D": {
        "subjects": [
            "The risk-parity allocator",
            "Mean-variance weights",
            "The rebalancing rule",
            "Factor exposure",
            "The shrinkage estimator",
            "Turnover control",
        ],
        "verbs": ["shrinks", "tilts toward", "stabilises", "penalises", "caps", "diversifies"],
        "objects": [
            "estimation error",
            "turnover budgets",
            "drawdown depth",
            "concentration in the S&P 500 universe",
            "factor crowding",
            "tail correlation",
        ],
        "tails": [
            "at monthly horizons",
            "for long-only mandates",
            "under leverage caps",
            "with quarterly rebalancing",
            "net of costs",
            "using monthly data",
        ],
        "titles": [
            "Portfolio Construction",
            "Risk Budgeting",
            "Factor Allocation",
            "Rebalancing Rules",
            "Estimation Risk",
            "Covariance Shrinkage",
        ],
    },
    "E": {
        "subjects": [
            "The classifier",
            "A sparse autoencoder",
            "The recommender",
            "Gradient clipping",
            "The distilled model",
            "Curriculum ordering",
        ],
        "verbs": ["improves", "degrades", "saturates", "mitigates", "accelerates", "biases"],
        "objects": [
            "top-5 accuracy",
            "click-through lift",
            "sample efficiency",
            "label noise robustness",
            "catastrophic forgetting",
            "calibration error",
        ],
        "tails": [
            "on held-out users",
            "across image benchmarks",
            "with modest compute",
            "under distribution shift",
            "in low-label regimes",
            "after quantisation",
        ],
        "titles": [
            "Image Classification",
            "Recommender Systems",
            "Sparse Coding",
            "Model Compression",
            "Curriculum Effects",
            "Label Noise",
        ],
    },
}

VENUES = [
    "Review of Quantitative Modelling",
    "Financial Computing Letters",
    "Empirical Markets Journal",
    "Workshop on Market Microstructure Analytics",
    "Annals of Forecasting Practice",
    "Symposium on Applied Learning",
]

# The plant table.  Each entry is one document:
#   theme, hits = [(label_key, where)], title (None = filler title),
#   sentences = planted abstract sentences (inserted mid-abstract),
#   negative = hand-reasoned decoy that must NOT add table counts,
#   no_abstract = document ships without an abstract.
# "where" is the PLANNED location of the keyword: title / abstract / both.
PLANTS = [
    # --- Algo(rithmic)* trading ---
    dict(theme="A", hits=[("algo", "abstract")],
         sentences=["Large brokers now operate algorithmic trading desks around the clock."]),
    dict(theme="B", hits=[("algo", "abstract")],
         sentences=["Venue operators court algo trading flow with maker rebates."]),
    dict(theme="C", hits=[("algo", "abstract")],
         sentences=["Regulators ask whether ALGORITHMIC TRADING amplifies stress episodes."]),
    dict(theme="D", hits=[("algo", "abstract")],
         sentences=["Execution costs fell once algorithmic trading replaced manual working of orders."]),
    dict(theme="A", hits=[("algo", "title")],
         title="Algorithmic Trading under Latency Constraints"),
    dict(theme="B", hits=[("algo", "title")],
         title="Algo Trading and Quote Stuffing"),
    dict(theme="A", hits=[("algo", "both")],
         title="Learning Curves in Algorithmic Trading",
         sentences=["We document how algorithmic trading performance improves with fill history."]),
    dict(theme="D", hits=[("algo", "both")],
         title="Algo Trading Capacity Limits",
         sentences=["Capacity in algo trading decays quickly as participation rises."]),
    # --- Investment strateg. ---
    dict(theme="D", hits=[("invstrat", "abstract")],
         sentences=["Backtests of the investment strategy under study are adjusted for costs."]),
    dict(theme="D", hits=[("invstrat", "abstract")],
         sentences=["Few investment strategies survive the multiple-testing haircut."]),
    dict(theme="A", hits=[("invstrat", "abstract")],
         sentences=["The network is wrapped into an investment strategy with weekly rebalancing."]),
    dict(theme="C", hits=[("invstrat", "abstract")],
         sentences=["Variance timing is an old investment strategy revisited here with intraday data."]),
    dict(theme="B", hits=[("invstrat", "abstract")],
         sentences=["Queue-jumping is hardly an investment strategy in the classical sense."]),
    dict(theme="D", hits=[("invstrat", "title")],
         title="Investment Strategies for Thin Markets"),
    dict(theme="D", hits=[("invstrat", "both")],
         title="Stress Testing an Investment Strategy",
         sentences=["The investment strategy is stress tested against three liquidity scenarios."]),
    dict(theme="A", hits=[("invstrat", "both")],
         title="Investment Strategies from Learned Embeddings",
         sentences=["Embedding similarity seeds a family of investment strategies with shared risk."]),
    # --- Vola(tility)* trading ---
    dict(theme="C", hits=[("vola", "abstract")],
         sentences=["Desks running volatility trading books hedge with variance swaps."]),
    dict(theme="C", hits=[("vola", "abstract")],
         sentences=["Profits from volatility trading concentrate around announcement clusters."]),
    dict(theme="B", hits=[("vola", "title")],
         title="Volatility Trading and Quote Dynamics"),
    # --- High.frequency trading ---
    dict(theme="B", hits=[("hft", "abstract")],
         sentences=["Message traffic from high-frequency trading dwarfs executed volume."]),
    dict(theme="B", hits=[("hft", "abstract")],
         sentences=["Critics argue that high frequency trading taxes slower participants."],
         body_extra=["Models train on daily closing prices drawn from three venues.",
                     "Hyperparameters were tuned by grid search over a small lattice.",
                     "We compare gradient boosted machines against a linear baseline.",
                     "The mean squared error objective is reported alongside hit rate."]),
    dict(theme="A", hits=[("hft", "abstract")],
         sentences=["Sequence models struggle at the horizons where high-frequency trading operates."]),
    dict(theme="B", hits=[("hft", "title")],
         title="High-Frequency Trading around Auctions"),
    dict(theme="B", hits=[("hft", "title")],
         title="High Frequency Trading and Depth Resilience"),
    dict(theme="B", hits=[("hft", "both")],
         title="Inventory Risk in High-Frequency Trading",
         sentences=["Inventory limits bind high-frequency trading desks during stress."]),
    # --- Investment system. ---
    dict(theme="D", hits=[("invsys", "abstract")],
         sentences=["Our investment system allocates capital across venues overnight."]),
    dict(theme="A", hits=[("invsys", "abstract")],
         sentences=["The pilot concluded with a fully automated investment system."]),
    dict(theme="D", hits=[("invsys", "both")],
         title="Investment Systems for Retirement Portfolios",
         sentences=["Modern investment systems ingest analyst revisions nightly."]),
    # --- Benchmark strateg. ---
    dict(theme="D", hits=[("bench", "abstract")],
         sentences=["Returns are reported net of the benchmark strategy rebalanced monthly."]),
    dict(theme="C", hits=[("bench", "title")],
         title="Benchmark Strategies for Variance Forecasts"),
    # --- Pair.trading ---
    dict(theme="D", hits=[("pair", "abstract")],
         sentences=["Convergence bets such as pair trading depend on stable spreads."]),
    # "repair trading" contains pair + wildcard + trading, so it is a
    # real hit for the shipped pattern; planned as such on purpose.
    dict(theme="B", hits=[("pair", "abstract")],
         sentences=["Exchanges must repair trading gateways quickly after an outage."]),
    dict(theme="D", hits=[("pair", "title")],
         title="Pair-Trading the Energy Complex"),
    dict(theme="D", hits=[("pair", "both")],
         title="Pair Trading with Cointegration Filters",
         sentences=["Spread reversion makes pair trading attractive when borrow is cheap."]),
    # --- Momentum (trading|strateg.) ---
    dict(theme="D", hits=[("momentum", "abstract")],
         sentences=["The sample favours a momentum strategy tilted toward liquid names."],
         body_extra=["Daily returns feed a rolling estimation window of five years.",
                     "No hyperparameter optimization is attempted beyond the default grid.",
                     "Sharpe ratios are reported gross and net of costs."]),
    dict(theme="D", hits=[("momentum", "abstract")],
         sentences=["Turnover from momentum trading concentrates in month ends."]),
    dict(theme="A", hits=[("momentum", "abstract")],
         sentences=["We compare momentum strategies across regions and horizons."]),
    dict(theme="D", hits=[("momentum", "title")],
         title="Momentum Trading in Commodity Curves"),
    dict(theme="D", hits=[("momentum", "title")],
         title="Momentum Strategies after Crashes"),
    dict(theme="D", hits=[("momentum", "both")],
         title="Momentum Strategy Decay",
         sentences=["Crowding erodes the momentum strategy premium within months."]),
    # --- Contrarian (trading|strateg.) ---
    dict(theme="D", hits=[("contrarian", "abstract")],
         sentences=["Short-horizon contrarian strategies monetise liquidity provision."]),
    dict(theme="C", hits=[("contrarian", "title")],
         title="Contrarian Trading around Variance Spikes"),
    dict(theme="D", hits=[("contrarian", "both")],
         title="Contrarian Strategy Capacity",
         sentences=["The contrarian strategy fades rallies in the most liquid decile."]),
    # --- multi-label documents ---
    dict(theme="D", hits=[("momentum", "abstract"), ("contrarian", "abstract")],
         sentences=["A blended book runs a momentum strategy beside a contrarian strategy at equal risk."]),
    dict(theme="B", hits=[("hft", "title"), ("algo", "title")],
         title="High-Frequency Trading versus Algo Trading Venues"),
    # --- negative controls (no planned counts) ---
    # "pairs trading": pair + TWO characters before trading, so the
    # wildcard pattern cannot bridge it; document matches nothing.
    dict(theme="B", hits=[], negative=True,
         sentences=["The desk wound down its pairs trading book last spring."]),
    # Title ends exactly at "System": the pattern needs one more
    # character after "system", so only the abstract misses here; the
    # momentum sentence keeps the document in the filtered set.
    dict(theme="D", hits=[("momentum", "abstract")], negative=True,
         title="A Modular Investment System",
         sentences=["Risk, momentum strategy design, and reporting share one codebase."]),
    # Reversed word order must not fire.
    dict(theme="C", hits=[], negative=True,
         sentences=["Horizons for strategic investment lengthen when funding is patient."]),
    # No "high" prefix, so the frequency pattern stays silent.
    dict(theme="B", hits=[], negative=True,
         sentences=["Execution quality matters even for low-frequency trading desks."]),
    # Title hit on a document without an abstract: dropped entirely
    # under the default abstract requirement.
    dict(theme="B", hits=[("algo", "title")], negative=True, no_abstract=True,
         title="Algorithmic Trading Infrastructure Costs"),
]


def make_sentence(rng: random.Random, theme: str) -> str:
    pool = POOLS[theme]
    return "{} {} {} {}.".format(
        rng.choice(pool["subjects"]),
        rng.choice(pool["verbs"]),
        rng.choice(pool["objects"]),
        rng.choice(pool["tails"]),
    )


def make_title(rng: random.Random, theme: str) -> str:
    pool = POOLS[theme]["titles"]
    a, b = rng.sample(pool, 2)
    joiner = rng.choice(["and", "under", "beyond", "without"])
    return f"{a} {joiner} {b}"


def make_abstract(rng: random.Random, theme: str, planted: list[str] | None = None) -> str:
    n = rng.randint(3, 5)
    sentences = [make_sentence(rng, theme) for _ in range(n)]
    if planted:
        pos = rng.randint(1, len(sentences) - 1)
        sentences[pos:pos] = planted
    return " ".join(sentences)


def make_body(rng: random.Random, theme: str, extra: list[str] | None = None) -> str:
    paragraphs = []
    for _ in range(3):
        paragraphs.append(" ".join(make_sentence(rng, theme) for _ in range(rng.randint(4, 7))))
    if extra:
        paragraphs.insert(1, " ".join(extra))
    return "\n\n".join(paragraphs)


def pick_year(rng: random.Random) -> int:
    years = list(range(1998, 2025))
    weights = [i + 1 for i in range(len(years))]
    return rng.choices(years, weights=weights, k=1)[0]


def build_docs() -> tuple[list[dict], list[dict]]:
    """Returns (documents, plant records aligned by temporary index)."""
    rng = random.Random(SEED)
    docs: list[dict] = []
    plant_meta: list[dict] = []

    for plant in PLANTS:
        theme = plant["theme"]
        title = plant.get("title") or make_title(rng, theme)
        record: dict = {"title": title, "venue": rng.choice(VENUES), "year": pick_year(rng)}
        if plant.get("no_abstract"):
            record["abstract"] = ""
        else:
            record["abstract"] = make_abstract(rng, theme, plant.get("sentences"))
        if plant.get("body_extra"):
            record["body"] = make_body(rng, theme, plant["body_extra"])
        docs.append(record)
        plant_meta.append(plant)

    counts_used: dict[str, int] = {}
    for plant in PLANTS:
        counts_used[plant["theme"]] = counts_used.get(plant["theme"], 0) + 1

    unicode_budget = {"C": ["Lévy Flights in Realised Variance"],
                      "A": ["Naïve Baselines for Sequence Forecasts"]}
    missing_year_left = 8
    missing_abstract_left = 3
    body_left = 6

    for theme, total in N_PER_THEME.items():
        for _ in range(total - counts_used.get(theme, 0)):
            if unicode_budget.get(theme):
                title = unicode_budget[theme].pop()
                abstract = make_abstract(rng, theme) + " The σ-field of arrival times anchors the filtration."
            else:
                title = make_title(rng, theme)
                abstract = make_abstract(rng, theme)
            record = {"title": title, "abstract": abstract,
                      "venue": rng.choice(VENUES), "year": pick_year(rng)}
            if theme == "E" and missing_year_left > 0:
                del record["year"]
                missing_year_left -= 1
            elif theme == "E" and missing_abstract_left > 0:
                record["abstract"] = ""
                missing_abstract_left -= 1
            if theme != "E" and body_left > 0 and rng.random() < 0.12:
                record["body"] = make_body(rng, theme)
                body_left -= 1
            docs.append(record)
            plant_meta.append({"theme": theme, "hits": [], "filler": True})

    order = list(range(len(docs)))
    rng.shuffle(order)
    docs = [docs[i] for i in order]
    plant_meta = [plant_meta[i] for i in order]
    for i, record in enumerate(docs, start=1):
        record["id"] = f"mc-{i:04d}"
    return docs, plant_meta


def derive_expected(docs: list[dict], plant_meta: list[dict]) -> tuple[dict, dict, dict]:
    """Walk the plan: per-label document sets for abstract, title, union."""
    abstract_sets: dict[str, set] = {lb: set() for lb in LABEL_ORDER}
    title_sets: dict[str, set] = {lb: set() for lb in LABEL_ORDER}
    for record, plant in zip(docs, plant_meta):
        if not record.get("abstract"):
            continue  # mirrors the abstract requirement of the filter step
        for key, where in plant.get("hits", []):
            label = LABELS[key]
            if where in ("abstract", "both"):
                abstract_sets[label].add(record["id"])
            if where in ("title", "both"):
                title_sets[label].add(record["id"])
    union_sets = {lb: abstract_sets[lb] | title_sets[lb] for lb in LABEL_ORDER}
    return abstract_sets, title_sets, union_sets


def check_filler_is_clean(docs: list[dict], plant_meta: list[dict]) -> None:
    for record, plant in zip(docs, plant_meta):
        if plant.get("hits") or plant.get("negative"):
            continue
        blob = " ".join([record.get("title", ""), record.get("abstract", ""), record.get("body", "")]).lower()
        for bad in BANNED_FILLER_SUBSTRINGS:
            if bad in blob:
                raise SystemExit(f"filler document {record['id']} contains banned substring {bad!r}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="tests/data", help="output directory")
    args = parser.parse_args()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    docs, plant_meta = build_docs()
    check_filler_is_clean(docs, plant_meta)
    abstract_sets, title_sets, union_sets = derive_expected(docs, plant_meta)

    corpus_path = out_dir / "minicorpus.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for record in docs:
            ordered = {"id": record["id"], "title": record["title"], "abstract": record["abstract"]}
            if record.get("body"):
                ordered["body"] = record["body"]
            if "year" in record:
                ordered["year"] = record["year"]
            ordered["venue"] = record["venue"]
            fh.write(json.dumps(ordered, ensure_ascii=False) + "\n")

    expected_path = out_dir / "minicorpus_expected_frequency.csv"
    with open(expected_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "abstract", "title", "both"])
        sums = [0, 0, 0]
        for label in LABEL_ORDER:
            row = [len(abstract_sets[label]), len(title_sets[label]), len(union_sets[label])]
            sums = [s + r for s, r in zip(sums, row)]
            writer.writerow([label, *row])
        writer.writerow(["SUM", *sums])

    manifest = {
        "seed": SEED,
        "n_docs": len(docs),
        "matched_ids": sorted(set().union(*union_sets.values())),
        "per_label_ids": {lb: sorted(union_sets[lb]) for lb in LABEL_ORDER},
        "negative_ids": sorted(
            record["id"] for record, plant in zip(docs, plant_meta) if plant.get("negative")
        ),
        "no_abstract_title_hit": next(
            record["id"]
            for record, plant in zip(docs, plant_meta)
            if plant.get("no_abstract") and plant.get("hits")
        ),
        "pairs_trading_decoy": next(
            record["id"]
            for record, plant in zip(docs, plant_meta)
            if plant.get("negative") and not plant.get("hits")
            and "pairs" in record.get("abstract", "")
        ),
        "bare_system_title": next(
            record["id"]
            for record, plant in zip(docs, plant_meta)
            if record.get("title", "").endswith("Investment System")
        ),
        "missing_year_ids": sorted(r["id"] for r in docs if "year" not in r),
        "missing_abstract_ids": sorted(r["id"] for r in docs if not r.get("abstract")),
        "body_ids": sorted(r["id"] for r in docs if r.get("body")),
    }
    manifest_path = out_dir / "minicorpus_manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"wrote {corpus_path} ({len(docs)} docs)")
    print(f"wrote {expected_path}")
    print(f"wrote {manifest_path} ({len(manifest['matched_ids'])} matching docs)")


if __name__ == "__main__":
    main()
