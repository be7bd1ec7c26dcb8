"""Literature mining for a large article corpus.

The pipeline stages, in the order a study runs them:

- ``corpus``: JSONL ingestion and validation
- ``filtering``: keyword-regex subsetting with frequency tables
- ``textstats``: stemming, n-grams, taxonomy trends, gazetteer counts
- ``embeddings``: document vectors (hashing fallback, remote service, EMB1 files)
- ``manifold``: neighborhood-preserving dimensionality reduction
- ``clustering``: density clustering with noise labels
- ``topics``: per-cluster term scoring, merging, trends, titling
- ``qa``: structured questions per document, a regex baseline, agreement tables
- ``cli``: the ``litmine`` command tying the stages together
"""

__version__ = "0.1.0"

from .corpus import CorpusStore, Document, load_corpus, sample, write_corpus
from .errors import (
    AnswerFormatError,
    ConvergenceError,
    CorpusError,
    EmbeddingError,
    LayoutError,
    LitmineError,
    PatternError,
    PromptTooLargeError,
    TransportError,
)
from .filtering import (
    FrequencyTable,
    compile_patterns,
    filter_corpus,
    match_document,
    packaged_patterns,
)
from .embeddings import (
    EmbeddingMatrix,
    export_embeddings,
    fallback_embed,
    import_embeddings,
    remote_embed,
)
from .manifold import trustworthiness, umap
from .clustering import hdbscan
from .topics import (
    TopicModel,
    build_topics,
    label_topic,
    match_query,
    merge_topics,
    topic_hierarchy,
    topic_trends,
)
from .qa import (
    QuestionSet,
    bin_frequency,
    compare_answers,
    group_loss,
    regex_baseline,
    run_protocol,
)
from .textstats import packaged_taxonomy, preprocess, stem, taxonomy_trends, yearly_share

__all__ = [
    "__version__",
    "AnswerFormatError",
    "ConvergenceError",
    "CorpusError",
    "CorpusStore",
    "Document",
    "EmbeddingError",
    "EmbeddingMatrix",
    "FrequencyTable",
    "LayoutError",
    "LitmineError",
    "PatternError",
    "PromptTooLargeError",
    "QuestionSet",
    "TopicModel",
    "TransportError",
    "bin_frequency",
    "build_topics",
    "compare_answers",
    "compile_patterns",
    "export_embeddings",
    "fallback_embed",
    "filter_corpus",
    "group_loss",
    "hdbscan",
    "import_embeddings",
    "label_topic",
    "load_corpus",
    "match_document",
    "match_query",
    "merge_topics",
    "packaged_patterns",
    "packaged_taxonomy",
    "preprocess",
    "regex_baseline",
    "remote_embed",
    "run_protocol",
    "sample",
    "stem",
    "taxonomy_trends",
    "topic_hierarchy",
    "topic_trends",
    "trustworthiness",
    "umap",
    "write_corpus",
    "yearly_share",
]
