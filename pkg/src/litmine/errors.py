"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class LitmineError(Exception):
    """Base class for all pipeline errors."""


class CorpusError(LitmineError):
    """Corpus file unreadable, malformed, or internally inconsistent."""


class PatternError(LitmineError):
    """A keyword or taxonomy regex failed to compile or violated set rules."""


class EmbeddingError(LitmineError):
    """Embedding import, generation, or remote-fetch failure."""


class ConvergenceError(LitmineError):
    """An iterative numeric routine failed to reach its tolerance."""


class LayoutError(LitmineError):
    """Dimensionality-reduction failure (non-finite update, bad shapes)."""


class TransportError(LitmineError):
    """A remote call failed after exhausting its retry budget."""


class PromptTooLargeError(LitmineError):
    """Document text exceeds the configured request size budget."""


class AnswerFormatError(LitmineError):
    """An LLM response carried no recognizable answer block."""
