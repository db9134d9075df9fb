"""LineaRE knowledge-graph embeddings: training, filtered evaluation and line geometry."""

__version__ = "0.1.0"
