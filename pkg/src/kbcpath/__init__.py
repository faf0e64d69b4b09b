"""Build and rank 1-hop explanation paths between entity pairs with a KBC model."""

__version__ = "0.1.0"

from .graph import KnowledgeGraph, load_any_graph, load_triples  # noqa: E402
from .model import EmbeddingModel, Hyperparams, load_model, save_model, train  # noqa: E402
from .scoring import Scorer  # noqa: E402

__all__ = ["EmbeddingModel", "Hyperparams", "KnowledgeGraph", "Scorer", "load_any_graph",
           "load_model", "load_triples", "save_model", "train", "__version__"]
