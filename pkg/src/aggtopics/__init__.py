"""aggtopics: quantify how document-aggregation choices change topic models."""

from .aggregate import DocumentDefinition, LengthStats, aggregate_units, length_stats, permute_labels
from .cluster import ClusterModel, EmbeddingMatrix, ctfidf, fit_cluster, kmeans, pool_embeddings, theta_from_assignments
from .corpus import Corpus, Document, RawUnit, Vocabulary, build_corpus, remove_stopwords, tokenize
from .labeler import GroupDictionary, TopicLabelReport, build_dictionary, label_topics
from .lda import LdaConfig, TopicModel, fit_lda, mean_theta
from .metrics import TopicSummary, frex, semantic_coherence, summarize, sweep, topic_exclusivity
from .permute import PermutationResult, run_permutation_test
from .seeds import derive_seed
from .validity import LogitFit, ValidityDesign, design_from_model, fit_multinomial_logit, split_accuracy

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Document", "RawUnit", "Vocabulary",
    "tokenize", "remove_stopwords", "build_corpus",
    "DocumentDefinition", "LengthStats", "aggregate_units", "permute_labels", "length_stats",
    "LdaConfig", "TopicModel", "fit_lda", "mean_theta",
    "EmbeddingMatrix", "ClusterModel", "pool_embeddings", "kmeans", "ctfidf",
    "theta_from_assignments", "fit_cluster",
    "TopicSummary", "frex", "semantic_coherence", "topic_exclusivity", "summarize", "sweep",
    "GroupDictionary", "TopicLabelReport", "build_dictionary", "label_topics",
    "ValidityDesign", "LogitFit", "design_from_model", "fit_multinomial_logit", "split_accuracy",
    "PermutationResult", "run_permutation_test",
    "derive_seed",
]
