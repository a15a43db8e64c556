from .disciplines import (
    DisciplineAssignment,
    MacroDiscipline,
    assign_disciplines,
    journal_key,
    map_tag_to_macro,
    read_mapping,
)
from .evaluate import EvaluationReport, evaluate, read_corpus, score_predictions, train_test_split, write_corpus
from .model import (
    ClassifierModel,
    Hyperparams,
    TagPrediction,
    TrainingExample,
    featurize,
    fnv1a_32,
    load_model,
    predict_topk,
    save_model,
    tokenize,
    train,
)

__all__ = [
    "ClassifierModel", "DisciplineAssignment", "EvaluationReport", "Hyperparams", "MacroDiscipline",
    "TagPrediction", "TrainingExample", "assign_disciplines", "evaluate", "featurize", "fnv1a_32",
    "journal_key", "load_model", "map_tag_to_macro", "predict_topk", "read_corpus", "read_mapping",
    "save_model", "score_predictions", "tokenize", "train", "train_test_split", "write_corpus",
]
