"""Linear bag-of-ngrams title classifier (fastText-style, full softmax).

A title becomes a list of feature rows: known unigrams by vocabulary id,
and adjacent-token bigrams hashed into ``buckets`` extra rows. The hidden
vector is the mean of those rows; scores are ``output_weights @ hidden``
followed by a softmax over labels.
"""
from __future__ import annotations

import json
import re
import struct
from collections import Counter
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import InsufficientCorpus
from ..text import normalize_text

FORMAT_VERSION = 1
MAGIC = b"OAMCLF\x00\x01"

FNV32_OFFSET = 0x811C9DC5
FNV32_PRIME = 0x01000193

_SPLIT = re.compile(r"[\W_]+")


def tokenize(title: str) -> list[str]:
    """Normalize then split on every non-alphanumeric run."""
    return [t for t in _SPLIT.split(normalize_text(title)) if t]


@lru_cache(maxsize=1 << 16)
def fnv1a_32(text: str) -> int:
    """32-bit FNV-1a over the UTF-8 bytes of ``text``."""
    h = FNV32_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV32_PRIME) & 0xFFFFFFFF
    return h


def bigram_bucket(tok1: str, tok2: str, buckets: int) -> int:
    return fnv1a_32(f"{tok1} {tok2}") % buckets


@dataclass(frozen=True)
class TrainingExample:
    title: str
    labels: tuple

    def __post_init__(self):
        if not self.labels:
            raise ValueError("training example without labels")
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True)
class TagPrediction:
    label: str
    probability: float


@dataclass
class Hyperparams:
    dim: int = 100
    buckets: int = 2_000_000
    learning_rate: float = 0.1
    epochs: int = 5
    min_token_count: int = 1
    seed: int = 0
    use_bigrams: bool = True


@dataclass
class ClassifierModel:
    hyper: Hyperparams
    vocab: dict
    labels: list
    input_embeddings: np.ndarray
    output_weights: np.ndarray
    loss_history: list = field(default_factory=list)

    @property
    def n_vocab(self) -> int:
        return len(self.vocab)

    def featurize(self, tokens: Sequence[str]) -> list[int]:
        ids = [self.vocab[t] for t in tokens if t in self.vocab]
        if self.hyper.use_bigrams:
            base, b = self.n_vocab, self.hyper.buckets
            ids.extend(base + bigram_bucket(t1, t2, b) for t1, t2 in zip(tokens, tokens[1:]))
        return ids

    def hidden(self, ids: Sequence[int]) -> np.ndarray:
        if len(ids) == 0:
            return np.zeros(self.hyper.dim)
        return self.input_embeddings[ids].mean(axis=0)

    def probabilities(self, title: str) -> np.ndarray:
        return softmax(self.output_weights @ self.hidden(self.featurize(tokenize(title))))


def featurize(tokens: Sequence[str], model: ClassifierModel) -> list[int]:
    return model.featurize(tokens)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def build_vocab(corpus: Iterable[TrainingExample], min_count: int = 1) -> dict[str, int]:
    counts = Counter(tok for ex in corpus for tok in tokenize(ex.title))
    kept = sorted((tok for tok, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return {tok: i for i, tok in enumerate(kept)}


def instance_loss_and_grads(model: ClassifierModel, ids: Sequence[int], label: int):
    """Cross-entropy of one (features, label) instance and its analytic gradients.

    Returns ``(loss, grad_output_weights, grad_hidden)``; each feature row of
    the input embeddings receives ``grad_hidden / len(ids)``.
    """
    h = model.hidden(ids)
    p = softmax(model.output_weights @ h)
    loss = -float(np.log(max(p[label], 1e-300)))
    g = p.copy()
    g[label] -= 1.0
    return loss, np.outer(g, h), model.output_weights.T @ g


def corpus_loss(model: ClassifierModel, instances) -> float:
    total = 0.0
    for ids, label in instances:
        p = softmax(model.output_weights @ model.hidden(ids))
        total -= float(np.log(max(p[label], 1e-300)))
    return total / len(instances)


def _instances(model: ClassifierModel, corpus: Sequence[TrainingExample]) -> list:
    index = {lab: i for i, lab in enumerate(model.labels)}
    out = []
    for ex in corpus:
        ids = model.featurize(tokenize(ex.title))
        if not ids:
            continue
        arr = np.asarray(ids, dtype=np.int64)
        # one softmax instance per gold label
        out.extend((arr, index[lab]) for lab in ex.labels)
    return out


def train(corpus: Sequence[TrainingExample], hyper: Hyperparams | None = None) -> ClassifierModel:
    """SGD on softmax cross-entropy with a linearly decaying learning rate.

    Embeddings start uniform in ``[-1/dim, 1/dim]``, output weights at zero.
    Everything random (initialization, per-epoch shuffles) comes from
    ``hyper.seed``, so equal inputs give byte-identical models.
    """
    hyper = hyper or Hyperparams()
    corpus = list(corpus)
    if not corpus:
        raise InsufficientCorpus("empty training corpus")
    labels = sorted({lab for ex in corpus for lab in ex.labels})
    if len(labels) < 2:
        raise InsufficientCorpus(f"need at least 2 distinct labels, got {labels}")

    rng = np.random.default_rng(hyper.seed)
    vocab = build_vocab(corpus, hyper.min_token_count)
    rows = len(vocab) + (hyper.buckets if hyper.use_bigrams else 0)
    bound = 1.0 / hyper.dim
    model = ClassifierModel(
        hyper=hyper,
        vocab=vocab,
        labels=labels,
        input_embeddings=rng.uniform(-bound, bound, size=(rows, hyper.dim)),
        output_weights=np.zeros((len(labels), hyper.dim)),
    )
    instances = _instances(model, corpus)
    if not instances:
        raise InsufficientCorpus("no title produced any feature")

    E, W = model.input_embeddings, model.output_weights
    total_steps = hyper.epochs * len(instances)
    step = 0
    for _ in range(hyper.epochs):
        for i in rng.permutation(len(instances)):
            ids, label = instances[i]
            lr = hyper.learning_rate * (1.0 - step / total_steps)
            step += 1
            h = E[ids].mean(axis=0)
            z = W @ h
            p = np.exp(z - z.max())
            p /= p.sum()
            p[label] -= 1.0
            grad_h = W.T @ p
            W -= lr * np.outer(p, h)
            np.add.at(E, ids, (-lr / len(ids)) * grad_h)
        model.loss_history.append(corpus_loss(model, instances))
    return model


def predict_topk(model: ClassifierModel, title: str, k: int) -> list[TagPrediction]:
    """Top ``min(k, |labels|)`` labels by probability; ties go to the earlier label."""
    p = model.probabilities(title)
    order = np.lexsort((np.arange(len(p)), -p))[: max(0, min(k, len(p)))]
    return [TagPrediction(model.labels[i], float(p[i])) for i in order]


def save_model(model: ClassifierModel, path: str | Path) -> None:
    """Binary container: magic, u64 header length, JSON header, then float64 matrices row-major."""
    header = {
        "format_version": FORMAT_VERSION,
        "d": model.hyper.dim,
        "B": model.hyper.buckets,
        "seed": model.hyper.seed,
        "hyperparams": asdict(model.hyper),
        "label_list": list(model.labels),
        "vocab": sorted(model.vocab, key=model.vocab.__getitem__),
        "shapes": [list(model.input_embeddings.shape), list(model.output_weights.shape)],
        "loss_history": list(model.loss_history),
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.input_embeddings, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.output_weights, dtype="<f8").tobytes())


def load_model(path: str | Path) -> ClassifierModel:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path} is not a classifier model file")
    offset = len(MAGIC)
    (n,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    header = json.loads(data[offset: offset + n].decode("utf-8"))
    offset += n
    if header["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {header['format_version']}")
    (er, ec), (wr, wc) = header["shapes"]
    E = np.frombuffer(data, dtype="<f8", count=er * ec, offset=offset).reshape(er, ec).astype(np.float64)
    offset += er * ec * 8
    W = np.frombuffer(data, dtype="<f8", count=wr * wc, offset=offset).reshape(wr, wc).astype(np.float64)
    return ClassifierModel(
        hyper=Hyperparams(**header["hyperparams"]),
        vocab={tok: i for i, tok in enumerate(header["vocab"])},
        labels=list(header["label_list"]),
        input_embeddings=E,
        output_weights=W,
        loss_history=list(header["loss_history"]),
    )
