"""Sentence-level BIO sequence labeling for argument identification.

Two model families over per-sentence embeddings: a bidirectional LSTM tagger
(context from preceding and succeeding sentences) and a per-sentence
feedforward baseline, both trained with a sigmoid focal loss and Adagrad,
one gradient step per document, keeping the parameters that minimize the
validation loss. All forward/backward passes are handwritten and the
gradients are exact; training is single-threaded and deterministic per seed.

Checkpoint format: magic ``SEQ1``, model kind byte, shape header, then the
parameter tensors as little-endian float64 in a fixed order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import BioTag, Document, Sentence
from .errors import DataError, NumericError
from .vectorize import EmbeddingSet

N_TAGS = 3


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def focal_loss(
    logits: np.ndarray,
    targets: np.ndarray,
    gamma: float = 2.0,
    alpha_f: float = 0.25,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class sigmoid focal loss, summed over classes.

    For each class c with probability p_c = sigmoid(z_c):
    p_t = p_c if target else 1 - p_c, alpha_t = alpha_f if target else
    1 - alpha_f, and loss_c = alpha_t * (1 - p_t)^gamma * (-ln p_t).

    Returns (loss per position, exact gradient w.r.t. the logits). Accepts
    a single length-3 vector or a (T, 3) batch.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise DataError(f"logits shape {logits.shape} != targets {targets.shape}")
    sign = 2.0 * targets - 1.0
    u = logits * sign  # p_t = sigmoid(u), stable in both tails
    p_t = _sigmoid(u)
    one_minus_pt = _sigmoid(-u)
    neg_log_pt = _softplus(-u)
    alpha_t = alpha_f * targets + (1.0 - alpha_f) * (1.0 - targets)
    focal = one_minus_pt**gamma
    loss = (alpha_t * focal * neg_log_pt).sum(axis=-1)
    # d(loss)/dz = s * a_t * (1-p_t)^g * (g * p_t * ln(p_t) - (1-p_t))
    grad = sign * alpha_t * focal * (-gamma * p_t * neg_log_pt - one_minus_pt)
    return loss, grad


@dataclass
class FnnParams:
    w1: np.ndarray  # (hidden, d)
    b1: np.ndarray
    w2: np.ndarray  # (3, hidden)
    b2: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def copy(self) -> "FnnParams":
        return FnnParams(**{k: v.copy() for k, v in self.tensors().items()})


@dataclass
class BiLstmParams:
    # Gate rows are stacked [input, forget, output, candidate], h rows each.
    w_fwd: np.ndarray  # (4h, d)
    u_fwd: np.ndarray  # (4h, h)
    b_fwd: np.ndarray  # (4h,)
    w_bwd: np.ndarray
    u_bwd: np.ndarray
    b_bwd: np.ndarray
    w_out: np.ndarray  # (3, 2h)
    b_out: np.ndarray  # (3,)

    @property
    def input_dim(self) -> int:
        return self.w_fwd.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.u_fwd.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "w_fwd": self.w_fwd,
            "u_fwd": self.u_fwd,
            "b_fwd": self.b_fwd,
            "w_bwd": self.w_bwd,
            "u_bwd": self.u_bwd,
            "b_bwd": self.b_bwd,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }

    def copy(self) -> "BiLstmParams":
        return BiLstmParams(**{k: v.copy() for k, v in self.tensors().items()})


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_fnn(input_dim: int, hidden: int, rng: np.random.Generator) -> FnnParams:
    return FnnParams(
        w1=_uniform_init(rng, (hidden, input_dim), input_dim),
        b1=np.zeros(hidden),
        w2=_uniform_init(rng, (N_TAGS, hidden), hidden),
        b2=np.zeros(N_TAGS),
    )


def init_bilstm(input_dim: int, hidden: int, rng: np.random.Generator) -> BiLstmParams:
    def cell() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        w = _uniform_init(rng, (4 * hidden, input_dim), input_dim)
        u = _uniform_init(rng, (4 * hidden, hidden), hidden)
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0  # forget-gate bias starts open
        return w, u, b

    w_fwd, u_fwd, b_fwd = cell()
    w_bwd, u_bwd, b_bwd = cell()
    return BiLstmParams(
        w_fwd=w_fwd,
        u_fwd=u_fwd,
        b_fwd=b_fwd,
        w_bwd=w_bwd,
        u_bwd=u_bwd,
        b_bwd=b_bwd,
        w_out=_uniform_init(rng, (N_TAGS, 2 * hidden), 2 * hidden),
        b_out=np.zeros(N_TAGS),
    )


def _lstm_direction(
    X: np.ndarray, w: np.ndarray, u: np.ndarray, b: np.ndarray, reverse: bool
) -> tuple[np.ndarray, dict]:
    """Run one LSTM direction from zero initial states.

    Returns hidden states aligned to sequence positions plus the cache
    needed for backpropagation through time.
    """
    T = X.shape[0]
    h_dim = u.shape[1]
    order = range(T - 1, -1, -1) if reverse else range(T)
    pre_x = X @ w.T  # (T, 4h)
    H = np.zeros((T, h_dim))
    cache = {
        "i": np.zeros((T, h_dim)),
        "f": np.zeros((T, h_dim)),
        "o": np.zeros((T, h_dim)),
        "g": np.zeros((T, h_dim)),
        "tanh_c": np.zeros((T, h_dim)),
        "c_prev": np.zeros((T, h_dim)),
        "h_prev": np.zeros((T, h_dim)),
        "order": list(order),
    }
    h_prev = np.zeros(h_dim)
    c_prev = np.zeros(h_dim)
    for t in cache["order"]:
        z = pre_x[t] + u @ h_prev + b
        i = _sigmoid(z[:h_dim])
        f = _sigmoid(z[h_dim : 2 * h_dim])
        o = _sigmoid(z[2 * h_dim : 3 * h_dim])
        g = np.tanh(z[3 * h_dim :])
        c = f * c_prev + i * g
        tanh_c = np.tanh(c)
        cache["i"][t] = i
        cache["f"][t] = f
        cache["o"][t] = o
        cache["g"][t] = g
        cache["tanh_c"][t] = tanh_c
        cache["c_prev"][t] = c_prev
        cache["h_prev"][t] = h_prev
        h_prev = o * tanh_c
        c_prev = c
        H[t] = h_prev
    return H, cache


def bilstm_forward(
    params: BiLstmParams, X: np.ndarray
) -> tuple[np.ndarray, dict]:
    """Per-position logits for a (T, d) sequence of sentence vectors."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("input must be a non-empty (T, d) matrix")
    if X.shape[1] != params.input_dim:
        raise DataError(
            f"input dim {X.shape[1]} does not match model dim {params.input_dim}"
        )
    h_f, cache_f = _lstm_direction(X, params.w_fwd, params.u_fwd, params.b_fwd, reverse=False)
    h_b, cache_b = _lstm_direction(X, params.w_bwd, params.u_bwd, params.b_bwd, reverse=True)
    H = np.concatenate([h_f, h_b], axis=1)  # (T, 2h)
    logits = H @ params.w_out.T + params.b_out
    return logits, {"fwd": cache_f, "bwd": cache_b, "H": H, "X": X}


def _lstm_direction_backward(
    d_h: np.ndarray,
    X: np.ndarray,
    u: np.ndarray,
    cache: dict,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """BPTT for one direction; d_h holds dLoss/d h_t per position."""
    T, h_dim = d_h.shape
    dZ = np.zeros((T, 4 * h_dim))
    dh_carry = np.zeros(h_dim)
    dc_carry = np.zeros(h_dim)
    for t in reversed(cache["order"]):
        i, f, o, g = cache["i"][t], cache["f"][t], cache["o"][t], cache["g"][t]
        tanh_c = cache["tanh_c"][t]
        dh = d_h[t] + dh_carry
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c**2) + dc_carry
        di = dc * g
        df = dc * cache["c_prev"][t]
        dg = dc * i
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g**2),
            ]
        )
        dZ[t] = dz
        dh_carry = u.T @ dz
        dc_carry = dc * f
    dW = dZ.T @ X
    dU = dZ.T @ cache["h_prev"]
    db = dZ.sum(axis=0)
    return dW, dU, db


def bilstm_backward(
    params: BiLstmParams, cache: dict, d_logits: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact gradients of a summed per-position loss w.r.t. all parameters."""
    H, X = cache["H"], cache["X"]
    h_dim = params.hidden_dim
    d_w_out = d_logits.T @ H
    d_b_out = d_logits.sum(axis=0)
    dH = d_logits @ params.w_out  # (T, 2h)
    dw_f, du_f, db_f = _lstm_direction_backward(
        dH[:, :h_dim], X, params.u_fwd, cache["fwd"]
    )
    dw_b, du_b, db_b = _lstm_direction_backward(
        dH[:, h_dim:], X, params.u_bwd, cache["bwd"]
    )
    return {
        "w_fwd": dw_f,
        "u_fwd": du_f,
        "b_fwd": db_f,
        "w_bwd": dw_b,
        "u_bwd": du_b,
        "b_bwd": db_b,
        "w_out": d_w_out,
        "b_out": d_b_out,
    }


def fnn_forward(params: FnnParams, X: np.ndarray) -> tuple[np.ndarray, dict]:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != params.input_dim:
        raise DataError(
            f"input dim {X.shape[1]} does not match model dim {params.input_dim}"
        )
    pre = X @ params.w1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ params.w2.T + params.b2
    return logits, {"X": X, "pre": pre, "hidden": hidden}


def fnn_backward(
    params: FnnParams, cache: dict, d_logits: np.ndarray
) -> dict[str, np.ndarray]:
    d_w2 = d_logits.T @ cache["hidden"]
    d_b2 = d_logits.sum(axis=0)
    d_hidden = d_logits @ params.w2
    d_pre = d_hidden * (cache["pre"] > 0.0)
    return {
        "w1": d_pre.T @ cache["X"],
        "b1": d_pre.sum(axis=0),
        "w2": d_w2,
        "b2": d_b2,
    }


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 600
    lr: float = 0.01
    eps: float = 1e-8
    gamma: float = 2.0
    alpha_f: float = 0.25
    hidden: int = 200
    seed: int = 0
    clip_norm: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise DataError(f"lr must be > 0, got {self.lr}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    params: BiLstmParams | FnnParams
    model_kind: str
    trace: tuple[EpochStats, ...]
    best_epoch: int
    best_val_loss: float


def _doc_matrix(doc: Document, embeddings: EmbeddingSet) -> np.ndarray:
    return embeddings.to_matrix(doc.sentence_ids())


def _doc_targets(doc: Document) -> np.ndarray:
    targets = np.zeros((len(doc.sentences), N_TAGS))
    for t, tag in enumerate(doc.tags()):
        targets[t, int(tag)] = 1.0
    return targets


def _forward_backward(
    model_kind: str,
    params: BiLstmParams | FnnParams,
    X: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
) -> tuple[float, dict[str, np.ndarray]]:
    if model_kind == "bilstm":
        logits, cache = bilstm_forward(params, X)
    else:
        logits, cache = fnn_forward(params, X)
    losses, d_logits = focal_loss(logits, targets, cfg.gamma, cfg.alpha_f)
    loss = float(losses.sum())
    if model_kind == "bilstm":
        grads = bilstm_backward(params, cache, d_logits)
    else:
        grads = fnn_backward(params, cache, d_logits)
    return loss, grads


def _dataset_loss(
    model_kind: str,
    params: BiLstmParams | FnnParams,
    docs: Sequence[Document],
    embeddings: EmbeddingSet,
    cfg: TrainConfig,
) -> float:
    """Mean per-sentence loss over a document set."""
    total = 0.0
    count = 0
    for doc in docs:
        X = _doc_matrix(doc, embeddings)
        if model_kind == "bilstm":
            logits, _ = bilstm_forward(params, X)
        else:
            logits, _ = fnn_forward(params, X)
        losses, _ = focal_loss(logits, _doc_targets(doc), cfg.gamma, cfg.alpha_f)
        total += float(losses.sum())
        count += len(doc.sentences)
    return total / count


def train(
    model_kind: str,
    train_docs: Sequence[Document],
    val_docs: Sequence[Document],
    embeddings: EmbeddingSet,
    cfg: TrainConfig,
) -> TrainResult:
    """Adagrad training with per-epoch shuffling and best-on-validation
    selection.

    One gradient step per document (the document's sentence sequence is the
    batch). The Adagrad accumulator is updated before each step, so the very
    first step scales by lr * g / (|g| + eps).
    """
    if model_kind not in ("bilstm", "fnn"):
        raise DataError(f"unknown model kind {model_kind!r}")
    if not train_docs:
        raise DataError("training set is empty")
    if not val_docs:
        raise DataError("validation set is empty")
    for doc in list(train_docs) + list(val_docs):
        if not doc.is_tagged:
            raise DataError(f"document {doc.doc_id!r} carries no BIO tags")
        for sid in doc.sentence_ids():
            if sid not in embeddings:
                raise DataError(f"missing embedding id {sid!r}")
    rng = np.random.default_rng(cfg.seed)
    if model_kind == "bilstm":
        params: BiLstmParams | FnnParams = init_bilstm(embeddings.dim, cfg.hidden, rng)
    else:
        params = init_fnn(embeddings.dim, cfg.hidden, rng)
    accumulators = {k: np.zeros_like(v) for k, v in params.tensors().items()}

    cached = [
        (doc.doc_id, _doc_matrix(doc, embeddings), _doc_targets(doc))
        for doc in train_docs
    ]
    n_train_sentences = sum(len(d.sentences) for d in train_docs)
    best_params = params.copy()
    best_val = np.inf
    best_epoch = 0
    trace: list[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        epoch_loss = 0.0
        for idx in rng.permutation(len(cached)):
            doc_id, X, targets = cached[idx]
            loss, grads = _forward_backward(model_kind, params, X, targets, cfg)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, document {doc_id!r}"
                )
            epoch_loss += loss
            if cfg.clip_norm is not None:
                total = np.sqrt(sum(float((g**2).sum()) for g in grads.values()))
                if total > cfg.clip_norm:
                    scale = cfg.clip_norm / total
                    grads = {k: g * scale for k, g in grads.items()}
            tensors = params.tensors()
            for key, grad in grads.items():
                acc = accumulators[key]
                acc += grad**2
                tensors[key] -= cfg.lr * grad / (np.sqrt(acc) + cfg.eps)
        val_loss = _dataset_loss(model_kind, params, val_docs, embeddings, cfg)
        trace.append(
            EpochStats(
                epoch=epoch,
                train_loss=epoch_loss / n_train_sentences,
                val_loss=val_loss,
            )
        )
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = params.copy()
    return TrainResult(
        params=best_params,
        model_kind=model_kind,
        trace=tuple(trace),
        best_epoch=best_epoch,
        best_val_loss=float(best_val),
    )


# ---------------------------------------------------------------------------
# Prediction and segmentation


def repair_tags(tags: Sequence[BioTag]) -> list[BioTag]:
    """Turn an I at document start or directly after O into a B."""
    out: list[BioTag] = []
    prev: BioTag | None = None
    for tag in tags:
        if tag == BioTag.I and (prev is None or prev == BioTag.O):
            tag = BioTag.B
        out.append(tag)
        prev = tag
    return out


def predict_tags(
    params: BiLstmParams | FnnParams,
    docs: Sequence[Document],
    embeddings: EmbeddingSet,
    repair: bool = False,
) -> list[list[BioTag]]:
    """Per-sentence argmax of the three sigmoid scores; ties prefer B < I < O.

    Raw tags are what the tagging evaluation scores; the repair pass feeds
    segmentation only. Each document is independent of the batch around it.
    """
    forward: Callable = bilstm_forward if isinstance(params, BiLstmParams) else fnn_forward
    out: list[list[BioTag]] = []
    for doc in docs:
        X = embeddings.to_matrix(doc.sentence_ids())
        logits, _ = forward(params, X)
        # sigmoid is monotone, so the logit argmax is the score argmax.
        tags = [BioTag(int(row.argmax())) for row in logits]
        out.append(repair_tags(tags) if repair else tags)
    return out


@dataclass(frozen=True)
class ArgumentSpan:
    start: int  # first sentence index
    stop: int  # one past the last sentence index
    sentences: tuple[Sentence, ...]


def segment_arguments(
    tags: Sequence[BioTag], sentences: Sequence[Sentence]
) -> list[ArgumentSpan]:
    """Maximal B,I,...,I runs as argument spans; O sentences join nothing.

    Expects a repaired sequence; a stray leading I is treated like a B.
    """
    if len(tags) != len(sentences):
        raise DataError(f"{len(tags)} tags for {len(sentences)} sentences")
    spans: list[ArgumentSpan] = []
    start: int | None = None
    for idx, tag in enumerate(tags):
        if tag == BioTag.O:
            if start is not None:
                spans.append(
                    ArgumentSpan(start, idx, tuple(sentences[start:idx]))
                )
                start = None
        elif tag == BioTag.B or start is None:
            if start is not None:
                spans.append(
                    ArgumentSpan(start, idx, tuple(sentences[start:idx]))
                )
            start = idx
    if start is not None:
        spans.append(ArgumentSpan(start, len(tags), tuple(sentences[start:])))
    return spans


def majority_baseline(train_docs: Sequence[Document]) -> BioTag:
    """The most frequent training tag; ties prefer B < I < O."""
    if not train_docs:
        raise DataError("training set is empty")
    counts = {tag: 0 for tag in BioTag}
    for doc in train_docs:
        for tag in doc.tags():
            counts[tag] += 1
    return max(BioTag, key=lambda t: (counts[t], -int(t)))


# ---------------------------------------------------------------------------
# Checkpoints

_SEQ_MAGIC = b"SEQ1"
_KIND_BYTES = {"bilstm": 0, "fnn": 1}
_BILSTM_ORDER = ("w_fwd", "u_fwd", "b_fwd", "w_bwd", "u_bwd", "b_bwd", "w_out", "b_out")
_FNN_ORDER = ("w1", "b1", "w2", "b2")


def save_checkpoint(
    params: BiLstmParams | FnnParams, path: str | Path
) -> None:
    is_bilstm = isinstance(params, BiLstmParams)
    kind = "bilstm" if is_bilstm else "fnn"
    order = _BILSTM_ORDER if is_bilstm else _FNN_ORDER
    tensors = params.tensors()
    if is_bilstm:
        d, h = params.input_dim, params.hidden_dim
    else:
        d, h = params.input_dim, params.w1.shape[0]
    with Path(path).open("wb") as fh:
        fh.write(_SEQ_MAGIC)
        fh.write(struct.pack("<BII", _KIND_BYTES[kind], d, h))
        for key in order:
            fh.write(np.ascontiguousarray(tensors[key], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> BiLstmParams | FnnParams:
    raw = Path(path).read_bytes()
    if raw[:4] != _SEQ_MAGIC:
        raise DataError(f"{path}: not a tagger checkpoint")
    kind_byte, d, h = struct.unpack("<BII", raw[4:13])
    data = np.frombuffer(raw[13:], dtype="<f8")
    pos = 0

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal pos
        size = int(np.prod(shape))
        out = data[pos : pos + size].reshape(shape).copy()
        pos += size
        return out

    if kind_byte == _KIND_BYTES["bilstm"]:
        return BiLstmParams(
            w_fwd=take((4 * h, d)),
            u_fwd=take((4 * h, h)),
            b_fwd=take((4 * h,)),
            w_bwd=take((4 * h, d)),
            u_bwd=take((4 * h, h)),
            b_bwd=take((4 * h,)),
            w_out=take((N_TAGS, 2 * h)),
            b_out=take((N_TAGS,)),
        )
    if kind_byte == _KIND_BYTES["fnn"]:
        return FnnParams(
            w1=take((h, d)), b1=take((h,)), w2=take((N_TAGS, h)), b2=take((N_TAGS,))
        )
    raise DataError(f"{path}: unknown model kind byte {kind_byte}")


def save_loss_trace(trace: Sequence[EpochStats], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for row in trace:
            fh.write(f"{row.epoch},{row.train_loss!r},{row.val_loss!r}\n")
