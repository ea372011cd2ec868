"""The learnable label recommender and its shared encoder machinery.

The network is small enough to train from scratch on a desktop: a token
embedding table feeds a query encoder (mean-pooled embeddings through a
two-layer perceptron, or optionally one self-attention block first), and a
decoder applies multi-head scaled-dot-product attention from the last
recommended label over the query vector plus the label history, ending in a
projection to one logit per label.

All math runs in float64; parameters are serialized as little-endian float32
(see checkpoint.py), and everything is deterministic given the init seed.
Forward/backward passes are hand-written numpy so gradients can be verified
against finite differences.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..inventory import Inventory, LabelId, tokenize
from ..reward import Trajectory

logger = logging.getLogger(__name__)

ENC_MLP = "mlp"
ENC_ATTN = "attn"


class PolicyError(Exception):
    pass


class NoActionError(PolicyError):
    """Every label is masked; the policy has nothing to recommend."""


class TrainingError(PolicyError):
    """Training produced a non-finite loss or gradient."""


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64
    heads: int = 2
    encoder: str = ENC_MLP
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim % self.heads != 0:
            raise ValueError(f"dim {self.dim} must be divisible by heads {self.heads}")
        if self.encoder not in (ENC_MLP, ENC_ATTN):
            raise ValueError(f"unknown encoder kind {self.encoder!r}")


def _init_encoder_params(rng: np.random.Generator, cfg: ModelConfig, n_tokens: int) -> dict:
    d = cfg.dim
    scale = 1.0 / math.sqrt(d)
    params = {
        "tok_emb": rng.normal(0.0, 0.1, size=(n_tokens, d)),
        "enc_w1": rng.normal(0.0, scale, size=(d, d)),
        "enc_b1": np.zeros(d),
        "enc_w2": rng.normal(0.0, scale, size=(d, d)),
        "enc_b2": np.zeros(d),
    }
    if cfg.encoder == ENC_ATTN:
        for name in ("enc_att_wq", "enc_att_wk", "enc_att_wv", "enc_att_wo"):
            params[name] = rng.normal(0.0, scale, size=(d, d))
    return params


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _log_softmax(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shifted = x - x.max()
    e = np.exp(shifted)
    z = e / e.sum()
    return z, shifted - math.log(e.sum())


def _encode_query(params: dict, cfg: ModelConfig, token_ids: list[int]):
    """Query vector plus the cache needed for the backward pass."""
    d = cfg.dim
    cache: dict = {"token_ids": token_ids}
    if token_ids:
        X = params["tok_emb"][token_ids]
        if cfg.encoder == ENC_ATTN:
            nh, dh = cfg.heads, d // cfg.heads
            Q = X @ params["enc_att_wq"]
            K = X @ params["enc_att_wk"]
            V = X @ params["enc_att_wv"]
            heads = []
            att = []
            for i in range(nh):
                sl = slice(i * dh, (i + 1) * dh)
                S = (Q[:, sl] @ K[:, sl].T) / math.sqrt(dh)
                A = _softmax(S, axis=1)
                heads.append(A @ V[:, sl])
                att.append(A)
            CC = np.concatenate(heads, axis=1)
            X2 = CC @ params["enc_att_wo"] + X
            cache.update(X=X, Q=Q, K=K, V=V, att=att, CC=CC)
            m = X2.mean(axis=0)
        else:
            cache["X"] = X
            m = X.mean(axis=0)
    else:
        m = np.zeros(d)
    h_pre = m @ params["enc_w1"] + params["enc_b1"]
    h = np.tanh(h_pre)
    q_vec = h @ params["enc_w2"] + params["enc_b2"]
    cache.update(m=m, h=h)
    return q_vec, cache


def _encode_query_backward(params: dict, cfg: ModelConfig, cache: dict, d_qvec: np.ndarray, grads: dict) -> None:
    d = cfg.dim
    grads["enc_w2"] += np.outer(cache["h"], d_qvec)
    grads["enc_b2"] += d_qvec
    d_h = params["enc_w2"] @ d_qvec
    d_hpre = (1.0 - cache["h"] ** 2) * d_h
    grads["enc_w1"] += np.outer(cache["m"], d_hpre)
    grads["enc_b1"] += d_hpre
    d_m = params["enc_w1"] @ d_hpre

    token_ids = cache["token_ids"]
    if not token_ids:
        return
    n = len(token_ids)
    if cfg.encoder == ENC_ATTN:
        nh, dh = cfg.heads, d // cfg.heads
        X = cache["X"]
        d_X2 = np.tile(d_m / n, (n, 1))
        grads["enc_att_wo"] += cache["CC"].T @ d_X2
        d_CC = d_X2 @ params["enc_att_wo"].T
        d_X = d_X2.copy()  # residual branch
        d_Q = np.zeros_like(X)
        d_K = np.zeros_like(X)
        d_V = np.zeros_like(X)
        for i in range(nh):
            sl = slice(i * dh, (i + 1) * dh)
            A = cache["att"][i]
            d_head = d_CC[:, sl]
            d_A = d_head @ cache["V"][:, sl].T
            d_V[:, sl] = A.T @ d_head
            d_S = A * (d_A - (A * d_A).sum(axis=1, keepdims=True))
            d_Q[:, sl] = d_S @ cache["K"][:, sl] / math.sqrt(dh)
            d_K[:, sl] = d_S.T @ cache["Q"][:, sl] / math.sqrt(dh)
        grads["enc_att_wq"] += X.T @ d_Q
        grads["enc_att_wk"] += X.T @ d_K
        grads["enc_att_wv"] += X.T @ d_V
        d_X += d_Q @ params["enc_att_wq"].T
        d_X += d_K @ params["enc_att_wk"].T
        d_X += d_V @ params["enc_att_wv"].T
        np.add.at(grads["tok_emb"], token_ids, d_X)
    else:
        np.add.at(grads["tok_emb"], token_ids, np.tile(d_m / n, (n, 1)))


class PolicyModel:
    """Sequence recommender: query encoder + label-history attention decoder."""

    kind = "policy"

    def __init__(
        self,
        cfg: ModelConfig,
        token_vocab: dict[str, int],
        n_labels: int,
        inventory_hash: str = "",
    ):
        self.cfg = cfg
        self.token_vocab = dict(token_vocab)
        self.n_labels = n_labels
        self.inventory_hash = inventory_hash
        d = cfg.dim
        rng = np.random.default_rng(cfg.seed)
        scale = 1.0 / math.sqrt(d)
        self.params: dict[str, np.ndarray] = _init_encoder_params(rng, cfg, len(token_vocab))
        self.params.update(
            start_emb=rng.normal(0.0, 0.1, size=d),
            lab_emb=rng.normal(0.0, 0.1, size=(n_labels, d)),
            dec_wq=rng.normal(0.0, scale, size=(d, d)),
            dec_wk=rng.normal(0.0, scale, size=(d, d)),
            dec_wv=rng.normal(0.0, scale, size=(d, d)),
            dec_wo=rng.normal(0.0, scale, size=(d, d)),
            # zero output head: a fresh model is uniform over unmasked labels
            out_w=np.zeros((d, n_labels)),
            out_b=np.zeros(n_labels),
        )

    def token_ids(self, tokens: list[str]) -> list[int]:
        return [self.token_vocab[t] for t in tokens if t in self.token_vocab]

    def arch(self) -> dict:
        return asdict(self.cfg)

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    # -- forward / backward ------------------------------------------------

    def forward_state(self, token_ids: list[int], history: Trajectory, allowed: list[int]):
        """Probabilities over ``allowed`` label indices plus the backward cache."""
        p, cfg = self.params, self.cfg
        d = cfg.dim
        nh, dh = cfg.heads, d // cfg.heads
        q_vec, enc_cache = _encode_query(p, cfg, token_ids)
        dec_in = p["lab_emb"][history[-1]] if history else p["start_emb"]
        mem = np.vstack([q_vec[None, :], p["lab_emb"][list(history)]]) if history else q_vec[None, :]

        K = mem @ p["dec_wk"]
        V = mem @ p["dec_wv"]
        q_full = dec_in @ p["dec_wq"]
        att = []
        ctx_heads = []
        for i in range(nh):
            sl = slice(i * dh, (i + 1) * dh)
            s = K[:, sl] @ q_full[sl] / math.sqrt(dh)
            a = _softmax(s)
            att.append(a)
            ctx_heads.append(a @ V[:, sl])
        cc = np.concatenate(ctx_heads)
        rep = cc @ p["dec_wo"] + dec_in
        logits = rep @ p["out_w"] + p["out_b"]
        z, logz = _log_softmax(logits[allowed])
        cache = dict(
            enc=enc_cache, history=tuple(history), dec_in=dec_in, mem=mem,
            K=K, V=V, q_full=q_full, att=att, cc=cc, rep=rep, allowed=list(allowed),
            logz=logz,
        )
        return z, cache

    def backward_state(self, cache: dict, d_logits_allowed: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss given its gradient w.r.t. the allowed logits."""
        p, cfg = self.params, self.cfg
        d = cfg.dim
        nh, dh = cfg.heads, d // cfg.heads
        grads = {k: np.zeros_like(v) for k, v in p.items()}

        g_full = np.zeros(self.n_labels)
        g_full[cache["allowed"]] = d_logits_allowed
        grads["out_w"] += np.outer(cache["rep"], g_full)
        grads["out_b"] += g_full
        d_rep = p["out_w"] @ g_full

        grads["dec_wo"] += np.outer(cache["cc"], d_rep)
        d_cc = p["dec_wo"] @ d_rep
        d_dec_in = d_rep.copy()  # residual branch

        mem, K, V, q_full = cache["mem"], cache["K"], cache["V"], cache["q_full"]
        d_K = np.zeros_like(K)
        d_V = np.zeros_like(V)
        d_qfull = np.zeros(d)
        for i in range(nh):
            sl = slice(i * dh, (i + 1) * dh)
            a = cache["att"][i]
            d_head = d_cc[sl]
            d_a = V[:, sl] @ d_head
            d_V[:, sl] = np.outer(a, d_head)
            d_s = a * (d_a - float(a @ d_a))
            d_K[:, sl] = np.outer(d_s, q_full[sl]) / math.sqrt(dh)
            d_qfull[sl] = K[:, sl].T @ d_s / math.sqrt(dh)

        grads["dec_wq"] += np.outer(cache["dec_in"], d_qfull)
        d_dec_in += p["dec_wq"] @ d_qfull
        grads["dec_wk"] += mem.T @ d_K
        grads["dec_wv"] += mem.T @ d_V
        d_mem = d_K @ p["dec_wk"].T + d_V @ p["dec_wv"].T

        history = cache["history"]
        if history:
            np.add.at(grads["lab_emb"], list(history), d_mem[1:])
            grads["lab_emb"][history[-1]] += d_dec_in
        else:
            grads["start_emb"] += d_dec_in
        _encode_query_backward(p, cfg, cache["enc"], d_mem[0], grads)
        return grads

    # -- inference ----------------------------------------------------------

    def distribution(self, query_tokens: list[str], history: Trajectory, excluded: set[int]):
        excluded = set(excluded) | set(history)
        allowed = [x for x in range(self.n_labels) if x not in excluded]
        if not allowed:
            raise NoActionError("all labels are masked")
        z, _ = self.forward_state(self.token_ids(query_tokens), tuple(history), allowed)
        return allowed, z

    def recommend(self, inv: Inventory, query_text: str, n: int, excluded: set[int] | None = None) -> Trajectory:
        """Greedy argmax decoding with history masking; ties go to the smaller id."""
        if n < 1:
            return ()
        if n > self.n_labels:
            logger.warning("requested %d labels but only %d exist; clipping", n, self.n_labels)
            n = self.n_labels
        tokens = tokenize(query_text)
        history: tuple[int, ...] = ()
        base_excluded = set(excluded or ())
        for _ in range(n):
            if len(base_excluded | set(history)) >= self.n_labels:
                break
            allowed, z = self.distribution(tokens, history, base_excluded)
            history = history + (allowed[int(np.argmax(z))],)
        return history


class ClassifierModel:
    """History-free classifier: the shared query encoder plus a logit head.

    Used by the greedy baseline (head over intents) and the no-state-transition
    baseline (head over labels).
    """

    kind = "classifier"

    def __init__(self, cfg: ModelConfig, token_vocab: dict[str, int], n_out: int, inventory_hash: str = ""):
        self.cfg = cfg
        self.token_vocab = dict(token_vocab)
        self.n_out = n_out
        self.inventory_hash = inventory_hash
        rng = np.random.default_rng(cfg.seed)
        self.params = _init_encoder_params(rng, cfg, len(token_vocab))
        self.params.update(head_w=np.zeros((cfg.dim, n_out)), head_b=np.zeros(n_out))

    def token_ids(self, tokens: list[str]) -> list[int]:
        return [self.token_vocab[t] for t in tokens if t in self.token_vocab]

    def arch(self) -> dict:
        return asdict(self.cfg)

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward_state(self, token_ids: list[int]):
        q_vec, enc_cache = _encode_query(self.params, self.cfg, token_ids)
        logits = q_vec @ self.params["head_w"] + self.params["head_b"]
        z, logz = _log_softmax(logits)
        return z, {"enc": enc_cache, "q_vec": q_vec, "logz": logz}

    def backward_state(self, cache: dict, d_logits: np.ndarray) -> dict[str, np.ndarray]:
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        grads["head_w"] += np.outer(cache["q_vec"], d_logits)
        grads["head_b"] += d_logits
        d_qvec = self.params["head_w"] @ d_logits
        _encode_query_backward(self.params, self.cfg, cache["enc"], d_qvec, grads)
        return grads

    def probabilities(self, query_text: str) -> np.ndarray:
        z, _ = self.forward_state(self.token_ids(tokenize(query_text)))
        return z


def policy_forward(
    model: PolicyModel,
    query_tokens: list[str],
    history: Trajectory,
    mask: set[LabelId],
) -> dict[LabelId, float]:
    """Action distribution over the whole label vocabulary; masked labels get exactly 0."""
    allowed, z = model.distribution(query_tokens, history, set(mask))
    out = {x: 0.0 for x in range(model.n_labels)}
    for x, p in zip(allowed, z):
        out[x] = float(p)
    return out


def recommend(model: PolicyModel, inv: Inventory, query_text: str, n: int) -> Trajectory:
    """Top-n distinct labels for a raw query (no candidate mask at inference)."""
    return model.recommend(inv, query_text, n)
