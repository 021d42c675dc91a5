"""Variational graph autoencoder: multi-head graph attention + neighbor
transformer encoder, reparameterized latent space, and sigmoid feature decoder.

All learnable parameters live in a flat name -> Tensor dict so checkpoints
are a simple stable-name map. Multi-head outputs are averaged (hidden width
64 is not divisible by 10 heads, so concatenation cannot produce it).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import FaultGraph, atomic_write_text


@dataclass
class GaeConfig:
    input_dim: int = 10
    hidden_dim: int = 64
    latent_dim: int = 10
    num_gat_layers: int = 3
    num_transformer_layers: int = 2
    gat_heads: int = 10
    transformer_heads: int = 5
    kl_weight: float = 0.1
    epochs: int = 50
    learning_rate: float = 1e-3
    leaky_slope: float = 0.2
    seed: int = 0
    split_fractions: tuple = (0.7, 0.15, 0.15)

    def validate(self):
        for name in ("input_dim", "hidden_dim", "latent_dim", "num_gat_layers",
                     "num_transformer_layers", "gat_heads", "transformer_heads"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.kl_weight < 0:
            raise ValueError("kl_weight must be >= 0")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        return self


@dataclass
class TrainedGAE:
    params: dict                      # name -> Tensor
    config: GaeConfig
    curves: dict = field(default_factory=lambda: {"train": [], "val": [], "test": []})
    split: dict = field(default_factory=dict)          # "train"/"val"/"test" -> node index arrays
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parameters


def _xavier(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(config: GaeConfig, rng: np.random.Generator) -> dict:
    """Xavier-uniform weight matrices; attention vectors start at zero."""
    p = {}
    d_in = config.input_dim
    h = config.hidden_dim
    for layer in range(config.num_gat_layers):
        for head in range(config.gat_heads):
            base = f"gat{layer}.head{head}"
            p[f"{base}.W"] = Tensor(_xavier(rng, d_in, h), requires_grad=True)
            p[f"{base}.a_src"] = Tensor(np.zeros((h, 1)), requires_grad=True)
            p[f"{base}.a_dst"] = Tensor(np.zeros((h, 1)), requires_grad=True)
        d_in = h
    for layer in range(config.num_transformer_layers):
        for head in range(config.transformer_heads):
            base = f"tr{layer}.head{head}"
            for w in ("Wq", "Wk", "Wv"):
                p[f"{base}.{w}"] = Tensor(_xavier(rng, h, h), requires_grad=True)
    p["head.W_mu"] = Tensor(_xavier(rng, h, config.latent_dim), requires_grad=True)
    p["head.W_sigma"] = Tensor(_xavier(rng, h, config.latent_dim), requires_grad=True)
    p["dec.W1"] = Tensor(_xavier(rng, config.latent_dim, h), requires_grad=True)
    p["dec.W2"] = Tensor(_xavier(rng, h, config.input_dim), requires_grad=True)
    return p


def _mean_heads(outputs):
    acc = outputs[0]
    for t in outputs[1:]:
        acc = ad.add(acc, t)
    return ad.scalar_mul(acc, 1.0 / len(outputs))


# ---------------------------------------------------------------------------
# layers


def gat_layer(H: Tensor, mask: np.ndarray, head_params: list, slope: float = 0.2):
    """One multi-head graph-attention layer.

    Per head: e_ij = LeakyReLU(a_src.(W x_i) + a_dst.(W x_j)), softmax over
    the (self-loop-inclusive) neighborhood, ReLU of the attention-weighted
    sum of projected neighbors. Returns (mean-over-heads output, attention
    matrices per head).
    """
    outs, attns = [], []
    for hp in head_params:
        XW = ad.matmul(H, hp["W"])
        u = ad.matmul(XW, hp["a_src"])          # m x 1
        v = ad.matmul(XW, hp["a_dst"])          # m x 1
        E = ad.leaky_relu(ad.add(u, ad.transpose(v)), slope)
        A = ad.masked_neighbor_softmax(E, mask)
        outs.append(ad.relu(ad.matmul(A, XW)))
        attns.append(A)
    return _mean_heads(outs), attns


def transformer_conv_layer(H: Tensor, mask: np.ndarray, head_params: list):
    """Neighbor-restricted scaled dot-product attention with ELU output."""
    d_h = head_params[0]["Wq"].shape[1]
    scale = 1.0 / np.sqrt(d_h)
    outs, attns = [], []
    for hp in head_params:
        Q = ad.matmul(H, hp["Wq"])
        K = ad.matmul(H, hp["Wk"])
        V = ad.matmul(H, hp["Wv"])
        scores = ad.scalar_mul(ad.matmul(Q, ad.transpose(K)), scale)
        A = ad.masked_neighbor_softmax(scores, mask)
        outs.append(ad.elu(ad.matmul(A, V)))
        attns.append(A)
    return _mean_heads(outs), attns


def _gat_head_params(params, config, layer):
    return [{k: params[f"gat{layer}.head{h}.{k}"] for k in ("W", "a_src", "a_dst")}
            for h in range(config.gat_heads)]


def _tr_head_params(params, config, layer):
    return [{k: params[f"tr{layer}.head{h}.{k}"] for k in ("Wq", "Wk", "Wv")}
            for h in range(config.transformer_heads)]


def encode(graph: FaultGraph, params: dict, config: GaeConfig):
    """Run the encoder stack; returns (mu, logvar, H2, attention matrices)."""
    if graph.node_features.shape[1] != config.input_dim:
        raise ValueError(
            f"graph feature dim {graph.node_features.shape[1]} does not match "
            f"config input_dim {config.input_dim}")
    mask = graph.neighbor_mask(include_self=True)
    H = Tensor(graph.node_features)
    attns = []
    for layer in range(config.num_gat_layers):
        H, a = gat_layer(H, mask, _gat_head_params(params, config, layer),
                         config.leaky_slope)
        attns.extend(a)
    for layer in range(config.num_transformer_layers):
        H, a = transformer_conv_layer(H, mask, _tr_head_params(params, config, layer))
        attns.extend(a)
    mu = ad.matmul(H, params["head.W_mu"])
    logvar = ad.matmul(H, params["head.W_sigma"])
    return mu, logvar, H, attns


def reparameterize(mu: Tensor, logvar: Tensor, eps: np.ndarray) -> Tensor:
    """Z = mu + exp(logvar / 2) * eps with a caller-supplied standard-normal draw."""
    if eps.shape != mu.shape or mu.shape != logvar.shape:
        raise ad.ShapeError(
            f"reparameterize got mu {mu.shape}, logvar {logvar.shape}, eps {eps.shape}")
    std = ad.exp(ad.scalar_mul(logvar, 0.5))
    return ad.add(mu, ad.mul(std, Tensor(eps)))


def decode(Z: Tensor, params: dict) -> Tensor:
    """Two-layer decoder ending in a sigmoid to match the [0,1] feature range."""
    H = ad.relu(ad.matmul(Z, params["dec.W1"]))
    return ad.sigmoid(ad.matmul(H, params["dec.W2"]))


def gae_loss(X: Tensor, X_hat: Tensor, mu: Tensor, logvar: Tensor,
             kl_weight: float, row_mask: np.ndarray | None = None):
    """Total loss L_rec + lambda * L_KL, optionally restricted to masked rows.

    Returns (L, L_rec, L_KL) as scalar tensors. L_rec averages squared
    reconstruction error per node; L_KL is the Gaussian KL to N(0, I).
    """
    if X.shape != X_hat.shape or mu.shape != logvar.shape:
        raise ad.ShapeError(
            f"gae_loss got X {X.shape}, X_hat {X_hat.shape}, mu {mu.shape}, "
            f"logvar {logvar.shape}")
    m = X.shape[0]
    if row_mask is None:
        col = None
        n_rows = m
    else:
        col = Tensor(np.asarray(row_mask, dtype=np.float64).reshape(m, 1))
        n_rows = int(col.values.sum())

    sq = ad.square(ad.sub(X, X_hat))
    if col is not None:
        sq = ad.mul(sq, col)
    L_rec = ad.scalar_mul(ad.tsum(sq), 1.0 / n_rows)

    ones = Tensor(np.ones(mu.shape))
    inner = ad.sub(ad.sub(ad.add(ones, logvar), ad.square(mu)), ad.exp(logvar))
    if col is not None:
        inner = ad.mul(inner, col)
    L_KL = ad.scalar_mul(ad.tsum(inner), -0.5 / n_rows)

    L = ad.add(L_rec, ad.scalar_mul(L_KL, kl_weight))
    return L, L_rec, L_KL


def forward_loss(graph: FaultGraph, params: dict, config: GaeConfig,
                 eps: np.ndarray, row_mask: np.ndarray | None = None):
    """Full forward pass and loss; returns tensors plus attention matrices."""
    X = Tensor(graph.node_features)
    mu, logvar, H2, attns = encode(graph, params, config)
    Z = reparameterize(mu, logvar, eps)
    X_hat = decode(Z, params)
    L, L_rec, L_KL = gae_loss(X, X_hat, mu, logvar, config.kl_weight, row_mask)
    return {"L": L, "L_rec": L_rec, "L_KL": L_KL, "mu": mu, "logvar": logvar,
            "H2": H2, "X_hat": X_hat, "attns": attns}


# ---------------------------------------------------------------------------
# training


def stratified_split(labels, fractions, rng: np.random.Generator):
    """Per-class shuffled split into train/val/test index arrays."""
    labels = np.asarray(labels)
    train, val, test = [], [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        n = len(idx)
        n_tr = int(round(fractions[0] * n))
        n_va = int(round(fractions[1] * n))
        train.extend(idx[:n_tr])
        val.extend(idx[n_tr:n_tr + n_va])
        test.extend(idx[n_tr + n_va:])
        if n_tr == 0:
            raise ValueError(f"class {cls} absent from the training split")
    return (np.sort(np.array(train, dtype=np.int64)),
            np.sort(np.array(val, dtype=np.int64)),
            np.sort(np.array(test, dtype=np.int64)))


def _rec_loss_rows(X, X_hat, rows):
    if len(rows) == 0:
        return float("nan")
    diff = X[rows] - X_hat[rows]
    return float((diff ** 2).sum() / len(rows))


def train(graph: FaultGraph, config: GaeConfig) -> TrainedGAE:
    """Full-graph training with Adam; records train/val/test reconstruction
    curves per epoch and attention/KL diagnostics."""
    config.validate()
    if graph.num_nodes < 10:
        raise ValueError("training needs at least 10 nodes")
    rng = np.random.default_rng(config.seed)
    tr_idx, va_idx, te_idx = stratified_split(graph.node_labels,
                                              config.split_fractions, rng)
    params = init_params(config, rng)
    opt = ad.AdamState(list(params.values()), lr=config.learning_rate)

    m = graph.num_nodes
    row_mask = np.zeros(m)
    row_mask[tr_idx] = 1.0
    X = graph.node_features
    curves = {"train": [], "val": [], "test": []}
    max_attn_dev = 0.0
    min_kl = np.inf

    for _ in range(config.epochs):
        eps = rng.standard_normal((m, config.latent_dim))
        out = forward_loss(graph, params, config, eps, row_mask)

        for A in out["attns"]:
            # row sums restricted to the unmasked neighborhood must be 1
            max_attn_dev = max(max_attn_dev,
                               float(np.abs(A.values.sum(axis=1) - 1.0).max()))
        min_kl = min(min_kl, out["L_KL"].item())

        X_hat = out["X_hat"].values
        curves["train"].append(_rec_loss_rows(X, X_hat, tr_idx))
        curves["val"].append(_rec_loss_rows(X, X_hat, va_idx))
        curves["test"].append(_rec_loss_rows(X, X_hat, te_idx))

        ad.backward(out["L"])
        ad.adam_step(opt)

    return TrainedGAE(
        params=params, config=config, curves=curves,
        split={"train": tr_idx, "val": va_idx, "test": te_idx},
        diagnostics={"max_attention_rowsum_dev": max_attn_dev,
                     "min_kl": min_kl if config.epochs else None},
    )


def embed(graph: FaultGraph, model: TrainedGAE) -> np.ndarray:
    """Deterministic encoder forward; returns the m x hidden_dim H2 embedding."""
    if graph.node_features.shape[1] != model.config.input_dim:
        raise ValueError("graph feature dimension does not match the trained config")
    _, _, H2, _ = encode(graph, model.params, model.config)
    return H2.values


# ---------------------------------------------------------------------------
# checkpoint + curves I/O


def save_model(model: TrainedGAE, path: str) -> None:
    doc = {
        "config": asdict(model.config),
        "params": {name: {"shape": list(t.shape), "values": t.values.ravel().tolist()}
                   for name, t in model.params.items()},
        "curves": model.curves,
        "split": {k: np.asarray(v).tolist() for k, v in model.split.items()},
        "diagnostics": model.diagnostics,
    }
    atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True))


def load_model(path: str) -> TrainedGAE:
    with open(path) as fh:
        doc = json.load(fh)
    cfg = doc["config"]
    cfg["split_fractions"] = tuple(cfg["split_fractions"])
    config = GaeConfig(**cfg)
    params = {name: Tensor(np.asarray(rec["values"]).reshape(rec["shape"]),
                           requires_grad=True)
              for name, rec in doc["params"].items()}
    return TrainedGAE(params=params, config=config, curves=doc["curves"],
                      split={k: np.asarray(v, dtype=np.int64)
                             for k, v in doc.get("split", {}).items()},
                      diagnostics=doc.get("diagnostics", {}))


def save_loss_curves(model: TrainedGAE, path: str) -> None:
    rows = ["epoch,train_rec,val_rec,test_rec"]
    for e, (tr, va, te) in enumerate(zip(model.curves["train"],
                                         model.curves["val"],
                                         model.curves["test"]), start=1):
        rows.append(f"{e},{tr!r},{va!r},{te!r}")
    atomic_write_text(path, "\n".join(rows) + "\n")
