"""Pipeline configuration and orchestration: series -> graph -> trained model
-> evaluation reports. The CLI is a thin wrapper over these functions."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import gae, stats
from .data import assemble_dataset, load_recordings, read_manifest
from .ensemble import (EnsembleModel, fit_ensemble, load_ensemble,
                       save_ensemble)
from .features import MinMaxScaler, feature_matrix, minmax_normalize
from .gae import GaeConfig, TrainedGAE
from .graph import (FaultGraph, atomic_write_text, build_graph, load_graph,
                    pairwise_distances, save_graph, threshold_from_percentile)
from .segmentation import (DEFAULT_CANDIDATES, default_bin_count,
                           default_stride, segment, select_window, TimeSeries)

DEFAULT_CONFIG = {
    # graph construction
    "candidate_windows": list(DEFAULT_CANDIDATES),
    "bin_count": 0,            # 0 -> max(2, ceil(sqrt(w)))
    "entropy_step": 1,         # stride of the window-scan entropy average
    "stride": 0,               # segmentation stride; 0 -> ceil(w*/2)
    "theta_percentile": 20.0,
    "pair_budget": 2000000,
    # ingestion
    "block_size": 1024,
    "reducer": "rms",
    "sampling_rate": 48000.0,
    "n_classes": 10,
    "manifest": "manifest.csv",
    "data_dir": ".",
    # model
    "hidden_dim": 64,
    "latent_dim": 10,
    "num_gat_layers": 3,
    "num_transformer_layers": 2,
    "gat_heads": 10,
    "transformer_heads": 5,
    "kl_weight": 0.1,
    "epochs": 50,
    "learning_rate": 1e-3,
    "train_frac": 0.7,
    "val_frac": 0.15,
    "test_frac": 0.15,
    "seed": 0,
    # ensemble
    "rf_trees": 100, "rf_depth": 8,
    "gb_rounds": 100, "gb_lr": 0.1, "gb_depth": 3,
    "xgb_rounds": 100, "xgb_lr": 0.1, "xgb_depth": 3, "xgb_l2": 1.0,
    "mlp_hidden": 32, "mlp_epochs": 200, "mlp_lr": 0.01,
    "cv_folds": 5,
}


class ConfigError(ValueError):
    pass


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(tok) for tok in inner.split(",")]
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_text(text: str) -> dict:
    """Flat `key = value` config (TOML-compatible subset); unknown keys rejected."""
    cfg = dict(DEFAULT_CONFIG)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in DEFAULT_CONFIG:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        value = _parse_value(raw)
        default = DEFAULT_CONFIG[key]
        if isinstance(default, float) and isinstance(value, int):
            value = float(value)
        if type(value) is not type(default):
            raise ConfigError(
                f"line {lineno}: key {key!r} expects {type(default).__name__}")
        cfg[key] = value
    return cfg


def load_config(path: str | None, overrides: dict | None = None) -> dict:
    if path is None:
        cfg = dict(DEFAULT_CONFIG)
    else:
        with open(path) as fh:
            cfg = parse_config_text(fh.read())
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in DEFAULT_CONFIG:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def gae_config_from(cfg: dict) -> GaeConfig:
    return GaeConfig(
        input_dim=10,
        hidden_dim=cfg["hidden_dim"], latent_dim=cfg["latent_dim"],
        num_gat_layers=cfg["num_gat_layers"],
        num_transformer_layers=cfg["num_transformer_layers"],
        gat_heads=cfg["gat_heads"], transformer_heads=cfg["transformer_heads"],
        kl_weight=cfg["kl_weight"], epochs=cfg["epochs"],
        learning_rate=cfg["learning_rate"], seed=cfg["seed"],
        split_fractions=(cfg["train_frac"], cfg["val_frac"], cfg["test_frac"]),
    ).validate()


def ensemble_hyperparams_from(cfg: dict) -> dict:
    return {k: cfg[k] for k in ("rf_trees", "rf_depth", "gb_rounds", "gb_lr",
                                "gb_depth", "xgb_rounds", "xgb_lr", "xgb_depth",
                                "xgb_l2", "mlp_hidden", "mlp_epochs", "mlp_lr",
                                "cv_folds")}


# ---------------------------------------------------------------------------
# pipeline stages


def build_graph_from_series(series: TimeSeries, cfg: dict):
    """select_window -> segment -> features -> normalize -> threshold -> graph.

    Returns (FaultGraph, WindowSelection). The graph meta embeds the scaler,
    segment values, config hash, and seed so downstream stages can re-use
    the training normalization and recompute DTW products.
    """
    bin_count = cfg["bin_count"] or None
    sel = select_window(series, cfg["candidate_windows"],
                        step=cfg["entropy_step"], bin_count=bin_count)
    w_star = sel.w_star
    step = cfg["stride"] or default_stride(w_star)
    segments = segment(series, w_star, step)

    raw = feature_matrix(segments, bin_count or default_bin_count(w_star))
    normalized, scaler = minmax_normalize(raw)
    labels = np.array([s.label for s in segments])

    distances = pairwise_distances(segments, cfg["pair_budget"])
    theta = threshold_from_percentile(distances, cfg["theta_percentile"])

    meta = {
        "w_star": w_star,
        "step": step,
        "theta_percentile": cfg["theta_percentile"],
        "source_id": series.source_id,
        "scaler": scaler.to_dict(),
        "segments": [s.values.tolist() for s in segments],
        "segment_starts": [s.start_index for s in segments],
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
    }
    graph = build_graph(segments, normalized, labels, theta,
                        distances=distances, meta=meta)
    return graph, sel


def save_window_scores(sel, path: str, cfg: dict) -> None:
    lines = [f"# config_hash={config_hash(cfg)} seed={cfg['seed']}",
             "window,normalized_entropy"]
    for w, score in zip(sel.candidates, sel.scores):
        lines.append(f"{w},{score!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


MODEL_FILE = "model.json"
ENSEMBLE_FILE = "ensemble.json"
CURVES_FILE = "loss_curves.csv"
TRAIN_REPORT_FILE = "train_report.json"


def train_on_graph(graph: FaultGraph, cfg: dict):
    """Train the GAE, then fit the soft-voting ensemble on its H2 embedding.

    Returns (TrainedGAE, EnsembleModel, train_report dict). The ensemble is
    fitted on the training split only; the report carries metrics for all
    three splits of the training graph.
    """
    model = gae.train(graph, gae_config_from(cfg))
    H2 = gae.embed(graph, model)
    labels = graph.node_labels
    tr = model.split["train"]

    ens = fit_ensemble(H2[tr], labels[tr], ensemble_hyperparams_from(cfg),
                       seed=cfg["seed"])

    n_classes = int(labels.max()) + 1
    source = graph.meta.get("source_id", "")
    report = {"config_hash": config_hash(cfg), "seed": cfg["seed"],
              "train_source": source, "scaler": graph.meta.get("scaler"),
              "splits": {}}
    for name, idx in model.split.items():
        if len(idx) == 0:
            continue
        pred = ens.predict(H2[idx])
        rep = stats.evaluation_report(labels[idx], pred, n_classes,
                                      train_source=source, test_source=source)
        report["splits"][name] = rep.to_dict()
    return model, ens, report


def save_model_dir(out_dir: str, model: TrainedGAE, ens: EnsembleModel,
                   report: dict, cfg: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    model.diagnostics["config_hash"] = config_hash(cfg)
    gae.save_model(model, os.path.join(out_dir, MODEL_FILE))
    gae.save_loss_curves(model, os.path.join(out_dir, CURVES_FILE))
    save_ensemble(ens, os.path.join(out_dir, ENSEMBLE_FILE))
    atomic_write_text(os.path.join(out_dir, TRAIN_REPORT_FILE),
                      json.dumps(report, indent=1, sort_keys=True))


def load_model_dir(model_dir: str):
    model = gae.load_model(os.path.join(model_dir, MODEL_FILE))
    ens = load_ensemble(os.path.join(model_dir, ENSEMBLE_FILE))
    with open(os.path.join(model_dir, TRAIN_REPORT_FILE)) as fh:
        report = json.load(fh)
    return model, ens, report


def _renormalized_features(graph: FaultGraph, train_scaler: dict) -> np.ndarray:
    """Map the graph's features into the training scaler's [0,1] frame.

    Graph files store features normalized by their own scaler; recovering the
    raw values and re-applying the training scaler makes cross-dataset
    embeddings comparable. When the scalers are identical the stored features
    are reused bit-for-bit.
    """
    own = graph.meta.get("scaler")
    if own is None:
        raise ValueError("graph file carries no scaler parameters")
    if train_scaler is None:
        raise ValueError("training metadata carries no scaler parameters")
    if own == train_scaler:
        return graph.node_features
    own_scaler = MinMaxScaler.from_dict(own)
    span = own_scaler.col_max - own_scaler.col_min
    raw = graph.node_features * span + own_scaler.col_min
    const = span == 0
    raw[:, const] = own_scaler.col_min[const]
    return MinMaxScaler.from_dict(train_scaler).transform(raw)


def evaluate_on_graph(model: TrainedGAE, ens: EnsembleModel,
                      train_meta: dict, graph: FaultGraph, cfg: dict):
    """Cross-dataset evaluation of a trained model on any graph file."""
    features = _renormalized_features(graph, train_meta["scaler"])
    eval_graph = FaultGraph(node_features=features,
                            node_labels=graph.node_labels,
                            edges=graph.edges, meta=graph.meta)
    H2 = gae.embed(eval_graph, model)
    labels = graph.node_labels
    if labels.max() >= ens.n_classes:
        raise ValueError(
            f"graph contains class {int(labels.max())} unseen during training")
    pred = ens.predict(H2)
    report = stats.evaluation_report(
        labels, pred, ens.n_classes,
        train_source=train_meta.get("source_id", ""),
        test_source=graph.meta.get("source_id", ""))

    doc = report.to_dict()
    doc["config_hash"] = config_hash(cfg)
    doc["seed"] = cfg["seed"]
    # per-split breakdown when evaluating the model's own training graph
    if graph.meta.get("source_id") == train_meta.get("source_id") and model.split:
        doc["splits"] = {}
        for name, idx in model.split.items():
            idx = np.asarray(idx, dtype=np.int64)
            if len(idx) == 0:
                continue
            rep = stats.evaluation_report(labels[idx], pred[idx], ens.n_classes,
                                          train_source=doc["train_source"],
                                          test_source=doc["test_source"])
            doc["splits"][name] = rep.to_dict()
    return report, doc


def load_series_by_load(cfg: dict) -> dict[str, TimeSeries]:
    manifest = read_manifest(os.path.join(cfg["data_dir"], cfg["manifest"]),
                             cfg["n_classes"])
    recordings = load_recordings(cfg["data_dir"], manifest, cfg["sampling_rate"])
    return assemble_dataset(recordings, cfg["block_size"], cfg["reducer"])


def cross_eval(cfg: dict, out_dir: str, loads: list[str] | None = None) -> dict:
    """Full train->test matrix over the manifest's load tags.

    Trains one model per load, evaluates it on every load, writes one report
    file per (train, test) pair plus a summary with mean/std F1 per model and
    pairwise paired t-tests between the models' per-class F1 vectors.
    """
    series = load_series_by_load(cfg)
    tags = loads or sorted(series)
    missing = [t for t in tags if t not in series]
    if missing:
        raise ValueError(f"loads {missing} not present in the manifest")

    os.makedirs(out_dir, exist_ok=True)
    graphs = {}
    for tag in tags:
        graph, sel = build_graph_from_series(series[tag], cfg)
        graphs[tag] = graph
        save_graph(graph, os.path.join(out_dir, f"graph_{tag}.json"))
        save_window_scores(sel, os.path.join(out_dir, f"window_scores_{tag}.csv"), cfg)

    f1_vectors = {}     # train tag -> concatenated per-class F1 over all test tags
    summary = {"config_hash": config_hash(cfg), "seed": cfg["seed"],
               "reports": {}, "f1_summary": {}, "paired_tests": {}}
    for train_tag in tags:
        model, ens, train_report = train_on_graph(graphs[train_tag], cfg)
        save_model_dir(os.path.join(out_dir, f"model_{train_tag}"), model, ens,
                       train_report, cfg)
        per_test_f1 = []
        for test_tag in tags:
            report, doc = evaluate_on_graph(model, ens, graphs[train_tag].meta,
                                            graphs[test_tag], cfg)
            name = f"report_{train_tag}_to_{test_tag}.json"
            atomic_write_text(os.path.join(out_dir, name),
                              json.dumps(doc, indent=1, sort_keys=True))
            summary["reports"][f"{train_tag}->{test_tag}"] = {
                "file": name, "macro_f1": report.macro_f1,
                "accuracy": report.accuracy}
            per_test_f1.append(report.f1)
        f1_vectors[train_tag] = np.concatenate(per_test_f1)
        mean, std = stats.f1_summary(per_test_f1)
        summary["f1_summary"][train_tag] = {"mean": mean, "std": std}

    for i, a in enumerate(tags):
        for b in tags[i + 1:]:
            t = stats.paired_ttest(f1_vectors[a], f1_vectors[b])
            summary["paired_tests"][f"{a} vs {b}"] = {
                "t_statistic": t.statistic, "p_value": t.p_value,
                "significant_at_0_05": t.significant_at_0_05,
                "mean_difference": t.extra["mean_difference"]}

    atomic_write_text(os.path.join(out_dir, "summary.json"),
                      json.dumps(summary, indent=1, sort_keys=True))
    reports = [stats.EvaluationReport.from_dict(
                   json.load(open(os.path.join(out_dir, rec["file"]))))
               for rec in summary["reports"].values()]
    atomic_write_text(os.path.join(out_dir, "summary.md"),
                      stats.render_markdown_report(reports))
    return summary
