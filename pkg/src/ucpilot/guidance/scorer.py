"""Trainable variable scorer: one bipartite message-passing round in numpy.

Forward pass: embed variable and constraint features (width H), aggregate
variable embeddings into constraints along coefficient-weighted edges, update
constraints, aggregate back into variables, update, then a scalar head.
Training minimizes a pairwise hinge rank loss over labeled candidate pairs
within each graph, with hand-written backprop and Adam. Everything is
deterministic for a fixed seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .features import BipartiteGraph, CON_FEATURES, VAR_FEATURES

SCORER_VERSION = 1


class DegenerateDataset(Exception):
    """No graph in the dataset yields a strictly ordered candidate pair."""


@dataclass
class ScorerParams:
    weights: dict[str, np.ndarray]
    var_mean: np.ndarray
    var_std: np.ndarray
    con_mean: np.ndarray
    con_std: np.ndarray
    hidden: int
    version: int = SCORER_VERSION
    train_report: dict = field(default_factory=dict)

    def save(self, path) -> None:
        meta = {"hidden": np.array([self.hidden]), "version": np.array([self.version])}
        report_keys = sorted(self.train_report)
        meta["report_keys"] = np.array(report_keys, dtype="U64")
        meta["report_vals"] = np.array([float(self.train_report[k]) for k in report_keys])
        np.savez(path, var_mean=self.var_mean, var_std=self.var_std,
                 con_mean=self.con_mean, con_std=self.con_std,
                 **{f"w_{k}": v for k, v in self.weights.items()}, **meta)

    @classmethod
    def load(cls, path) -> "ScorerParams":
        data = np.load(path, allow_pickle=False)
        weights = {k[2:]: data[k] for k in data.files if k.startswith("w_")}
        report = {str(k): float(v) for k, v in
                  zip(data["report_keys"], data["report_vals"])}
        return cls(weights=weights, var_mean=data["var_mean"], var_std=data["var_std"],
                   con_mean=data["con_mean"], con_std=data["con_std"],
                   hidden=int(data["hidden"][0]), version=int(data["version"][0]),
                   train_report=report)


def _init_params(hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    dv, dc = len(VAR_FEATURES), len(CON_FEATURES)

    def glorot(a, b):
        s = math.sqrt(6.0 / (a + b))
        return rng.uniform(-s, s, (a, b))

    return {
        "Wv": glorot(dv, hidden), "bv": np.zeros(hidden),
        "Wc": glorot(dc, hidden), "bc": np.zeros(hidden),
        "Wc1": glorot(hidden, hidden), "Wc2": glorot(hidden, hidden), "bc1": np.zeros(hidden),
        "Wv1": glorot(hidden, hidden), "Wv2": glorot(hidden, hidden), "bv1": np.zeros(hidden),
        "wo": glorot(hidden, 1).ravel(), "bo": np.zeros(1),
    }


def _edge_matrix(g: BipartiteGraph) -> sp.csr_matrix:
    return sp.csr_matrix((g.edge_values, (g.edge_rows, g.edge_cols)),
                         shape=(g.num_cons, g.num_vars))


def _forward(w: dict, Xv: np.ndarray, Xc: np.ndarray, E: sp.csr_matrix):
    zv0 = Xv @ w["Wv"] + w["bv"]
    hv0 = np.maximum(zv0, 0.0)
    zc0 = Xc @ w["Wc"] + w["bc"]
    hc0 = np.maximum(zc0, 0.0)
    mc = E @ hv0
    zc1 = hc0 @ w["Wc1"] + mc @ w["Wc2"] + w["bc1"]
    hc1 = np.maximum(zc1, 0.0)
    mv = E.T @ hc1
    zv1 = hv0 @ w["Wv1"] + mv @ w["Wv2"] + w["bv1"]
    hv1 = np.maximum(zv1, 0.0)
    s = hv1 @ w["wo"] + w["bo"][0]
    cache = (Xv, Xc, E, zv0, hv0, zc0, hc0, mc, zc1, hc1, mv, zv1, hv1)
    return s, cache


def _backward(w: dict, cache, ds: np.ndarray) -> dict[str, np.ndarray]:
    Xv, Xc, E, zv0, hv0, zc0, hc0, mc, zc1, hc1, mv, zv1, hv1 = cache
    g = {}
    g["wo"] = hv1.T @ ds
    g["bo"] = np.array([ds.sum()])
    dhv1 = np.outer(ds, w["wo"])
    dzv1 = dhv1 * (zv1 > 0)
    g["Wv1"] = hv0.T @ dzv1
    g["Wv2"] = mv.T @ dzv1
    g["bv1"] = dzv1.sum(axis=0)
    dhv0 = dzv1 @ w["Wv1"].T
    dmv = dzv1 @ w["Wv2"].T
    dhc1 = E @ dmv
    dzc1 = dhc1 * (zc1 > 0)
    g["Wc1"] = hc0.T @ dzc1
    g["Wc2"] = mc.T @ dzc1
    g["bc1"] = dzc1.sum(axis=0)
    dhc0 = dzc1 @ w["Wc1"].T
    dmc = dzc1 @ w["Wc2"].T
    dhv0 = dhv0 + E.T @ dmc
    dzv0 = dhv0 * (zv0 > 0)
    g["Wv"] = Xv.T @ dzv0
    g["bv"] = dzv0.sum(axis=0)
    dzc0 = dhc0 * (zc0 > 0)
    g["Wc"] = Xc.T @ dzc0
    g["bc"] = dzc0.sum(axis=0)
    return g


def _standardize(X: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (X - mean) / std


def score_graph(params: ScorerParams, graph: BipartiteGraph) -> np.ndarray:
    """Scores for every variable node (callers select their candidates)."""
    Xv = _standardize(graph.var_features, params.var_mean, params.var_std)
    Xc = _standardize(graph.con_features, params.con_mean, params.con_std)
    s, _ = _forward(params.weights, Xv, Xc, _edge_matrix(graph))
    return s


def _ordered_pairs(labels: dict[int, float]) -> list[tuple[int, int]]:
    items = sorted(labels.items())
    pairs = []
    for i in range(len(items)):
        for j in range(len(items)):
            if i == j:
                continue
            la, lb = items[i][1], items[j][1]
            if la > lb and not (math.isinf(la) and math.isinf(lb)):
                pairs.append((items[i][0], items[j][0]))
    return pairs


def pairwise_accuracy(params: ScorerParams, dataset) -> tuple[float, int]:
    """(fraction of correctly ordered candidate pairs, pair count)."""
    correct = 0
    total = 0
    for graph, labels in dataset:
        pairs = _ordered_pairs(labels)
        if not pairs:
            continue
        s = score_graph(params, graph)
        for a, b in pairs:
            total += 1
            if s[a] > s[b]:
                correct += 1
    return (correct / total if total else 0.0), total


def train_scorer(dataset, hidden: int = 16, lr: float = 0.01, epochs: int = 120,
                 margin: float = 1.0, val_fraction: float = 0.25,
                 rng_seed: int = 0) -> ScorerParams:
    """Fit scorer parameters on (graph, labels) pairs.

    Deterministic for a fixed rng_seed; reports final training loss and
    held-out pairwise ranking accuracy in `train_report`.
    """
    data = [(g, dict(lab)) for g, lab in dataset]
    usable = [(g, lab) for g, lab in data if _ordered_pairs(lab)]
    if not usable:
        raise DegenerateDataset("no strictly ordered candidate pairs in any graph")

    k = max(1, int(round(1.0 / val_fraction))) if val_fraction > 0 else 0
    train, val = [], []
    for idx, item in enumerate(usable):
        if k and len(usable) > 1 and idx % k == k - 1:
            val.append(item)
        else:
            train.append(item)
    if not train:
        train, val = usable, []

    var_stack = np.vstack([g.var_features for g, _ in train])
    con_stack = np.vstack([g.con_features for g, _ in train])
    var_mean = var_stack.mean(axis=0)
    var_std = np.maximum(var_stack.std(axis=0), 1e-6)
    con_mean = con_stack.mean(axis=0)
    con_std = np.maximum(con_stack.std(axis=0), 1e-6)

    rng = np.random.default_rng(rng_seed)
    w = _init_params(hidden, rng)
    mom = {k_: np.zeros_like(v) for k_, v in w.items()}
    vel = {k_: np.zeros_like(v) for k_, v in w.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    prep = []
    for g, lab in train:
        Xv = _standardize(g.var_features, var_mean, var_std)
        Xc = _standardize(g.con_features, con_mean, con_std)
        prep.append((Xv, Xc, _edge_matrix(g), _ordered_pairs(lab)))

    step = 0
    final_loss = math.inf
    for epoch in range(epochs):
        total_loss = 0.0
        total_pairs = 0
        for Xv, Xc, E, pairs in prep:
            s, cache = _forward(w, Xv, Xc, E)
            ds = np.zeros_like(s)
            loss = 0.0
            for a, b in pairs:
                h = margin - (s[a] - s[b])
                if h > 0:
                    loss += h
                    ds[a] -= 1.0
                    ds[b] += 1.0
            npairs = len(pairs)
            total_loss += loss
            total_pairs += npairs
            if npairs == 0:
                continue
            ds /= npairs
            grads = _backward(w, cache, ds)
            step += 1
            for key, gval in grads.items():
                mom[key] = beta1 * mom[key] + (1 - beta1) * gval
                vel[key] = beta2 * vel[key] + (1 - beta2) * gval * gval
                mhat = mom[key] / (1 - beta1 ** step)
                vhat = vel[key] / (1 - beta2 ** step)
                w[key] = w[key] - lr * mhat / (np.sqrt(vhat) + eps)
        final_loss = total_loss / max(total_pairs, 1)

    params = ScorerParams(weights=w, var_mean=var_mean, var_std=var_std,
                          con_mean=con_mean, con_std=con_std, hidden=hidden)
    acc, npairs = pairwise_accuracy(params, val if val else train)
    params.train_report = {
        "final_train_loss": final_loss,
        "holdout_pairwise_accuracy": acc,
        "holdout_pairs": float(npairs),
        "train_graphs": float(len(train)),
        "val_graphs": float(len(val)),
        "epochs": float(epochs),
    }
    return params
