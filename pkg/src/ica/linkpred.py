"""GCN link prediction over the symptom/root-cause bipartite graph.

The model runs one graph-convolution layer per side over the cluster
graphs (symmetric-normalized adjacency with self loops), a ReLU, and a
linear layer; a positive edge is scored against sampled negatives with a
softmax negative log likelihood on dot-product similarities. Gradients
are derived by hand so training stays auditable, single threaded and
bit-deterministic per seed. The same machinery serves symptom/resolution
prediction on a second task.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import ckg as ckgmod


class LinkPredError(ValueError):
    pass


@dataclass
class BipartiteTask:
    """Cluster graphs on both sides plus observed cross edges.

    Edges are index pairs: e_s within symptom_ids, e_r within target_ids,
    e_sr across. Initial node features are the graph embeddings.
    """

    symptom_ids: list[str]
    target_ids: list[str]
    e_s: list[tuple[int, int]]
    e_r: list[tuple[int, int]]
    e_sr: list[tuple[int, int]]
    x_s: np.ndarray
    x_r: np.ndarray
    kind: str = "rootcause"

    def __post_init__(self) -> None:
        self._m_s: np.ndarray | None = None
        self._m_r: np.ndarray | None = None

    @property
    def m_s(self) -> np.ndarray:
        if self._m_s is None:
            self._m_s = normalized_adjacency(len(self.symptom_ids), self.e_s) @ self.x_s
        return self._m_s

    @property
    def m_r(self) -> np.ndarray:
        if self._m_r is None:
            self._m_r = normalized_adjacency(len(self.target_ids), self.e_r) @ self.x_r
        return self._m_r


def normalized_adjacency(n: int, edges: list[tuple[int, int]]) -> sp.csr_matrix:
    """D^(-1/2) (A + I) D^(-1/2) for an undirected edge list."""
    rows = [i for i, _ in edges] + [j for _, j in edges] + list(range(n))
    cols = [j for _, j in edges] + [i for i, _ in edges] + list(range(n))
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    deg = np.asarray(A.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    return sp.diags(dinv) @ A @ sp.diags(dinv)


def task_from_graph(graph: "ckgmod.CausalKnowledgeGraph", kind: str) -> BipartiteTask:
    """Assemble a task from a clustered knowledge graph."""
    leaf_type = ckgmod._LEAF_OF_KIND[kind]
    observed = ckgmod._OBSERVED_OF_KIND[kind]
    symptoms = sorted(graph.nodes_of_type(ckgmod.SYMPTOM), key=lambda n: n.node_id)
    targets = sorted(graph.nodes_of_type(leaf_type), key=lambda n: n.node_id)
    if not symptoms or not targets:
        raise LinkPredError(f"graph has no {kind} bipartite structure")
    s_index = {n.node_id: i for i, n in enumerate(symptoms)}
    t_index = {n.node_id: i for i, n in enumerate(targets)}
    e_s, e_r, e_sr = [], [], []
    for e in graph.edges:
        if e.edge_type == ckgmod.SIBLING:
            if e.src in s_index and e.dst in s_index:
                e_s.append((s_index[e.src], s_index[e.dst]))
            elif e.src in t_index and e.dst in t_index:
                e_r.append((t_index[e.src], t_index[e.dst]))
        elif e.edge_type == observed and e.src in s_index and e.dst in t_index:
            e_sr.append((s_index[e.src], t_index[e.dst]))
    return BipartiteTask(
        symptom_ids=[n.node_id for n in symptoms],
        target_ids=[n.node_id for n in targets],
        e_s=e_s, e_r=e_r, e_sr=sorted(set(e_sr)),
        x_s=np.stack([n.embedding for n in symptoms]),
        x_r=np.stack([n.embedding for n in targets]),
        kind=kind,
    )


def augment_noisy_edges(e_s: list[tuple[int, int]], e_r: list[tuple[int, int]],
                        e_sr: list[tuple[int, int]], n_targets: int,
                        include_endpoints: bool = False) -> list[tuple[int, int]]:
    """Noisy cross edges from one-hop cluster moves on both sides.

    For every observed (k, l), pairs (i, j) with i a sibling of k and j a
    sibling of l, minus the observed edges. `include_endpoints` relaxes
    the hop to sibling-or-self on each side.
    """
    sib_s: dict[int, set[int]] = {}
    sib_r: dict[int, set[int]] = {}
    for i, j in e_s:
        sib_s.setdefault(i, set()).add(j)
        sib_s.setdefault(j, set()).add(i)
    for i, j in e_r:
        sib_r.setdefault(i, set()).add(j)
        sib_r.setdefault(j, set()).add(i)

    chunks = []
    for k, l in e_sr:
        left = sib_s.get(k, set())
        right = sib_r.get(l, set())
        if include_endpoints:
            left = left | {k}
            right = right | {l}
        if not left or not right:
            continue
        li = np.fromiter(left, dtype=np.int64)
        rj = np.fromiter(right, dtype=np.int64)
        chunks.append((li[:, None] * n_targets + rj[None, :]).ravel())
    if not chunks:
        return []
    codes = np.unique(np.concatenate(chunks))
    true_codes = {i * n_targets + j for i, j in e_sr}
    return sorted(
        (int(c) // n_targets, int(c) % n_targets)
        for c in codes if int(c) not in true_codes
    )


@dataclass
class ModelConfig:
    d: int
    h: int = 0
    n_negatives: int = 10
    learning_rate: float = 0.05
    epochs: int = 200
    patience: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.h <= 0:
            self.h = self.d
        if self.n_negatives < 1:
            raise LinkPredError("n_negatives must be >= 1")


PARAM_NAMES = ("w_gs", "b_gs", "w_ls", "b_ls", "w_gr", "b_gr", "w_lr", "b_lr")


@dataclass
class LinkPredictionModel:
    config: ModelConfig
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


def init_model(config: ModelConfig) -> LinkPredictionModel:
    rng = np.random.default_rng(config.seed)
    d, h = config.d, config.h
    params = {
        "w_gs": rng.normal(0, 1.0 / math.sqrt(d), (d, h)),
        "b_gs": np.zeros(h),
        "w_ls": rng.normal(0, 1.0 / math.sqrt(h), (h, h)),
        "b_ls": np.zeros(h),
        "w_gr": rng.normal(0, 1.0 / math.sqrt(d), (d, h)),
        "b_gr": np.zeros(h),
        "w_lr": rng.normal(0, 1.0 / math.sqrt(h), (h, h)),
        "b_lr": np.zeros(h),
    }
    return LinkPredictionModel(config, params)


def _side_forward(m: np.ndarray, w_g, b_g, w_l, b_l) -> np.ndarray:
    return np.maximum(m @ w_g + b_g, 0.0) @ w_l + b_l


def forward(model: LinkPredictionModel, task: BipartiteTask) -> tuple[np.ndarray, np.ndarray]:
    """Full node representations: Linear(ReLU(GCN(X, E))) per side."""
    p = model.params
    if task.x_s.shape[1] != model.config.d:
        raise LinkPredError(
            f"dimension mismatch: task d={task.x_s.shape[1]}, model d={model.config.d}")
    xs = _side_forward(task.m_s, p["w_gs"], p["b_gs"], p["w_ls"], p["b_ls"])
    xr = _side_forward(task.m_r, p["w_gr"], p["b_gr"], p["w_lr"], p["b_lr"])
    return xs, xr


def example_loss(model: LinkPredictionModel, m_s_row: np.ndarray,
                 m_r_rows: np.ndarray, pos_index: int) -> float:
    """Softmax NLL of the positive pair among the given target rows."""
    p = model.params
    x_s = _side_forward(m_s_row[None, :], p["w_gs"], p["b_gs"], p["w_ls"], p["b_ls"])[0]
    x_r = _side_forward(m_r_rows, p["w_gr"], p["b_gr"], p["w_lr"], p["b_lr"])
    scores = x_r @ x_s
    m = scores.max()
    logsum = m + math.log(np.exp(scores - m).sum())
    return float(logsum - scores[pos_index])


def example_loss_and_grads(model: LinkPredictionModel, m_s_row: np.ndarray,
                           m_r_rows: np.ndarray, pos_index: int
                           ) -> tuple[float, dict[str, np.ndarray]]:
    p = model.params
    a_s = m_s_row @ p["w_gs"] + p["b_gs"]
    h_s = np.maximum(a_s, 0.0)
    x_s = h_s @ p["w_ls"] + p["b_ls"]
    a_r = m_r_rows @ p["w_gr"] + p["b_gr"]
    h_r = np.maximum(a_r, 0.0)
    x_r = h_r @ p["w_lr"] + p["b_lr"]

    scores = x_r @ x_s
    m = scores.max()
    exp = np.exp(scores - m)
    probs = exp / exp.sum()
    loss = float(m + math.log(exp.sum()) - scores[pos_index])

    dz = probs.copy()
    dz[pos_index] -= 1.0
    dx_s = dz @ x_r
    dx_r = np.outer(dz, x_s)

    dh_s = dx_s @ p["w_ls"].T
    da_s = dh_s * (a_s > 0)
    dh_r = dx_r @ p["w_lr"].T
    da_r = dh_r * (a_r > 0)

    grads = {
        "w_ls": np.outer(h_s, dx_s),
        "b_ls": dx_s,
        "w_gs": np.outer(m_s_row, da_s),
        "b_gs": da_s,
        "w_lr": h_r.T @ dx_r,
        "b_lr": dx_r.sum(axis=0),
        "w_gr": m_r_rows.T @ da_r,
        "b_gr": da_r.sum(axis=0),
    }
    return loss, grads


def loss(model: LinkPredictionModel, task: BipartiteTask,
         positive_edge: tuple[int, int], negatives: list[int]) -> float:
    """Loss for one observed edge against explicit negative target indices."""
    if not negatives:
        raise LinkPredError("at least one negative is required")
    i, j = positive_edge
    rows = np.concatenate(([j], negatives)).astype(int)
    return example_loss(model, task.m_s[i], task.m_r[rows], 0)


# --- sampling plans ---------------------------------------------------------

@dataclass
class SamplingPlan:
    mode: str
    x_percent: float
    seed: int
    train_edges: list[tuple[int, int]]
    val_edges: list[tuple[int, int]]
    test_edges: list[tuple[int, int]]
    noisy_edges: list[tuple[int, int]]
    val_negatives: list[list[int]] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "mode": self.mode, "x_percent": self.x_percent, "seed": self.seed,
            "n_train": len(self.train_edges), "n_val": len(self.val_edges),
            "n_test": len(self.test_edges), "n_noisy": len(self.noisy_edges),
        }


def _forbidden_by_symptom(e_sr, noisy) -> dict[int, set[int]]:
    forbidden: dict[int, set[int]] = {}
    for i, j in list(e_sr) + list(noisy):
        forbidden.setdefault(i, set()).add(j)
    return forbidden


def _sample_negatives(rng: np.random.Generator, n_targets: int,
                      forbidden: set[int], n: int) -> list[int]:
    allowed = np.setdiff1d(np.arange(n_targets), np.fromiter(forbidden, dtype=int, count=len(forbidden)))
    if allowed.size == 0:
        return []
    take = min(n, allowed.size)
    return rng.choice(allowed, size=take, replace=False).tolist()


def make_plan(task: BipartiteTask, mode: str, x_percent: float, seed: int,
              n_negatives: int = 10,
              include_endpoints: bool = False) -> SamplingPlan:
    """All-edge or noisy-edge sampling with a 70/30 train/validation split.

    Sample sizes round up so tiny graphs stay trainable. Noisy-edge plans
    keep every true edge as test data.
    """
    if mode not in ("all", "noisy"):
        raise LinkPredError(f"unknown sampling mode {mode!r}")
    rng = np.random.default_rng(seed)
    noisy = augment_noisy_edges(task.e_s, task.e_r, task.e_sr,
                                len(task.target_ids), include_endpoints)
    true_edges = list(task.e_sr)

    def pick(pool: list[tuple[int, int]], count: int) -> list[tuple[int, int]]:
        if not pool:
            return []
        idx = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
        return [pool[i] for i in sorted(idx)]

    if mode == "all":
        n_true = max(1, math.ceil(x_percent / 100.0 * len(true_edges)))
        sampled_true = pick(true_edges, n_true)
        sampled_noisy = []
        if noisy:
            n_noisy = max(1, math.ceil(x_percent / 100.0 * len(noisy)))
            sampled_noisy = pick(noisy, n_noisy)
        pool = sampled_true + sampled_noisy
        test = sorted(set(true_edges) - set(sampled_true))
    else:
        if not noisy:
            raise LinkPredError("noisy-edge sampling requires noisy edges")
        n_noisy = max(1, math.ceil(x_percent / 100.0 * len(noisy)))
        pool = pick(noisy, n_noisy)
        test = list(true_edges)

    order = rng.permutation(len(pool))
    n_train = max(1, round(0.7 * len(pool)))
    train = [pool[i] for i in order[:n_train]]
    val = [pool[i] for i in order[n_train:]]

    forbidden = _forbidden_by_symptom(task.e_sr, noisy)
    val_negatives = [
        _sample_negatives(rng, len(task.target_ids), forbidden.get(i, set()), n_negatives)
        for i, _ in val
    ]
    return SamplingPlan(mode, x_percent, seed, train, val, test, noisy, val_negatives)


# --- training ----------------------------------------------------------------

def _validation_loss(model: LinkPredictionModel, task: BipartiteTask,
                     plan: SamplingPlan) -> float:
    if not plan.val_edges:
        return float("nan")
    xs, xr = forward(model, task)
    total, used = 0.0, 0
    for (i, j), negatives in zip(plan.val_edges, plan.val_negatives):
        if not negatives:
            continue
        scores = np.concatenate(([xs[i] @ xr[j]], xr[negatives] @ xs[i]))
        m = scores.max()
        total += m + math.log(np.exp(scores - m).sum()) - scores[0]
        used += 1
    return total / used if used else float("nan")


def train(task: BipartiteTask, plan: SamplingPlan, config: ModelConfig
          ) -> tuple[LinkPredictionModel, dict]:
    """Seeded SGD over shuffled train edges with per-edge negative resampling.

    Keeps the weights with the best validation loss and stops early after
    `patience` epochs without improvement.
    """
    if not plan.train_edges:
        raise LinkPredError("sampling plan has no training edges")
    model = init_model(config)
    rng = np.random.default_rng(config.seed)
    forbidden = _forbidden_by_symptom(task.e_sr, plan.noisy_edges)
    m_s, m_r = task.m_s, task.m_r
    lr = config.learning_rate

    best_params = model.copy_params()
    best_val = math.inf
    best_epoch = 0
    train_curve: list[float] = []
    val_curve: list[float] = []
    epochs_run = 0
    for epoch in range(config.epochs):
        epochs_run = epoch + 1
        order = rng.permutation(len(plan.train_edges))
        epoch_loss, used = 0.0, 0
        for t in order:
            i, j = plan.train_edges[t]
            negatives = _sample_negatives(rng, len(task.target_ids),
                                          forbidden.get(i, set()), config.n_negatives)
            if not negatives:
                continue
            rows = np.concatenate(([j], negatives)).astype(int)
            step_loss, grads = example_loss_and_grads(model, m_s[i], m_r[rows], 0)
            for name, g in grads.items():
                model.params[name] -= lr * g
            epoch_loss += step_loss
            used += 1
        if not math.isfinite(epoch_loss):
            model.params = best_params
            train_curve.append(float("inf"))
            break
        train_curve.append(epoch_loss / used if used else float("nan"))
        val = _validation_loss(model, task, plan)
        val_curve.append(val)
        reference = val if not math.isnan(val) else train_curve[-1]
        if reference < best_val - 1e-12:
            best_val = reference
            best_params = model.copy_params()
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    model.params = best_params
    report = {
        "train_curve": train_curve,
        "val_curve": val_curve,
        "best_epoch": best_epoch,
        "best_val_loss": None if math.isinf(best_val) else best_val,
        "epochs_run": epochs_run,
        "plan": plan.summary(),
    }
    return model, report


def predict(model: LinkPredictionModel, task: BipartiteTask,
            symptom_node_id: str, k: int) -> list[tuple[str, float]]:
    """Top-k targets by dot-product similarity; ties break by node id."""
    try:
        i = task.symptom_ids.index(symptom_node_id)
    except ValueError:
        raise LinkPredError(f"unknown symptom node {symptom_node_id!r}") from None
    xs, xr = forward(model, task)
    scores = xr @ xs[i]
    order = np.argsort(-scores, kind="stable")[:k]
    return [(task.target_ids[t], float(scores[t])) for t in order]


# --- persistence -------------------------------------------------------------

def save_checkpoint(model: LinkPredictionModel, task: BipartiteTask,
                    plan: SamplingPlan, report: dict, path: str) -> None:
    payload = {
        "config": asdict(model.config),
        "weights": {k: v.tolist() for k, v in model.params.items()},
        "symptom_ids": task.symptom_ids,
        "target_ids": task.target_ids,
        "kind": task.kind,
        "plan": plan.summary(),
        "report": report,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_checkpoint(path: str) -> tuple[LinkPredictionModel, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    config = ModelConfig(**payload["config"])
    params = {k: np.array(v) for k, v in payload["weights"].items()}
    meta = {k: payload[k] for k in ("symptom_ids", "target_ids", "kind", "plan", "report")}
    return LinkPredictionModel(config, params), meta
