"""Client/server orchestration: local adapter training, sample-weighted
adapter-only aggregation, the round loop with validation-based model
selection, and exact communication accounting.

Only adapter parameters ever travel between clients and server; optimizer
moments stay on their client for the whole run. Clients run sequentially in
a fixed order with private RNG streams, so results do not depend on any
scheduling and identical configs reproduce bit-identical histories.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .adapter import AdapterParams, flatten, init_adapter, parameter_count, unflatten
from .data import FeatureDataset, SplitDataset, make_batches, split_60_20_20
from .errors import ConfigError, FormatError, ParameterError, ShapeError
from .evaluation import accuracy, predict
from .loss import DEFAULT_SCALE, loss_and_grad
from .optim import AdamState, adam_step, apply_prox, init_adam

# Each exchanged parameter costs 4 bytes on the wire (32-bit storage).
BYTES_PER_PARAM = 4
# Trainable-parameter count of fully fine-tuning both frozen encoders,
# used only as the denominator-free reference for cost ratios.
DEFAULT_REFERENCE_FULL_MODEL_PARAMS = 150_000_000

ALGORITHMS = ("fedclip", "fedprox-adapter", "local-only", "zero-shot")

# Stream tags for deriving independent per-purpose RNG streams from one seed.
_STREAM_INIT = 1
_STREAM_SPLIT = 2
_STREAM_BATCH = 3


def derived_rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *tags]))


@dataclass
class ClientState:
    """One participating client: its data, splits, adapter, optimizer state,
    and private RNG stream. Owned and mutated only by its own update loop."""

    client_id: int
    name: str
    dataset: FeatureDataset
    split: SplitDataset
    adapter: AdapterParams
    opt_state: AdamState
    rng: np.random.Generator

    @property
    def n_train(self) -> int:
        return int(self.split.train.size)


@dataclass(frozen=True)
class RoundReport:
    round_index: int
    client_val_accuracies: tuple[float, ...]
    mean_val_accuracy: float
    uploaded_bytes: int
    downloaded_bytes: int
    best_so_far: bool


@dataclass
class CommLedger:
    """Exact byte accounting of what crossed the wire, plus the reference
    full-model size for cost-ratio reporting."""

    adapter_params: int
    reference_full_model_params: int = DEFAULT_REFERENCE_FULL_MODEL_PARAMS
    per_round_uploaded: list[int] = field(default_factory=list)
    per_round_downloaded: list[int] = field(default_factory=list)

    def record_round(self, uploaded: int, downloaded: int) -> None:
        self.per_round_uploaded.append(uploaded)
        self.per_round_downloaded.append(downloaded)

    @property
    def total_uploaded(self) -> int:
        return sum(self.per_round_uploaded)

    @property
    def total_downloaded(self) -> int:
        return sum(self.per_round_downloaded)

    @property
    def compression_ratio(self) -> float:
        return self.reference_full_model_params / self.adapter_params

    def as_dict(self) -> dict:
        return {
            "adapter_params": self.adapter_params,
            "reference_full_model_params": self.reference_full_model_params,
            "rounds": len(self.per_round_uploaded),
            "uploaded_bytes": self.total_uploaded,
            "downloaded_bytes": self.total_downloaded,
            "bytes_per_round": (
                self.per_round_uploaded[0] + self.per_round_downloaded[0]
                if self.per_round_uploaded else 0
            ),
            "compression_ratio": self.compression_ratio,
        }


def make_client(client_id: int, dataset: FeatureDataset, seed: int,
                lr: float, d: int) -> ClientState:
    """Split the client's data and set up its optimizer and RNG stream.
    Splits depend only on (seed, client_id), never on the algorithm."""
    split = split_60_20_20(
        dataset.n_samples, np.random.SeedSequence([int(seed), _STREAM_SPLIT, client_id]))
    placeholder = unflatten(np.zeros(parameter_count(d)), d)
    return ClientState(
        client_id=client_id,
        name=dataset.domain_name,
        dataset=dataset,
        split=split,
        adapter=placeholder,
        opt_state=init_adam(parameter_count(d), lr=lr),
        rng=derived_rng(seed, _STREAM_BATCH, client_id),
    )


def client_local_update(client: ClientState, global_adapter: AdapterParams,
                        epochs: int, batch_size: int, mu: float,
                        s: float = DEFAULT_SCALE) -> AdapterParams:
    """Replace the client's adapter with the distributed one, then run E
    epochs of batched Adam steps on the contrastive loss. When mu > 0 the
    gradient gets a proximal pull toward the adapter received this round."""
    ds = client.dataset
    d = ds.feature_dim
    if global_adapter.feature_dim != d:
        raise ShapeError(
            f"global adapter dim {global_adapter.feature_dim} != data dim {d}")
    if epochs < 1:
        raise ParameterError(f"epochs must be >= 1, got {epochs}")
    if client.split.train.size == 0:
        raise ConfigError(f"client {client.name} has an empty train split")

    anchor = flatten(global_adapter)
    params = anchor.copy()
    for _ in range(epochs):
        for batch in make_batches(client.split.train, batch_size, client.rng):
            feats = ds.features[batch]
            texts = ds.class_text_features[ds.labels[batch]]
            result = loss_and_grad(unflatten(params, d), feats, texts, s)
            grad = apply_prox(result.grad, params, anchor, mu) if mu > 0 else result.grad
            client.opt_state, params = adam_step(client.opt_state, params, grad)
    client.adapter = unflatten(params, d)
    return client.adapter


def aggregate(params: list[np.ndarray], weights: list[int]) -> np.ndarray:
    """Sample-count-weighted mean of flat parameter vectors, accumulated in
    client-index order in 64-bit arithmetic."""
    if not params:
        raise ShapeError("nothing to aggregate")
    if len(params) != len(weights):
        raise ShapeError(f"{len(params)} parameter vectors but {len(weights)} weights")
    vecs = [np.asarray(p, dtype=np.float64) for p in params]
    length = vecs[0].shape
    if any(v.shape != length for v in vecs):
        raise ShapeError("parameter vectors have differing lengths")
    if any(w < 1 for w in weights):
        raise ParameterError(f"weights must be >= 1, got {weights}")
    if all(np.array_equal(v, vecs[0]) for v in vecs[1:]):
        # Exact passthrough when every client agrees; keeps the convex-
        # combination identity tight instead of accumulating rounding.
        return vecs[0].copy()
    total = float(sum(weights))
    out = np.zeros_like(vecs[0])
    for vec, w in zip(vecs, weights):
        out += (w / total) * vec
    return out


def run_round(clients: list[ClientState], global_adapter: AdapterParams,
              round_index: int, epochs: int, batch_size: int, mu: float,
              s: float = DEFAULT_SCALE,
              best_mean_so_far: float = -np.inf) -> tuple[AdapterParams, RoundReport]:
    """One communication round: distribute, locally update every client,
    aggregate by train-sample count, and validate the aggregated adapter."""
    if not clients:
        raise ConfigError("need at least one participating client")
    updated = [
        client_local_update(c, global_adapter, epochs, batch_size, mu, s)
        for c in clients
    ]
    new_global = unflatten(
        aggregate([flatten(u) for u in updated], [c.n_train for c in clients]),
        global_adapter.feature_dim,
    )
    val_accs = tuple(
        _validation_accuracy(c, new_global, s) for c in clients
    )
    mean_val = float(np.mean(val_accs))
    n_bytes = len(clients) * parameter_count(global_adapter.feature_dim) * BYTES_PER_PARAM
    report = RoundReport(
        round_index=round_index,
        client_val_accuracies=val_accs,
        mean_val_accuracy=mean_val,
        uploaded_bytes=n_bytes,
        downloaded_bytes=n_bytes,
        best_so_far=mean_val > best_mean_so_far,
    )
    return new_global, report


def _validation_accuracy(client: ClientState, adapter: AdapterParams | None,
                         s: float) -> float:
    ds = client.dataset
    idx = client.split.valid
    pred = predict(adapter, ds.features[idx], ds.class_text_features, s)
    return accuracy(pred, ds.labels[idx])


@dataclass
class TrainedRun:
    """Everything a finished run produced: the selected adapter(s), the full
    round history, the communication ledger, and the clients themselves."""

    algorithm: str
    seed: int
    feature_dim: int
    scale: float
    best_round: int                                   # -1 if no round ran
    best_adapter: AdapterParams | None                # shared model, if any
    best_client_adapters: list[AdapterParams] | None  # local-only selection
    initial_adapter: AdapterParams | None
    history: list[RoundReport]
    ledger: CommLedger
    clients: list[ClientState]

    def client_models(self, clients) -> list[AdapterParams | None]:
        """Model each client is evaluated with: the shared adapter, or its
        own one under local-only, or nothing under zero-shot."""
        if self.algorithm == "zero-shot":
            return [None] * len(clients)
        if self.algorithm == "local-only":
            return list(self.best_client_adapters)
        return [self.best_adapter] * len(clients)

    def generalization_models(self) -> list[AdapterParams | None]:
        """Models whose target-domain accuracies get averaged: one shared
        adapter normally, every client's own adapter under local-only."""
        if self.algorithm == "zero-shot":
            return [None]
        if self.algorithm == "local-only":
            return list(self.best_client_adapters)
        return [self.best_adapter]


def run_federation(datasets: list[FeatureDataset], *, algorithm: str = "fedclip",
                   lr: float = 5e-4, batch_size: int = 32, local_epochs: int = 1,
                   rounds: int = 200, scale: float = DEFAULT_SCALE, mu: float = 0.01,
                   seed: int = 0,
                   reference_full_model_params: int = DEFAULT_REFERENCE_FULL_MODEL_PARAMS,
                   ) -> TrainedRun:
    """Train for ``rounds`` communication rounds and keep the adapter with
    the best mean validation accuracy (ties resolve to the earlier round).

    ``datasets`` are the participating clients. With rounds=0, or under
    zero-shot, the initialized adapter (whose predictions match the raw
    features) is what comes back.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")
    if not datasets:
        raise ConfigError("need at least one participating client dataset")
    if rounds < 0:
        raise ConfigError(f"rounds must be >= 0, got {rounds}")
    if local_epochs < 1:
        raise ConfigError(f"local_epochs must be >= 1, got {local_epochs}")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if lr < 0:
        raise ConfigError(f"lr must be >= 0, got {lr}")
    d = datasets[0].feature_dim
    for ds in datasets:
        if ds.feature_dim != d:
            raise ConfigError(
                f"feature dims differ: {ds.domain_name} has {ds.feature_dim}, expected {d}")
        if ds.n_classes < 2:
            raise ConfigError(f"{ds.domain_name} has {ds.n_classes} classes; need >= 2")

    clients = [make_client(i, ds, seed, lr, d) for i, ds in enumerate(datasets)]
    ledger = CommLedger(adapter_params=parameter_count(d),
                        reference_full_model_params=reference_full_model_params)
    initial = init_adapter(d, derived_rng(seed, _STREAM_INIT))

    if algorithm == "zero-shot":
        return TrainedRun(
            algorithm=algorithm, seed=seed, feature_dim=d, scale=scale,
            best_round=-1, best_adapter=None, best_client_adapters=None,
            initial_adapter=initial, history=[], ledger=ledger, clients=clients,
        )

    effective_mu = mu if algorithm == "fedprox-adapter" else 0.0
    global_adapter = initial
    for c in clients:
        c.adapter = initial

    history: list[RoundReport] = []
    best_mean = -np.inf
    best_round = -1
    best_adapter = initial
    best_client_adapters = [initial] * len(clients)

    for r in range(rounds):
        if algorithm == "local-only":
            for c in clients:
                client_local_update(c, c.adapter, local_epochs, batch_size,
                                    effective_mu, scale)
            val_accs = tuple(
                _validation_accuracy(c, c.adapter, scale) for c in clients
            )
            mean_val = float(np.mean(val_accs))
            report = RoundReport(
                round_index=r, client_val_accuracies=val_accs,
                mean_val_accuracy=mean_val, uploaded_bytes=0, downloaded_bytes=0,
                best_so_far=mean_val > best_mean,
            )
        else:
            global_adapter, report = run_round(
                clients, global_adapter, r, local_epochs, batch_size,
                effective_mu, scale, best_mean_so_far=best_mean,
            )
        history.append(report)
        ledger.record_round(report.uploaded_bytes, report.downloaded_bytes)
        if report.best_so_far:
            best_mean = report.mean_val_accuracy
            best_round = r
            best_adapter = global_adapter
            best_client_adapters = [c.adapter for c in clients]

    return TrainedRun(
        algorithm=algorithm, seed=seed, feature_dim=d, scale=scale,
        best_round=best_round,
        best_adapter=None if algorithm == "local-only" else best_adapter,
        best_client_adapters=best_client_adapters if algorithm == "local-only" else None,
        initial_adapter=initial, history=history, ledger=ledger, clients=clients,
    )


# ---------------------------------------------------------------------------
# checkpoint file: flat adapter + dim + selected round + config hash

CKPT_MAGIC = b"FCK1"
CKPT_VERSION = 1


def save_checkpoint(path, adapter: AdapterParams, round_index: int,
                    config_hash: str) -> None:
    """Little-endian, like the feature format: magic, version u32, d u32,
    round i32, hash (u16 length + UTF-8), then the flat params as float64."""
    raw_hash = config_hash.encode("utf-8")
    payload = b"".join([
        CKPT_MAGIC,
        struct.pack("<IIi", CKPT_VERSION, adapter.feature_dim, round_index),
        struct.pack("<H", len(raw_hash)),
        raw_hash,
        flatten(adapter).astype("<f8").tobytes(),
    ])
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> tuple[AdapterParams, int, str]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CKPT_MAGIC:
        raise FormatError(f"bad checkpoint magic {data[:4]!r}", offset=0)
    if len(data) < 18:
        raise FormatError("truncated checkpoint header", offset=len(data))
    version, d, round_index = struct.unpack("<IIi", data[4:16])
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    hash_len = struct.unpack("<H", data[16:18])[0]
    pos = 18 + hash_len
    if len(data) < pos:
        raise FormatError("truncated config hash", offset=18)
    config_hash = data[18:pos].decode("utf-8")
    expected = parameter_count(d) * 8
    if len(data) - pos != expected:
        raise FormatError(
            f"parameter payload is {len(data) - pos} bytes, expected {expected}",
            offset=pos)
    vec = np.frombuffer(data[pos:], dtype="<f8").astype(np.float64)
    return unflatten(vec, d), round_index, config_hash
