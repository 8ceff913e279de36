"""Single-layer SNN: sample presentation, teacher-driven training, active
learning expansion, classification, and the model file format.

Neuron i carries class label i % 10, so every block of 10 neurons covers all
digits.  Weight rows are packed 64 synapses per word (see core.py).  Every
presentation starts from a zero membrane; only weights and the LFSR carry
state between samples, which keeps evaluation read-only and parallelizable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import core, encoding
from .core import LifParams
from ._kernels import present_kernel

MODEL_MAGIC = b"WQ22"
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sHHIIiii")  # magic, version, n_neurons, n_synapses, w_exp, vth, leak, w_inc

TRAIN = "train"
TEST = "test"


@dataclass
class PresentationConfig:
    t_steps: int = 256
    i_teach: int = 384
    i_inhibit: int = 1024
    mode: str = TEST

    def __post_init__(self):
        if self.t_steps < 1:
            raise ValueError("t_steps must be >= 1")
        if self.i_teach <= 0:
            raise ValueError("i_teach must be positive")
        if self.i_inhibit < 0:
            raise ValueError("i_inhibit must be non-negative")
        if self.mode not in (TRAIN, TEST):
            raise ValueError(f"mode must be {TRAIN!r} or {TEST!r}")


@dataclass
class Network:
    weights: np.ndarray       # (n_neurons, n_segments) uint64, padding bits zero
    neuron_class: np.ndarray  # (n_neurons,) uint8, i % 10
    lif: LifParams
    w_exp: int
    lfsr: int
    n_synapses: int
    v_mem: np.ndarray = field(default=None)  # final membranes of the last presentation

    def __post_init__(self):
        if self.v_mem is None:
            self.v_mem = np.zeros(self.n_neurons, dtype=np.int64)

    @property
    def n_neurons(self) -> int:
        return self.weights.shape[0]

    @property
    def n_segments(self) -> int:
        return self.weights.shape[1]


def new_network(n_neurons: int, lif: LifParams = LifParams(), w_exp: int = 256,
                lfsr: int = 0xACE1, n_synapses: int = core.VECTOR_BITS) -> Network:
    """Fresh all-zero-weight network; the teacher current bootstraps LTP."""
    if n_neurons < 1:
        raise ValueError("need at least one neuron")
    if w_exp <= 0:
        raise ValueError("w_exp must be positive")
    weights = np.zeros((n_neurons, core.segment_count(n_synapses)), dtype=np.uint64)
    classes = (np.arange(n_neurons) % 10).astype(np.uint8)
    return Network(weights=weights, neuron_class=classes, lif=lif, w_exp=w_exp,
                   lfsr=core.lfsr_seed(lfsr), n_synapses=n_synapses)


def row_on_counts(net: Network) -> np.ndarray:
    """Per-neuron count of retained (on) synapses."""
    return np.bitwise_count(net.weights).sum(axis=1).astype(np.int64)


def teacher_currents(net: Network, label: int | None, cfg: PresentationConfig,
                     plastic: np.ndarray) -> np.ndarray:
    """Per-neuron external current for one presentation.

    Training drives the labeled class's plastic neurons with +i_teach and
    pushes the other plastic neurons down with -i_inhibit; already-trained
    (non-plastic) neurons and all test-mode presentations run teacher-free.
    """
    iext = np.zeros(net.n_neurons, dtype=np.int64)
    if cfg.mode == TRAIN:
        match = net.neuron_class == label
        iext[plastic & match] = cfg.i_teach
        iext[plastic & ~match] = -cfg.i_inhibit
    return iext


def _plastic_mask(net: Network, plastic) -> np.ndarray:
    if plastic is None:
        return np.ones(net.n_neurons, dtype=np.uint8)
    mask = np.zeros(net.n_neurons, dtype=np.uint8)
    start, stop = plastic
    if not 0 <= start < stop <= net.n_neurons:
        raise ValueError(f"plastic range {plastic} out of bounds for {net.n_neurons} neurons")
    mask[start:stop] = 1
    return mask


def present_schedule(net: Network, schedule: np.ndarray, label: int | None,
                     cfg: PresentationConfig, plastic=None) -> np.ndarray:
    """Present one precomputed spike schedule (t_steps, n_segments).

    Returns per-neuron spike counts.  Train mode mutates the plastic rows
    and the network LFSR; test mode leaves both bit-identical.
    """
    train = cfg.mode == TRAIN
    if train and label is None:
        raise ValueError("train mode requires a label")
    plastic_mask = _plastic_mask(net, plastic)
    iext = teacher_currents(net, label, cfg, plastic_mask.astype(bool))
    counts = np.zeros(net.n_neurons, dtype=np.int64)
    net.v_mem = np.zeros(net.n_neurons, dtype=np.int64)
    lfsr = present_kernel(schedule, net.weights, net.v_mem, counts, iext, plastic_mask,
                          net.lif.v_threshold, net.lif.leak, net.lif.w_inc,
                          train, np.uint64(net.lfsr), net.w_exp)
    net.lfsr = int(lfsr)
    return counts


def present_sample(net: Network, image: np.ndarray, label: int | None,
                   cfg: PresentationConfig, rng: encoding.EncoderRng,
                   plastic=None) -> np.ndarray:
    """Encode a (preprocessed) grayscale image and present it for t_steps."""
    norm = encoding.normalize(image).reshape(-1)
    if norm.shape[0] != net.n_synapses:
        raise ValueError(f"image has {norm.shape[0]} pixels, network expects {net.n_synapses}")
    schedule, _ = encoding.encode_schedule(norm, rng, cfg.t_steps)
    return present_schedule(net, schedule, label, cfg, plastic)


def classify(counts: np.ndarray, neuron_class: np.ndarray) -> int:
    """Class of the most active neuron; ties go to the lowest index."""
    return int(neuron_class[int(np.argmax(counts))])


def train_pass(net: Network, images: np.ndarray, labels: np.ndarray,
               cfg: PresentationConfig, plastic_range: tuple[int, int],
               encoder_seed: int, indices=None) -> None:
    """One pass over (images, labels) in order, training one neuron block.

    Per-sample encoder streams derive from encoder_seed XOR the sample's
    index; pass the original dataset indices when training on a subset so
    streams stay stable across stages.
    """
    train_cfg = PresentationConfig(cfg.t_steps, cfg.i_teach, cfg.i_inhibit, TRAIN)
    if indices is None:
        indices = np.arange(len(images))
    for idx in indices:
        rng = encoding.sample_rng(encoder_seed, int(idx))
        present_sample(net, images[idx], int(labels[idx]), train_cfg, rng,
                       plastic=plastic_range)


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray        # (10, 10) label x predicted
    predictions: np.ndarray      # (n_samples,)
    counts: np.ndarray           # (n_samples, n_neurons) spike tallies
    indices: np.ndarray          # dataset indices evaluated, in order


def evaluate(net: Network, images: np.ndarray, labels: np.ndarray,
             cfg: PresentationConfig, encoder_seed: int, indices=None,
             n_active: int | None = None) -> EvalResult:
    """Test-mode sweep: accuracy and confusion counts, network untouched.

    n_active restricts classification to the first n_active neurons (used
    while later blocks are still untrained); spike counts are still recorded
    for every neuron.
    """
    if cfg.mode != TEST:
        raise ValueError("evaluate requires a test-mode config")
    if indices is None:
        indices = np.arange(len(images))
    indices = np.asarray(indices)
    if indices.size == 0:
        raise ValueError("cannot evaluate an empty sample set")
    if n_active is None:
        n_active = net.n_neurons
    all_counts = np.zeros((indices.size, net.n_neurons), dtype=np.int64)
    predictions = np.zeros(indices.size, dtype=np.int64)
    confusion = np.zeros((10, 10), dtype=np.int64)
    correct = 0
    for row, idx in enumerate(indices):
        rng = encoding.sample_rng(encoder_seed, int(idx))
        counts = present_sample(net, images[idx], None, cfg, rng)
        pred = classify(counts[:n_active], net.neuron_class[:n_active])
        all_counts[row] = counts
        predictions[row] = pred
        confusion[int(labels[idx]), pred] += 1
        correct += pred == int(labels[idx])
    return EvalResult(accuracy=correct / indices.size, confusion=confusion,
                      predictions=predictions, counts=all_counts, indices=indices)


def active_learning_round(net: Network, images: np.ndarray, labels: np.ndarray,
                          train_cfg: PresentationConfig, test_cfg: PresentationConfig,
                          round_index: int, encoder_seed: int, epochs: int = 1) -> np.ndarray:
    """Train neuron block round_index on the samples the trained ensemble
    misses.

    The whole training set is re-evaluated with the first 10 * round_index
    neurons; the misclassified samples then train the next block of 10.
    Returns the misclassified indices (possibly empty, leaving the block
    untrained).
    """
    if round_index < 1:
        raise ValueError("round_index starts at 1")
    n_trained = 10 * round_index
    if n_trained + 10 > net.n_neurons:
        raise ValueError(f"round {round_index} needs neurons up to {n_trained + 10}")
    result = evaluate(net, images, labels, test_cfg, encoder_seed, n_active=n_trained)
    miss = result.indices[result.predictions != labels[result.indices]]
    block = (n_trained, n_trained + 10)
    for _ in range(epochs):
        train_pass(net, images, labels, train_cfg, block, encoder_seed, indices=miss)
    return miss


def train_stages(images: np.ndarray, labels: np.ndarray, n_neurons: int,
                 lif: LifParams, w_exp: int, train_cfg: PresentationConfig,
                 test_cfg: PresentationConfig, encoder_seed: int, lfsr: int,
                 epochs: int = 1, log=None) -> tuple[Network, list[dict]]:
    """Full training schedule: base pass on neurons 0-9, then one active
    learning round per extra block of 10."""
    if n_neurons % 10 != 0:
        raise ValueError("n_neurons must be a multiple of 10")
    net = new_network(n_neurons, lif=lif, w_exp=w_exp, lfsr=lfsr)
    stages = []
    for _ in range(epochs):
        train_pass(net, images, labels, train_cfg, (0, 10), encoder_seed)
    stages.append({"stage": 0, "trained_on": int(len(images)), "misclassified": None})
    if log:
        log(f"stage 0: base block trained on {len(images)} samples")
    for r in range(1, n_neurons // 10):
        miss = active_learning_round(net, images, labels, train_cfg, test_cfg,
                                     r, encoder_seed, epochs=epochs)
        stages.append({"stage": r, "trained_on": int(miss.size), "misclassified": int(miss.size)})
        if log:
            log(f"stage {r}: {miss.size} misclassified samples trained block {r}")
    return net, stages


@dataclass
class DeadNeuronReport:
    totals: np.ndarray       # per-neuron lifetime spike totals over the history
    dead: np.ndarray         # indices of neurons that never fired
    on_counts: np.ndarray    # per-neuron retained-synapse counts


def dead_neuron_report(net: Network, counts_history: np.ndarray) -> DeadNeuronReport:
    """Flag neurons that never spiked across an evaluation history."""
    totals = np.asarray(counts_history).sum(axis=0).astype(np.int64)
    if totals.shape[0] != net.n_neurons:
        raise ValueError("history width does not match the network")
    return DeadNeuronReport(totals=totals, dead=np.flatnonzero(totals == 0),
                            on_counts=row_on_counts(net))


def save_model(net: Network, path) -> None:
    """Write the little-endian model file (see README for the byte layout)."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, net.n_neurons, net.n_synapses,
                              net.w_exp, net.lif.v_threshold, net.lif.leak, net.lif.w_inc))
        fh.write(net.neuron_class.astype("<u1").tobytes())
        fh.write(net.weights.astype("<u8").tobytes())


def load_model(path) -> Network:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError("model file truncated before header")
    magic, version, n_neurons, n_synapses, w_exp, vth, leak, w_inc = _HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise ValueError(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    n_segments = core.segment_count(n_synapses)
    off = _HEADER.size
    classes = np.frombuffer(data, dtype="<u1", count=n_neurons, offset=off).copy()
    off += n_neurons
    expect = n_neurons * n_segments * 8
    if len(data) - off != expect:
        raise ValueError(f"model weight payload is {len(data) - off} bytes, expected {expect}")
    weights = np.frombuffer(data, dtype="<u8", count=n_neurons * n_segments, offset=off)
    weights = weights.reshape(n_neurons, n_segments).copy()
    masks = core.segment_masks(n_synapses)
    for s, m in enumerate(masks):
        if np.any(weights[:, s] & ~np.uint64(m)):
            raise ValueError(f"weight padding bits set in segment {s}")
    return Network(weights=weights, neuron_class=classes,
                   lif=LifParams(v_threshold=vth, leak=leak, w_inc=w_inc),
                   w_exp=w_exp, lfsr=0xACE1, n_synapses=n_synapses)
