"""Bit-equivalence checking between the array engine and the ISA path.

One sample's presentation is run twice: once through network.present_schedule
and once as an emitted program on the instruction-set simulator.  Spike
counts, the prediction, and (for training) the post-update weight rows and
LFSR state must match exactly; any divergence is reported with its first
location.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import iss
from .asm import assemble
from .isa import SSR_LFSR
from .network import Network, PresentationConfig, classify, present_schedule
from .progen import emit_inference_program


@dataclass
class CrosscheckResult:
    ok: bool
    prediction_model: int
    prediction_isa: int
    divergence: str | None
    steps: int                 # instructions retired by the ISS
    retired: dict              # per-mnemonic counters


def _read_u64_block(mem: iss.Memory, addr: int, count: int) -> np.ndarray:
    return np.frombuffer(bytes(mem.data[addr - mem.base: addr - mem.base + count * 8]),
                         dtype="<u8").copy()


def crosscheck_schedule(net: Network, schedule: np.ndarray, *, train: bool = False,
                        label: int | None = None, cfg: PresentationConfig | None = None,
                        max_steps: int = 200_000_000) -> CrosscheckResult:
    """Run one schedule through both paths and compare bit for bit.

    The input network is not modified; the training variant makes every
    neuron plastic in both paths.
    """
    if cfg is None:
        cfg = PresentationConfig(t_steps=schedule.shape[0])
    model_net = copy.deepcopy(net)
    mode = "train" if train else "test"
    model_cfg = PresentationConfig(schedule.shape[0], cfg.i_teach, cfg.i_inhibit, mode)
    counts_model = present_schedule(model_net, schedule, label, model_cfg, plastic=None)
    pred_model = classify(counts_model, model_net.neuron_class)

    text = emit_inference_program(net, schedule, train=train, label=label,
                                  cfg=model_cfg if train else None,
                                  lfsr_seed=net.lfsr if train else None)
    program = assemble(text)
    mem_size = max(len(program.data) + 65536, 1 << 20)
    mem = iss.Memory(base=program.base, size=mem_size)
    iss.load_program(mem, program.data)
    cpu = iss.CpuState(pc=program.base)
    result = iss.run(cpu, mem, max_steps=max_steps)

    if result.status != "halted":
        detail = result.trap.kind if result.status == "trap" else "step limit"
        return CrosscheckResult(False, pred_model, -1, f"ISS did not halt: {detail}",
                                result.steps, dict(cpu.retired))
    pred_isa = result.exit_code

    counts_isa = _read_u64_block(mem, program.symbols["counts"], net.n_neurons).astype(np.int64)
    divergence = None
    if not np.array_equal(counts_isa, counts_model):
        i = int(np.flatnonzero(counts_isa != counts_model)[0])
        divergence = (f"spike counts diverge at neuron {i}: "
                      f"model {counts_model[i]}, isa {counts_isa[i]}")
    elif pred_isa != pred_model:
        divergence = f"prediction diverges: model {pred_model}, isa {pred_isa}"
    elif train:
        rows_isa = _read_u64_block(mem, program.symbols["weights"],
                                   net.n_neurons * net.n_segments)
        rows_isa = rows_isa.reshape(net.n_neurons, net.n_segments)
        if not np.array_equal(rows_isa, model_net.weights):
            n, s = map(int, np.argwhere(rows_isa != model_net.weights)[0])
            divergence = (f"weights diverge at neuron {n} segment {s}: "
                          f"model {int(model_net.weights[n, s]):#x}, isa {int(rows_isa[n, s]):#x}")
        elif cpu.ssr.read(SSR_LFSR) != model_net.lfsr:
            divergence = (f"LFSR diverges: model {model_net.lfsr:#06x}, "
                          f"isa {cpu.ssr.read(SSR_LFSR):#06x}")
    return CrosscheckResult(divergence is None, pred_model, pred_isa, divergence,
                            result.steps, dict(cpu.retired))


def toy_network(n_neurons: int = 2, n_synapses: int = 128, w_exp: int = 64,
                seed: int = 99, density: float = 0.3) -> Network:
    """Small random-weight model for fast equivalence tests."""
    from .core import LifParams, segment_masks
    from .network import new_network

    rng = np.random.default_rng(seed)
    net = new_network(n_neurons, lif=LifParams(v_threshold=64, leak=2, w_inc=4),
                      w_exp=w_exp, lfsr=0xACE1, n_synapses=n_synapses)
    masks = segment_masks(n_synapses)
    for n in range(n_neurons):
        for s, m in enumerate(masks):
            bits = rng.integers(0, 1 << 32, dtype=np.uint64) | (rng.integers(0, 1 << 32, dtype=np.uint64) << np.uint64(32))
            keep = rng.random(64) < density
            packed = 0
            for b in range(64):
                if keep[b] and (int(bits) >> b) & 1:
                    packed |= 1 << b
            net.weights[n, s] = np.uint64(packed & m)
    return net


def random_schedule(t_steps: int, n_synapses: int, seed: int = 7,
                    density: float = 0.2) -> np.ndarray:
    """Seeded random spike schedule honoring the padding invariant."""
    from .core import segment_count, segment_masks

    rng = np.random.default_rng(seed)
    n_segments = segment_count(n_synapses)
    masks = segment_masks(n_synapses)
    out = np.zeros((t_steps, n_segments), dtype=np.uint64)
    for t in range(t_steps):
        for s, m in enumerate(masks):
            packed = 0
            draws = rng.random(64)
            for b in range(64):
                if draws[b] < density:
                    packed |= 1 << b
            out[t, s] = np.uint64(packed & m)
    return out
