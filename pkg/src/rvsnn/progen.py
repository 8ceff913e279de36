"""Generate assembly programs that run one sample through a model using the
SNN instructions, for cross-checking the instruction path against the array
engine.

The emitted program walks timestep-major over a precomputed spike schedule,
processing neurons in ascending index order: 13 snn.sp per neuron feed the
accumulator, one snn.nu updates the membrane, and (in the training variant)
13 snn.up apply plasticity after an on-count derived LTDP write.  Spike
counts accumulate in memory; the program halts via ebreak with the
predicted class in a0.  Draws, update order, and arithmetic match
network.present_schedule bit for bit.
"""

from __future__ import annotations

import numpy as np

from .network import Network, PresentationConfig, teacher_currents

U64 = (1 << 64) - 1


def _log2_exact(value: int) -> int:
    if value <= 0 or value & (value - 1):
        raise ValueError(f"w_exp must be a power of two for the generated program, got {value}")
    return value.bit_length() - 1


def emit_inference_program(net: Network, schedule: np.ndarray, *,
                           train: bool = False, label: int | None = None,
                           cfg: PresentationConfig | None = None,
                           lfsr_seed: int | None = None) -> str:
    """Emit assembly for one presentation of `schedule` (t_steps, segments).

    Inference runs teacher-free with no plasticity.  The training variant
    treats every neuron as plastic, loads per-neuron teacher currents from a
    data table, and seeds the LFSR special register so weight updates follow
    the same draw sequence as the array engine.
    """
    t_steps, n_segments = schedule.shape
    if n_segments != net.n_segments:
        raise ValueError(f"schedule has {n_segments} segments, model rows have {net.n_segments}")
    if train:
        if label is None or cfg is None:
            raise ValueError("training variant needs label and cfg")
        shift = _log2_exact(net.w_exp)
        plastic = np.ones(net.n_neurons, dtype=bool)
        iext = teacher_currents(net, label,
                                PresentationConfig(cfg.t_steps, cfg.i_teach, cfg.i_inhibit, "train"),
                                plastic)
        lfsr = net.lfsr if lfsr_seed is None else lfsr_seed

    row_bytes = n_segments * 8
    out = []
    emit = out.append
    emit(f"# generated {'training' if train else 'inference'} program: "
         f"{net.n_neurons} neurons x {net.n_synapses} synapses, {t_steps} steps")
    emit("")
    emit("start:")
    emit("    la   s0, weights")
    emit("    la   s2, counts")
    emit("    la   s3, vmem")
    emit("    la   s5, classes")
    emit(f"    li   s6, {net.n_neurons}")
    emit(f"    li   s7, {t_steps}")
    emit(f"    li   t0, {net.lif.v_threshold}")
    emit("    snn.mv.x2s vth, t0")
    emit(f"    li   t0, {net.lif.leak}")
    emit("    snn.mv.x2s leak, t0")
    emit(f"    li   t0, {net.lif.w_inc}")
    emit("    snn.mv.x2s winc, t0")
    if train:
        emit("    la   s4, iext")
        emit(f"    li   t0, {lfsr}")
        emit("    snn.mv.x2s lfsr, t0")
    else:
        emit("    snn.mv.x2s iext, x0")
    emit("    la   s10, spikes")
    emit("    li   s8, 0                      # timestep")
    emit("step_loop:")
    emit("    beq  s8, s7, argmax")
    emit("    li   s9, 0                      # neuron")
    emit("    mv   s11, s0")
    emit("neuron_loop:")
    emit("    beq  s9, s6, step_end")
    emit("    snn.mv.x2s acc, x0")
    emit("    slli t0, s9, 3")
    emit("    add  t0, t0, s3")
    emit("    ld   t1, 0(t0)")
    emit("    snn.mv.x2s vmem, t1")
    if train:
        emit("    slli t0, s9, 3")
        emit("    add  t0, t0, s4")
        emit("    ld   t1, 0(t0)")
        emit("    snn.mv.x2s iext, t1")
    for s in range(n_segments):
        emit(f"    ld   t2, {s * 8}(s10)")
        emit(f"    ld   t3, {s * 8}(s11)")
        emit("    snn.sp t4, t2, t3")
    emit("    snn.nu t5")
    emit("    snn.mv.s2x t1, vmem")
    emit("    slli t0, s9, 3")
    emit("    add  t0, t0, s3")
    emit("    sd   t1, 0(t0)")
    emit("    slli t0, s9, 3")
    emit("    add  t0, t0, s2")
    emit("    ld   t1, 0(t0)")
    emit("    add  t1, t1, t5")
    emit("    sd   t1, 0(t0)")
    if train:
        emit("    beqz t5, plast_done")
        emit("    li   t6, 0                  # row on-count")
        for s in range(n_segments):
            emit(f"    ld   t3, {s * 8}(s11)")
            emit("    snn.sp t4, t3, t3")
            emit("    add  t6, t6, t4")
        emit("    slli t6, t6, 10")
        if shift:
            emit(f"    srli t6, t6, {shift}")
        emit("    li   t0, 1024")
        emit("    bltu t6, t0, ltdp_ok")
        emit("    li   t6, 1023")
        emit("ltdp_ok:")
        emit("    snn.mv.x2s ltdp, t6")
        for s in range(n_segments):
            emit(f"    ld   t2, {s * 8}(s10)")
            emit(f"    ld   t3, {s * 8}(s11)")
            emit("    snn.up t4, t2, t3")
            emit(f"    sd   t4, {s * 8}(s11)")
        emit("plast_done:")
    emit(f"    addi s11, s11, {row_bytes}")
    emit("    addi s9, s9, 1")
    emit("    j    neuron_loop")
    emit("step_end:")
    emit(f"    addi s10, s10, {row_bytes}")
    emit("    addi s8, s8, 1")
    emit("    j    step_loop")
    emit("argmax:")
    emit("    li   t0, 1")
    emit("    ld   t1, 0(s2)")
    emit("    li   t2, 0")
    emit("amx_loop:")
    emit("    beq  t0, s6, amx_done")
    emit("    slli t3, t0, 3")
    emit("    add  t3, t3, s2")
    emit("    ld   t3, 0(t3)")
    emit("    bgeu t1, t3, amx_next           # strict > keeps the lowest index")
    emit("    mv   t1, t3")
    emit("    mv   t2, t0")
    emit("amx_next:")
    emit("    addi t0, t0, 1")
    emit("    j    amx_loop")
    emit("amx_done:")
    emit("    add  t3, s5, t2")
    emit("    lbu  a0, 0(t3)")
    emit("    ebreak")
    emit("")
    emit(".align 8")
    emit("weights:")
    for row in net.weights:
        emit("    .dword " + ", ".join(f"{int(w):#018x}" for w in row))
    emit("spikes:")
    for step in schedule:
        emit("    .dword " + ", ".join(f"{int(w):#018x}" for w in step))
    emit("vmem:")
    emit(f"    .zero {net.n_neurons * 8}")
    emit("counts:")
    emit(f"    .zero {net.n_neurons * 8}")
    if train:
        emit("iext:")
        emit("    .dword " + ", ".join(f"{int(v) & U64:#018x}" for v in iext))
    emit("classes:")
    emit("    .byte " + ", ".join(str(int(c)) for c in net.neuron_class))
    emit("")
    return "\n".join(out)
