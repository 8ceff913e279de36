"""Hardware-faithful SNN kernels: LFSR randomness, spike counting, the
streamlined integer LIF update, and one-bit stochastic plasticity.

Everything here is a pure function over plain Python integers so the
instruction-set simulator and the array-based training engine can share one
set of semantics and stay bit-equivalent.  Synapse state is packed 64 bits
per segment; a 784-synapse neuron is 13 segments with the top 48 bits of the
last segment held at zero (the padding invariant).
"""

from __future__ import annotations

from dataclasses import dataclass

SEGMENT_BITS = 64
VECTOR_BITS = 28 * 28          # presynaptic lines for one MNIST-sized neuron
VECTOR_SEGMENTS = 13           # ceil(784 / 64)
U64_MASK = (1 << 64) - 1

# Galois feedback for x^16 + x^14 + x^13 + x^11 + 1, a maximal-length tap set.
LFSR_FEEDBACK = 0xB400
LFSR_PERIOD = (1 << 16) - 1
DRAW_BITS = 10
DRAW_MASK = (1 << DRAW_BITS) - 1
LTD_PROB_MAX = DRAW_MASK       # 1023


def segment_count(n_bits: int) -> int:
    """Number of 64-bit segments needed to hold n_bits synapses."""
    return -(-n_bits // SEGMENT_BITS)


def segment_masks(n_bits: int) -> list[int]:
    """Per-segment masks of the meaningful bits (padding bits are 0)."""
    masks = []
    remaining = n_bits
    for _ in range(segment_count(n_bits)):
        take = min(remaining, SEGMENT_BITS)
        masks.append((1 << take) - 1)
        remaining -= take
    return masks


def pack_bits(bits) -> list[int]:
    """Pack an iterable of 0/1 values, lowest index first, into segments."""
    segments = []
    word = 0
    n = 0
    for i, b in enumerate(bits):
        if b:
            word |= 1 << (i % SEGMENT_BITS)
        if i % SEGMENT_BITS == SEGMENT_BITS - 1:
            segments.append(word)
            word = 0
        n = i + 1
    if len(segments) * SEGMENT_BITS < n:
        segments.append(word)
    return segments


def unpack_bits(segments, n_bits: int) -> list[int]:
    return [(segments[i // SEGMENT_BITS] >> (i % SEGMENT_BITS)) & 1 for i in range(n_bits)]


def lfsr_seed(value: int) -> int:
    """Validate an LFSR seed.  Zero is absorbing and therefore rejected."""
    if not 0 < value <= 0xFFFF:
        raise ValueError(f"LFSR seed must be a nonzero 16-bit value, got {value:#x}")
    return value


def lfsr_next(state: int) -> tuple[int, int]:
    """Advance the 16-bit Galois LFSR one step.

    Returns (new_state, draw) where draw is the low 10 bits of the state
    after shifting.  The zero state is unreachable from any valid seed.
    """
    if state & 1:
        state = (state >> 1) ^ LFSR_FEEDBACK
    else:
        state >>= 1
    return state, state & DRAW_MASK


def spike_process(spike_bits: int, weight_bits: int) -> int:
    """Count valid spikes in one segment: popcount(spikes AND weights)."""
    return (spike_bits & weight_bits).bit_count()


@dataclass(frozen=True)
class LifParams:
    """Shared neuron parameters, all in integer potential units.

    Defaults are calibration starting points, not fixed constants; training
    configurations override them.
    """

    v_threshold: int = 400
    leak: int = 4
    w_inc: int = 16

    def __post_init__(self):
        if self.v_threshold <= 0:
            raise ValueError("v_threshold must be positive")
        if self.leak < 0:
            raise ValueError("leak must be non-negative")
        if self.w_inc <= 0:
            raise ValueError("w_inc must be positive")


@dataclass
class NeuronState:
    v_mem: int = 0       # membrane potential, never negative
    acc: int = 0         # valid-spike count gathered since the last update
    spike_out: bool = False


def lif_step(v_mem: int, acc: int, w_inc: int, leak: int, v_threshold: int,
             i_ext: int = 0) -> tuple[int, bool]:
    """Raw streamlined LIF arithmetic, total over all integer inputs.

    v' = max(v_mem + acc * w_inc + i_ext - leak, 0); crossing the threshold
    emits a spike and hard-resets the potential to 0.
    """
    v = v_mem + acc * w_inc + i_ext - leak
    if v < 0:
        v = 0
    if v >= v_threshold:
        return 0, True
    return v, False


def neuron_update(state: NeuronState, params: LifParams, i_ext: int = 0) -> tuple[NeuronState, bool]:
    """One streamlined LIF step; the accumulator is consumed either way.

    Arithmetic is exact (Python ints); compiled paths use 64-bit signed
    words, which cannot overflow for acc <= 784 and any 16-bit w_inc.
    """
    v, spiked = lif_step(state.v_mem, state.acc, params.w_inc, params.leak,
                         params.v_threshold, i_ext)
    return NeuronState(v_mem=v, acc=0, spike_out=spiked), spiked


def compute_ltd_prob(row_on_count: int, w_exp: int) -> int:
    """Map a neuron's on-synapse count to the 10-bit depression threshold.

    value = clamp(floor(1024 * on_count / w_exp), 0, 1023).  A draw x passes
    when x <= value, so the per-event depression probability is
    (value + 1) / 1024; more retained synapses raise the pressure and w_exp
    sets the equilibrium scale.
    """
    if w_exp <= 0:
        raise ValueError("w_exp must be positive")
    value = (row_on_count << DRAW_BITS) // w_exp
    return LTD_PROB_MAX if value > LTD_PROB_MAX else value


def synapse_update_segment(
    weight_bits: int, spike_bits: int, spike_out: bool, ltd_prob: int, lfsr_state: int
) -> tuple[int, int]:
    """Apply one plasticity event to a 64-synapse segment.

    Without a postsynaptic spike nothing changes and the LFSR is not
    consumed.  With one, a single draw gates the whole segment: if the draw
    passes (x <= ltd_prob) the segment becomes the spike mask, potentiating
    every active synapse and depressing every inactive one in the same
    cycle; otherwise active synapses are only ORed in.
    """
    if not spike_out:
        return weight_bits, lfsr_state
    lfsr_state, draw = lfsr_next(lfsr_state)
    if draw <= ltd_prob:
        return spike_bits, lfsr_state
    return weight_bits | spike_bits, lfsr_state


def neuron_event_update(row, spikes, spike_out: bool, w_exp: int, lfsr_state: int) -> tuple[list[int], int]:
    """Apply a plasticity event to a whole weight row.

    The depression threshold is computed once from the row's total on-count
    before any segment changes, then segments are updated in ascending index
    order, threading the LFSR through them (one draw per segment).
    """
    row = [int(w) for w in row]
    if not spike_out:
        return row, lfsr_state
    on_count = sum(w.bit_count() for w in row)
    ltd_prob = compute_ltd_prob(on_count, w_exp)
    for i, (w, s) in enumerate(zip(row, spikes)):
        row[i], lfsr_state = synapse_update_segment(w, int(s), True, ltd_prob, lfsr_state)
    return row, lfsr_state
