"""Straight-line reference implementations used as oracles.

Everything here works on per-bit Python lists and shares no code with the
package kernels; it exists so the packed/compiled paths can be checked
against an independent reading of the same update rules.
"""

LFSR_FEEDBACK = 0xB400


def bit_loop_count(a: int, b: int, bits: int = 64) -> int:
    """Population count of a AND b via an explicit bit loop."""
    count = 0
    for i in range(bits):
        if (a >> i) & 1 and (b >> i) & 1:
            count += 1
    return count


def lfsr_step(state: int) -> tuple[int, int]:
    if state & 1:
        state = (state >> 1) ^ LFSR_FEEDBACK
    else:
        state >>= 1
    return state, state & 0x3FF


def per_bit_event_update(weight_bits: list[int], spike_bits: list[int], w_exp: int,
                         lfsr: int) -> tuple[list[int], int]:
    """Per-bit plasticity event sharing the one-draw-per-64-synapse schedule."""
    weight_bits = list(weight_bits)
    on = sum(weight_bits)
    ltd_prob = min((on * 1024) // w_exp, 1023)
    n = len(weight_bits)
    for start in range(0, n, 64):
        lfsr, draw = lfsr_step(lfsr)
        end = min(start + 64, n)
        if draw <= ltd_prob:
            for i in range(start, end):
                weight_bits[i] = spike_bits[i]
        else:
            for i in range(start, end):
                weight_bits[i] |= spike_bits[i]
    return weight_bits, lfsr


def straight_line_present(weight_rows, schedule, classes, label, v_threshold, leak,
                          w_inc, i_teach, i_inhibit, w_exp, lfsr, mode="test",
                          plastic=None):
    """Per-bit presentation of a spike schedule, the long way.

    weight_rows: list of per-neuron 0/1 lists (mutated in train mode).
    schedule: per-step 0/1 lists.  Returns (counts, weight_rows, lfsr).
    """
    n_neurons = len(weight_rows)
    if plastic is None:
        plastic = [True] * n_neurons
    v = [0] * n_neurons
    counts = [0] * n_neurons
    for spikes in schedule:
        for n in range(n_neurons):
            acc = sum(1 for i, s in enumerate(spikes) if s and weight_rows[n][i])
            if mode == "train" and plastic[n]:
                i_ext = i_teach if classes[n] == label else -i_inhibit
            else:
                i_ext = 0
            value = v[n] + acc * w_inc + i_ext - leak
            if value < 0:
                value = 0
            if value >= v_threshold:
                counts[n] += 1
                v[n] = 0
                if mode == "train" and plastic[n]:
                    weight_rows[n], lfsr = per_bit_event_update(
                        weight_rows[n], spikes, w_exp, lfsr)
            else:
                v[n] = value
    return counts, weight_rows, lfsr
