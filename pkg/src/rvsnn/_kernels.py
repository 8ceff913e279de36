"""Compiled inner loops for encoding and sample presentation.

These kernels are bit-equivalent to the scalar functions in core.py and
encoding.py (the test suite cross-checks them against straight-line
references); they exist purely so a 60k-sample training run finishes in
minutes.  Everything is integer arithmetic on 64-bit words, so results are
exact and deterministic.
"""

from __future__ import annotations

from numba import njit, uint64, int64

_GOLDEN = uint64(0x9E3779B97F4A7C15)
_MIX1 = uint64(0xBF58476D1CE4E5B9)
_MIX2 = uint64(0x94D049BB133111EB)
_LFSR_FEEDBACK = uint64(0xB400)
_DRAW_MASK = uint64(0x3FF)


@njit(cache=True, inline="always")
def _popcount64(x):
    x = x - ((x >> uint64(1)) & uint64(0x5555555555555555))
    x = (x & uint64(0x3333333333333333)) + ((x >> uint64(2)) & uint64(0x3333333333333333))
    x = (x + (x >> uint64(4))) & uint64(0x0F0F0F0F0F0F0F0F)
    return (x * uint64(0x0101010101010101)) >> uint64(56)


@njit(cache=True, inline="always")
def _splitmix64(x):
    x = (x ^ (x >> uint64(30))) * _MIX1
    x = (x ^ (x >> uint64(27))) * _MIX2
    return x ^ (x >> uint64(31))


@njit(cache=True)
def encode_schedule_kernel(thresholds, seed, counter, out):
    """Fill out[t, s] with spike segments; draw (t*P + i) feeds pixel i of
    step t.  Zero-probability pixels are skipped: counter-based draws make
    the stream positional, so skipping does not shift other pixels."""
    n_pixels = thresholds.shape[0]
    t_steps = out.shape[0]
    for t in range(t_steps):
        base = counter + uint64(t) * uint64(n_pixels)
        for i in range(n_pixels):
            thr = thresholds[i]
            if thr == uint64(0):
                continue
            z = _splitmix64(seed + (base + uint64(i) + uint64(1)) * _GOLDEN)
            if (z >> uint64(32)) < thr:
                out[t, i // 64] |= uint64(1) << uint64(i % 64)


@njit(cache=True)
def present_kernel(spikes, weights, v_mem, counts, iext, plastic,
                   v_threshold, leak, w_inc, train, lfsr, w_exp):
    """Run one sample presentation over a (t_steps, segments) spike schedule.

    Neurons are visited in ascending index order each step; a training spike
    recomputes the row's depression threshold from its on-count, then updates
    segments in order with one LFSR draw each.  Weights, v_mem and counts are
    updated in place; returns the final LFSR state (unchanged unless a
    plastic neuron spiked).
    """
    t_steps, n_segments = spikes.shape
    n_neurons = weights.shape[0]
    for t in range(t_steps):
        for n in range(n_neurons):
            acc = int64(0)
            for s in range(n_segments):
                acc += int64(_popcount64(spikes[t, s] & weights[n, s]))
            v = v_mem[n] + acc * w_inc + iext[n] - leak
            if v < int64(0):
                v = int64(0)
            if v >= v_threshold:
                counts[n] += 1
                v_mem[n] = int64(0)
                if train and plastic[n]:
                    on = int64(0)
                    for s in range(n_segments):
                        on += int64(_popcount64(weights[n, s]))
                    ltd_prob = (on << int64(10)) // w_exp
                    if ltd_prob > int64(1023):
                        ltd_prob = int64(1023)
                    for s in range(n_segments):
                        if lfsr & uint64(1):
                            lfsr = (lfsr >> uint64(1)) ^ _LFSR_FEEDBACK
                        else:
                            lfsr = lfsr >> uint64(1)
                        if int64(lfsr & _DRAW_MASK) <= ltd_prob:
                            weights[n, s] = spikes[t, s]
                        else:
                            weights[n, s] |= spikes[t, s]
            else:
                v_mem[n] = v
    return lfsr
