"""Image preprocessing (deskew, soft threshold, normalize) and rate-coded
Poisson spike generation.

The encoder randomness is a counter-based splitmix64 stream: draw k of a
stream is mix(seed + (k + 1) * GOLDEN_GAMMA), so any pixel/timestep position
can be evaluated independently without advancing shared state.  This is
deliberately not the 16-bit synaptic LFSR, whose period would wrap after 84
timesteps of 784 draws.  A pixel with value p fires when the top 32 bits of
its draw fall below round(p * 2**32).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import SEGMENT_BITS, U64_MASK, segment_count

IMAGE_SIDE = 28
IMAGE_PIXELS = IMAGE_SIDE * IMAGE_SIDE

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
THRESHOLD_ONE = 1 << 32        # firing threshold for p = 1.0


def splitmix64(x: int) -> int:
    """The splitmix64 finalizer: avalanche a 64-bit word."""
    x &= U64_MASK
    x = ((x ^ (x >> 30)) * _MIX1) & U64_MASK
    x = ((x ^ (x >> 27)) * _MIX2) & U64_MASK
    return x ^ (x >> 31)


@dataclass(frozen=True)
class EncoderRng:
    """Counter-based 64-bit stream; (seed, counter) fully determine output.

    Per-sample streams are derived as seed XOR sample_index with the counter
    starting at 0, so samples can be encoded independently and in parallel.
    """

    seed: int
    counter: int = 0

    def draw(self, offset: int = 0) -> int:
        """The 64-bit uniform draw at counter + offset (state unchanged)."""
        k = (self.counter + offset + 1) & U64_MASK
        return splitmix64((self.seed + k * GOLDEN_GAMMA) & U64_MASK)

    def advance(self, n: int) -> "EncoderRng":
        return replace(self, counter=(self.counter + n) & U64_MASK)


def sample_rng(seed: int, sample_index: int) -> EncoderRng:
    return EncoderRng(seed=(seed ^ sample_index) & U64_MASK)


def deskew(img: np.ndarray) -> np.ndarray:
    """Shear the image so its principal axis is vertical.

    Shear factor alpha = mu11 / mu02 from the intensity moments about the
    centroid; rows are resampled at x_src = x + alpha * (y - cy) with linear
    interpolation, zero outside the frame.  All-zero images pass through
    unchanged (no centroid).
    """
    img = np.asarray(img, dtype=np.uint8).reshape(IMAGE_SIDE, IMAGE_SIDE)
    total = float(img.sum())
    if total == 0.0:
        return img.copy()
    p = img.astype(np.float64)
    ys, xs = np.mgrid[0:IMAGE_SIDE, 0:IMAGE_SIDE]
    cy = float((ys * p).sum()) / total
    cx = float((xs * p).sum()) / total
    mu11 = float(((xs - cx) * (ys - cy) * p).sum()) / total
    mu02 = float(((ys - cy) ** 2 * p).sum()) / total
    alpha = mu11 / mu02 if mu02 != 0.0 else 0.0

    x_src = xs + alpha * (ys - cy)
    x0 = np.floor(x_src).astype(np.int64)
    frac = x_src - x0
    x1 = x0 + 1
    in0 = (x0 >= 0) & (x0 < IMAGE_SIDE)
    in1 = (x1 >= 0) & (x1 < IMAGE_SIDE)
    v0 = np.where(in0, p[ys, np.clip(x0, 0, IMAGE_SIDE - 1)], 0.0)
    v1 = np.where(in1, p[ys, np.clip(x1, 0, IMAGE_SIDE - 1)], 0.0)
    out = v0 * (1.0 - frac) + v1 * frac
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def soft_threshold(img: np.ndarray, theta: int) -> np.ndarray:
    """Cut intensities below theta and restretch the rest to [0, 255]."""
    if not 0 <= theta <= 254:
        raise ValueError(f"theta must be in [0, 254], got {theta}")
    img = np.asarray(img, dtype=np.uint8)
    shifted = np.maximum(img.astype(np.int64) - theta, 0)
    out = np.rint(shifted * 255.0 / (255 - theta))
    return np.clip(out, 0, 255).astype(np.uint8)


def normalize(img: np.ndarray) -> np.ndarray:
    """Map [0, 255] intensities to firing probabilities in [0, 1]."""
    return np.asarray(img, dtype=np.uint8).astype(np.float64) / 255.0


def preprocess(img: np.ndarray, theta: int = 64) -> np.ndarray:
    """Deskew, soft-threshold, then flatten to a 784-probability vector."""
    return normalize(soft_threshold(deskew(img), theta)).reshape(IMAGE_PIXELS)


def preprocess_batch(images: np.ndarray, theta: int = 64) -> np.ndarray:
    """Deskew and soft-threshold a stack of images, staying in uint8."""
    out = np.empty((len(images), IMAGE_SIDE, IMAGE_SIDE), dtype=np.uint8)
    for i, img in enumerate(images):
        out[i] = soft_threshold(deskew(img), theta)
    return out


def firing_thresholds(norm_img: np.ndarray) -> np.ndarray:
    """Quantize probabilities to 32-bit firing thresholds, round half even.

    A draw fires when its top 32 bits are < threshold, so p = 0 never fires
    and p = 1 always does.
    """
    p = np.asarray(norm_img, dtype=np.float64).reshape(-1)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("normalized image values must lie in [0, 1]")
    return np.rint(p * float(THRESHOLD_ONE)).astype(np.uint64)


def poisson_encode_step(norm_img: np.ndarray, rng: EncoderRng) -> tuple[np.ndarray, EncoderRng]:
    """Generate one timestep's spike vector: bit i set with probability p_i.

    Consumes one draw position per pixel in index order.  Padding bits above
    the pixel count stay zero.
    """
    thresholds = firing_thresholds(norm_img)
    n = thresholds.shape[0]
    segments = np.zeros(segment_count(n), dtype=np.uint64)
    for i in range(n):
        t = int(thresholds[i])
        if t and (rng.draw(i) >> 32) < t:
            segments[i // SEGMENT_BITS] |= np.uint64(1 << (i % SEGMENT_BITS))
    return segments, rng.advance(n)


def encode_schedule(norm_img: np.ndarray, rng: EncoderRng, t_steps: int) -> tuple[np.ndarray, EncoderRng]:
    """Vectorized spike trains for t_steps; bit-identical to stacking
    poisson_encode_step t_steps times."""
    from ._kernels import encode_schedule_kernel

    thresholds = firing_thresholds(norm_img)
    n = thresholds.shape[0]
    out = np.zeros((t_steps, segment_count(n)), dtype=np.uint64)
    encode_schedule_kernel(thresholds, np.uint64(rng.seed), np.uint64(rng.counter), out)
    return out, rng.advance(n * t_steps)
