"""RISC-V SNN extension toolkit.

A bit-exact functional model of a leaky integrate-and-fire neuron array with
one-bit stochastic plasticity, the five-instruction RISC-V extension that
drives it, a two-pass assembler, an RV64I instruction-set simulator, and an
MNIST training/evaluation pipeline.  The array engine and the instruction
path share integer semantics and produce identical bits.
"""

__version__ = "0.1.0"

from .core import LifParams, NeuronState, lfsr_next, lfsr_seed, spike_process
from .encoding import EncoderRng, deskew, normalize, poisson_encode_step, soft_threshold
from .network import (
    Network,
    PresentationConfig,
    classify,
    evaluate,
    load_model,
    new_network,
    present_sample,
    save_model,
    train_pass,
)
