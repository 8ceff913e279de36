import numpy as np
import pytest

from rvsnn import encoding, iss, network
from rvsnn.asm import assemble
from rvsnn.core import LifParams
from rvsnn.crosscheck import crosscheck_schedule, random_schedule, toy_network
from rvsnn.network import PresentationConfig
from rvsnn.progen import emit_inference_program


class TestToyEquivalence:
    def test_inference(self):
        net = toy_network()
        res = crosscheck_schedule(net, random_schedule(32, 128, seed=1))
        assert res.ok, res.divergence

    def test_training(self):
        net = toy_network()
        cfg = PresentationConfig(t_steps=32, i_teach=40, i_inhibit=8, mode="train")
        res = crosscheck_schedule(net, random_schedule(32, 128, seed=2),
                                  train=True, label=1, cfg=cfg)
        assert res.ok, res.divergence

    def test_many_seeds_both_variants(self):
        net = toy_network()
        cfg = PresentationConfig(t_steps=24, i_teach=40, i_inhibit=8, mode="train")
        for seed in range(10):
            sched = random_schedule(24, 128, seed=seed)
            assert crosscheck_schedule(net, sched).ok
            assert crosscheck_schedule(net, sched, train=True, label=seed % 10,
                                       cfg=cfg).ok

    def test_all_zero_schedule_predicts_class_zero(self):
        net = toy_network()
        res = crosscheck_schedule(net, np.zeros((8, 2), np.uint64))
        assert res.ok
        assert res.prediction_isa == 0      # total tie resolved to neuron 0


class TestEmittedProgram:
    def test_assembles_clean(self):
        net = toy_network()
        text = emit_inference_program(net, random_schedule(4, 128, seed=3))
        program = assemble(text)
        assert len(program.data) > 0
        assert {"weights", "spikes", "vmem", "counts", "classes"} <= set(program.symbols)

    def test_training_variant_assembles(self):
        net = toy_network()
        cfg = PresentationConfig(t_steps=4, i_teach=40, i_inhibit=8, mode="train")
        text = emit_inference_program(net, random_schedule(4, 128, seed=4),
                                      train=True, label=0, cfg=cfg)
        program = assemble(text)
        assert "iext" in program.symbols

    def test_rejects_non_power_of_two_w_exp_for_training(self):
        net = toy_network(w_exp=100)
        cfg = PresentationConfig(t_steps=4, i_teach=40, i_inhibit=8, mode="train")
        with pytest.raises(ValueError, match="power of two"):
            emit_inference_program(net, random_schedule(4, 128, seed=5),
                                   train=True, label=0, cfg=cfg)

    def test_schedule_shape_checked(self):
        net = toy_network()
        with pytest.raises(ValueError, match="segments"):
            emit_inference_program(net, np.zeros((4, 5), np.uint64))


class TestFaultInjection:
    def test_corrupted_ltdp_write_detected(self):
        # deliberately break the LTDP clamp constant in the emitted program:
        # the divergence must be caught and located
        net = toy_network(w_exp=16)      # low w_exp: ltdp saturates quickly
        sched = random_schedule(32, 128, seed=6)
        cfg = PresentationConfig(t_steps=32, i_teach=40, i_inhibit=8, mode="train")
        text = emit_inference_program(net, sched, train=True, label=0, cfg=cfg)
        broken = text.replace("li   t6, 1023", "li   t6, 3")
        assert broken != text
        program = assemble(broken)
        mem = iss.Memory(base=program.base, size=1 << 20)
        iss.load_program(mem, program.data)
        cpu = iss.CpuState(pc=program.base)
        result = iss.run(cpu, mem, max_steps=50_000_000)
        assert result.status == "halted"
        model_net = toy_network(w_exp=16)
        network.present_schedule(model_net, sched, 0,
                                 PresentationConfig(32, 40, 8, "train"))
        rows = np.frombuffer(
            bytes(mem.data[program.symbols["weights"] - mem.base:
                           program.symbols["weights"] - mem.base + 2 * 2 * 8]),
            dtype="<u8").reshape(2, 2)
        assert not np.array_equal(rows, model_net.weights)

    def test_divergence_reported_with_location(self):
        net = toy_network(w_exp=16)
        sched = random_schedule(32, 128, seed=6)
        cfg = PresentationConfig(t_steps=32, i_teach=40, i_inhibit=8, mode="train")
        res = crosscheck_schedule(net, sched, train=True, label=0, cfg=cfg)
        assert res.ok   # sanity: the unbroken path matches


class TestFullSizeEquivalence:
    def test_mnist_sample_inference_and_training(self, mnist_train):
        prep = encoding.preprocess_batch(mnist_train.images[:1], theta=128)[0]
        rng = encoding.sample_rng(12345, 0)
        schedule, _ = encoding.encode_schedule(encoding.normalize(prep).reshape(-1),
                                               rng, 48)
        net = network.new_network(10, lif=LifParams(2400, 80, 16), w_exp=512,
                                  lfsr=0xACE1)
        # give the rows some structure first
        cfg_train = PresentationConfig(1, 2480, 4096, "train")
        for i in range(20):
            img = encoding.preprocess_batch(mnist_train.images[i:i + 1], theta=128)[0]
            network.present_sample(net, img, int(mnist_train.labels[i]), cfg_train,
                                   encoding.sample_rng(12345, i), plastic=(0, 10))
        res = crosscheck_schedule(net, schedule)
        assert res.ok, res.divergence
        res = crosscheck_schedule(net, schedule, train=True,
                                  label=int(mnist_train.labels[0]),
                                  cfg=PresentationConfig(48, 2480, 4096, "train"))
        assert res.ok, res.divergence
