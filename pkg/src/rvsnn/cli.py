"""Command-line surface: assemble, simulate, train, evaluate, cross-check,
and calibrate.

Every command is deterministic given its flags; the seeds and the full
configuration are echoed as a comment line in every CSV so results carry
their provenance.  Exit codes: 0 success, 1 usage or configuration error,
2 runtime trap or check failure (`run` propagates the guest program's own
exit code).
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import os
import sys
from dataclasses import dataclass

from . import asm, crosscheck, encoding, iss, mnist, network
from .core import LifParams
from .network import PresentationConfig

ENV_DATA_DIR = "RVSNN_MNIST_DIR"


@dataclass
class RunConfig:
    """Calibrated defaults for the training and evaluation pipeline.

    i_teach = None sizes the teacher to guarantee exactly one spike per
    training presentation from a silent start (leak + ceil(vth / t_train)),
    which is also what keeps plasticity at one event per sample.
    """

    neurons: int = 10
    w_exp: int = 512
    t_steps: int = 2048          # test/readout presentation length
    t_steps_train: int = 1
    theta: int = 128
    v_threshold: int = 1200
    leak: int = 80
    w_inc: int = 16
    i_teach: int | None = None
    i_inhibit: int = 4096
    encoder_seed: int = 12345
    lfsr_seed: int = 0xACE1
    limit: int | None = None
    epochs: int = 1

    def resolved_i_teach(self) -> int:
        if self.i_teach is not None:
            return self.i_teach
        return self.leak + -(-self.v_threshold // self.t_steps_train)

    def lif(self) -> LifParams:
        return LifParams(self.v_threshold, self.leak, self.w_inc)

    def train_cfg(self) -> PresentationConfig:
        return PresentationConfig(self.t_steps_train, self.resolved_i_teach(),
                                  self.i_inhibit, network.TRAIN)

    def test_cfg(self) -> PresentationConfig:
        return PresentationConfig(self.t_steps, self.resolved_i_teach(),
                                  self.i_inhibit, network.TEST)

    def echo(self) -> str:
        d = dataclasses.asdict(self)
        d["i_teach"] = self.resolved_i_teach()
        return " ".join(f"{k}={v}" for k, v in sorted(d.items()))


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors per the CLI convention
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    d = RunConfig()
    p.add_argument("--neurons", type=int, default=d.neurons, help="10, 20, or 40")
    p.add_argument("--wexp", type=int, default=d.w_exp)
    p.add_argument("--t-steps", type=int, default=d.t_steps)
    p.add_argument("--t-steps-train", type=int, default=d.t_steps_train)
    p.add_argument("--theta", type=int, default=d.theta)
    p.add_argument("--vth", type=int, default=d.v_threshold)
    p.add_argument("--leak", type=int, default=d.leak)
    p.add_argument("--winc", type=int, default=d.w_inc)
    p.add_argument("--i-teach", type=int, default=None)
    p.add_argument("--i-inhibit", type=int, default=d.i_inhibit)
    p.add_argument("--encoder-seed", type=lambda s: int(s, 0), default=d.encoder_seed)
    p.add_argument("--lfsr-seed", type=lambda s: int(s, 0), default=d.lfsr_seed)
    p.add_argument("--limit", type=int, default=None, help="cap on training samples")
    p.add_argument("--epochs", type=int, default=d.epochs)


def _config_from_args(args) -> RunConfig:
    return RunConfig(neurons=args.neurons, w_exp=args.wexp, t_steps=args.t_steps,
                     t_steps_train=args.t_steps_train, theta=args.theta,
                     v_threshold=args.vth, leak=args.leak, w_inc=args.winc,
                     i_teach=args.i_teach, i_inhibit=args.i_inhibit,
                     encoder_seed=args.encoder_seed, lfsr_seed=args.lfsr_seed,
                     limit=args.limit, epochs=args.epochs)


def _data_dir(args) -> str:
    path = args.data_dir or os.environ.get(ENV_DATA_DIR)
    if not path:
        raise ValueError(f"no dataset directory: pass --data-dir or set {ENV_DATA_DIR}")
    return path


def cmd_asm(args) -> int:
    try:
        text = open(args.input).read()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        program = asm.assemble(text, base=args.base)
    except asm.AssemblyError as e:
        for line, msg in e.errors:
            print(f"{args.input}:{line}: {msg}", file=sys.stderr)
        return 1
    with open(args.output, "wb") as fh:
        fh.write(program.data)
    print(f"{args.output}: {len(program.data)} bytes, {len(program.symbols)} symbols")
    return 0


def cmd_run(args) -> int:
    data = open(args.program, "rb").read()
    mem = iss.Memory(base=args.base, size=max(args.mem_size, len(data) + 65536))
    try:
        iss.load_program(mem, data)
    except (ValueError, iss.MemoryFault) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    cpu = iss.CpuState(pc=args.base)
    result = iss.run(cpu, mem, max_steps=args.max_steps)
    if args.counters:
        with open(args.counters, "w") as fh:
            fh.write(f"# config: program={args.program} base={args.base:#x} "
                     f"max_steps={args.max_steps}\n")
            fh.write(iss.retired_csv(cpu))
    if args.dump_regs:
        for i in range(0, 32, 4):
            print("  ".join(f"x{j:<2} {cpu.gpr[j]:#018x}" for j in range(i, i + 4)))
        ssr_names = ["acc", "vmem", "vth", "leak", "winc", "ltdp", "lfsr", "spikeout", "iext"]
        print("  ".join(f"{n}={cpu.ssr.read(i):#x}" for i, n in enumerate(ssr_names)))
    if result.status == "halted":
        print(f"halted: exit code {result.exit_code} after {result.steps} instructions")
        return result.exit_code
    if result.status == "trap":
        t = result.trap
        print(f"trap: {t.kind} at pc {t.pc:#x} ({t.detail:#x}) after {result.steps} instructions",
              file=sys.stderr)
        return 2
    print(f"step limit reached after {result.steps} instructions", file=sys.stderr)
    return 2


def _load_split(args, split: str, limit: int | None = None):
    ds = mnist.load_dataset(_data_dir(args), split)
    images, labels = ds.images, ds.labels
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    return images, labels


def _train_network(cfg: RunConfig, images, labels, log=print):
    prep = encoding.preprocess_batch(images, cfg.theta)
    net, stages = network.train_stages(
        prep, labels, cfg.neurons, cfg.lif(), cfg.w_exp, cfg.train_cfg(), cfg.test_cfg(),
        cfg.encoder_seed, cfg.lfsr_seed, epochs=cfg.epochs, log=log)
    return net, stages, prep


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    if cfg.neurons % 10:
        print("error: --neurons must be a multiple of 10", file=sys.stderr)
        return 1
    images, labels = _load_split(args, "train", cfg.limit)
    print(f"training {cfg.neurons} neurons on {len(images)} samples [{cfg.echo()}]")
    net, stages, prep = _train_network(cfg, images, labels)
    network.save_model(net, args.output)

    report_slice = min(len(prep), 5000)
    result = network.evaluate(net, prep[:report_slice], labels[:report_slice],
                              cfg.test_cfg(), cfg.encoder_seed)
    dead = network.dead_neuron_report(net, result.counts)
    report = {
        "config": {**dataclasses.asdict(cfg), "i_teach": cfg.resolved_i_teach()},
        "stages": stages,
        "train_slice_accuracy": result.accuracy,
        "on_counts": dead.on_counts.tolist(),
        "dead_neurons": dead.dead.tolist(),
        "spike_totals": dead.totals.tolist(),
    }
    report_path = args.report or args.output + ".report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"model: {args.output}  report: {report_path}")
    print(f"train-slice accuracy ({report_slice} samples): {result.accuracy:.4f}")
    print(f"dead neurons: {dead.dead.tolist() or 'none'}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    net = network.load_model(args.model)
    images, labels = _load_split(args, args.split, cfg.limit)
    prep = encoding.preprocess_batch(images, cfg.theta)
    result = network.evaluate(net, prep, labels, cfg.test_cfg(), cfg.encoder_seed)
    print(f"accuracy: {result.accuracy:.4f} on {len(labels)} {args.split} samples")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(f"# config: model={args.model} split={args.split} {cfg.echo()}\n")
            fh.write("index,label,predicted," +
                     ",".join(f"n{i}" for i in range(net.n_neurons)) + "\n")
            for row, idx in enumerate(result.indices):
                counts = ",".join(str(c) for c in result.counts[row])
                fh.write(f"{idx},{labels[idx]},{result.predictions[row]},{counts}\n")
    if args.confusion:
        with open(args.confusion, "w") as fh:
            fh.write(f"# config: model={args.model} split={args.split} {cfg.echo()}\n")
            fh.write("label\\predicted," + ",".join(map(str, range(10))) + "\n")
            for label in range(10):
                fh.write(f"{label}," + ",".join(map(str, result.confusion[label])) + "\n")
    return 0


def cmd_crosscheck(args) -> int:
    cfg = _config_from_args(args)
    if args.toy:
        net = crosscheck.toy_network()
        schedule = crosscheck.random_schedule(args.t_steps_toy, net.n_synapses,
                                              seed=args.sample)
        label = args.sample % 10
    else:
        if not args.model:
            print("error: --model is required without --toy", file=sys.stderr)
            return 1
        net = network.load_model(args.model)
        net.lfsr = cfg.lfsr_seed
        images, labels = _load_split(args, args.split)
        if not 0 <= args.sample < len(images):
            print(f"error: sample {args.sample} out of range", file=sys.stderr)
            return 1
        prep = encoding.preprocess_batch(images[args.sample:args.sample + 1], cfg.theta)[0]
        rng = encoding.sample_rng(cfg.encoder_seed, args.sample)
        schedule, _ = encoding.encode_schedule(encoding.normalize(prep).reshape(-1),
                                               rng, cfg.t_steps)
        label = int(labels[args.sample])
    variants = [("inference", False)] + ([("training", True)] if args.train else [])
    ok = True
    for name, train in variants:
        res = crosscheck.crosscheck_schedule(
            net, schedule, train=train, label=label,
            cfg=PresentationConfig(schedule.shape[0], cfg.resolved_i_teach(),
                                   cfg.i_inhibit, network.TRAIN if train else network.TEST))
        status = "PASS" if res.ok else f"FAIL ({res.divergence})"
        print(f"crosscheck {name}: {status}  prediction={res.prediction_isa} "
              f"instructions={res.steps}")
        ok &= res.ok
    return 0 if ok else 2


def _parse_grid(text: str | None, fallback) -> list[int]:
    if not text:
        return [fallback]
    return [int(v, 0) for v in text.split(",") if v]


def cmd_calibrate(args) -> int:
    cfg = _config_from_args(args)
    images, labels = _load_split(args, "train")
    holdout = args.holdout
    if len(images) <= holdout:
        print(f"error: need more than {holdout} training samples", file=sys.stderr)
        return 1
    train_n = min(cfg.limit or (len(images) - holdout), len(images) - holdout)
    grid = list(itertools.product(
        _parse_grid(args.wexp_grid, cfg.w_exp),
        _parse_grid(args.vth_grid, cfg.v_threshold),
        _parse_grid(args.winc_grid, cfg.w_inc),
        _parse_grid(args.theta_grid, cfg.theta),
        _parse_grid(args.i_teach_grid, 0) if args.i_teach_grid else [None],
    ))
    if not grid:
        print("error: empty calibration grid", file=sys.stderr)
        return 1
    print(f"calibrating over {len(grid)} grid points: train {train_n}, held-out {holdout}")
    rows = []
    for w_exp, vth, winc, theta, i_teach in grid:
        point = dataclasses.replace(cfg, w_exp=w_exp, v_threshold=vth, w_inc=winc,
                                    theta=theta, i_teach=i_teach)
        prep = encoding.preprocess_batch(images[:train_n], point.theta)
        prep_holdout = encoding.preprocess_batch(images[-holdout:], point.theta)
        net, _ = network.train_stages(
            prep, labels[:train_n], point.neurons, point.lif(), point.w_exp,
            point.train_cfg(), point.test_cfg(), point.encoder_seed, point.lfsr_seed,
            epochs=point.epochs)
        result = network.evaluate(net, prep_holdout, labels[-holdout:],
                                  point.test_cfg(), point.encoder_seed)
        rows.append((result.accuracy, point))
        print(f"  wexp={w_exp} vth={vth} winc={winc} theta={theta} "
              f"i_teach={point.resolved_i_teach()}: held-out {result.accuracy:.4f}")
    rows.sort(key=lambda r: -r[0])
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(f"# config: holdout={holdout} train={train_n} {cfg.echo()}\n")
            fh.write("rank,heldout_accuracy,wexp,vth,winc,theta,i_teach\n")
            for rank, (acc, point) in enumerate(rows):
                fh.write(f"{rank},{acc:.4f},{point.w_exp},{point.v_threshold},"
                         f"{point.w_inc},{point.theta},{point.resolved_i_teach()}\n")
    best_acc, best = rows[0]
    print(f"best: held-out {best_acc:.4f} with wexp={best.w_exp} vth={best.v_threshold} "
          f"winc={best.w_inc} theta={best.theta} i_teach={best.resolved_i_teach()}")
    if args.best_out:
        with open(args.best_out, "w") as fh:
            json.dump({**dataclasses.asdict(best), "i_teach": best.resolved_i_teach(),
                       "heldout_accuracy": best_acc}, fh, indent=2)
    return 0


def main(argv=None) -> int:
    parser = _Parser(prog="rvsnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("asm", help="assemble a program to a flat binary")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--base", type=lambda s: int(s, 0), default=asm.DEFAULT_BASE)
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("run", help="run a flat binary on the simulator")
    p.add_argument("program")
    p.add_argument("--base", type=lambda s: int(s, 0), default=iss.DEFAULT_BASE)
    p.add_argument("--max-steps", type=int, default=100_000_000)
    p.add_argument("--mem-size", type=lambda s: int(s, 0), default=iss.DEFAULT_MEM_SIZE)
    p.add_argument("--counters", help="write per-mnemonic retirement counters CSV")
    p.add_argument("--dump-regs", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train", help="train a model on MNIST")
    p.add_argument("--data-dir")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--report")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--data-dir")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--csv", help="per-sample CSV output")
    p.add_argument("--confusion", help="confusion matrix CSV output")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crosscheck", help="verify ISA path against the array engine")
    p.add_argument("--model")
    p.add_argument("--data-dir")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--toy", action="store_true", help="use a built-in toy model")
    p.add_argument("--t-steps-toy", type=int, default=32)
    p.add_argument("--train", action="store_true", help="also check the training variant")
    _add_config_flags(p)
    p.set_defaults(func=cmd_crosscheck)

    p = sub.add_parser("calibrate", help="grid-search configs on held-out data")
    p.add_argument("--data-dir")
    p.add_argument("--wexp-grid", default="128,256,512")
    p.add_argument("--vth-grid")
    p.add_argument("--winc-grid")
    p.add_argument("--theta-grid")
    p.add_argument("--i-teach-grid")
    p.add_argument("--holdout", type=int, default=5000)
    p.add_argument("--csv")
    p.add_argument("--best-out", help="write the best config as JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_calibrate)

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    try:
        return args.func(args)
    except (mnist.IdxFormatError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
