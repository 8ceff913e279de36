"""Functional RV64I + SNN instruction-set simulator.

Machine-level only: flat little-endian memory, no CSRs, no interrupts.
`ebreak` halts with the exit code taken from a0; `ecall` and any undefined
word trap.  Loads and stores must be naturally aligned.  Per-mnemonic
retirement counters are kept as a work proxy for the instruction mix (no
timing or power is modeled).

The SNN special register file lives in CpuState.ssr with the write-masking
rules from the ISA (LTDP to 10 bits, LFSR to 16 bits with 0 coerced to 1,
SPIKEOUT to 1 bit, indices 9-15 read 0 / ignore writes).  The SNN execute
semantics call into core.py, so the instruction path is bit-identical to
the array engine.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

from . import core
from .isa import (
    Instruction,
    IllegalInstruction,
    SSR_ACC, SSR_VMEM, SSR_VTH, SSR_LEAK, SSR_WINC, SSR_LTDP, SSR_LFSR,
    SSR_SPIKEOUT, SSR_IEXT, SSR_COUNT,
    decode,
)

DEFAULT_BASE = 0x8000_0000
DEFAULT_MEM_SIZE = 64 * 1024 * 1024
A0 = 10

U64 = (1 << 64) - 1
U32 = (1 << 32) - 1


def _sext64(v: int) -> int:
    return v - (1 << 64) if v & (1 << 63) else v


def _sext32(v: int) -> int:
    v &= U32
    return v - (1 << 32) if v & (1 << 31) else v


class MemoryFault(Exception):
    def __init__(self, addr: int, reason: str):
        super().__init__(f"{reason} at {addr:#x}")
        self.addr = addr
        self.reason = reason


@dataclass
class Memory:
    """Flat byte-addressable RAM with little-endian accessors."""

    base: int = DEFAULT_BASE
    size: int = DEFAULT_MEM_SIZE
    data: bytearray = field(default=None)

    _FMT = {1: "<B", 2: "<H", 4: "<I", 8: "<Q"}

    def __post_init__(self):
        if self.data is None:
            self.data = bytearray(self.size)

    def _offset(self, addr: int, width: int) -> int:
        off = addr - self.base
        if off < 0 or off + width > self.size:
            raise MemoryFault(addr, "access outside memory")
        if addr % width:
            raise MemoryFault(addr, f"misaligned {width}-byte access")
        return off

    def load(self, addr: int, width: int, signed: bool = False) -> int:
        off = self._offset(addr, width)
        v = struct.unpack_from(self._FMT[width], self.data, off)[0]
        if signed and v & (1 << (width * 8 - 1)):
            v -= 1 << (width * 8)
        return v

    def store(self, addr: int, width: int, value: int) -> None:
        off = self._offset(addr, width)
        struct.pack_into(self._FMT[width], self.data, off, value & ((1 << (width * 8)) - 1))


def load_program(mem: Memory, data: bytes, base: int | None = None) -> None:
    """Copy a flat program image into memory at base."""
    base = mem.base if base is None else base
    if len(data) % 4:
        raise ValueError(f"program length {len(data)} is not a multiple of 4")
    off = base - mem.base
    if off < 0 or off + len(data) > mem.size:
        raise MemoryFault(base, f"program of {len(data)} bytes does not fit")
    mem.data[off:off + len(data)] = data


class SnnRegisterFile:
    """The 16-entry special register file with per-index write masking.

    Indices above IEXT (8) are reserved: reads return 0, writes are ignored.
    """

    def __init__(self):
        self.regs = [0] * SSR_COUNT
        self.regs[SSR_LFSR] = 1      # reset value; zero is rejected on write too

    def read(self, index: int) -> int:
        if index > SSR_IEXT:
            return 0
        return self.regs[index]

    def write(self, index: int, value: int) -> None:
        if index > SSR_IEXT:
            return
        value &= U64
        if index == SSR_LTDP:
            value &= 0x3FF
        elif index == SSR_LFSR:
            value &= 0xFFFF
            if value == 0:
                value = 1
        elif index == SSR_SPIKEOUT:
            value &= 1
        self.regs[index] = value


@dataclass
class TrapInfo:
    kind: str
    pc: int
    detail: int     # offending word or address


@dataclass
class RunResult:
    status: str             # halted | trap | step-limit
    exit_code: int = 0
    steps: int = 0
    trap: TrapInfo | None = None


class Halt(Exception):
    def __init__(self, code: int):
        self.code = code


class Trap(Exception):
    def __init__(self, info: TrapInfo):
        self.info = info


class CpuState:
    def __init__(self, pc: int = DEFAULT_BASE):
        self.pc = pc
        self.gpr = [0] * 32          # canonical unsigned 0 <= v < 2**64; x0 stays 0
        self.ssr = SnnRegisterFile()
        self.retired: Counter[str] = Counter()
        self.halted = False
        self.exit_code = 0

    def set_gpr(self, index: int, value: int) -> None:
        if index:
            self.gpr[index] = value & U64


@lru_cache(maxsize=65536)
def _decode_cached(word: int) -> Instruction:
    return decode(word)


def exec_snn(cpu: CpuState, i: Instruction) -> None:
    """Execute one SNN-extension instruction against the SSR file."""
    ssr = cpu.ssr
    if i.name == "snn.sp":
        count = core.spike_process(cpu.gpr[i.rs1], cpu.gpr[i.rs2])
        ssr.write(SSR_ACC, ssr.read(SSR_ACC) + count)
        cpu.set_gpr(i.rd, count)
    elif i.name == "snn.nu":
        # all operands sign-extended; lif_step is total even for degenerate params
        v_mem, spiked = core.lif_step(
            _sext64(ssr.read(SSR_VMEM)), _sext64(ssr.read(SSR_ACC)),
            _sext64(ssr.read(SSR_WINC)), _sext64(ssr.read(SSR_LEAK)),
            _sext64(ssr.read(SSR_VTH)), _sext64(ssr.read(SSR_IEXT)))
        ssr.write(SSR_VMEM, v_mem)
        ssr.write(SSR_ACC, 0)
        ssr.write(SSR_SPIKEOUT, 1 if spiked else 0)
        cpu.set_gpr(i.rd, 1 if spiked else 0)
    elif i.name == "snn.up":
        weights, lfsr = core.synapse_update_segment(
            cpu.gpr[i.rs2], cpu.gpr[i.rs1], bool(ssr.read(SSR_SPIKEOUT)),
            ssr.read(SSR_LTDP), ssr.read(SSR_LFSR))
        cpu.set_gpr(i.rd, weights)
        ssr.write(SSR_LFSR, lfsr)
    elif i.name == "snn.mv.x2s":
        ssr.write(i.ssr, cpu.gpr[i.rs1])
    elif i.name == "snn.mv.s2x":
        cpu.set_gpr(i.rd, ssr.read(i.ssr))
    else:
        raise AssertionError(i.name)


def _execute(cpu: CpuState, mem: Memory, i: Instruction, pc: int) -> int:
    """Execute one decoded instruction; returns the next pc."""
    g = cpu.gpr
    name = i.name
    nxt = pc + 4
    if name == "addi":
        cpu.set_gpr(i.rd, g[i.rs1] + i.imm)
    elif name == "add":
        cpu.set_gpr(i.rd, g[i.rs1] + g[i.rs2])
    elif name == "sub":
        cpu.set_gpr(i.rd, g[i.rs1] - g[i.rs2])
    elif name in ("lb", "lh", "lw", "ld"):
        width = {"lb": 1, "lh": 2, "lw": 4, "ld": 8}[name]
        cpu.set_gpr(i.rd, mem.load(g[i.rs1] + i.imm & U64, width, signed=True))
    elif name in ("lbu", "lhu", "lwu"):
        width = {"lbu": 1, "lhu": 2, "lwu": 4}[name]
        cpu.set_gpr(i.rd, mem.load(g[i.rs1] + i.imm & U64, width))
    elif name in ("sb", "sh", "sw", "sd"):
        width = {"sb": 1, "sh": 2, "sw": 4, "sd": 8}[name]
        mem.store(g[i.rs1] + i.imm & U64, width, g[i.rs2])
    elif name == "beq":
        nxt = pc + i.imm if g[i.rs1] == g[i.rs2] else nxt
    elif name == "bne":
        nxt = pc + i.imm if g[i.rs1] != g[i.rs2] else nxt
    elif name == "blt":
        nxt = pc + i.imm if _sext64(g[i.rs1]) < _sext64(g[i.rs2]) else nxt
    elif name == "bge":
        nxt = pc + i.imm if _sext64(g[i.rs1]) >= _sext64(g[i.rs2]) else nxt
    elif name == "bltu":
        nxt = pc + i.imm if g[i.rs1] < g[i.rs2] else nxt
    elif name == "bgeu":
        nxt = pc + i.imm if g[i.rs1] >= g[i.rs2] else nxt
    elif name == "jal":
        cpu.set_gpr(i.rd, nxt)
        nxt = pc + i.imm
    elif name == "jalr":
        target = (g[i.rs1] + i.imm) & ~1 & U64
        cpu.set_gpr(i.rd, nxt)
        nxt = target
    elif name == "lui":
        cpu.set_gpr(i.rd, _sext32(i.imm << 12))
    elif name == "auipc":
        cpu.set_gpr(i.rd, pc + _sext32(i.imm << 12))
    elif name == "xori":
        cpu.set_gpr(i.rd, g[i.rs1] ^ (i.imm & U64))
    elif name == "ori":
        cpu.set_gpr(i.rd, g[i.rs1] | (i.imm & U64))
    elif name == "andi":
        cpu.set_gpr(i.rd, g[i.rs1] & (i.imm & U64))
    elif name == "xor":
        cpu.set_gpr(i.rd, g[i.rs1] ^ g[i.rs2])
    elif name == "or":
        cpu.set_gpr(i.rd, g[i.rs1] | g[i.rs2])
    elif name == "and":
        cpu.set_gpr(i.rd, g[i.rs1] & g[i.rs2])
    elif name == "slti":
        cpu.set_gpr(i.rd, 1 if _sext64(g[i.rs1]) < i.imm else 0)
    elif name == "sltiu":
        cpu.set_gpr(i.rd, 1 if g[i.rs1] < (i.imm & U64) else 0)
    elif name == "slt":
        cpu.set_gpr(i.rd, 1 if _sext64(g[i.rs1]) < _sext64(g[i.rs2]) else 0)
    elif name == "sltu":
        cpu.set_gpr(i.rd, 1 if g[i.rs1] < g[i.rs2] else 0)
    elif name == "slli":
        cpu.set_gpr(i.rd, g[i.rs1] << i.imm)
    elif name == "srli":
        cpu.set_gpr(i.rd, g[i.rs1] >> i.imm)
    elif name == "srai":
        cpu.set_gpr(i.rd, _sext64(g[i.rs1]) >> i.imm)
    elif name == "sll":
        cpu.set_gpr(i.rd, g[i.rs1] << (g[i.rs2] & 63))
    elif name == "srl":
        cpu.set_gpr(i.rd, g[i.rs1] >> (g[i.rs2] & 63))
    elif name == "sra":
        cpu.set_gpr(i.rd, _sext64(g[i.rs1]) >> (g[i.rs2] & 63))
    elif name == "addiw":
        cpu.set_gpr(i.rd, _sext32(g[i.rs1] + i.imm))
    elif name == "addw":
        cpu.set_gpr(i.rd, _sext32(g[i.rs1] + g[i.rs2]))
    elif name == "subw":
        cpu.set_gpr(i.rd, _sext32(g[i.rs1] - g[i.rs2]))
    elif name == "slliw":
        cpu.set_gpr(i.rd, _sext32(g[i.rs1] << i.imm))
    elif name == "srliw":
        cpu.set_gpr(i.rd, _sext32((g[i.rs1] & U32) >> i.imm))
    elif name == "sraiw":
        cpu.set_gpr(i.rd, _sext32(g[i.rs1]) >> i.imm)
    elif name == "sllw":
        cpu.set_gpr(i.rd, _sext32(g[i.rs1] << (g[i.rs2] & 31)))
    elif name == "srlw":
        cpu.set_gpr(i.rd, _sext32((g[i.rs1] & U32) >> (g[i.rs2] & 31)))
    elif name == "sraw":
        cpu.set_gpr(i.rd, _sext32(g[i.rs1]) >> (g[i.rs2] & 31))
    elif name == "fence":
        pass
    elif name == "ebreak":
        raise Halt(_sext64(cpu.gpr[A0]))
    elif name == "ecall":
        raise Trap(TrapInfo("ecall", pc, 0x00000073))
    elif name.startswith("snn."):
        exec_snn(cpu, i)
    else:
        raise AssertionError(name)
    return nxt & U64


def step(cpu: CpuState, mem: Memory) -> RunResult:
    """Fetch-decode-execute one instruction; returns the resulting event."""
    if cpu.halted:
        raise RuntimeError("stepping a halted CPU")
    pc = cpu.pc
    try:
        word = mem.load(pc, 4)
    except MemoryFault:
        return RunResult(status="trap", trap=TrapInfo("fetch-fault", pc, pc), steps=0)
    try:
        instr = _decode_cached(word)
    except IllegalInstruction:
        return RunResult(status="trap", trap=TrapInfo("illegal-instruction", pc, word), steps=0)
    try:
        cpu.pc = _execute(cpu, mem, instr, pc)
    except Halt as h:
        cpu.retired[instr.name] += 1
        cpu.halted = True
        cpu.exit_code = h.code
        return RunResult(status="halted", exit_code=h.code, steps=1)
    except Trap as t:
        return RunResult(status="trap", trap=t.info, steps=0)
    except MemoryFault as f:
        return RunResult(status="trap", trap=TrapInfo("memory-fault", pc, f.addr), steps=0)
    cpu.retired[instr.name] += 1
    return RunResult(status="continue", steps=1)


def run(cpu: CpuState, mem: Memory, max_steps: int = 100_000_000) -> RunResult:
    """Step until halt, trap, or the step limit."""
    steps = 0
    while steps < max_steps:
        event = step(cpu, mem)
        steps += event.steps
        if event.status == "halted":
            return RunResult(status="halted", exit_code=event.exit_code, steps=steps)
        if event.status == "trap":
            return RunResult(status="trap", trap=event.trap, steps=steps)
    return RunResult(status="step-limit", steps=steps)


def retired_csv(cpu: CpuState) -> str:
    """Retirement counters as CSV, one row per mnemonic."""
    lines = ["mnemonic,count"]
    for name, count in sorted(cpu.retired.items()):
        lines.append(f"{name},{count}")
    return "\n".join(lines) + "\n"
