"""Transfer gains from adder error-injection points to outputs and the
aggregation of per-adder error moments into output noise power.

Mean errors ride the DC gain of the path, variances its energy; adder error
sources are treated as mutually independent and white in time, which is the
stationarity assumption the whole analysis rests on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errormodel import ErrorStats
from .netlist import Netlist, fanin_cone, topological_order

_WINDOW = 64
_MAX_STEPS = 1_000_000


class UnstableLoopError(RuntimeError):
    """Impulse energy still growing at the step cap."""


@dataclass(frozen=True)
class TransferGain:
    dc_gain: float                 # sum of the impulse response
    energy: float                  # sum of squares
    response: tuple[float, ...]


@dataclass(frozen=True)
class OutputNoise:
    """Normalized (1.N units) noise moments at one output."""

    mean: float
    variance: float
    mse: float

    @property
    def np_db(self) -> float:
        return 10.0 * math.log10(self.mse) if self.mse > 0.0 else float("-inf")


@dataclass
class NoiseReport:
    frac_bits: int
    outputs: dict[str, OutputNoise]
    adder_stats: dict[str, ErrorStats]
    assignment: dict[str, int]
    gains: dict[str, dict[str, TransferGain]] = field(default_factory=dict)

    @property
    def mean_mse(self) -> float:
        return sum(o.mse for o in self.outputs.values()) / len(self.outputs)

    @property
    def mean_np_db(self) -> float:
        m = self.mean_mse
        return 10.0 * math.log10(m) if m > 0.0 else float("-inf")

    @property
    def worst_np_db(self) -> float:
        return max(o.np_db for o in self.outputs.values())


def _ideal_responses(netlist: Netlist, inject_at: str | None,
                     tol: float) -> dict[str, list[float]]:
    """Simulate the ideal real-valued SFG with a unit impulse added at one
    node's output (primary inputs all zero); returns h per output node."""
    nodes = netlist.nodes
    order = [nid for nid in topological_order(netlist) if nodes[nid].kind != "delay"]
    state = {d: 0.0 for d in netlist.delays()}
    hs: dict[str, list[float]] = {out: [] for out in netlist.outputs}
    min_steps = 1 if not state else len(state) + _WINDOW + 1
    total_energy = 0.0
    t = 0
    while True:
        vals: dict[str, float] = dict(state)
        for nid in order:
            node = nodes[nid]
            if node.kind == "input":
                v = 0.0
            elif node.kind == "add":
                v = vals[node.inputs[0]] + vals[node.inputs[1]]
            elif node.kind == "sub":
                v = vals[node.inputs[0]] - vals[node.inputs[1]]
            elif node.kind == "mul":
                v = float(node.coeff) * vals[node.inputs[0]]
            else:  # output
                v = vals[node.inputs[0]]
            if nid == inject_at and t == 0:
                v += 1.0
            vals[nid] = v
        # vals holds pre-step values for delay ids, so delay-to-delay chains
        # all capture the previous step, like simultaneously clocked registers
        for d in state:
            state[d] = vals[nodes[d].inputs[0]]
        for out, h in hs.items():
            h.append(vals[out])
            total_energy += vals[out] * vals[out]
        t += 1
        if t >= min_steps:
            if not state:
                break
            tail = sum(v * v for h in hs.values() for v in h[-_WINDOW:])
            if total_energy == 0.0 or tail <= tol * total_energy:
                break
            if t >= _MAX_STEPS:
                raise UnstableLoopError(
                    f"impulse energy from {inject_at!r} still significant "
                    f"after {t} steps")
    return hs


def _trim(h: list[float]) -> tuple[float, ...]:
    last = len(h)
    while last > 1 and h[last - 1] == 0.0:
        last -= 1
    return tuple(h[:last])


def compute_gains(netlist: Netlist, tol: float = 1e-12,
                  adders: list[str] | None = None) -> dict[str, dict[str, TransferGain]]:
    """Transfer gains adder -> output for every (adder, output) pair."""
    cones = {out: fanin_cone(netlist, out) for out in netlist.outputs}
    gains: dict[str, dict[str, TransferGain]] = {}
    for adder in adders if adders is not None else netlist.adders():
        hs = _ideal_responses(netlist, adder, tol)
        per_out = {}
        for out in netlist.outputs:
            if adder not in cones[out]:
                continue
            h = _trim(hs[out])
            per_out[out] = TransferGain(sum(h), sum(v * v for v in h), h)
        gains[adder] = per_out
    return gains


def impulse_response(netlist: Netlist, adder_id: str, output_id: str,
                     tol: float = 1e-12) -> TransferGain:
    """Impulse response from one adder's error-injection point to an output."""
    if adder_id not in fanin_cone(netlist, output_id):
        raise ValueError(f"{adder_id!r} is not in the fan-in cone of {output_id!r}")
    hs = _ideal_responses(netlist, adder_id, tol)
    h = _trim(hs[output_id])
    return TransferGain(sum(h), sum(v * v for v in h), h)


def input_responses(netlist: Netlist, tol: float = 1e-12) -> dict[str, dict[str, TransferGain]]:
    """Transfer gains primary input -> output (used for warmup sizing)."""
    gains: dict[str, dict[str, TransferGain]] = {}
    for inp in netlist.inputs():
        hs = _ideal_responses(netlist, inp, tol)
        gains[inp] = {}
        for out, h in hs.items():
            ht = _trim(h)
            gains[inp][out] = TransferGain(sum(ht), sum(v * v for v in ht), ht)
    return gains


def aggregate_output_mse(stats: dict[str, ErrorStats],
                         gains: dict[str, TransferGain], frac_bits: int) -> OutputNoise:
    """Superpose independent white adder error sources at one output."""
    mean_lsb = 0.0
    var_lsb = 0.0
    for adder, st in stats.items():
        tg = gains[adder]
        mean_lsb += st.mean * tg.dc_gain
        var_lsb += st.variance * tg.energy
    mean = mean_lsb * 2.0 ** -frac_bits
    var = var_lsb * 4.0 ** -frac_bits
    return OutputNoise(mean, var, mean * mean + var)


def model_report(netlist: Netlist, assignment: dict[str, int], kinds,
                 prob_mode: str = "markov", ma_refine: bool = True,
                 gains: dict[str, dict[str, TransferGain]] | None = None,
                 tol: float = 1e-12) -> NoiseReport:
    """Full analytical noise report: error model + transfer-gain aggregation."""
    from .errormodel import circuit_error_stats

    stats, _ = circuit_error_stats(netlist, assignment, kinds, prob_mode, ma_refine)
    if gains is None:
        gains = compute_gains(netlist, tol)
    outputs = {}
    for out in netlist.outputs:
        cone = {ad: stats[ad] for ad in stats if out in gains.get(ad, {})}
        outputs[out] = aggregate_output_mse(
            cone, {ad: gains[ad][out] for ad in cone}, netlist.frac_bits)
    return NoiseReport(netlist.frac_bits, outputs, stats, dict(assignment), gains)
