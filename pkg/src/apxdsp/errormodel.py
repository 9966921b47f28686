"""Parameterized error statistics for approximate adders.

The model computes exact first and second moments of one adder's error
under a per-bit input distribution (independent bits, a Markov chain over
the bit positions, or deterministic constants) and propagates static bit
probabilities through a netlist so that every adder sees the distribution
its parents actually produce instead of a blanket uniform assumption.

All error statistics are on the integer LSB grid (one LSB = 2**-N);
conversion to normalized units happens once, in the noise module.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .adders import AdderKind, BitRule, truth_table
from .netlist import Netlist, check_assignment, topological_order

# kernel[s][v][s'] = P(bit = v, next state = s' | state = s), one kernel per
# bit position, LSB first
Kernel = tuple[tuple[tuple[float, ...], ...], ...]

_MARKOV_STATE_CAP = 64  # beyond this, collapse propagated processes to marginals


@dataclass(frozen=True)
class BitProcess:
    """Distribution of a signal's low-order bits, LSB first."""

    mode: str                      # independent | constant | markov
    init: tuple[float, ...]        # state distribution before bit 0
    kernels: tuple[Kernel, ...]
    fill: int | None = None        # constant mode only

    def __len__(self) -> int:
        return len(self.kernels)

    @property
    def nstates(self) -> int:
        return len(self.init)

    @classmethod
    def independent(cls, probs) -> "BitProcess":
        probs = [min(1.0, max(0.0, float(p))) for p in probs]
        kernels = tuple((((1.0 - p,), (p,)),) for p in probs)
        return cls("independent", (1.0,), kernels)

    @classmethod
    def uniform(cls, length: int) -> "BitProcess":
        return cls.independent([0.5] * length)

    @classmethod
    def constant(cls, fill: int, length: int) -> "BitProcess":
        if not 0 <= fill < 1 << length:
            raise ValueError(f"fill {fill} does not fit in {length} bits")
        proc = cls.independent([(fill >> i) & 1 for i in range(length)])
        return cls("constant", proc.init, proc.kernels, fill)

    @classmethod
    def markov(cls, init, kernels) -> "BitProcess":
        init = tuple(float(p) for p in init)
        kernels = tuple(
            tuple(tuple(tuple(float(p) for p in row) for row in bit) for bit in kern)
            for kern in kernels)
        for kern in kernels:
            for srow in kern:
                total = sum(p for bit in srow for p in bit)
                if abs(total - 1.0) > 1e-9:
                    raise ValueError(f"markov rows must sum to 1, got {total}")
        return cls("markov", init, kernels)

    def head(self, k: int) -> "BitProcess":
        if k > len(self):
            raise ValueError(f"process has {len(self)} bits, need {k}")
        if k == len(self):
            return self
        fill = self.fill & ((1 << k) - 1) if self.fill is not None else None
        return BitProcess(self.mode, self.init, self.kernels[:k], fill)

    def flipped(self) -> "BitProcess":
        """Swap the emitted bit (models two's-complement bit flipping)."""
        kernels = tuple((tuple((kern[s][1], kern[s][0]) for s in range(self.nstates)))
                        for kern in self.kernels)
        fill = None
        if self.fill is not None:
            fill = self.fill ^ ((1 << len(self)) - 1)
        return BitProcess(self.mode, self.init, kernels, fill)

    def marginals(self) -> tuple[float, ...]:
        pi = list(self.init)
        out = []
        for kern in self.kernels:
            p1 = 0.0
            nxt = [0.0] * self.nstates
            for s, ps in enumerate(pi):
                if ps == 0.0:
                    continue
                for v in (0, 1):
                    for s2, p in enumerate(kern[s][v]):
                        nxt[s2] += ps * p
                        if v:
                            p1 += ps * p
            pi = nxt
            out.append(p1)
        return tuple(out)

    def as_independent(self) -> "BitProcess":
        if self.mode != "markov":
            return self
        return BitProcess.independent(self.marginals())

    def reversed(self) -> "BitProcess":
        """Time-reversed chain (bit order MSB->LSB), same joint law."""
        if self.nstates == 1:
            return BitProcess(self.mode, self.init, tuple(self.kernels[::-1]), None)
        pis = [list(self.init)]
        for kern in self.kernels:
            pi = pis[-1]
            nxt = [0.0] * self.nstates
            for s, ps in enumerate(pi):
                if ps == 0.0:
                    continue
                for v in (0, 1):
                    for s2, p in enumerate(kern[s][v]):
                        nxt[s2] += ps * p
            pis.append(nxt)
        rkernels = []
        for i in range(len(self.kernels) - 1, -1, -1):
            kern, pin, pout = self.kernels[i], pis[i], pis[i + 1]
            rk = [[[0.0] * self.nstates for _ in (0, 1)] for _ in range(self.nstates)]
            for s, ps in enumerate(pin):
                if ps == 0.0:
                    continue
                for v in (0, 1):
                    for s2, p in enumerate(kern[s][v]):
                        if pout[s2] > 0.0:
                            rk[s2][v][s] += ps * p / pout[s2]
            rkernels.append(tuple(tuple(tuple(r) for r in bit) for bit in rk))
        return BitProcess("markov", tuple(pis[-1]), tuple(rkernels))


@dataclass(frozen=True)
class ErrorStats:
    """Moments of one adder's error e = true lower sum - approximate result."""

    mean: float                    # LSB units
    mse: float                     # LSB^2
    out_probs: tuple[float, ...]   # P(approximate sum bit = 1)
    carry_prob: float              # P(carry into the accurate part)

    @property
    def variance(self) -> float:
        return max(self.mse - self.mean * self.mean, 0.0)


_ZERO_STATS = ErrorStats(0.0, 0.0, (), 0.0)


def carry_profile(kind: AdderKind, p_a, p_b, k: int, mode: str = "positional") -> list[float]:
    """Per-position carry probabilities, or the stationary fixed point.

    positional iterates the carry recursion from carry-in 0; stationary
    solves p = h(p) for the (affine) one-step map and repeats it k times.
    """
    rule = truth_table(kind)  # raises for eta1, which has no carry chain
    p_a, p_b = list(p_a), list(p_b)
    if len(p_a) < k or len(p_b) < k:
        raise ValueError(f"need {k} bit probabilities per operand")

    def rate(i: int, c: int) -> float:
        r = 0.0
        for va in (0, 1):
            pa = p_a[i] if va else 1.0 - p_a[i]
            for vb in (0, 1):
                pb = p_b[i] if vb else 1.0 - p_b[i]
                r += pa * pb * rule.g[va | vb << 1 | c << 2]
        return r

    if mode == "positional":
        prof = []
        pc = 0.0
        for i in range(k):
            pc = (1.0 - pc) * rate(i, 0) + pc * rate(i, 1)
            prof.append(pc)
        return prof
    if mode == "stationary":
        r0 = sum(rate(i, 0) for i in range(k)) / k
        r1 = sum(rate(i, 1) for i in range(k)) / k
        slope = r1 - r0
        assert -1.0 < slope < 1.0, "carry map must be a contraction"
        p = r0 / (1.0 - slope)
        return [min(1.0, max(0.0, p))] * k
    raise ValueError(f"unknown mode {mode!r}")


def _moment_dp(rule: BitRule, k: int, in_a: BitProcess, in_b: BitProcess):
    """LSB->MSB DP over (carry, input states); returns mean, mse, probs, carry."""
    sa_n, sb_n = in_a.nstates, in_b.nstates
    cur: dict[tuple[int, int, int], list[float]] = {}
    for sa in range(sa_n):
        for sb in range(sb_n):
            p0 = in_a.init[sa] * in_b.init[sb]
            if p0:
                cur[(0, sa, sb)] = [p0, 0.0, 0.0]
    out_probs = []
    for i in range(k):
        ka, kb = in_a.kernels[i], in_b.kernels[i]
        w = float(1 << i)
        nxt: dict[tuple[int, int, int], list[float]] = {}
        p_one = 0.0
        for (c, sa, sb), (m0, m1, m2) in cur.items():
            for va in (0, 1):
                for sa2, pa in enumerate(ka[sa][va]):
                    if pa == 0.0:
                        continue
                    for vb in (0, 1):
                        for sb2, pb in enumerate(kb[sb][vb]):
                            if pb == 0.0:
                                continue
                            p = pa * pb
                            idx = va | vb << 1 | c << 2
                            s_hat = rule.f[idx]
                            d = (va + vb - s_hat) * w
                            key = (rule.g[idx], sa2, sb2)
                            acc = nxt.get(key)
                            if acc is None:
                                acc = [0.0, 0.0, 0.0]
                                nxt[key] = acc
                            acc[0] += p * m0
                            acc[1] += p * (m1 + d * m0)
                            acc[2] += p * (m2 + 2.0 * d * m1 + d * d * m0)
                            if s_hat:
                                p_one += p * m0
        cur = nxt
        out_probs.append(min(1.0, max(0.0, p_one)))
    corr = float(1 << k)
    mean = mse = carry = 0.0
    for (c, _, _), (m0, m1, m2) in cur.items():
        if c:
            carry += m0
            mean += m1 - corr * m0
            mse += m2 - 2.0 * corr * m1 + corr * corr * m0
        else:
            mean += m1
            mse += m2
    return mean, mse, tuple(out_probs), min(1.0, max(0.0, carry))


def _eta1_dp(k: int, in_a: BitProcess, in_b: BitProcess):
    """MSB->LSB DP with a trigger flag over time-reversed input chains."""
    ra, rb = in_a.reversed(), in_b.reversed()
    sa_n, sb_n = ra.nstates, rb.nstates
    cur: dict[tuple[int, int, int], list[float]] = {}
    for sa in range(sa_n):
        for sb in range(sb_n):
            p0 = ra.init[sa] * rb.init[sb]
            if p0:
                cur[(0, sa, sb)] = [p0, 0.0, 0.0]
    out_probs = [0.0] * k
    for j in range(k):
        i = k - 1 - j
        ka, kb = ra.kernels[j], rb.kernels[j]
        w = float(1 << i)
        nxt: dict[tuple[int, int, int], list[float]] = {}
        p_one = 0.0
        for (t, sa, sb), (m0, m1, m2) in cur.items():
            for va in (0, 1):
                for sa2, pa in enumerate(ka[sa][va]):
                    if pa == 0.0:
                        continue
                    for vb in (0, 1):
                        for sb2, pb in enumerate(kb[sb][vb]):
                            if pb == 0.0:
                                continue
                            p = pa * pb
                            if t:
                                t2, s_hat, d = 1, 1, (va + vb - 1) * w
                            elif va & vb:
                                t2, s_hat, d = 1, 1, w  # generate: this and below saturate
                            else:
                                t2, s_hat, d = 0, va ^ vb, 0.0
                            key = (t2, sa2, sb2)
                            acc = nxt.get(key)
                            if acc is None:
                                acc = [0.0, 0.0, 0.0]
                                nxt[key] = acc
                            acc[0] += p * m0
                            acc[1] += p * (m1 + d * m0)
                            acc[2] += p * (m2 + 2.0 * d * m1 + d * d * m0)
                            if s_hat:
                                p_one += p * m0
        cur = nxt
        out_probs[i] = min(1.0, max(0.0, p_one))
    mean = sum(m[1] for m in cur.values())
    mse = sum(m[2] for m in cur.values())
    return mean, mse, tuple(out_probs), 0.0


_TRUNC_RULE = BitRule((0,) * 8, (0,) * 8)


@lru_cache(maxsize=100_000)
def adder_stats(kind: AdderKind, k: int, in_a: BitProcess, in_b: BitProcess,
                fill_override: int | None = None) -> ErrorStats:
    """Exact error moments of one (N,k) approximate adder.

    Inputs are the processes of the k low bits of each operand (longer
    processes are truncated). A median fill override replaces the lower-part
    sum by that constant; the error then reduces to (lower input sum - fill).
    """
    if k == 0:
        return _ZERO_STATS
    in_a, in_b = in_a.head(k), in_b.head(k)
    if fill_override is not None:
        if kind != AdderKind.MEDIAN:
            raise ValueError("fill override is only defined for the median adder")
        m1, m2, _, _ = _moment_dp(_TRUNC_RULE, k, in_a, in_b)
        f = float(fill_override)
        out_probs = tuple(float((fill_override >> i) & 1) for i in range(k))
        return ErrorStats(m1 - f, m2 - 2.0 * f * m1 + f * f, out_probs, 0.0)
    if kind == AdderKind.ETA1:
        mean, mse, probs, carry = _eta1_dp(k, in_a, in_b)
    else:
        mean, mse, probs, carry = _moment_dp(truth_table(kind), k, in_a, in_b)
    return ErrorStats(mean, mse, probs, carry)


def mult_prob_rule(coeff: Fraction, in_probs, k_out: int) -> list[float]:
    """Static probabilities of a constant multiplier's low output bits.

    Power-of-two coefficients shift (and, for negative signs, flip) the
    multiplicand's bit probabilities; anything else makes the low output
    bits effectively uniform. Bits beyond the known region default to 0.5.
    """
    in_probs = list(in_probs)
    if coeff == 0:
        return [0.0] * k_out
    num, den = abs(coeff.numerator), coeff.denominator
    pow2 = num & (num - 1) == 0 and den & (den - 1) == 0
    if not pow2:
        return [0.5] * k_out
    l = num.bit_length() - den.bit_length()
    neg = coeff < 0

    def tap(i: int) -> float:
        p = in_probs[i] if i < len(in_probs) else 0.5
        return 1.0 - p if neg else p

    out = []
    for i in range(k_out):
        if l >= 0:
            out.append(0.0 if i < l else tap(i - l))
        else:
            out.append(tap(i - l))
    return out


def ma_fill_constant(k3: int, parent_kinds, k1: int, k2: int) -> int:
    """Lower-part constant for a median adder given its parents.

    With two median parents whose approximate regions reach this adder's
    (k3 <= max(k1, k2)), the incoming lower words are all-ones, so doubling
    the plain fill minus one tracks the true lower sum far better.
    """
    parent_kinds = tuple(parent_kinds)
    if (len(parent_kinds) == 2
            and all(pk == AdderKind.MEDIAN for pk in parent_kinds)
            and k3 <= max(k1, k2)):
        return (1 << (k3 + 1)) - 1
    return (1 << k3) - 1


def _resolve_through_delays(netlist: Netlist, nid: str) -> str:
    seen = set()
    while netlist.nodes[nid].kind == "delay" and nid not in seen:
        seen.add(nid)
        nid = netlist.nodes[nid].inputs[0]
    return nid


def median_fills(netlist: Netlist, assignment: dict[str, int],
                 kinds: dict[str, AdderKind], refine: bool = True) -> dict[str, int | None]:
    """Per-adder fill override (None means the plain 2**k - 1 constant)."""
    fills: dict[str, int | None] = {}
    for nid in netlist.adders():
        node = netlist.nodes[nid]
        k = assignment[nid]
        fills[nid] = None
        if not refine or kinds[nid] != AdderKind.MEDIAN or k == 0 or node.kind != "add":
            continue
        parents = [_resolve_through_delays(netlist, s) for s in node.inputs]
        if not all(netlist.nodes[p].kind in ("add", "sub") for p in parents):
            continue
        fill = ma_fill_constant(k, (kinds[parents[0]], kinds[parents[1]]),
                                assignment[parents[0]], assignment[parents[1]])
        if fill != (1 << k) - 1:
            fills[nid] = fill
    return fills


def _ama2_output_process(rule: BitRule, k: int, length: int,
                         in_a: BitProcess, in_b: BitProcess) -> BitProcess | None:
    """Markov process of an AMA2 sum: emission is the complemented carry."""
    sa_n, sb_n = in_a.nstates, in_b.nstates
    nstates = 2 * sa_n * sb_n
    if nstates > _MARKOV_STATE_CAP:
        return None

    def sid(c, sa, sb):
        return (c * sa_n + sa) * sb_n + sb

    init = [0.0] * nstates
    for sa, pa in enumerate(in_a.init):
        for sb, pb in enumerate(in_b.init):
            init[sid(0, sa, sb)] = pa * pb
    kernels = []
    for i in range(k):
        ka, kb = in_a.kernels[i], in_b.kernels[i]
        kern = [[[0.0] * nstates for _ in (0, 1)] for _ in range(nstates)]
        for c in (0, 1):
            for sa in range(sa_n):
                for sb in range(sb_n):
                    s = sid(c, sa, sb)
                    for va in (0, 1):
                        for sa2, pa in enumerate(ka[sa][va]):
                            if pa == 0.0:
                                continue
                            for vb in (0, 1):
                                for sb2, pb in enumerate(kb[sb][vb]):
                                    if pb == 0.0:
                                        continue
                                    idx = va | vb << 1 | c << 2
                                    kern[s][rule.f[idx]][sid(rule.g[idx], sa2, sb2)] += pa * pb
        kernels.append(tuple(tuple(tuple(r) for r in bit) for bit in kern))
    # accurate-region bits: uniform, state frozen
    for _ in range(k, length):
        kern = [[[0.0] * nstates for _ in (0, 1)] for _ in range(nstates)]
        for s in range(nstates):
            kern[s][0][s] = 0.5
            kern[s][1][s] = 0.5
        kernels.append(tuple(tuple(tuple(r) for r in bit) for bit in kern))
    return BitProcess("markov", tuple(init), tuple(kernels))


def circuit_error_stats(netlist: Netlist, assignment: dict[str, int],
                        kinds: AdderKind | dict[str, AdderKind],
                        mode: str = "markov", ma_refine: bool = True,
                        ) -> tuple[dict[str, ErrorStats], dict[str, BitProcess]]:
    """Per-adder error stats plus the propagated per-node bit processes.

    mode selects the modeling fidelity: "uniform" feeds every adder iid 0.5
    bits, "marginal" propagates static probabilities but keeps output bits
    independent, "markov" additionally carries inter-bit correlation for
    AMA2 outputs through their carry chain.
    """
    if mode not in ("uniform", "marginal", "markov"):
        raise ValueError(f"unknown prob mode {mode!r}")
    check_assignment(netlist, assignment)
    if isinstance(kinds, AdderKind):
        kinds = {nid: kinds for nid in netlist.adders()}
    n = netlist.frac_bits
    fills = median_fills(netlist, assignment, kinds, ma_refine)
    order = topological_order(netlist)
    nodes = netlist.nodes
    delays = netlist.delays()
    uniform_n = BitProcess.uniform(n)

    if mode == "uniform":
        stats = {}
        for nid in netlist.adders():
            k = assignment[nid]
            stats[nid] = adder_stats(kinds[nid], k, BitProcess.uniform(k),
                                     BitProcess.uniform(k), fills[nid])
        return stats, {nid: uniform_n for nid in nodes}

    belief = {d: uniform_n for d in delays}
    procs: dict[str, BitProcess] = {}
    stats: dict[str, ErrorStats] = {}
    for _ in range(max(1, 8 * bool(delays))):
        procs = dict(belief)
        stats = {}
        new_belief = {}
        for nid in order:
            node = nodes[nid]
            if node.kind == "input":
                procs[nid] = uniform_n
            elif node.kind == "delay":
                src = node.inputs[0]
                new_belief[nid] = belief[src] if nodes[src].kind == "delay" else procs[src]
            elif node.kind == "output":
                procs[nid] = procs[node.inputs[0]]
            elif node.kind == "mul":
                marg = procs[node.inputs[0]].marginals()
                procs[nid] = BitProcess.independent(mult_prob_rule(node.coeff, marg, n))
            else:  # add / sub
                k = assignment[nid]
                kind = kinds[nid]
                in_a = procs[node.inputs[0]].head(k) if k else BitProcess.uniform(0)
                in_b = procs[node.inputs[1]].head(k) if k else BitProcess.uniform(0)
                if mode == "marginal":
                    in_a, in_b = in_a.as_independent(), in_b.as_independent()
                if node.kind == "sub":
                    in_b = in_b.flipped()
                st = adder_stats(kind, k, in_a, in_b, fills[nid])
                stats[nid] = st
                out = None
                if mode == "markov" and kind == AdderKind.AMA2 and k > 0:
                    out = _ama2_output_process(truth_table(kind), k, n, in_a, in_b)
                if out is None:
                    out = BitProcess.independent(st.out_probs + (0.5,) * (n - k))
                procs[nid] = out
        if not delays:
            break
        if all(_close(new_belief[d].marginals(), belief[d].marginals()) for d in delays):
            belief = new_belief
            break
        belief = new_belief
    for d in delays:
        procs[d] = belief[d]
    return stats, procs


def _close(a, b, tol=1e-12):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def propagate_probs(netlist: Netlist, assignment: dict[str, int],
                    kinds: AdderKind | dict[str, AdderKind],
                    mode: str = "markov", ma_refine: bool = True) -> dict[str, BitProcess]:
    """Map node id -> bit process of its low-order fractional bits."""
    _, procs = circuit_error_stats(netlist, assignment, kinds, mode, ma_refine)
    return procs
