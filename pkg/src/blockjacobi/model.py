"""Block Jacobi models: coefficient generators, the model zoo and JSON specs.

A model is determined by its dimension ``d`` and two vectorised generators
that map an integer index array ``n`` to stacks of ``(d, d)`` blocks ``A_n``
and ``B_n``. The boundary convention ``A_{-1} = -I`` is fixed everywhere, so
``A_{-1}`` is never produced by a generator.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import matspec
from .errors import InvalidSpec

BlockGen = Callable[[np.ndarray], np.ndarray]

VALIDATION_PREFIX = 1000
MEMO_LIMIT = 1_000_000
SINGULAR_COND = 1e12


@dataclass
class PeriodData:
    """Periodic skeleton of a (possibly modulated) model.

    ``A`` and ``B`` hold one period of blocks. For a modulated model the actual
    coefficients are ``c_n * A[n % N]`` and ``c_n * B[n % N]``.
    """

    N: int
    A: np.ndarray
    B: np.ndarray
    modulated: bool = False


class JacobiModel:
    """Coefficient source for a block Jacobi matrix.

    Parameters
    ----------
    d : block dimension, 1 <= d <= 16.
    gen_a, gen_b : vectorised generators ``n -> (len(n), d, d)``.
    name : label used in reports.
    spec : JSON-compatible spec when the model came from one (used for hashing).
    period : optional periodic skeleton for the periodic analysis.
    validate : check the first 1000 indices for Hermitian B and invertible A.
    """

    def __init__(self, d: int, gen_a: BlockGen, gen_b: BlockGen, name: str = "model",
                 spec: dict | None = None, period: PeriodData | None = None,
                 validate: bool = True, memo_limit: int = MEMO_LIMIT):
        if not 1 <= int(d) <= matspec.MAX_BLOCK_DIM:
            raise InvalidSpec(f"block dimension must be in [1, 16], got {d}")
        self.d = int(d)
        self._gen_a = gen_a
        self._gen_b = gen_b
        self.name = name
        self.spec = spec
        self.period = period
        self.memo_limit = int(memo_limit)
        self._lock = threading.Lock()
        self._A = np.zeros((0, self.d, self.d), dtype=complex)
        self._B = np.zeros((0, self.d, self.d), dtype=complex)
        if validate:
            self._validate(VALIDATION_PREFIX)

    @classmethod
    def from_callables(cls, d: int, block_a: Callable[[int], object],
                       block_b: Callable[[int], object], **kw) -> "JacobiModel":
        """Build a model from per-index callables ``n -> block``."""

        def wrap(f):
            def gen(idx):
                return np.stack([matspec.as_block(f(int(k)), d) for k in idx]) \
                    if len(idx) else np.zeros((0, d, d), dtype=complex)
            return gen

        return cls(d, wrap(block_a), wrap(block_b), **kw)

    def _generate(self, n0: int, n1: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(n0, n1, dtype=np.int64)
        a = np.asarray(self._gen_a(idx), dtype=complex).reshape(len(idx), self.d, self.d)
        b = np.asarray(self._gen_b(idx), dtype=complex).reshape(len(idx), self.d, self.d)
        return a, b

    def _validate(self, count: int) -> None:
        a, b = self.blocks(0, count)
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            bad = int(np.argmax(~(np.isfinite(a).all(axis=(1, 2)) & np.isfinite(b).all(axis=(1, 2)))))
            raise InvalidSpec(f"non-finite coefficient at n={bad}", index=bad)
        herm_err = np.max(np.abs(b - matspec.adjoint(b)), axis=(1, 2))
        scale = np.maximum(np.max(np.abs(b), axis=(1, 2)), 1.0)
        bad = np.nonzero(herm_err > 1e-12 * scale)[0]
        if bad.size:
            raise InvalidSpec(f"B_{bad[0]} is not Hermitian", index=int(bad[0]))
        sv = matspec.singular_values(a)
        cond = np.where(sv[:, -1] > 0, sv[:, 0] / np.where(sv[:, -1] > 0, sv[:, -1], 1.0), np.inf)
        bad = np.nonzero(cond > SINGULAR_COND)[0]
        if bad.size:
            raise InvalidSpec(f"A_{bad[0]} is singular", index=int(bad[0]))

    def blocks(self, n0: int, n1: int) -> tuple[np.ndarray, np.ndarray]:
        """Stacks ``A[n0:n1]`` and ``B[n0:n1]`` (indices n0 <= n < n1, n0 >= 0)."""
        if n0 < 0 or n1 < n0:
            raise ValueError(f"bad index range [{n0}, {n1})")
        if n1 <= self._A.shape[0]:
            return self._A[n0:n1], self._B[n0:n1]
        if n1 > self.memo_limit:
            return self._generate(n0, n1)
        with self._lock:
            have = self._A.shape[0]
            if n1 > have:
                # grow geometrically so repeated extension stays linear overall
                target = min(max(n1, 2 * have, 64), self.memo_limit)
                a, b = self._generate(have, target)
                self._A = np.concatenate([self._A, a])
                self._B = np.concatenate([self._B, b])
            return self._A[n0:n1], self._B[n0:n1]

    def A(self, n: int) -> np.ndarray:
        """Off-diagonal block A_n; ``A(-1)`` is the boundary block ``-I``."""
        if n == -1:
            return -np.eye(self.d, dtype=complex)
        return self.blocks(n, n + 1)[0][0]

    def B(self, n: int) -> np.ndarray:
        return self.blocks(n, n + 1)[1][0]

    def spec_hash(self) -> str:
        """Short digest of the canonical spec (or of the name for API-built models)."""
        payload = self.spec if self.spec is not None else {"name": self.name, "d": self.d}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def __repr__(self) -> str:
        return f"JacobiModel(name={self.name!r}, d={self.d})"


# ---------------------------------------------------------------------------
# scalar sequences and generator helpers


def _const_gen(block: np.ndarray) -> BlockGen:
    block = np.asarray(block, dtype=complex)

    def gen(idx):
        return np.broadcast_to(block, (len(idx),) + block.shape).copy()
    return gen


def _diag_gen(seqs: list[Callable[[np.ndarray], np.ndarray]]) -> BlockGen:
    d = len(seqs)

    def gen(idx):
        out = np.zeros((len(idx), d, d), dtype=complex)
        for i, s in enumerate(seqs):
            out[:, i, i] = s(idx)
        return out
    return gen


def power_sequence(coef: float = 1.0, exponent: float = 0.0, offset: float = 0.0):
    """n -> coef * (n+1)^exponent * (1 + offset/(n+1))."""

    def seq(idx):
        m = np.asarray(idx, dtype=float) + 1.0
        return coef * m ** exponent * (1.0 + offset / m)
    return seq


def _periodic_gen(blocks: np.ndarray, scale: Callable | None = None) -> BlockGen:
    blocks = np.asarray(blocks, dtype=complex)
    N = blocks.shape[0]

    def gen(idx):
        out = blocks[np.asarray(idx) % N]
        if scale is not None:
            out = out * np.asarray(scale(idx), dtype=float)[:, None, None]
        return out
    return gen


# ---------------------------------------------------------------------------
# model zoo


def free(d: int = 1) -> JacobiModel:
    """A_n = I, B_n = 0: the free block Jacobi matrix (semicircle law for d=1)."""
    eye = np.eye(d, dtype=complex)
    spec = {"name": "free", "d": d, "kind": "free", "params": {}}
    return JacobiModel(d, _const_gen(eye), _const_gen(0 * eye), name="free", spec=spec,
                       period=PeriodData(1, eye[None], 0 * eye[None]))


def explicit(blocks_a, blocks_b, tail: str = "constant", name: str = "explicit",
             spec: dict | None = None) -> JacobiModel:
    """Model from a finite list of blocks.

    ``tail="constant"`` repeats the last pair forever, ``tail="periodic"``
    cycles through the list (and registers it as the period).
    """
    a = np.stack([matspec.as_block(x) for x in blocks_a])
    b = np.stack([matspec.as_block(x) for x in blocks_b])
    if a.shape != b.shape or a.shape[0] == 0:
        raise InvalidSpec("explicit blocks need equally many A and B blocks, at least one")
    d = a.shape[1]
    L = a.shape[0]
    if tail == "constant":
        def pick(arr):
            return lambda idx: arr[np.minimum(np.asarray(idx), L - 1)]
        gen_a, gen_b, period = pick(a), pick(b), None
        if L == 1:
            period = PeriodData(1, a, b)
    elif tail == "periodic":
        gen_a, gen_b = _periodic_gen(a), _periodic_gen(b)
        period = PeriodData(L, a, b)
    else:
        raise InvalidSpec(f"unknown tail rule {tail!r}")
    return JacobiModel(d, gen_a, gen_b, name=name, spec=spec, period=period)


def diagonal(components: list[tuple[Callable, Callable]], name: str = "diagonal",
             spec: dict | None = None) -> JacobiModel:
    """Direct sum of scalar Jacobi matrices given by vectorised sequences (a_i, b_i)."""
    if not components:
        raise InvalidSpec("diagonal model needs at least one component")
    return JacobiModel(len(components), _diag_gen([c[0] for c in components]),
                       _diag_gen([c[1] for c in components]), name=name, spec=spec)


def laguerre(alpha: float = 0.0) -> JacobiModel:
    """Jacobi matrix of the Laguerre weight x^alpha e^{-x}/Gamma(alpha+1) on (0, inf)."""
    if not alpha > -1:
        warnings.warn(f"laguerre alpha={alpha} is outside the range alpha > -1", stacklevel=2)

    def a(idx):
        m = np.asarray(idx, dtype=float) + 1.0
        return np.sqrt(m * (m + alpha) + 0j)

    def b(idx):
        return 2.0 * np.asarray(idx, dtype=float) + 1.0 + alpha

    spec = {"name": f"laguerre({alpha:g})", "d": 1, "kind": "laguerre", "params": {"alpha": alpha}}
    return JacobiModel(1, _diag_gen([a]), _diag_gen([b]), name=spec["name"], spec=spec)


def kostyuchenko(kappa: float, f: float, g: float) -> JacobiModel:
    """A_n = (n+1)^kappa (1 + f/(n+1)), B_n = 2 (n+1)^kappa (1 + g/(n+1)).

    The intended regime is 1 < kappa <= 3/2, f, g > -1 and kappa + 2g - 2f < 0;
    parameters outside it only trigger a warning.
    """
    if not (1 < kappa <= 1.5 and f > -1 and g > -1 and kappa + 2 * g - 2 * f < 0):
        warnings.warn(
            f"kostyuchenko({kappa:g}, {f:g}, {g:g}) is outside the regime "
            "1 < kappa <= 3/2, f, g > -1, kappa + 2g - 2f < 0", stacklevel=2)
    spec = {"name": f"kostyuchenko({kappa:g},{f:g},{g:g})", "d": 1, "kind": "kostyuchenko",
            "params": {"kappa": kappa, "f": f, "g": g}}
    return JacobiModel(1, _diag_gen([power_sequence(1.0, kappa, f)]),
                       _diag_gen([power_sequence(2.0, kappa, g)]), name=spec["name"], spec=spec)


def power_diagonal(alphas) -> JacobiModel:
    """Diagonal model with a_n^(i) = (n+1)^alpha_i and zero diagonal."""
    alphas = [float(x) for x in alphas]
    zero = power_sequence(0.0)
    spec = {"name": "powerDiagonal(" + ",".join(f"{x:g}" for x in alphas) + ")",
            "d": len(alphas), "kind": "powerDiagonal", "params": {"alphas": alphas}}
    return diagonal([(power_sequence(1.0, x), zero) for x in alphas], name=spec["name"], spec=spec)


def periodic_modulated(period_a, period_b, modulation: Callable | None = None,
                       name: str = "periodicModulated", spec: dict | None = None) -> JacobiModel:
    """A_n = c_n Acal_{n mod N}, B_n = c_n Bcal_{n mod N}; default c_n = n + 1."""
    pa = np.stack([matspec.as_block(x) for x in period_a])
    pb = np.stack([matspec.as_block(x) for x in period_b])
    if pa.shape != pb.shape:
        raise InvalidSpec("period blocks for A and B must match in count and size")
    c = modulation if modulation is not None else power_sequence(1.0, 1.0)
    return JacobiModel(pa.shape[1], _periodic_gen(pa, c), _periodic_gen(pb, c), name=name,
                       spec=spec, period=PeriodData(pa.shape[0], pa, pb, modulated=True))


def asymp_periodic(period_a, period_b, decay: float = 2.0, pert_a=None, pert_b=None,
                   name: str = "asympPeriodic", spec: dict | None = None) -> JacobiModel:
    """Periodic blocks plus a perturbation decaying like (n+1)^-decay.

    A_n = Acal_{n mod N} + (n+1)^-decay P_A and likewise for B (P_B Hermitian).
    """
    pa = np.stack([matspec.as_block(x) for x in period_a])
    pb = np.stack([matspec.as_block(x) for x in period_b])
    if pa.shape != pb.shape:
        raise InvalidSpec("period blocks for A and B must match in count and size")
    d = pa.shape[1]
    qa = np.zeros((d, d), complex) if pert_a is None else matspec.as_block(pert_a, d)
    qb = np.zeros((d, d), complex) if pert_b is None else matspec.as_block(pert_b, d)
    N = pa.shape[0]

    def gen(period, pert):
        def g(idx):
            idx = np.asarray(idx)
            w = (idx.astype(float) + 1.0) ** (-decay)
            return period[idx % N] + w[:, None, None] * pert
        return g

    return JacobiModel(d, gen(pa, qa), gen(pb, qb), name=name, spec=spec,
                       period=PeriodData(N, pa, pb))


# ---------------------------------------------------------------------------
# JSON model specs


def _parse_entry(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise InvalidSpec(f"complex entry must be [re, im], got {x!r}")
        return complex(float(x[0]), float(x[1]))
    return complex(float(x))


def parse_block(obj, d: int) -> np.ndarray:
    """Parse a block from JSON: a scalar (d=1) or a list of rows of entries."""
    try:
        # for d = 1 a bare number or [re, im] stands for the single entry
        if d == 1 and not (isinstance(obj, list) and obj and isinstance(obj[0], list)):
            return np.array([[_parse_entry(obj)]])
        rows = [[_parse_entry(e) for e in row] for row in obj]
        arr = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise InvalidSpec(f"cannot parse block {obj!r}: {exc}") from None
    if arr.shape != (d, d):
        raise InvalidSpec(f"block has shape {arr.shape}, expected {(d, d)}")
    return arr


def _scalar_seq(obj):
    if isinstance(obj, (int, float)):
        return power_sequence(float(obj), 0.0)
    if isinstance(obj, dict):
        return power_sequence(float(obj.get("coef", 1.0)), float(obj.get("exponent", 0.0)),
                              float(obj.get("offset", 0.0)))
    raise InvalidSpec(f"cannot parse scalar sequence {obj!r}")


def model_from_spec(spec: dict) -> JacobiModel:
    """Build a model from a ModelSpec dictionary.

    Keys: ``name``, ``d``, ``kind``, ``params`` and, for explicit models,
    ``explicitBlocks`` (a list of ``[A, B]`` pairs). Complex entries are
    written as ``[re, im]``.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InvalidSpec("model spec must be an object with a 'kind' field")
    kind = spec["kind"]
    params = spec.get("params") or {}
    name = spec.get("name", kind)
    try:
        d = int(spec.get("d", 1))
    except (TypeError, ValueError):
        raise InvalidSpec("d must be an integer") from None
    canonical = {"name": name, "d": d, "kind": kind, "params": params}
    if "explicitBlocks" in spec:
        canonical["explicitBlocks"] = spec["explicitBlocks"]

    def blocks(key):
        if key not in params:
            raise InvalidSpec(f"{kind} model needs params.{key}")
        return [parse_block(x, d) for x in params[key]]

    try:
        if kind == "free":
            m = free(d)
        elif kind == "explicit":
            pairs = spec.get("explicitBlocks")
            if not pairs:
                raise InvalidSpec("explicit model needs explicitBlocks")
            a = [parse_block(p[0], d) for p in pairs]
            b = [parse_block(p[1], d) for p in pairs]
            m = explicit(a, b, tail=params.get("tail", "constant"), name=name)
        elif kind == "diagonal":
            comps = params.get("components")
            if not comps or len(comps) != d:
                raise InvalidSpec("diagonal model needs d entries in params.components")
            m = diagonal([(_scalar_seq(c.get("a", 1.0)), _scalar_seq(c.get("b", 0.0)))
                          for c in comps], name=name)
        elif kind == "laguerre":
            m = laguerre(float(params.get("alpha", 0.0)))
        elif kind == "kostyuchenko":
            m = kostyuchenko(float(params["kappa"]), float(params["f"]), float(params["g"]))
        elif kind == "powerDiagonal":
            m = power_diagonal(params["alphas"])
        elif kind == "periodicModulated":
            mod = params.get("modulation", {"coef": 1.0, "exponent": 1.0})
            m = periodic_modulated(blocks("periodA"), blocks("periodB"), _scalar_seq(mod),
                                   name=name)
        elif kind == "asympPeriodic":
            pert = params.get("perturbation", {})
            m = asymp_periodic(blocks("periodA"), blocks("periodB"),
                               decay=float(pert.get("decay", 2.0)),
                               pert_a=parse_block(pert["A"], d) if "A" in pert else None,
                               pert_b=parse_block(pert["B"], d) if "B" in pert else None,
                               name=name)
        else:
            raise InvalidSpec(f"unknown model kind {kind!r}")
    except KeyError as exc:
        raise InvalidSpec(f"{kind} model is missing parameter {exc}") from None
    if m.d != d:
        raise InvalidSpec(f"spec says d={d} but the {kind} model has d={m.d}")
    m.name = name
    m.spec = canonical
    return m


def load_model(path) -> JacobiModel:
    """Read a ModelSpec JSON file."""
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise InvalidSpec(f"cannot read model spec: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"model spec is not valid JSON: {exc}") from None
    return model_from_spec(spec)


def named_model(text: str) -> JacobiModel:
    """Shorthand such as ``free``, ``laguerre(0.5)``, ``kostyuchenko(1.2,0,-1)``."""
    text = text.strip()
    head, _, rest = text.partition("(")
    args = [float(x) for x in rest.rstrip(")").split(",") if x.strip()] if rest else []
    if head == "free":
        return free(int(args[0]) if args else 1)
    if head == "laguerre":
        return laguerre(args[0] if args else 0.0)
    if head == "kostyuchenko" and len(args) == 3:
        return kostyuchenko(*args)
    if head == "powerDiagonal" and args:
        return power_diagonal(args)
    raise InvalidSpec(f"unknown model shorthand {text!r}")


# ---------------------------------------------------------------------------
# Carleman diagnostic


@dataclass
class CarlemanReport:
    """Partial sums rho_n = sum_{k<n} 1/||A_k|| and a tri-state divergence verdict.

    ``rho[i]`` is rho_{i+1}. ``growth_fit`` holds the fitted exponent p of the
    increments 1/||A_k|| ~ k^-p (from dyadic block sums), the log-log slope of
    rho on the tail, and the slope of rho against log n.
    """

    rho: np.ndarray
    diverging: str
    growth_fit: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rho_final": float(self.rho[-1]), "diverging": self.diverging,
                "growth_fit": self.growth_fit}


def carleman(model: JacobiModel, N: int) -> CarlemanReport:
    """Decide heuristically whether sum 1/||A_n|| diverges, from N terms.

    The increments are grouped in dyadic blocks [2^j, 2^{j+1}); by Cauchy
    condensation the series diverges iff the block sums do not decay
    geometrically. The slope s of log2(block sum) against j gives the
    increment exponent p = 1 - s. Verdict: "yes" if p <= 1.01, "no" if
    p >= 1.05 or the tail is flat to 1e-6 relative, "inconclusive" otherwise.
    """
    if N < 10:
        raise InvalidSpec("carleman needs N >= 10")
    a, _ = model.blocks(0, N)
    inc = 1.0 / matspec.op_norm(a)
    rho = np.cumsum(inc)
    n = np.arange(1, N + 1)

    J = int(math.floor(math.log2(N)))
    js = np.arange(1, J)
    sums = np.array([inc[2 ** j:2 ** (j + 1)].sum() for j in js])
    use = js[-4:], sums[-4:]
    slope = float(np.polyfit(use[0], np.log2(use[1]), 1)[0]) if len(use[0]) >= 2 else 0.0
    p = 1.0 - slope

    half = N // 2
    tail = slice(half - 1, N)
    loglog = float(np.polyfit(np.log(n[tail]), np.log(rho[tail]), 1)[0])
    logcoef = float(np.polyfit(np.log(n[tail]), rho[tail], 1)[0])

    flat = rho[-1] - rho[half - 1] < 1e-6 * rho[-1]
    if flat or p >= 1.05:
        verdict = "no"
    elif p <= 1.01:
        verdict = "yes"
    else:
        verdict = "inconclusive"
    fit = {"increment_exponent": p, "tail_loglog_slope": loglog, "log_coefficient": logcoef,
           "tail_flat": bool(flat)}
    return CarlemanReport(rho=rho, diverging=verdict, growth_fit=fit)


def formal_apply(model: JacobiModel, u: np.ndarray) -> np.ndarray:
    """Apply the formal block Jacobi operator to u_0..u_N, returning indices 0..N-1.

    ``u`` has shape ``(N+1, d)`` or ``(N+1, d, k)``; the n-th output is
    ``A_{n-1}^* u_{n-1} + B_n u_n + A_n u_{n+1}`` (no first term at n = 0).
    """
    u = np.asarray(u, dtype=complex)
    vec = u.ndim == 2
    if vec:
        u = u[..., None]
    N = u.shape[0] - 1
    if N < 1:
        raise ValueError("need at least two entries u_0, u_1")
    a, b = model.blocks(0, N)
    out = b @ u[:N] + a @ u[1:]
    out[1:] += matspec.adjoint(a[:N - 1]) @ u[:N - 1]
    return out[..., 0] if vec else out
