"""Experiment orchestration: configs, sweeps over noise strength, reference
placement, result records and their emission.

A sweep point is a physical channel infidelity ``epsilon`` (worst case over
input states).  Each point's channel is decomposed, assigned a reference
strength whose pools it can be rejection re-sampled from, and estimated by
the stratified engine.  Records are deterministic under a fixed config;
wall-clock timings live only in the emitted header.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import channels as ch
from .circuit import CircuitSpec, NoiseLayout
from .harness import logical
from .harness.clinr import build_clinr, conditional_fidelity, random_clifford_circuit
from .harness.steane import build_steane_protocol
from .harness.surface import build_surface_memory
from .pauli import PauliString
from .sampling.engine import EngineSettings, Precision, StratifiedEngine
from .sampling.rejection import UnboundedRatio, predicted_acceptance
from .sampling.strata import poisson_binomial

SCHEMA_VERSION = 1
PROTOCOLS = ("steane", "surface", "clinr", "circuit")
TABLE_COLUMNS = ("protocol", "channel", "d", "epsilon", "logical_infidelity", "std", "average_infidelity",
                 "average_std", "epsilon_ref", "reference_samples")


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------
# channels at a given physical infidelity


def _closed_form(name: str, eps: float) -> Optional[float]:
    if name == "depolarizing":
        return 1.5 * eps
    if name == "amplitude_damping":
        return eps
    if name == "z_rotation":
        return 2.0 * math.asin(math.sqrt(eps))
    if name == "random_unitary":
        return math.asin(math.sqrt(eps))
    return None


_STRENGTH = {"depolarizing": "p", "amplitude_damping": "p", "z_rotation": "theta", "random_unitary": "delta",
             "worst_surface": "eps", "random_nonunitary": "omega"}


def channel_family(spec: dict) -> Callable[[float], ch.KrausChannel]:
    """``strength -> channel`` for a spec naming a family (its strength key omitted)."""
    name = spec.get("name")
    if name not in _STRENGTH:
        raise ConfigError(f"channel family {name!r} has no strength parameter; known: {sorted(_STRENGTH)}")
    key = _STRENGTH[name]
    base = {k: v for k, v in spec.items() if k != key}
    if name == "random_nonunitary":
        # one draw of the Kraus directions, reused at every strength
        rng = np.random.default_rng(base.get("seed", 0))
        J = int(base.get("J", 3))
        ops = [rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(J - 1)]
        return lambda w: ch.completed_channel(ops, w, name=f"random_nonunitary(J={J},omega={w})")
    return lambda s: ch.channel_from_spec({**base, key: s})


def channel_at(spec: dict, eps: float) -> ch.KrausChannel:
    """The member of ``spec``'s family with worst-case infidelity ``eps``."""
    if not 0 < eps < 0.5:
        raise ConfigError(f"physical infidelity must lie in (0, 0.5), got {eps}")
    make = channel_family(spec)
    s = _closed_form(spec["name"], eps)
    if s is not None:
        return make(s)
    f = lambda w: ch.worst_case_infidelity(make(w), grid=4000) - eps
    hi = 1e-6
    while f(hi) < 0:
        hi *= 4
        if hi > 1:
            raise ConfigError(f"{spec['name']} cannot reach infidelity {eps}")
    w = brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-10)
    return make(w)


# ----------------------------------------------------------------------
# config


@dataclass
class ExperimentConfig:
    """Keys of the JSON config file (all optional except ``protocol``)."""

    protocol: str = "steane"
    channel: dict = field(default_factory=lambda: {"name": "depolarizing"})
    epsilons: list = field(default_factory=list)
    log_range: Optional[list] = None  # [lo, hi, count], merged with ``epsilons``
    distances: list = field(default_factory=lambda: [3])
    basis: str = "choi"
    decoder: str = "uf"
    cycles: Optional[int] = None
    input_state: Optional[str] = None
    precision: dict = field(default_factory=lambda: {"relative": 0.1, "confidence": 0.99})
    seed: int = 0
    pool_dir: Optional[str] = None
    workers: int = 1
    budget: int = 200_000
    acceptance_floor: float = 0.95
    references: list = field(default_factory=list)  # explicit epsilon_ref candidates
    clinr: dict = field(default_factory=lambda: {"n": 2, "s": 64, "omega_g_max": 2.0, "mode": "clinr"})
    circuit: Optional[object] = None  # path or dict of a custom circuit
    t: Optional[int] = None

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        if not isinstance(self.channel, dict) or "name" not in self.channel:
            raise ConfigError("channel must be a mapping with a 'name'")
        if any(not (e > 0) for e in self.sweep):
            raise ConfigError("sweep values must be positive")
        rel = self.precision.get("relative", 0.1)
        conf = self.precision.get("confidence", 0.99)
        if not (0 < rel < 1 and 0 < conf < 1):
            raise ConfigError("precision and confidence must lie in (0, 1)")
        if not 0 < self.acceptance_floor <= 1:
            raise ConfigError("acceptance floor must lie in (0, 1]")
        if self.workers < 1 or self.budget < 1:
            raise ConfigError("workers and budget must be positive")
        if self.protocol == "circuit" and self.circuit is None:
            raise ConfigError("protocol 'circuit' needs a 'circuit' file or mapping")

    @property
    def sweep(self) -> list:
        vals = [float(e) for e in self.epsilons]
        if self.log_range:
            lo, hi, count = self.log_range
            if lo <= 0 or hi <= 0:
                raise ConfigError("sweep values must be positive")
            vals += np.geomspace(lo, hi, int(count)).tolist()
        return sorted(set(vals))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


# ----------------------------------------------------------------------
# protocols


def circuit_from_dict(d: dict) -> CircuitSpec:
    """Custom circuit: ``n``, ``initial`` (signed Pauli generators), ``observables``
    and/or ``target``, and ``ops`` as ``["G", name, [qubits]]``, ``["N", qubit]``,
    ``["M", qubit, key]``, ``["MP", pauli, key]``, ``["R", qubit]``.  Noise
    locations are numbered in order of appearance.
    """
    n = int(d["n"])
    ops, a, keys = [], 0, 0
    for op in d["ops"]:
        kind = op[0]
        if kind == "G":
            ops.append(("G", op[1].upper(), tuple(int(q) for q in op[2])))
        elif kind == "N":
            ops.append(("N", a, int(op[-1])))
            a += 1
        elif kind == "M":
            ops.append(("M", int(op[1]), int(op[2])))
            keys = max(keys, int(op[2]) + 1)
        elif kind == "MP":
            ops.append(("MP", PauliString.from_str(op[1]), int(op[2])))
            keys = max(keys, int(op[2]) + 1)
        elif kind == "R":
            ops.append(("R", int(op[1])))
        else:
            raise ConfigError(f"unknown circuit op {kind!r}")
    gens = [PauliString.from_str(s) for s in d["initial"]]
    obs = [PauliString.from_str(s) for s in d.get("observables", [])]
    target = [PauliString.from_str(s) for s in d["target"]] if d.get("target") else None
    meta = {"protocol": "circuit", "t": int(d.get("t", 0))}
    return CircuitSpec(n=n, ops=ops, A=a, rho_terms=[(1.0, gens)], observables=obs, target=target, n_keys=keys,
                       name=d.get("name", "circuit"), meta=meta)


def build_protocol(config: ExperimentConfig, d: Optional[int] = None) -> CircuitSpec:
    p = config.protocol
    if p == "steane":
        return build_steane_protocol(config.input_state)
    if p == "surface":
        return build_surface_memory(d, config.basis, config.decoder, config.cycles)[0]
    if p == "clinr":
        c = dict(config.clinr)
        gates = c.get("gates")
        if gates is None:
            gates = random_clifford_circuit(int(c.get("n", 2)), int(c.get("s", 64)),
                                            np.random.default_rng(c.get("circuit_seed", config.seed)))
        return build_clinr(gates, float(c.get("omega_g_max", 2.0)), c.get("mode", "clinr"), config.seed,
                           float(c.get("log_base", 2.0)), c.get("t_parts"))[1]
    src = config.circuit
    if not isinstance(src, dict):
        src = json.loads(Path(src).read_text())
    return circuit_from_dict(src)


def logical_infidelity(spec: CircuitSpec, f, cov) -> dict:
    """Worst-case and average infidelity (with error bars) of a readout estimate."""
    proto = spec.meta.get("protocol")
    if proto in ("steane", "surface") and spec.readout_size == 12:
        s = logical.summarize(f, cov)
        return {"logical_infidelity": s.worst_infidelity, "std": s.worst_std,
                "average_infidelity": s.average_infidelity, "average_std": s.average_std}
    if proto == "clinr":
        F, sd = conditional_fidelity(f, cov)
        return {"logical_infidelity": 1.0 - F, "std": sd, "average_infidelity": 1.0 - F, "average_std": sd}
    sc = spec.meta.get("score")
    w = np.asarray(sc[0], dtype=float) if sc else np.eye(spec.readout_size)[-1]
    b = float(sc[1]) if sc else 0.0
    ideal = np.asarray(spec.meta.get("ideal_readout", np.ones(spec.readout_size)), dtype=float)
    val = float(ideal @ w + b - (np.asarray(f) @ w + b))
    sd = float(np.sqrt(max(w @ np.asarray(cov) @ w, 0.0))) if cov is not None else 0.0
    return {"logical_infidelity": val, "std": sd, "average_infidelity": val, "average_std": sd}


# ----------------------------------------------------------------------
# reference placement


def relevant_ks(layout: NoiseLayout, t: int, mass: float = 1e-4, cap: int = 64) -> list:
    """Strata above ``t`` holding all but ``mass`` of the fault-count law beyond ``t``."""
    p = poisson_binomial(layout.gammas)
    ks = np.arange(t + 1, len(p))
    order = ks[np.argsort(-p[ks], kind="stable")]
    rest, out = float(p[ks].sum()), []
    for k in order:
        if rest <= mass * float(p[ks].sum()) or len(out) >= cap:
            break
        out.append(int(k))
        rest -= p[k]
    return sorted(out)


def coverage(ref: NoiseLayout, target: NoiseLayout, ks) -> float:
    """Smallest predicted acceptance over ``ks`` (0 when the ratio is unbounded)."""
    if ref.hash() == target.hash():
        return 1.0
    try:
        return min((predicted_acceptance(ref, target, k) for k in ks), default=1.0)
    except UnboundedRatio:
        return 0.0


def plan_references(eps: list, accept: Callable[[float, float], float], floor: float = 0.95,
                    candidates=()) -> dict:
    """``{epsilon: epsilon_ref}``.

    Candidates are tried first; each uncovered contiguous block of the sorted
    sweep then gets a reference at its geometric midpoint, and blocks the
    midpoint cannot cover at all are halved.  A point always covers itself,
    so the plan terminates.
    """
    eps = sorted(eps)
    assign: dict = {}
    for r in candidates:
        for e in eps:
            if e not in assign and accept(r, e) >= floor:
                assign[e] = r

    def blocks(vals):
        out, cur = [], []
        for e in eps:
            if e in vals:
                cur.append(e)
            elif cur:
                out.append(cur)
                cur = []
        if cur:
            out.append(cur)
        return out

    todo = blocks({e for e in eps if e not in assign})
    while todo:
        block = todo.pop(0)
        r = math.sqrt(block[0] * block[-1])
        covered = [e for e in block if accept(r, e) >= floor]
        if not covered:
            if len(block) == 1:
                r, covered = block[0], block
            else:
                h = len(block) // 2
                todo[:0] = [block[:h], block[h:]]
                continue
        for e in covered:
            assign[e] = r
        rest = set(block) - set(covered)
        todo[:0] = [b for b in blocks(rest)]
    return assign


# ----------------------------------------------------------------------
# records


@dataclass
class ResultRecord:
    protocol: str
    channel: str
    d: Optional[int]
    epsilon: float
    epsilon_ref: float
    gamma: float
    logical_infidelity: float
    std: float
    average_infidelity: float
    average_std: float
    f_hat: list
    f_std: list
    strata: list  # rows {k, M_k, F_k, var, bias, source, acceptance}
    acceptance: dict
    reference_samples: int
    simulations: int
    converged: bool
    mode: str
    timings: dict = field(default_factory=dict)  # informational; emitted in the header only

    def to_dict(self, with_timings: bool = False) -> dict:
        d = asdict(self)
        if not with_timings:
            d.pop("timings")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        d = dict(d)
        d["acceptance"] = {int(k): v for k, v in d["acceptance"].items()}
        return cls(**d)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    references: dict = field(default_factory=dict)  # label -> list of epsilon_ref
    timings: dict = field(default_factory=dict)


def _stratum_rows(res, score) -> list:
    rows = []
    for k in sorted(res.strata):
        e = res.strata[k]
        var = float(np.atleast_1d(e.variance).max()) if e.variance is not None else 0.0
        rows.append({"k": int(k), "M_k": int(e.M_k), "F_k": float(score(e.f_sn)), "var": var,
                     "bias": float(np.abs(np.atleast_1d(e.bias)).max()) if e.bias is not None else 0.0,
                     "source": e.source, "acceptance": float(e.acceptance)})
    return rows


def run_experiment(config: ExperimentConfig, progress: Optional[Callable[[str], None]] = None) -> ExperimentResult:
    """Estimate every sweep point of ``config``; see the module docstring."""
    say = progress or (lambda msg: None)
    sweep = config.sweep
    out = ExperimentResult(config, [])
    if not sweep:
        return out
    prec = Precision(relative=config.precision.get("relative", 0.1),
                     confidence=config.precision.get("confidence", 0.99))
    settings = EngineSettings(precision=prec, budget=config.budget, t=config.t)
    chans = {e: channel_at(config.channel, e) for e in set(sweep) | set(config.references)}
    decs = {e: ch.decompose(c) for e, c in chans.items()}
    dists = config.distances if config.protocol == "surface" else [None]
    t_start = time.perf_counter()
    for d in dists:
        spec = build_protocol(config, d)
        engine = StratifiedEngine(spec, seed=config.seed, pool_dir=config.pool_dir, workers=config.workers,
                                  settings=settings)
        layouts = {}

        def layout(e):
            if e not in layouts:
                if e not in decs:
                    decs[e] = ch.decompose(channel_at(config.channel, e))
                layouts[e] = NoiseLayout.homogeneous(decs[e], spec.A)
            return layouts[e]

        ks = {e: relevant_ks(layout(e), engine.t) for e in sweep}
        plan = plan_references(sweep, lambda r, e: coverage(layout(r), layout(e), ks[e]),
                               config.acceptance_floor, config.references)
        label = spec.name
        out.references[label] = sorted(set(plan.values()))
        for e in sweep:
            r = plan[e]
            t0 = time.perf_counter()
            before = engine.store.simulations
            res = engine.estimate(layout(e), layout(r))
            li = logical_infidelity(spec, res.f_hat, res.cov)
            rec = ResultRecord(
                protocol=config.protocol, channel=config.channel["name"], d=d, epsilon=float(e),
                epsilon_ref=float(r), gamma=float(decs[e].gamma), f_hat=np.asarray(res.f_hat).tolist(),
                f_std=np.asarray(res.std).tolist(),
                strata=_stratum_rows(res, engine.score), acceptance={int(k): float(v) for k, v in
                                                                      res.meta["acceptance"].items()},
                reference_samples=int(res.meta["reference_samples"]),
                simulations=int(engine.store.simulations - before), converged=bool(res.meta["converged"]),
                mode=res.meta["mode"], timings={"seconds": time.perf_counter() - t0}, **li)
            out.records.append(rec)
            say(f"{label} eps={e:.3g} ref={r:.3g} infidelity={rec.logical_infidelity:.4g}"
                f" +- {rec.std:.2g} M={rec.reference_samples} new={rec.simulations}")
    out.timings["total_seconds"] = time.perf_counter() - t_start
    return out


# ----------------------------------------------------------------------
# emission


def to_json(result: ExperimentResult) -> str:
    """Self-describing record file; the header holds the only non-deterministic fields."""
    header = {"created": time.strftime("%Y-%m-%dT%H:%M:%S"), "timings": {
        "total_seconds": result.timings.get("total_seconds"),
        "records": [r.timings for r in result.records]}}
    body = {"schema_version": SCHEMA_VERSION, "header": header, "config": result.config.to_dict(),
            "references": result.references, "records": [r.to_dict() for r in result.records]}
    return json.dumps(body, indent=1, sort_keys=True)


def from_json(text: str) -> ExperimentResult:
    body = json.loads(text)
    if body.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {body.get('schema_version')}")
    timings = body["header"]["timings"]
    recs = []
    for i, r in enumerate(body["records"]):
        r = dict(r)
        r["timings"] = timings["records"][i]
        recs.append(ResultRecord.from_dict(r))
    return ExperimentResult(ExperimentConfig.from_dict(body["config"]), recs, body["references"],
                            {"total_seconds": timings["total_seconds"]})


def to_table(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in result.records:
        w.writerow([getattr(r, c) if getattr(r, c) is not None else "" for c in TABLE_COLUMNS])
    return buf.getvalue()


def read_table(text: str) -> list:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        for c in ("epsilon", "logical_infidelity", "std", "average_infidelity", "average_std", "epsilon_ref"):
            row[c] = float(row[c])
        row["d"] = int(row["d"]) if row["d"] else None
        row["reference_samples"] = int(row["reference_samples"])
        rows.append(row)
    return rows


def emit(result: ExperimentResult, out_dir, fmt: str = "json") -> list:
    """Write ``results.json`` and/or ``results.csv`` (``fmt``: json, csv or both)."""
    if not result.records:
        raise ConfigError("nothing to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        p = out / "results.json"
        p.write_text(to_json(result))
        written.append(p)
    if fmt in ("csv", "both"):
        p = out / "results.csv"
        p.write_text(to_table(result))
        written.append(p)
    if not written:
        raise ConfigError(f"unknown format {fmt!r}")
    return written
