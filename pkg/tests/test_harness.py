from itertools import combinations

import numpy as np
import pytest

from stratnoise.channels import decompose, depolarizing, identity_channel, kraus_to_ptm, z_rotation
from stratnoise.circuit import CircuitError, FaultConfiguration, NoiseLayout, run_configuration
from stratnoise.harness import logical
from stratnoise.harness.clinr import (
    build_clinr, check_count, conditional_fidelity, gate_overhead, random_clifford_circuit,
)
from stratnoise.harness.decoders import DecoderError, DetectorGraph, decode, matching_edges, union_find_edges
from stratnoise.harness.steane import build_steane_protocol
from stratnoise.harness.surface import (
    build_surface_memory, code_capacity_graph, locations_per_cycle, perfect_measurement_corrects,
    surface_layout,
)
from stratnoise.sampling import EngineSettings, Precision, StratifiedEngine

PAULIS = (1, 2, 3)  # X, Y, Z in the stabilizer-channel dictionary


def single_faults(spec, indices, rng):
    for a in range(spec.A):
        for idx in indices:
            yield a, idx, run_configuration(spec, FaultConfiguration([a], [idx]), rng).f


# ----------------------------------------------------------------------
# logical-channel helpers


def test_logical_identity():
    f = logical.ideal_readout()
    s = logical.summarize(f)
    assert s.worst_fidelity == pytest.approx(1.0) and s.average_fidelity == pytest.approx(1.0)


@pytest.mark.parametrize("p", [1e-3, 0.05, 0.3])
def test_logical_depolarizing(p):
    m = kraus_to_ptm(depolarizing(p)).m
    assert logical.worst_case_logical_fidelity(m) == pytest.approx(1 - 2 * p / 3, abs=1e-9)
    s = logical.summarize(logical.readout_from_ptm(m))
    assert s.average_fidelity == pytest.approx(1 - 2 * p / 3, abs=1e-12)  # isotropic: average = worst


@pytest.mark.parametrize("theta", [0.01, 0.2, 1.0])
def test_logical_z_rotation(theta):
    m = kraus_to_ptm(z_rotation(theta)).m
    # worst input lies on the equator: |<+|e^{-i theta Z / 2}|+>|^2
    assert logical.worst_case_logical_fidelity(m) == pytest.approx(np.cos(theta / 2) ** 2, abs=1e-6)


def test_readout_ptm_roundtrip(rng):
    m = np.eye(4)
    m[1:, :] = rng.normal(size=(3, 4))
    assert np.allclose(logical.ptm_from_readout(logical.readout_from_ptm(m)), m)


# ----------------------------------------------------------------------
# Steane


@pytest.mark.parametrize("state", [None, "+Z", "-X", "+Y"])
def test_steane_noiseless(state, rng):
    spec = build_steane_protocol(state)
    f = run_configuration(spec, FaultConfiguration([], []), rng).f
    assert np.allclose(f, spec.meta["ideal_readout"])


def test_steane_corrects_every_single_fault(rng):
    spec = build_steane_protocol()
    ideal = np.array(spec.meta["ideal_readout"])
    bad = [(a, i) for a, i, f in single_faults(spec, range(1, 33), rng) if not np.allclose(f, ideal)]
    assert bad == []


def test_steane_engine_identity_noise():
    spec = build_steane_protocol()
    layout = NoiseLayout.homogeneous(decompose(identity_channel()), spec.A)
    res = StratifiedEngine(spec).estimate(layout)
    assert np.allclose(res.f_hat, spec.meta["ideal_readout"])


# ----------------------------------------------------------------------
# surface code


def test_surface_sizes():
    for d, n in ((3, 17), (5, 49)):
        lay = surface_layout(d)
        assert lay.n_physical == n == 2 * d * d - 1
        spec, _, _ = build_surface_memory(d, "Z")
        assert spec.A == d * locations_per_cycle(d) + d * d
    assert locations_per_cycle(3) == 100
    assert build_surface_memory(3, "choi")[0].A == 309
    for d in (2, 4, 1):
        with pytest.raises(CircuitError):
            surface_layout(d)


def test_surface_stabilizers_commute():
    lay = surface_layout(5)
    n = lay.n_physical
    stabs = lay.stabilizers(n)
    xbar, zbar = lay.logical_operators(n)
    for a, b in combinations(stabs + [xbar], 2):
        assert a.commutes(b)
    for s in stabs:
        assert s.commutes(zbar)
    assert not xbar.commutes(zbar)


@pytest.mark.parametrize("basis", ["Z", "X", "choi"])
def test_surface_noiseless(basis, rng):
    spec, _, _ = build_surface_memory(3, basis)
    f = run_configuration(spec, FaultConfiguration([], []), rng).f
    assert np.allclose(f, spec.meta["ideal_readout"])


@pytest.mark.parametrize("decoder", ["mwpm", "uf"])
def test_surface_d3_single_faults(decoder, rng):
    spec, _, graphs = build_surface_memory(3, "choi", decoder=decoder)
    assert all(g.hyperedges == 0 and g.undetectable == 0 for g in graphs.values())
    ideal = np.array(spec.meta["ideal_readout"])
    bad = [(a, i) for a, i, f in single_faults(spec, PAULIS, rng) if not np.allclose(f, ideal)]
    assert bad == []


@pytest.mark.parametrize("kind", ["X", "Z"])
def test_surface_d5_code_capacity_weight_two(kind):
    lay = surface_layout(5)
    nd = len(lay.data)
    for w in (1, 2):
        for sup in combinations(range(nd), w):
            err = np.zeros(nd, bool)
            err[list(sup)] = True
            assert perfect_measurement_corrects(lay, err, kind)
            assert perfect_measurement_corrects(lay, err, kind, decoder="uf")


def test_surface_d3_has_weight_three_failure():
    lay = surface_layout(3)
    nd = len(lay.data)
    fails = 0
    for sup in combinations(range(nd), 3):
        err = np.zeros(nd, bool)
        err[list(sup)] = True
        fails += not perfect_measurement_corrects(lay, err, "X")
    assert fails > 0


# ----------------------------------------------------------------------
# decoders


def line_graph(with_boundary=True):
    # 0 - 1 - 2 - 3 (- boundary on both ends)
    B = 4
    u, v = [0, 1, 2], [1, 2, 3]
    if with_boundary:
        u, v = [0] + u + [3], [B] + v + [B]
    res = np.eye(len(u), dtype=bool)
    flips = np.zeros(len(u), bool)
    flips[0] = True
    return DetectorGraph(1, 4, np.array(u), np.array(v), res, flips)


@pytest.mark.parametrize("fn", [union_find_edges, matching_edges])
def test_decoder_empty_and_pairs(fn):
    g = line_graph()
    assert fn(g, np.zeros(4, bool)) == []
    edges = fn(g, np.array([1, 1, 0, 0], bool))
    assert g.correction(edges).sum() == 1
    edges = fn(g, np.array([1, 0, 0, 0], bool))
    assert len(edges) == 1 and g.logical_flip(edges)


@pytest.mark.parametrize("fn", [union_find_edges, matching_edges])
def test_decoder_errors(fn):
    g = line_graph(with_boundary=False)
    with pytest.raises(DecoderError):
        fn(g, np.array([1, 0, 0, 0], bool))
    with pytest.raises(DecoderError):
        fn(g, np.zeros(5, bool))


def test_decoders_neutralize_random_syndromes(rng):
    g = code_capacity_graph(surface_layout(5), "X")
    for _ in range(200):
        err = rng.random(g.n_edges) < 0.1
        syn = np.zeros(g.n_nodes, bool)
        for e in np.flatnonzero(err):
            for x in (g.u[e], g.v[e]):
                if x != g.boundary:
                    syn[x] ^= True
        for method in ("uf", "mwpm"):
            r = decode(g, syn, method)
            left = np.zeros(g.n_nodes, bool)
            for e in r.edges:
                for x in (g.u[e], g.v[e]):
                    if x != g.boundary:
                        left[x] ^= True
            assert np.array_equal(left, syn)


def test_graph_json_roundtrip():
    import json
    _, _, graphs = build_surface_memory(3, "Z")
    d = json.loads(graphs["X"].to_json())
    assert len(d["edges"]) == graphs["X"].n_edges


# ----------------------------------------------------------------------
# CliNR


def test_check_count():
    assert check_count(64, 8) == 3
    assert check_count(8, 8) == 0
    with pytest.raises(ValueError):
        check_count(0, 2)


@pytest.mark.parametrize("mode", ["none", "clinr"])
def test_clinr_noiseless(mode, rng):
    circ = random_clifford_circuit(2, 64, np.random.default_rng(1))
    spec, cs = build_clinr(circ, mode=mode)
    f = run_configuration(cs, FaultConfiguration([], []), rng).f
    assert np.allclose(f, [1, 1])
    if mode == "clinr":
        assert spec.r == 5 and spec.omega_g <= 2.0
        assert gate_overhead(cs.ops, spec.s) == pytest.approx(spec.omega_g)


def test_clinr_rejects_non_clifford():
    with pytest.raises(CircuitError):
        build_clinr([("H", (0,)), ("T", (0,))])


def test_clinr_overhead_cap_infeasible():
    circ = random_clifford_circuit(4, 64, np.random.default_rng(2))
    with pytest.raises(CircuitError):
        build_clinr(circ, omega_g_max=2.0)


def test_conditional_fidelity():
    F, sd = conditional_fidelity([0.45, 0.9], np.diag([1e-4, 1e-4]))
    assert F == pytest.approx(0.5)
    assert sd == pytest.approx(np.sqrt(1e-4 / 0.81 + 0.25 * 1e-4 / 0.81))


def clinr_estimate(cs, eps):
    layout = NoiseLayout.homogeneous(decompose(depolarizing(eps)), cs.A)
    st_ = EngineSettings(precision=Precision(relative=0.3))
    res = StratifiedEngine(cs, seed=5, settings=st_).estimate(layout)
    return res.f_hat, res.cov


def test_clinr_acceptance_falls_with_noise():
    circ = random_clifford_circuit(2, 64, np.random.default_rng(3))
    _, cs = build_clinr(circ)
    acc = [clinr_estimate(cs, eps)[0][1] for eps in (1e-4, 1e-3, 1e-2)]
    assert acc[0] > acc[1] > acc[2]


def test_clinr_beats_bare_circuit():
    circ = random_clifford_circuit(2, 64, np.random.default_rng(4))
    eps = 1e-3
    f_none, c_none = clinr_estimate(build_clinr(circ, mode="none")[1], eps)
    f_cl, c_cl = clinr_estimate(build_clinr(circ)[1], eps)
    F0, s0 = conditional_fidelity(f_none, c_none)
    F1, s1 = conditional_fidelity(f_cl, c_cl)
    assert 1 - F1 < 1 - F0
