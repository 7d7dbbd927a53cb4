import itertools

import numpy as np
import pytest

from helpers import apply_gate, random_circuit, zero_state
from stratnoise.dictionary import StabilizerChannelId, apply_stabilizer_channel
from stratnoise.pauli import PauliString
from stratnoise.tableau import (
    CliffordOp,
    Tableau,
    TableauError,
    apply_clifford,
    measure_pauli,
    new_tableau,
    reset_to_eigenstate,
    stabilizer_overlap,
)

P = PauliString.from_str


def stabs(t):
    return [str(s) for s in t.stabilizers()]


def run(t, ops):
    for name, qs in ops:
        t.gate(name, *qs)
    return t


def test_pauli_product_and_phase():
    assert str(P("X") * P("Z")) == "-iY"
    assert str(P("Z") * P("X")) == "+iY"
    assert str(P("Y") * P("Y")) == "+I"
    assert str(P("XY") * P("YX")) == "+ZZ"
    assert P("XX").commutes(P("ZZ"))
    assert not P("XI").commutes(P("ZZ"))


def test_pauli_matrix_matches_product():
    rng = np.random.default_rng(3)
    letters = "IXYZ"
    for _ in range(50):
        a = P("".join(rng.choice(list(letters), 3)))
        b = P("".join(rng.choice(list(letters), 3)))
        assert np.allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix())


class TestNewTableau:
    def test_single_qubit(self):
        t = new_tableau(1)
        assert stabs(t) == ["+Z"]
        assert [str(d) for d in t.destabilizers()] == ["+X"]

    def test_two_qubits(self):
        assert stabs(new_tableau(2)) == ["+ZI", "+IZ"]

    def test_three_qubits_measure_deterministic(self, counting_rng):
        t = new_tableau(3)
        for q in range(3):
            assert measure_pauli(t, PauliString.single(3, q, "Z"), counting_rng) == 1
        assert counting_rng.calls == 0

    def test_zero_qubits_rejected(self):
        with pytest.raises(TableauError):
            new_tableau(0)


class TestApplyClifford:
    def test_h_on_zero(self):
        t = apply_clifford(new_tableau(1), CliffordOp("H", 0))
        assert stabs(t) == ["+X"]

    def test_s_squared_is_z(self):
        t = new_tableau(1)
        for op in ("H", "S", "S"):
            apply_clifford(t, CliffordOp(op, 0))
        assert stabs(t) == ["-X"]

    def test_bell(self):
        t = new_tableau(2)
        apply_clifford(t, CliffordOp("H", 0))
        apply_clifford(t, CliffordOp("CX", 0, 1))
        assert t.expectation(P("XX")) == 1
        assert t.expectation(P("ZZ")) == 1
        assert t.expectation(P("YY")) == -1

    def test_out_of_range(self):
        with pytest.raises(TableauError):
            apply_clifford(new_tableau(2), CliffordOp("H", 2))
        with pytest.raises(TableauError):
            CliffordOp("CX", 1, 1)

    def test_composite_by_name(self):
        from stratnoise.dictionary import clifford_names, clifford_unitary

        for i, name in enumerate(clifford_names()):
            t = apply_clifford(new_tableau(1), CliffordOp(name, 0))
            u = clifford_unitary(i)
            z = np.diag([1, -1])
            img = u @ z @ u.conj().T
            assert np.allclose(t.stabilizers()[0].to_matrix(), img)


class TestMeasure:
    def test_z_on_zero(self, counting_rng):
        t = new_tableau(1)
        before = stabs(t)
        assert measure_pauli(t, P("Z"), counting_rng) == 1
        assert stabs(t) == before
        assert counting_rng.calls == 0

    def test_x_on_zero_is_fair(self):
        rng = np.random.default_rng(7)
        n = 10_000
        plus = sum(measure_pauli(new_tableau(1), P("X"), rng) == 1 for _ in range(n))
        assert abs(plus / n - 0.5) < 5 * np.sqrt(0.25 / n)

    def test_zz_on_bell(self, counting_rng):
        t = run(new_tableau(2), [("H", (0,)), ("CX", (0, 1))])
        assert measure_pauli(t, P("ZZ"), counting_rng) == 1
        assert counting_rng.calls == 0

    def test_post_measurement_state(self, rng):
        t = new_tableau(1)
        out = measure_pauli(t, P("X"), rng)
        assert t.expectation(P("X")) == out

    def test_non_hermitian_rejected(self, rng):
        with pytest.raises(TableauError):
            measure_pauli(new_tableau(1), PauliString(1, 1, 0, 1), rng)


class TestReset:
    def test_reset_z_on_one(self, rng):
        t = run(new_tableau(1), [("X", (0,))])
        reset_to_eigenstate(t, P("Z"), 1, rng)
        assert stabs(t) == ["+Z"]

    def test_reset_x_on_zero(self, rng):
        for seed in range(10):
            t = reset_to_eigenstate(new_tableau(1), P("X"), 1, np.random.default_rng(seed))
            assert stabs(t) == ["+X"]

    def test_reset_minus_z_on_minus(self, rng):
        for seed in range(10):
            t = run(new_tableau(1), [("X", (0,)), ("H", (0,))])
            reset_to_eigenstate(t, P("Z"), -1, np.random.default_rng(seed))
            assert stabs(t) == ["-Z"]

    def test_reset_y(self):
        for seed in range(10):
            t = reset_to_eigenstate(new_tableau(1), P("Y"), -1, np.random.default_rng(seed))
            assert t.expectation(P("Y")) == -1


class TestOverlap:
    def test_examples(self):
        zero = new_tableau(1)
        plus = run(new_tableau(1), [("H", (0,))])
        assert stabilizer_overlap(zero, zero) == 1.0
        assert stabilizer_overlap(plus, zero) == 0.5
        bell = run(new_tableau(2), [("H", (0,)), ("CX", (0, 1))])
        assert stabilizer_overlap(new_tableau(2), bell) == 0.5

    def test_orthogonal(self):
        one = run(new_tableau(1), [("X", (0,))])
        assert stabilizer_overlap(one, new_tableau(1)) == 0.0

    def test_mismatched_n(self):
        with pytest.raises(TableauError):
            stabilizer_overlap(new_tableau(1), new_tableau(2))

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_matches_dense_and_is_symmetric(self, n):
        rng = np.random.default_rng(100 + n)
        for _ in range(25):
            ca = random_circuit(rng, n, 6 * n)
            cb = random_circuit(rng, n, 6 * n)
            ta, tb = run(new_tableau(n), ca), run(new_tableau(n), cb)
            va, vb = zero_state(n), zero_state(n)
            for name, qs in ca:
                va = apply_gate(va, name, qs, n)
            for name, qs in cb:
                vb = apply_gate(vb, name, qs, n)
            dense = abs(np.vdot(vb, va)) ** 2
            ov = stabilizer_overlap(ta, tb)
            assert ov == stabilizer_overlap(tb, ta)
            # dyadic values: exact after rounding the dense value to 2^-s
            if dense < 1e-9:
                assert ov == 0.0
            else:
                assert ov == 2.0 ** round(np.log2(dense))
                assert abs(ov - dense) < 1e-9


def test_from_stabilizers_signs():
    gens = [P("-XX"), P("+ZZ")]
    t = Tableau.from_stabilizers(gens)
    for g in gens:
        assert t.expectation(g) == 1
        assert t.expectation(g.unsigned()) == g.sign
    t.check_invariants()
    with pytest.raises(TableauError):
        Tableau.from_stabilizers([P("XX"), P("ZI")])
    with pytest.raises(TableauError):
        Tableau.from_stabilizers([P("ZZ"), P("-ZZ")])


@pytest.mark.parametrize("seed", range(5))
def test_from_stabilizers_random_states(seed):
    rng = np.random.default_rng(seed)
    n = 6
    ref = run(new_tableau(n), random_circuit(rng, n, 40))
    gens = ref.stabilizers()
    rng.shuffle(gens)
    t = Tableau.from_stabilizers(gens)
    assert stabilizer_overlap(t, ref) == 1.0


def test_invariants_hold_through_random_operations():
    rng = np.random.default_rng(11)
    n = 5
    t = new_tableau(n)
    for step in range(300):
        kind = rng.integers(5)
        if kind < 3:
            name, qs = random_circuit(rng, n, 1)[0]
            t.gate(name, *qs)
        elif kind == 3:
            letters = "".join(rng.choice(list("IXYZ"), n))
            if set(letters) != {"I"}:
                measure_pauli(t, P(letters), rng)
        else:
            reset_to_eigenstate(t, PauliString.single(n, int(rng.integers(n)), "XYZ"[rng.integers(3)]), 1, rng)
        t.check_invariants()


def test_heisenberg_picture_measurement():
    """Measuring p after U has the statistics of U^dag p U before U."""
    rng = np.random.default_rng(21)
    n = 4
    for _ in range(1000):
        prep = random_circuit(rng, n, 12)
        u = random_circuit(rng, n, 10)
        letters = "".join(rng.choice(list("IXYZ"), n))
        if set(letters) == {"I"}:
            continue
        p = P(letters)
        t = run(new_tableau(n), prep + u)
        psi = zero_state(n)
        for name, qs in prep:
            psi = apply_gate(psi, name, qs, n)
        # <psi| U^dag p U |psi> computed densely
        upsi = psi
        for name, qs in u:
            upsi = apply_gate(upsi, name, qs, n)
        dense = np.vdot(upsi, p.to_matrix() @ upsi).real
        assert t.expectation(p) == pytest.approx(dense, abs=1e-9)


def test_deterministic_branches_use_no_randomness(counting_rng):
    rng = np.random.default_rng(5)
    n = 4
    for _ in range(200):
        t = run(new_tableau(n), random_circuit(rng, n, 20))
        for g in t.stabilizers():
            before = counting_rng.calls
            t.measure(g, counting_rng)
            assert counting_rng.calls == before


class TestStabilizerChannels:
    def test_z_unitary(self, rng):
        t = run(new_tableau(1), [("H", (0,))])
        apply_stabilizer_channel(t, StabilizerChannelId("clifford", 3), 0, rng)
        assert stabs(t) == ["-X"]

    def test_dephase_frequencies(self):
        rng = np.random.default_rng(9)
        n = 4000
        plus = 0
        for _ in range(n):
            t = run(new_tableau(1), [("H", (0,))])
            apply_stabilizer_channel(t, StabilizerChannelId("dephase", axis="Z"), 0, rng)
            e = t.expectation(P("Z"))
            assert e in (1, -1)
            plus += e == 1
        assert abs(plus / n - 0.5) < 5 * np.sqrt(0.25 / n)

    def test_reset(self, rng):
        t = run(new_tableau(1), [("X", (0,))])
        apply_stabilizer_channel(t, StabilizerChannelId("reset", axis="Z", sign=1), 0, rng)
        assert stabs(t) == ["+Z"]

    def test_unknown(self):
        with pytest.raises(ValueError):
            StabilizerChannelId("twirl")
        with pytest.raises(ValueError):
            StabilizerChannelId("clifford", 24)


def test_all_dictionary_channels_match_kraus_action():
    """Tableau trajectories average to the dense channel on every Pauli eigenstate."""
    from stratnoise.dictionary import channel_kraus, dictionary

    preps = {
        "+Z": [], "-Z": [("X", (0,))], "+X": [("H", (0,))], "-X": [("X", (0,)), ("H", (0,))],
        "+Y": [("H", (0,)), ("S", (0,))], "-Y": [("H", (0,)), ("SDG", (0,))],
    }
    rng = np.random.default_rng(1)
    for cid in dictionary():
        ks = channel_kraus(cid)
        for label, prep in preps.items():
            psi = zero_state(1)
            for name, qs in prep:
                psi = apply_gate(psi, name, qs, 1)
            rho = np.outer(psi, psi.conj())
            out = sum(k @ rho @ k.conj().T for k in ks)
            for axis in "XYZ":
                want = np.trace(out @ P(axis).to_matrix()).real
                trials = 1 if cid.kind == "clifford" else 400
                got = 0.0
                for _ in range(trials):
                    t = run(new_tableau(1), prep)
                    apply_stabilizer_channel(t, cid, 0, rng)
                    got += t.expectation(P(axis))
                got /= trials
                tol = 1e-12 if trials == 1 else 5 / np.sqrt(trials)
                assert abs(got - want) <= tol, (cid, label, axis)
