import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from stratnoise import dictionary as D
from stratnoise.channels import (
    ChannelError,
    KrausChannel,
    affine_rank,
    amplitude_damping,
    channel_from_spec,
    channel_report,
    channel_to_spec,
    completed_channel,
    decompose,
    decompose_ptm,
    depolarizing,
    dictionary_ptms,
    identity_channel,
    kraus_to_ptm,
    random_nonunitary,
    random_unitary,
    worst_case_infidelity,
    worst_surface_channel,
    z_rotation,
    _dictionary_matrix,
)
from stratnoise.lp import LPError, simplex

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0 + 0j, -1.0])


def pauli_channel(px, py, pz):
    return KrausChannel((np.sqrt(1 - px - py - pz) * np.eye(2), np.sqrt(px) * X, np.sqrt(py) * Y, np.sqrt(pz) * Z))


def dense_worst_infidelity(ch, n=600):
    """Brute force over a theta/phi grid of pure states."""
    th, ph = np.meshgrid(np.linspace(0, np.pi, n), np.linspace(0, 2 * np.pi, 2 * n, endpoint=False))
    psi = np.stack([np.cos(th / 2).ravel(), (np.exp(1j * ph) * np.sin(th / 2)).ravel()], axis=1)
    fid = np.zeros(len(psi))
    for k in ch.kraus_ops:
        amp = np.einsum("si,ij,sj->s", psi.conj(), k, psi)
        fid += np.abs(amp) ** 2
    return float((1 - fid).max())


class TestPTM:
    def test_identity(self):
        assert np.allclose(kraus_to_ptm(identity_channel()).m, np.eye(4), atol=1e-15)

    @pytest.mark.parametrize("p", [0.0, 0.01, 0.3, 0.75])
    def test_depolarizing(self, p):
        want = np.diag([1, 1 - 4 * p / 3, 1 - 4 * p / 3, 1 - 4 * p / 3])
        assert np.allclose(depolarizing(p).ptm().m, want, atol=1e-14)

    def test_reset_z_plus(self):
        cid = D.StabilizerChannelId("reset", axis="Z", sign=1)
        m = kraus_to_ptm(KrausChannel(tuple(D.channel_kraus(cid)))).m
        want = np.zeros((4, 4))
        want[0, 0] = 1
        want[3, 0] = 1
        assert np.allclose(m, want, atol=1e-15)

    def test_non_tp_rejected(self):
        with pytest.raises(ChannelError):
            KrausChannel((0.5 * np.eye(2),))
        with pytest.raises(ChannelError):
            KrausChannel(())


class TestDictionary:
    def test_count_and_rank(self):
        ptms = dictionary_ptms()
        assert len(ptms) == 33
        assert affine_rank() == 12
        assert np.allclose(ptms[0][1].m, np.eye(4))
        assert ptms[0][0] == D.StabilizerChannelId("clifford", 0)

    def test_dephase_z(self):
        ptms = dict(dictionary_ptms())
        m = ptms[D.StabilizerChannelId("dephase", axis="Z")].m
        assert np.allclose(m, np.diag([1, 0, 0, 1]))

    def test_cliffords_distinct_signed_permutations(self):
        seen = set()
        for cid, ptm in dictionary_ptms()[:24]:
            block = np.round(ptm.m[1:, 1:]).astype(int)
            assert np.allclose(ptm.m[1:, 1:], block)
            assert sorted(np.abs(block).sum(axis=0)) == [1, 1, 1]
            assert round(np.linalg.det(block)) == 1
            seen.add(block.tobytes())
        assert len(seen) == 24


class TestSimplex:
    def test_small_lp(self):
        # min x + 2y st x + y = 1 -> x=1
        res = simplex([1, 2], [[1, 1]], [1])
        assert res.fun == pytest.approx(1.0)
        assert np.allclose(res.x, [1, 0])

    def test_infeasible(self):
        with pytest.raises(LPError):
            simplex([1, 1], [[1, 1], [1, 1]], [1, 2])

    def test_redundant_rows(self):
        res = simplex([1, 1, 0], [[1, 1, 1], [2, 2, 2]], [1, 2])
        assert res.fun == pytest.approx(0.0)

    def test_matches_scipy_on_random_channels(self):
        rng = np.random.default_rng(4)
        a = _dictionary_matrix()
        a_eq = np.vstack([a, np.ones(a.shape[1])])
        n = a.shape[1]
        for _ in range(40):
            ch = random_nonunitary(int(rng.integers(2, 6)), 10 ** rng.uniform(-4, -1.5), rng)
            dec = decompose(ch)
            b = np.append(ch.ptm().m[1:, :].ravel(), 1.0)
            ref = linprog(np.ones(2 * n), A_eq=np.hstack([a_eq, -a_eq]), b_eq=b, bounds=(0, None), method="highs")
            assert ref.status == 0
            assert dec.l1 == pytest.approx(ref.fun, abs=1e-9)


class TestDecompose:
    def test_depolarizing_paper_values(self):
        dec = decompose(depolarizing(0.01))
        q = dict((c.label, v) for c, v in dec.terms)
        assert q == pytest.approx({"I": 0.99, "X": 0.01 / 3, "Y": 0.01 / 3, "Z": 0.01 / 3}, abs=1e-12)
        assert dec.eta == 0.0 and dec.nu == 0.0
        assert dec.gamma == pytest.approx(0.01, abs=1e-12)
        assert sorted(dec.fault_index.tolist()) == [1, 2, 3]
        assert np.allclose(dec.fault_r, 1 / 3)

    def test_identity(self):
        dec = decompose(identity_channel())
        assert dec.q[0] == 1.0
        assert dec.gamma == 0.0
        assert dec.eta == 0.0
        assert len(dec.fault_terms) == 0

    @pytest.mark.parametrize("p", [1e-4, 1e-3, 0.01, 0.1])
    def test_amplitude_damping(self, p):
        dec = decompose(amplitude_damping(p))
        s = np.sqrt(1 - p)
        assert dec.gamma == pytest.approx(0.5 * ((1 + p) - s), abs=1e-10)
        # derived by hand: q_I = (1-p+s)/2, q_Z = (1-p-s)/2, q_Reset(+Z) = p
        q = {c.label: v for c, v in dec.terms}
        assert q["I"] == pytest.approx((1 - p + s) / 2, abs=1e-10)
        assert q["Z"] == pytest.approx((1 - p - s) / 2, abs=1e-10)
        assert q["Reset(+Z)"] == pytest.approx(p, abs=1e-10)
        assert set(q) == {"I", "Z", "Reset(+Z)"}

    def test_amplitude_damping_nu_limit(self):
        nus = [decompose(amplitude_damping(p)).nu for p in (1e-2, 1e-4, 1e-6)]
        assert abs(nus[-1] - 1 / 3) < 1e-5
        assert abs(nus[0] - 1 / 3) > abs(nus[1] - 1 / 3) > abs(nus[2] - 1 / 3)

    def test_round_trip_many_random_channels(self):
        rng = np.random.default_rng(8)
        for i in range(1000):
            if i % 2:
                ch = random_nonunitary(int(rng.integers(2, 6)), 10 ** rng.uniform(-5, -2), rng)
            else:
                ch = random_unitary(rng.uniform(0, 0.3), rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi))
            dec = decompose(ch)
            assert np.abs(dec.reconstruct_ptm() - ch.ptm().m).max() < 1e-8
            assert dec.q.sum() == pytest.approx(1.0, abs=1e-9)
            assert 1 + 2 * dec.eta == pytest.approx(np.abs(dec.q).sum(), abs=1e-12)
            if dec.gamma > 0:
                assert dec.fault_r.sum() == pytest.approx(1.0, abs=1e-9)
                assert dec.q[0] == pytest.approx(1 - dec.gamma, abs=1e-12)
                assert np.allclose(dec.q[dec.fault_index], dec.gamma * dec.fault_r, atol=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(*[st.one_of(st.just(0.0), st.floats(1e-8, 0.3))] * 3)
    def test_pauli_channels_have_zero_negativity(self, px, py, pz):
        dec = decompose(pauli_channel(px, py, pz))
        assert dec.eta == 0.0
        assert dec.nu == 0.0
        assert dec.gamma == pytest.approx(px + py + pz, abs=1e-10)

    def test_non_tp_ptm(self):
        m = np.eye(4)
        m[0, 0] = 0.9
        with pytest.raises(ChannelError):
            decompose_ptm(m)

    def test_worst_surface_channel(self):
        dec = decompose(worst_surface_channel(1e-3))
        assert np.isfinite(dec.eta) and dec.eta > 0
        assert np.abs(dec.reconstruct_ptm() - worst_surface_channel(1e-3).ptm().m).max() < 1e-10

    def test_monotone_diagnostics(self):
        rng = np.random.default_rng(2)
        theta, phi = 1.1, 0.7
        ops = [rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(2)]
        eps = np.logspace(-5, -2, 10)
        unit, nonunit = [], []
        for e in eps:
            uch = random_unitary(np.arcsin(np.sqrt(e)), theta, phi)
            unit.append((worst_case_infidelity(uch), decompose(uch)))
            # scale omega so the nonunitary channel has infidelity e
            lo, hi = 0.0, 1.0
            while True:
                try:
                    completed_channel(ops, hi)
                    break
                except ChannelError:
                    hi /= 2
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if worst_case_infidelity(completed_channel(ops, mid), grid=2000) < e:
                    lo = mid
                else:
                    hi = mid
            nch = completed_channel(ops, 0.5 * (lo + hi))
            nonunit.append((worst_case_infidelity(nch), decompose(nch)))
        for fam in (unit, nonunit):
            assert np.allclose([e for e, _ in fam], eps, rtol=1e-3)
            g = [d.gamma for _, d in fam]
            h = [d.eta for _, d in fam]
            assert all(b >= a - 1e-15 for a, b in zip(g, g[1:]))
            assert all(b >= a - 1e-15 for a, b in zip(h, h[1:]))
        # gamma falls linearly in eps for both families, the unitary one sits higher;
        # the slower decrease of unitary noise shows in the negativity slope
        g_u = np.array([d.gamma for _, d in unit])
        g_n = np.array([d.gamma for _, d in nonunit])
        assert np.all(g_u > g_n)
        slope = lambda ys: np.polyfit(np.log(eps), np.log(ys), 1)[0]
        assert slope(g_u) == pytest.approx(1.0, abs=0.05)
        assert slope(g_n) == pytest.approx(1.0, abs=0.05)
        eta_u = slope([d.eta for _, d in unit])
        eta_n = slope([d.eta for _, d in nonunit])
        assert eta_u < eta_n
        assert eta_u == pytest.approx(0.5, abs=0.05)
        assert eta_n == pytest.approx(1.0, abs=0.05)


class TestInfidelity:
    def test_identity(self):
        assert worst_case_infidelity(identity_channel()) == 0.0

    @pytest.mark.parametrize("theta", [0.01, 0.3, 1.0, np.pi])
    def test_z_rotation(self, theta):
        assert worst_case_infidelity(z_rotation(theta)) == pytest.approx(np.sin(theta / 2) ** 2, abs=1e-10)

    @pytest.mark.parametrize("p", [0.001, 0.05, 0.2])
    def test_depolarizing(self, p):
        assert worst_case_infidelity(depolarizing(p)) == pytest.approx(2 * p / 3, abs=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0, 1.2), st.floats(0, np.pi - 1e-6), st.floats(0, 2 * np.pi - 1e-6))
    def test_random_unitary(self, delta, theta, phi):
        eps = worst_case_infidelity(random_unitary(delta, theta, phi))
        assert eps == pytest.approx(np.sin(delta) ** 2, abs=1e-10)

    def test_against_brute_force_grid(self):
        rng = np.random.default_rng(6)
        for _ in range(4):
            ch = random_nonunitary(3, 0.05, rng)
            fine = worst_case_infidelity(ch)
            coarse = dense_worst_infidelity(ch)
            assert coarse <= fine + 1e-12
            assert fine - coarse < 2e-5

    def test_report(self):
        rep = channel_report(amplitude_damping(0.01))
        assert rep.epsilon == pytest.approx(0.01, abs=1e-10)
        assert 0 <= rep.epsilon <= 1
        assert set(rep.to_dict()) == {"epsilon", "gamma", "eta", "nu"}


class TestFamilies:
    def test_amplitude_damping_zero(self):
        assert np.allclose(amplitude_damping(0).ptm().m, np.eye(4))

    def test_depolarizing_kraus(self):
        k = depolarizing(0.03).kraus_ops
        assert np.allclose(k[0], np.sqrt(0.97) * np.eye(2))
        for op, pauli in zip(k[1:], (X, Y, Z)):
            assert np.allclose(op, np.sqrt(0.01) * pauli)

    def test_z_rotation_pi(self):
        assert np.allclose(z_rotation(np.pi).ptm().m, np.diag([1, -1, -1, 1]))

    def test_out_of_range(self):
        with pytest.raises(ChannelError):
            depolarizing(1.5)
        with pytest.raises(ChannelError):
            amplitude_damping(-0.1)
        with pytest.raises(ChannelError):
            random_unitary(-0.1, 0, 0)

    def test_random_unitary_identity(self):
        assert np.allclose(random_unitary(0, 0.4, 0.2).ptm().m, np.eye(4))

    @pytest.mark.parametrize("theta", [0.2, 1.3, 2.9])
    def test_random_unitary_z_axis(self, theta):
        # exp(i theta/2 Z) = e^{i theta/2} diag(1, e^{-i theta}): a rotation by -theta
        got = random_unitary(theta / 2, 0.0, 0.0).ptm().m
        assert np.abs(got - z_rotation(-theta).ptm().m).max() < 1e-12
        # the opposite axis gives the positive rotation
        flipped = random_unitary(theta / 2, np.pi, 0.0).ptm().m
        assert np.abs(flipped - z_rotation(theta).ptm().m).max() < 1e-12

    def test_random_nonunitary(self):
        rng = np.random.default_rng(0)
        assert np.allclose(random_nonunitary(3, 0.0, rng).ptm().m, np.eye(4))
        for J in range(2, 6):
            ch = random_nonunitary(J, 0.01, rng)
            assert len(ch.kraus_ops) == J
            gram = sum(k.conj().T @ k for k in ch.kraus_ops)
            assert np.abs(gram - np.eye(2)).max() < 1e-10
        with pytest.raises(ChannelError):
            random_nonunitary(6, 0.01, rng)
        with pytest.raises(ChannelError):
            random_nonunitary(3, 50.0, rng, max_tries=5)


class TestSpecFiles:
    def test_named(self):
        ch = channel_from_spec({"name": "depolarizing", "p": 0.02})
        assert np.allclose(ch.ptm().m, depolarizing(0.02).ptm().m)

    def test_kraus_round_trip(self, tmp_path):
        import json

        from stratnoise.channels import load_channel

        ch = worst_surface_channel(1e-3)
        path = tmp_path / "ch.json"
        path.write_text(json.dumps(channel_to_spec(ch)))
        back = load_channel(path)
        assert np.allclose(back.ptm().m, ch.ptm().m, atol=1e-15)

    def test_bad_spec(self):
        with pytest.raises(ChannelError):
            channel_from_spec({"name": "nope"})
        with pytest.raises(ChannelError):
            channel_from_spec({"name": "depolarizing", "q": 0.1})
        with pytest.raises(ChannelError):
            channel_from_spec({"kraus": [[[1, 0], [0, 0], [0, 0]]]})

    def test_random_nonunitary_seeded(self):
        a = channel_from_spec({"name": "random_nonunitary", "J": 3, "omega": 0.01, "seed": 5})
        b = channel_from_spec({"name": "random_nonunitary", "J": 3, "omega": 0.01, "seed": 5})
        assert np.allclose(a.ptm().m, b.ptm().m)
