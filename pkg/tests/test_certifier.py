import math

import numpy as np
import pytest

from reifenberg_lab import certifier as cf
from reifenberg_lab import fdsolver as fd
from reifenberg_lab import geometry as geo
from reifenberg_lab import modulus as mod
from reifenberg_lab.errors import DomainError, PreconditionError

BUILTIN = ["power:0.25", "power:0.5", "power:1", "inv-log-sq", "zero"]


def all_ok(pc):
    rows = cf.check_constants(pc)
    return all(r["ok"] and r["slack"] >= 0 for r in rows.values()), rows


def test_default_lipschitz_constants_check():
    pc = cf.select_constants_lipschitz(cf.ProofInputs())
    ok, rows = all_ok(pc)
    assert ok and len(rows) == 10
    assert pc.Cbar == pytest.approx(pc.C2 / pc.eta**pc.alpha0, rel=1e-12)
    assert pc.Chat * pc.c0 >= 1


def test_default_hopf_constants_check():
    pc = cf.select_constants_hopf(cf.ProofInputs(), delta1=0.25, c2=0.45)
    ok, rows = all_ok(pc)
    assert ok and len(rows) == 8
    assert pc.a_tilde == 0.45


def test_randomized_inputs_pass_recheck():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        inp = cf.ProofInputs(
            alpha=rng.uniform(0.1, 0.9),
            C1=rng.uniform(0.5, 20),
            C2=rng.uniform(0.5, 20),
            C3=rng.uniform(0.5, 20),
            K=rng.uniform(1, 50),
        )
        assert all_ok(cf.select_constants_lipschitz(inp))[0]
        assert all_ok(cf.select_constants_hopf(inp, delta1=rng.uniform(1e-3, 1), c2=rng.uniform(0.01, 2)))[0]


def test_recheck_catches_tampering():
    pc = cf.select_constants_lipschitz(cf.ProofInputs())
    pc.c0 *= 10
    assert not all_ok(pc)[0]
    pc = cf.select_constants_hopf(cf.ProofInputs(), 0.25, 0.45)
    pc.Chat *= 0.99
    assert not all_ok(pc)[0]


def test_c0_shrinks_with_K():
    c0s = [cf.select_constants_lipschitz(cf.ProofInputs(K=k)).c0 for k in (1, 10, 100, 1000)]
    assert all(b <= a for a, b in zip(c0s, c0s[1:]))
    # once K binds the cap, c0 scales exactly like 1/K
    assert c0s[2] / c0s[3] == pytest.approx(10.0, rel=1e-9)


def test_small_delta1_forces_small_eta():
    pc = cf.select_constants_hopf(cf.ProofInputs(), delta1=1e-6, c2=0.5)
    assert pc.eta <= 1e-6
    assert all_ok(pc)[0]


def test_K_clamped_to_one():
    a = cf.select_constants_lipschitz(cf.ProofInputs(K=0.2))
    b = cf.select_constants_lipschitz(cf.ProofInputs(K=1.0))
    assert a.K_eta == 1.0 and a.c0 == b.c0


def test_invalid_inputs():
    with pytest.raises(DomainError):
        cf.ProofInputs(alpha=1.5)
    with pytest.raises(DomainError):
        cf.ProofInputs(C2=0.0)
    with pytest.raises(DomainError):
        cf.select_constants_hopf(cf.ProofInputs(), delta1=0.0, c2=1.0)


def test_constants_roundtrip():
    pc = cf.select_constants_hopf(cf.ProofInputs(), 0.25, 0.45)
    back = cf.ProofConstants.from_dict(pc.to_dict())
    assert back == pc


@pytest.mark.parametrize("name", BUILTIN)
def test_scale_sequence_bounds(name):
    pc = cf.select_constants_lipschitz(cf.ProofInputs())
    seq = cf.scale_sequence(mod.from_name(name), pc.eta, pc.alpha0, pc.c0)
    assert seq.proviso and seq.passed
    assert seq.partial_sums[-1] <= 3 * pc.c0
    assert all(seq.recursion_bounds())
    assert seq.A[-1] < 1e-3 * pc.c0


def test_scale_sequence_without_proviso():
    seq = cf.scale_sequence(mod.zero(), 0.5, 0.25, 0.01)
    assert not seq.proviso and seq.passed is None
    # the zero modulus leaves the pure geometric decay A_k = c0 q^k, k <= 60
    q = 0.5**0.25
    assert seq.partial_sums[-1] == pytest.approx(0.01 * (1 - q**61) / (1 - q), rel=1e-12)
    assert all(seq.recursion_bounds())


def test_scale_sequence_rescaling():
    seq = cf.scale_sequence(mod.inv_log_sq(), 1e-3, 0.25, 1e-2)
    # omega evaluated at rescaled radii stays below c0
    assert max(seq.omegas) <= 1e-2 * (1 + 1e-12)


def test_scale_sequence_requires_dini():
    with pytest.raises(PreconditionError):
        cf.scale_sequence(mod.inv_log(), 1e-3, 0.25, 1e-2)


def test_check_increments():
    seq = cf.scale_sequence(mod.zero(), 0.5, 0.25, 0.01)
    cap0 = 2 * 3 * seq.A[0]
    assert cf.check_increments([0.5 * cap0, 0.5 * cap0], seq, 2, 3) == [True, True]
    assert cf.check_increments([2 * cap0], seq, 2, 3) == [False]


@pytest.fixture(scope="module")
def flat_setup():
    grid = fd.build_domain(fd.HalfDisc(1.0), 1 / 64)
    u = fd.grid_function(grid, lambda x, y: y)
    cert = geo.check_reifenberg(geo.flat(), mod.zero(), "exterior", 0.5, k_max=8)
    hp = cf.select_constants_hopf(cf.ProofInputs(), delta1=0.25, c2=1.0)
    lp = cf.select_constants_lipschitz(cf.ProofInputs())
    return u, cert, hp, lp


def test_induction_flat_hopf_is_exact(flat_setup):
    u, cert, hp, _ = flat_setup
    seq = cf.scale_sequence(mod.inv_log_sq(), cert.eta, hp.alpha0, hp.c0)
    steps = cf.verify_induction(u, cert, hp, seq, "hopf", ks=range(0, 4), a_seq=np.zeros(len(seq.A)))
    for s in steps:
        assert s.lhs == pytest.approx(0.0, abs=1e-14)
        assert s.ok


def test_induction_flat_lipschitz_fits_slope(flat_setup):
    u, cert, _, lp = flat_setup
    seq = cf.scale_sequence(mod.inv_log_sq(), cert.eta, lp.alpha0, lp.c0)
    steps = cf.verify_induction(u, cert, lp, seq, "lipschitz", ks=range(0, 4))
    assert all(s.ok for s in steps)
    # the bound is one-sided: any a_k >= 1 makes sup (1 - a_k) y nonpositive
    assert all(s.a_k >= 1 - 1e-9 and s.lhs <= 1e-12 for s in steps)


def test_induction_scaling(flat_setup):
    u, cert, _, lp = flat_setup
    v = fd.grid_function(u.domain, lambda x, y: y + x**2 + y**2)
    seq = cf.scale_sequence(mod.inv_log_sq(), cert.eta, lp.alpha0, lp.c0)
    a = cf.verify_induction(v, cert, lp, seq, "lipschitz", ks=range(0, 4), a_seq=np.ones(len(seq.A)))
    b = cf.verify_induction(v.scaled(2.0), cert, lp, seq, "lipschitz", ks=range(0, 4), a_seq=2 * np.ones(len(seq.A)))
    for s, t in zip(a, b):
        assert t.lhs == pytest.approx(2 * s.lhs, rel=1e-12)
        assert t.rhs == pytest.approx(2 * s.rhs, rel=1e-12)
        assert s.ok == t.ok


def test_induction_notes(flat_setup):
    u, cert, _, lp = flat_setup
    seq = cf.scale_sequence(mod.inv_log_sq(), cert.eta, lp.alpha0, lp.c0)
    steps = cf.verify_induction(u, cert, lp, seq, "lipschitz", ks=[7, 20])
    assert steps[0].note == "below resolution"
    assert steps[1].note == "no frame at this scale"


def test_induction_on_log_domain(log_harmonic):
    u, _ = log_harmonic
    cert = geo.check_reifenberg(geo.log_example(), mod.inv_log_sq(), "exterior", 0.5, k_max=11, k_min=1)
    lp = cf.select_constants_lipschitz(cf.ProofInputs(K=cert.fitted_K))
    seq = cf.scale_sequence(mod.inv_log_sq(), cert.eta, lp.alpha0, lp.c0)
    steps = cf.verify_induction(u, cert, lp, seq, "lipschitz", ks=range(2, 8), scale_unit=0.5)
    assert [s.k for s in steps] == list(range(2, 8))
    assert all(s.ok for s in steps), [s.to_dict() for s in steps]
    assert all(math.isfinite(s.a_k) for s in steps)
