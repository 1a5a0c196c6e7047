import io
import random

import pytest

from pjsec import adversary
from pjsec.adversary import (AttackScenario, adjacency_slots, binomial_upper_bound, run_eclipse,
                             run_mitm, run_sybil, tamper_cells)
from pjsec.cost import CostModelConfig, sybil_bandwidth
from pjsec.overlay import IdLayout, OverlayId

from conftest import make_head


@pytest.fixture
def cell(secp):
    return make_head(secp, IdLayout(2, 3, 6), founders=3)


def test_sybil_same_ip(cell):
    rep = run_sybil(10, b"mallory", cell, seed=1)
    assert rep.successes == 1
    assert rep.rejections == {"DuplicateIdentity": 9}
    assert rep.consistent()


def test_sybil_distinct_ips_control(cell):
    rep = run_sybil(10, b"mallory", cell, seed=1, distinct_ips=True)
    assert rep.successes == 10


def test_sybil_colluding_friend_gains_nothing(cell):
    rep = run_sybil(10, b"mallory", cell, seed=2, collude=True)
    assert rep.successes == 1


def test_sybil_bandwidth_matches_cost_model(secp):
    head = make_head(secp, IdLayout(2, 3, 7), founders=2)
    cfg = CostModelConfig(jitter=False)
    rep = run_sybil(8, b"forger", head, seed=3, cfg=cfg)  # one 3-bit forge domain
    assert rep.bandwidth == pytest.approx(sybil_bandwidth(3, True, group_size=1, cfg=cfg)[0])
    big = run_sybil(100, b"forger2", head, seed=4, cfg=cfg)
    assert big.bandwidth == pytest.approx(4 * cfg.c_p + 99 * 2 * cfg.c_p)


def test_eclipse_zero_tries(cell):
    target = OverlayId.from_fields(cell.id_v.layout, 1, 2, 5)
    rep = run_eclipse(target, 0, cell, seed=0)
    assert rep.attempts == 0 and rep.success_rate == 0


def test_eclipse_whole_window_always_hits(cell):
    lay = cell.id_v.layout
    target = OverlayId.from_fields(lay, 1, 2, 5)
    rep = run_eclipse(target, 40, cell, seed=1, window=lay.slots)
    assert rep.success_rate == 1.0


def test_eclipse_no_better_than_random(secp):
    head = make_head(secp, IdLayout(2, 3, 5), founders=1)
    target = OverlayId.from_fields(head.id_v.layout, 1, 2, 9)
    tries, window = 32 * 8, 2
    rep = run_eclipse(target, tries, head, seed=5, window=window)
    assert rep.consistent()
    assert rep.successes <= binomial_upper_bound(tries, window / 32)
    assert len(adjacency_slots(target, window)) == window


def test_eclipse_target_outside_range(cell):
    with pytest.raises(ValueError):
        run_eclipse(OverlayId.from_fields(cell.id_v.layout, 3, 3, 0), 1, cell, seed=0)


def test_beta1_tamper_caught_by_b(cell):
    rep = run_mitm(cell, (2, "beta1"), seed=1, sessions=3)
    assert rep.successes == 0
    assert rep.rejections == {"IdMismatch": 3}
    assert rep.rejected_by == {"B": 3}


def test_signature_tamper_is_bad_signature_at_b(cell):
    rep = run_mitm(cell, (3, "token.sig"), seed=1, sessions=3)
    assert rep.rejections == {"BadSignature": 3}
    assert rep.rejected_by == {"B": 3}


@pytest.mark.parametrize("cell_", list(tamper_cells()), ids=lambda c: f"{c[0]}.{c[1]}")
def test_every_tamper_cell_rejected(cell, cell_):
    rep = run_mitm(cell, cell_, seed=11, sessions=2)
    assert rep.successes == 0
    assert set(rep.rejections) <= {"BadSignature", "IdMismatch"}
    assert all(t.tampered == [cell_[0]] for t in rep.transcripts)


def test_mitm_leaves_original_head_untouched(cell):
    before = dict(cell.state.registry)
    run_mitm(cell, (1, "pu_n"), seed=2, sessions=2)
    assert cell.state.registry == before


def test_scenario_validation():
    with pytest.raises(ValueError):
        AttackScenario("dos", seed=1)
    with pytest.raises(ValueError):
        AttackScenario("sybil", seed=1, k=0)
    with pytest.raises(ValueError):
        AttackScenario("eclipse", seed=1)
    with pytest.raises(ValueError):
        AttackScenario("mitm", seed=1, tamper=(1, "beta1"))


def test_run_scenario_dispatch(cell):
    rep = adversary.run_scenario(AttackScenario("mitm", seed=3, tamper=(4, "beta3")), cell)
    assert rep.successes == 0 and rep.attempts == 1
    rep = adversary.run_scenario(AttackScenario("sybil", seed=3, k=3), cell, ip=b"s")
    assert rep.successes == 1


def test_report_csv(cell):
    rep = run_sybil(3, b"m", cell, seed=1)
    buf = io.StringIO()
    adversary.write_reports_csv(buf, [("demo", rep)])
    header, row = buf.getvalue().splitlines()
    assert header.split(",") == list(adversary.REPORT_COLUMNS)
    assert row.startswith("demo,1,3,1,")
