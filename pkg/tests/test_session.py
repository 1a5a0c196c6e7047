import hashlib
import random
import threading

from pjsec.errors import UnknownSession
from pjsec.group import keygen
from pjsec.overlay import IdLayout, OverlayId
from pjsec.session import Bootstrap, NewNode, VicinityHead, run_join

from conftest import NOW, make_head


def _fixture_join(group):
    rng = random.Random(7)
    head = VicinityHead.create(group, OverlayId.from_fields(IdLayout(2, 3, 5), 1, 2, 0), rng,
                               founders=2, now=NOW)
    return run_join(b"fixture-node", head, head.members[0], NOW + 100, rng=rng)


def test_golden_transcript(secp, golden):
    out = _fixture_join(secp)
    assert out.accepted
    assert str(out.peer.id_n) == golden["token_id_n"]
    assert hashlib.sha256(out.transcript.to_bytes()).hexdigest() == \
        golden["transcript_seed7_sha256"]
    assert _fixture_join(secp).transcript.to_bytes() == out.transcript.to_bytes()


def test_shared_point_agrees(secp, head):
    out = run_join(b"alice", head, head.members[0], NOW, rng=random.Random(3))
    tr = out.transcript
    assert tr.get("gamma1") == tr.get("beta2") == tr.get("alpha")
    assert tr.id_at_v == tr.id_at_b == tr.id_at_n
    assert tr.hops == 4 and tr.verdict_b == tr.verdict_n == "accepted"
    assert set(tr.timings) == {"n_start", "b_forward", "v_issue", "b_verify_and_endorse",
                               "n_endorse"}
    assert "alice" in tr.to_text()


def test_probe_is_flagged(secp):
    head = make_head(secp, IdLayout(1, 1, 2), 1, 1, founders=3)
    out = run_join(b"crowded", head, head.members[0], NOW, rng=random.Random(0))
    assert out.accepted
    probes = [m.id.node for m in head.members]
    assert len(set(probes)) == len(probes)
    labels = [e.label for e in out.transcript.events]
    assert out.peer.token.probe == 2
    assert "probed" in labels


def test_overflow_through_driver(secp):
    lay = IdLayout(2, 2, 2)
    home = make_head(secp, lay, 1, 1, seed=1, founders=3)
    far = make_head(secp, lay, 1, 2, seed=2, founders=1)
    nearer = make_head(secp, lay, 1, 3, seed=3, founders=2)
    rng = random.Random(9)
    out = run_join(b"x1", home, home.members[0], NOW, rng=rng, neighbors=[nearer, far])
    assert out.accepted and home.state.full
    out = run_join(b"x2", home, home.members[0], NOW, rng=rng, neighbors=[nearer, far])
    assert out.accepted
    assert out.transcript.forwarded_to == far.id_v
    assert out.peer.id_n.same_prefix(far.id_v)


def test_saturated_overlay(secp):
    lay = IdLayout(1, 1, 1)
    home = make_head(secp, lay, 0, 0, founders=1)
    other = make_head(secp, lay, 0, 1, founders=1)
    rng = random.Random(4)
    run_join(b"a", home, home.members[0], NOW, rng=rng, neighbors=[other])
    run_join(b"b", home, home.members[0], NOW, rng=rng, neighbors=[other])
    out = run_join(b"c", home, home.members[0], NOW, rng=rng, neighbors=[other])
    assert out.error.kind == "OverlaySaturated"


def test_colluding_friend_still_bound_by_registry(secp, head):
    rng = random.Random(5)
    first = run_join(b"evil", head, head.members[0], NOW, rng=rng, collude=True)
    again = run_join(b"evil", head, head.members[0], NOW, rng=rng, collude=True)
    assert first.accepted
    assert again.error.kind == "DuplicateIdentity"


def test_unknown_session_at_b(secp, head):
    b = Bootstrap(head.members[0], secp)
    try:
        b.endorse((b"ghost", secp.generator), None, head.pu_v)
    except UnknownSession as exc:
        assert exc.party == "B"
    else:
        raise AssertionError("expected UnknownSession")
    node = NewNode(b"n", keygen(secp, random.Random(1)), secp)
    try:
        node.finish(None, head.pu_v)
    except UnknownSession:
        pass
    else:
        raise AssertionError("expected UnknownSession")


def test_concurrent_joins_keep_registry_consistent(secp):
    head = make_head(secp, IdLayout(2, 3, 7), founders=1)
    friend = head.members[0]

    def worker(w):
        rng = random.Random(w)
        for i in range(10):
            run_join(f"w{w}-{i}".encode(), head, friend, NOW, rng=rng)

    threads = [threading.Thread(target=worker, args=(w,)) for w in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    head.state.check_invariants()
    assert head.state.occupancy == 41
