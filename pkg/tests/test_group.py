import random

import pytest
from hypothesis import given, settings, strategies as st

from pjsec.errors import EncodingError
from pjsec.group import GroupElement, get_group, keygen, keypair_from_secret
from pjsec.instrument import count_ops


def test_unit_scalar_gives_generator(secp):
    assert keypair_from_secret(secp, 1).pk == secp.generator


def test_keygen_seed_42_is_frozen(secp, golden):
    kp = keygen(secp, random.Random(42))
    assert hex(kp.sk) == golden["keygen_seed42"]["sk"]
    assert kp.pk.hex() == golden["keygen_seed42"]["pk"]
    assert keygen(secp, random.Random(42)) == kp


def test_distinct_seeds_distinct_keys(secp):
    assert keygen(secp, random.Random(1)).sk != keygen(secp, random.Random(2)).sk


def test_mul_by_one_and_zero(secp):
    p = secp.base_mul(12345)
    assert secp.mul(1, p) == p
    assert secp.mul(0, p) == secp.identity
    assert secp.mul(secp.order, p) == secp.identity


def test_add_identity_and_inverse(secp):
    p = secp.base_mul(99)
    assert secp.add(p, secp.identity) == p
    assert secp.add(p, secp.base_mul(secp.order - 99)) == secp.identity


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2**256), st.integers(1, 2**256))
def test_backends_agree(a, b):
    fast, slow = get_group("secp256k1"), get_group("secp256k1-py")
    pa, pb = fast.base_mul(a), slow.base_mul(a)
    assert pa == pb
    assert fast.mul(b, pa) == slow.mul(b, pb)
    assert fast.add(pa, fast.base_mul(b)) == slow.add(pb, slow.base_mul(b))


def test_known_multiple_of_generator(secp):
    # 2G on secp256k1 (SEC 2 test vectors)
    x = 0xC6047F9441ED7D6D3045406E95C07CD85C778E4B8CEF3CA7ABAC09B95C709EE5
    assert secp.base_mul(2).data == b"\x02" + x.to_bytes(32, "big")


@pytest.mark.parametrize("gid", ["modp-101", "modp-65267"])
def test_small_group_matches_modexp(gid):
    g = get_group(gid)
    rng = random.Random(gid)
    base = g.to_int(g.generator)
    for _ in range(200):
        a, b, c = (rng.randrange(1, g.order) for _ in range(3))
        x = g.mul(a, g.mul(b, g.base_mul(c)))
        assert g.to_int(x) == pow(base, a * b * c, g.p)


def test_scalar_action_commutes(tiny):
    sn, sb, sv = 3, 5, 7
    g = tiny
    one = g.mul(sn, g.mul(sb, g.base_mul(sv)))
    two = g.mul(sv, g.mul(sb, g.base_mul(sn)))
    assert one == two == GroupElement(bytes([pow(2, 105, 101)]))


def test_decode_rejects_bad_points(secp, tiny):
    with pytest.raises(EncodingError):
        secp.decode(b"\x02" * 10)
    with pytest.raises(EncodingError):
        secp.decode(b"\x05" + bytes(32))
    with pytest.raises(EncodingError):
        tiny.decode(bytes([0]))
    assert secp.decode(secp.identity.data) == secp.identity


def test_ops_are_counted(secp):
    with count_ops() as ops:
        p = secp.base_mul(5)
        secp.add(p, p)
    assert (ops.mul, ops.add) == (1, 1)


def test_keypair_from_secret_range(secp):
    with pytest.raises(ValueError):
        keypair_from_secret(secp, 0)
    with pytest.raises(KeyError):
        get_group("nope")
