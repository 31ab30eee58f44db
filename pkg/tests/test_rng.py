import numpy as np
import pytest

from patrelax.rng import Pcg32, gaussian_noise

# published output of the PCG32 reference demo, seed 42, stream 54
PCG32_REFERENCE = [0xA15C02B7, 0x7B47F409, 0xBA1D3330, 0x83D2F293, 0xBFA4784B, 0xCBED606E]


def test_reference_stream():
    g = Pcg32(42, 54)
    assert [g.next_uint32() for _ in range(6)] == PCG32_REFERENCE


@pytest.mark.parametrize("count", [1, 7, 4096, 4097, 10000])
def test_vectorized_matches_scalar(count):
    a = Pcg32(123456789).uint32_array(count)
    g = Pcg32(123456789)
    b = np.array([g.next_uint32() for _ in range(count)], dtype=np.uint32)
    np.testing.assert_array_equal(a, b)


def test_state_continues_after_block():
    g = Pcg32(5)
    g.uint32_array(5000)
    h = Pcg32(5)
    for _ in range(5000):
        h.next_uint32()
    assert g.state == h.state
    assert g.next_uint32() == h.next_uint32()


def test_box_muller_pairs():
    g = Pcg32(9)
    u = [g.next_uint32() for _ in range(4)]
    z = Pcg32(9).normal_array(3)
    u1, u2 = (u[0] + 1) / 2**32, u[1] / 2**32
    r = np.sqrt(-2 * np.log(u1))
    assert z[0] == pytest.approx(r * np.cos(2 * np.pi * u2), rel=1e-15)
    assert z[1] == pytest.approx(r * np.sin(2 * np.pi * u2), rel=1e-15)


def test_zero_std_and_determinism():
    assert not gaussian_noise((3, 4), 0.0, 1).any()
    np.testing.assert_array_equal(gaussian_noise((5, 6), 1.5, 77), gaussian_noise((5, 6), 1.5, 77))
    assert not np.array_equal(gaussian_noise((5, 6), 1.0, 1), gaussian_noise((5, 6), 1.0, 2))


def test_moments():
    z = gaussian_noise((1_000_000,), 1.0, 2024)
    assert 0.997 <= z.std() <= 1.003
    assert -0.004 <= z.mean() <= 0.004


def test_golden_values():
    # frozen from the first run; guards cross-platform reproducibility
    z = gaussian_noise((4,), 1.0, 0)
    np.testing.assert_allclose(z, [float.fromhex(h) for h in GOLDEN], rtol=1e-14)


GOLDEN = [
    "-0x1.0f040653d3f92p+1",
    "-0x1.631c48e982c16p+0",
    "0x1.6adf27bad993fp-1",
    "-0x1.0fe1fcdc63399p-2",
]
