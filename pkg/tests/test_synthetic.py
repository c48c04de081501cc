import numpy as np
import pytest

from sketchmatch.synthetic import PAPER_TONE, identity_geometry, make_pairs, render_pair


def test_shapes_and_range():
    p, s, ids, attrs = make_pairs(3, 2, size=32, seed=0, n_attributes=2)
    assert p.shape == s.shape == (6, 1, 32, 32)
    assert ids.tolist() == [0, 0, 1, 1, 2, 2]
    assert attrs.shape == (6, 2) and set(np.unique(attrs)) <= {0.0, 1.0}
    assert p.min() >= 0 and p.max() <= 1 and s.min() >= 0 and s.max() <= 1


def test_seeded():
    a = make_pairs(2, 2, size=32, seed=4)
    b = make_pairs(2, 2, size=32, seed=4)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))
    assert make_pairs(2, 1, size=32, seed=5)[0].tobytes() != a[0][::2].tobytes()


def test_sketch_ground_is_paper_tone():
    _, s = render_pair(identity_geometry(0), size=64)
    assert s[-1, -1] == pytest.approx(PAPER_TONE, abs=1e-6)


def test_variants_share_geometry():
    p, s, _, _ = make_pairs(2, 3, size=32, seed=0, jitter=False)
    assert p[0].tobytes() == p[1].tobytes() == p[2].tobytes()
    assert p[0].tobytes() != p[3].tobytes() and s[0].tobytes() != s[3].tobytes()


def test_jitter_perturbs_later_variants_only():
    a = make_pairs(2, 2, size=32, seed=0)[0]
    b = make_pairs(2, 2, size=32, seed=0, jitter=False)[0]
    assert a[0].tobytes() == b[0].tobytes()
    assert a[1].tobytes() != b[1].tobytes()


def test_attributes_constant_per_identity():
    _, _, ids, attrs = make_pairs(3, 3, size=16, seed=2, n_attributes=4)
    for i in range(3):
        assert len({tuple(r) for r in attrs[ids == i]}) == 1
