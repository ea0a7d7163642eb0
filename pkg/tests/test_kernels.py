import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reactive_blobs.grid import Dirichlet, GridSpec, ScalarField
from reactive_blobs.kernels import (
    BlobSet,
    BlobStencil,
    KernelKind,
    blob_volume,
    interpolate,
    kernel_volume,
    kernel_weight,
    spread,
)

from dense import interpolation_matrix

KINDS = [KernelKind.THREE_POINT, KernelKind.FOUR_POINT]


def phi4_scalar(x):
    # direct transcription of the piecewise closed form, scalar at a time
    r = abs(x)
    if r <= 1:
        return (3 - 2 * r + np.sqrt(1 + 4 * r - 4 * r * r)) / 8
    if r <= 2:
        return (5 - 2 * r - np.sqrt(max(-7 + 12 * r - 4 * r * r, 0.0))) / 8
    return 0.0


def test_center_values():
    assert kernel_weight(KernelKind.FOUR_POINT, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert kernel_weight(KernelKind.THREE_POINT, 0.0) == pytest.approx(2.0 / 3.0, abs=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_support_edge(kind):
    w = kind.width
    assert kernel_weight(kind, w / 2) == 0.0
    assert kernel_weight(kind, -w / 2) == 0.0
    assert kernel_weight(kind, w / 2 + 0.3) == 0.0


def test_four_point_matches_scalar_transcription():
    xs = np.linspace(-2.5, 2.5, 1001)
    ref = np.array([phi4_scalar(x) for x in xs])
    assert np.allclose(kernel_weight(KernelKind.FOUR_POINT, xs), ref, atol=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_continuity_at_piece_boundaries(kind):
    for b in ([0.5, 1.5] if kind == KernelKind.THREE_POINT else [1.0, 2.0]):
        eps = 1e-12
        lo, hi = kernel_weight(kind, b - eps), kernel_weight(kind, b + eps)
        assert abs(lo - hi) < 1e-10


@pytest.mark.parametrize("kind", KINDS)
def test_moments_at_random_offsets(kind):
    rng = np.random.default_rng(7)
    w = kind.width
    const = None
    for u in rng.random(100):
        cells = np.floor(u - w / 2 + 0.5) + np.arange(w)
        phi = kernel_weight(kind, u - (cells + 0.5))
        assert abs(phi.sum() - 1) < 1e-12
        assert abs(np.sum((u - (cells + 0.5)) * phi)) < 1e-12
        s2 = np.sum(phi**2)
        const = s2 if const is None else const
        assert abs(s2 - const) < 1e-12
    assert const == pytest.approx({3: 0.5, 4: 3 / 8}[int(kind)], abs=1e-12)


def test_kernel_parse():
    assert KernelKind.parse("4pt") is KernelKind.FOUR_POINT
    assert KernelKind.parse(3) is KernelKind.THREE_POINT
    with pytest.raises(ValueError):
        KernelKind.parse(5)


def test_blobset_validation():
    with pytest.raises(ValueError):
        BlobSet([[1.0, 2.0, 3.0]], kappa=-1.0)
    b = BlobSet([[1.0, 2.0, 3.0], [4, 5, 6]], kappa=[np.inf, 2.0])
    assert len(b) == 2 and b.any_diffusion_limited and not b.diffusion_limited
    assert not b.positions.flags.writeable


@pytest.mark.parametrize("kind", KINDS)
def test_zeroth_and_first_moment_on_grid(kind):
    g = GridSpec.cube(16, 3, 0.5)
    q = np.array([[4.1, 3.77, 4.4]])
    blobs = BlobSet(q, kernel=kind)
    assert interpolate(blobs, ScalarField.constant(g, 2.0))[0] == pytest.approx(2.0, abs=1e-13)
    grad = np.array([0.3, -1.2, 2.0])
    lin = ScalarField.from_function(g, lambda x, y, z: grad[0] * x + grad[1] * y + grad[2] * z)
    assert interpolate(blobs, lin)[0] == pytest.approx(grad @ q[0], abs=1e-12)


def test_spread_zero_and_total():
    g = GridSpec.cube(8, 3, 0.5)
    blobs = BlobSet([[1.0, 1.3, 2.2], [0.1, 3.9, 2.0]])
    assert np.all(spread(blobs, 0.0, g).values == 0)
    f = spread(blobs, [1.5, -0.25], g)
    assert f.values.sum() * g.cell_volume == pytest.approx(1.25, abs=1e-13)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(KINDS), n=st.integers(1, 6))
def test_adjoint_identity(seed, kind, n):
    rng = np.random.default_rng(seed)
    g = GridSpec((8, 6, 10), 0.7)
    blobs = BlobSet(rng.random((n, 3)) * g.lengths * 2 - 3, kernel=kind)  # includes wrap
    st_ = BlobStencil(g, blobs)
    lam = rng.standard_normal(n)
    c = rng.standard_normal(g.shape)
    lhs = np.vdot(st_.spread(lam), c) * g.cell_volume
    rhs = lam @ st_.interpolate(c)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("periodic", [True, False])
def test_stencil_matches_dense_oracle(kind, periodic):
    rng = np.random.default_rng(11)
    shape, h = (8, 9, 10), 0.6
    bc = None if periodic else Dirichlet(0.0)
    g = GridSpec(shape, h) if periodic else GridSpec(shape, h, bc)
    if periodic:
        pos = rng.random((4, 3)) * g.lengths
    else:
        pos = 2.5 * h + rng.random((4, 3)) * (g.lengths - 5 * h)
    J = interpolation_matrix(pos, kind, shape, h, periodic)
    st_ = BlobStencil(g, BlobSet(pos, kernel=kind))
    c = rng.standard_normal(shape)
    assert np.allclose(st_.interpolate(c), J @ c.ravel(), atol=1e-13)
    lam = rng.standard_normal(4)
    assert np.allclose(st_.spread(lam).ravel(), J.T @ lam / h**3, atol=1e-12)


def test_dirichlet_support_crossing_rejected():
    g = GridSpec.cube(8, 3, 1.0, Dirichlet(1.0))
    with pytest.raises(ValueError):
        BlobStencil(g, BlobSet([[1.2, 4, 4]]))
    BlobStencil(g, BlobSet([[2.0, 4, 4]]))  # four-point support exactly inside


def test_js_is_multiple_of_identity():
    g = GridSpec.cube(16)
    blobs = BlobSet([[2.0, 2.0, 2.0], [8.3, 9.1, 7.7], [12.5, 3.0, 13.0]], kernel=4)
    st_ = BlobStencil(g, blobs)
    JS = np.array([st_.interpolate(st_.spread(e)) for e in np.eye(3)])
    assert np.allclose(JS, np.eye(3) / (8 / 3) ** 3, atol=1e-14)


@pytest.mark.parametrize("kind,dim,expect", [(3, 3, 8.0), (4, 3, (8 / 3) ** 3), (4, 2, (8 / 3) ** 2), (3, 2, 4.0)])
def test_blob_volume(kind, dim, expect):
    rng = np.random.default_rng(dim * 10 + kind)
    h = 0.5
    g = GridSpec.cube(8, dim, h)
    for _ in range(20):
        blobs = BlobSet(rng.random((1, dim)) * g.lengths, kernel=kind)
        assert blob_volume(blobs, 0, g) == pytest.approx(expect * h**dim, rel=1e-12)
    assert kernel_volume(kind, dim, h) == pytest.approx(expect * h**dim, rel=1e-14)


def test_spread_then_interpolate_is_inverse_volume():
    g = GridSpec.cube(8)
    blobs = BlobSet([[3.3, 4.1, 2.9]], kernel=3)
    st_ = BlobStencil(g, blobs)
    assert st_.interpolate(st_.spread(1.0))[0] == pytest.approx(1 / 8.0, rel=1e-13)
