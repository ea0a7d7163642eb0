import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reactive_blobs.grid import (
    PERIODIC,
    Dirichlet,
    GridSpec,
    ScalarField,
    apply_helmholtz,
    apply_laplacian,
    boundary_term,
    dot,
    laplacian_values,
    mean,
    subtract_mean,
    write_field_csv,
)

from dense import dirichlet_rhs, laplacian_matrix


def random_field(spec, seed=0):
    return ScalarField(spec, np.random.default_rng(seed).standard_normal(spec.shape))


def test_spec_validation():
    with pytest.raises(ValueError):
        GridSpec((3, 8, 8))
    with pytest.raises(ValueError):
        GridSpec((8,))
    with pytest.raises(ValueError):
        GridSpec((8, 8), h=0.0)
    g = GridSpec((8, 6, 4), 0.5)
    assert g.n_cells == 192
    assert g.cell_volume == pytest.approx(0.125)
    assert g.volume == pytest.approx(24.0)
    assert np.allclose(g.centers(2), [0.25, 0.75, 1.25, 1.75])


def test_field_rejects_nonfinite_and_wrong_shape():
    g = GridSpec.cube(4)
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.shape, np.nan))
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros((4, 4)))


def test_constant_in_null_space():
    g = GridSpec.cube(8)
    assert np.all(apply_laplacian(ScalarField.constant(g, 5.0)).values == 0.0)


@pytest.mark.parametrize("dim", [2, 3])
def test_sine_eigenfield(dim):
    h = 0.3
    g = GridSpec((16,) * dim, h)
    Lx = 16 * h
    f = ScalarField.from_function(g, lambda *x: np.sin(2 * np.pi * x[0] / Lx))
    lam = -(2 - 2 * np.cos(2 * np.pi * h / Lx)) / h**2
    assert np.allclose(apply_laplacian(f).values, lam * f.values, atol=1e-12)


def test_impulse_sums_to_zero():
    g = GridSpec.cube(4)
    v = np.zeros(g.shape)
    v[1, 2, 3] = 1.0
    assert abs(apply_laplacian(ScalarField(g, v)).values.sum()) < 1e-14


@pytest.mark.parametrize("shape,periodic", [((4, 4, 4), True), ((6, 4, 5), False), ((5, 7), True), ((4, 6), False)])
def test_matches_dense_laplacian(shape, periodic):
    h = 0.7
    bc = PERIODIC if periodic else Dirichlet(0.0)
    g = GridSpec(shape, h, bc)
    f = random_field(g, 3)
    L = laplacian_matrix(shape, h, periodic)
    assert np.allclose(apply_laplacian(f).values.ravel(), L @ f.values.ravel(), atol=1e-12)


def test_dirichlet_affine_part():
    shape, h, cb = (6, 5, 4), 0.5, 2.5
    g = GridSpec(shape, h, Dirichlet(cb))
    f = random_field(g, 1)
    expect = laplacian_matrix(shape, h, False) @ f.values.ravel() + dirichlet_rhs(shape, h, cb)
    assert np.allclose(apply_laplacian(f).values.ravel(), expect, atol=1e-11)
    assert np.allclose(boundary_term(g).ravel(), dirichlet_rhs(shape, h, cb))


def test_dirichlet_constant_at_boundary_value():
    g = GridSpec.cube(8, 3, 1.0, Dirichlet(3.0))
    out = apply_laplacian(ScalarField.constant(g, 3.0))
    assert np.max(np.abs(out.values)) < 1e-12


def test_helmholtz_reductions():
    g = GridSpec.cube(8)
    f = random_field(g)
    assert np.allclose(apply_helmholtz(f, 1.0, 0.0).values, f.values)
    assert np.allclose(apply_helmholtz(f, 0.0, 2.0).values, -2.0 * apply_laplacian(f).values)
    L = 8
    test_op = apply_helmholtz(f, L**-2, 1.0).values
    assert np.allclose(test_op, f.values / L**2 - apply_laplacian(f).values)
    with pytest.raises(ValueError):
        apply_helmholtz(f, -1.0, 1.0)


def test_mean_utilities():
    g = GridSpec.cube(4)
    assert mean(ScalarField.constant(g, 2.5)) == pytest.approx(2.5)
    f = random_field(g)
    z = subtract_mean(f)
    assert abs(mean(z)) <= 1e-14 * np.abs(f.values).max()
    assert dot(f, f) > 0
    assert dot(ScalarField.constant(g, 0.0), ScalarField.constant(g, 0.0)) == 0.0


shapes = st.sampled_from([(4, 4, 4), (8, 4, 6), (6, 6), (8, 5)])


@settings(max_examples=25, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2**31))
def test_periodic_symmetry_and_sign(shape, seed):
    g = GridSpec(shape)
    rng = np.random.default_rng(seed)
    f, k = rng.standard_normal(shape), rng.standard_normal(shape)
    Lf, Lk = laplacian_values(g, f), laplacian_values(g, k)
    scale = np.linalg.norm(f) * np.linalg.norm(Lk) + 1e-300
    assert abs(np.vdot(Lf, k) - np.vdot(f, Lk)) <= 1e-12 * scale
    assert np.vdot(f, Lf) <= 1e-12 * np.linalg.norm(f) * np.linalg.norm(Lf)
    assert abs(Lf.mean()) <= 1e-13 * np.abs(f).max()


def test_field_csv_layout(tmp_path):
    g = GridSpec((4, 5, 6), 0.5)
    v = np.arange(g.n_cells, dtype=float).reshape(g.shape)
    path = tmp_path / "f.csv"
    write_field_csv(ScalarField(g, v), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,k,x,y,z,value"
    assert len(lines) == g.n_cells + 1
    first, second = lines[1].split(","), lines[2].split(",")
    assert first[:3] == ["0", "0", "0"] and second[:3] == ["1", "0", "0"]  # x fastest
    assert float(second[-1]) == v[1, 0, 0]
    assert float(second[3]) == pytest.approx(0.75)


def test_field_csv_2d(tmp_path):
    g = GridSpec((4, 4))
    write_field_csv(ScalarField.constant(g, 1.0), tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "i,j,x,y,value"
