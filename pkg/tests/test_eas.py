import math

import numpy as np
import pytest

from easde.eas import (
    EasModel,
    ProjectionBank,
    diameter_bound,
    encode,
    encode_batch,
    evaluate,
    evaluate_batch,
    evaluate_path,
    fit,
    fit_path,
    load_model,
    make_bank,
    ranked_codes,
    reference_estimate,
    region_diagnostics,
    save_model,
    set_diameter,
)
from easde.sphere import sample_uniform, surface_area

from .oracles import naive_code, naive_counts, naive_estimate, random_sphere

SQUARE = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


def test_make_bank_rows_and_errors():
    bank = make_bank(2, 4, seed=3)
    assert np.allclose(np.linalg.norm(bank.thetas, axis=1), 1.0, atol=1e-12)
    assert bank.seed == 3
    with pytest.raises(ValueError):
        make_bank(3, 0, seed=1)


def test_make_bank_mean():
    bank = make_bank(3, 10_000, seed=7)
    assert np.linalg.norm(bank.thetas.mean(axis=0)) <= 0.03


def test_make_bank_deterministic():
    assert np.array_equal(make_bank(4, 50, seed=2).thetas, make_bank(4, 50, seed=2).thetas)


def test_encode_square_examples():
    bank = ProjectionBank(SQUARE)
    assert encode(bank, 1, [1.0, 0.0]).tolist() == [0]
    assert encode(bank, 2, [1.0, 0.0]).tolist() == [0, 1]


def test_encode_scale_invariance():
    bank = make_bank(3, 200, seed=4)
    x = np.array([0.3, -1.2, 2.0])
    a = encode(bank, 10, x / np.linalg.norm(x))
    b = encode(bank, 10, 2 * x / np.linalg.norm(2 * x))
    assert np.array_equal(a, b)


def test_encode_errors():
    bank = make_bank(3, 10, seed=1)
    for k in (0, 11, 2.5):
        with pytest.raises(ValueError):
            encode(bank, k, [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        encode(bank, 2, [1.0, 0.0])


@pytest.mark.parametrize("m, k", [(50, 1), (50, 7), (300, 150), (2000, 5), (2000, 1999)])
def test_encode_matches_naive(m, k, rng):
    bank = make_bank(3, m, seed=m + k)
    xs = random_sphere(rng, 20, 3)
    codes = encode_batch(bank, k, xs)
    for x, code in zip(xs, codes):
        assert code.tolist() == naive_code(bank.thetas.tolist(), x.tolist(), k)


def test_encode_ties_prefer_smaller_index():
    # many duplicated rows force exact ties on both the heap and selection paths
    base = sample_uniform(3, 5, seed=9)
    thetas = np.repeat(base, 40, axis=0)
    thetas = thetas[np.random.default_rng(0).permutation(thetas.shape[0])]
    bank = ProjectionBank(thetas)
    xs = sample_uniform(3, 30, seed=10)
    for k in (1, 3, 40, 41, 100, 199):
        for x, code in zip(xs, encode_batch(bank, k, xs)):
            assert code.tolist() == naive_code(thetas.tolist(), x.tolist(), k)


def test_ranked_codes_prefix_property():
    bank = make_bank(3, 400, seed=5)
    xs = sample_uniform(3, 50, seed=6)
    ranked = ranked_codes(bank, 30, xs)
    for k in (1, 4, 17, 30):
        assert np.array_equal(np.sort(ranked[:, :k], axis=1), encode_batch(bank, k, xs))


def test_fit_single_and_duplicate_points():
    bank = make_bank(3, 30, seed=1)
    x = sample_uniform(3, 1, seed=2)
    m1 = fit(bank, 5, x)
    assert sorted(m1.counts.tolist()) == [0] * 25 + [1] * 5
    m2 = fit(bank, 5, np.vstack([x, x]))
    assert sorted(m2.counts.tolist()) == [0] * 25 + [2] * 5


def test_fit_small_instance_matches_brute_force():
    bank = make_bank(2, 6, seed=11)
    data = sample_uniform(2, 5, seed=12)
    model = fit(bank, 2, data)
    assert model.counts.tolist() == naive_counts(bank.thetas.tolist(), data.tolist(), 2)
    assert model.counts.sum() == 10


def test_fit_rejects_empty():
    with pytest.raises(ValueError):
        fit(make_bank(3, 10, seed=1), 2, np.empty((0, 3)))


def test_fit_chunking_and_merge_are_exact():
    bank = make_bank(3, 500, seed=3)
    data = sample_uniform(3, 3000, seed=4)
    whole = fit(bank, 12, data)
    chunked = fit(bank, 12, data, chunk_size=7)
    merged = fit(bank, 12, data[:1234]).merge(fit(bank, 12, data[1234:]))
    assert np.array_equal(whole.counts, chunked.counts)
    assert np.array_equal(whole.counts, merged.counts)
    assert merged.n == 3000


def test_merge_rejects_mismatch():
    data = sample_uniform(3, 10, seed=1)
    a = fit(make_bank(3, 20, seed=1), 3, data)
    with pytest.raises(ValueError):
        a.merge(fit(make_bank(3, 20, seed=2), 3, data))
    with pytest.raises(ValueError):
        a.merge(fit(a.bank, 4, data))


def test_model_invariants():
    bank = make_bank(5, 40, seed=2)
    model = fit(bank, 6, sample_uniform(5, 77, seed=3))
    assert model.counts.sum() == 77 * 6
    assert model.counts.max() <= 77
    assert model.norm_const == pytest.approx(40 / (36 * surface_area(5)), rel=1e-12)
    with pytest.raises(ValueError):
        EasModel(bank, 6, model.counts + 1, 77)


def test_evaluate_zero_count_query():
    bank = ProjectionBank(SQUARE)
    model = fit(bank, 1, [[1.0, 0.0]] * 3)
    assert evaluate(model, [-1.0, 0.0]) == 0.0


def test_evaluate_constant_counts():
    bank = ProjectionBank(SQUARE)
    data = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    model = fit(bank, 1, data)
    c, n, k, m = 1, 4, 1, 4
    assert evaluate(model, [0.6, 0.8]) == pytest.approx(m * c / (n * k * 2 * math.pi))


def test_evaluate_uniform_data_near_truth():
    data = sample_uniform(3, 10_000, seed=1)
    model = fit(make_bank(3, 10_000, seed=2), 300, data)
    vals = evaluate_batch(model, sample_uniform(3, 100, seed=3))
    target = 1 / (4 * math.pi)
    assert np.all(np.abs(vals - target) <= 0.25 * target)


def test_evaluate_batch_consistency():
    model = fit(make_bank(3, 1000, seed=5), 20, sample_uniform(3, 2000, seed=6))
    xs = sample_uniform(3, 10_000, seed=7)
    batch = evaluate_batch(model, xs)
    loop = np.array([evaluate(model, x) for x in xs[:300]])
    assert np.array_equal(batch[:300], loop)
    perm = np.random.default_rng(1).permutation(xs.shape[0])
    assert np.array_equal(evaluate_batch(model, xs[perm]), batch[perm])
    assert np.array_equal(model(xs[:1]), np.array([evaluate(model, xs[0])]))
    assert np.all(batch >= 0)


def test_evaluate_single_rejects_rows():
    model = fit(make_bank(3, 10, seed=1), 2, sample_uniform(3, 5, seed=1))
    with pytest.raises(ValueError):
        evaluate(model, sample_uniform(3, 2, seed=2))


def test_fit_path_matches_individual_fits():
    bank = make_bank(3, 300, seed=8)
    data = sample_uniform(3, 500, seed=9)
    xs = sample_uniform(3, 200, seed=10)
    ks = [3, 9, 10, 25]
    models = fit_path(bank, ks, data)
    path_vals = evaluate_path([models[k] for k in ks], xs)
    for k, vals in zip(ks, path_vals):
        single = fit(bank, k, data)
        assert np.array_equal(models[k].counts, single.counts)
        assert np.allclose(vals, evaluate_batch(single, xs), rtol=1e-14, atol=0)


def test_oracle_small_instance():
    rng = np.random.default_rng(3)
    bank = make_bank(3, 7, seed=1)
    data = random_sphere(rng, 6, 3)
    model = fit(bank, 3, data)
    for x in random_sphere(rng, 5, 3):
        ref = naive_estimate(bank.thetas.tolist(), data.tolist(), 3, x.tolist())
        assert evaluate(model, x) == pytest.approx(ref, rel=1e-12)


def test_save_load_bitwise(tmp_path):
    model = fit(make_bank(4, 64, seed=21), 5, sample_uniform(4, 100, seed=22))
    path = tmp_path / "model.npz"
    save_model(model, path)
    back = load_model(path)
    xs = sample_uniform(4, 500, seed=23)
    assert np.array_equal(back.bank.thetas, model.bank.thetas)
    assert np.array_equal(back.counts, model.counts)
    assert (back.k, back.n, back.bank.seed) == (5, 100, 21)
    assert np.array_equal(evaluate_batch(back, xs), evaluate_batch(model, xs))


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "other.npz"
    np.savez(path, format=np.array("something-else"), version=np.array(1))
    with pytest.raises(ValueError):
        load_model(path)


def test_region_diagnostics_full_sparsity():
    bank = make_bank(3, 20, seed=2)
    rep = region_diagnostics(bank, 20, probes=500, seed=3, regions=5)
    assert np.allclose(rep.volume_ratios, 1.0)
    assert rep.fraction_within(0.999, 1.001) == 1.0


def test_region_diagnostics_volumes_sum():
    bank = make_bank(3, 100, seed=4)
    rep = region_diagnostics(bank, 10, probes=20_000, seed=5, regions=100)
    # every probe lands in exactly k regions
    assert rep.volumes.sum() == pytest.approx(10 * 4 * math.pi, rel=1e-12)
    assert rep.max_diameter <= 2.0
    assert set(rep.summary()) >= {"ratio_min", "ratio_max", "max_diameter", "diameter_bound"}


def test_diameter_bound_formula():
    assert diameter_bound(3, 2000, 200) == pytest.approx(4 / math.sqrt(3) * (6 * math.sqrt(3) * 0.1) ** 0.5)


def test_set_diameter_matches_brute_force(rng):
    for _ in range(20):
        pts = random_sphere(rng, 60, 3)[:: 1]
        pts = pts[pts[:, 2] > 0.3]
        brute = max((np.linalg.norm(a - b) for a in pts for b in pts), default=0.0)
        assert set_diameter(pts) == pytest.approx(brute, abs=1e-15)


def test_reference_estimate_close_to_eas_for_uniform():
    bank = make_bank(3, 2000, seed=6)
    model = fit(bank, 100, sample_uniform(3, 20_000, seed=7))
    rep = region_diagnostics(bank, 100, probes=100_000, seed=8, regions=10)
    xs = sample_uniform(3, 200, seed=9)
    ref = reference_estimate(model, rep.volumes, xs)
    assert np.mean(np.abs(ref - 1 / (4 * math.pi))) < 0.1 / (4 * math.pi)
