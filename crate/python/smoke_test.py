"""Smoke test for the spsketch_py extension module."""

import json
import math

import spsketch_py as sp


def main():
    a = sp.DenseMatrix([[3.0, 0.0], [0.0, 4.0]])
    assert a.n == 2
    assert math.isclose(a.frobenius_norm(), 5.0)
    assert math.isclose(a.spectral_norm(), 4.0, rel_tol=1e-9)
    assert math.isclose(a.stable_rank(), 25.0 / 16.0, rel_tol=1e-9)

    assert sp.sample_size(64, 1.0, 1.0) == 8074
    assert sp.lemma4_sample_size(2, 1.0, 1.0, 0.5) == 59
    assert sp.lemma4_sample_size(64, 1.0, 1.0, 1 / 64) == 8074

    t = sp.threshold_zero(sp.DenseMatrix([[1.0, 0.01], [0.2, -2.0]]), 0.5)
    assert t.to_rows() == [[1.0, 0.0], [0.2, -2.0]]

    sk = sp.sparsify(a, 1.0, seed=7)
    again = sp.sparsify(a, 1.0, seed=7)
    assert sk.triples() == again.triples()
    assert sk.s == sp.sample_size(2, 25.0, 1.0)
    assert sp.measure_error(a, sk) <= 1.0, sk

    one_pass = sp.one_pass_sparsify(a, 1.0, 2000, seed=3)
    assert one_pass.nnz <= 2 and one_pass.s == 2000
    assert sp.measure_error(a, one_pass) < 1.0

    rel = sp.sparsify_relative(a, 0.25)
    assert sp.measure_error(a, rel) <= 1.0

    assert sp.verify_zero_mean(sp.DenseMatrix([[1.0, 1.0], [0.0, 1.0]]))
    moments = json.loads(sp.exact_second_moment(sp.DenseMatrix([[1.0, 1.0], [0.0, 1.0]])))
    assert moments["closed_form"] == [[4.0, -1.0], [-1.0, 2.0]]

    tail = sp.bernstein_tail(8073, 0.5, 64.0, 512.0, 64)
    assert abs(tail - 0.148747771196255) < 1e-12

    report = json.loads(sp.run_experiment(sp.DenseMatrix.identity(8), 0.9, 10, base_seed=1))
    assert report["trials"] == 10 and len(report["per_trial_errors"]) == 10

    try:
        sp.sparsify(a, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative epsilon accepted")

    print("python smoke test OK:", sk, one_pass)


if __name__ == "__main__":
    main()
