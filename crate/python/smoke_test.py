"""Smoke test for the pycinet extension module.

Build and install first, for example:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import math
import os
import tempfile

import pycinet


def main():
    corpus = pycinet.Corpus.generate(k=3, num_scenes=12, vocab_size=20, scene_len=10, seed=7)
    assert len(corpus) == 12 and corpus.vocab_size == 20 and corpus.truth_k == 3

    lda = pycinet.LdaModel.fit(corpus, k0=2, iterations=30, seed=1)
    for row in lda.phi:
        assert abs(sum(row) - 1.0) < 1e-9
    h = lda.system_entropy()
    assert 0.0 <= h <= pycinet.entropy_upper_bound(20, 2)
    assert len(lda.encode("P_C")) == 2
    lda.add_context()
    assert lda.k0 == 3

    assert abs(pycinet.loss([0.5], [1]) - math.log(2)) < 1e-12

    pairs = pycinet.PairSet.build(
        k_max=3, corpora_per_k=2, test_corpora_per_k=1, num_scenes=6, scene_len=8,
        vocab_size=20, gibbs_iterations=20, seeds_per_positive=1, seed=3,
    )
    assert pairs.input_dim == 20 and len(pairs) > 0
    net, history = pycinet.Cinet.train(pairs, hidden=8, max_epochs=5, seed=2)
    assert [r["epoch"] for r in history] == list(range(1, len(history) + 1))
    acc = net.evaluate(pairs, "test")
    assert 0.0 <= acc <= 1.0
    p = net.predict(lda.encode("P_C"))
    assert 0.0 < p < 1.0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "net.json")
        net.save(path)
        again = pycinet.Cinet.load(path)
        assert again.predict(lda.encode("P_C")) == p
        corpus.save(os.path.join(d, "c.jsonl"))
        assert pycinet.Corpus.load(os.path.join(d, "c.jsonl")).scenes == corpus.scenes

    final, trace = pycinet.run_stream(corpus, policy="oracle", sweeps_per_scene=5, settle_sweeps=5)
    assert final.k0 == 3 and trace[-1]["scenes_seen"] == 12
    curve = pycinet.sweep_increment(corpus, net, [1, 2, 3], fits_per_k0=2, iterations=20)
    assert [k for k, _, _ in curve] == [1, 2, 3]

    try:
        net.predict([[0.0] * 5])
    except ValueError as e:
        assert "shape" in str(e)
    else:
        raise AssertionError("expected a shape error")

    print(f"pycinet smoke test passed (test accuracy {acc:.3f}, entropy {h:.3f})")


if __name__ == "__main__":
    main()
