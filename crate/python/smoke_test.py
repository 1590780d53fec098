"""Smoke test for the `crema` extension module.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist && pip install dist/crema-*.whl
"""

import math
import os
import tempfile

import crema


def main():
    assert crema.preprocess_text("Need  water\n&amp; food") == "Need water & food"
    assert 4 in crema.pattern_matches(
        "Seeking assistance for food and essentials in the aftermath of the Hurricane."
    )

    d = crema.haversine_km(0.0, 0.0, 0.0, 180.0)
    assert abs(d - math.pi * 6371.0) < 1e-6, d

    req = {"id": "r", "text": "x", "ts": 1_600_000_000, "lat": -33.87, "lon": 151.21}
    off = {"id": "o", "text": "y", "ts": 1_600_000_000 + 86_400, "lat": -33.87, "lon": 151.21}
    b = crema.score_pair(req, [1.0, 0.0], off, [1.0, 0.0], crema.MatchParams(delta_time=2.0))
    assert abs(b["s_overall"] - 0.5) < 1e-9, b

    corpus = crema.generate_synthetic(n_pairs=60, n_distractors=5, dim=32, seed=7)
    assert len(corpus["offers"]) == 360

    index = crema.VectorIndex(corpus["offer_embeddings"], crema.IndexConfig("hnsw", ef_search=32))
    hits = index.search(corpus["offer_embeddings"][10], 5)
    assert hits[0][0] == 10, hits
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "offers.idx")
        index.save(path)
        assert crema.VectorIndex.load(path).search(corpus["offer_embeddings"][10], 5) == hits

        emb = os.path.join(tmp, "e.bin")
        crema.write_embeddings(emb, corpus["request_embeddings"])
        back = crema.read_embeddings(emb)
        assert len(back) == 60 and len(back[0]) == 32

    accs = {}
    for mode in ("tts", "ts", "t"):
        results = crema.match_posts(
            corpus["requests"],
            corpus["request_embeddings"],
            corpus["offers"],
            corpus["offer_embeddings"],
            crema.MatchParams(mode=mode),
        )
        accs[mode] = crema.topn_accuracy(results, corpus["truth"], 1)
    assert accs["tts"] == 1.0 and accs["t"] < accs["ts"] < accs["tts"], accs

    try:
        crema.MatchParams(k=0)
    except ValueError:
        pass
    else:
        raise AssertionError("k=0 accepted")

    print("smoke test ok:", accs)


if __name__ == "__main__":
    main()
