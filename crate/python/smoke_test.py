"""Smoke test for the Python bindings.

Build and install first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
"""

import csv
import math
import os
import tempfile

import sentitrend_py as st

WORDS = {
    "negative": ["sad", "awful", "hate", "terrible"],
    "neutral": ["bus", "lunch", "meeting", "today"],
    "positive": ["love", "great", "happy", "awesome"],
}


def write_corpus(path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["textID", "text", "selected_text", "sentiment"])
        for i in range(120):
            label = list(WORDS)[i % 3]
            words = WORDS[label]
            text = f"{words[i % 4]} {words[(i // 3) % 4]} the day @pal{i}"
            w.writerow([f"id{i}", text, text, label])


def main():
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "train.csv")
        write_corpus(data)
        for kind in ("nb", "logreg", "svm"):
            model = st.train(data, kind, ratio=0.8)
            label, scores = model.predict("i love this awesome day")
            assert label == "positive", (kind, label, scores)
            assert len(scores) == 3

            path = os.path.join(tmp, f"{kind}.sstm")
            version = model.save(path)
            assert version.startswith(kind + "-")
            loaded = st.Model.load(path)
            assert loaded.model_version == version
            probe = "awful sad bus"
            assert loaded.predict(probe) == model.predict(probe)

            report = loaded.evaluate(data)
            assert report["n"] == 120
            assert report["accuracy"] > 0.9, report
            if kind == "logreg":
                assert math.isclose(sum(scores), 1.0)

        anon = st.Anonymizer("key")
        assert anon.hash_id("alice") == st.Anonymizer("key").hash_id("alice")
        assert anon.hash_id("alice") != "alice"
        assert st.Anonymizer.mask_mentions("hi @bob") == "hi @user"

        window = st.TrendWindow(60, 10)
        window.record(1_000, "positive")
        window.record(61_000, "negative")
        assert window.query(0, 119_999) == [(0, 0, 0, 1), (60_000, 1, 0, 0)]
        try:
            window.query(5, 1)
        except ValueError:
            pass
        else:
            raise AssertionError("inverted range accepted")
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
