import json

import pytest

from soc.data import LabeledExample, load, load_amazon, load_sentiment140, load_tsv, stars_to_target
from soc.errors import FormatError, InputError
from soc.evaluation import SentimentClass


def _s140(tmp_path, rows):
    path = tmp_path / "s140.csv"
    path.write_text("".join(rows), encoding="utf-8")
    return path


ROW = '"{t}","1467810369","Mon Apr 06 22:19:45 PDT 2009","NO_QUERY","someuser","{text}"\n'


class TestSentiment140:
    def test_label_mapping(self, tmp_path):
        path = _s140(tmp_path, [ROW.format(t=0, text="sad day"), ROW.format(t=4, text="happy, day"), ROW.format(t=2, text="meh")])
        examples, summary = load_sentiment140(path)
        assert [(e.text, e.binary_label, e.ternary_target) for e in examples] == [
            ("sad day", SentimentClass.NEGATIVE, -1.0),
            ("happy, day", SentimentClass.POSITIVE, 1.0),
        ]
        assert summary.dropped == 1 and summary.malformed == 0
        assert summary.counts == {"negative": 1, "positive": 1}
        assert summary.accepted + summary.dropped == 3

    def test_malformed_rows_skipped(self, tmp_path):
        rows = [ROW.format(t=4, text="ok")] * 3 + ['"7","x","d","f","u","bad label"\n', "too,few,fields\n"]
        examples, summary = load_sentiment140(_s140(tmp_path, rows))
        assert len(examples) == 3 and summary.malformed == 2 and summary.total == 5

    def test_mostly_malformed_is_error(self, tmp_path):
        with pytest.raises(FormatError):
            load_sentiment140(_s140(tmp_path, [ROW.format(t=0, text="x"), "a,b\n", "c\n"]))

    def test_text_verbatim_and_invalid_bytes(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_bytes(b'"4","1","d","q","u","@bob caf\xe9 ""quoted"""\n')
        (ex,), _ = load_sentiment140(path)
        assert ex.text == '@bob caf� "quoted"'

    def test_stable_order(self, tmp_path):
        path = _s140(tmp_path, [ROW.format(t=i % 2 * 4, text=f"t{i}") for i in range(20)])
        assert load_sentiment140(path)[0] == load_sentiment140(path)[0]


class TestTsv:
    def test_labels(self, tmp_path):
        path = tmp_path / "a.tsv"
        path.write_text("great phone\t1\nbad service\t0\nno label line\n\nweird\t5\n", encoding="utf-8")
        examples, summary = load_tsv(path)
        assert [(e.text, e.binary_label) for e in examples] == [("great phone", SentimentClass.POSITIVE), ("bad service", SentimentClass.NEGATIVE)]
        assert summary.dropped == 3 and summary.total == 5


class TestAmazon:
    def test_remap(self, tmp_path):
        path = tmp_path / "a.jsonl"
        lines = [json.dumps({"overall": s, "reviewText": f"r{s}"}) for s in (5, 4, 3, 2, 1)]
        path.write_text("\n".join(lines + ["{not json", json.dumps({"overall": 5})]) + "\n", encoding="utf-8")
        examples, summary = load_amazon(path)
        assert [e.ternary_target for e in examples] == [1.0, 1.0, 0.0, -1.0, -1.0]
        assert examples[2].binary_label is None
        assert summary.dropped == 2 and summary.counts["neutral"] == 1

    def test_custom_fields(self, tmp_path):
        path = tmp_path / "a.jsonl"
        path.write_text(json.dumps({"stars": 1, "body": "broke"}) + "\n", encoding="utf-8")
        (ex,), _ = load_amazon(path, rating_field="stars", text_field="body")
        assert ex.ternary_target == -1.0 and ex.text == "broke"

    @pytest.mark.parametrize("stars, target", [(5, 1.0), (4, 1.0), (3, 0.0), (2, -1.0), (1, -1.0)])
    def test_stars(self, stars, target):
        assert stars_to_target(stars) == target


def test_example_needs_a_label():
    with pytest.raises(InputError):
        LabeledExample("x", None, None)


def test_unknown_format(tmp_path):
    with pytest.raises(InputError):
        load(tmp_path / "x", "sst")
