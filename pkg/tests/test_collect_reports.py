import json

from collect_reports import collect_reports
from utils.file import write_json, write_json_lines
from utils.inequality_verifier import report


def test_collect_reports(tmp_path):
    passing = report("lemma4", {}, 1.0, 2.0, True).to_record()
    failing = report("lemma4", {}, 3.0, 2.0, True).to_record()
    outside = report("lemma1", {}, 3.0, 2.0, False).to_record()
    write_json(passing, str(tmp_path / "a.json"))
    write_json_lines([failing, outside, {"other": 1}], str(tmp_path / "b.jsonl"))
    (tmp_path / "c.json").write_text("not json")
    (tmp_path / "notes.txt").write_text(json.dumps(passing))

    files = [str(p) for p in tmp_path.iterdir()]
    counts = collect_reports(files)
    assert counts == {
        "lemma4": {"pass": 1, "fail": 1, "report_only": 0, "inconclusive": 0},
        "lemma1": {"pass": 0, "fail": 0, "report_only": 1, "inconclusive": 0},
    }
