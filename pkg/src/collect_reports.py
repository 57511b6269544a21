#!/usr/bin/env python
# -*- coding: utf-8 -*-
import os
import sys

from utils.config import setup_logging
from utils.file import load_records

# Verdict counts per check from a folder of verification reports.

log = setup_logging("collect_reports")

VERDICTS = ["pass", "fail", "report_only", "inconclusive"]


def collect_reports(files):
    all = {}

    for file in sorted(f for f in files if f.endswith((".json", ".jsonl"))):
        try:
            records = load_records(file)
        except ValueError:
            log.warning("Skipping %s: not JSON", file)
            continue

        for record in records:
            if not isinstance(record, dict) or "check_name" not in record:
                # Not a verification report.
                continue
            counts = all.setdefault(record["check_name"], dict.fromkeys(VERDICTS, 0))
            verdict = record.get("verdict")
            if verdict in counts:
                counts[verdict] += 1

    return all


if __name__ == "__main__":
    folder = sys.argv[1]
    r = collect_reports(os.path.join(folder, f) for f in os.listdir(folder))

    print(folder)
    print(r)

    # CSV values
    print(",".join(["check_name"] + VERDICTS))
    for name in sorted(r):
        print(",".join([name] + [str(r[name][v]) for v in VERDICTS]))
    sys.exit(1 if any(counts["fail"] for counts in r.values()) else 0)
