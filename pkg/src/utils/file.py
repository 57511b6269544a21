# -*- coding: utf-8 -*-
import contextlib
import csv
import json
import struct
import sys

import numpy as np

from utils.inequality_verifier import to_plain
from utils.maximal_operators import GridFunction, LatticeFunction

# Binary function layout, little endian:
#   b"HLF1", uint32 d, uint8 kind (0 lattice, 1 grid), float64 mesh,
#   int64 offset[d], int64 shape[d], float64 values in C order.
MAGIC = b"HLF1"
HEADER = struct.Struct("<4sIBd")


def load_json(file):
    with open(file, "r") as input_file:
        return json.load(input_file)


@contextlib.contextmanager
def open_output(file, newline=None):
    # "-" is stdout.
    if file == "-":
        yield sys.stdout
    else:
        with open(file, "w", newline=newline) as output_file:
            yield output_file


def write_json(data, file):
    with open_output(file) as output_file:
        json.dump(to_plain(data), output_file, sort_keys=True, indent=2)
        output_file.write("\n")


def dumps_record(record):
    return json.dumps(to_plain(record), sort_keys=True)


def read_json_lines(file):
    with open(file, "r") as input_file:
        return [json.loads(line) for line in input_file if line.strip()]


def write_json_lines(records, file):
    with open_output(file) as output_file:
        for record in records:
            output_file.write(dumps_record(record) + "\n")


def load_records(file):
    """Reports from either a JSON document (object or list) or JSON lines."""
    if file.endswith(".jsonl"):
        return read_json_lines(file)
    data = load_json(file)
    return data if isinstance(data, list) else [data]


def write_csv(rows, header, file):
    with open_output(file, newline="") as output_file:
        writer = csv.writer(output_file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(key, "") for key in header]
            writer.writerow(["%.17g" % v if isinstance(v, float) else v for v in row])


# ── Lattice and grid functions ────────────────────────────────────
def encode_function(f):
    kind = 1 if isinstance(f, GridFunction) else 0
    mesh = f.h if kind else 1.0
    d = f.dim
    return b"".join(
        [
            HEADER.pack(MAGIC, d, kind, mesh),
            np.asarray(f.offset, dtype="<i8").tobytes(),
            np.asarray(f.shape, dtype="<i8").tobytes(),
            np.ascontiguousarray(f.values, dtype="<f8").tobytes(),
        ]
    )


def decode_function(data):
    if len(data) < HEADER.size or data[:4] != MAGIC:
        raise ValueError("not a function file (bad magic)")
    _, d, kind, mesh = HEADER.unpack_from(data)
    start = HEADER.size
    offset = np.frombuffer(data, dtype="<i8", count=d, offset=start)
    shape = np.frombuffer(data, dtype="<i8", count=d, offset=start + 8 * d)
    values = np.frombuffer(data, dtype="<f8", offset=start + 16 * d)
    if values.size != int(np.prod(shape)):
        raise ValueError(
            "function file holds %d values, header says %s" % (values.size, shape)
        )
    values = values.reshape(tuple(shape))
    if kind == 1:
        return GridFunction(tuple(offset), values, h=mesh)
    return LatticeFunction(tuple(offset), values)


def function_rows(f):
    points = f.points().reshape(-1, f.dim)
    return [list(map(int, p)) + [float(v)] for p, v in zip(points, f.values.ravel())]


def read_function_csv(file):
    with open(file, "r", newline="") as input_file:
        rows = list(csv.reader(input_file))
    header, body = rows[0], rows[1:]
    d = len(header) - 1
    if d < 1 or header[-1] != "value":
        raise ValueError("function CSV needs columns n1..nd,value")
    positions = [tuple(int(x) for x in row[:d]) for row in body]
    masses = [float(row[d]) for row in body]
    return LatticeFunction.from_atoms(positions, masses)


def save_function(f, file):
    if file.endswith(".csv"):
        header = ["n%d" % (i + 1) for i in range(f.dim)] + ["value"]
        write_csv(function_rows(f), header, file)
    else:
        with open(file, "wb") as output_file:
            output_file.write(encode_function(f))


def load_function(file):
    if file.endswith(".csv"):
        return read_function_csv(file)
    with open(file, "rb") as input_file:
        return decode_function(input_file.read())
