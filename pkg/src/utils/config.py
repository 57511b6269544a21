# -*- coding: utf-8 -*-
"""
Run configuration for the batch scripts.

Config files are plain text, one ``key = value`` per line, ``#`` starting
a comment. Keys are long flag names (dashes or underscores); boolean flags
take ``true`` or ``false``. The same format is written next to every
artifact as ``<artifact>.config`` so a run can be replayed with
``--config <artifact>.config``.
"""

import logging
import os
import sys
from dataclasses import dataclass, field

LOG_LEVEL_ENV = "HL_LAB_LOG_LEVEL"
LOG_FORMAT = "%(asctime)s | %(levelname)s | %(message)s"

# Namespace entries that are plumbing rather than configuration.
SKIPPED_KEYS = ("config", "handler")


def setup_logging(name):
    level = os.getenv(LOG_LEVEL_ENV, "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
    )
    return logging.getLogger(name)


def read_config_file(file):
    entries = {}
    with open(file, "r") as input_file:
        for number, line in enumerate(input_file, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(
                    "%s:%d: expected 'key = value', got %r" % (file, number, line)
                )
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ValueError("%s:%d: empty key" % (file, number))
            entries[key.replace("_", "-")] = value
    return entries


def config_tokens(entries):
    """Command-line tokens equivalent to config entries."""
    tokens = []
    for key, value in entries.items():
        if key == "subcommand":
            continue
        flag = "--" + key
        lowered = value.lower()
        if lowered in ("true", "false"):
            if lowered == "true":
                tokens.append(flag)
        else:
            tokens.append("%s=%s" % (flag, value))
    return tokens


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


@dataclass
class RunConfig:
    subcommand: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_namespace(cls, args):
        options = {
            key: value
            for key, value in vars(args).items()
            if key not in SKIPPED_KEYS and key != "subcommand"
        }
        return cls(args.subcommand, options)

    def to_text(self):
        lines = ["# effective configuration", "subcommand = " + self.subcommand]
        for key in sorted(self.options):
            value = self.options[key]
            if value is None:
                continue
            lines.append("%s = %s" % (key.replace("_", "-"), format_value(value)))
        return "\n".join(lines) + "\n"

    def write_sidecar(self, artifact):
        with open(artifact + ".config", "w") as output_file:
            output_file.write(self.to_text())
