#!/usr/bin/env python3
"""Validate experiment configs against schema/experiment.schema.json."""

import json
import sys
from pathlib import Path

import jsonschema


def main(argv):
    root = Path(__file__).resolve().parent.parent
    schema = json.loads((root / "schema" / "experiment.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    paths = [Path(p) for p in argv] or sorted((root / "configs").glob("*.json"))
    bad = 0
    for path in paths:
        errors = sorted(validator.iter_errors(json.loads(path.read_text())), key=lambda e: list(e.path))
        for e in errors:
            print(f"{path.name}: /{'/'.join(map(str, e.path))}: {e.message}")
        bad += bool(errors)
    print(f"{len(paths) - bad}/{len(paths)} configs valid")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
