#!/usr/bin/env python3
"""Validate client request bodies and mock replies against the wire schemas.

usage: validate.py <fixtures-exe> <schemas-dir> <work-dir>
"""
import copy
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema


def load_schemas(schema_dir):
    schemas = {}
    for path in sorted(schema_dir.glob("*.schema.json")):
        doc = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(doc)
        schemas[path.name[: -len(".schema.json")]] = jsonschema.Draft202012Validator(doc)
    return schemas


def mutations(doc):
    """Bodies that a strict schema must reject."""
    out = []
    extra = copy.deepcopy(doc)
    extra["unexpected_field"] = 1
    out.append(("extra field", extra))
    for key in doc:
        missing = copy.deepcopy(doc)
        del missing[key]
        out.append((f"missing {key}", missing))
    return out


def main():
    fixtures_exe, schema_dir, work = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    shutil.rmtree(work, ignore_errors=True)
    subprocess.run([fixtures_exe, str(work)], check=True)
    schemas = load_schemas(schema_dir)

    failures = 0
    counts = {}
    for path in sorted(work.glob("*.json")):
        kind = path.name.rsplit(".", 2)[0]
        validator = schemas.get(kind)
        if validator is None:
            print(f"FAIL {path.name}: no schema named {kind}")
            failures += 1
            continue
        doc = json.loads(path.read_text())
        errors = list(validator.iter_errors(doc))
        if errors:
            failures += 1
            print(f"FAIL {path.name}: {errors[0].message}")
        counts[kind] = counts.get(kind, 0) + 1
        if kind != "error":
            for label, bad in mutations(doc):
                if validator.is_valid(bad):
                    failures += 1
                    print(f"FAIL {kind} schema accepts body with {label}")

    for kind in schemas:
        if counts.get(kind, 0) == 0:
            failures += 1
            print(f"FAIL no fixtures exercised schema {kind}")
    summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    print(f"validated {sum(counts.values())} bodies ({summary})")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
