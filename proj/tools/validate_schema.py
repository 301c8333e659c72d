"""Validates the bundled problem and expected-value files against the schemas."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else pathlib.Path(__file__).resolve().parents[1]
schemas = {n: json.loads((root / "schema" / f"{n}.schema.json").read_text()) for n in ("problem", "expected")}
failed = 0
for d in sorted((root / "data" / "repro").iterdir()):
    for n, s in schemas.items():
        doc = json.loads((d / f"{n}.json").read_text())
        errors = list(jsonschema.Draft202012Validator(s).iter_errors(doc))
        for e in errors:
            print(f"{d.name}/{n}.json: {e.json_path}: {e.message}")
        failed += bool(errors)
print("schema check:", "ok" if not failed else f"{failed} file(s) invalid")
sys.exit(1 if failed else 0)
