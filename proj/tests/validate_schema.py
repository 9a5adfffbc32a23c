"""End-to-end CLI check: synth -> segment -> schema validation -> eval, plus exit codes."""

import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema


def run(args, expect):
    proc = subprocess.run(args, capture_output=True, text=True)
    if proc.returncode != expect:
        sys.exit(f"{' '.join(map(str, args))}: exit {proc.returncode}, expected {expect}\n{proc.stdout}{proc.stderr}")
    return proc.stdout


def main():
    cli, schema_path, samples, out = sys.argv[1:5]
    samples, out = pathlib.Path(samples), pathlib.Path(out)
    shutil.rmtree(out, ignore_errors=True)
    schema = json.loads(pathlib.Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    run([cli, "synth", "--spec", samples / "page_spec.json", "--out", out / "synth"], 0)
    manifests = []
    for name, extra in (("default", []), ("configured", ["--config", samples / "config.json"]),
                        ("no_crop", ["--disable", "crop", "--step", "0.5", "--debug-overlays"])):
        run([cli, "segment", out / "synth" / "page.png", "--out", out / name, *extra], 0)
        manifests.append(out / name / "manifest.json")

    for m in manifests:
        doc = json.loads(m.read_text())
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
        if errors:
            sys.exit(f"{m}: {errors[0].message} at {list(errors[0].path)}")
        if doc["counts"]["chars"] != len(doc["records"]):
            sys.exit(f"{m}: counts disagree with records")
    if not (out / "no_crop" / "overlay_lines.png").exists():
        sys.exit("overlays missing")

    report = json.loads(run([cli, "eval", "--manifest", manifests[0], "--truth", out / "synth" / "truth.json"], 0))
    if report["line"]["accuracy"] < 0.95:
        sys.exit(f"unexpected line accuracy {report['line']['accuracy']}")

    bad = out / "bad_config.json"
    bad.write_text('{"binarize_window": 30}')
    run([cli, "segment", out / "synth" / "page.png", "--out", out / "bad", "--config", bad], 2)
    run([cli, "segment", out / "synth" / "page.png", "--out", out / "bad", "--disable", "nothing"], 2)
    run([cli, "segment", out / "missing.png", "--out", out / "bad"], 1)
    run([cli, "segment", out / "synth" / "page.png", "--out", out / "bad", "--config", out / "nope.json"], 1)
    print(f"validated {len(manifests)} manifests")


if __name__ == "__main__":
    main()
