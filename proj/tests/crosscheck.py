#!/usr/bin/env python3
"""Runs the CLI on the fixture registry and re-derives its outputs with hashlib
and jsonschema. Usage: crosscheck.py <cli> <source-dir>. Exit 77 skips."""
import hashlib
import json
import pathlib
import subprocess
import sys
import tempfile

try:
    import jsonschema
except ImportError:
    print("jsonschema not installed; skipping")
    sys.exit(77)

CLI = pathlib.Path(sys.argv[1]).resolve()
SRC = pathlib.Path(sys.argv[2]).resolve()
failures = []


def check(cond, what):
    if not cond:
        failures.append(what)


def read_jsonl(path):
    lines = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    return lines[0]["_meta"], lines[1:]


def sha256_file(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def record_id(r):
    box = ",".join(map(str, r["bbox"])) if r["bbox"] else ""
    fields = [r["source_dataset"], r["image_ref"], r["label"], box]
    return hashlib.sha256("\x1f".join(fields).encode()).hexdigest()[:32]


def half_up(n, ratio):
    # Integer arithmetic on the ratio in parts per million.
    return (n * round(ratio * 1_000_000) + 500_000) // 1_000_000


with tempfile.TemporaryDirectory(prefix="medcorpus-xcheck-") as tmp:
    tmp = pathlib.Path(tmp)
    config = json.loads((SRC / "configs" / "toy.json").read_text())
    config.update(
        registry_dir=str(SRC / "tests" / "fixtures" / "registry"),
        templates_dir=str(SRC / "data" / "templates"),
        format_recipe=str(SRC / "data" / "recipes" / "default.json"),
        mix_table=str(SRC / "data" / "mix" / "toy_table.json"),
        output_dir=str(tmp / "out"),
    )
    config_path = tmp / "run.json"
    config_path.write_text(json.dumps(config, indent=2))
    for cmd in (["ingest"], ["generate"], ["compose", "--no-review"], ["plan"]):
        proc = subprocess.run([str(CLI), "--config", str(config_path), *cmd], capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"FAIL {' '.join(cmd)} exited {proc.returncode}\n{proc.stdout}{proc.stderr}")
            sys.exit(1)
    out = tmp / "out"

    unhashed = {k: v for k, v in config.items() if k != "output_dir"}
    config_hash = hashlib.sha256(
        json.dumps(unhashed, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()
    ).hexdigest()

    # Canonical records: schema, ids, golden set.
    record_schema = json.loads((SRC / "docs" / "canonical_record.schema.json").read_text())
    meta, records = read_jsonl(out / "canonical" / "records.jsonl")
    check(meta["config_hash"] == config_hash, "records meta config_hash")
    check(meta["seed"] == config["seed"], "records meta seed")
    for r in records:
        errors = list(jsonschema.Draft7Validator(record_schema).iter_errors(r))
        check(not errors, f"record {r.get('record_id')} schema: {errors[:1]}")
        check(r["record_id"] == record_id(r), f"record_id {r['record_id']}")
    golden = json.loads((SRC / "tests" / "golden" / "record_ids.json").read_text())
    check(sorted(r["record_id"] for r in records) == sorted(g["record_id"] for g in golden["records"]),
          "record ids differ from the golden list")

    # Corpus pools and the toy mix table.
    _, corpus = read_jsonl(out / "instruct" / "corpus.jsonl")
    pools = {}
    for s in corpus:
        pools[s["source_dataset"]] = pools.get(s["source_dataset"], 0) + 1
    table = json.loads((SRC / "data" / "mix" / "toy_table.json").read_text())

    # Train plan: schema, manifest checksums, analytic counts.
    plan_schema = json.loads((SRC / "docs" / "train_plan.schema.json").read_text())
    plan = json.loads((out / "plan" / "train_plan.json").read_text())
    errors = list(jsonschema.Draft7Validator(plan_schema).iter_errors(plan))
    check(not errors, f"plan schema: {errors[:1]}")
    check(plan["_meta"]["config_hash"] == config_hash, "plan meta config_hash")
    for stage in plan["stages"]:
        data = stage["data"]
        name = stage["stage"]
        check(sha256_file(out / data["manifest"]) == data["manifest_sha256"], f"stage {name} manifest sha256")
        check(sha256_file(out / data["packed"]) == data["packed_sha256"], f"stage {name} packed sha256")
        _, picks = read_jsonl(out / data["manifest"])
        check(len(picks) == data["samples"], f"stage {name} sample count")
        column = "ratio_stage_3" if name == "III" else "ratio_stage_1_2"
        want = {row["dataset_name"]: half_up(pools.get(row["dataset_name"], 0), row[column]) for row in table["rows"]}
        got = {}
        for p in picks:
            got[p["dataset_name"]] = got.get(p["dataset_name"], 0) + 1
        check(got == {k: v for k, v in want.items() if v}, f"stage {name} per-dataset counts {got} != {want}")
        _, seqs = read_jsonl(out / data["packed"])
        members = [m for s in seqs for m in s["member_sample_ids"]]
        check(members == [p["sample_id"] for p in picks], f"stage {name} packing does not conserve the manifest")
        check(len(seqs) == data["sequences"], f"stage {name} sequence count")

if failures:
    for f in failures:
        print("FAIL", f)
    sys.exit(1)
print(f"crosscheck ok: {len(records)} records, {len(corpus)} samples, {len(plan['stages'])} stages")
