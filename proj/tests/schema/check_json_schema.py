"""Validate CLI --json output and live HTTP responses against the published schema."""

import json
import os
import re
import subprocess
import sys
import tempfile
import urllib.error
import urllib.request

import jsonschema
import numpy as np

CLI = sys.argv[1]
failures = []


def validator_for(schema, name):
    root = {"$schema": schema["$schema"], "$defs": schema["$defs"], "$ref": f"#/$defs/{name}"}
    return jsonschema.Draft202012Validator(root)


def check(schema, label, envelope, name):
    problems = [e.message for e in validator_for(schema, "envelope").iter_errors(envelope)]
    if envelope.get("ok") and name is not None:
        problems += [e.message for e in validator_for(schema, name).iter_errors(envelope["result"])]
    if problems:
        failures.append(f"{label}: {problems[:3]}")
    print(("FAIL " if problems else "ok   ") + label)


def cli(workdir, *args):
    env = dict(os.environ, METROLOGY_WORKDIR=workdir)
    proc = subprocess.run([CLI, "--json", *args], capture_output=True, text=True, env=env, timeout=300)
    return json.loads(proc.stdout)


def write_data(path, junk):
    rng = np.random.default_rng(4)
    constructs = ["Cohesion", "Size", "Coupling"]
    f = rng.standard_normal((400, 3))
    cols, names = [], []
    for c, construct in enumerate(constructs):
        for m in range(1, 5):
            cols.append(0.8 * f[:, c] + 0.6 * rng.standard_normal(400))
            names.append(f"{construct}.M{m}")
    for j in range(junk):
        cols.append(rng.standard_normal(400))
        names.append(f"{constructs[j]}.Junk")
    x = np.column_stack(cols)
    with open(path, "w") as out:
        out.write("id," + ",".join(names) + "\n")
        for i, row in enumerate(x):
            out.write(f"e{i}," + ",".join(repr(float(v)) for v in row) + "\n")


def main():
    schema = json.loads(subprocess.run([CLI, "schema"], capture_output=True, text=True, check=True).stdout)
    jsonschema.Draft202012Validator.check_schema(schema)

    with tempfile.TemporaryDirectory() as work:
        write_data(os.path.join(work, "d.csv"), 2)
        with open(os.path.join(work, "ratings.csv"), "w") as out:
            out.write("unit,r1,r2,r3\nu1,1,1,\nu2,2,2,2\nu3,3,3,1\nu4,1,2,1\n")

        check(schema, "cli reliability", cli(work, "reliability", "d.csv", "--items", "Size.M1,Size.M2,Size.M3"), "reliability_report")
        check(schema, "cli reliability --ratings", cli(work, "reliability", "--ratings", "ratings.csv"), "reliability_report")
        check(schema, "cli adequacy", cli(work, "adequacy", "d.csv"), "adequacy_report")
        check(schema, "cli efa", cli(work, "efa", "d.csv", "--k", "3"), "efa_result")
        check(schema, "cli efa (advice)", cli(work, "efa", "d.csv", "--reps", "50"), "efa_result")
        check(schema, "cli refine", cli(work, "refine", "d.csv", "--k", "3", "--auto", "--save", "s.json", "--export", "spec.json"),
              "refine_result")
        with open(os.path.join(work, "s.json")) as f:
            check(schema, "session document", {"ok": True, "result": json.load(f), "error": None}, "session_document")
        with open(os.path.join(work, "spec.json")) as f:
            check(schema, "exported spec", {"ok": True, "result": json.load(f), "error": None}, "confirmatory_spec")
        check(schema, "cli cfa", cli(work, "cfa", "d.csv", "--spec", "spec.json"), "cfa_result")
        check(schema, "cli simulate", cli(work, "simulate", "--t", "120", "--es", "-10", "--sd", "5", "--n", "1000",
                                          "--seed", "7", "--effect", "1"), "simulation")
        check(schema, "cli audit", cli(work, "audit", "d.csv"), "scale_audit")
        check(schema, "cli error", cli(work, "efa", "missing.csv", "--k", "2"), "envelope")

        server = subprocess.Popen([CLI, "serve", "--port", "0"], stderr=subprocess.PIPE, text=True,
                                  env=dict(os.environ, METROLOGY_WORKDIR=work))
        try:
            port = int(re.search(r":(\d+)", server.stderr.readline()).group(1))
            base = f"http://127.0.0.1:{port}"

            def call(method, path, body=None, raw=None):
                data = raw if raw is not None else (json.dumps(body).encode() if body is not None else None)
                req = urllib.request.Request(base + path, data=data, method=method)
                try:
                    with urllib.request.urlopen(req, timeout=120) as resp:
                        return resp.status, json.loads(resp.read())
                except urllib.error.HTTPError as e:
                    return e.code, json.loads(e.read())

            with open(os.path.join(work, "d.csv"), "rb") as f:
                status, up = call("POST", "/datasets", raw=f.read())
            check(schema, "http POST /datasets", up, "dataset_summary")
            ds = up["result"]["id"]
            check(schema, "http GET correlations", call("GET", f"/datasets/{ds}/correlations")[1], "correlations")
            check(schema, "http POST /reliability", call("POST", "/reliability", {"dataset": ds})[1], "reliability_report")
            check(schema, "http POST /adequacy", call("POST", "/adequacy", {"dataset": ds})[1], "adequacy_report")
            check(schema, "http POST /advice", call("POST", "/advice", {"dataset": ds})[1], "factor_count_advice")
            check(schema, "http POST /efa", call("POST", "/efa", {"dataset": ds, "k": 3})[1], "efa_result")
            status, created = call("POST", "/sessions", {"dataset": ds, "k": 3})
            check(schema, "http POST /sessions", created, "session_state")
            sid = created["result"]["id"]
            check(schema, "http GET session", call("GET", f"/sessions/{sid}")[1], "session_state")
            check(schema, "http drop", call("POST", f"/sessions/{sid}/actions", {"type": "drop", "metric": "Size.Junk"})[1],
                  "session_state")
            check(schema, "http undo", call("POST", f"/sessions/{sid}/actions", {"type": "undo"})[1], "session_state")
            check(schema, "http auto_refine", call("POST", f"/sessions/{sid}/actions", {"type": "auto_refine"})[1], "session_state")
            check(schema, "http GET document", call("GET", f"/sessions/{sid}/document")[1], "session_document")
            status, exported = call("POST", f"/sessions/{sid}/export", {})
            check(schema, "http export", exported, "confirmatory_spec")
            check(schema, "http cfa", call("POST", "/cfa/fit", {"dataset": ds, "spec": exported["result"], "scores": True})[1],
                  "cfa_result")
            check(schema, "http simulate", call("POST", "/simulate", {"model": {"true_score": 9.6, "random_sd": 0.05, "seed": 3},
                                                                     "n": 2000, "effect": 0.4})[1], "simulation")
            status, missing = call("GET", "/sessions/nope")
            check(schema, "http 404", missing, "envelope")
            if status != 404:
                failures.append(f"unknown session returned {status}")
            status, invalid = call("POST", "/sessions", {"dataset": ds})
            check(schema, "http 422", invalid, "envelope")
            if status != 422:
                failures.append(f"invalid session request returned {status}")
            published = call("GET", "/schema")[1]
            check(schema, "http schema", published, None)
            if published.get("result") != schema:
                failures.append("GET /schema differs from `metrology schema`")
        finally:
            server.terminate()
            server.wait(timeout=10)

    if failures:
        print("\n".join(failures))
        sys.exit(1)


if __name__ == "__main__":
    main()
