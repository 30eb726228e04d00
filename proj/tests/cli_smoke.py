# Copyright 2026 The lophoton Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""End-to-end checks of the lophoton CLI: schemas, determinism, exit codes."""

import json
import math
import os
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

CLI = os.environ["LOPHOTON_CLI"]
SCHEMAS = pathlib.Path(sys.argv[1])
failures = []


def run(*args, env=None, expect=0):
    full_env = {k: v for k, v in os.environ.items() if k != "LOPHOTON_SEED"}
    full_env.update(env or {})
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, env=full_env)
    if proc.returncode != expect:
        failures.append(f"{' '.join(map(str, args))}: exit {proc.returncode}, expected {expect}\n{proc.stderr}")
    return proc


def check(cond, message):
    if not cond:
        failures.append(message)


def validated(schema, proc):
    try:
        doc = json.loads(proc.stdout)
    except json.JSONDecodeError as e:
        failures.append(f"{schema}: output is not JSON ({e})")
        return {}
    try:
        jsonschema.validate(doc, json.loads((SCHEMAS / f"{schema}.schema.json").read_text()))
    except jsonschema.ValidationError as e:
        failures.append(f"{schema}: {e.message}")
    return doc


def trpl_csv(path, t1=350.0, delta_uev=6.4):
    delta = delta_uev / 658.2119569
    lines = ["t_ps,counts"]
    for k in range(400):
        t = 8.0 * k
        lines.append(f"{t},{1000.0 * (2.0 * math.sin(0.5 * delta * t) / delta) ** 2 * math.exp(-t / t1) / t1**2}")
    path.write_text("\n".join(lines) + "\n")


with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)

    tt = validated("truth_table", run("truth-table", "--overlap", 1))
    check(abs(tt.get("fidelity", 0) - 1.0) < 1e-12, "truth-table at M=1 is not ideal")
    check(abs(tt.get("success_prob", 0) - 1 / 9) < 1e-12, "success probability at M=1 is not 1/9")
    tt = validated("truth_table", run("truth-table", "--overlap", 0.8, "--basis", "XX",
                                      "--measured-fzz", 0.902, "--measured-fxx", 0.874))
    check(abs(tt.get("hofmann", {}).get("measured", {}).get("lower", 0) - 0.776) < 1e-12, "Hofmann lower bound")

    bell_args = ("bell", "--overlap", 0.9, "--counts-per-setting", 20000, "--resamples", 100)
    first = run(*bell_args, "--threads", 1)
    bell = validated("bell", first)
    check(run(*bell_args, "--threads", 1).stdout == first.stdout, "bell rerun is not byte-identical")
    check(run(*bell_args, env={"LOPHOTON_SEED": "20240517"}).stdout == first.stdout, "LOPHOTON_SEED default mismatch")
    check(run(*bell_args, "--seed", 7).stdout != first.stdout, "seed has no effect")
    check(run(*bell_args, "--seed", 7, env={"LOPHOTON_SEED": "9"}).stdout == run(*bell_args, "--seed", 7).stdout,
          "--seed does not override LOPHOTON_SEED")
    check(abs(bell.get("metrics", {}).get("fidelity", {}).get("value", 0) - 0.8636) < 0.01, "bell fidelity at M=0.9")

    separable = validated("bell", run("bell", "--overlap", 0, "--counts-per-setting", 100000, "--resamples", 200))
    conc = separable.get("metrics", {}).get("concurrence", {})
    check(conc.get("value", 1) <= 3 * conc.get("std", 0), "bell at M=0 is entangled beyond Monte Carlo error")

    out = tmp / "bell.json"
    records = tmp / "records.csv"
    run(*bell_args, "--out", out, "--records-out", records)
    check(out.read_text() == first.stdout, "--out differs from stdout")
    validated("reconstruct", run("reconstruct", "--data", records, "--resamples", 100))
    partial = tmp / "partial.csv"
    partial.write_text("".join(l for l in records.read_text().splitlines(True) if not l.startswith("Z,Z")))
    run("reconstruct", "--data", partial, expect=2)

    curve = run("visibility", "--mode", "vs_T", "--grid", "4,20,40").stdout.splitlines()
    check(curve[0] == "temperature_k,visibility" and len(curve) == 4, "visibility CSV layout")
    check(abs(float(curve[1].split(",")[1]) - 0.9573) < 1e-3, "visibility at 4 K")
    dt = run("visibility", "--mode", "vs_dt", "--grid", "1000", "--long-visibility", 0.71).stdout.splitlines()
    check(abs(float(dt[-1].split(",")[1]) - 0.71) < 1e-9, "solved Gamma_sd does not reproduce V=0.71")

    flat = tmp / "flat.json"
    flat.write_text('{"alpha_ps2": 0}')
    curve = run("visibility", "--params", flat, "--grid", "4,20,40").stdout.splitlines()[1:]
    check(len(curve) == 3 and all(line.endswith(",1") for line in curve), "alpha=0 curve is not flat")

    trpl = tmp / "trpl.csv"
    trpl_csv(trpl)
    fit = validated("fit", run("fit", "--kind", "trpl", "--data", trpl, "--irf-ps", 0))
    check(abs(fit.get("params", {}).get("T1_ps", 0) - 350.0) < 0.5, "TRPL fit T1")
    check(abs(fit.get("params", {}).get("delta_ueV", 0) - 6.4) < 0.05, "TRPL fit splitting")

    hist, meta = tmp / "h.csv", tmp / "h.json"
    validated("synth", run("synth", "--kind", "g2", "--g2", 0.02, "--total-counts", 500000,
                           "--histogram-out", hist, "--meta-out", meta))
    g2 = validated("analyze", run("analyze", "--kind", "g2", "--histogram", hist, "--meta", meta))
    check(abs(g2.get("value", 1) - 0.02) < 5 * g2.get("error", 0), "g2 round trip")
    run("analyze", "--kind", "hom", "--histogram", hist, "--meta", meta, expect=2)
    run("synth", "--kind", "hom", "--visibility", 0.9, "--total-counts", 2000000,
        "--histogram-out", hist, "--meta-out", meta)
    hom = validated("analyze", run("analyze", "--kind", "hom", "--histogram", hist, "--meta", meta))
    check(hom.get("estimator") == "profile", "2 ns HOM should default to the profile estimator")
    check(abs(hom.get("value", 0) - 0.9) < 5 * hom.get("error", 0), "HOM round trip")

    run("truth-table", "--overlap", 1.5, expect=2)
    run("truth-table", "--basis", "QQ", expect=2)
    run("bell", "--seed", "abc", expect=2)
    run("bell", "--resamples", 50, expect=2)
    run("fit", "--kind", "trpl", "--data", tmp / "missing.csv", expect=2)
    bad = tmp / "bad.csv"
    bad.write_text("")
    run("fit", "--kind", "trpl", "--data", bad, expect=2)
    bad.write_text("t_ps,counts\n0,1\n1,nan\n")
    run("fit", "--kind", "trpl", "--data", bad, expect=2)
    bad.write_text("t_ps,counts\n" + "".join(f"{8 * k},{(-1) ** k * 1e300}\n" for k in range(200)))
    run("fit", "--kind", "trpl", "--data", bad, "--irf-ps", 0, expect=4)
    outcomes = {"Z": "HV", "X": "DA", "Y": "RL"}
    bad.write_text("basis1,basis2,outcome1,outcome2,counts\n" + "".join(
        f"{a},{b},{x},{y},0\n" for a in "ZXY" for b in "ZXY" for x in outcomes[a] for y in outcomes[b]))
    run("reconstruct", "--data", bad, expect=2)

if failures:
    print("\n".join(f"FAIL: {f}" for f in failures))
    sys.exit(1)
print("cli smoke: all checks passed")
