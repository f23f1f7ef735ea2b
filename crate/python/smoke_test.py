"""Smoke test for the Python bindings.

Builds nothing itself: it expects `cargo build -p metrocrew-py` (debug or
release) to have produced the shared library, loads it as `metrocrew_py`,
and drives a full generate -> plan -> replan -> validate round trip.
"""

import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent

SPEC = {
    "days": 1,
    "horizon": [0, 240],
    "params": {
        "H": 240, "h": 240, "t_min": 150, "t_max": 240, "t_rt": 10,
        "t_ml": 30, "t_mb": 40, "t_me": 200, "t_si": 10, "t_so": 10,
        "t_tf": 5, "n_df": 0, "n_tf": 10,
        "lambda_o": 50.0, "c_w": 1.0, "c_r": 0.2, "lambda_factor": 4.0,
    },
    "lines": [
        {"id": "L1", "depots": ["A", "B"], "run": 40, "headway": 60, "window": [20, 140]},
        {"id": "L2", "depots": ["C", "D"], "run": 35, "headway": 60, "window": [30, 150]},
    ],
    "transfers": [{"a": "L1", "b": "L2", "frac_a": 0.5, "frac_b": 0.5}],
    "crew": {"n_r": 6, "seed": 9},
}

SCENARIO = {
    "day": 0, "t_bar": 100, "line": "L2", "window": [110, 170],
    "headway": 10, "penalty_mult": 3.0, "theta": 1,
}


def load_module():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libmetrocrew_py.so"
        if lib.exists():
            staging = pathlib.Path(tempfile.mkdtemp())
            shutil.copy(lib, staging / "metrocrew_py.so")
            sys.path.insert(0, str(staging))
            import metrocrew_py
            return metrocrew_py
    raise SystemExit("build the bindings first: cargo build -p metrocrew-py")


def main():
    mc = load_module()

    instance = mc.generate(json.dumps(SPEC), seed=3, perturb=True)
    assert instance == mc.generate(json.dumps(SPEC), seed=3, perturb=True), \
        "generation must be deterministic"
    tasks = json.loads(instance)["tasks"]
    assert tasks, "generator must materialize tasks"

    run = json.loads(mc.plan(instance, algo="sph"))
    assert run["algorithm"] == "sph"
    assert isinstance(run["metrics"]["obj"], float)
    roster = json.dumps(run["roster"])

    report = json.loads(mc.validate(instance, roster))
    assert report["violations"] == [], report

    for algo in ("fpah", "fpah-n", "lgh-r"):
        rerun = json.loads(
            mc.replan_roster(instance, roster, json.dumps(SCENARIO), algo=algo)
        )
        assert 0.0 <= rerun["metrics"]["urgent_coverage"] <= 1.0
        rreport = json.loads(
            mc.validate(
                instance,
                json.dumps(rerun["roster"]),
                scenario_json=json.dumps(SCENARIO),
                original_json=roster,
            )
        )
        assert rreport["violations"] == [], (algo, rreport)

    try:
        mc.plan(instance, algo="bogus")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown algorithm must raise ValueError")

    print("python bindings smoke test: PASS")


if __name__ == "__main__":
    main()
