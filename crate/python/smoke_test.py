"""Smoke test for the discrete_dp extension module.

Build and install first, e.g. `pip install --no-build-isolation ./crates/py`,
then run `python python/smoke_test.py`. If the `discrete-dp` binary is found
(DISCRETE_DP_BIN or target/{release,debug}), samples are compared with it.
"""

import os
import pathlib
import subprocess
import sys

import discrete_dp as dd

ROOT = pathlib.Path(__file__).resolve().parent.parent


def find_cli():
    env = os.environ.get("DISCRETE_DP_BIN")
    if env:
        return env
    for profile in ("release", "debug"):
        p = ROOT / "target" / profile / "discrete-dp"
        if p.exists():
            return str(p)
    return None


def check(name, ok, info=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {info}".rstrip())
    return ok


def main():
    results = []
    results.append(check("uniform singleton", dd.sample("uniform", den=1, count=3) == [0, 0, 0]))

    a = dd.sample("laplace", 1, 1, count=50, seed=7)
    s = dd.Sampler("laplace", 1, 1, seed=7)
    results.append(check("sampler handle matches sample()", s.sample_many(50) == a))

    cli = find_cli()
    if cli:
        out = subprocess.run(
            [cli, "sample", "--dist", "laplace", "--num", "1", "--den", "1", "--count", "50", "--seed", "7"],
            check=True, capture_output=True, text=True,
        ).stdout
        results.append(check("matches command line", [int(x) for x in out.split()] == a))
    else:
        print("skip command line comparison: binary not built")

    r = dd.audit({"kind": "pmf", "sampler": {"dist": "gaussian", "num": 1, "den": 1}, "samples": 1000000, "seed": 3})
    results.append(check("gaussian gof", r["verdict"] == "pass", f"p={r['details']['p_value']:.3f}"))

    r = dd.audit({"kind": "pmf", "sampler": {"dist": "laplace", "num": 1, "den": 1}, "samples": 200000})
    results.append(check("laplace gof", r["verdict"] == "pass"))

    r = dd.audit({"kind": "dp", "mechanism": {"name": "noised-count"}, "epsilon": "1/4"})
    results.append(check("under-claimed dp fails", r["verdict"] == "fail" and r["witness"] is not None))

    try:
        dd.audit({"kind": "pmf", "sampler": {"dist": "laplace"}, "bogus": 1})
        results.append(check("malformed config raises", False))
    except dd.DiscreteDpError as e:
        results.append(check("malformed config raises", e.args[1] == "PARSE_ERROR", e.args[1]))

    try:
        dd.sample("laplace", 0, 1)
        results.append(check("zero scale raises", False))
    except dd.DiscreteDpError as e:
        results.append(check("zero scale raises", e.args[1] == "INVALID_PARAM"))

    q = dd.query({"query": "histogram", "system": "pure", "budget": "1", "bins": 3}, [0, 1, 1, 2], seed=1)
    results.append(check("histogram query", len(q["result"]) == 3 and q["claimed_budget"] == "1/1"))

    if not all(results):
        sys.exit(1)
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
