"""Kernel backend selection: the compiled extension must be importable in
this build, and the pure-Python fallback must produce the same solves to
rounding when forced via the environment."""

import json
import os
import subprocess
import sys
import textwrap

import numpy as np

import binum
from binum.lower import LowerConfig, solve_lower

from conftest import make_fs, single_link_net


def test_compiled_backend_active():
    # this repo builds the extension; the default import must pick it up
    assert binum.BACKEND == "cython"


def test_force_py_env_selects_fallback():
    out = subprocess.run(
        [sys.executable, "-c", "import binum; print(binum.BACKEND)"],
        env={**os.environ, "BINUM_FORCE_PY": "1"},
        capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backends_agree_on_solve():
    # run the same barrier instance through both kernels; the fallback
    # differs only in summation order, so 1e-8 relative is generous
    script = textwrap.dedent("""
        import json, sys
        import numpy as np
        sys.path.insert(0, %r)
        from conftest import make_fs, single_link_net
        from binum.lower import LowerConfig, solve_lower
        net = single_link_net(n=3, cap=100.0)
        fs = make_fs(net)
        alpha = np.array([2.0, 1.4, 3.1])
        x, cert = solve_lower(net, fs, alpha,
                              LowerConfig(1.0, 200000, 1e-8))
        from binum.lower import phi_value
        print(json.dumps({"x": list(x), "phi": phi_value(net, fs, x, alpha),
                          "converged": cert.converged}))
    """) % os.path.dirname(os.path.abspath(__file__))

    def run(force_py):
        env = {**os.environ}
        env.pop("BINUM_FORCE_PY", None)
        if force_py:
            env["BINUM_FORCE_PY"] = "1"
        out = subprocess.run([sys.executable, "-c", script], env=env,
                             capture_output=True, text=True, check=True)
        return json.loads(out.stdout)

    a, b = run(False), run(True)
    assert a["converged"] and b["converged"]
    assert np.allclose(a["x"], b["x"], rtol=1e-8, atol=1e-10)
    assert np.isclose(a["phi"], b["phi"], rtol=1e-10)


def test_iteration_budget_respected():
    net = single_link_net(n=3)
    fs = make_fs(net)
    for cap in (1, 5, 37):
        _, cert = solve_lower(net, fs, np.full(3, 2.0),
                              LowerConfig(1.0, cap, 1e-14))
        assert cert.iterations <= cap
