"""Run configuration: every knob of a bilevel run in one validated record,
plus the shipped experiment presets (single-bottleneck 3- and 5-user setups
and the two Abilene parameterizations).

Config files are JSON objects whose keys match RunConfig field names;
presets are RunConfig instances paired with a packaged topology file.
"""

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources

from .bilevel import UpperConfig
from .feedback import FeedbackMode
from .lower import LowerConfig


@dataclass(frozen=True)
class RunConfig:
    """All parameters of one run.

    tau, when set, overrides (or supplies) the width of every log barrier
    in the topology.  out is the CSV destination; None means stdout.
    """
    epsilon: float = 1e-4
    tau: float = None
    stepsize: float = 1.0
    max_iters: int = 200000
    delta_phi: float = 1e-2
    eta: float = 1.0
    beta: float = 1e-3
    rounds: int = 1000
    oracle_cap: int = 64
    feedback: str = "gradient"
    delta_s: float = 1e-3
    samples_per_query: int = 1
    seed: int = 0
    out: str = None

    def __post_init__(self):
        # constructing the sub-configs runs their validation; rounds=0 is
        # legal here (emit header and summary without entering the loop)
        # even though the loop config itself demands at least one round
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        self.lower_config()
        if self.rounds > 0:
            self.upper_config()
        self.feedback_mode()
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        if self.tau is not None and not (self.tau > 0):
            raise ValueError("tau must be positive")

    def lower_config(self):
        return LowerConfig(stepsize=self.stepsize, max_iters=self.max_iters,
                           delta_phi=self.delta_phi)

    def upper_config(self):
        return UpperConfig(eta=self.eta, beta=self.beta, rounds=self.rounds,
                           oracle_cap=self.oracle_cap)

    def feedback_mode(self):
        return FeedbackMode(mode=self.feedback, delta_s=self.delta_s,
                            samples_per_query=self.samples_per_query,
                            seed=self.seed)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}

# preset name -> (packaged topology file, config)
PRESETS = {
    "paper-3user": ("single3.topo", RunConfig(
        epsilon=1e-4, tau=1e-3, stepsize=1.0, max_iters=200000,
        delta_phi=1e-2, eta=20.0, beta=7e-4, rounds=5000)),
    "paper-5user": ("single5.topo", RunConfig(
        epsilon=1e-4, tau=1e-3, stepsize=1.0, max_iters=200000,
        delta_phi=1e-2, eta=9.0, beta=3.5e-4, rounds=16000)),
    "abilene-1": ("abilene1.topo", RunConfig(
        epsilon=1e-4, stepsize=1.0, max_iters=200000,
        delta_phi=1e-2, eta=1.0, beta=2e-2, rounds=10000)),
    "abilene-2": ("abilene2.topo", RunConfig(
        epsilon=1e-4, stepsize=1.0, max_iters=200000,
        delta_phi=1e-2, eta=1.0, beta=1e-3, rounds=6000)),
}


def preset(name):
    """Return (topology text, RunConfig) for a shipped preset."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; have "
                         + ", ".join(sorted(PRESETS)))
    fname, cfg = PRESETS[name]
    text = resources.files("binum").joinpath("data", fname).read_text()
    return text, cfg


def load_config_file(path, base=None):
    """Overlay a JSON config file on a base RunConfig (default preset-less
    defaults).  Unknown keys are errors."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    unknown = set(data) - _FIELDS
    if unknown:
        raise ValueError("unknown config keys: " + ", ".join(sorted(unknown)))
    if base is None:
        base = RunConfig()
    return base.replace(**data)
