"""Scenario files: TOML with typed, strictly-validated sections.

Sections: [plant], [reference], [mpc], optional [contact], [experiment].
Unknown keys are errors, not warnings, so a typo cannot silently change an
experiment.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..dynamics import InertiaParams
from ..mpc import MpcConfig
from ..quadruped import ContactConfig


class ScenarioError(ValueError):
    """Malformed scenario file."""


_PLANT_KEYS = {"mass", "inertia_diag", "inertia", "gravity", "sim_dt"}
_REFERENCE_KEYS = {"type", "twist", "steps", "rows"}
_MPC_KEYS = {
    "horizon", "dt", "q_diag", "r_diag", "u_max", "u_min",
    "terminal", "discretization",
}
_CONTACT_KEYS = {"feet", "mu", "f_min", "f_max", "world_fixed_feet"}
_EXPERIMENT_KEYS = {
    "trials", "seed", "duration", "theta_max", "p_max", "controller",
    "qp_polish",
}


@dataclass
class Scenario:
    name: str
    plant: InertiaParams
    gravity_on: bool
    sim_dt: float
    reference_spec: dict
    mpc: MpcConfig
    contact: ContactConfig | None
    world_fixed_feet: bool
    trials: int
    seed: int
    duration: float
    theta_max: float
    p_max: float
    controller: str  # proposed | simplified
    qp_polish: bool


def _check_keys(table, allowed, section):
    unknown = set(table) - allowed
    if unknown:
        raise ScenarioError(f"unknown key(s) {sorted(unknown)} in [{section}]")


def _require(table, key, section):
    if key not in table:
        raise ScenarioError(f"missing key {key!r} in [{section}]")
    return table[key]


def parse_scenario(text, name="scenario"):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f"invalid TOML: {e}") from None

    _check_keys(doc, {"plant", "reference", "mpc", "contact", "experiment"}, "top level")
    for section in ("plant", "reference", "mpc", "experiment"):
        if section not in doc:
            raise ScenarioError(f"missing [{section}] section")

    plant = doc["plant"]
    _check_keys(plant, _PLANT_KEYS, "plant")
    if "inertia" in plant:
        I_b = np.asarray(plant["inertia"], dtype=float)
    else:
        I_b = np.diag(np.asarray(_require(plant, "inertia_diag", "plant"), dtype=float))
    J = InertiaParams(I_b=I_b, m=float(_require(plant, "mass", "plant")))
    gravity_on = bool(plant.get("gravity", False))
    sim_dt = float(plant.get("sim_dt", 1e-3))
    if sim_dt <= 0:
        raise ScenarioError("sim_dt must be positive")

    ref = doc["reference"]
    _check_keys(ref, _REFERENCE_KEYS, "reference")

    mpc_tbl = doc["mpc"]
    _check_keys(mpc_tbl, _MPC_KEYS, "mpc")
    q_diag = np.asarray(_require(mpc_tbl, "q_diag", "mpc"), dtype=float)
    r_diag = np.asarray(_require(mpc_tbl, "r_diag", "mpc"), dtype=float)
    u_max = mpc_tbl.get("u_max")
    u_min = mpc_tbl.get("u_min")
    nu = len(r_diag)
    if u_max is not None:
        u_max = np.full(nu, float(u_max)) if np.isscalar(u_max) else np.asarray(u_max, dtype=float)
    if u_min is not None:
        u_min = np.full(nu, float(u_min)) if np.isscalar(u_min) else np.asarray(u_min, dtype=float)
    elif u_max is not None:
        u_min = -u_max
    mpc = MpcConfig(
        horizon=int(_require(mpc_tbl, "horizon", "mpc")),
        dt=float(_require(mpc_tbl, "dt", "mpc")),
        Q=np.diag(q_diag),
        R=np.diag(r_diag),
        u_min=u_min,
        u_max=u_max,
        terminal_mode=mpc_tbl.get("terminal", "full_dare"),
        discretization=mpc_tbl.get("discretization", "euler"),
    )

    contact = None
    world_fixed_feet = True
    if "contact" in doc:
        ct = doc["contact"]
        _check_keys(ct, _CONTACT_KEYS, "contact")
        contact = ContactConfig(
            feet=np.asarray(_require(ct, "feet", "contact"), dtype=float),
            mu=float(_require(ct, "mu", "contact")),
            f_min=float(ct.get("f_min", 1.0)),
            f_max=float(_require(ct, "f_max", "contact")),
        )
        world_fixed_feet = bool(ct.get("world_fixed_feet", True))

    exp = doc["experiment"]
    _check_keys(exp, _EXPERIMENT_KEYS, "experiment")
    trials = int(exp.get("trials", 1))
    duration = float(_require(exp, "duration", "experiment"))
    if trials < 1 or duration <= 0:
        raise ScenarioError("need trials >= 1 and duration > 0")
    controller = exp.get("controller", "proposed")
    if controller not in ("proposed", "simplified"):
        raise ScenarioError("controller must be 'proposed' or 'simplified'")

    return Scenario(
        name=name,
        plant=J,
        gravity_on=gravity_on,
        sim_dt=sim_dt,
        reference_spec=dict(ref),
        mpc=mpc,
        contact=contact,
        world_fixed_feet=world_fixed_feet,
        trials=trials,
        seed=int(exp.get("seed", 0)),
        duration=duration,
        theta_max=float(exp.get("theta_max", 2.8)),
        p_max=float(exp.get("p_max", 0.5)),
        controller=controller,
        qp_polish=bool(exp.get("qp_polish", True)),
    )


def load_scenario(path):
    with open(path, "rb") as f:
        text = f.read().decode("utf-8")
    name = str(path).rsplit("/", 1)[-1].removesuffix(".toml")
    return parse_scenario(text, name=name)


def bundled_scenarios():
    """Names of the scenario files shipped with the package."""
    pkg = resources.files("se3mpc.bench") / "scenarios"
    return sorted(p.name.removesuffix(".toml") for p in pkg.iterdir() if p.name.endswith(".toml"))


def load_bundled(name):
    pkg = resources.files("se3mpc.bench") / "scenarios" / f"{name}.toml"
    return parse_scenario(pkg.read_text(), name=name)
