"""Chain-network benchmark: the T_c sweep and the LQR comparison table.

Experiments are driven by an INI file (see ``DEFAULT_CONFIG``); every key is
optional and falls back to the defaults below.
"""

from __future__ import annotations

import configparser
import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clsyn import LqrWeights, dare_optimal_cost, synthesize_clmaps
from .evalsim import implementation_cost
from .exceptions import InfeasibleError
from .implsyn import (ImplementationMatrices, closed_loop_difference, lambda_schedule,
                      synthesize_implementation)
from .lti import LtiSystem, norm_l1
from .sparsity import (SparsityMask, chain_topology, delay_mask, delay_penalty_weights,
                       intersect, locality_mask, locality_penalty_weights)
from .stability import build_internal_dynamics, distributed_stability_check
from .textio import load_mask


__all__ = [
    "DEFAULT_CONFIG",
    "ExperimentConfig",
    "build_chain_system",
    "run_fig2_sweep",
    "run_table1",
    "write_csv",
    "plot_fig2",
    "FIG2_COLUMNS",
    "TABLE1_COLUMNS",
]

log = logging.getLogger(__name__)

DEFAULT_CONFIG = """\
[system]
n = 10
actuators = 3, 6, 10
diag_end = 0.6
diag_mid = 0.2
offdiag = 0.4

[weights]
# Q = q I, R = r I
q = 1.0
r = 1.0

[synthesis]
T = 20
# fig2 orders: "a-b" range or comma list
tc_list = 2-25
# table1 orders; "T" means the closed-loop horizon
table1_tc = T, 2
lam = 0.1
lambda_schedule = true
lambda_factor = 10
max_escalations = 8
l1_weight = 0.01
delay_penalty = 0.0
locality_penalty = 0.0
rtol = 1e-9
max_iter = 20000

[mask]
enabled = true
locality = 1
comm_speed = 1
# optional path to a mask in the plain-text format; replaces the generated one
file =

[stability]
transient_bound = 1e4
max_iter = 200
processors = 1
# entries of Delta_c at or below this are exact zeros for the analytic radius
zero_tol = 1e-12

[run]
workers = 1
expect_infeasible = true
out = results
"""


def _ints(text: str) -> list[int]:
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _bool(text: str) -> bool:
    return configparser.ConfigParser.BOOLEAN_STATES[text.strip().lower()]


@dataclass
class ExperimentConfig:
    n: int = 10
    actuators: tuple = (3, 6, 10)
    diag_end: float = 0.6
    diag_mid: float = 0.2
    offdiag: float = 0.4
    q: float = 1.0
    r: float = 1.0
    T: int = 20
    tc_list: tuple = tuple(range(2, 26))
    table1_tc: tuple = ("T", 2)
    lam: float = 0.1
    lambda_schedule: bool = True
    lambda_factor: float = 10.0
    max_escalations: int = 8
    l1_weight: float = 0.01
    delay_penalty: float = 0.0
    locality_penalty: float = 0.0
    rtol: float = 1e-9
    max_iter: int = 20_000
    mask_enabled: bool = True
    locality: int = 1
    comm_speed: float = 1.0
    mask_file: str = ""
    transient_bound: float = 1e4
    check_max_iter: int = 200
    processors: int = 1
    zero_tol: float = 1e-12
    workers: int = 1
    expect_infeasible: bool = True
    out: str = "results"
    base_dir: str = field(default=".", repr=False)

    _KEYS = {
        "system": {"n": ("n", int), "actuators": ("actuators", lambda s: tuple(_ints(s))),
                   "diag_end": ("diag_end", float), "diag_mid": ("diag_mid", float),
                   "offdiag": ("offdiag", float)},
        "weights": {"q": ("q", float), "r": ("r", float)},
        "synthesis": {"t": ("T", int), "tc_list": ("tc_list", lambda s: tuple(_ints(s))),
                      "table1_tc": ("table1_tc", lambda s: tuple(
                          p.strip() if p.strip().upper() == "T" else int(p)
                          for p in s.split(",") if p.strip())),
                      "lam": ("lam", float), "lambda_schedule": ("lambda_schedule", _bool),
                      "lambda_factor": ("lambda_factor", float),
                      "max_escalations": ("max_escalations", int),
                      "l1_weight": ("l1_weight", float),
                      "delay_penalty": ("delay_penalty", float),
                      "locality_penalty": ("locality_penalty", float),
                      "rtol": ("rtol", float), "max_iter": ("max_iter", int)},
        "mask": {"enabled": ("mask_enabled", _bool), "locality": ("locality", int),
                 "comm_speed": ("comm_speed", float), "file": ("mask_file", str)},
        "stability": {"transient_bound": ("transient_bound", float),
                      "max_iter": ("check_max_iter", int), "processors": ("processors", int),
                      "zero_tol": ("zero_tol", float)},
        "run": {"workers": ("workers", int), "expect_infeasible": ("expect_infeasible", _bool),
                "out": ("out", str)},
    }

    @classmethod
    def from_text(cls, text: str, base_dir: str = ".") -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.read_string(text)
        return cls.from_parser(parser, base_dir)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read(), os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser, base_dir=".") -> "ExperimentConfig":
        cfg = cls(base_dir=base_dir)
        cfg.apply({f"{s}.{k}": v for s in parser.sections() for k, v in parser.items(s)})
        return cfg

    def apply(self, overrides: dict) -> "ExperimentConfig":
        """Set ``section.key`` string values in place, then validate."""
        for dotted, value in overrides.items():
            section, _, key = dotted.partition(".")
            try:
                attr, conv = self._KEYS[section.lower()][key.lower()]
            except KeyError:
                raise ValueError(f"unknown config key {dotted!r}") from None
            setattr(self, attr, conv(value))
        self.validate()
        return self

    def validate(self):
        if self.n < 2:
            raise ValueError("chain needs at least 2 nodes")
        if not self.actuators or any(not 1 <= a <= self.n for a in self.actuators):
            raise ValueError("actuator nodes must lie in 1..n")
        if self.T < 1 or any(tc < 1 for tc in self.tc_list):
            raise ValueError("horizons must be positive")
        if any(tc != "T" and (not isinstance(tc, int) or tc < 1) for tc in self.table1_tc):
            raise ValueError("table1_tc entries must be positive integers or T")
        if self.q < 0 or self.r <= 0:
            raise ValueError("need q >= 0 and r > 0")
        if self.lam < 0 or self.l1_weight < 0 or self.lambda_factor <= 1:
            raise ValueError("need lam >= 0, l1_weight >= 0, lambda_factor > 1")
        if self.locality < 0 or self.comm_speed <= 0:
            raise ValueError("need locality >= 0 and comm_speed > 0")
        if self.processors < 1 or self.workers < 1:
            raise ValueError("processors and workers must be positive")
        if self.mask_enabled:
            self.controller_mask(max(self.orders_table1() + list(self.tc_list))).require_identity()

    # -- derived objects -------------------------------------------------------

    def system(self) -> LtiSystem:
        return build_chain_system(self.n, self.actuators, self.diag_end, self.diag_mid,
                                  self.offdiag)

    def weights(self) -> LqrWeights:
        return LqrWeights(self.q * np.eye(self.n), self.r * np.eye(len(self.actuators)))

    def topology(self):
        return chain_topology(self.n, self.actuators)

    def controller_mask(self, horizon: int) -> SparsityMask:
        if self.mask_file:
            path = self.mask_file
            if not os.path.isabs(path):
                path = os.path.join(self.base_dir, path)
            return load_mask(path).extended(horizon)
        topo = self.topology()
        return intersect(locality_mask(topo, self.locality, horizon),
                         delay_mask(topo, self.comm_speed, horizon))

    def penalties(self, horizon: int):
        terms = []
        if self.delay_penalty > 0:
            terms.append((*delay_penalty_weights(self.topology(), horizon), self.delay_penalty))
        if self.locality_penalty > 0:
            terms.append((*locality_penalty_weights(self.topology(), horizon),
                          self.locality_penalty))
        return terms or None

    def orders_table1(self) -> list[int]:
        return [self.T if tc == "T" else tc for tc in self.table1_tc]

    def out_dir(self) -> str:
        path = self.out if os.path.isabs(self.out) else os.path.join(self.base_dir, self.out)
        os.makedirs(path, exist_ok=True)
        return path


def build_chain_system(n: int = 10, actuated_nodes=(3, 6, 10), diag_end: float = 0.6,
                       diag_mid: float = 0.2, offdiag: float = 0.4) -> LtiSystem:
    """Tridiagonal chain; ``B`` has a unit entry at each (one-based) actuated node."""
    if n < 2:
        raise ValueError("n must be at least 2")
    nodes = [int(a) for a in actuated_nodes]
    if not nodes or any(not 1 <= a <= n for a in nodes):
        raise ValueError(f"actuated nodes must lie in 1..{n}")
    A = np.diag(np.full(n, float(diag_mid)))
    A[0, 0] = A[-1, -1] = diag_end
    idx = np.arange(n - 1)
    A[idx, idx + 1] = A[idx + 1, idx] = offdiag
    B = np.zeros((n, len(nodes)))
    B[np.array(nodes) - 1, np.arange(len(nodes))] = 1.0
    return LtiSystem(A, B)


# -- shared evaluation -------------------------------------------------------------

def _evaluate(cfg: ExperimentConfig, sys, cl, impl: ImplementationMatrices, w, J):
    dyn = build_internal_dynamics(sys, impl)
    analytic = build_internal_dynamics(sys, impl, zero_tol=cfg.zero_tol).spectral_radius()
    outcome, _ = distributed_stability_check(dyn, cfg.processors, cfg.transient_bound,
                                             cfg.check_max_iter)
    row = {
        "spectral_radius": dyn.spectral_radius(),
        "spectral_radius_analytic": analytic,
        "l1_norm": norm_l1(impl.stacked()),
        "check_verdict": str(outcome.verdict),
        "check_iterations": outcome.iterations,
    }
    try:
        row["lqr_cost"] = implementation_cost(sys, impl, w, T=cl.T) / J
    except RuntimeError as exc:
        log.warning("cost unavailable: %s", exc)
        row["lqr_cost"] = float("nan")
    return row


def _two_step(cfg: ExperimentConfig, sys, cl, T_c: int, mask):
    kwargs = dict(l1_weight=cfg.l1_weight, penalties=cfg.penalties(T_c), rtol=cfg.rtol,
                  max_iter=cfg.max_iter)
    if cfg.lambda_schedule:
        checker = lambda s, im: distributed_stability_check(
            build_internal_dynamics(s, im), cfg.processors, cfg.transient_bound,
            cfg.check_max_iter)[0].certified
        return lambda_schedule(sys, cl, T_c, mask, cfg.lam, cfg.lambda_factor, checker,
                               cfg.max_escalations, **kwargs)
    impl, _, _ = synthesize_implementation(sys, cl, T_c, mask, lam=cfg.lam, **kwargs)
    return impl, cfg.lam


def _map_ordered(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


FIG2_COLUMNS = ["controller", "Tc", "lambda", "dx_h2", "du_h2", "spectral_radius",
                "spectral_radius_analytic", "l1_norm", "lqr_cost", "check_verdict",
                "check_iterations"]

TABLE1_COLUMNS = ["controller", "status", "Tc", "lambda", "lqr_cost", "spectral_radius",
                  "spectral_radius_analytic", "l1_norm", "check_verdict", "check_iterations"]


def run_fig2_sweep(cfg: ExperimentConfig, csv_path=None) -> list[dict]:
    """Unconstrained two-step controllers over ``cfg.tc_list`` plus the original.

    The first row is the self-implementation ``(R_c, M_c) = (Phi_x, Phi_u)``.
    Closed-loop differences are relative H2 norms.
    """
    sys, w = cfg.system(), cfg.weights()
    cl = synthesize_clmaps(sys, cfg.T, w)
    J = dare_optimal_cost(sys, w)

    base = ImplementationMatrices.from_clmaps(cl)
    rows = [{"controller": "original", "Tc": cfg.T, "lambda": "",
             **dict(zip(("dx_h2", "du_h2"), closed_loop_difference(cl, base, sys))),
             **_evaluate(cfg, sys, cl, base, w, J)}]

    def one(T_c):
        impl, lam = _two_step(cfg, sys, cl, T_c, None)
        dx, du = closed_loop_difference(cl, impl, sys)
        return {"controller": "two-step", "Tc": T_c, "lambda": lam, "dx_h2": dx,
                "du_h2": du, **_evaluate(cfg, sys, cl, impl, w, J)}

    rows += _map_ordered(one, list(cfg.tc_list), cfg.workers)
    if csv_path is not None:
        write_csv(csv_path, rows, FIG2_COLUMNS)
    return rows


def run_table1(cfg: ExperimentConfig, csv_path=None) -> list[dict]:
    """LQR comparison under locality and delay constraints.

    Rows: FIR centralized, constrained closed-loop map (standard synthesis
    with the mask on ``Phi``), the virtually-local baseline (not computed)
    and one two-step controller per order in ``cfg.table1_tc``.
    """
    sys, w = cfg.system(), cfg.weights()
    cl = synthesize_clmaps(sys, cfg.T, w)
    J = dare_optimal_cost(sys, w)
    rows = []

    base = ImplementationMatrices.from_clmaps(cl)
    rows.append({"controller": "FIR centralized", "status": "ok", "Tc": cfg.T, "lambda": "",
                 **_evaluate(cfg, sys, cl, base, w, J)})

    mask_T = cfg.controller_mask(cfg.T)
    try:
        constrained = synthesize_clmaps(sys, cfg.T, w, mask_T)
    except InfeasibleError:
        rows.append({"controller": "Constrained CL map", "status": "Infeasible", "Tc": cfg.T})
    else:
        rows.append({"controller": "Constrained CL map", "status": "ok", "Tc": cfg.T,
                     "lambda": "", **_evaluate(cfg, sys, constrained,
                                               ImplementationMatrices.from_clmaps(constrained),
                                               w, J)})

    rows.append({"controller": "Virtually local", "status": "external baseline - not computed"})

    def one(T_c):
        mask = cfg.controller_mask(T_c) if cfg.mask_enabled else None
        impl, lam = _two_step(cfg, sys, cl, T_c, mask)
        return {"controller": f"Two-step Tc={T_c}", "status": "ok", "Tc": T_c, "lambda": lam,
                **_evaluate(cfg, sys, cl, impl, w, J)}

    rows += _map_ordered(one, cfg.orders_table1(), cfg.workers)
    if csv_path is not None:
        write_csv(csv_path, rows, TABLE1_COLUMNS)
    return rows


def write_csv(path, rows, columns):
    def cell(v):
        if isinstance(v, float):
            return repr(v)
        return v
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: cell(row.get(c, "")) for c in columns})


def plot_fig2(csv_path, out_path):
    """Render the sweep CSV to a static SVG/PDF (format from the extension)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    base = next(r for r in rows if r["controller"] == "original")
    sweep = [r for r in rows if r["controller"] != "original"]
    tc = [int(r["Tc"]) for r in sweep]
    fig, axes = plt.subplots(3, 1, figsize=(5, 7), sharex=True)
    axes[0].plot(tc, [float(r["dx_h2"]) for r in sweep], "o-", label=r"$\Phi_x$")
    axes[0].plot(tc, [float(r["du_h2"]) for r in sweep], "s-", label=r"$\Phi_u$")
    axes[0].set_ylabel("relative H2 difference")
    axes[0].legend()
    for ax, key, label in ((axes[1], "spectral_radius", "spectral radius"),
                           (axes[2], "l1_norm", "L1 norm")):
        ax.plot(tc, [float(r[key]) for r in sweep], "o-", label="new")
        ax.axhline(float(base[key]), color="k", ls="--", label="original")
        ax.set_ylabel(label)
        ax.legend()
    axes[2].set_xlabel("$T_c$")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
