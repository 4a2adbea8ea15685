"""Command-line experiment runner.

Every subcommand writes ``<out>/<command>.json`` (deterministic for a fixed
configuration and seed), ``<out>/<command>.meta.json`` (timestamps, timing,
library versions) and, where a table makes sense, ``<out>/<command>.csv``.

Exit status is 0 when no hard check fails, 1 when at least one does and 2
for invalid parameters.
"""
from __future__ import annotations

import argparse
import os
import platform
import sys
import time
from datetime import datetime, timezone

from . import __version__

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")
# options that never influence the result payload
PLUMBING = {"out", "config", "threads", "func", "command", "quiet"}


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------

def _list_of(kind):
    def parse(text):
        try:
            return [kind(x) for x in str(text).replace(" ", "").split(",") if x]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"cannot parse list {text!r}: {exc}") from None
    parse.__name__ = f"{kind.__name__}_list"
    return parse


int_list = _list_of(int)
float_list = _list_of(float)


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return value
    parse.__name__ = f"positive_{kind.__name__}"
    return parse


pos_int = _positive(int)
pos_float = _positive(float)


def check(name: str, value: float, bound: float, sense: str = "le", hard: bool = True) -> dict:
    """A numeric claim with the bound it is judged against and the margin."""
    margin = bound - value if sense == "le" else value - bound
    return {"name": name, "value": value, "bound": bound, "sense": sense,
            "margin": margin, "hard": hard, "ok": bool(margin >= 0)}


def failed(checks: list[dict]) -> list[dict]:
    return [c for c in checks if c["hard"] and not c["ok"]]


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------

def _lattice(args):
    from .lattice import LatticeSpec
    return LatticeSpec(args.nu, args.L, not args.open)


def _region(text: str, spec):
    from .lattice import Region
    if text == "half":
        ranges = [f"0..{spec.L // 2 - 1}"] + [f"0..{spec.L - 1}"] * (spec.nu - 1)
        return Region.slab(" x ".join(ranges), spec)
    return Region.slab(text, spec)


def _pauli(name: str):
    from . import hamiltonian as ham
    table = {"x": ham.X, "y": ham.Y, "z": ham.Z}
    if name.lower() not in table:
        from .errors import UsageError
        raise UsageError(f"unknown single-site observable {name!r}; choose x, y or z")
    return table[name.lower()]


def _two_site_hamiltonian(name: str, dA: int, dB: int, rng):
    import numpy as np
    from . import hamiltonian as ham
    from . import operators as ops
    from .errors import UsageError
    from .rates import swap_operator
    if name == "random":
        return ops.random_hermitian(dA * dB, rng, norm=1.0)
    if name == "swap":
        if dA != dB:
            raise UsageError("swap needs equal local dimensions")
        return swap_operator(dA).astype(complex)
    if (dA, dB) != (2, 2):
        raise UsageError(f"{name} is a qubit Hamiltonian; use --dA 2 --dB 2")
    table = {"zz": np.kron(ham.Z, ham.Z), "xx": np.kron(ham.X, ham.X),
             "heisenberg": np.kron(ham.X, ham.X) + np.kron(ham.Y, ham.Y) + np.kron(ham.Z, ham.Z)}
    if name not in table:
        raise UsageError(f"unknown Hamiltonian {name!r}")
    return table[name]


def _tfim_path(args):
    from .errors import UsageError
    from .qac import tfim_path
    if args.model != "tfim":
        raise UsageError(f"only the tfim path is available, got {args.model!r}")
    return tfim_path(args.L, args.g0, args.g1, args.J, args.nu, not args.open)


# ---------------------------------------------------------------------------
# subcommands; each returns (result, checks, tables, extra_files)
# ---------------------------------------------------------------------------

def cmd_sim_scan(args):
    from .commutator import HARD_CONSTANT, SOFT_CONSTANT, ratio_scan
    scan = ratio_scan(args.dims, args.p, args.samples, args.seed, tuple(args.profiles))
    checks = [check("max ratio / hard constant", scan["global_max"], HARD_CONSTANT),
              check("max ratio / finite-dimensional constant", scan["global_max"], SOFT_CONSTANT,
                    hard=args.strict)]
    for cell in scan["cells"]:
        cell["margin_hard"] = HARD_CONSTANT - cell["max_ratio"]
        cell["margin_soft"] = SOFT_CONSTANT - cell["max_ratio"]
    result = {"cells": scan["cells"], "global_max": scan["global_max"],
              "samples_total": args.samples * len(scan["cells"]),
              "hard_violations": scan["violations"], "soft_flags": scan["soft_flags"]}
    files = {f"witnesses/{name}": rec for name, rec in scan["witnesses"].items()}
    return result, checks, {"cells": scan["cells"]}, files


def cmd_sim_decompose(args):
    import numpy as np
    from .commutator import cell_rng, partition_decompose, sample_dominated_pair
    rows, checks = [], []
    worst = {"residual": 0.0, "Wpp": 0.0, "V": 0.0, "Vprime": 0.0, "W": 0.0}
    bad = []
    for i in range(args.instances):
        dim = args.dims[i % len(args.dims)]
        p = args.p[(i // len(args.dims)) % len(args.p)]
        rng = cell_rng(args.seed, dim, p, i)
        dec = partition_decompose(sample_dominated_pair(dim, p, profile=args.profile, rng=rng))
        b = dec.bounds()
        row = {"instance": i, "dim": dim, "p": p, "W": dec.W, "V": dec.V, "Vprime": dec.Vprime,
               "Wpp": dec.Wpp, "residual": dec.residual, "bound_W": b["W"]}
        rows.append(row)
        worst["residual"] = max(worst["residual"], dec.residual)
        for key in ("Wpp", "V", "Vprime", "W"):
            worst[key] = max(worst[key], abs(getattr(dec, key)) / b[key])
        v = dec.violations()
        if v:
            bad.append({"instance": i, "dim": dim, "p": p, "parts": v})
    checks.append(check("identity residual", worst["residual"], 1e-8))
    for key in ("Wpp", "V", "Vprime", "W"):
        checks.append(check(f"max |{key}| / bound", worst[key], 1.0))
    checks.append(check("instances with violations", float(len(bad)), 0.0))
    result = {"instances": args.instances, "worst": worst, "violations": bad,
              "max_trace_norm": float(np.max([r["W"] for r in rows], initial=0.0))}
    return result, checks, {"instances": rows}, {}


def cmd_sie_max(args):
    import math
    import numpy as np
    from .rates import maximize_entangling_rate
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1]))
    H = _two_site_hamiltonian(args.hamiltonian, args.dA, args.dB, rng)
    rep = maximize_entangling_rate(H, (args.dA, args.dB), tuple(args.ancilla), args.restarts,
                                   args.seed, args.max_iter, args.tol)
    checks = [check("rate / (4 ||H|| log d)", rep.value, rep.bound)]
    if args.target is not None:
        checks.append(check("rate in bits vs target", rep.value / math.log(2), args.target, sense="ge"))
    result = rep.to_json()
    result["value_bits"] = rep.value / math.log(2)
    result["hamiltonian"] = args.hamiltonian
    rows = [{"restart": i, "value": v, "bound": rep.bound} for i, v in enumerate(rep.restarts)]
    return result, checks, {"restarts": rows}, {}


def cmd_rates_check(args):
    import math
    import numpy as np
    from . import operators as ops
    from . import rates
    root = np.random.SeedSequence(args.seed)
    s_mix, s_ent, s_red, s_tot = (np.random.default_rng(s) for s in root.spawn(4))

    def rel(a, b):
        return abs(a - b) / max(abs(a), abs(b), 1e-300)

    mix_err, ent_err, red_err = 0.0, 0.0, 0.0
    rows = []
    for i in range(args.instances):
        dim = args.mix_dims[i % len(args.mix_dims)]
        ens = rates.random_ensemble(dim, s_mix)
        H = ops.random_hermitian(dim, s_mix, norm=1.0)
        a, b = rates.mixing_rate(ens, H), rates.mixing_rate_fd(ens, H, args.dt)
        mix_err = max(mix_err, rel(a, b))
        rows.append({"kind": "mixing", "instance": i, "formula": a, "finite_difference": b,
                     "relative_error": rel(a, b), "bound": rates.max_mixing_rate(ens)})
        setting = rates.random_setting(args.ent_dims, s_ent)
        a, b = rates.entangling_rate(setting), rates.rate_finite_difference(setting, args.dt)
        ent_err = max(ent_err, rel(a, b))
        rows.append({"kind": "entangling", "instance": i, "formula": a, "finite_difference": b,
                     "relative_error": rel(a, b), "bound": 4 * setting.h_norm * math.log(setting.d)})
        d = 2 + i % 2
        red = rates.reduction_check(ops.random_hermitian(d * d, s_red, norm=1.0),
                                    ops.random_state(d * d, s_red), (d, d))
        red_err = max(red_err, red["error"])
    sandwich_viol, sandwich_worst = 0, 0.0
    t_grid = np.linspace(0.0, args.t_max, args.time_points)
    for i in range(args.instances):
        dim = args.mix_dims[i % len(args.mix_dims)]
        ens = rates.random_ensemble(dim, s_tot)
        res = rates.total_mixing_check(ens, ops.random_hermitian(dim, s_tot, norm=1.0), t_grid)
        sandwich_viol += res["violations"]
        sandwich_worst = max(sandwich_worst, res["max_violation"])
    swaps = []
    for d in args.swap_dims:
        phi = rates.maximally_entangled(d)
        psi = np.kron(phi, phi)  # a-A-B-b ordering with a~A and B~b entangled
        res = rates.total_entangling_check(rates.swap_operator(d), psi, (d, d, d, d))
        swaps.append({"d": d, "change": res["change"], "expected": 2 * math.log(d),
                      "error": abs(res["change"] - 2 * math.log(d))})
    checks = [check("mixing rate relative error", mix_err, args.rtol),
              check("entangling rate relative error", ent_err, args.rtol),
              check("reduction identity error", red_err, 1e-9),
              check("total mixing sandwich violations", float(sandwich_viol), 0.0),
              check("swap entropy change error", max(s["error"] for s in swaps), 1e-9)]
    result = {"instances": args.instances, "max_mixing_relative_error": mix_err,
              "max_entangling_relative_error": ent_err, "max_reduction_error": red_err,
              "sandwich": {"ensembles": args.instances, "time_points": args.time_points,
                           "violations": sandwich_viol, "max_excess": sandwich_worst},
              "swap": swaps}
    return result, checks, {"rates": rows}, {}


def cmd_lr_check(args):
    import numpy as np
    from .dynamics import lr_scan
    from .hamiltonian import preset_potential
    spec = _lattice(args)
    params = {"J": args.J, "g": args.g} if args.model == "tfim" else {"J": args.J}
    pot = preset_potential(args.model, spec, **params)
    t_grid = np.linspace(0.0, args.t_max, args.points)
    scan = lr_scan(pot, _pauli(args.A), _pauli(args.B), t_grid, args.min_distance, args.mu,
                   args.include_vacuous)
    rows = [{"X": p["X"][0], "Y": p["Y"][0], "distance": p["distance"], **r}
            for p in scan["pairs"] for r in p["rows"]]
    checks = [check("Lieb-Robinson violations", float(len(scan["violations"])), 0.0),
              check("max commutator / bound", scan["max_ratio"], 1.0)]
    result = {"s": scan["s"], "mu": scan["mu"], "pairs": len(scan["pairs"]),
              "evaluated_points": scan["evaluated"],
              "vacuous_points": int(sum(p["vacuous_points"] for p in scan["pairs"])),
              "max_ratio": scan["max_ratio"], "violations": scan["violations"],
              "per_pair": [{k: p[k] for k in ("X", "Y", "distance", "max_ratio", "vacuous_points")}
                           for p in scan["pairs"]]}
    return result, checks, {"lr": rows}, {}


def cmd_lattice_info(args):
    from . import lattice as lat
    from .errors import UsageError
    spec = _lattice(args)
    region = _region(args.region, spec)
    b1, b2, area = lat.boundary_and_area(region, spec)
    r_max = spec.diameter if args.r_max is None else args.r_max
    rows = lat.profile_rows(region, spec, r_max, args.convention)
    for row in rows:
        row["margin"] = row["bound"] - row["M"]
    checks = [check(f"M({row['r']}) / profile bound", float(row["M"]), float(row["bound"])) for row in rows]
    result = {"nu": spec.nu, "L": spec.L, "periodic": spec.periodic, "n_sites": spec.n_sites,
              "diameter": spec.diameter, "region_size": len(region), "area": area,
              "boundary_inner": len(b1), "boundary_outer": len(b2), "convention": args.convention,
              "profile": rows}
    if args.decay:
        kind, _, value = args.decay.partition(":")
        try:
            rate = float(value)
        except ValueError:
            raise UsageError(f"cannot parse decay {args.decay!r}; use exp:MU or power:A") from None
        makers = {"exp": lat.exp_decay, "power": lat.power_decay}
        if kind not in makers:
            raise UsageError(f"unknown decay family {kind!r}")
        result["reproducing_lambda"] = lat.reproducing_check(makers[kind](rate), spec)
    return result, checks, {"profile": rows}, {}


def cmd_filter_build(args):
    import numpy as np
    from .qac import build_filter
    filt = build_filter(args.delta, args.sharpness, args.nodes)
    rng = np.random.default_rng(args.seed)
    mags = args.delta * np.exp(rng.uniform(0.0, np.log(args.omega_max / args.delta), args.omega_samples))
    omegas = np.concatenate([mags, -mags])
    tail = float(np.max(np.abs(filt.W(omegas) + 1.0 / omegas)))
    t = np.linspace(0.0, args.t_max, args.t_points)
    f_pos, f_neg = filt.F(t), filt.F(-t)
    oddness = float(np.max(np.abs(f_pos + f_neg)))
    slope = filt.decay_exponent()
    checks = [check("|W(w) + 1/w| beyond the gap", tail, 1e-8),
              check("oddness of F", oddness, 1e-10),
              check("decay exponent on [5, 50]", slope, args.max_slope)]
    result = {"filter": filt.to_json(), "tail_error": tail, "oddness": oddness, "decay_exponent": slope,
              "F_at_0": {"re": float(f_pos[0].real), "im": float(f_pos[0].imag)}}
    rows = [{"t": float(a), "F_imag": float(b.imag)} for a, b in zip(t, f_pos)]
    return result, checks, {"filter": rows}, {}


def cmd_qa_path(args):
    from .qac import build_filter, transport
    path = _tfim_path(args)
    region = _region(args.cut, path.pot0.spec)
    filt = build_filter(args.delta, args.sharpness) if args.delta else None
    res = transport(path, filt, region, args.steps, args.gap_fraction, args.constant_every,
                    not args.no_consistency, sharpness=args.sharpness)
    checks = [check("final fidelity", res.fidelity[-1], args.min_fidelity, sense="ge"),
              check("unitarity defect", res.unitarity_defect, 1e-8),
              check("max |dS/ds| / (C A)", max(abs(r) / (c * res.area) for r, c in zip(res.rate, res.C)), 1.0),
              check("|Delta S|", abs(res.delta_S), res.C_max * res.area)]
    result = res.to_json()
    result.pop("trace")
    result["max_rate"] = max(abs(r) for r in res.rate)
    return result, checks, {"transport": res.rows()}, {}


def cmd_qa_truncate(args):
    import numpy as np
    from .qac import build_filter, telescoping_defect, truncated_generators
    path = _tfim_path(args)
    grid = np.linspace(0.0, 1.0, 41)
    filt = build_filter(args.gap_fraction * float(path.validate(grid).min()), args.sharpness)
    rows, per_s, checks = [], [], []
    for s in args.s:
        res = truncated_generators(path, s, filt, args.center, args.r_max)
        defect = telescoping_defect(res, path, s, filt)
        per_s.append({"s": s, "norms": res["norms"], "slope": res["slope"], "telescoping_defect": defect})
        rows += [{"s": s, "r": r, "norm": n} for r, n in enumerate(res["norms"])]
        slope = res["slope"] if res["slope"] is not None else float("inf")
        checks.append(check(f"decay slope at s={s:g}", slope, args.max_slope))
        checks.append(check(f"telescoping defect at s={s:g}", defect, 1e-10))
    result = {"filter": filt.to_json(), "center": args.center, "points": per_s}
    return result, checks, {"truncation": rows}, {}


def cmd_jw_check(args):
    import numpy as np
    from .hamiltonian import anticommutation_defect, assemble, hubbard_spec, jordan_wigner, number_operator
    rows = [{"modes": n, "defect": anticommutation_defect(n)} for n in range(1, args.modes + 1)]
    spec = _lattice(args)
    fs = hubbard_spec(spec, args.t, args.U, args.mu, args.ordering)
    H = assemble(jordan_wigner(fs))
    N = number_operator(fs.n_modes)
    comm = float(np.abs(H @ N - N @ H).max())
    herm = float(np.abs(H - H.conj().T).max())
    worst = max(r["defect"] for r in rows)
    checks = [check("anticommutation defect", worst, 1e-12),
              check("||[H, N]||_max", comm, 1e-10),
              check("hermiticity defect", herm, 1e-12)]
    result = {"anticommutation": rows, "hubbard": {"modes": fs.n_modes, "dim": int(H.shape[0]),
                                                   "number_commutator": comm, "hermiticity": herm,
                                                   "params": fs.params}}
    return result, checks, {"anticommutation": rows}, {}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run options")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--out", default=None, help="output directory (env ENTLAB_OUT, default .)")
    g.add_argument("--config", default=None, help="flat key=value file; command-line flags win")
    g.add_argument("--threads", type=pos_int, default=None, help="BLAS thread cap (env ENTLAB_THREADS)")
    g.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")


def _lattice_args(p, nu=1, L=10):
    p.add_argument("--nu", type=pos_int, default=nu, help="lattice dimension")
    p.add_argument("--L", type=int, default=L, help="side length")
    p.add_argument("--open", action="store_true", help="open instead of periodic boundaries")


def _path_args(p, L, g0, g1):
    p.add_argument("--model", default="tfim", help="path family (tfim)")
    _lattice_args(p, L=L)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--g0", type=float, default=g0, help="field at s=0")
    p.add_argument("--g1", type=float, default=g1, help="field at s=1")
    p.add_argument("--gap-fraction", type=pos_float, default=0.95, help="filter scale as a fraction of the minimum gap")
    p.add_argument("--sharpness", type=pos_float, default=8.0, help="bump sharpness of the filter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entlab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _common(p)
        p.set_defaults(func=func)
        return p

    p = add("sim-scan", cmd_sim_scan, "commutator trace-norm ratio scan over dominated pairs")
    p.add_argument("--dims", type=int_list, default=[2, 4, 8, 16, 32])
    p.add_argument("--p", type=float_list, default=[0.5, 0.1, 0.01, 0.001])
    p.add_argument("--samples", type=pos_int, default=500, help="samples per (dim, p) cell")
    p.add_argument("--profiles", type=_list_of(str), default=["simplex", "geometric", "two-scale"])
    p.add_argument("--strict", action="store_true", help="treat the finite-dimensional constant as hard")

    p = add("sim-decompose", cmd_sim_decompose, "spectral-interval decomposition audit")
    p.add_argument("--dims", type=int_list, default=[2, 4, 8, 16])
    p.add_argument("--p", type=float_list, default=[0.5, 0.1, 0.01, 0.001])
    p.add_argument("--instances", type=pos_int, default=1000)
    p.add_argument("--profile", default="geometric")

    p = add("sie-max", cmd_sie_max, "maximise the entangling rate of a two-party Hamiltonian")
    p.add_argument("--hamiltonian", default="zz", choices=["zz", "xx", "heisenberg", "swap", "random"])
    p.add_argument("--dA", type=pos_int, default=2)
    p.add_argument("--dB", type=pos_int, default=2)
    p.add_argument("--ancilla", type=int_list, default=[2, 2], help="ancilla dimensions a,b")
    p.add_argument("--restarts", type=pos_int, default=20)
    p.add_argument("--max-iter", type=pos_int, default=200)
    p.add_argument("--tol", type=pos_float, default=1e-8)
    p.add_argument("--target", type=float, default=None, help="required rate in bits")

    p = add("rates-check", cmd_rates_check, "finite-difference cross-validation of the rate formulas")
    p.add_argument("--instances", type=pos_int, default=100)
    p.add_argument("--mix-dims", type=int_list, default=[2, 3])
    p.add_argument("--ent-dims", type=int_list, default=[2, 2, 2, 2], help="a,A,B,b")
    p.add_argument("--dt", type=pos_float, default=1e-4)
    p.add_argument("--rtol", type=pos_float, default=1e-4)
    p.add_argument("--time-points", type=pos_int, default=50)
    p.add_argument("--t-max", type=pos_float, default=5.0)
    p.add_argument("--swap-dims", type=int_list, default=[2, 3, 4])

    p = add("lr-check", cmd_lr_check, "exact commutator norms against the Lieb-Robinson bound")
    p.add_argument("--model", default="tfim", choices=["tfim", "heisenberg"])
    _lattice_args(p, L=10)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--mu", type=pos_float, default=1.0)
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--points", type=pos_int, default=41)
    p.add_argument("--min-distance", type=int, default=2)
    p.add_argument("--A", default="z", help="observable at the source site")
    p.add_argument("--B", default="z", help="observable at the probe site")
    p.add_argument("--include-vacuous", action="store_true")

    p = add("lattice-info", cmd_lattice_info, "metric, boundary area and boundary profile of a region")
    _lattice_args(p, L=10)
    p.add_argument("--region", default="half", help='slab such as "0..4" or "0..1 x 0..3", or "half"')
    p.add_argument("--r-max", type=int, default=None)
    p.add_argument("--convention", default="own", choices=["own", "opposing"])
    p.add_argument("--decay", default=None, help="also report the reproducing constant, e.g. exp:1.0")

    p = add("filter-build", cmd_filter_build, "build and validate the quasi-adiabatic filter")
    p.add_argument("--delta", type=pos_float, default=1.0)
    p.add_argument("--sharpness", type=pos_float, default=8.0)
    p.add_argument("--nodes", type=pos_int, default=4000)
    p.add_argument("--omega-samples", type=pos_int, default=1000)
    p.add_argument("--omega-max", type=pos_float, default=100.0)
    p.add_argument("--t-max", type=pos_float, default=50.0)
    p.add_argument("--t-points", type=pos_int, default=501)
    p.add_argument("--max-slope", type=float, default=-6.0)

    p = add("qa-path", cmd_qa_path, "transport a ground state along a gapped path")
    _path_args(p, L=8, g0=2.0, g1=1.5)
    p.add_argument("--cut", default="half", help='region B1: "half" or a slab')
    p.add_argument("--steps", type=pos_int, default=200)
    p.add_argument("--delta", type=pos_float, default=None, help="fixed filter scale")
    p.add_argument("--constant-every", type=pos_int, default=1)
    p.add_argument("--min-fidelity", type=float, default=0.999)
    p.add_argument("--no-consistency", action="store_true", help="skip the doubled-step rerun")

    p = add("qa-truncate", cmd_qa_truncate, "decay of the truncated quasi-adiabatic generator")
    _path_args(p, L=10, g0=5.0, g1=4.0)
    p.add_argument("--s", type=float_list, default=[0.0, 0.5, 1.0])
    p.add_argument("--center", type=int, default=0)
    p.add_argument("--r-max", type=int, default=None)
    p.add_argument("--max-slope", type=float, default=-3.0)

    p = add("jw-check", cmd_jw_check, "Jordan-Wigner anticommutation and Hubbard number conservation")
    p.add_argument("--modes", type=pos_int, default=6)
    _lattice_args(p, L=3)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--U", type=float, default=4.0)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--ordering", default="row", choices=["row", "snake"])
    return parser


# ---------------------------------------------------------------------------
# config files and dispatch
# ---------------------------------------------------------------------------

def read_config(path: str) -> list[tuple[str, str]]:
    items = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key=value")
            key, value = (x.strip() for x in line.split("=", 1))
            items.append((key, value))
    return items


def config_argv(subparser: argparse.ArgumentParser, items) -> list[str]:
    """Translate config entries into flags of ``subparser``; unknown keys raise ``KeyError``."""
    actions = {a.dest: a for a in subparser._actions if a.option_strings}
    argv = []
    for key, value in items:
        dest = key.replace("-", "_")
        if dest in ("config", "help") or dest not in actions:
            raise KeyError(key)
        action = actions[dest]
        flag = max(action.option_strings, key=len)
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise ValueError(f"{key} expects true or false, got {value!r}")
        else:
            argv += [flag, value]
    return argv


def parse(argv, parser=None):
    parser = parser or build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        try:
            extra = config_argv(sub, read_config(args.config))
        except KeyError as exc:
            parser.error(f"unknown config key {exc.args[0]!r} for {args.command}")
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        idx = argv.index(args.command)
        # config entries first so explicit flags override them
        args = parser.parse_args(list(argv[:idx + 1]) + extra + list(argv[idx + 1:]))
    return args


def resolved_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in PLUMBING}


def apply_threads(args) -> int | None:
    threads = args.threads or (int(os.environ["ENTLAB_THREADS"]) if os.environ.get("ENTLAB_THREADS") else None)
    if threads:
        for var in THREAD_VARS:
            os.environ[var] = str(threads)
    return threads


def run(args) -> int:
    from . import reports
    threads = apply_threads(args)
    config = resolved_config(args)
    started = time.perf_counter()
    result, checks, tables, files = args.func(args)
    elapsed = time.perf_counter() - started
    violations = failed(checks)
    out = reports.output_dir(args.out)
    stem = args.command
    report = reports.build_report(stem, config, result, violations, __version__)
    report["checks"] = checks
    reports.write_json(out / f"{stem}.json", report)
    for name, rows in tables.items():
        reports.write_csv(out / (f"{stem}.csv" if len(tables) == 1 else f"{stem}.{name}.csv"), rows)
    for name, payload in files.items():
        reports.write_json(out / stem / name, payload)
    import numpy
    import scipy
    meta = {"command": stem, "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "elapsed_s": elapsed, "threads": threads, "python": platform.python_version(),
            "numpy": numpy.__version__, "scipy": scipy.__version__, "version": __version__}
    reports.write_json(out / f"{stem}.meta.json", meta)
    if not args.quiet:
        for c in checks:
            status = "ok" if c["ok"] else ("FAIL" if c["hard"] else "flag")
            print(f"{status:4s} {c['name']}: {c['value']:.6g} ({'<=' if c['sense'] == 'le' else '>='} {c['bound']:.6g})")
        print(f"{stem}: {'clean' if not violations else f'{len(violations)} violation(s)'}; "
              f"report in {out / (stem + '.json')} ({elapsed:.1f} s)")
    return 1 if violations else 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    from .errors import LabError
    try:
        return run(args)
    except (LabError, ValueError) as exc:
        print(f"entlab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
