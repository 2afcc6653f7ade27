"""Batch front-end: experiment registry, config parsing, artifact emission.

Each run resolves its configuration (flags and/or an INI config file),
writes a manifest echoing the resolved values in the same INI format,
and emits CSV/VTK artifacts into the output directory. Re-running from
an emitted manifest reproduces byte-identical CSV output. Exit status is
nonzero on solver failure, with a diagnostic file in the output
directory.
"""

from __future__ import annotations

import argparse
import configparser
import sys
import traceback
from pathlib import Path

import numpy as np

EXPERIMENTS = (
    "diffusion-study",
    "advection-study",
    "searchlight",
    "taylor-green",
    "cylinder",
    "coercivity-audit",
)

# keys accepted per section in config files; anything else is rejected
_CONFIG_KEYS = {
    "run": {"experiment", "outdir", "seed"},
    "study": {"methods", "orders", "refinements", "domain", "eps_factor",
              "naive_advection", "h_levels"},
    "searchlight": {"methods", "h_levels"},
    "taylor_green": {"methods", "h_levels", "final_time", "tau", "nu"},
    "cylinder": {"method", "tau", "final_time", "h_min", "h_max",
                 "eps", "nu", "smoke", "dump_system"},
    "audit": {"method", "naive_advection", "dump_system"},
}


class ConfigError(ValueError):
    pass


def _parse_methods(text):
    return tuple(m.strip() for m in text.split(",") if m.strip())


def _parse_floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _parse_ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def load_config(path):
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    for section in cp.sections():
        if section not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in _CONFIG_KEYS[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    return cp


def write_manifest(path, sections):
    cp = configparser.ConfigParser()
    for name, kv in sections.items():
        cp[name] = {k: str(v) for k, v in kv.items()}
    with open(path, "w") as fh:
        cp.write(fh)


def _standard_levels(refinements):
    return tuple(0.05 * 2.0 ** (-k / 2.0) for k in range(refinements))


def _outdir(args):
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_study(args, advection):
    from .studies import StudySpec, run_diffusion_study, run_advection_study, write_csv

    cfg = _merge_config(args, "study")
    h_levels = cfg.get("h_levels")
    if h_levels:
        levels = _parse_floats(h_levels)
    else:
        levels = _standard_levels(int(cfg.get("refinements", 4)))
    spec = StudySpec(
        domain=cfg.get("domain", "arc"),
        methods=_parse_methods(cfg.get("methods", "nsddm,mix0")),
        orders=_parse_ints(str(cfg.get("orders", "1,2"))),
        h_levels=levels,
        eps_factor=float(cfg.get("eps_factor", 3.5)),
        naive_advection=_as_bool(cfg.get("naive_advection", False)),
    )
    if advection:
        spec.advection_scale = 100.0
        rows = run_advection_study(spec)
    else:
        rows = run_diffusion_study(spec)
    out = _outdir(args)
    name = "advection" if advection else "diffusion"
    write_csv(out / f"{name}_{spec.domain}.csv", rows)
    write_manifest(out / "manifest.ini", {
        "run": {"experiment": args.experiment, "outdir": args.outdir, "seed": args.seed},
        "study": {
            "domain": spec.domain,
            "methods": ",".join(spec.methods),
            "orders": ",".join(map(str, spec.orders)),
            "h_levels": ",".join(f"{h:.12g}" for h in spec.h_levels),
            "eps_factor": spec.eps_factor,
            "naive_advection": spec.naive_advection,
        },
    })
    print(f"wrote {out / f'{name}_{spec.domain}.csv'} ({len(rows)} rows)")
    return 0


def _run_searchlight(args):
    from .studies import run_searchlight, write_csv, SEARCHLIGHT_LEVELS
    from .mesh import write_vtk
    from .femspace import interpolate

    cfg = _merge_config(args, "searchlight")
    methods = _parse_methods(cfg.get("methods", "mix0,nsddm"))
    levels = _parse_floats(cfg.get("h_levels", "")) or SEARCHLIGHT_LEVELS
    results = run_searchlight(h_levels=levels, methods=methods)
    out = _outdir(args)
    for (name, h), res in results.items():
        tag = f"{name}_h{h:.5f}"
        rows = [{"s": float(t), "value": float(v)}
                for t, v in zip(res["t"], res["values"])]
        write_csv(out / f"searchlight_{tag}.csv", rows, columns=("s", "value"))
        vertex_vals = res["u"].evaluate(res["u"].space.mesh.vertices)
        write_vtk(out / f"searchlight_{tag}.vtk", res["u"].space.mesh,
                  {"u": vertex_vals})
    write_manifest(out / "manifest.ini", {
        "run": {"experiment": args.experiment, "outdir": args.outdir, "seed": args.seed},
        "searchlight": {"methods": ",".join(methods),
                        "h_levels": ",".join(f"{h:.12g}" for h in levels)},
    })
    print(f"wrote searchlight artifacts for {len(results)} runs to {out}")
    return 0


def _run_taylor_green(args):
    from .navierstokes import taylor_green
    from .studies import write_csv

    cfg = _merge_config(args, "taylor_green")
    methods = _parse_methods(cfg.get("methods", "nsddm,mix0"))
    levels = _parse_floats(cfg.get("h_levels", "")) or (0.05, 0.05 / np.sqrt(2), 0.025)
    final_time = float(cfg.get("final_time", 1.0))
    tau = cfg.get("tau")
    tau = float(tau) if tau not in (None, "", "None") else None
    out = _outdir(args)
    columns = ("method", "h", "eps", "tau", "EL2u", "eocL2u", "EH1u",
               "eocH1u", "EL2p", "eocL2p")
    all_rows = []
    for m in methods:
        rows = taylor_green(m, h_levels=levels, final_time=final_time, tau=tau,
                            progress=lambda r: print(f"  {m} h={r['h']:.4g} done"))
        all_rows.extend(rows)
    write_csv(out / "taylor_green.csv", all_rows, columns=columns)
    write_manifest(out / "manifest.ini", {
        "run": {"experiment": args.experiment, "outdir": args.outdir, "seed": args.seed},
        "taylor_green": {"methods": ",".join(methods),
                         "h_levels": ",".join(f"{h:.12g}" for h in levels),
                         "final_time": final_time, "tau": tau if tau else ""},
    })
    print(f"wrote {out / 'taylor_green.csv'}")
    return 0


def _run_cylinder(args):
    from .navierstokes import cylinder_benchmark, save_checkpoint
    from .studies import write_csv

    cfg = _merge_config(args, "cylinder")
    method = cfg.get("method", "mix0")
    smoke = _as_bool(cfg.get("smoke", False))
    tau = float(cfg.get("tau", 0.005))
    final_time = float(cfg.get("final_time", 1.0 if smoke else 8.0))
    h_min = float(cfg.get("h_min", 0.01 if smoke else 0.005))
    h_max = float(cfg.get("h_max", 0.04 if smoke else 0.02))
    eps = float(cfg.get("eps", 0.035 if smoke else 0.0175))
    out = _outdir(args)
    series, state, solver = cylinder_benchmark(
        method, tau=tau, final_time=final_time, h_min=h_min, h_max=h_max,
        eps=eps, progress=lambda r: print(f"  t={r['t']:.3f} cd={r['cd']:.4f}"))
    write_csv(out / f"cylinder_{method}.csv", series, columns=("t", "cd", "cl", "dp"))
    save_checkpoint(out / f"cylinder_{method}.ckpt", state)
    if _as_bool(cfg.get("dump_system", False)):
        from .system import dump_system, FeSystem
        dump_system(out / "mass_matrix.txt",
                    FeSystem(solver.V, solver._mass_raw, np.zeros(solver.V.n_scalar)))
    write_manifest(out / "manifest.ini", {
        "run": {"experiment": args.experiment, "outdir": args.outdir, "seed": args.seed},
        "cylinder": {"method": method, "tau": tau, "final_time": final_time,
                     "h_min": h_min, "h_max": h_max, "eps": eps, "smoke": smoke},
    })
    cd = [r["cd"] for r in series]
    t = [r["t"] for r in series]
    k = int(np.argmax(cd))
    print(f"cd_max = {cd[k]:.6f} at t = {t[k]:.3f}; dp(end) = {series[-1]['dp']:.6f}")
    return 0


def _run_audit(args):
    from .studies import coercivity_audit, write_csv

    cfg = _merge_config(args, "audit")
    naive = _as_bool(cfg.get("naive_advection", False))
    method = cfg.get("method")
    rows = coercivity_audit(methods=(method,) if method else None, naive=naive)
    if _as_bool(cfg.get("dump_system", False)):
        from .studies import example_1d_system
        from .system import dump_system
        out = _outdir(args)
        dump_system(out / "example_1d_system.txt", example_1d_system(naive=True))
    out = _outdir(args)
    write_csv(out / "coercivity_audit.csv", rows,
              columns=("method", "case", "quantity", "value", "status"))
    write_manifest(out / "manifest.ini", {
        "run": {"experiment": args.experiment, "outdir": args.outdir, "seed": args.seed},
        "audit": {"method": method or "", "naive_advection": naive},
    })
    for r in rows:
        print(f"  {r['method']:12s} {r['case']:22s} {r['quantity']} = "
              f"{r['value']:+.6e}  [{r['status']}]")
    bad = [r for r in rows if r["status"] == "FAIL"]
    return 1 if bad else 0


def _as_bool(v):
    if isinstance(v, bool):
        return v
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _merge_config(args, section):
    """Resolved key -> value map: config file first, flags override."""
    cfg = {}
    if args.config:
        cp = load_config(args.config)
        if cp.has_section(section):
            cfg.update(dict(cp[section]))
    for key, val in vars(args).items():
        if key in ("experiment", "config", "outdir", "seed"):
            continue
        if val is not None and key in _CONFIG_KEYS.get(section, set()):
            cfg[key] = val
    return cfg


def build_parser():
    top = argparse.ArgumentParser(
        prog="ddfem",
        description="Diffuse-domain FEM experiments (studies, searchlight, "
                    "Taylor-Green, cylinder benchmark, coercivity audit).")
    sub = top.add_subparsers(dest="experiment", required=True)

    def common(p):
        p.add_argument("--outdir", default="out", help="artifact directory")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized property checks")
        p.add_argument("--config", default=None,
                       help="INI config file; flags override its values")

    for name in ("diffusion-study", "advection-study"):
        p = sub.add_parser(name, help=f"manufactured-solution {name}")
        common(p)
        p.add_argument("--methods", help="comma list: ddm1,ddm2,sbm,nddm,nsddm,mix0,mix1")
        p.add_argument("--orders", help="comma list of 1,2")
        p.add_argument("--refinements", type=int, help="number of h levels")
        p.add_argument("--h-levels", dest="h_levels", help="explicit comma list of h")
        p.add_argument("--domain", choices=("arc", "arc-complement", "circle"))
        p.add_argument("--naive-advection", dest="naive_advection",
                       action="store_const", const=True)

    p = sub.add_parser("searchlight", help="rotating-beam advection problem")
    common(p)
    p.add_argument("--methods")
    p.add_argument("--h-levels", dest="h_levels")

    p = sub.add_parser("taylor-green", help="vortex benchmark error table")
    common(p)
    p.add_argument("--methods")
    p.add_argument("--h-levels", dest="h_levels")
    p.add_argument("--final-time", dest="final_time", type=float)
    p.add_argument("--tau", type=float)

    p = sub.add_parser("cylinder", help="channel flow around a cylinder")
    common(p)
    p.add_argument("--method", choices=("nsddm", "mix0"))
    p.add_argument("--tau", type=float)
    p.add_argument("--final-time", dest="final_time", type=float)
    p.add_argument("--h-min", dest="h_min", type=float)
    p.add_argument("--h-max", dest="h_max", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--smoke", action="store_const", const=True,
                   help="reduced preset: T=1, coarser mesh")
    p.add_argument("--dump-system", dest="dump_system", action="store_const", const=True)

    p = sub.add_parser("coercivity-audit", help="matrix positivity diagnostics")
    common(p)
    p.add_argument("--method")
    p.add_argument("--naive-advection", dest="naive_advection",
                   action="store_const", const=True)
    p.add_argument("--dump-system", dest="dump_system", action="store_const", const=True)
    return top


_RUNNERS = {
    "diffusion-study": lambda a: _run_study(a, advection=False),
    "advection-study": lambda a: _run_study(a, advection=True),
    "searchlight": _run_searchlight,
    "taylor-green": _run_taylor_green,
    "cylinder": _run_cylinder,
    "coercivity-audit": _run_audit,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    np.random.seed(args.seed)
    try:
        return _RUNNERS[args.experiment](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver failures leave a diagnostic file
        out = Path(args.outdir)
        out.mkdir(parents=True, exist_ok=True)
        diag = out / "failure.txt"
        diag.write_text(
            f"experiment: {args.experiment}\nerror: {exc}\n\n{traceback.format_exc()}")
        print(f"run failed: {exc} (diagnostic in {diag})", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
