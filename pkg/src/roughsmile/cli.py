"""Command-line interface: ``roughsmile <command> [options]``.

Commands write CSV (default) or JSON tables with ``# key=value`` provenance
headers; numbers carry 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import expansions as ex
from .basis import BasisSpec
from .config import parse_grid, parse_list, read_config
from .kernels import RiemannLiouvilleKernel, TabulatedKernel, kfunc_closed_form, kfunc_quadrature
from .kl import KL_SMALL_H, kl_correction
from .montecarlo import MCConfig, price_options, simulate, write_price_csv
from .ritz import rate_function, sigma_level
from .volmodel import RBergomiParams, make_rbergomi

COMMANDS = ("kfunc", "rate", "smile", "term-structure", "moderate", "mc-validate", "compare")
DEFAULTS = {"sigma0": 0.2, "eta": 1.5, "rho": -0.7, "H": 0.3, "theta": "0",
            "n_paths": 100_000, "n_steps": 256, "seed": 0, "scheme": "exact", "antithetic": True}


class UsageError(Exception):
    pass


def fmt(v):
    """Value as printed in every table; ``None``/NaN become empty."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else f"{v:.17g}"


def render(columns, rows, header, comments, fmt_name):
    """Table text in CSV or JSON; JSON numbers use the same tokens as CSV."""
    cells = [[fmt(v) for v in row] for row in rows]
    if fmt_name == "csv":
        lines = [f"# {k}={fmt(v)}" for k, v in header.items()]
        lines += [f"# {c}" for c in comments]
        lines.append(",".join(columns))
        lines += [",".join(r) for r in cells]
        return "\n".join(lines) + "\n"

    def tok(c):
        if c == "":
            return "null"
        try:
            float(c)
            return c if c not in ("inf", "-inf", "nan") else json.dumps(c)
        except ValueError:
            return json.dumps(c)

    body = ",\n".join("    [" + ", ".join(tok(c) for c in r) + "]" for r in cells)
    head = json.dumps({k: fmt(v) for k, v in header.items()})
    return (f'{{\n  "header": {head},\n  "comments": {json.dumps(comments)},\n'
            f'  "columns": {json.dumps(columns)},\n  "rows": [\n{body}\n  ]\n}}\n')


def emit(args, columns, rows, header, comments=(), suffix=""):
    text = render(columns, rows, {"command": args.command, **header}, list(comments), args.format)
    if args.out:
        path = Path(args.out)
        if suffix:
            path = path.with_name(f"{path.stem}_{suffix}{path.suffix}")
        path.write_text(text)
    else:
        sys.stdout.write(text)


# -- argument handling -------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="roughsmile", description="Short-maturity smile asymptotics under rough volatility.")
    p.add_argument("command", choices=COMMANDS)
    g = p.add_argument_group("model")
    g.add_argument("--model-file", help="key=value file (sigma0, eta, rho, H, theta, n_paths, n_steps, seed, scheme, antithetic)")
    g.add_argument("--sigma0", type=float)
    g.add_argument("--eta", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--H", type=float)
    g.add_argument("--theta", help="damping, or comma list for one file per value")
    g.add_argument("--kernel-file", help="tabulated shape function for a non Riemann-Liouville kernel")
    n = p.add_argument_group("numerics")
    n.add_argument("--basis", choices=("fourier", "haar"), default="haar")
    n.add_argument("--n-basis", type=int)
    n.add_argument("--n-kl", type=int, default=256)
    n.add_argument("--force-kl", action="store_true", help="run the KL step even for small H")
    n.add_argument("--kl-dump", help="write KL matrices of the first x to this JSON file")
    n.add_argument("--x-grid")
    n.add_argument("--t-grid")
    n.add_argument("--beta", type=float)
    n.add_argument("--order", type=int, default=2)
    m = p.add_argument_group("monte carlo")
    m.add_argument("--scheme", choices=("exact", "hybrid"))
    m.add_argument("--paths", type=int)
    m.add_argument("--steps", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--no-antithetic", action="store_true")
    m.add_argument("--prices-out", help="also write the Monte Carlo price table here")
    o = p.add_argument_group("output")
    o.add_argument("--out")
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def settings(args):
    s = dict(DEFAULTS)
    if args.model_file:
        s.update(read_config(args.model_file))
    for key, val in (("sigma0", args.sigma0), ("eta", args.eta), ("rho", args.rho), ("H", args.H),
                     ("theta", args.theta), ("n_paths", args.paths), ("n_steps", args.steps),
                     ("seed", args.seed), ("scheme", args.scheme)):
        if val is not None:
            s[key] = val
    if args.no_antithetic:
        s["antithetic"] = False
    s["thetas"] = parse_list(str(s["theta"]))
    return s


def params_for(s, theta):
    return RBergomiParams(s["sigma0"], s["eta"], s["rho"], s["H"], theta)


def kernel_for(args, H):
    if args.kernel_file:
        k = TabulatedKernel.from_file(args.kernel_file)
        if k.H != H:
            raise UsageError(f"kernel file has H={k.H} but the model uses H={H}")
        return k
    return RiemannLiouvilleKernel(H)


def basis_for(args):
    default = 8 if args.basis == "haar" else 9
    return BasisSpec(args.basis, args.n_basis or default)


def need(args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise UsageError(f"--{name} is required for {args.command}")


def grid(args, name):
    need(args, name)
    try:
        return parse_grid(getattr(args, name.replace("-", "_")))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def model_header(s, p, args=None):
    h = {"sigma0": p.sigma0, "eta": p.eta, "rho": p.rho, "H": p.H, "theta": p.theta}
    if args is not None:
        h.update({"basis": args.basis, "n_basis": basis_for(args).N})
    return h


def kfuncs(args, kernel):
    if isinstance(kernel, RiemannLiouvilleKernel):
        return kfunc_closed_form(kernel.H)
    return kfunc_quadrature(kernel)


# -- commands ----------------------------------------------------------------


def cmd_kfunc(args, s):
    kernel = kernel_for(args, s["H"])
    rows = []
    if isinstance(kernel, RiemannLiouvilleKernel):
        rows.append([kernel.H, "closed", *kfunc_closed_form(kernel.H).as_array()])
    if kernel.H >= 0.02:
        rows.append([kernel.H, "quadrature", *kfunc_quadrature(kernel).as_array()])
    cols = ["H", "method", "k1_1", "k2_1", "k1sq_1", "kbar1sq_1", "k1_kbar1"]
    emit(args, cols, rows, {"kernel": kernel.kind})


def cmd_rate(args, s):
    xs = grid(args, "x-grid")
    for theta in s["thetas"]:
        p = params_for(s, theta)
        model, kernel, basis = make_rbergomi(p), kernel_for(args, p.H), basis_for(args)
        rows = []
        for x in xs:
            sol = rate_function(float(x), model, kernel, basis, p.rho)
            level = sigma_level(sol) if x != 0 else p.sigma0
            rows.append([x, sol.Lambda, level, sol.F_val, sol.G_val, sol.grad_norm])
        emit(args, ["x", "Lambda", "Sigma", "F", "G", "grad_norm"], rows, model_header(s, p, args),
             suffix=f"theta{theta:g}" if len(s["thetas"]) > 1 else "")


def cmd_smile(args, s):
    xs, ts = grid(args, "x-grid"), grid(args, "t-grid")
    for theta in s["thetas"]:
        p = params_for(s, theta)
        model, kernel, basis = make_rbergomi(p), kernel_for(args, p.H), basis_for(args)
        atm = ex.atm_coefficients(model, kfuncs(args, kernel), p.rho, p.H)
        use_kl = p.H >= KL_SMALL_H or args.force_kl
        comments = [] if use_kl else [f"sigma_kl skipped: H={p.H} < {KL_SMALL_H} (use --force-kl)"]
        per_x = {}
        for x in xs:
            x = float(x)
            if x == 0.0:
                per_x[x] = (None, None)
                continue
            sol = rate_function(x, model, kernel, basis, p.rho)
            a_x = None
            if use_kl:
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", RuntimeWarning)
                        corr = kl_correction(sol, args.n_kl)
                    a_x = corr.a_x
                    if args.kl_dump and not Path(args.kl_dump).exists():
                        corr.to_json(args.kl_dump)
                except ArithmeticError as exc:
                    comments.append(f"sigma_kl missing at x={fmt(x)}: {exc}")
            per_x[x] = (sol, a_x)
        rows = []
        for t in ts:
            for x in xs:
                x = float(x)
                sol, a_x = per_x[x]
                fz = ex.smile_fz(t, x, p.H, sol, p.sigma0).vol
                a0 = ex.smile_large_deviation(t, x, p.H, sol, None, atm).vol
                kl = ex.smile_large_deviation(t, x, p.H, sol, a_x).vol if a_x is not None else None
                if x == 0.0 and use_kl:
                    kl = a0  # a(x) tends to a0 at the money
                full = ex.smile_fully_expanded(t, x, atm).vol
                rows.append([t, x, ex.log_strike(t, x, p.H), fz, kl, a0, full])
        head = {**model_header(s, p, args), "n_kl": args.n_kl, "a0": atm.a0}
        emit(args, ["t", "x", "k", "sigma_fz", "sigma_kl", "sigma_a0", "sigma_expanded"], rows, head, comments,
             suffix=f"theta{theta:g}" if len(s["thetas"]) > 1 else "")


def monotonicity(a0):
    return "increasing" if a0 > 0 else "decreasing" if a0 < 0 else "flat"


def cmd_term_structure(args, s):
    ts = grid(args, "t-grid")
    if ts.min() < 0:
        raise UsageError("t-grid must be non-negative")
    rows, comments = [], []
    head = model_header(s, params_for(s, s["thetas"][0]))
    head.pop("theta")
    for theta in s["thetas"]:
        p = params_for(s, theta)
        atm = ex.atm_coefficients(make_rbergomi(p), kfuncs(args, kernel_for(args, p.H)), p.rho, p.H)
        comments.append(f"theta={fmt(theta)} a0={fmt(atm.a0)} term_structure={monotonicity(atm.a0)}")
        rows += [[t, ex.atm_term_structure(t, atm), theta] for t in ts]
    emit(args, ["t", "sigma_atm_expansion", "theta"], rows, head, comments)


def cmd_moderate(args, s):
    xs, ts = grid(args, "x-grid"), grid(args, "t-grid")
    need(args, "beta")
    if args.order not in (1, 2):
        raise UsageError("--order must be 1 or 2")
    for theta in s["thetas"]:
        p = params_for(s, theta)
        atm = ex.atm_coefficients(make_rbergomi(p), kfuncs(args, kernel_for(args, p.H)), p.rho, p.H)
        n = ex.moderate_order(p.H, args.beta)
        rows = []
        for t in ts:
            for x in xs:
                md = ex.smile_moderate_deviation(t, x, args.beta, atm, False, args.order)
                ts_ = ex.smile_moderate_deviation(t, x, args.beta, atm, True, args.order)
                var = ex.implied_variance_moderate(t, x, args.beta, atm) if n <= 4 else None
                rows.append([t, x, md.k, md.vol, ts_.vol, None if var is None else math.sqrt(var)])
        head = {**model_header(s, p), "beta": args.beta, "n": n, "order": args.order, "a0": atm.a0}
        emit(args, ["t", "x", "k", "sigma_md", "sigma_md_ts", "sigma_variance_form"], rows, head,
             [] if n <= 4 else [f"variance form skipped: n={n} > 4"],
             suffix=f"theta{theta:g}" if len(s["thetas"]) > 1 else "")


def mc_config(s, maturities, strikes):
    if s["n_paths"] < 2:
        raise UsageError("--paths must be at least 2")
    return MCConfig(int(s["n_paths"]), int(s["n_steps"]), s["scheme"], int(s["seed"]), bool(s["antithetic"]),
                    tuple(maturities), tuple(strikes))


def mc_header(s):
    return {"n_paths": s["n_paths"], "n_steps": s["n_steps"], "scheme": s["scheme"], "seed": s["seed"],
            "antithetic": int(bool(s["antithetic"]))}


def cmd_mc_validate(args, s):
    xs, ts = grid(args, "x-grid"), grid(args, "t-grid")
    if ts.min() <= 0:
        raise UsageError("t-grid must be positive for Monte Carlo")
    beta = args.beta
    for theta in s["thetas"]:
        p = params_for(s, theta)
        model, kernel, basis = make_rbergomi(p), kernel_for(args, p.H), basis_for(args)
        atm = ex.atm_coefficients(model, kfuncs(args, kernel), p.rho, p.H)
        shift = 0.0 if beta is None else beta
        strikes = sorted({float(ex.log_strike(t, x, p.H, shift)) for t in ts for x in xs})
        cfg = mc_config(s, ts, strikes)
        bundle = simulate(p, cfg)
        use_kl = beta is None and (p.H >= KL_SMALL_H or args.force_kl)
        sols = {}
        if beta is None:
            for x in xs:
                x = float(x)
                if x != 0.0:
                    sol = rate_function(x, model, kernel, basis, p.rho)
                    a_x = None
                    if use_kl:
                        try:
                            with warnings.catch_warnings():
                                warnings.simplefilter("ignore", RuntimeWarning)
                                a_x = kl_correction(sol, args.n_kl).a_x
                        except ArithmeticError:
                            a_x = None
                    sols[x] = (sol, a_x)
        rows, all_prices = [], []
        for t in ts:
            for x in xs:
                x = float(x)
                k = float(ex.log_strike(t, x, p.H, shift))
                pr = price_options(bundle, [k], [t])[0]
                all_prices.append(pr)
                kl = a0 = fz = md = md_ts = None
                if beta is None:
                    sol, a_x = sols.get(x, (None, None))
                    fz = ex.smile_fz(t, x, p.H, sol, p.sigma0).vol
                    a0 = ex.smile_large_deviation(t, x, p.H, sol, None, atm).vol
                    if a_x is not None:
                        kl = ex.smile_large_deviation(t, x, p.H, sol, a_x).vol
                    elif x == 0.0 and use_kl:
                        kl = a0
                else:
                    md = ex.smile_moderate_deviation(t, x, beta, atm, False, args.order).vol
                    md_ts = ex.smile_moderate_deviation(t, x, beta, atm, True, args.order).vol
                approx = [kl, a0, fz, md, md_ts]
                errs = [None if v is None or math.isnan(pr.ivol) else abs(v - pr.ivol) for v in approx]
                rows.append([t, x, k, pr.ivol, pr.ivol_se, *approx, *errs])
        names = ["kl", "a0", "fz", "md", "md_ts"]
        cols = ["t", "x", "k", "ivol_mc", "ivol_mc_se"] + [f"ivol_{n}" for n in names] + [f"abs_err_{n}" for n in names]
        comments = []
        for j, name in enumerate(names):
            e = [r[10 + j] for r in rows if r[10 + j] is not None]
            if e:
                comments.append(f"summary {name}: max_abs_err={fmt(max(e))} mean_abs_err={fmt(sum(e) / len(e))} n={len(e)}")
        head = {**model_header(s, p, args), **mc_header(s), "beta": beta, "n_kl": args.n_kl}
        suffix = f"theta{theta:g}" if len(s["thetas"]) > 1 else ""
        emit(args, cols, rows, head, comments, suffix)
        if args.prices_out:
            path = Path(args.prices_out)
            if suffix:
                path = path.with_name(f"{path.stem}_{suffix}{path.suffix}")
            write_price_csv(all_prices, path, {**model_header(s, p), **mc_header(s)})


def cmd_compare(args, s):
    xs, ts = grid(args, "x-grid"), grid(args, "t-grid")
    if ts.min() <= 0:
        raise UsageError("t-grid must be positive for Monte Carlo")
    for theta in s["thetas"]:
        p = params_for(s, theta)
        strikes = sorted({float(ex.log_strike(t, x, p.H)) for t in ts for x in xs})
        out = {}
        for scheme in ("exact", "hybrid"):
            cfg = mc_config({**s, "scheme": scheme}, ts, strikes)
            out[scheme] = simulate(p, cfg)
        rows = []
        for t in ts:
            for x in xs:
                k = float(ex.log_strike(t, x, p.H))
                a = price_options(out["exact"], [k], [t])[0]
                b = price_options(out["hybrid"], [k], [t])[0]
                se = math.hypot(a.ivol_se, b.ivol_se)
                rows.append([t, x, k, a.ivol, a.ivol_se, b.ivol, b.ivol_se, b.ivol - a.ivol, (b.ivol - a.ivol) / se])
        cols = ["t", "x", "k", "ivol_exact", "ivol_exact_se", "ivol_hybrid", "ivol_hybrid_se", "diff", "z"]
        head = {**model_header(s, p), **{k: v for k, v in mc_header(s).items() if k != "scheme"}}
        emit(args, cols, rows, head, suffix=f"theta{theta:g}" if len(s["thetas"]) > 1 else "")


HANDLERS = {"kfunc": cmd_kfunc, "rate": cmd_rate, "smile": cmd_smile, "term-structure": cmd_term_structure,
            "moderate": cmd_moderate, "mc-validate": cmd_mc_validate, "compare": cmd_compare}


VALUE_FLAGS = ("--x-grid", "--t-grid", "--theta", "--rho", "--beta")


def _join_values(argv):
    """Attach values such as ``-0.1:0.1:5`` to their flag so argparse keeps them."""
    out, it = [], iter(argv)
    for a in it:
        if a in VALUE_FLAGS:
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_values(sys.argv[1:] if argv is None else list(argv)))
    try:
        s = settings(args)
        HANDLERS[args.command](args, s)
    except UsageError as exc:
        print(f"roughsmile {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, OSError, KeyError) as exc:
        print(f"roughsmile {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
