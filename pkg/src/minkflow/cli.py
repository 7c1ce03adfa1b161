"""Batch front end: flow runs, solver verification, density checking.

Config files are flat key=value lines.  Density and initial-shape
expressions admit constants, cos(k*theta), sums, and products; nothing
else, so runs are reproducible from the manifest alone.
"""

import argparse
import hashlib
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import InputError, MinkflowError
from .flow import FlowConfig, PrescribedDensity, run
from .measures import check_admissibility
from .p_harmonic import (
    build_collar,
    radial_oracle,
    solve_p_laplace,
    solve_radial_profile,
)
from .support_geometry import SupportFunction, boundary_curve, circle_grid, curvature

EXIT_OK = 0
EXIT_CONDITION = 1
EXIT_INPUT = 2
EXIT_RUNTIME = 3

CONFIG_KEYS = {
    "p": float,
    "grid_m": int,
    "delta": float,
    "n_r": int,
    "dt_init": float,
    "dt_min": float,
    "dt_max": float,
    "t_max": float,
    "stop_tol": float,
    "solver_tol": float,
    "f_expr": str,
    "h0_expr": str,
}


# ---------------------------------------------------------------- expressions


class _Tokens:
    def __init__(self, text):
        self.text = text
        self.items = []
        i = 0
        while i < len(text):
            c = text[i]
            if c.isspace():
                i += 1
            elif c in "+-*()":
                self.items.append((c, i))
                i += 1
            elif c.isdigit() or c == ".":
                j = i
                while j < len(text) and (text[j].isdigit() or text[j] in ".eE") or (
                    j < len(text)
                    and text[j] in "+-"
                    and j > i
                    and text[j - 1] in "eE"
                ):
                    j += 1
                self.items.append((text[i:j], i))
                i = j
            elif c.isalpha():
                j = i
                while j < len(text) and text[j].isalpha():
                    j += 1
                self.items.append((text[i:j], i))
                i = j
            else:
                raise InputError(f"bad character {c!r} at position {i} in {text!r}")
        self.pos = 0

    def peek(self):
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def take(self, expected=None):
        if self.pos >= len(self.items):
            raise InputError(f"unexpected end of expression {self.text!r}")
        tok, where = self.items[self.pos]
        if expected is not None and tok != expected:
            raise InputError(
                f"expected {expected!r} at position {where} in {self.text!r},"
                f" got {tok!r}"
            )
        self.pos += 1
        return tok


def parse_expression(text):
    """Compile a density/shape expression to a vectorized callable."""
    toks = _Tokens(text)

    def factor():
        tok = toks.peek()
        if tok == "(":
            toks.take("(")
            node = expr()
            toks.take(")")
            return node
        if tok == "cos":
            toks.take("cos")
            toks.take("(")
            inner = toks.peek()
            if inner == "theta":
                toks.take("theta")
                k = 1.0
            else:
                k = float(toks.take())
                toks.take("*")
                toks.take("theta")
            toks.take(")")
            return lambda t, k=k: np.cos(k * t)
        tok = toks.take()
        try:
            value = float(tok)
        except ValueError:
            raise InputError(f"unexpected token {tok!r} in {text!r}") from None
        return lambda t, v=value: np.full_like(t, v, dtype=float)

    def unary():
        sign = 1.0
        while toks.peek() in ("+", "-"):
            if toks.take() == "-":
                sign = -sign
        node = factor()
        if sign < 0:
            return lambda t, n=node: -n(t)
        return node

    def term():
        node = unary()
        while toks.peek() == "*":
            toks.take("*")
            right = unary()
            node = (lambda a, b: lambda t: a(t) * b(t))(node, right)
        return node

    def expr():
        node = term()
        while toks.peek() in ("+", "-"):
            op = toks.take()
            right = term()
            if op == "+":
                node = (lambda a, b: lambda t: a(t) + b(t))(node, right)
            else:
                node = (lambda a, b: lambda t: a(t) - b(t))(node, right)
        return node

    root = expr()
    if toks.peek() is not None:
        tok, where = toks.items[toks.pos]
        raise InputError(f"trailing token {tok!r} at position {where} in {text!r}")
    return root


# -------------------------------------------------------------------- config


def parse_config(path):
    raw = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InputError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise InputError(f"{path}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise InputError(f"{path}:{lineno}: duplicate key {key!r}")
        caster = CONFIG_KEYS[key]
        if caster is str:
            raw[key] = value
        else:
            try:
                raw[key] = caster(value)
            except ValueError:
                raise InputError(
                    f"{path}:{lineno}: cannot parse {value!r} as {caster.__name__}"
                ) from None
    if "p" not in raw:
        raise InputError(f"{path}: required key 'p' is missing")
    return raw


def _flow_config(raw):
    return FlowConfig(
        p=raw["p"],
        m=raw.get("grid_m", 256),
        delta=raw.get("delta", 0.3),
        n_r=raw.get("n_r", 32),
        dt_init=raw.get("dt_init", 1e-3),
        dt_min=raw.get("dt_min", 1e-8),
        dt_max=raw.get("dt_max", 1e-2),
        t_max=raw.get("t_max", 50.0),
        stop_tol=raw.get("stop_tol", 1e-5),
        solver_tol=raw.get("solver_tol", 1e-10),
    )


# -------------------------------------------------------------------- output


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, columns):
    columns = [np.asarray(c) for c in columns]
    rows = len(columns[0])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def _manifest(path, raw, outputs, stamp):
    canonical = "\n".join(f"{k}={raw[k]}" for k in sorted(raw)) + "\n"
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    with open(path, "w") as fh:
        fh.write("[config]\n")
        fh.write(canonical)
        fh.write("[outputs]\n")
        for name in outputs:
            fh.write(f"{name}\n")
        fh.write(f"[hash]\nsha256={digest}\n")
        if stamp:
            fh.write(
                f"[stamp]\n{datetime.now(timezone.utc).isoformat()}\n"
            )


# ------------------------------------------------------------------ commands


def cmd_run(args):
    raw = parse_config(args.config)
    config = _flow_config(raw)
    f_func = parse_expression(raw.get("f_expr", "1"))
    h_func = parse_expression(raw.get("h0_expr", "1"))
    theta = circle_grid(config.m)
    f = PrescribedDensity(f_func(theta))
    h0 = SupportFunction(h_func(theta))

    result = run(f, h0, config)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = result.trajectory
    write_csv(
        out / "trajectory.csv",
        ["t", "min_h", "max_h", "gamma", "eta", "psi", "ma_residual", "dt"],
        [traj[name] for name in traj.dtype.names],
    )
    final = result.final
    density = final.grad ** (config.p - 1.0) * final.b
    write_csv(
        out / "final_shape.csv",
        ["theta", "h", "b", "grad", "density"],
        [theta, final.h.samples, final.b, final.grad, density],
    )
    _manifest(
        out / "manifest.txt",
        raw,
        ["trajectory.csv", "final_shape.csv"],
        args.stamp,
    )
    if not args.quiet:
        print(
            f"{result.status}: t = {final.t:.6g}, steps = {result.accepted_steps},"
            f" residual = {final.ma_residual:.3e}"
        )
    return EXIT_OK if result.converged else EXIT_CONDITION


def _parse_resolutions(text):
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            a, b = item.lower().split("x")
            pairs.append((int(a), int(b)))
        except ValueError:
            raise InputError(
                f"bad resolution {item!r}, expected NTHETAxNR like 256x32"
            ) from None
    if not pairs:
        raise InputError("no resolutions given")
    return pairs


def cmd_oracle(args):
    oracle = radial_oracle(args.n, args.p, args.outer, args.inner)
    rows = []
    prev_err = None
    prev_n = None
    for n_theta, n_r in _parse_resolutions(args.resolutions):
        if args.n == 2:
            h = SupportFunction.disk(args.outer, n_theta)
            delta = 1.0 - args.inner / args.outer
            mesh = build_collar(boundary_curve(h), curvature(h).b, delta, n_r)
            sol = solve_p_laplace(mesh, args.p)
            radii = np.linalg.norm(mesh.nodes, axis=1)
            u_err = float(np.max(np.abs(sol.u - oracle.profile(radii))))
            g_err = float(
                np.max(np.abs(sol.boundary_gradient - oracle.grad_at_outer))
                / oracle.grad_at_outer
            )
        else:
            r, u, grad = solve_radial_profile(
                args.n, args.p, args.outer, args.inner, n_points=max(n_r, 5)
            )
            u_err = float(np.max(np.abs(u - oracle.profile(r))))
            g_err = abs(grad - oracle.grad_at_outer) / oracle.grad_at_outer
            n_theta = 1
        if prev_err is not None and g_err > 0.0:
            order = float(np.log(prev_err / g_err) / np.log(n_r / prev_n))
        else:
            order = float("nan")
        rows.append((n_theta, n_r, u_err, g_err, order))
        prev_err, prev_n = g_err, n_r
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "oracle.csv",
        ["N_theta", "N_r", "max_u_error", "grad_error", "observed_order"],
        [np.array([r[i] for r in rows]) for i in range(5)],
    )
    if not args.quiet:
        print(
            f"closed-form gradient at outer radius: {oracle.grad_at_outer:.12g}"
        )
        for n_theta, n_r, u_err, g_err, order in rows:
            print(
                f"  {n_theta}x{n_r}: u_err = {u_err:.3e}, grad_err = {g_err:.3e},"
                f" order = {order:.2f}"
            )
    return EXIT_OK


def cmd_check(args):
    try:
        table = np.loadtxt(args.density, delimiter=",", skiprows=args.skip_rows)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read density file {args.density}: {exc}") from None
    if table.ndim != 2 or table.shape[1] != 2:
        raise InputError("density file must have two columns: theta, f")
    theta, f = table[:, 0], table[:, 1]
    m = theta.size
    expected = circle_grid(m)
    if m < 8 or not np.allclose(theta, expected, atol=1e-9):
        raise InputError(
            "theta column must be the uniform grid 2*pi*k/M, k = 0..M-1"
        )
    bad = np.nonzero(f <= 0.0)[0]
    if bad.size:
        raise InputError(
            f"density must be positive; row {bad[0] + 1 + args.skip_rows}"
            f" has f = {f[bad[0]]}"
        )
    report = check_admissibility(f)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "admissibility.csv", "w", newline="") as fh:
        fh.write("condition,passed,value\n")
        for cond in report:
            fh.write(f"{cond.name},{int(cond.passed)},{_fmt(cond.value)}\n")
    if not args.quiet:
        for cond in report:
            mark = "pass" if cond.passed else "FAIL"
            print(f"[{mark}] {cond.name}: value = {cond.value:.6e} ({cond.note})")
        print("admissible" if report.passed else "not admissible")
    return EXIT_OK if report.passed else EXIT_CONDITION


# ---------------------------------------------------------------------- main


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="minkflow",
        description="curvature flow solver for prescribed boundary measures",
    )
    parser.add_argument("--out-dir", default=".", help="output directory")
    parser.add_argument(
        "--stamp", action="store_true", help="add a UTC timestamp to the manifest"
    )
    parser.add_argument("--quiet", action="store_true", help="suppress stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evolve a body from a config file")
    p_run.add_argument("config", help="key=value config file")
    p_run.set_defaults(func=cmd_run)

    p_or = sub.add_parser("oracle", help="verify the solver against the annulus")
    p_or.add_argument("--n", type=int, default=2, help="ambient dimension")
    p_or.add_argument("--p", type=float, required=True)
    p_or.add_argument("--outer", type=float, default=1.0)
    p_or.add_argument("--inner", type=float, default=0.5)
    p_or.add_argument(
        "--resolutions",
        default="64x8,128x16,256x32",
        help="comma list of NTHETAxNR pairs",
    )
    p_or.set_defaults(func=cmd_oracle)

    p_ch = sub.add_parser("check", help="admissibility of a density file")
    p_ch.add_argument("density", help="two-column CSV: theta, f")
    p_ch.add_argument(
        "--skip-rows", type=int, default=0, help="header rows to skip"
    )
    p_ch.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MinkflowError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
