"""Batch command-line front end.

Every subcommand writes one or more CSV files (and SVG plots for the decay
and dilation studies) into ``--out`` and echoes its key numbers on stdout as
``name, value`` lines.  Exit status: 0 on success, 2 when a certificate does
not certify (``epsilon >= 1``), 1 on any error, with an ``error,<kind>,<message>``
line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_ERROR, EXIT_INVALID = 0, 1, 2
SIGMA0 = 1 / math.sqrt(2)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.params[name]
        except KeyError:
            raise AttributeError(name) from None


# ---------------------------------------------------------------------------
# argument types


def _number(text: str) -> float:
    try:
        v = float(Fraction(text.strip())) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"invalid number {text!r}")
    return v


def _positive(name: str):
    def conv(text):
        v = _number(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v
    conv.__name__ = name
    return conv


def _positive_int(name: str):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be a positive integer")
        return v
    conv.__name__ = name
    return conv


def _nonneg_int(name: str):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError(f"{name} must be >= 0")
        return v
    conv.__name__ = name
    return conv


def _positive_list(name: str):
    one = _positive(name)

    def conv(text):
        items = [t for t in text.split(",") if t.strip()]
        if not items:
            raise argparse.ArgumentTypeError(f"{name} list is empty")
        return [one(t) for t in items]
    conv.__name__ = name
    return conv


def _box(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("box must be x0,x1,y0,y1")
    x0, x1, y0, y1 = (_number(p) for p in parts)
    if not (x0 <= x1 and y0 <= y1):
        raise argparse.ArgumentTypeError("box needs x0 <= x1 and y0 <= y1")
    return (x0, x1, y0, y1)


def _points(text: str):
    out = []
    for item in text.split(";"):
        if not item.strip():
            continue
        xy = item.split(",")
        if len(xy) != 2:
            raise argparse.ArgumentTypeError("points must be x,y;x,y;...")
        out.append((_number(xy[0]), _number(xy[1])))
    return out


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--lattice", default="golden", help="golden, zsq or a lattice config file")
    p.add_argument("--scale", type=_positive("scale"), default=0.5, help="lattice scale a (default 0.5)")
    p.add_argument("--tau", type=_positive("tau"), default=1.0, help="dilation tau (default 1)")
    p.add_argument("--sigma", type=_positive("sigma"), default=SIGMA0, help="window width (default 1/sqrt2)")
    p.add_argument("--grid", type=_positive("grid"), default=1 / 64,
                   help="anchor grid step in fundamental-cell coordinates (default 1/64)")
    p.add_argument("--refine", type=_nonneg_int("refine"), default=3, help="refinement rounds (default 3)")
    p.add_argument("--out", default=".", help="output directory (default .)")
    p.add_argument("--threads", type=_positive_int("threads"), default=os.cpu_count() or 1,
                   help="worker threads (default: available cores)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmcframes", description="QMC discretization of continuous frames")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    common = _common()

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_)

    add("discrepancy", "shift discrepancy estimate of a * Gamma_tau")

    p = add("decay", "discrepancy decay study over several scales")
    p.add_argument("--scales", type=_positive_list("scale"), default=[0.5, 0.25, 0.125, 0.0625, 0.03125])

    p = add("dilation", "dilation discrepancy over tau samples")
    p.add_argument("--scales", type=_positive_list("scale"), default=None,
                   help="several scales for a log-log study (default: --scale only)")
    p.add_argument("--taus", type=_positive_list("tau"), default=[0.25, 0.5, 1.0, 2.0, 4.0])

    p = add("weights", "QMC weights of the sampling points in a box")
    p.add_argument("--box", type=_box, required=True, help="x0,x1,y0,y1")
    p.add_argument("--method", choices=("auto", "sweep"), default="sweep")
    p.add_argument("--extra-points", type=_points, default=[], help="points added to the lattice: x,y;x,y")
    p.add_argument("--points", default=None, help="CSV file of further points (x,y[,weight]; weights ignored)")
    p.add_argument("--no-coverage-check", action="store_true")

    p = add("quadrature", "weighted quadrature error and its Koksma-Hlawka bound")
    p.add_argument("--integrand", default="gauss", help="gauss or gauss_aniso:sx,sy")
    p.add_argument("--radius", type=_positive("radius"), default=None, help="truncation radius (default: automatic)")

    p = add("omega", "oscillation of the Gaussian Gabor frame")
    p.add_argument("--direct", action="store_true", help="also integrate the oscillation functional directly")

    p = add("schur", "direct Schur estimate of the frame deviation")
    p.add_argument("--nu-samples", type=_positive_int("nu-samples"), default=16)
    p.add_argument("--eta-step", type=_positive("eta-step"), default=None)
    p.add_argument("--method", choices=("auto", "poisson", "direct"), default="auto")

    p = add("certify", "frame-bound certificate epsilon = D* x Omega")
    p.add_argument("--dilation-uniform", action="store_true")
    p.add_argument("--taus", type=_positive_list("tau"), default=[0.5, 1.0, 2.0])
    p.add_argument("--margin-bound", type=_positive_int("margin-bound"), default=1000)
    p.add_argument("--omega-source", choices=("closed", "numeric"), default="closed")

    p = add("framebounds", "empirical frame bounds on a Hermite test subspace")
    p.add_argument("--dim", type=_positive_int("dim"), default=12)
    p.add_argument("--signal-length", type=_positive_int("signal-length"), default=None)
    p.add_argument("--time-span", type=_positive("time-span"), default=None)
    p.add_argument("--freq-span", type=_positive("freq-span"), default=None)
    p.add_argument("--iterations", type=_positive_int("iterations"), default=100000)

    p = add("admissibility", "finite-box admissibility margin and continued fractions")
    p.add_argument("--bound", type=_positive_int("bound"), default=10000, help="coefficient bound M")
    p.add_argument("--terms", type=_positive_int("terms"), default=10000, help="continued-fraction terms")
    p.add_argument("--cf", action="append", default=[],
                   help="extra surd for a continued fraction: phi, sqrt2 or p,q,d,r")
    return parser


def _glue_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "--box -3,3,-3,3" as two options; glue such values on with "="
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--") and "=" not in tok and nxt is not None and re.match(r"^-[\d.]", nxt):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def parse_args(argv) -> RunConfig:
    ns = build_parser().parse_args(_glue_negative_values(list(argv)))
    params = vars(ns)
    cmd = params.pop("command")
    return RunConfig(cmd, params)


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


_NOT_PROVENANCE = {"out", "threads"}


def write_csv(cfg: RunConfig, name: str, columns: list[str], rows: list[list]) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# command={cfg.command}\n")
        for k in sorted(cfg.params):
            if k not in _NOT_PROVENANCE:
                fh.write(f"# {k}={_fmt(cfg.params[k])}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(columns)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])
    return path


def _write_text(cfg: RunConfig, name: str, text: str) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _say(name, value):
    print(f"{name}, {_fmt(value)}")


# ---------------------------------------------------------------------------
# commands


def _lattice(cfg):
    from .lattice import lattice_from_name
    return lattice_from_name(cfg.lattice, cfg.scale, cfg.tau)


def _base_lattice(cfg):
    from .lattice import lattice_from_name
    return lattice_from_name(cfg.lattice, 1.0, cfg.tau)


def _dcfg(cfg):
    return dict(grid_resolution=cfg.grid, refinement_rounds=cfg.refine, workers=cfg.threads)


def cmd_discrepancy(cfg):
    from .discrepancy import shift_discrepancy
    d = shift_discrepancy(_lattice(cfg), **_dcfg(cfg))
    write_csv(cfg, "discrepancy.csv",
              ["lattice", "a", "tau", "D_low", "D_est", "grid", "anchors", "argmax_x", "argmax_y"],
              [[cfg.lattice, cfg.scale, cfg.tau, d.lower_bound, d.estimate, d.grid_resolution,
                d.anchors_evaluated, *d.argmax_anchor]])
    _say("D_low", d.lower_bound)
    _say("D_est", d.estimate)
    return EXIT_OK


def _decay_svg(title, a, d, c_hat, slope):
    from .discrepancy import admissible_rate
    from .svgplot import Series, loglog_svg
    a = list(a)
    grid = np.geomspace(min(a), max(a), 40)
    ref = c_hat * admissible_rate(grid)
    return loglog_svg(
        [Series("D* estimate", a, list(d)),
         Series("C a^2 ln(2+1/a)", list(grid), list(ref), markers=False, dashed=True)],
        title, "scale a", "discrepancy", notes=[f"fitted slope {slope:.3f}", f"C = {c_hat:.4g}"])


def cmd_decay(cfg):
    from .discrepancy import admissible_rate, decay_fit
    base = _base_lattice(cfg)
    fit = decay_fit(base, cfg.scales, **_dcfg(cfg))
    rows = [[a, t.lower_bound, t.estimate, float(admissible_rate(a)), t.anchors_evaluated]
            for a, t in zip(cfg.scales, fit.table)]
    write_csv(cfg, "decay.csv", ["a", "D_low", "D_est", "rate_a2log", "anchors"], rows)
    ratios = [fit.table[i + 1].estimate / fit.table[i].estimate for i in range(len(fit.table) - 1)]
    write_csv(cfg, "decay_fit.csv", ["slope", "c_hat", "max_ratio", "n_scales"],
              [[fit.slope, fit.c_hat, max(ratios), len(cfg.scales)]])
    _write_text(cfg, "decay.svg", _decay_svg(f"discrepancy decay ({cfg.lattice})", cfg.scales,
                                             [t.estimate for t in fit.table], fit.c_hat, fit.slope))
    _say("slope", fit.slope)
    _say("c_hat", fit.c_hat)
    _say("max_ratio", max(ratios))
    return EXIT_OK


def cmd_dilation(cfg):
    from .discrepancy import dilation_discrepancy
    from .svgplot import Series, loglog_svg
    base = _base_lattice(cfg)
    scales = cfg.scales or [cfg.scale]
    rows, summary, dil = [], [], []
    for a in scales:
        r = dilation_discrepancy(base, a, cfg.taus, **_dcfg(cfg))
        for t, run in zip(cfg.taus, r.per_tau):
            rows.append([a, t, run.lower_bound, run.estimate])
        at_one = [run.estimate for t, run in zip(cfg.taus, r.per_tau) if t == 1.0]
        ratio = r.estimate / at_one[0] if at_one else float("nan")
        summary.append([a, r.lower_bound, r.estimate, r.tau, ratio])
        dil.append(r.estimate)
        _say(f"D_dil[a={a:.17g}]", r.estimate)
        if at_one:
            _say(f"ratio_to_tau1[a={a:.17g}]", ratio)
    write_csv(cfg, "dilation.csv", ["a", "tau", "D_low", "D_est"], rows)
    write_csv(cfg, "dilation_max.csv", ["a", "D_dil_low", "D_dil_est", "argmax_tau", "ratio_to_tau1"], summary)
    if len(scales) >= 2:
        slope = float(np.polyfit(np.log(scales), np.log(dil), 1)[0])
        from .discrepancy import admissible_rate
        c_hat = float(np.max(np.array(dil) / admissible_rate(np.array(scales))))
        svg = _decay_svg(f"dilation discrepancy ({cfg.lattice})", scales, dil, c_hat, slope)
    else:
        svg = loglog_svg([Series(f"D*_shift(a Gamma_tau), a={scales[0]:.4g}", cfg.taus,
                                 [row[3] for row in rows])],
                         f"dilation study ({cfg.lattice})", "tau", "discrepancy",
                         notes=[f"max/tau=1 ratio {summary[0][4]:.3f}"])
    _write_text(cfg, "dilation.svg", svg)
    return EXIT_OK


def cmd_weights(cfg):
    from .lattice import PointSet, PointUnion
    from .quadrature import qmc_weights, read_pointset_csv
    lat = _lattice(cfg)
    extra = list(cfg.extra_points)
    if cfg.points:
        extra += [tuple(p) for p in read_pointset_csv(cfg.points).points]
    src = PointUnion((lat, PointSet.unweighted(extra))) if extra else lat
    ps = qmc_weights(src, cfg.box, method=cfg.method, check_coverage=not cfg.no_coverage_check)
    rows = [[p[0], p[1], wt] for p, wt in zip(ps.points, ps.weights)]
    write_csv(cfg, "weights.csv", ["x", "y", "weight"], rows)
    _say("points", len(ps))
    _say("det", lat.det)
    if len(ps):
        _say("weight_min", float(ps.weights.min()))
        _say("weight_max", float(ps.weights.max()))
    return EXIT_OK


def cmd_quadrature(cfg):
    from .discrepancy import shift_discrepancy
    from .functions import integrand_by_name
    from .quadrature import partial_l1_norms, quadrature_error
    lat = _lattice(cfg)
    h = integrand_by_name(cfg.integrand)
    r = quadrature_error(h, lat, truncation_radius=cfg.radius)
    n1, n2, n12 = partial_l1_norms(h)
    d = shift_discrepancy(lat, **_dcfg(cfg))
    bound = d.estimate * (n1 + n2 + n12)
    holds = abs(r.error) <= bound
    write_csv(cfg, "quadrature.csv",
              ["integrand", "error_re", "error_im", "integral_re", "integral_im", "sum_re", "sum_im",
               "tail_budget", "radius", "n_points", "norm_d1", "norm_d2", "norm_d12", "D_est", "kh_bound", "kh_holds"],
              [[cfg.integrand, r.error.real, r.error.imag, r.integral.real, r.integral.imag,
                r.qmc_sum.real, r.qmc_sum.imag, r.tail_budget, r.radius, r.n_points,
                n1, n2, n12, d.estimate, bound, holds]])
    _say("error", r.error.real if r.error.imag == 0 else r.error)
    _say("kh_bound", bound)
    _say("kh_holds", holds)
    return EXIT_OK


def cmd_omega(cfg):
    from .gabor import GaussianWindow, omega_argmin, omega_direct, omega_gaussian_closed, omega_numeric
    w = GaussianWindow(cfg.sigma)
    closed = omega_gaussian_closed(cfg.sigma)
    num = omega_numeric(w)
    arg = omega_argmin()
    cols = ["sigma", "omega_closed", "omega_numeric", "norm_g", "norm_Dg", "norm_Zg", "norm_ZDg",
            "deviation", "flagged", "sigma_argmin"]
    row = [cfg.sigma, closed, num.bound, num.norm_g, num.norm_Dg, num.norm_Zg, num.norm_ZDg,
           num.deviation, num.flagged, arg]
    _say("omega_closed", closed)
    _say("omega_numeric", num.bound)
    _say("deviation", num.deviation)
    _say("flagged", num.flagged)
    _say("sigma_argmin", arg)
    if cfg.direct:
        od = omega_direct(w)
        cols.append("omega_direct")
        row.append(od)
        _say("omega_direct", od)
    write_csv(cfg, "omega.csv", cols, [row])
    return EXIT_OK


def cmd_schur(cfg):
    from .certify import schur_epsilon
    from .gabor import GaussianWindow
    s = schur_epsilon(_lattice(cfg), GaussianWindow(cfg.sigma), nu_samples=cfg.nu_samples,
                      eta_step=cfg.eta_step, method=cfg.method, workers=cfg.threads)
    write_csv(cfg, "schur_nu.csv", ["nu_1", "nu_2", "integral_abs_e"], s.per_nu.tolist())
    write_csv(cfg, "schur.csv", ["epsilon", "tail_budget", "poisson_bound"],
              [[s.epsilon, s.tail_budget, "" if s.poisson_bound is None else s.poisson_bound]])
    _say("schur_epsilon", s.epsilon)
    _say("tail_budget", s.tail_budget)
    return EXIT_OK


def cmd_certify(cfg):
    from .certify import certificate, dilation_uniform_certificate, report_row
    from .gabor import GaussianWindow, omega_numeric
    w = GaussianWindow(cfg.sigma)
    if cfg.dilation_uniform:
        c = dilation_uniform_certificate(_base_lattice(cfg), cfg.scale, w, cfg.taus, _dcfg(cfg),
                                         margin_bound=cfg.margin_bound, omega_source=cfg.omega_source)
    else:
        c = certificate(_base_lattice(cfg), cfg.scale, w, _dcfg(cfg), omega_source=cfg.omega_source)
    row = report_row(c, cfg.lattice, omega_numeric(GaussianWindow(c.sigma, c.tau)).bound)
    write_csv(cfg, "certificate.csv", list(row), [list(row.values())])
    for k in ("D_est", "epsilon", "A", "B", "valid"):
        _say(k, row[k])
    return EXIT_OK if c.valid else EXIT_INVALID


def cmd_framebounds(cfg):
    from .certify import FrameModel, empirical_frame_bounds
    from .gabor import GaussianWindow
    from .lattice import lattice_from_name
    model = FrameModel(signal_length=cfg.signal_length, time_span=cfg.time_span, freq_span=cfg.freq_span,
                       test_subspace_dim=cfg.dim, iterations=cfg.iterations, seed=cfg.seed)
    lat = lattice_from_name(cfg.lattice)
    fb = empirical_frame_bounds(lat, cfg.scale, GaussianWindow(cfg.sigma, cfg.tau), model)
    write_csv(cfg, "framebounds.csv",
              ["A_emp", "B_emp", "power_A", "power_B", "iterations_A", "iterations_B", "atoms",
               "boundary_influence", "box_x0", "box_x1", "box_w0", "box_w1"],
              [[fb.A_emp, fb.B_emp, fb.power_A, fb.power_B, *fb.power_iterations, fb.atoms,
                fb.boundary_influence, *fb.phase_box]])
    _say("A_emp", fb.A_emp)
    _say("B_emp", fb.B_emp)
    return EXIT_OK


def _surd_from_text(text: str):
    from .surd import QuadraticSurd
    if text == "phi":
        return QuadraticSurd.golden_ratio()
    if text == "sqrt2":
        return QuadraticSurd.sqrt(2)
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"surd must be phi, sqrt2 or p,q,d,r; got {text!r}")
    return QuadraticSurd(*(int(p) for p in parts))


def cmd_admissibility(cfg):
    from .lattice import admissibility_margin
    from .surd import cf_partial_quotients
    lat = _lattice(cfg)
    m = admissibility_margin(lat, cfg.bound)
    write_csv(cfg, "admissibility.csv", ["margin", "bound"], [[m.margin, m.coefficient_bound]])
    _say("margin", m.margin)
    surds = []
    if lat.exact is not None:
        r, s, u, v = lat.exact
        if s.sign() and v.sign():
            surds += [("r/s", r / s), ("u/v", u / v)]
    surds += [(t, _surd_from_text(t)) for t in cfg.cf]
    if surds:
        rows = []
        for name, x in surds:
            cf = cf_partial_quotients(x, cfg.terms)
            qmax = max(cf.quotients[1:]) if len(cf.quotients) > 1 else None
            rows.append([name, str(x), cf.rational, len(cf.quotients), "" if qmax is None else qmax,
                         "" if cf.preperiod is None else cf.preperiod, "" if cf.period is None else cf.period])
            _say(f"cf_max_quotient[{name}]", "" if qmax is None else qmax)
            _say(f"cf_period[{name}]", "" if cf.period is None else cf.period)
        write_csv(cfg, "continued_fractions.csv",
                  ["name", "value", "rational", "terms", "max_quotient", "preperiod", "period"], rows)
    return EXIT_OK


COMMANDS = {
    "discrepancy": cmd_discrepancy,
    "decay": cmd_decay,
    "dilation": cmd_dilation,
    "weights": cmd_weights,
    "quadrature": cmd_quadrature,
    "omega": cmd_omega,
    "schur": cmd_schur,
    "certify": cmd_certify,
    "framebounds": cmd_framebounds,
    "admissibility": cmd_admissibility,
}


def run(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    status = COMMANDS[cfg.command](cfg)
    print(f"runtime_s, {time.perf_counter() - t0:.3f}", file=sys.stderr)
    return status


def _error_line(kind: str, exc) -> str:
    msg = " ".join(str(exc).split()).replace(",", ";")
    return f"error,{kind},{msg}"


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if any(a in ("-h", "--help") for a in argv):
        try:
            build_parser().parse_args(argv)
        except SystemExit as e:
            return int(e.code or 0)
    try:
        cfg = parse_args(argv)
    except UsageError as e:
        print(_error_line("usage", e), file=sys.stderr)
        return EXIT_ERROR
    try:
        return run(cfg)
    except (ValueError, ArithmeticError, RuntimeError, OSError) as e:
        print(_error_line(type(e).__name__, e), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
