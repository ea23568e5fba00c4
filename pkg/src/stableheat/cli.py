"""Command-line entry point: checks, simulations, and result emission.

Subcommands: kernel-check, noise-check, mollifier-check, simulate, moments,
modulus, converge.  Each writes CSV tables (the record), SVG line plots
(convenience), and a manifest.json with the fully resolved configuration
and master seed.  Exit status: 0 if every invoked check passed its stated
tolerance, 1 with the failing criterion named, 2 for invalid configuration.

Re-running a subcommand with the same resolved config and seed yields
byte-identical outputs at any worker count; STABLEHEAT_THREADS caps the
configured worker count.
"""

import argparse
import functools
import json
import math
import os
import sys

import numpy as np
from scipy import integrate

from . import diagnostics as diag
from . import svg
from .coefficients import CoefficientSpec, lipschitz_estimate, mollifier_test_points
from .config import ConfigError, load_config, locate_key
from .errors import ConfigurationError, ExplosionError
from .heat_kernel import (
    KernelConfig,
    chapman_kolmogorov_defect,
    eval_kernel,
    kernel_lp_integral,
)
from .parallel import parallel_map
from .solver import default_test_function, pair_with_test_function, solve_path
from .stable_noise import (
    StableNoiseSpec,
    big_jump_intensity,
    compensation_constants,
    measure_abs_moment,
    replica_stream,
    sample_increment_field,
)

SEMIGROUP_TOL = 1e-6
SLOPE_TOL = 0.05
MOLLIFIER_TOL = 1e-2
QUAD_REL_TOL = 1e-6


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(outdir, subcommand, cfg):
    payload = {"subcommand": subcommand, "config": cfg.manifest_dict()}
    with open(os.path.join(outdir, "manifest.json"), "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- jump-measure quadrature oracle (check side of the dual route) --------


def _nu_quad(noise, integrand_power, lo, hi):
    def density(z):
        return z ** (-noise.alpha - 1.0)

    val, _ = integrate.quad(
        lambda z: z**integrand_power * density(z), lo, hi, epsabs=0.0, epsrel=1e-10
    )
    return val


def _abs_moment_quad(noise, p):
    # both signs: c_plus + c_minus = 1 collapses to one integral of z^p
    return (noise.c_plus + noise.c_minus) * _nu_quad(noise, p, 0.0, noise.K)


# -- subcommand: kernel-check ---------------------------------------------


def cmd_kernel_check(cfg, outdir):
    g = cfg.grid
    kcfg = KernelConfig(L=g.L, tol=1e-10)
    scale = g.L**2
    rows = []
    failures = []

    pairs = [(0.01 * scale, 0.02 * scale), (0.05 * scale, 0.05 * scale), (0.1 * scale, 0.2 * scale)]
    for s, t in pairs:
        defect = chapman_kolmogorov_defect(kcfg, s, t, 202)
        rows.append(("semigroup", t, s, "", defect, SEMIGROUP_TOL))
        if not defect < SEMIGROUP_TOL:
            failures.append(f"semigroup defect {defect:.3g} at (s={s}, t={t})")

    times = np.logspace(-5, -3, 7) * scale
    p_set = sorted({1.0, 1.5, 2.0, *cfg.p_list})
    decay_series = []
    for p in p_set:
        slope, resid = diag.kernel_decay_fit(kcfg, p, times)
        target = -(p - 1.0) / 2.0
        rows.append(("lp_decay_slope", "", "", p, slope, abs(slope - target)))
        if not abs(slope - target) < SLOPE_TOL:
            failures.append(
                f"lp decay slope {slope:.4f} vs {target:.4f} at p={p}"
            )
        vals = [kernel_lp_integral(kcfg, t, 0.5 * g.L, p) for t in times]
        decay_series.append((f"p={p}", list(times), vals))

    mass_times = np.array([1e-3, 1e-2, 5e-2, 1e-1, 5e-1]) * scale
    prev = None
    for t in mass_times:
        mass = kernel_lp_integral(kcfg, t, 0.5 * g.L, 1.0)
        bound = 1.0 + kcfg.tol
        rows.append(("mass", t, "", 1.0, mass, bound))
        if not mass <= bound:
            failures.append(f"kernel mass {mass:.6g} exceeds 1 at t={t}")
        if prev is not None and mass > prev + 1e-12:
            failures.append(f"kernel mass not contracting at t={t}")
        prev = mass

    xs = np.linspace(0.1, 0.9, 7) * g.L
    asym = 0.0
    for t in (1e-3 * scale, 1e-2 * scale, 1e-1 * scale):
        gm = eval_kernel(kcfg, t, xs[:, None], xs[None, :])
        asym = max(asym, float(np.max(np.abs(gm - gm.T))))
        ys = np.linspace(0.0, g.L, 33)
        bmax = float(
            max(
                np.max(np.abs(eval_kernel(kcfg, t, np.zeros(1), ys[None, :]))),
                np.max(np.abs(eval_kernel(kcfg, t, np.full(1, g.L), ys[None, :]))),
            )
        )
        rows.append(("boundary", t, "", "", bmax, kcfg.tol))
        if not bmax <= kcfg.tol:
            failures.append(f"boundary value {bmax:.3g} above tol at t={t}")
    rows.append(("symmetry", "", "", "", asym, 1e-12))
    if not asym <= 1e-12:
        failures.append(f"kernel asymmetry {asym:.3g}")

    _write_csv(
        os.path.join(outdir, "kernel.csv"),
        ["check", "t", "s", "p", "value", "bound_or_defect"],
        rows,
    )
    svg.line_plot(
        os.path.join(outdir, "kernel.svg"),
        "kernel Lp integral vs t",
        "t",
        "integral",
        decay_series,
        logx=True,
        logy=True,
    )
    return failures


# -- subcommand: noise-check ----------------------------------------------


def cmd_noise_check(cfg, outdir):
    noise = cfg.noise
    rows = []
    failures = []

    def closed_form_row(check, p, value, target):
        defect = abs(value - target) / max(abs(target), 1e-300)
        rows.append((check, noise.alpha, noise.K, noise.eps, p, value, target, defect))
        if not defect < QUAD_REL_TOL:
            failures.append(f"{check} closed form off by {defect:.3g} (p={p})")

    for p in (noise.alpha + 0.3, noise.alpha + 0.6, 2.0):
        if p <= noise.alpha:
            continue
        closed_form_row(
            "abs_moment", p, measure_abs_moment(noise, p), _abs_moment_quad(noise, p)
        )
    closed_form_row(
        "big_jump_intensity",
        "",
        big_jump_intensity(noise),
        (noise.c_plus + noise.c_minus) * _nu_quad(noise, 0.0, noise.eps, noise.K)
        if noise.eps < noise.K
        else 0.0,
    )
    mean_big, var_small = compensation_constants(noise)
    closed_form_row(
        "mean_big",
        1.0,
        mean_big,
        (noise.c_plus - noise.c_minus) * _nu_quad(noise, 1.0, noise.eps, noise.K)
        if noise.eps < noise.K
        else 0.0,
    )
    closed_form_row(
        "var_small", 2.0, var_small, (noise.c_plus + noise.c_minus) * _nu_quad(noise, 2.0, 0.0, noise.eps)
    )

    # statistical compensation check on >= 1e5 cells
    g = cfg.grid
    cells = g.nt * g.nx
    reps = max(1, math.ceil(100_000 / cells))
    samples = []
    for r in range(reps):
        stream = replica_stream(cfg.master_seed, r)
        samples.append(sample_increment_field(noise, g, stream).values.ravel())
    vals = np.concatenate(samples)
    m = g.dt * g.dx
    se_mean = vals.std(ddof=1) / math.sqrt(vals.size)
    zscore = abs(vals.mean()) / se_mean
    rows.append(("compensation_mean", noise.alpha, noise.K, noise.eps, "", vals.mean(), 0.0, zscore))
    if not zscore < 4.0:
        failures.append(f"compensated mean {vals.mean():.3g} is {zscore:.2f} stderr from 0")

    sq = vals**2
    if noise.small_jump_mode == "gaussian":
        target2 = m * noise.K ** (2.0 - noise.alpha) / (2.0 - noise.alpha)
    else:
        target2 = m * (
            noise.K ** (2.0 - noise.alpha) - noise.eps ** (2.0 - noise.alpha)
        ) / (2.0 - noise.alpha)
    se2 = sq.std(ddof=1) / math.sqrt(sq.size)
    z2 = abs(sq.mean() - target2) / se2
    rows.append(("second_moment", noise.alpha, noise.K, noise.eps, 2.0, sq.mean(), target2, z2))
    if not z2 < 3.0:
        failures.append(f"second moment {sq.mean():.3g} is {z2:.2f} stderr from {target2:.3g}")

    _write_csv(
        os.path.join(outdir, "noise.csv"),
        ["check", "alpha", "K", "eps", "p", "value", "target", "defect"],
        rows,
    )
    mags = np.sort(np.abs(vals[vals != 0.0]))[::-1]
    if mags.size:
        take = mags[: min(mags.size, 400)]
        svg.line_plot(
            os.path.join(outdir, "noise.svg"),
            "largest |increments| (rank order)",
            "rank",
            "|increment|",
            [("increments", list(range(1, take.size + 1)), take.tolist())],
            logy=True,
        )
    return failures


# -- subcommand: mollifier-check -------------------------------------------


def _builtin_reps():
    return [
        CoefficientSpec.linear(1.0, 2.0),
        CoefficientSpec.power(0.5),
        CoefficientSpec.sqrt_pos(),
        CoefficientSpec.stepstone(),
        CoefficientSpec.constant(0.5),
    ]


def cmd_mollifier_check(cfg, outdir):
    rows = []
    failures = []
    pts = mollifier_test_points()
    levels = [n for n in cfg.n_list if n >= 1] or [4, 16, 64, 256]
    n_top = max(max(levels), 256)
    curves = []
    for spec in _builtin_reps():
        raw = spec.raw(pts)
        err = float(np.max(np.abs(spec.with_level(n_top).eval(pts) - raw)))
        rows.append((spec.family, n_top, "sup_error", err, MOLLIFIER_TOL))
        if not err < MOLLIFIER_TOL:
            failures.append(f"mollifier sup error {err:.3g} for {spec.family} at n={n_top}")
        for n in levels:
            lip = lipschitz_estimate(spec.with_level(n), -2.0, 2.0)
            rows.append((spec.family, n, "lipschitz", lip, math.inf))
            if not math.isfinite(lip):
                failures.append(f"lipschitz estimate not finite for {spec.family} at n={n}")
        us = np.linspace(-2.0, 2.0, 161)
        curves.append((f"{spec.family} raw", us.tolist(), spec.raw(us).tolist()))
        curves.append(
            (f"{spec.family} n=16", us.tolist(), spec.with_level(16).eval(us).tolist())
        )
    _write_csv(
        os.path.join(outdir, "mollifier.csv"),
        ["family", "n", "check", "value", "threshold"],
        rows,
    )
    svg.line_plot(
        os.path.join(outdir, "mollifier.svg"),
        "coefficients and level-16 mollifications",
        "u",
        "value",
        curves,
    )
    return failures


# -- subcommand: simulate ---------------------------------------------------


def _simulate_one(replica_id, grid, ic, coeff, noise, p, psi, master_seed):
    try:
        path = solve_path(grid, ic, coeff, noise, master_seed, replica_id)
    except ExplosionError as exc:
        return replica_id, exc.step, None, None
    norms = diag.lp_norm_p(path.u, p, grid.dx)
    pairing = pair_with_test_function(path, psi)
    return replica_id, None, norms, pairing


def cmd_simulate(cfg, outdir):
    g = cfg.grid
    p = cfg.p_list[0]
    psi = default_test_function(g)
    worker = functools.partial(
        _simulate_one,
        grid=g,
        ic=cfg.ic,
        coeff=cfg.coeff,
        noise=cfg.noise,
        p=p,
        psi=psi,
        master_seed=cfg.master_seed,
    )
    results = parallel_map(worker, range(cfg.replicas), cfg.workers)
    rows = []
    exploded = 0
    plot = []
    for replica_id, bad_step, norms, pairing in results:
        if norms is None:
            exploded += 1
            continue
        times = g.dt * np.arange(g.nt + 1)
        for j in range(g.nt + 1):
            rows.append((replica_id, j, float(times[j]), float(norms[j]), float(pairing[j])))
        if len(plot) < 4:
            plot.append((f"replica {replica_id}", times.tolist(), norms.tolist()))
    _write_csv(
        os.path.join(outdir, "simulate.csv"),
        ["replica", "step", "time", "lp_pow", "pairing"],
        rows,
    )
    svg.line_plot(
        os.path.join(outdir, "simulate.svg"),
        f"||u_t||_p^p per replica (p={p})",
        "t",
        "lp_pow",
        plot,
    )
    if exploded:
        print(f"simulate: {exploded} of {cfg.replicas} replicas exploded")
    return []


# -- subcommand: moments ----------------------------------------------------


def cmd_moments(cfg, outdir):
    rows = []
    failures = []
    series = []
    for p in cfg.p_list:
        ests = []
        for n in cfg.n_list:
            est = diag.estimate_sup_moment(
                cfg.grid,
                cfg.ic,
                cfg.coeff.with_level(n),
                cfg.noise,
                p,
                cfg.replicas,
                cfg.master_seed,
                workers=cfg.workers,
            )
            rows.append(
                (
                    n,
                    cfg.noise.alpha,
                    p,
                    cfg.noise.K,
                    cfg.noise.eps,
                    est.used,
                    est.estimate,
                    est.stderr,
                )
            )
            ests.append(est)
            if est.explosions:
                print(f"moments: {est.explosions} explosions at n={n}, p={p}")
        failures.extend(uniformity_violations(cfg.n_list, ests, label=f"p={p}"))
        series.append(
            (f"p={p}", [float(n) for n in cfg.n_list], [e.estimate for e in ests])
        )
    _write_csv(
        os.path.join(outdir, "moments.csv"),
        ["n", "alpha", "p", "K", "eps", "replicas", "estimate", "stderr"],
        rows,
    )
    svg.line_plot(
        os.path.join(outdir, "moments.svg"),
        "sup-moment estimate vs mollification level",
        "n",
        "estimate",
        series,
        logx=True,
    )
    return failures


def uniformity_violations(levels, estimates, label="", z=3.0):
    """Levels whose estimate exceeds the across-level mean by > z combined SE."""
    k = len(estimates)
    if k < 2:
        return []
    means = np.array([e.estimate for e in estimates])
    ses = np.array([e.stderr for e in estimates])
    grand = means.mean()
    out = []
    for i, n in enumerate(levels):
        var = (1.0 - 1.0 / k) ** 2 * ses[i] ** 2 + (
            np.sum(ses**2) - ses[i] ** 2
        ) / k**2
        excess = means[i] - grand
        if excess > z * math.sqrt(var):
            out.append(
                f"sup moment at n={n} ({label}) exceeds level mean by "
                f"{excess:.4g} > {z} combined stderr ({math.sqrt(var):.4g})"
            )
    return out


# -- subcommand: modulus ----------------------------------------------------


def cmd_modulus(cfg, outdir):
    rows = []
    failures = []
    t_series = []
    for p in cfg.p_list:
        for n in cfg.n_list:
            coeff = cfg.coeff.with_level(n)
            res = diag.temporal_modulus(
                cfg.grid,
                cfg.ic,
                coeff,
                cfg.noise,
                p,
                cfg.deltas,
                cfg.replicas,
                cfg.master_seed,
                workers=cfg.workers,
            )
            for pt in res.points:
                rows.append(("temporal", pt.offset, p, n, pt.estimate, pt.stderr))
            ordered = sorted(res.points, key=lambda r: r.offset, reverse=True)
            for a, b in zip(ordered, ordered[1:]):
                if b.estimate > a.estimate + 2.0 * math.hypot(a.stderr, b.stderr):
                    failures.append(
                        f"temporal modulus rose from delta={a.offset:.4g} to "
                        f"delta={b.offset:.4g} beyond 2 stderr (p={p}, n={n})"
                    )
            t_series.append(
                (
                    f"p={p} n={n}",
                    [pt.offset for pt in res.points],
                    [pt.estimate for pt in res.points],
                )
            )
            spat = diag.estimate_spatial_modulus(
                cfg.grid,
                cfg.ic,
                coeff,
                cfg.noise,
                p,
                cfg.shifts,
                cfg.replicas,
                cfg.master_seed,
                workers=cfg.workers,
            )
            for pt in spat.points:
                rows.append(("spatial", pt.offset, p, n, pt.estimate, pt.stderr))
    _write_csv(
        os.path.join(outdir, "modulus.csv"),
        ["kind", "delta_or_shift", "p", "n", "estimate", "stderr"],
        rows,
    )
    svg.line_plot(
        os.path.join(outdir, "modulus.svg"),
        "temporal modulus vs delta",
        "delta",
        "estimate",
        t_series,
    )
    return failures


# -- subcommand: converge ----------------------------------------------------


def cmd_converge(cfg, outdir):
    levels = list(cfg.n_list)
    if len(levels) < 2:
        raise ConfigError("experiment", "n_list", "converge needs at least 2 levels")
    samples = {}
    for i, n in enumerate(levels):
        vals = diag.pairing_samples(
            cfg.grid,
            cfg.ic,
            cfg.coeff.with_level(n),
            cfg.noise,
            cfg.replicas,
            cfg.master_seed,
            replica_offset=i * cfg.replicas,  # disjoint blocks: independent levels
            workers=cfg.workers,
        )
        kept = vals[~np.isnan(vals)]
        if kept.size == 0:
            raise ConfigurationError(f"all replicas exploded at level n={n}")
        samples[n] = kept
    rows = []
    for idx, (lo, hi) in enumerate(zip(levels, levels[1:])):
        ks = diag.ks_distance(samples[lo], samples[hi])
        stream = replica_stream(cfg.master_seed, 999_999_000 + idx)
        ci_lo, ci_hi = diag.bootstrap_ks_ci(samples[lo], samples[hi], stream)
        rows.append((lo, hi, ks, ci_lo, ci_hi))
    _write_csv(
        os.path.join(outdir, "converge.csv"),
        ["n_lo", "n_hi", "ks", "boot_ci_lo", "boot_ci_hi"],
        rows,
    )
    svg.line_plot(
        os.path.join(outdir, "converge.svg"),
        "KS distance between consecutive levels",
        "pair index",
        "ks",
        [
            ("ks", list(range(len(rows))), [r[2] for r in rows]),
            ("ci_lo", list(range(len(rows))), [r[3] for r in rows]),
            ("ci_hi", list(range(len(rows))), [r[4] for r in rows]),
        ],
    )
    failures = []
    first, last = rows[0], rows[-1]
    if last[4] < first[3]:
        print(
            f"converge: CONFIRMED ks({last[0]},{last[1]})={last[2]:.4f} < "
            f"ks({first[0]},{first[1]})={first[2]:.4f} with 90% CI separation"
        )
    elif last[3] > first[4]:
        failures.append(
            f"ks chain refuted: ks({last[0]},{last[1]}) CI [{last[3]:.4f},{last[4]:.4f}] "
            f"sits above ks({first[0]},{first[1]}) CI [{first[3]:.4f},{first[4]:.4f}]"
        )
    else:
        print(
            "converge: INCONCLUSIVE — "
            f"ks({first[0]},{first[1]})={first[2]:.4f} CI [{first[3]:.4f},{first[4]:.4f}] vs "
            f"ks({last[0]},{last[1]})={last[2]:.4f} CI [{last[3]:.4f},{last[4]:.4f}]"
        )
    return failures


# -- driver -----------------------------------------------------------------

_COMMANDS = {
    "kernel-check": cmd_kernel_check,
    "noise-check": cmd_noise_check,
    "mollifier-check": cmd_mollifier_check,
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "modulus": cmd_modulus,
    "converge": cmd_converge,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stableheat",
        description="simulation and verification suite for the jump-driven heat equation",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="INI config file")
        sp.add_argument("--seed", type=int, default=None, help="master seed override")
        sp.add_argument("--out", default=None, help="output directory override")
        sp.add_argument("--replicas", type=int, default=None)
        sp.add_argument("--regime", choices=("theorem-2.4", "theorem-2.5"), default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "out": args.out,
        "replicas": args.replicas,
        "regime": args.regime,
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        line = locate_key(args.config, exc.section, exc.key)
        anchor = f"{args.config}:{line}: " if line else (f"{args.config}: " if args.config else "")
        print(f"config error: {anchor}{exc}", file=sys.stderr)
        return 2
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    env_workers = os.environ.get("STABLEHEAT_THREADS")
    if env_workers is not None:
        try:
            cfg.workers = max(1, int(env_workers))
        except ValueError:
            print(f"config error: STABLEHEAT_THREADS={env_workers!r}", file=sys.stderr)
            return 2

    outdir = cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    _write_manifest(outdir, args.subcommand, cfg)
    try:
        failures = _COMMANDS[args.subcommand](cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if failures:
        for f in failures:
            print(f"FAIL {args.subcommand}: {f}", file=sys.stderr)
        return 1
    print(f"PASS {args.subcommand}: outputs in {outdir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
