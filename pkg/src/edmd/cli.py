"""Command-line front end.

Subcommands: gen (benchmark data), fit (full EDMD pipeline from a config),
dmd, eval (eigenfunctions on a grid), modes, compare (against oracles),
converge (sample-size study), appendix-check (closed-form Fourier fixture).
Exit codes: 0 success, 2 validation/configuration error, 1 numerical failure.
"""

import argparse
import sys

import numpy as np

from . import benchmarks, io
from .core import (
    DegenerateDictionaryError,
    EigenpairReference,
    convergence_study,
    dmd,
    koopman_matrix,
)
from .dictionaries import from_descriptor
from .numerics import DEFAULT_RTOL, eig_two_sided, fit_loglog_slope, svd

FMT = io.FMT


def _parse_grid(text):
    axes = []
    for seg in text.split(","):
        parts = seg.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid segment {seg!r} is not lo:hi:count")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError(f"grid segment {seg!r} has count < 1")
        axes.append(np.linspace(lo, hi, count))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _parse_index_pairs(text):
    pairs = []
    for seg in text.split(";"):
        a, b = seg.split(",")
        pairs.append((int(a), int(b)))
    return pairs


def _cmd_gen(args):
    seed = args.seed
    if args.system == "lti":
        s = benchmarks.lti_generate(args.m, seed)
    elif args.system == "duffing":
        s = benchmarks.duffing_generate(
            n_traj=args.n_traj,
            samples_per_traj=args.samples_per_traj,
            delta_t=args.delta_t if args.delta_t is not None else 0.25,
            seed=seed,
        )
    elif args.system == "double-well":
        if args.sigma is None:
            raise ValueError("gen double-well: --sigma is required")
        s = benchmarks.double_well_generate(args.sigma, args.m, seed)
    elif args.system == "swiss-roll":
        s3d, s_true = benchmarks.swiss_roll_generate(args.epsilon, args.m, seed)
        io.write_snapshots(s3d, args.out)
        if args.out_true:
            io.write_snapshots(s_true, args.out_true)
        print(f"wrote {args.out}" + (f" and {args.out_true}" if args.out_true else ""))
        return 0
    else:
        raise ValueError(f"unknown system {args.system!r}")
    io.write_snapshots(s, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_fit(args):
    cfg = io.read_config(args.config)
    archive = io.run_experiment(cfg)
    out_dir = io.output_dir_for(cfg)
    print(f"archive: {out_dir}/{cfg.archive_name}")
    print(f"report: {out_dir}/{cfg.report_name}")
    dec = archive.decomposition
    top = ", ".join(FMT % abs(m) for m in dec.mu[: min(5, dec.mu.size)])
    print(f"leading |mu|: {top}")
    return 0


def _cmd_dmd(args):
    s = io.read_snapshots(args.data, delta_t=args.delta_t)
    values, modes = dmd(s, args.rtol)
    n = modes.shape[0]
    header = ["index", "mu_re", "mu_im"]
    if s.delta_t is not None:
        header += ["lambda_re", "lambda_im"]
    for i in range(n):
        header += [f"mode{i + 1}_re", f"mode{i + 1}_im"]
    lines = [",".join(header)]
    for j, mu in enumerate(values):
        cells = [str(j), FMT % mu.real, FMT % mu.imag]
        if s.delta_t is not None:
            lam = np.log(complex(mu)) / s.delta_t if mu != 0 else complex(-np.inf, 0)
            cells += [FMT % lam.real, FMT % lam.imag]
        for i in range(n):
            cells += [FMT % modes[i, j].real, FMT % modes[i, j].imag]
        lines.append(",".join(cells))
    with open(args.out, "w") as f:
        f.write("\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


def _cmd_eval(args):
    archive = io.load_archive(args.archive)
    dec = archive.decomposition
    d = from_descriptor(dec.descriptor)
    points = _parse_grid(args.grid)
    indices = [int(t) for t in args.indices.split(",")]
    for idx in indices:
        if not 0 <= idx < dec.mu.size:
            raise ValueError(f"eigenfunction index {idx} out of range 0..{dec.mu.size - 1}")
    io.eval_grid(dec, d, points, indices, out_path=args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_modes(args):
    archive = io.load_archive(args.archive)
    dec = archive.decomposition
    if dec.modes is None:
        raise ValueError("archive holds no modes")
    n = dec.modes.shape[0]
    header = ["index", "mu_re", "mu_im", "defective"]
    for i in range(n):
        header += [f"v{i + 1}_re", f"v{i + 1}_im"]
    lines = [",".join(header)]
    for j in range(dec.mu.size):
        cells = [str(j), FMT % dec.mu[j].real, FMT % dec.mu[j].imag,
                 str(int(dec.defective[j]))]
        for i in range(n):
            v = dec.modes[i, j]
            if np.isnan(v.real):
                cells += ["", ""]
            else:
                cells += [FMT % v.real, FMT % v.imag]
        lines.append(",".join(cells))
    with open(args.out, "w") as f:
        f.write("\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


def _lti_references(pairs):
    axis = np.linspace(-2.0, 2.0, 51)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    refs = []
    for i, j in pairs:
        mu, phi = benchmarks.lti_true_eigen(i, j)
        refs.append(
            EigenpairReference(value=mu, eigenfunction=phi, points=points, continuous=False)
        )
    return refs


def _double_well_references(sigma, ks, n):
    values, vectors = benchmarks.double_well_fd_oracle(sigma, n)
    grid = -1.0 + (np.arange(n) + 0.5) * (2.0 / n)
    refs = []
    for k in ks:
        if not 0 <= k < n:
            raise ValueError(f"FD eigen index {k} out of range 0..{n - 1}")
        vec = vectors[:, k]

        def phi(points, vec=vec):
            return np.interp(np.asarray(points, dtype=float).ravel(), grid, vec)

        refs.append(
            EigenpairReference(
                value=complex(values[k]),
                eigenfunction=phi,
                points=grid[:, None],
                continuous=True,
            )
        )
    return refs


def _swiss_references(pairs, seed, epsilon, m):
    s3d, _ = benchmarks.swiss_roll_generate(epsilon, m, seed)
    points = s3d.x.T
    refs = []
    for i, j in pairs:
        factor = benchmarks.swiss_true_eigenfunction(i, j)

        def phi(pts, factor=factor):
            return factor(benchmarks.swiss_intrinsic_from_3d(pts))

        refs.append(
            EigenpairReference(
                value=complex(benchmarks.swiss_true_eigenvalue(i, j)),
                eigenfunction=phi,
                points=points,
                continuous=True,
            )
        )
    return refs


def _cmd_compare(args):
    archive = io.load_archive(args.archive)
    dec = archive.decomposition
    d = from_descriptor(dec.descriptor)
    cfg = archive.config or {}
    sp = cfg.get("system_params") or {}
    if args.oracle == "lti":
        pairs = _parse_index_pairs(args.indices or "0,0;1,0;2,0;0,1;3,0;1,1;4,0;2,1;0,2")
        refs = _lti_references(pairs)
    elif args.oracle == "double-well":
        sigma = args.sigma if args.sigma is not None else float(sp.get("sigma", "nan"))
        if not np.isfinite(sigma):
            raise ValueError("compare double-well: --sigma not given and not in archive")
        ks = [int(t) for t in (args.indices or "1").split(",")]
        refs = _double_well_references(sigma, ks, args.fd_n)
    elif args.oracle == "swiss-roll":
        raw = str(sp.get("epsilon", "none")).strip().lower()
        epsilon = args.epsilon if args.epsilon is not None else (
            None if raw in ("", "none") else float(raw)
        )
        seed = archive.seed if archive.seed is not None else 0
        m = dec.m_count or int(cfg.get("m_count", 10000))
        pairs = _parse_index_pairs(args.indices or "1,0;0,1")
        refs = _swiss_references(pairs, seed, epsilon, m)
    else:
        raise ValueError(f"unknown oracle {args.oracle!r}")
    rows = io.compare_to_oracle(dec, refs, d, out_path=args.out)
    for r in rows:
        print(
            f"ref {r.reference:.6g} -> index {r.comp_index}, "
            f"computed {r.computed:.6g}, rel_err {r.rel_err:.3g}, "
            f"corr {r.corr_modulus:.4f}"
        )
    if args.out:
        print(f"wrote {args.out}")
    return 0


def _cmd_converge(args):
    m_values = [int(t) for t in args.m_values.split(",")]
    seeds = [int(t) for t in args.seeds.split(",")]
    d = benchmarks.double_well_dictionary(args.order)
    reference = benchmarks.double_well_reference(args.sigma, args.fd_n)

    val_errs = []
    fun_errs = []
    slopes = []
    for seed in seeds:
        def gen(m, seed=seed):
            return benchmarks.double_well_generate(args.sigma, m, seed)

        result = convergence_study(gen, d, m_values, reference, rtol=args.rtol)
        val_errs.append(result.eigenvalue_errors)
        fun_errs.append(result.eigenfunction_errors)
        slopes.append(result.slope)
    val_mean = np.mean(val_errs, axis=0)
    fun_mean = np.mean(fun_errs, axis=0)
    lines = ["m,eigenvalue_error,eigenfunction_error"]
    for i, m in enumerate(m_values):
        lines.append(f"{m},{FMT % val_mean[i]},{FMT % fun_mean[i]}")
    with open(args.out, "w") as f:
        f.write("\n".join(lines) + "\n")
    slope = fit_loglog_slope(
        np.asarray(m_values, dtype=float), np.maximum(fun_mean, np.finfo(float).tiny)
    )
    print(f"wrote {args.out}")
    print(f"slope {slope:.4f} (per-seed: {', '.join('%.4f' % s for s in slopes)})")
    return 0


def _cmd_appendix_check(args):
    gp = benchmarks.appendix_matrices(args.k_param)
    k = koopman_matrix(gp, args.rtol)
    two = eig_two_sided(k)
    sing = svd(gp.g).singular_values
    rank = int((sing > args.rtol * sing[0]).sum())
    size = gp.g.shape[0]
    half = args.k_param // 2
    span_rank = 4 * half
    counts = {}
    for v in two.values:
        key = int(round(v.real))
        counts[key] = counts.get(key, 0) + 1
    lines = ["quantity,value"]
    lines.append(f"k_param,{args.k_param}")
    lines.append(f"matrix_size,{size}")
    lines.append(f"rank_g,{rank}")
    lines.append(f"nullity_g,{size - rank}")
    lines.append(f"index_span_rank,{span_rank}")
    lines.append(f"index_span_nullity,{size - span_rank}")
    for key in sorted(counts, reverse=True):
        lines.append(f"eigenvalue_{key},{counts[key]}")
    lines.append(
        "note,the index map realizes m+n in "
        f"[{-2 * half}..{2 * half - 2}] only; the span tally "
        f"[{-2 * half}..{2 * half - 1}] overcounts the rank by one"
    )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="edmd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate benchmark snapshot data")
    g.add_argument("--system", required=True,
                   choices=["lti", "duffing", "double-well", "swiss-roll"])
    g.add_argument("--m", type=int, default=10000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sigma", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--n-traj", type=int, default=1000)
    g.add_argument("--samples-per-traj", type=int, default=11)
    g.add_argument("--delta-t", type=float)
    g.add_argument("--out", required=True)
    g.add_argument("--out-true", help="swiss-roll: also write intrinsic pairs here")
    g.set_defaults(func=_cmd_gen)

    f = sub.add_parser("fit", help="run the EDMD pipeline from a config file")
    f.add_argument("--config", required=True)
    f.set_defaults(func=_cmd_fit)

    d = sub.add_parser("dmd", help="standard DMD on a snapshot CSV")
    d.add_argument("--data", required=True)
    d.add_argument("--delta-t", type=float)
    d.add_argument("--rtol", type=float, default=DEFAULT_RTOL)
    d.add_argument("--out", required=True)
    d.set_defaults(func=_cmd_dmd)

    e = sub.add_parser("eval", help="evaluate archived eigenfunctions on a grid")
    e.add_argument("--archive", required=True)
    e.add_argument("--grid", required=True, help="per-axis lo:hi:count, comma separated")
    e.add_argument("--indices", required=True, help="comma-separated eigenvalue indices")
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_eval)

    m = sub.add_parser("modes", help="dump archived modes as CSV")
    m.add_argument("--archive", required=True)
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_modes)

    c = sub.add_parser("compare", help="compare an archive against an oracle")
    c.add_argument("--archive", required=True)
    c.add_argument("--oracle", required=True,
                   choices=["lti", "double-well", "swiss-roll"])
    c.add_argument("--indices", help="lti/swiss: i,j pairs joined by ';' "
                                     "double-well: FD eigen indices")
    c.add_argument("--sigma", type=float)
    c.add_argument("--epsilon", type=float)
    c.add_argument("--fd-n", type=int, default=1024)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_compare)

    v = sub.add_parser("converge", help="double-well sample-size convergence study")
    v.add_argument("--sigma", type=float, default=1.0)
    v.add_argument("--m-values", default="1000,10000,100000")
    v.add_argument("--seeds", default="0")
    v.add_argument("--order", type=int, default=9)
    v.add_argument("--fd-n", type=int, default=1024)
    v.add_argument("--rtol", type=float, default=DEFAULT_RTOL)
    v.add_argument("--out", required=True)
    v.set_defaults(func=_cmd_converge)

    a = sub.add_parser("appendix-check", help="closed-form Fourier fixture report")
    a.add_argument("--k-param", type=int, default=8)
    a.add_argument("--rtol", type=float, default=DEFAULT_RTOL)
    a.add_argument("--out")
    a.set_defaults(func=_cmd_appendix_check)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateDictionaryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
