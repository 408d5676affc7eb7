"""Persistence and orchestration: snapshot CSV files, experiment configs,
decomposition archives, and the comparison/report generators the CLI drives.

CSV numbers are written with 17 significant digits so re-ingestion is
bit-exact. Archives are JSON documents (schema_version 1) holding the full
decomposition plus enough provenance (config, seed, hash) to re-derive
themselves.
"""

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import benchmarks
from .core import (
    SnapshotSet,
    KoopmanDecomposition,
    accumulate_gram,
    decompose,
    evaluate_eigenfunctions,
    koopman_matrix,
)
from .dictionaries import (
    build_box_tree,
    from_descriptor,
    full_state_weights,
    fourier_pair_dictionary,
    hermite_dictionary,
    spectral_element_dictionary,
    state_dictionary,
    thin_plate_rbf_dictionary,
)
from .numerics import DEFAULT_RTOL, kmeans

FMT = "%.17g"

SYSTEMS = ("lti", "duffing", "double-well", "swiss-roll", "external-file")
FAMILIES = ("hermite", "thin_plate_rbf", "spectral_element", "state", "fourier_pair")


def write_snapshots(s, path):
    """Snapshot pairs as CSV: header x1..xN,y1..yN, one pair per row."""
    n = s.n
    header = ",".join([f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)])
    data = np.vstack([s.x, s.y]).T
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=FMT)


def read_snapshots(path, delta_t=None):
    """Parse a snapshot CSV back into paired matrices.

    Malformed input (ragged or non-numeric rows, missing data) raises with
    the offending 1-based line number.
    """
    with open(path) as f:
        header = f.readline()
        if not header:
            raise ValueError(f"{path}: empty file")
        fields = [c.strip() for c in header.strip().split(",")]
        if len(fields) < 2 or len(fields) % 2:
            raise ValueError(
                f"{path}: header must list x1..xN,y1..yN (even count >= 2), "
                f"got {len(fields)} fields"
            )
        n = len(fields) // 2
        rows = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 * n:
                raise ValueError(
                    f"{path} line {lineno}: expected {2 * n} fields, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise ValueError(f"{path} line {lineno}: non-numeric field") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows)
    return SnapshotSet(x=arr[:, :n].T, y=arr[:, n:].T, delta_t=delta_t)


@dataclass
class ExperimentConfig:
    """One experiment: data source, dictionary, truncation, and outputs.

    `system_params` and `dictionary` keep their values as strings exactly as
    they appear in the config file; they are parsed where used, so a config
    round-trips losslessly through read_config/write_config.
    """

    system: str
    system_params: dict = field(default_factory=dict)
    dictionary: dict = field(default_factory=dict)
    rtol: float = DEFAULT_RTOL
    seed: int = 0
    m_count: int = 10000
    delta_t: float = None
    output_dir: str = "."
    archive_name: str = "archive.json"
    report_name: str = "report.csv"


def read_config(path):
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ValueError(f"config not readable: {path}")
    if "system" not in cp or "name" not in cp["system"]:
        raise ValueError(f"{path}: missing [system] section with a name key")
    sys_sec = dict(cp["system"])
    system = sys_sec.pop("name")
    if system not in SYSTEMS:
        raise ValueError(f"{path}: unknown system {system!r}, expected one of {SYSTEMS}")
    seed = int(sys_sec.pop("seed", "0"))
    m_count = int(sys_sec.pop("m", "10000"))
    delta_t = sys_sec.pop("delta_t", None)
    delta_t = float(delta_t) if delta_t is not None else None

    dictionary = dict(cp["dictionary"]) if "dictionary" in cp else {}
    family = dictionary.get("family")
    if family not in FAMILIES:
        raise ValueError(f"{path}: unknown dictionary family {family!r}")

    rtol = float(cp.get("edmd", "rtol", fallback=str(DEFAULT_RTOL)))
    out = cp["output"] if "output" in cp else {}
    return ExperimentConfig(
        system=system,
        system_params=sys_sec,
        dictionary=dictionary,
        rtol=rtol,
        seed=seed,
        m_count=m_count,
        delta_t=delta_t,
        output_dir=out.get("dir", "."),
        archive_name=out.get("archive", "archive.json"),
        report_name=out.get("report", "report.csv"),
    )


def write_config(cfg, path):
    cp = configparser.ConfigParser()
    cp["system"] = {"name": cfg.system, "seed": str(cfg.seed), "m": str(cfg.m_count)}
    if cfg.delta_t is not None:
        cp["system"]["delta_t"] = repr(cfg.delta_t)
    cp["system"].update(cfg.system_params)
    cp["dictionary"] = dict(cfg.dictionary)
    cp["edmd"] = {"rtol": repr(cfg.rtol)}
    cp["output"] = {
        "dir": cfg.output_dir,
        "archive": cfg.archive_name,
        "report": cfg.report_name,
    }
    with open(path, "w") as f:
        cp.write(f)


def _get_int(spec, key, default=None):
    if key in spec:
        return int(spec[key])
    if default is None:
        raise ValueError(f"dictionary spec: missing required key {key!r}")
    return default


def _get_bool(spec, key, default=False):
    raw = spec.get(key)
    if raw is None:
        return default
    return str(raw).strip().lower() in ("1", "true", "yes", "on")


def _get_floats(spec, key):
    return [float(v) for v in str(spec[key]).split(",")]


def build_dictionary(spec, data=None, seed=0):
    """Construct a dictionary from a flat config mapping.

    Data-dependent families (thin-plate centers from k-means, box trees from
    sample hulls) need the snapshot set; purely parametric families do not.
    """
    family = spec.get("family")
    if family == "hermite":
        dim = _get_int(spec, "dim", data.n if data is not None else None)
        return hermite_dictionary(dim, _get_int(spec, "max_order"))
    if family == "state":
        return state_dictionary(_get_int(spec, "n", data.n if data is not None else None))
    if family == "fourier_pair":
        return fourier_pair_dictionary(_get_int(spec, "k_param"))
    if family == "thin_plate_rbf":
        include_constant = _get_bool(spec, "include_constant", True)
        if "kmeans_k" in spec:
            if data is None:
                raise ValueError("thin_plate_rbf with kmeans_k needs data")
            result = kmeans(data.x.T, _get_int(spec, "kmeans_k"), seed)
            centers = result.centers
        else:
            raise ValueError("thin_plate_rbf spec needs kmeans_k")
        return thin_plate_rbf_dictionary(centers, include_constant)
    if family == "spectral_element":
        if data is None:
            raise ValueError("spectral_element spec needs data to build the box tree")
        if "root_lo" in spec and "root_hi" in spec:
            lo = np.array(_get_floats(spec, "root_lo"))
            hi = np.array(_get_floats(spec, "root_hi"))
        else:
            both = np.hstack([data.x, data.y])
            lo = both.min(axis=1) - 1e-9
            hi = both.max(axis=1) + 1e-9
        tree = build_box_tree(
            data.x.T,
            (lo, hi),
            _get_int(spec, "max_points", 1),
            _get_int(spec, "max_depth", 4),
        )
        return spectral_element_dictionary(
            tree, _get_int(spec, "order", 1), _get_bool(spec, "tensor", False)
        )
    raise ValueError(f"unknown dictionary family: {family!r}")


def generate_system(cfg):
    """Produce the snapshot set for a config; swiss-roll also returns the
    intrinsic-coordinate pairs in the extras mapping."""
    sp = cfg.system_params
    if cfg.system == "lti":
        return benchmarks.lti_generate(cfg.m_count, cfg.seed), {}
    if cfg.system == "duffing":
        return (
            benchmarks.duffing_generate(
                n_traj=int(sp.get("n_traj", "1000")),
                samples_per_traj=int(sp.get("samples_per_traj", "11")),
                delta_t=cfg.delta_t if cfg.delta_t is not None else 0.25,
                seed=cfg.seed,
            ),
            {},
        )
    if cfg.system == "double-well":
        if "sigma" not in sp:
            raise ValueError("double-well system needs a sigma parameter")
        return (
            benchmarks.double_well_generate(float(sp["sigma"]), cfg.m_count, cfg.seed),
            {},
        )
    if cfg.system == "swiss-roll":
        raw = sp.get("epsilon", "none").strip().lower()
        epsilon = None if raw in ("", "none") else float(raw)
        s3d, s_true = benchmarks.swiss_roll_generate(epsilon, cfg.m_count, cfg.seed)
        return s3d, {"s_true": s_true}
    if cfg.system == "external-file":
        if "path" not in sp:
            raise ValueError("external-file system needs a path parameter")
        return read_snapshots(sp["path"], delta_t=cfg.delta_t), {}
    raise ValueError(f"unknown system: {cfg.system!r}")


@dataclass
class DecompositionArchive:
    decomposition: KoopmanDecomposition
    seed: int = None
    system: str = None
    config: dict = None
    config_hash: str = None
    schema_version: int = 1


def _complex_out(arr):
    if arr is None:
        return None
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _complex_in(obj):
    if obj is None:
        return None
    arr = np.asarray(obj, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def write_archive(archive, path):
    dec = archive.decomposition
    doc = {
        "schema_version": archive.schema_version,
        "mu": _complex_out(dec.mu),
        "lambda": _complex_out(dec.lam),
        "xi": _complex_out(dec.xi),
        "w": _complex_out(dec.w),
        "modes": _complex_out(dec.modes),
        "defective": np.asarray(dec.defective, dtype=bool).tolist(),
        "descriptor": dec.descriptor,
        "rtol": dec.rtol,
        "delta_t": dec.delta_t,
        "counts": {"n": dec.n_count, "k": dec.k_count, "m": dec.m_count},
        "seed": archive.seed,
        "system": archive.system,
        "config": archive.config,
        "config_hash": archive.config_hash,
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_archive(path):
    with open(path) as f:
        doc = json.load(f)
    version = doc.get("schema_version")
    if version != 1:
        raise ValueError(f"{path}: unsupported archive schema_version {version!r}")
    counts = doc.get("counts", {})
    dec = KoopmanDecomposition(
        mu=_complex_in(doc["mu"]),
        xi=_complex_in(doc["xi"]),
        w=_complex_in(doc["w"]),
        defective=np.asarray(doc["defective"], dtype=bool),
        lam=_complex_in(doc.get("lambda")),
        modes=_complex_in(doc.get("modes")),
        delta_t=doc.get("delta_t"),
        rtol=doc.get("rtol", DEFAULT_RTOL),
        descriptor=doc.get("descriptor"),
        n_count=counts.get("n"),
        k_count=counts.get("k"),
        m_count=counts.get("m"),
    )
    return DecompositionArchive(
        decomposition=dec,
        seed=doc.get("seed"),
        system=doc.get("system"),
        config=doc.get("config"),
        config_hash=doc.get("config_hash"),
        schema_version=version,
    )


def write_report(dec, path):
    """Per-eigenvalue CSV: index, |mu|, mu, lambda, mode norm, pairing flag."""
    lines = ["index,abs_mu,mu_re,mu_im,lambda_re,lambda_im,mode_norm,defective"]
    for j in range(dec.mu.size):
        lam_re = lam_im = ""
        if dec.lam is not None:
            lam_re = FMT % dec.lam[j].real
            lam_im = FMT % dec.lam[j].imag
        norm = ""
        if dec.modes is not None and not dec.defective[j]:
            norm = FMT % np.linalg.norm(dec.modes[:, j])
        lines.append(
            ",".join(
                [
                    str(j),
                    FMT % abs(dec.mu[j]),
                    FMT % dec.mu[j].real,
                    FMT % dec.mu[j].imag,
                    lam_re,
                    lam_im,
                    norm,
                    str(int(dec.defective[j])),
                ]
            )
        )
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def output_dir_for(cfg):
    return os.environ.get("EDMD_OUTPUT_DIR", "").strip() or cfg.output_dir


def run_experiment(cfg):
    """Config in, archive and report out.

    Generates or loads the data, builds the dictionary, runs the EDMD
    pipeline with full-state weights attached, writes the JSON archive and
    the per-eigenvalue CSV report into the output directory (overridable via
    EDMD_OUTPUT_DIR), and returns the archive.
    """
    out_dir = output_dir_for(cfg)
    os.makedirs(out_dir, exist_ok=True)
    s, _extras = generate_system(cfg)
    d = build_dictionary(cfg.dictionary, s, cfg.seed)
    gp = accumulate_gram(s, d)
    k = koopman_matrix(gp, cfg.rtol)
    b = full_state_weights(d, s)
    dec = decompose(
        k, b, delta_t=s.delta_t, rtol=cfg.rtol, descriptor=d.descriptor, m_count=s.m
    )
    cfg_dict = asdict(cfg)
    cfg_hash = hashlib.sha256(
        json.dumps(cfg_dict, sort_keys=True).encode()
    ).hexdigest()
    archive = DecompositionArchive(
        decomposition=dec,
        seed=cfg.seed,
        system=cfg.system,
        config=cfg_dict,
        config_hash=cfg_hash,
    )
    write_archive(archive, os.path.join(out_dir, cfg.archive_name))
    write_report(dec, os.path.join(out_dir, cfg.report_name))
    return archive


def correlation_modulus(a, b):
    """|Pearson correlation| of two complex sample vectors.

    Both-constant inputs correlate perfectly (modulus 1); a constant against
    a varying input gives 0.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    da = a - a.mean()
    db = b - b.mean()
    na = np.linalg.norm(da)
    nb = np.linalg.norm(db)
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.abs(np.vdot(da, db)) / (na * nb))


@dataclass
class ComparisonRow:
    reference: complex
    comp_index: int
    computed: complex
    abs_err: float
    rel_err: float
    corr_modulus: float


def compare_to_oracle(dec, references, d=None, out_path=None):
    """Match each reference eigenpair to the computed tuple whose
    eigenfunction correlates best with it over the reference points, and
    report value errors plus the correlation modulus.
    """
    if isinstance(dec, DecompositionArchive):
        dec = dec.decomposition
    if d is None:
        if dec.descriptor is None:
            raise ValueError("compare_to_oracle: no dictionary and no descriptor")
        d = from_descriptor(dec.descriptor)
    rows = []
    for ref in references:
        pts = np.atleast_2d(np.asarray(ref.points, dtype=float))
        ref_vals = np.asarray(ref.eigenfunction(pts), dtype=complex).ravel()
        phi = evaluate_eigenfunctions(dec, d, pts)
        corr = np.array(
            [correlation_modulus(phi[:, j], ref_vals) for j in range(phi.shape[1])]
        )
        jstar = int(corr.argmax())
        if ref.continuous:
            if dec.lam is None:
                raise ValueError(
                    "compare_to_oracle: continuous reference but the "
                    "decomposition has no delta_t"
                )
            computed = complex(dec.lam[jstar])
        else:
            computed = complex(dec.mu[jstar])
        abs_err = abs(computed - ref.value)
        rel_err = abs_err / abs(ref.value) if ref.value != 0 else float("inf")
        rows.append(
            ComparisonRow(
                reference=complex(ref.value),
                comp_index=jstar,
                computed=computed,
                abs_err=abs_err,
                rel_err=rel_err,
                corr_modulus=float(corr[jstar]),
            )
        )
    if out_path:
        lines = ["ref_re,ref_im,comp_index,comp_re,comp_im,abs_err,rel_err,corr_modulus"]
        for r in rows:
            lines.append(
                ",".join(
                    [
                        FMT % r.reference.real,
                        FMT % r.reference.imag,
                        str(r.comp_index),
                        FMT % r.computed.real,
                        FMT % r.computed.imag,
                        FMT % r.abs_err,
                        FMT % r.rel_err,
                        FMT % r.corr_modulus,
                    ]
                )
            )
        with open(out_path, "w") as f:
            f.write("\n".join(lines) + "\n")
    return rows


def eval_grid(dec, d, points, indices, out_path=None):
    """Sup-normalized, phase-fixed eigenfunction values on a point set.

    The CSV carries the grid coordinates followed by a (re, im) column pair
    per requested index.
    """
    if isinstance(dec, DecompositionArchive):
        dec = dec.decomposition
    if d is None:
        d = from_descriptor(dec.descriptor)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    indices = list(indices)
    vals = evaluate_eigenfunctions(dec, d, points, indices, normalize=True)
    if out_path:
        coords = [f"x{i + 1}" for i in range(points.shape[1])]
        per_index = []
        for idx in indices:
            per_index += [f"phi{idx}_re", f"phi{idx}_im"]
        lines = [",".join(coords + per_index)]
        for p in range(points.shape[0]):
            cells = [FMT % c for c in points[p]]
            for j in range(len(indices)):
                cells += [FMT % vals[p, j].real, FMT % vals[p, j].imag]
            lines.append(",".join(cells))
        with open(out_path, "w") as f:
            f.write("\n".join(lines) + "\n")
    return vals
