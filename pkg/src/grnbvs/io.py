"""Tab-delimited matrix files, dataset assembly, traces and run outputs.

Matrix files have a header row whose first cell names the row-id column and
whose remaining cells are column ids; each following row is an id and
decimal values.  An empty cell (or ``NA``) is missing.  Numbers are written
with 17 significant digits so a write/read round trip is exact.
"""
from __future__ import annotations

import csv
import json
import os
import platform
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .exceptions import InvalidInputError
from .model import DEFAULT_EPS, Dataset, Hyperparams, clamp_probabilities
from .sampler import ChainConfig, ChainTrace
from .validation import FunctionalAnnotation, KnockoutExperiment

TRACE_FORMAT_VERSION = 1
MANIFEST_FORMAT = "grnbvs-run-manifest"
MISSING = {"", "NA", "NaN", "nan"}
TRANSFORM_WARNING = (
    "interpreting prior cells as p-values and using 1 - p as the probability; "
    "this transform is a modelling choice, pass transform='none' for true probabilities"
)


class ParseError(InvalidInputError):
    def __init__(self, path, line, message):
        self.path, self.line = path, line
        super().__init__(f"{path}:{line}: {message}")


def fmt(x) -> str:
    return format(float(x), ".17g")


@dataclass
class Table:
    values: np.ndarray
    row_ids: list
    col_ids: list
    missing: np.ndarray = None
    n_imputed: int = 0


def read_matrix(path) -> Table:
    """Parse a labelled numeric matrix; missing cells become NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    if not rows:
        raise ParseError(path, 1, "empty file")
    header = rows[0]
    col_ids = header[1:]
    seen = set()
    for c in col_ids:
        if c in seen:
            raise ParseError(path, 1, f"duplicate column id {c!r}")
        seen.add(c)
    row_ids, values, seen = [], [], {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} fields, found {len(row)}")
        rid = row[0]
        if rid in seen:
            raise ParseError(path, lineno, f"duplicate row id {rid!r} (first on line {seen[rid]})")
        seen[rid] = lineno
        parsed = []
        for cell in row[1:]:
            cell = cell.strip()
            if cell in MISSING:
                parsed.append(np.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(path, lineno, f"non-numeric cell {cell!r}") from None
            if not np.isfinite(v):
                raise ParseError(path, lineno, f"non-finite cell {cell!r}")
            parsed.append(v)
        row_ids.append(rid)
        values.append(parsed)
    arr = np.array(values, dtype=float).reshape(len(row_ids), len(col_ids))
    return Table(arr, row_ids, col_ids, np.isnan(arr))


def write_matrix(path, values, row_ids, col_ids, corner: str = "id"):
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, delimiter="\t", lineterminator="\n")
        out.writerow([corner, *col_ids])
        for rid, row in zip(row_ids, values):
            out.writerow([rid, *(fmt(v) for v in row)])


def load_expression(path, impute: str = "row-mean") -> Table:
    """Expression matrix (genes x experiments) with missing cells imputed.

    ``impute`` is ``row-mean`` (default), ``zero`` or ``none``; ``none``
    rejects files with missing cells.  ``n_imputed`` counts filled cells.
    """
    table = read_matrix(path)
    miss = table.missing
    n_missing = int(miss.sum())
    if n_missing:
        if impute == "none":
            line = 2 + int(np.flatnonzero(miss.any(axis=1))[0])
            raise ParseError(path, line, "missing value and imputation disabled")
        if impute == "row-mean":
            counts = (~miss).sum(axis=1)
            if np.any(counts == 0):
                line = 2 + int(np.flatnonzero(counts == 0)[0])
                raise ParseError(path, line, "row has no observed values")
            means = np.nansum(table.values, axis=1) / counts
            table.values = np.where(miss, means[:, None], table.values)
        elif impute == "zero":
            table.values = np.where(miss, 0.0, table.values)
        else:
            raise InvalidInputError(f"unknown imputation {impute!r}")
    table.n_imputed = n_missing
    return table


def load_prior_matrix(path, kind: str = "chip", transform: str = "none",
                      eps: float = DEFAULT_EPS, hard: bool = False) -> Table:
    """Genes x TFs probability matrix, optionally converted from p-values.

    ``transform="one-minus-p"`` reads cells as p-values and returns ``1 - p``.
    Values are clamped into ``[eps, 1 - eps]`` (exact 0/1 kept with
    ``hard=True``).
    """
    if kind not in ("chip", "motif"):
        raise InvalidInputError(f"unknown prior kind {kind!r}")
    table = read_matrix(path)
    if table.missing.any():
        line = 2 + int(np.flatnonzero(table.missing.any(axis=1))[0])
        raise ParseError(path, line, f"missing value in {kind} matrix")
    bad = (table.values < 0) | (table.values > 1)
    if bad.any():
        line = 2 + int(np.flatnonzero(bad.any(axis=1))[0])
        raise ParseError(path, line, f"{kind} value outside [0, 1]")
    if transform == "one-minus-p":
        warnings.warn(TRANSFORM_WARNING, stacklevel=2)
        table.values = 1.0 - table.values
    elif transform != "none":
        raise InvalidInputError(f"unknown transform {transform!r}")
    table.values = clamp_probabilities(table.values, eps, hard)
    return table


def load_tf_map(path) -> dict:
    """Two-column file ``tf<TAB>gene`` (header required) mapping TFs to encoding genes."""
    out = {}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(path, lineno, "expected two fields: tf, gene")
        tf, gene = row[0].strip(), row[1].strip()
        if tf in out:
            raise ParseError(path, lineno, f"duplicate TF id {tf!r}")
        out[tf] = gene
    return out


def assemble_dataset(expression: Table, chip: Table, motif: Table, tf_map: dict | None = None,
                     tf_expression: Table | None = None, center: bool = False,
                     eps: float = DEFAULT_EPS, hard: bool = False):
    """Align the inputs into a :class:`Dataset`.

    Genes are those present in the expression matrix and both prior
    matrices; TFs are those in both prior matrices.  TF expression comes
    from the row of the TF's encoding gene (``tf_map``) or, failing that,
    from ``tf_expression``.  Genes and TFs come out sorted by id.  Returns
    ``(dataset, report)`` where ``report`` counts dropped identifiers.
    """
    tf_map = tf_map or {}
    expr_genes = set(expression.row_ids)
    prior_genes = set(chip.row_ids) & set(motif.row_ids)
    genes = sorted(expr_genes & prior_genes)
    if not genes:
        raise InvalidInputError("no genes shared by the expression and prior matrices")
    tfs = sorted(set(chip.col_ids) & set(motif.col_ids))
    if not tfs:
        raise InvalidInputError("no TFs shared by the ChIP and motif matrices")
    if tf_expression is not None and tf_expression.col_ids != expression.col_ids:
        raise InvalidInputError("TF expression experiments differ from the expression matrix")

    g_all = expression.values
    if center:
        g_all = g_all - g_all.mean(axis=1, keepdims=True)
    e_row = {gid: i for i, gid in enumerate(expression.row_ids)}
    f_rows, tf_gene_map = [], {}
    gene_pos = {gid: i for i, gid in enumerate(genes)}
    explicit = {} if tf_expression is None else {t: i for i, t in enumerate(tf_expression.row_ids)}
    for j, tf in enumerate(tfs):
        gene = tf_map.get(tf)
        if gene is not None and gene in e_row:
            f_rows.append(g_all[e_row[gene]])
            if gene in gene_pos:
                tf_gene_map[j] = gene_pos[gene]
        elif tf in explicit:
            row = tf_expression.values[explicit[tf]]
            if np.isnan(row).any():
                raise InvalidInputError(f"missing values in TF expression of {tf!r}")
            f_rows.append(row - row.mean() if center else row)
        else:
            raise InvalidInputError(f"cannot resolve expression for TF {tf!r}")

    g = g_all[[e_row[x] for x in genes]]
    cb = {x: i for i, x in enumerate(chip.row_ids)}
    cm = {x: i for i, x in enumerate(motif.row_ids)}
    b = chip.values[np.ix_([cb[x] for x in genes], [chip.col_ids.index(t) for t in tfs])]
    m = motif.values[np.ix_([cm[x] for x in genes], [motif.col_ids.index(t) for t in tfs])]
    dataset = Dataset(genes, tfs, expression.col_ids, g, np.array(f_rows).reshape(len(tfs), -1),
                      b, m, tf_gene_map).clamped(eps, hard)
    all_prior_genes = set(chip.row_ids) | set(motif.row_ids)
    report = {
        "genes_dropped_from_priors": len(all_prior_genes - set(genes)),
        "genes_dropped_from_expression": len(expr_genes - set(genes)),
        "tfs_dropped": len((set(chip.col_ids) | set(motif.col_ids)) - set(tfs)),
        "n_imputed": expression.n_imputed,
        "n_genes": len(genes), "n_tfs": len(tfs), "n_experiments": len(expression.col_ids),
    }
    return dataset, report


def dataset_from_files(expression, chip, motif, tf_map=None, tf_expression=None, *,
                       chip_transform="one-minus-p", motif_transform="one-minus-p",
                       impute="row-mean", center=False, eps=DEFAULT_EPS, hard=False):
    """Load and assemble a dataset from file paths."""
    expr = load_expression(expression, impute)
    b = load_prior_matrix(chip, "chip", chip_transform, eps, hard)
    m = load_prior_matrix(motif, "motif", motif_transform, eps, hard)
    tmap = load_tf_map(tf_map) if tf_map else {}
    tfx = load_expression(tf_expression, "none") if tf_expression else None
    return assemble_dataset(expr, b, m, tmap, tfx, center, eps, hard)


def write_dataset(dataset: Dataset, outdir, tf_map: bool = True) -> dict:
    """Write a dataset as expression, TF-expression, ChIP and motif files."""
    os.makedirs(outdir, exist_ok=True)
    paths = {k: os.path.join(outdir, f"{k}.tsv")
             for k in ("expression", "tf_expression", "chip", "motif")}
    write_matrix(paths["expression"], dataset.g, dataset.gene_ids, dataset.experiment_ids, "gene")
    write_matrix(paths["tf_expression"], dataset.f, dataset.tf_ids, dataset.experiment_ids, "tf")
    write_matrix(paths["chip"], dataset.b, dataset.gene_ids, dataset.tf_ids, "gene")
    write_matrix(paths["motif"], dataset.m, dataset.gene_ids, dataset.tf_ids, "gene")
    if tf_map and dataset.tf_gene_map:
        paths["tf_map"] = os.path.join(outdir, "tf_map.tsv")
        with open(paths["tf_map"], "w") as fh:
            fh.write("tf\tgene\n")
            for j, i in sorted(dataset.tf_gene_map.items()):
                fh.write(f"{dataset.tf_ids[j]}\t{dataset.gene_ids[i]}\n")
    return paths


# ---------------------------------------------------------------------------
# validation inputs
# ---------------------------------------------------------------------------

def _read_long(path, n_fields):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n_fields:
            raise ParseError(path, lineno, f"expected {n_fields} fields, found {len(row)}")
        out.append((lineno, [c.strip() for c in row]))
    return out


def load_annotation(path, universe=None):
    """``gene<TAB>category`` lines (header required), one category per line."""
    cats = {}
    for _, (gene, cat) in _read_long(path, 2):
        cats.setdefault(gene, set()).add(cat)
    return FunctionalAnnotation(cats, universe)


def load_knockout(path) -> dict:
    """``tf<TAB>gene<TAB>response`` lines (header required) grouped by TF."""
    per_tf = {}
    for lineno, (tf, gene, value) in _read_long(path, 3):
        try:
            v = float(value)
        except ValueError:
            raise ParseError(path, lineno, f"non-numeric response {value!r}") from None
        resp = per_tf.setdefault(tf, {})
        if gene in resp:
            raise ParseError(path, lineno, f"duplicate gene {gene!r} for TF {tf!r}")
        resp[gene] = v
    return {tf: KnockoutExperiment(tf, r) for tf, r in per_tf.items()}


def load_edge_list(path) -> list:
    """``gene<TAB>tf<TAB>inclusion`` rows as ``(gene, tf, probability)`` tuples."""
    out = []
    for lineno, (gene, tf, p) in _read_long(path, 3):
        try:
            out.append((gene, tf, float(p)))
        except ValueError:
            raise ParseError(path, lineno, f"non-numeric probability {p!r}") from None
    return out


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

_TRACE_FIELDS = ("iterations", "alpha", "beta", "gamma", "pairs", "sigma2", "w",
                 "inclusion_counts", "coactive_counts", "monitor_cells", "monitor_values")


def save_trace(path, trace: ChainTrace, gene_ids, tf_ids):
    meta = {"version": TRACE_FORMAT_VERSION, "chain_index": trace.chain_index,
            "seed": trace.seed, "gene_ids": list(gene_ids), "tf_ids": list(tf_ids),
            "snapshot_iterations": sorted(int(k) for k in trace.snapshots)}
    arrays = {name: getattr(trace, name) for name in _TRACE_FIELDS}
    arrays.update({f"snapshot_{k}": v for k, v in trace.snapshots.items()})
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_trace(path):
    """Return ``(trace, gene_ids, tf_ids)``."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("version") != TRACE_FORMAT_VERSION:
            raise InvalidInputError(
                f"{path}: trace format {meta.get('version')} != supported {TRACE_FORMAT_VERSION}")
        trace = ChainTrace(chain_index=meta["chain_index"], seed=meta["seed"],
                           **{name: z[name].copy() for name in _TRACE_FIELDS})
        for k in meta["snapshot_iterations"]:
            trace.snapshots[k] = z[f"snapshot_{k}"].copy()
    return trace, meta["gene_ids"], meta["tf_ids"]


def save_traces(outdir, traces, gene_ids, tf_ids) -> list:
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for t in traces:
        p = os.path.join(outdir, f"chain_{t.chain_index}.npz")
        save_trace(p, t, gene_ids, tf_ids)
        paths.append(p)
    return paths


def load_traces(tracedir):
    files = sorted((f for f in os.listdir(tracedir) if f.startswith("chain_") and f.endswith(".npz")),
                   key=lambda f: int(f[len("chain_"):-len(".npz")]))
    if not files:
        raise InvalidInputError(f"no chain_*.npz traces in {tracedir}")
    loaded = [load_trace(os.path.join(tracedir, f)) for f in files]
    gene_ids, tf_ids = loaded[0][1], loaded[0][2]
    return [t for t, _, _ in loaded], gene_ids, tf_ids


# ---------------------------------------------------------------------------
# run configuration and outputs
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    expression: str = None
    chip: str = None
    motif: str = None
    tf_map: str = None
    tf_expression: str = None
    annotation: str = None
    knockout: str = None
    output_dir: str = "grnbvs_out"
    hyper: Hyperparams = field(default_factory=Hyperparams)
    chain: ChainConfig = field(default_factory=ChainConfig)
    center: bool = False
    clamp_eps: float = DEFAULT_EPS
    hard_constraints: bool = False
    impute: str = "row-mean"
    chip_transform: str = "one-minus-p"
    motif_transform: str = "one-minus-p"
    threshold: float = 0.5
    level: float = 0.95
    min_shared_targets: int = 4
    emission_floor: float = 0.0
    rhat_threshold: float = 1.1

    def check_inputs(self):
        for name in ("expression", "chip", "motif", "tf_map", "tf_expression",
                     "annotation", "knockout"):
            p = getattr(self, name)
            if p is not None and not os.path.exists(p):
                raise InvalidInputError(f"{name} file not found: {p}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["hyper"] = Hyperparams(**d.get("hyper", {}))
        d["chain"] = ChainConfig(**d.get("chain", {}))
        return cls(**d)


def run_manifest(config: RunConfig, outputs: list, report: dict | None = None) -> dict:
    return {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "config": config.to_dict(),
        "chain_seeds": [[config.chain.seed, k] for k in range(config.chain.n_chains)],
        "versions": {"grnbvs": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "ingest_report": report or {},
        "outputs": sorted(outputs),
    }


def write_outputs(summary, report, config: RunConfig, ingest_report: dict | None = None,
                  outdir: str | None = None) -> dict:
    """Write edge list, coefficient, weight, interaction and convergence tables.

    Also writes ``manifest.json`` holding the configuration, seeds and
    library versions.  Returns a dict of written paths.
    """
    from .summary import interaction_pairs

    outdir = outdir or config.output_dir
    os.makedirs(outdir, exist_ok=True)
    paths = {}

    paths["edges"] = os.path.join(outdir, "edges.tsv")
    with open(paths["edges"], "w") as fh:
        fh.write("gene\ttf\tinclusion\n")
        for i, gene in enumerate(summary.gene_ids):
            for j, tf in enumerate(summary.tf_ids):
                p = summary.inclusion[i, j]
                if p > config.emission_floor:
                    fh.write(f"{gene}\t{tf}\t{fmt(p)}\n")

    paths["coefficients"] = os.path.join(outdir, "coefficients.tsv")
    with open(paths["coefficients"], "w") as fh:
        fh.write("term\ttf_a\ttf_b\tmean\tlower\tupper\n")
        for j, tf in enumerate(summary.tf_ids):
            lo, hi = summary.beta_interval[j]
            fh.write(f"beta\t{tf}\t\t{fmt(summary.beta_mean[j])}\t{fmt(lo)}\t{fmt(hi)}\n")
        for p, (j, k) in enumerate(summary.pairs):
            lo, hi = summary.gamma_interval[p]
            fh.write(f"gamma\t{summary.tf_ids[j]}\t{summary.tf_ids[k]}\t"
                     f"{fmt(summary.gamma_mean[p])}\t{fmt(lo)}\t{fmt(hi)}\n")

    paths["weights"] = os.path.join(outdir, "weights.tsv")
    cols = [f"q{100 * q:g}" for q in summary.weight_levels]
    with open(paths["weights"], "w") as fh:
        fh.write("\t".join(["tf", *cols, "mass_above_0.5"]) + "\n")
        for j, tf in enumerate(summary.tf_ids):
            vals = [fmt(v) for v in summary.weight_quantiles[j]]
            fh.write("\t".join([tf, *vals, fmt(summary.weight_mass_above_half[j])]) + "\n")

    paths["interactions"] = os.path.join(outdir, "interactions.tsv")
    with open(paths["interactions"], "w") as fh:
        fh.write("tf_a\ttf_b\tmean\tlower\tupper\tshared_targets\n")
        for p in interaction_pairs(summary, config.min_shared_targets):
            fh.write(f"{p.tf_a}\t{p.tf_b}\t{fmt(p.mean)}\t{fmt(p.lower)}\t{fmt(p.upper)}\t"
                     f"{p.shared_targets}\n")

    if report is not None:
        paths.update(write_convergence(report, outdir))

    paths["manifest"] = os.path.join(outdir, "manifest.json")
    manifest = run_manifest(config, [os.path.basename(p) for p in paths.values()], ingest_report)
    with open(paths["manifest"], "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def write_convergence(report, outdir) -> dict:
    os.makedirs(outdir, exist_ok=True)
    tsv = os.path.join(outdir, "convergence.tsv")
    with open(tsv, "w") as fh:
        fh.write("parameter\trhat\tess\tstatus\n")
        for p in report.params:
            fh.write(f"{p.name}\t{fmt(p.rhat)}\t{fmt(p.ess)}\t{p.status}\n")
    js = os.path.join(outdir, "convergence.json")
    with open(js, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return {"convergence_tsv": tsv, "convergence_json": js}
