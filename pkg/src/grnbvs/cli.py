"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict, replace

import numpy as np

from . import __version__
from .diagnostics import DEFAULT_MONITORED, convergence_report
from .exceptions import (DegenerateInputError, InternalConsistencyError, InvalidInputError,
                         NumericalFailure)
from .io import (RunConfig, dataset_from_files, fmt, load_annotation, load_edge_list,
                 load_expression, load_knockout, load_prior_matrix, load_tf_map, load_traces,
                 read_matrix, save_traces, write_convergence, write_dataset, write_outputs)
from .model import SPARSITY_W_GRID, Dataset, Hyperparams, compare_prior_forms, prior_sparsity_study
from .sampler import ChainConfig, ChainRunError, run_chain
from .summary import summarize
from .synth import SynthSpec, generate_synthetic
from .validation import (baseline_chip_targets, baseline_correlation_targets,
                         enriched_categories, knockout_tstat)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt_help():
    return argparse.ArgumentDefaultsHelpFormatter


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _add_data_args(p, required=True):
    p.add_argument("--expression", required=required, help="genes x experiments TSV")
    p.add_argument("--chip", required=required, help="genes x TFs ChIP TSV")
    p.add_argument("--motif", required=required, help="genes x TFs motif TSV")
    p.add_argument("--tf-map", help="TF to encoding-gene TSV (tf, gene)")
    p.add_argument("--tf-expression", help="TFs x experiments TSV for unmapped TFs")
    p.add_argument("--chip-transform", choices=["none", "one-minus-p"], default="one-minus-p")
    p.add_argument("--motif-transform", choices=["none", "one-minus-p"], default="one-minus-p")
    p.add_argument("--impute", choices=["row-mean", "zero", "none"], default="row-mean")
    p.add_argument("--center", action="store_true", help="center every expression row")
    p.add_argument("--clamp-eps", type=float, default=1e-6)
    p.add_argument("--hard-constraints", action="store_true",
                   help="keep exact 0/1 prior probabilities as hard constraints")


def _config_from_args(a) -> RunConfig:
    hyper = Hyperparams(tau_alpha2=a.tau_alpha2, tau_beta2=a.tau_beta2, tau_gamma2=a.tau_gamma2,
                        nu=a.nu, grid_size=a.grid_size, include_interactions=not a.no_interactions,
                        allow_self_regulation=not a.no_self_regulation)
    chain = ChainConfig(n_iterations=a.iterations, burn_in=a.burn_in, thin=a.thin, seed=a.seed,
                        n_chains=a.chains, parallel_genes=a.parallel_genes, n_workers=a.workers,
                        audit_every=a.audit_every, random_scan=a.random_scan,
                        n_monitor=a.n_monitor)
    return RunConfig(
        expression=a.expression, chip=a.chip, motif=a.motif, tf_map=a.tf_map,
        tf_expression=a.tf_expression, output_dir=a.output_dir, hyper=hyper, chain=chain,
        center=a.center, clamp_eps=a.clamp_eps, hard_constraints=a.hard_constraints,
        impute=a.impute, chip_transform=a.chip_transform, motif_transform=a.motif_transform,
        threshold=a.threshold, level=a.level, min_shared_targets=a.min_shared,
        emission_floor=a.emission_floor, rhat_threshold=a.rhat_threshold,
    )


def _load_run_dataset(cfg: RunConfig):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dataset, report = dataset_from_files(
            cfg.expression, cfg.chip, cfg.motif, cfg.tf_map, cfg.tf_expression,
            chip_transform=cfg.chip_transform, motif_transform=cfg.motif_transform,
            impute=cfg.impute, center=cfg.center, eps=cfg.clamp_eps, hard=cfg.hard_constraints)
    for w in {str(w.message) for w in caught}:
        print(f"warning: {w}", file=sys.stderr)
    return dataset, report


def cmd_fit(a):
    if a.manifest:
        with open(a.manifest) as fh:
            cfg = RunConfig.from_dict(json.load(fh)["config"])
        # execution-only overrides; none of these change the numbers
        chain = replace(cfg.chain, parallel_genes=a.parallel_genes or cfg.chain.parallel_genes,
                        n_workers=a.workers if a.workers_given else cfg.chain.n_workers)
        cfg = replace(cfg, chain=chain, output_dir=a.output_dir or cfg.output_dir)
    else:
        missing = [n for n in ("expression", "chip", "motif") if getattr(a, n) is None]
        if missing:
            raise _UsageError(f"missing required options: {', '.join('--' + m for m in missing)}")
        a.output_dir = a.output_dir or "grnbvs_out"
        cfg = _config_from_args(a)
    cfg.check_inputs()
    dataset, ingest = _load_run_dataset(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    trace_dir = os.path.join(cfg.output_dir, "traces")
    traces, failures = [], {}
    for k in range(cfg.chain.n_chains):
        ckpt = os.path.join(cfg.output_dir, f"checkpoint_{k}.npz") if a.checkpoint_every else None
        try:
            traces.append(run_chain(dataset, cfg.hyper, cfg.chain, k, checkpoint_path=ckpt,
                                    checkpoint_every=a.checkpoint_every, resume=a.resume))
        except (NumericalFailure, InternalConsistencyError) as exc:
            failures[k] = exc
        if not a.quiet:
            print(f"chain {k} finished", file=sys.stderr)
    if failures:
        raise ChainRunError(failures, traces)
    save_traces(trace_dir, traces, dataset.gene_ids, dataset.tf_ids)
    summary = summarize(traces, dataset.gene_ids, dataset.tf_ids, cfg.threshold, cfg.level)
    report = convergence_report(traces, DEFAULT_MONITORED, cfg.rhat_threshold,
                                seed=cfg.chain.seed, tf_ids=dataset.tf_ids)
    write_outputs(summary, report, cfg, ingest)
    if not a.quiet:
        print(f"convergence: {report.verdict} (worst R-hat {report.worst_rhat:.4g})")
        print(f"outputs written to {cfg.output_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# summarize / diagnose
# ---------------------------------------------------------------------------

def cmd_summarize(a):
    traces, gene_ids, tf_ids = load_traces(a.traces)
    summary = summarize(traces, gene_ids, tf_ids, a.threshold, a.level)
    cfg = RunConfig(output_dir=a.output_dir, threshold=a.threshold, level=a.level,
                    min_shared_targets=a.min_shared, emission_floor=a.emission_floor)
    paths = write_outputs(summary, None, cfg)
    print(f"wrote {len(paths)} files to {a.output_dir}")
    return EXIT_OK


def cmd_diagnose(a):
    traces, _, tf_ids = load_traces(a.traces)
    report = convergence_report(traces, a.monitor.split(","), a.rhat_threshold,
                                n_inclusion=a.n_inclusion, seed=a.seed, tf_ids=tf_ids)
    write_convergence(report, a.output_dir)
    print(f"verdict: {report.verdict}; worst R-hat {report.worst_rhat:.4g}; "
          f"flags: {','.join(report.flags) or '-'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _target_sets_from_args(a):
    if a.edges:
        sets = {}
        for gene, tf, p in load_edge_list(a.edges):
            sets.setdefault(tf, [])
            if p >= a.threshold:
                sets[tf].append(gene)
        return sets, "model"
    if a.chip_pvalues:
        t = read_matrix(a.chip_pvalues)
        return baseline_chip_targets(t.values, a.cutoff, t.row_ids, t.col_ids), "chip-threshold"
    expr = load_expression(a.expression, "row-mean")
    tf_map = load_tf_map(a.tf_map)
    row = {g: i for i, g in enumerate(expr.row_ids)}
    tfs = sorted(tf for tf, g in tf_map.items() if g in row)
    if not tfs:
        raise InvalidInputError("no TF in the map has an expression row")
    f = np.array([expr.values[row[tf_map[tf]]] for tf in tfs])
    n = len(expr.row_ids)
    ds = Dataset(expr.row_ids, tfs, expr.col_ids, expr.values, f,
                 np.full((n, len(tfs)), 0.5), np.full((n, len(tfs)), 0.5))
    return ({tf: baseline_correlation_targets(ds, tf, a.top_fraction) for tf in tfs},
            "expression-correlation")


def cmd_validate(a):
    sets, source = _target_sets_from_args(a)
    annotation = load_annotation(a.annotation) if a.annotation else None
    knockouts = load_knockout(a.knockout) if a.knockout else {}
    rows = []
    for tf in sorted(sets):
        targets = sets[tf]
        row = {"tf": tf, "source": source, "n_targets": len(targets)}
        if annotation is not None:
            try:
                res = enriched_categories(targets, annotation, a.alpha)
                row["enriched_categories"] = len(res.categories)
                row["proportion_enriched"] = res.proportion
            except InvalidInputError:
                row["enriched_categories"] = 0
                row["proportion_enriched"] = None
        if tf in knockouts:
            try:
                row["knockout_t"] = knockout_tstat(targets, knockouts[tf], a.method,
                                                   not a.signed)
            except DegenerateInputError:
                row["knockout_t"] = None
        rows.append(row)
    cols = ["tf", "source", "n_targets", "enriched_categories", "proportion_enriched", "knockout_t"]
    cols = [c for c in cols if any(c in r for r in rows)]
    out = sys.stdout if a.output in (None, "-") else open(a.output, "w")
    try:
        out.write("\t".join(cols) + "\n")
        for r in rows:
            cells = []
            for c in cols:
                v = r.get(c)
                cells.append("NA" if v is None else fmt(v) if isinstance(v, float) else str(v))
            out.write("\t".join(cells) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / prior-study
# ---------------------------------------------------------------------------

def cmd_simulate(a):
    spec = SynthSpec(N=a.genes, J=a.tfs, T=a.experiments, sparsity=a.sparsity,
                     beta_scale=a.beta_scale, gamma_scale=a.gamma_scale, sigma=a.sigma,
                     prior_fidelity=a.prior_fidelity, motif_fidelity=a.motif_fidelity,
                     seed=a.seed)
    dataset, truth, params = generate_synthetic(spec)
    paths = write_dataset(dataset, a.output_dir)
    with open(os.path.join(a.output_dir, "truth_network.tsv"), "w") as fh:
        fh.write("gene\ttf\n")
        for i, j in zip(*np.nonzero(truth.c)):
            fh.write(f"{dataset.gene_ids[i]}\t{dataset.tf_ids[j]}\n")
    with open(os.path.join(a.output_dir, "truth_params.json"), "w") as fh:
        json.dump({"spec": asdict(spec), "beta": dict(zip(dataset.tf_ids, params.beta.tolist())),
                   "gamma": {f"{dataset.tf_ids[j]},{dataset.tf_ids[k]}": v
                             for (j, k), v in params.gamma_dict.items()},
                   "sigma2": params.sigma2}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {', '.join(sorted(paths))} and truth files to {a.output_dir}")
    return EXIT_OK


def cmd_prior_study(a):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b = load_prior_matrix(a.chip, "chip", a.chip_transform, a.clamp_eps)
        m = load_prior_matrix(a.motif, "motif", a.motif_transform, a.clamp_eps)
    if b.row_ids != m.row_ids or b.col_ids != m.col_ids:
        raise InvalidInputError("ChIP and motif matrices must share gene and TF ids in order")
    n, J = b.values.shape
    ds = Dataset(b.row_ids, b.col_ids, ["x"], np.zeros((n, 1)), np.zeros((J, 1)),
                 b.values, m.values)
    grid = [float(x) for x in a.w_grid.split(",")] if a.w_grid else list(SPARSITY_W_GRID)
    res = prior_sparsity_study(ds, grid, a.n_draws, np.random.default_rng(a.seed), a.threshold)
    out = sys.stdout if a.output in (None, "-") else open(a.output, "w")
    try:
        out.write("tf\tw\tN_j\n")
        for tf, w, count in res.table():
            out.write(f"{tf}\t{w:g}\t{count}\n")
        if a.compare_weight is not None:
            cmp = compare_prior_forms(ds, a.compare_weight, a.threshold)
            out.write("\ntf\tgeometric\tarithmetic\tdifference\n")
            for j, tf in enumerate(cmp["tf_ids"]):
                out.write(f"{tf}\t{cmp['geometric'][j]}\t{cmp['arithmetic'][j]}\t"
                          f"{cmp['difference'][j]}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class _UsageError(Exception):
    pass


class _StoreWorkers(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        namespace.workers_given = True


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grnbvs", description=__doc__.splitlines()[0],
                     formatter_class=_fmt_help())
    parser.add_argument("--version", action="version", version=f"grnbvs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="run Gibbs chains and write posterior summaries",
                       formatter_class=_fmt_help())
    _add_data_args(p, required=False)
    p.add_argument("--manifest", help="rerun with the configuration stored in a run manifest")
    p.add_argument("--output-dir", default=None, help="output directory (default grnbvs_out)")
    d = Hyperparams()
    p.add_argument("--tau-alpha2", type=float, default=d.tau_alpha2)
    p.add_argument("--tau-beta2", type=float, default=d.tau_beta2)
    p.add_argument("--tau-gamma2", type=float, default=d.tau_gamma2)
    p.add_argument("--nu", type=float, default=d.nu)
    p.add_argument("--grid-size", type=int, default=d.grid_size)
    p.add_argument("--no-interactions", action="store_true", help="fit the linear model only")
    p.add_argument("--no-self-regulation", action="store_true",
                   help="force indicators of a TF on its own gene to zero")
    c = ChainConfig()
    p.add_argument("--iterations", type=int, default=c.n_iterations)
    p.add_argument("--burn-in", type=int, default=c.burn_in)
    p.add_argument("--thin", type=int, default=c.thin)
    p.add_argument("--seed", type=int, default=c.seed)
    p.add_argument("--chains", type=int, default=c.n_chains)
    p.add_argument("--parallel-genes", action="store_true",
                   help="update gene blocks on worker threads (same results)")
    p.add_argument("--workers", type=int, default=c.n_workers, action=_StoreWorkers)
    p.add_argument("--audit-every", type=int, default=c.audit_every)
    p.add_argument("--random-scan", action="store_true")
    p.add_argument("--n-monitor", type=int, default=c.n_monitor)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--min-shared", type=int, default=4)
    p.add_argument("--emission-floor", type=float, default=0.0)
    p.add_argument("--rhat-threshold", type=float, default=1.1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_fit, workers_given=False)

    p = sub.add_parser("summarize", help="turn saved traces into summary tables",
                       formatter_class=_fmt_help())
    p.add_argument("--traces", required=True, help="directory of chain_*.npz traces")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--min-shared", type=int, default=4)
    p.add_argument("--emission-floor", type=float, default=0.0)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("diagnose", help="convergence report for saved traces",
                       formatter_class=_fmt_help())
    p.add_argument("--traces", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--monitor", default=",".join(DEFAULT_MONITORED))
    p.add_argument("--rhat-threshold", type=float, default=1.1)
    p.add_argument("--n-inclusion", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("validate", help="knockout and enrichment statistics for target sets",
                       formatter_class=_fmt_help())
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--edges", help="edge list from fit (gene, tf, inclusion)")
    src.add_argument("--chip-pvalues", help="genes x TFs binding p-values (baseline)")
    src.add_argument("--correlation", action="store_true",
                     help="top-correlation baseline; needs --expression and --tf-map")
    p.add_argument("--expression")
    p.add_argument("--tf-map")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--cutoff", type=float, default=0.001)
    p.add_argument("--top-fraction", type=float, default=0.01)
    p.add_argument("--annotation", help="gene, category TSV")
    p.add_argument("--knockout", help="tf, gene, response TSV")
    p.add_argument("--alpha", type=float, default=0.001, help="enrichment p-value cutoff")
    p.add_argument("--method", choices=["welch", "one-sample"], default="welch")
    p.add_argument("--signed", action="store_true", help="use signed knockout responses")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="write a synthetic dataset with its true network",
                       formatter_class=_fmt_help())
    s = SynthSpec()
    p.add_argument("--genes", type=int, default=s.N)
    p.add_argument("--tfs", type=int, default=s.J)
    p.add_argument("--experiments", type=int, default=s.T)
    p.add_argument("--sparsity", type=float, default=s.sparsity)
    p.add_argument("--beta-scale", type=float, default=s.beta_scale)
    p.add_argument("--gamma-scale", type=float, default=s.gamma_scale)
    p.add_argument("--sigma", type=float, default=s.sigma)
    p.add_argument("--prior-fidelity", type=float, default=s.prior_fidelity)
    p.add_argument("--motif-fidelity", type=float, default=None)
    p.add_argument("--seed", type=int, default=s.seed)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prior-study", help="prior-only target counts over a weight grid",
                       formatter_class=_fmt_help())
    p.add_argument("--chip", required=True)
    p.add_argument("--motif", required=True)
    p.add_argument("--chip-transform", choices=["none", "one-minus-p"], default="one-minus-p")
    p.add_argument("--motif-transform", choices=["none", "one-minus-p"], default="one-minus-p")
    p.add_argument("--clamp-eps", type=float, default=1e-6)
    p.add_argument("--w-grid", help="comma-separated weights (default 0.05,...,0.95)")
    p.add_argument("--n-draws", type=int, default=10000)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--compare-weight", type=float, default=None,
                   help="also tabulate geometric vs arithmetic prior counts at this weight")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_prior_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"grnbvs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, InternalConsistencyError, ChainRunError) as exc:
        print(f"grnbvs: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidInputError, DegenerateInputError, OSError) as exc:
        print(f"grnbvs: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
