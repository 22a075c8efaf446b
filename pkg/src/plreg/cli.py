"""Command-line interface.

Every fit command reads a headered CSV (``--label`` names the class column),
writes a JSON model artifact, and exits 0 on success. Failures print a
machine-parsable JSON error on stderr with distinct exit codes: 2 for usage
errors (click), 3 for config/data parse problems, 4 for numeric/module
errors. Flags override values from ``--config`` (a JSON object); unknown
config keys are rejected. ``PLREG_SEED`` sets the default seed.

Report commands (regpath, benchmark, diagnose-ess, predict --roc-out) write
delimited output and render a matplotlib figure alongside it.
"""

from __future__ import annotations

import csv as _csv
import functools
import json
import sys

import click
import numpy as np

from . import __version__
from .errors import ParseError, PlregError
from .em import EMConfig, fit_map
from .gibbs import Chain, GibbsConfig, posterior_predict, posterior_summaries, run_chain
from .vb import fit_vb, type2_ml_a, vb_predict
from .sparse_logit import LogitConfig, logit_posterior_predict, run_logit_chain
from .diagnostics import (
    EssReport, benchmark, ess, min_ess_report, misclassification,
    regularization_path, roc_auc,
)
from .io import (
    Standardizer, default_seed, load_config, load_csv, model_to_json,
    read_model, write_model,
)
from .model import Dataset, FeatureMap, PLWeights, class_probabilities, transform
from .rng import RngStream

EXIT_PARSE = 3
EXIT_MODULE = 4


def _fail(exc: Exception, code: int):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
    raise SystemExit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ParseError as exc:
            _fail(exc, EXIT_PARSE)
        except PlregError as exc:
            _fail(exc, EXIT_MODULE)
        except (OSError, ValueError) as exc:
            _fail(exc, EXIT_PARSE)
    return wrapper


def _merged(config_path, allowed, **cli_values):
    """Config-file values fill in CLI options left at None."""
    cfg = load_config(config_path, allowed) if config_path else {}
    out = {}
    for key, value in cli_values.items():
        out[key] = cfg.get(key) if value is None and key in cfg else value
    return out


def _resolve(value, fallback):
    return fallback if value is None else value


@click.group()
@click.version_option(version=__version__)
def main():
    """Plackett-Luce regression: sparse EM, Gibbs, variational inference."""


_COMMON_KEYS = ("data", "label", "a", "b", "seed", "standardize")


def common_fit_options(fn):
    fn = click.option("--data", "data_path", type=click.Path(), default=None,
                      help="Training CSV with a header row.")(fn)
    fn = click.option("--label", default=None, help="Name of the class column.")(fn)
    fn = click.option("--a", "hyper_a", type=float, default=None,
                      help="Gamma shape hyperparameter.")(fn)
    fn = click.option("--b", "hyper_b", type=float, default=None,
                      help="Gamma rate hyperparameter.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="RNG seed (default: $PLREG_SEED or 0).")(fn)
    fn = click.option("--standardize/--no-standardize", default=None,
                      help="Standardize covariates (stats stored in the model).")(fn)
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="JSON config file; flags override its values.")(fn)
    fn = click.option("--out", "out_path", type=click.Path(), default="model.json",
                      show_default=True, help="Model artifact output path.")(fn)
    return fn


def _load_training(params):
    if not params["data"]:
        raise ParseError("--data is required (flag or config)")
    if not params["label"]:
        raise ParseError("--label is required (flag or config)")
    standardize = bool(_resolve(params["standardize"], True))
    loaded = load_csv(params["data"], params["label"], standardize=standardize)
    fmap = FeatureMap.default(loaded.dataset.d)
    return loaded, fmap


@main.command("fit-em")
@common_fit_options
@click.option("--max-iters", type=int, default=None)
@click.option("--rel-tol", type=float, default=None)
@click.option("--init", "init_scheme", type=click.Choice(["constant-one", "prior-draw"]),
              default=None)
@handle_errors
def fit_em_cmd(data_path, label, hyper_a, hyper_b, seed, standardize,
               config_path, out_path, max_iters, rel_tol, init_scheme):
    """MAP estimation by EM (exactly sparse for small --a)."""
    params = _merged(config_path,
                     _COMMON_KEYS + ("max_iters", "rel_tol", "init"),
                     data=data_path, label=label, a=hyper_a, b=hyper_b,
                     seed=seed, standardize=standardize, max_iters=max_iters,
                     rel_tol=rel_tol, init=init_scheme)
    loaded, fmap = _load_training(params)
    seed = int(_resolve(params["seed"], default_seed()))
    cfg = EMConfig(int(_resolve(params["max_iters"], 10_000)),
                   float(_resolve(params["rel_tol"], 1e-8)),
                   _resolve(params["init"], "constant-one"))
    a = float(_resolve(params["a"], 1.0))
    b = float(_resolve(params["b"], 1.0))
    trace = fit_map(loaded.dataset, fmap, a, b, cfg, RngStream(seed))
    lam = trace.weights.lam
    doc = model_to_json(
        "pl-em", fmap, loaded.label_mapping, {"a": a, "b": b}, seed,
        loaded.standardizer, lam_bar=lam / lam.sum(), total_mass=lam.sum(),
        extra={
            "zero_pattern": sorted([list(t) for t in trace.zero_pattern]),
            "objective_trace": np.asarray(trace.objective).tolist(),
            "iterations": trace.n_iters,
            "converged": trace.converged,
        })
    write_model(doc, out_path)
    click.echo(f"wrote {out_path} ({trace.n_iters} iterations, "
               f"{len(trace.zero_pattern)} exact zeros)")


@main.command("fit-gibbs")
@common_fit_options
@click.option("--burn-in", type=int, default=None, help="Default 5000.")
@click.option("--samples", type=int, default=None, help="Default 5000.")
@click.option("--thin", type=int, default=None)
@click.option("--sample-a/--no-sample-a", default=None,
              help="Metropolis-Hastings step on the shape a.")
@click.option("--rescale/--no-rescale", default=None,
              help="Total-mass rescaling move each sweep.")
@click.option("--chain-out", type=click.Path(), default=None,
              help="Chain CSV output (default: model path with .chain.csv).")
@handle_errors
def fit_gibbs_cmd(data_path, label, hyper_a, hyper_b, seed, standardize,
                  config_path, out_path, burn_in, samples, thin, sample_a,
                  rescale, chain_out):
    """Full Bayesian inference by conjugate Gibbs sampling."""
    params = _merged(config_path,
                     _COMMON_KEYS + ("burn_in", "samples", "thin", "sample_a",
                                     "rescale", "chain_out"),
                     data=data_path, label=label, a=hyper_a, b=hyper_b,
                     seed=seed, standardize=standardize, burn_in=burn_in,
                     samples=samples, thin=thin, sample_a=sample_a,
                     rescale=rescale, chain_out=chain_out)
    loaded, fmap = _load_training(params)
    seed = int(_resolve(params["seed"], default_seed()))
    cfg = GibbsConfig(
        burn_in=int(_resolve(params["burn_in"], 5000)),
        samples=int(_resolve(params["samples"], 5000)),
        thin=int(_resolve(params["thin"], 1)),
        sample_hyper_a=bool(_resolve(params["sample_a"], False)),
        rescale_lambda=bool(_resolve(params["rescale"], False)),
    )
    a = float(_resolve(params["a"], 1.0))
    b = float(_resolve(params["b"], 1.0))
    chain = run_chain(loaded.dataset, fmap, a, b, cfg, RngStream(seed))
    chain_path = params["chain_out"] or (str(out_path).removesuffix(".json") + ".chain.csv")
    chain.to_csv(chain_path)
    summ = posterior_summaries(chain)
    doc = model_to_json(
        "pl-gibbs", fmap, loaded.label_mapping, {"a": a, "b": b}, seed,
        loaded.standardizer, lam_bar=summ["mean"], chain_path=chain_path,
        extra={"n_classes": loaded.dataset.n_classes,
               "posterior_median": summ["median"].tolist(),
               "config": {"burn_in": cfg.burn_in, "samples": cfg.samples,
                          "thin": cfg.thin, "sample_a": cfg.sample_hyper_a,
                          "rescale": cfg.rescale_lambda},
               "sample_time_s": chain.sample_time})
    write_model(doc, out_path)
    click.echo(f"wrote {out_path} and {chain_path} "
               f"({chain.n_draws} draws in {chain.sample_time:.1f}s)")


@main.command("fit-vb")
@common_fit_options
@click.option("--max-iters", type=int, default=None)
@click.option("--rel-tol", type=float, default=None)
@click.option("--estimate-a/--no-estimate-a", default=None,
              help="Type-II maximum-likelihood line search for a.")
@handle_errors
def fit_vb_cmd(data_path, label, hyper_a, hyper_b, seed, standardize,
               config_path, out_path, max_iters, rel_tol, estimate_a):
    """Deterministic mean-field variational inference."""
    params = _merged(config_path,
                     _COMMON_KEYS + ("max_iters", "rel_tol", "estimate_a"),
                     data=data_path, label=label, a=hyper_a, b=hyper_b,
                     seed=seed, standardize=standardize, max_iters=max_iters,
                     rel_tol=rel_tol, estimate_a=estimate_a)
    loaded, fmap = _load_training(params)
    seed = int(_resolve(params["seed"], default_seed()))
    cfg = EMConfig(int(_resolve(params["max_iters"], 10_000)),
                   float(_resolve(params["rel_tol"], 1e-8)))
    b = float(_resolve(params["b"], 1.0))
    if bool(_resolve(params["estimate_a"], False)):
        a, state = type2_ml_a(loaded.dataset, fmap, b, cfg)
    else:
        a = float(_resolve(params["a"], 1.0))
        state = fit_vb(loaded.dataset, fmap, a, b, cfg)
    lam = state.lam_mean
    doc = model_to_json(
        "pl-vb", fmap, loaded.label_mapping, {"a": a, "b": b}, seed,
        loaded.standardizer, lam_bar=lam / lam.sum(), total_mass=lam.sum(),
        variational={"a_kj": state.a_kj.tolist(), "b_kj": state.b_kj.tolist()},
        extra={"elbo_trace": [float(v) for v in state.elbo_trace]})
    write_model(doc, out_path)
    click.echo(f"wrote {out_path} (a={a:.4g}, {len(state.elbo_trace)} updates)")


@main.command("fit-logit")
@click.option("--data", "data_path", type=click.Path(), default=None)
@click.option("--label", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--standardize/--no-standardize", default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default="model.json", show_default=True)
@click.option("--burn-in", type=int, default=None)
@click.option("--samples", type=int, default=None)
@click.option("--thin", type=int, default=None)
@click.option("--c", "hyper_c", type=float, default=None, help="theta prior shape.")
@click.option("--d", "hyper_d", type=float, default=None, help="theta prior rate.")
@click.option("--shrink-intercept/--no-shrink-intercept", default=None)
@click.option("--chain-out", type=click.Path(), default=None)
@handle_errors
def fit_logit_cmd(data_path, label, seed, standardize, config_path, out_path,
                  burn_in, samples, thin, hyper_c, hyper_d, shrink_intercept,
                  chain_out):
    """Sparse Bayesian multinomial-logit baseline (auxiliary-variable Gibbs)."""
    params = _merged(config_path,
                     ("data", "label", "seed", "standardize", "burn_in", "samples",
                      "thin", "c", "d", "shrink_intercept", "chain_out"),
                     data=data_path, label=label, seed=seed, standardize=standardize,
                     burn_in=burn_in, samples=samples, thin=thin, c=hyper_c,
                     d=hyper_d, shrink_intercept=shrink_intercept, chain_out=chain_out)
    if not params["data"] or not params["label"]:
        raise ParseError("--data and --label are required")
    standardize = bool(_resolve(params["standardize"], True))
    loaded = load_csv(params["data"], params["label"], standardize=standardize)
    seed = int(_resolve(params["seed"], default_seed()))
    cfg = LogitConfig(
        burn_in=int(_resolve(params["burn_in"], 5000)),
        samples=int(_resolve(params["samples"], 5000)),
        thin=int(_resolve(params["thin"], 1)),
        hyper_c=float(_resolve(params["c"], 1.0)),
        hyper_d=float(_resolve(params["d"], 1.0)),
        shrink_intercept=bool(_resolve(params["shrink_intercept"], False)),
    )
    chain = run_logit_chain(loaded.dataset, cfg, RngStream(seed))
    chain_path = params["chain_out"] or (str(out_path).removesuffix(".json") + ".chain.csv")
    chain.to_csv(chain_path)
    doc = model_to_json(
        "logit-gibbs", None, loaded.label_mapping,
        {"c": cfg.hyper_c, "d": cfg.hyper_d}, seed, loaded.standardizer,
        chain_path=chain_path,
        extra={"n_classes": loaded.dataset.n_classes,
               "add_intercept": cfg.add_intercept,
               "posterior_mean_beta": chain.lam_draws.mean(axis=0).tolist(),
               "sample_time_s": chain.sample_time})
    write_model(doc, out_path)
    click.echo(f"wrote {out_path} and {chain_path}")


def _predict_probs(doc: dict, X: np.ndarray) -> np.ndarray:
    std = Standardizer.from_json(doc.get("standardization"))
    if std is not None:
        X = std.apply(X)
    kind = doc["kind"]
    if kind == "logit-gibbs":
        chain = Chain.from_csv(doc["chain_csv"], doc["n_classes"] - 1)
        return logit_posterior_predict(chain, X, add_intercept=doc["add_intercept"])
    fmap = FeatureMap.from_spec(doc["feature_map"])
    W = transform(X, fmap)
    if kind == "pl-gibbs":
        chain = Chain.from_csv(doc["chain_csv"], doc["n_classes"])
        return posterior_predict(chain, W)
    lam_bar = np.asarray(doc["lambda_bar"], dtype=float)
    hyper = doc["hyperparameters"]
    return class_probabilities(W, PLWeights(lam_bar, hyper["a"], hyper["b"]))


@main.command("predict")
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--label", default=None,
              help="Optional label column (enables accuracy/ROC reporting).")
@click.option("--out", "out_path", type=click.Path(), default="predictions.csv",
              show_default=True)
@click.option("--roc-out", type=click.Path(), default=None,
              help="Write an ROC curve CSV + figure (binary problems).")
@handle_errors
def predict_cmd(model_path, data_path, label, out_path, roc_out):
    """Per-row class probabilities and argmax labels for new data."""
    doc = read_model(model_path)
    import pandas as pd
    frame = pd.read_csv(data_path)
    y_ext = None
    if label is not None:
        if label not in frame.columns:
            raise ParseError(f"label column {label!r} not found")
        y_ext = frame[label].tolist()
        frame = frame.drop(columns=[label])
    X = frame.to_numpy(dtype=float)
    probs = _predict_probs(doc, X)
    mapping = doc["label_mapping"]
    argmax = np.argmax(probs, axis=1)
    with open(out_path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow([f"prob_{m}" for m in mapping] + ["predicted"])
        for i in range(len(X)):
            writer.writerow([repr(float(v)) for v in probs[i]] + [mapping[argmax[i]]])
    msg = f"wrote {out_path}"
    if y_ext is not None:
        idx = {m: i for i, m in enumerate(mapping)}
        try:
            y = np.array([idx[v] for v in y_ext])
        except KeyError as exc:
            raise ParseError(f"label {exc} not in the model's label mapping") from exc
        err = misclassification(probs, y)
        msg += f" (misclassification {err:.3f})"
        if roc_out:
            if probs.shape[1] != 2:
                raise ParseError("--roc-out needs a binary problem")
            curve = roc_auc(probs[:, 1], (y == 1).astype(int))
            roc_csv = str(roc_out).rsplit(".", 1)[0] + ".csv"
            with open(roc_csv, "w", newline="") as fh:
                writer = _csv.writer(fh)
                writer.writerow(["fpr", "tpr"])
                writer.writerows(zip(curve["fpr"], curve["tpr"]))
            from .plots import render_roc
            render_roc({doc["kind"]: curve}, roc_out)
            msg += f"; ROC (AUC {curve['auc']:.3f}) -> {roc_out}, {roc_csv}"
    click.echo(msg)


@main.command("regpath")
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--label", required=True)
@click.option("--estimator", type=click.Choice(["map", "gibbs-mean", "gibbs-median",
                                                "vb-mean"]), default="map",
              show_default=True)
@click.option("--a-grid", default="1.0,0.9,0.8,0.7,0.6,0.5,0.4,0.3,0.2,0.1",
              show_default=True, help="Comma-separated descending shape values.")
@click.option("--b", "hyper_b", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--standardize/--no-standardize", default=True, show_default=True)
@click.option("--burn-in", type=int, default=1000, help="Gibbs estimators only.")
@click.option("--samples", type=int, default=1000, help="Gibbs estimators only.")
@click.option("--out", "out_path", type=click.Path(), default="regpath.csv",
              show_default=True, help="Long-format CSV (a, class, feature, value).")
@click.option("--figure", "fig_path", type=click.Path(), default=None,
              help="Figure output (default: CSV path with .png).")
@handle_errors
def regpath_cmd(data_path, label, estimator, a_grid, hyper_b, seed, standardize,
                burn_in, samples, out_path, fig_path):
    """Regularization path over decreasing shape values, with figure."""
    loaded = load_csv(data_path, label, standardize=standardize)
    fmap = FeatureMap.default(loaded.dataset.d)
    grid = [float(v) for v in a_grid.split(",")]
    seed = int(_resolve(seed, default_seed()))
    cfg = None
    if estimator.startswith("gibbs"):
        cfg = GibbsConfig(burn_in=burn_in, samples=samples)
    path = regularization_path(loaded.dataset, fmap, grid, estimator, hyper_b,
                               cfg, RngStream(seed))
    with open(out_path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["a", "class", "feature", "value", "estimator"])
        writer.writerows(path.to_long_rows())
    fig_path = fig_path or (str(out_path).rsplit(".", 1)[0] + ".png")
    from .plots import render_regpath
    render_regpath(path, fig_path)
    msg = f"wrote {out_path} and {fig_path}"
    if path.failures:
        msg += f"; {len(path.failures)} grid points failed: {path.failures}"
    click.echo(msg)


@main.command("benchmark")
@click.option("--datasets", "dataset_spec", required=True,
              help="Comma-separated: builtin names (iris, wine, pima) or "
                   "name=path:labelcol entries.")
@click.option("--methods", default="pl-gibbs,pl-em,pl-vb,sparse-logit", show_default=True)
@click.option("--replications", type=int, default=20, show_default=True)
@click.option("--split-fraction", type=float, default=2.0 / 3.0, show_default=True)
@click.option("--a", "hyper_a", type=float, default=1.0, show_default=True)
@click.option("--b", "hyper_b", type=float, default=1.0, show_default=True)
@click.option("--burn-in", type=int, default=5000, show_default=True)
@click.option("--samples", type=int, default=5000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out-prefix", default="benchmark", show_default=True,
              help="Writes <prefix>_misclass.{csv,txt} and <prefix>_efficiency.{csv,txt}.")
@handle_errors
def benchmark_cmd(dataset_spec, methods, replications, split_fraction, hyper_a,
                  hyper_b, burn_in, samples, seed, out_prefix):
    """Replicated-split comparison of methods; misclassification + ESS tables."""
    from .datasets import load_builtin

    datasets = {}
    for entry in dataset_spec.split(","):
        entry = entry.strip()
        if "=" in entry:
            name, rest = entry.split("=", 1)
            path, labelcol = rest.rsplit(":", 1)
            datasets[name] = load_csv(path, labelcol).dataset
        else:
            datasets[entry] = load_builtin(entry)
    seed = int(_resolve(seed, default_seed()))
    result = benchmark(datasets, [m.strip() for m in methods.split(",")],
                       replications, split_fraction, seed, hyper_a, hyper_b,
                       GibbsConfig(burn_in=burn_in, samples=samples))
    mis_csv = f"{out_prefix}_misclass.csv"
    with open(mis_csv, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["dataset", "method", "mean_misclass", "std_misclass",
                         "replications", "failures"])
        for r in result.rows:
            writer.writerow([r["dataset"], r["method"], r.get("mean_misclass", ""),
                             r.get("std_misclass", ""), r["replications"],
                             len(r["failed_replications"])])
    with open(f"{out_prefix}_misclass.txt", "w") as fh:
        fh.write(result.to_misclassification_table() + "\n")
    eff_csv = f"{out_prefix}_efficiency.csv"
    with open(eff_csv, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["dataset", "method", "time_s", "min_ess", "time_per_ess"])
        for r in result.rows:
            if r.get("min_ess") is not None:
                writer.writerow([r["dataset"], r["method"], r["sample_time"],
                                 r["min_ess"], r["time_per_ess"]])
    with open(f"{out_prefix}_efficiency.txt", "w") as fh:
        fh.write(result.to_efficiency_table() + "\n")
    click.echo(result.to_misclassification_table())
    click.echo("")
    click.echo(result.to_efficiency_table())
    click.echo(f"\nwrote {mis_csv}, {out_prefix}_misclass.txt, "
               f"{eff_csv}, {out_prefix}_efficiency.txt")


@main.command("diagnose-ess")
@click.option("--chain", "chain_path", type=click.Path(), required=True,
              help="Chain CSV as written by fit-gibbs / fit-logit.")
@click.option("--classes", "n_classes", type=int, required=True,
              help="Number of coefficient rows per draw (K, or K-1 for logit chains).")
@click.option("--wall-time", type=float, default=None,
              help="Sampling seconds for the time/ESS column.")
@click.option("--out", "out_path", type=click.Path(), default="ess.csv", show_default=True)
@click.option("--figure", "fig_path", type=click.Path(), default=None)
@handle_errors
def diagnose_ess_cmd(chain_path, n_classes, wall_time, out_path, fig_path):
    """ESS report (initial monotone sequence estimator) for a stored chain."""
    chain = Chain.from_csv(chain_path, n_classes)
    report = min_ess_report(chain, wall_time=wall_time or 0.0)
    with open(out_path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["coordinate", "ess"])
        writer.writerows(zip(report.coordinate_names, report.ess_values))
    fig_path = fig_path or (str(out_path).rsplit(".", 1)[0] + ".png")
    from .plots import render_ess_bars
    render_ess_bars(report, fig_path)
    click.echo(f"draws: {chain.n_draws}  min ESS: {report.min_ess:.1f}")
    if wall_time:
        click.echo(f"time/ESS: {report.time_per_ess:.4f} s")
    click.echo(f"wrote {out_path} and {fig_path}")


if __name__ == "__main__":  # pragma: no cover
    main()
