"""Command-line pipeline: simulate data, certify regions, compare with closed forms and the oracle.

Exit codes: 0 success, 2 configuration error, 3 numerical or regime error,
4 oracle disagreement.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .bloch import build_basis, is_physical
from .certify import analytic_curves, certify
from .config import ExperimentConfig
from .exceptions import ConfigError, CredRegionError, NumericError
from .hitrun import ChainConfig
from .oracle import oracle_certify
from .plotting import capacity_svg, size_credibility_svg, write_svg
from .storage import DataBundle, load_bundle, read_csv, save_bundle, write_csv, write_json
from .tomography import (
    TomographyLikelihood,
    born_probabilities,
    make_random_povm,
    make_sqrt_measurement,
    mle_fit,
    pauli6_povm,
    random_pure_state,
    simulate_counts,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DISAGREE = 0, 2, 3, 4
Z_GATE = 3.0
MIN_YIELD = 100

logger = logging.getLogger("credregion")


def _meta(cfg: ExperimentConfig) -> dict:
    seeds = cfg.doc["seeds"]
    return {"config_hash": cfg.config_hash, **{f"seed_{k}": v for k, v in sorted(seeds.items())}}


def _out_dir(cfg: ExperimentConfig, args) -> Path:
    return Path(args.out if args.out else cfg.doc["output"])


def _bundle_path(args, out: Path) -> Path:
    return Path(args.bundle) if getattr(args, "bundle", None) else out


def build_povm(cfg: ExperimentConfig):
    kind = cfg.doc["system"]["povm"]
    seed = cfg.doc["seeds"]["povm"]
    if kind == "pauli6":
        return pauli6_povm()
    if kind == "random":
        return make_random_povm(cfg.D, cfg.M, seed)
    return make_sqrt_measurement(cfg.D, cfg.M, seed)


def true_state(cfg: ExperimentConfig) -> np.ndarray:
    choice = cfg.doc["system"]["true_state"]
    d = cfg.D * cfg.D - 1
    if choice == "maximally-mixed":
        return np.zeros(d)
    if choice == "pure-random":
        return random_pure_state(cfg.D, cfg.doc["seeds"]["simulation"] + 1)
    r = np.asarray(choice, dtype=float)
    if not is_physical(r, build_basis(cfg.D)):
        raise ConfigError("system.true_state is not a valid density matrix")
    return r


# -- subcommands --------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    povm = build_povm(cfg)
    r = true_state(cfg)
    p = born_probabilities(r, povm)
    counts = simulate_counts(p, cfg.N, cfg.doc["seeds"]["simulation"])
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    path = save_bundle(out, DataBundle(povm, counts, r, cfg.config_hash, cfg.doc["seeds"]))
    print(f"wrote {path} (D={cfg.D}, M={povm.M}, N={counts.N})")
    return EXIT_OK


def _load_fit(cfg, args, out):
    bundle = load_bundle(_bundle_path(args, out))
    t0 = time.perf_counter()
    fit = mle_fit(bundle.counts, bundle.povm)
    return bundle, fit, time.perf_counter() - t0


def cmd_certify(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    bundle, fit, t_fit = _load_fit(cfg, args, out)
    sm = cfg.doc["sampler"]
    chain_cfg = ChainConfig(
        k_samples=sm["k_samples"],
        burn_in=sm["burn_in"],
        seed=cfg.doc["seeds"]["chain"],
        chains_per_region=sm["chains_per_region"],
    )
    model = TomographyLikelihood(bundle.povm, bundle.counts)
    t0 = time.perf_counter()
    res = certify(
        fit, model, cfg.grid(), prior=cfg.prior(), cfg=chain_cfg,
        inflation=sm["inflation"], smooth=sm["smooth"], threads=args.threads,
    )
    t_cert = time.perf_counter() - t0
    write_csv(out / "certify.csv", res.as_table(), _meta(cfg))
    write_json(
        out / "summary.json",
        {
            **_meta(cfg),
            "r_ml": fit.r_ml,
            "rank": fit.rank,
            "case": fit.case.value,
            "log_l_max": fit.log_l_max,
            "mle_iterations": fit.n_iter,
            "stalled_steps": int(np.sum(res.mc_errors["stalls"])),
            "wall_time_s": {"mle": round(t_fit, 3), "certify": round(t_cert, 3)},
        },
    )
    print(f"case {fit.case.value}, rank {fit.rank}; wrote {out / 'certify.csv'}")
    return EXIT_OK


def cmd_analytic(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    _, fit, _ = _load_fit(cfg, args, out)
    curves = analytic_curves(fit, cfg.grid(), u_form=cfg.doc["sampler"]["u_form"])
    curves["case"] = fit.case.value
    write_csv(out / "analytic.csv", curves, _meta(cfg))
    print(f"case {fit.case.value}; wrote {out / 'analytic.csv'}")
    return EXIT_OK


def cmd_oracle(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    bundle, fit, _ = _load_fit(cfg, args, out)
    model = TomographyLikelihood(bundle.povm, bundle.counts)
    res = oracle_certify(
        cfg.D, cfg.doc["oracle"]["n_samples"], cfg.doc["seeds"]["oracle"], model, cfg.grid(), fit.log_l_max
    )
    write_csv(out / "oracle.csv", res.as_table(), {**_meta(cfg), "n_total": res.n_total})
    print(f"wrote {out / 'oracle.csv'} ({int(res.usable.sum())} of {len(res.n_in)} levels with nonzero yield)")
    if (out / "certify.csv").exists():
        return compare_files(out / "certify.csv", out / "oracle.csv", out / "comparison.csv", _meta(cfg))
    return EXIT_OK


def compare_tables(pipe: dict, orc: dict, min_yield: int = MIN_YIELD) -> dict:
    """Pointwise z-scores of pipeline vs oracle credibility and of the size ratio."""
    lam = pipe["lambda"]
    if lam.shape != orc["lambda"].shape or not np.allclose(lam, orc["lambda"], rtol=1e-12, atol=0):
        raise ConfigError("pipeline and oracle tables use different lambda grids")
    usable = orc["n_in"] >= min_yield
    sig_c = np.hypot(pipe["C_stderr"], orc["C_stderr"])
    dc = pipe["C"] - orc["C"]
    z_c = np.divide(dc, sig_c, out=np.zeros_like(dc), where=sig_c > 0)
    z_c[(sig_c == 0) & (dc != 0)] = np.inf
    # s_rel is normalized at the first level, so compare S_j/S_1 from both sides;
    # s_rel_stderr is the error of exactly that ratio
    n0 = orc["n_in"][0]
    ok = usable & (n0 >= min_yield) & (pipe["s_rel"] > 0)
    ratio = np.full_like(lam, np.nan)
    sig_r = np.full_like(lam, np.nan)
    if n0 > 0:
        frac = orc["n_in"] / n0
        ratio = np.divide(frac, pipe["s_rel"], out=np.full_like(lam, np.nan), where=pipe["s_rel"] > 0)
        rel_orc = np.sqrt(np.divide(1.0 - frac, orc["n_in"], out=np.zeros_like(lam), where=orc["n_in"] > 0))
        rel_pipe = np.divide(pipe["s_rel_stderr"], pipe["s_rel"], out=np.zeros_like(lam), where=pipe["s_rel"] > 0)
        sig_r = ratio * np.hypot(rel_orc, rel_pipe)
    z_r = np.divide(ratio - 1.0, sig_r, out=np.zeros_like(lam), where=ok & (sig_r > 0))
    z_c[~usable] = 0.0
    return {
        "lambda": lam,
        "C_pipeline": pipe["C"],
        "C_oracle": orc["C"],
        "z_C": z_c,
        "size_ratio": ratio,
        "size_ratio_stderr": sig_r,
        "z_ratio": z_r,
        "n_in": orc["n_in"].astype(int),
        "usable": usable.astype(int),
    }


def compare_files(certify_csv, oracle_csv, out_csv, meta=None) -> int:
    pipe = read_csv(certify_csv, ("lambda", "C", "C_stderr", "s_rel", "s_rel_stderr"))
    orc = read_csv(oracle_csv, ("lambda", "C", "C_stderr", "s_abs", "s_abs_stderr", "n_in"))
    table = compare_tables(pipe, orc)
    write_csv(out_csv, table, meta)
    used = table["usable"] == 1
    zc = float(np.max(np.abs(table["z_C"][used]))) if used.any() else 0.0
    zr = float(np.max(np.abs(table["z_ratio"][used]))) if used.any() else 0.0
    agree = zc <= Z_GATE and zr <= Z_GATE
    verdict = "AGREE" if agree else "DISAGREE"
    print(f"{verdict}: {int(used.sum())} usable levels, max |z_C| = {zc:.2f}, max |z_ratio| = {zr:.2f} (gate {Z_GATE})")
    return EXIT_OK if agree else EXIT_DISAGREE


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    pipe = Path(args.certify_csv) if args.certify_csv else out / "certify.csv"
    orc = Path(args.oracle_csv) if args.oracle_csv else out / "oracle.csv"
    return compare_files(pipe, orc, out / "comparison.csv", _meta(cfg))


def cmd_plot(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args)
    sampled, analytic = None, None
    for path in args.csv:
        table = read_csv(path)
        if "s_rel" in table:
            sampled = read_csv(path, ("lambda", "s_rel", "C", "S_HS"))
        elif "C_analytic" in table:
            analytic = read_csv(path, ("lambda", "C_analytic", "s2_analytic"))
        else:
            raise ConfigError(f"{path} is neither a certify nor an analytic table")
    written = []
    if sampled is not None:
        written.append(write_svg(out / "size_credibility.svg", size_credibility_svg(sampled)))
        written.append(write_svg(out / "capacity.svg", capacity_svg(sampled, analytic)))
    elif analytic is not None:
        table = {"C": analytic["C_analytic"], "S_HS": analytic["s2_analytic"]}
        written.append(write_svg(out / "capacity.svg", capacity_svg(table, None, "Analytic S_HS versus credibility")))
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "analytic": cmd_analytic,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON (defaults are used when omitted)")
    common.add_argument("--set", action="append", default=[], metavar="DOT.PATH=VALUE", help="override a config field")
    common.add_argument("--out", help="output directory (overrides the config's 'output')")
    common.add_argument("--seed", type=int, help="master seed; derives every stage seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for chain blocks")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="credregion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate measurement counts")
    for name, text in (
        ("certify", "sample the regions and write size/credibility/capacity curves"),
        ("analytic", "write the closed-form curves for the fitted data"),
        ("oracle", "brute-force filtering reference (D <= 3)"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--bundle", help="data bundle directory or bundle.json (default: output directory)")
    p = sub.add_parser("compare", parents=[common], help="z-scores of pipeline vs oracle")
    p.add_argument("--certify-csv")
    p.add_argument("--oracle-csv")
    p = sub.add_parser("plot", parents=[common], help="render SVG plots from result CSVs")
    p.add_argument("csv", nargs="+")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = ExperimentConfig.load(args.config, args.set) if args.config else ExperimentConfig.from_doc({}, args.set)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CredRegionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
