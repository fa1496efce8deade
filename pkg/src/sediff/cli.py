"""Command-line driver wiring the library into batch experiments.

Subcommands map one-to-one onto the library modules: ``generate`` writes a
synthetic corpus, ``train`` fits the small score model on one, ``enhance``
runs the reverse sampler over a WAV file or a corpus manifest, ``verify``
runs the analytic check suite, and ``sweep-steps`` measures enhancement
quality as a function of the reverse-step count.

Configuration is layered: built-in defaults, then a TOML file (--config)
with [schedule], [stft], [sampler], [train], and [corpus] sections, then
command-line flags.  A flag that conflicts with a file value wins and the
override is logged.  Every command accepts --seed, is deterministic under
it, and records the resolved configuration in its output directory as
``resolved_config.toml`` (loadable back through --config).

Exit codes: 0 success, 1 verification or run failure, 2 usage error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import wave
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from sediff.corpus import CorpusSpec, generate, load_pair, read_manifest, write_corpus
from sediff.metrics import log_spectral_distance, si_sdr
from sediff.sampler import SamplerConfig, SamplerDiverged, enhance, enhance_early_stop
from sediff.schedule import Schedule, Variant, parse_variant
from sediff.score import (
    CheckpointMismatch,
    ScoreFn,
    TrainConfig,
    TrainingDiverged,
    load_checkpoint,
    moving_average,
    oracle_score,
    save_checkpoint,
    train_small_model,
)
from sediff.spectral import StftConfig, Waveform, analyze, read_wav, write_wav
from sediff.verify import verify_all, write_report

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_IO = 3

log = logging.getLogger("sediff")


class UsageError(ValueError):
    """Invalid flag or config-file input; maps to exit code 2."""


_SECTION_TYPES = {
    "schedule": Schedule,
    "stft": StftConfig,
    "sampler": SamplerConfig,
    "train": TrainConfig,
    "corpus": CorpusSpec,
}


def load_config_file(path: str | None) -> dict:
    """Parse and validate the TOML config; unknown sections or keys fail."""
    if path is None:
        return {}
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"invalid TOML in {path}: {exc}") from exc
    unknown = set(raw) - set(_SECTION_TYPES)
    if unknown:
        raise UsageError(f"unknown config sections: {sorted(unknown)}")
    for section, values in raw.items():
        if not isinstance(values, dict):
            raise UsageError(f"[{section}] must be a table of keys")
        known = {f.name for f in dataclasses.fields(_SECTION_TYPES[section])}
        bad = set(values) - known
        if bad:
            raise UsageError(f"unknown keys in [{section}]: {sorted(bad)}")
    return raw


def build_section(section: str, file_cfg: dict, flags: dict):
    """Merge defaults <- config file <- flags; a conflicting flag wins, logged."""
    merged = dict(file_cfg.get(section, {}))
    for key, value in flags.items():
        if value is None:
            continue
        if key in merged and merged[key] != value:
            log.info(
                "flag --%s=%s overrides [%s] %s=%s",
                key.replace("_", "-"),
                value,
                section,
                key,
                merged[key],
            )
        merged[key] = value
    if section == "schedule" and "variant" in merged:
        merged["variant"] = parse_variant(merged["variant"])
    if section == "corpus" and "snr_levels_db" in merged:
        merged["snr_levels_db"] = tuple(float(v) for v in merged["snr_levels_db"])
    try:
        return _SECTION_TYPES[section](**merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid [{section}] configuration: {exc}") from exc


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return repr(value)


def write_resolved_config(out_dir: Path, sections: dict) -> Path:
    """Record the post-merge configuration; the file round-trips via --config."""
    lines = []
    for name, obj in sections.items():
        lines.append(f"[{name}]")
        for field in dataclasses.fields(obj):
            value = getattr(obj, field.name)
            if isinstance(value, Variant):
                value = value.value
            if value is None:
                continue
            lines.append(f"{field.name} = {_toml_value(value)}")
        lines.append("")
    path = out_dir / "resolved_config.toml"
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


def _parse_number_list(text: str, kind, flag: str) -> list:
    items = [part.strip() for part in text.split(",") if part.strip()]
    if not items:
        raise UsageError(f"{flag} must list at least one value")
    try:
        return [kind(part) for part in items]
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from exc


def _make_out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_schedule(file_cfg: dict, args) -> Schedule:
    return build_section(
        "schedule",
        file_cfg,
        {
            "variant": getattr(args, "variant", None),
            "gamma": getattr(args, "gamma", None),
            "epsilon": getattr(args, "epsilon", None),
        },
    )


def _load_corpus_pairs(
    manifest_path: str, stft: StftConfig
) -> list[tuple[Waveform, Waveform, dict]]:
    """Read (clean, noisy, row) triples for every manifest entry."""
    rows = read_manifest(manifest_path)
    out = []
    for row in rows:
        clean, noisy = load_pair(row["clean"], row["noisy"])
        if clean.sample_rate != stft.sample_rate:
            raise UsageError(
                f"corpus rate {clean.sample_rate} != stft rate {stft.sample_rate}"
            )
        out.append((clean, noisy, row))
    return out


def _resolve_score(
    args, s: Schedule, clean_spec=None
) -> ScoreFn:
    """Build the score function named by --score.

    Oracle mode needs the item's clean spectrum and is rebuilt per item;
    checkpoint mode loads once and is reused.
    """
    if args.score == "oracle":
        if clean_spec is None:
            raise UsageError(
                "--score oracle requires clean references "
                "(a corpus manifest, or --clean with a single WAV)"
            )
        return oracle_score(clean_spec, s)
    if args.checkpoint is None:
        raise UsageError("--score checkpoint requires --checkpoint PATH")
    return load_checkpoint(args.checkpoint, s)


def _enhance_one(
    noisy: Waveform, psi: ScoreFn, s: Schedule, cfg: SamplerConfig, stft: StftConfig
) -> Waveform:
    if cfg.mode == "early_stop":
        return enhance_early_stop(noisy, psi, s, cfg, stft)
    return enhance(noisy, psi, s, cfg, stft)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    file_cfg = load_config_file(args.config)
    snr = (
        tuple(_parse_number_list(args.snr_db, float, "--snr-db"))
        if args.snr_db
        else None
    )
    spec = build_section(
        "corpus",
        file_cfg,
        {
            "n_utterances": args.n_utterances,
            "duration_s": args.duration_s,
            "snr_levels_db": snr,
            "clean_kind": args.clean_kind,
            "noise_kind": args.noise_kind,
            "seed": args.seed,
        },
    )
    out_dir = _make_out_dir(args, "corpus_out")
    items = generate(spec)
    manifest = write_corpus(items, out_dir, spec.seed)
    write_resolved_config(out_dir, {"corpus": spec})
    log.info("wrote %d pairs under %s", len(items), out_dir)
    print(manifest)
    return EXIT_OK


def cmd_train(args) -> int:
    file_cfg = load_config_file(args.config)
    s = _build_schedule(file_cfg, args)
    stft = build_section("stft", file_cfg, {})
    tcfg = build_section(
        "train",
        file_cfg,
        {
            "steps": args.steps,
            "learning_rate": args.learning_rate,
            "batch_size": args.batch_size,
            "optimizer": args.optimizer,
            "seed": args.seed,
        },
    )
    triples = _load_corpus_pairs(args.manifest, stft)
    pairs = [(analyze(c, stft), analyze(n, stft)) for c, n, _ in triples]
    out_dir = _make_out_dir(args, "train_out")
    model, trace = train_small_model(pairs, tcfg, s)
    ckpt = out_dir / "checkpoint.json"
    save_checkpoint(model, ckpt, train_seed=tcfg.seed)
    ma = moving_average(trace, tcfg.loss_window)
    with open(out_dir / "loss_trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "moving_average"])
        for i, (lo, mu) in enumerate(zip(trace, ma)):
            writer.writerow([i, f"{lo:.8g}", f"{mu:.8g}"])
    write_resolved_config(out_dir, {"schedule": s, "stft": stft, "train": tcfg})
    first = ma[min(tcfg.loss_window, len(ma)) - 1]
    reduction = 100.0 * (1.0 - ma[-1] / first) if first > 0 else 0.0
    log.info(
        "trained %d steps on %d pairs; smoothed loss %.4g -> %.4g (%.1f%% reduction)",
        tcfg.steps,
        len(pairs),
        first,
        ma[-1],
        reduction,
    )
    print(ckpt)
    return EXIT_OK


def _enhance_items(args, file_cfg) -> int:
    """Shared body of cmd_enhance: resolve inputs, run, write WAVs + metrics."""
    s = _build_schedule(file_cfg, args)
    stft = build_section("stft", file_cfg, {})
    mode = args.mode.replace("-", "_") if args.mode else None
    cfg = build_section(
        "sampler",
        file_cfg,
        {
            "n_steps": args.k,
            "early_stop_steps": args.k1,
            "seed": args.seed,
            "mode": mode,
            "output": args.output,
        },
    )

    in_path = Path(args.inp)
    if in_path.suffix.lower() == ".wav":
        noisy = read_wav(in_path)
        clean = read_wav(args.clean) if args.clean else None
        items = [(clean, noisy, {"index": 0, "stem": in_path.stem})]
    else:
        items = [
            (c, n, dict(row, stem=f"{row['index']:04d}"))
            for c, n, row in _load_corpus_pairs(args.inp, stft)
        ]
    if not items:
        raise UsageError(f"no inputs found in {args.inp}")

    shared_score = None
    if args.score == "checkpoint":
        shared_score = _resolve_score(args, s)

    out_dir = _make_out_dir(args, "enhance_out")
    metric_rows = []
    for clean, noisy, row in items:
        psi = shared_score or _resolve_score(
            args, s, clean_spec=analyze(clean, stft) if clean is not None else None
        )
        enhanced = _enhance_one(noisy, psi, s, cfg, stft)
        name = f"enhanced_{row['stem']}.wav"
        write_wav(out_dir / name, enhanced)
        if clean is not None:
            in_db = si_sdr(clean, noisy)
            out_db = si_sdr(clean, enhanced)
            metric_rows.append(
                {
                    "file": name,
                    "snr_db": row.get("snr_db", ""),
                    "input_si_sdr_db": f"{in_db:.4f}",
                    "output_si_sdr_db": f"{out_db:.4f}",
                    "improvement_db": f"{out_db - in_db:.4f}",
                    "lsd_db": f"{log_spectral_distance(analyze(clean, stft), analyze(enhanced, stft)):.4f}",
                }
            )

    if metric_rows:
        with open(out_dir / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(metric_rows[0]))
            writer.writeheader()
            writer.writerows(metric_rows)
        mean_gain = sum(float(r["improvement_db"]) for r in metric_rows) / len(
            metric_rows
        )
        log.info(
            "enhanced %d file(s); mean SI-SDR improvement %.2f dB",
            len(items),
            mean_gain,
        )
    else:
        log.info("enhanced %d file(s); no references, metrics skipped", len(items))
    write_resolved_config(out_dir, {"schedule": s, "stft": stft, "sampler": cfg})
    print(out_dir)
    return EXIT_OK


def cmd_enhance(args) -> int:
    return _enhance_items(args, load_config_file(args.config))


def cmd_sweep_steps(args) -> int:
    file_cfg = load_config_file(args.config)
    s = _build_schedule(file_cfg, args)
    stft = build_section("stft", file_cfg, {})
    k_values = _parse_number_list(args.k_list, int, "--k-list")

    triples = _load_corpus_pairs(args.manifest, stft)
    shared_score = None
    if args.score == "checkpoint":
        shared_score = _resolve_score(args, s)

    out_dir = _make_out_dir(args, "sweep_out")
    results = []
    cfg = None
    for k in k_values:
        cfg = build_section(
            "sampler",
            file_cfg,
            {"n_steps": k, "seed": args.seed, "output": args.output},
        )
        si_vals, lsd_vals = [], []
        for clean, noisy, _row in triples:
            psi = shared_score or _resolve_score(args, s, clean_spec=analyze(clean, stft))
            enhanced = _enhance_one(noisy, psi, s, cfg, stft)
            si_vals.append(si_sdr(clean, enhanced))
            lsd_vals.append(
                log_spectral_distance(analyze(clean, stft), analyze(enhanced, stft))
            )
        mean_si = sum(si_vals) / len(si_vals)
        mean_lsd = sum(lsd_vals) / len(lsd_vals)
        results.append((k, mean_si, mean_lsd))
        log.info("K=%d: mean SI-SDR %.2f dB, mean LSD %.2f dB", k, mean_si, mean_lsd)

    with open(out_dir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "mean_si_sdr_db", "mean_lsd_db"])
        for k, mean_si, mean_lsd in results:
            writer.writerow([k, f"{mean_si:.4f}", f"{mean_lsd:.4f}"])
    write_resolved_config(out_dir, {"schedule": s, "stft": stft, "sampler": cfg})
    print(out_dir / "sweep.csv")
    return EXIT_OK


def cmd_verify(args) -> int:
    file_cfg = load_config_file(args.config)
    s = _build_schedule(file_cfg, args)
    include_ve = s.variant is Variant.VE_INTERP
    results = verify_all(
        s, seed=args.seed or 0, perturb_g=args.perturb_g, include_ve=include_ve
    )
    out_dir = _make_out_dir(args, "verify_out")
    write_report(results, out_dir / "verify_report.csv")
    write_resolved_config(out_dir, {"schedule": s})
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status}  {res.name:32s} measured={res.measured:.3e} tol={res.tolerance:.3e}")
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} checks passed; report: {out_dir / 'verify_report.csv'}")
    return EXIT_OK if n_pass == len(results) else EXIT_FAILURE


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--seed", type=int, help="master seed for this command")
    p.add_argument("--out", help="output directory")


def _add_schedule_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--variant",
        help="process variant: vp-interp (default), vp-plain, ve-interp, or aliases",
    )
    p.add_argument("--gamma", type=float, help="interpolation rate toward the noisy spectrum")
    p.add_argument("--epsilon", type=float, help="smallest process time on the grid")


def _add_score_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--score",
        choices=("oracle", "checkpoint"),
        default="oracle",
        help="score function: exact oracle (needs clean references) or a trained checkpoint",
    )
    p.add_argument("--checkpoint", help="checkpoint path for --score checkpoint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sediff",
        description="Diffusion-based speech enhancement: corpus, training, sampling, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic clean/noisy corpus")
    _add_common(p)
    p.add_argument("--n-utterances", type=int, help="number of clean utterances")
    p.add_argument("--duration-s", type=float, help="utterance length in seconds")
    p.add_argument("--snr-db", help="comma-separated mixing SNRs, e.g. -5,0,5")
    p.add_argument(
        "--clean-kind", choices=("multisine", "chirp", "filtered_noise"), help="clean signal family"
    )
    p.add_argument(
        "--noise-kind", choices=("white", "pink", "babble_proxy"), help="noise family"
    )
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit the small score model on a corpus")
    _add_common(p)
    _add_schedule_flags(p)
    p.add_argument("--manifest", required=True, help="corpus manifest (JSON lines)")
    p.add_argument("--steps", type=int, help="number of parameter updates")
    p.add_argument("--learning-rate", type=float, help="optimizer step size")
    p.add_argument("--batch-size", type=int, help="utterance pairs per update")
    p.add_argument("--optimizer", choices=("sgd", "adam"), help="update rule")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="run the reverse sampler over WAV or manifest input")
    _add_common(p)
    _add_schedule_flags(p)
    _add_score_flags(p)
    p.add_argument("--in", dest="inp", required=True, help="noisy WAV file or corpus manifest")
    p.add_argument("--clean", help="clean reference WAV (single-file mode)")
    p.add_argument("--mode", choices=("full", "early-stop"), help="reverse pass length")
    p.add_argument("--k", type=int, help="number of grid times")
    p.add_argument("--k1", type=int, help="reverse steps taken in early-stop mode")
    p.add_argument(
        "--output",
        choices=("denoised", "raw_state"),
        help="full-mode output: score-denoised spectrum or the raw final state",
    )
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("sweep-steps", help="mean metrics per reverse-step count")
    _add_common(p)
    _add_schedule_flags(p)
    _add_score_flags(p)
    p.add_argument("--manifest", required=True, help="corpus manifest (JSON lines)")
    p.add_argument("--k-list", required=True, help="comma-separated step counts, e.g. 5,10,15,20,25")
    p.add_argument(
        "--output",
        choices=("denoised", "raw_state"),
        help="full-mode output: score-denoised spectrum or the raw final state",
    )
    p.set_defaults(func=cmd_sweep_steps)

    p = sub.add_parser("verify", help="run the analytic check suite")
    _add_common(p)
    _add_schedule_flags(p)
    p.add_argument(
        "--perturb-g",
        type=float,
        default=0.0,
        help="inject a relative error into the diffusion coefficient (its check must fail)",
    )
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except CheckpointMismatch as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (OSError, wave.Error, json.JSONDecodeError) as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO
    except (SamplerDiverged, TrainingDiverged) as exc:
        log.error("run failed: %s", exc)
        return EXIT_FAILURE
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
