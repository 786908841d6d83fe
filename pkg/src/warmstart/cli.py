"""Command-line entry point tying the pipeline stages together.

Subcommands: transplant, prepare-corpus, sample-batches, lr-curve, memplan,
stats. Every value can come from a `key = value` config file (--config) with
command-line flags taking precedence; the seed falls back to the
WARMSTART_SEED environment variable, then 0. Errors exit 1 with a single
machine-parsable line on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .batcher import assemble, padding_stats, plan_accumulation
from .config import (
    ConfigError,
    append_run_log,
    parse_bool,
    parse_config_file,
    resolve,
    resolve_seed,
)
from .corpus import SequenceStoreReader, TokenSequence, chunk_corpus, write_store
from .errors import WarmstartError
from .masking import MaskKey, MaskMode, MaskSpec, make_example
from .memplan import (
    HardwareSpec,
    MemoryReport,
    ModelSpec,
    PrecisionMode,
    estimate,
    interconnect_compare,
    recommend,
)
from .schedule import LrSchedule, iter_curve
from .transplant import read_embeddings, transplant, write_embeddings
from .translate import (
    DictionaryProvider,
    IdentityProvider,
    RemoteTranslationProvider,
    TranslationTable,
    normalize_token,
    translate_all,
)
from .vocab import DEFAULT_BOUNDARY_MARKER, Vocabulary, load_vocab, tokenize_greedy


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"missing required value: {flag}")
    return value


def _parse_rate_limit(raw: str) -> float:
    """Accept `N` or `N/s` request-per-second forms."""
    text = raw.strip()
    if text.endswith("/s"):
        text = text[: -len("/s")]
    try:
        value = float(text)
    except ValueError as e:
        raise ConfigError(f"cannot parse rate limit {raw!r}") from e
    if value <= 0:
        raise ConfigError("rate limit must be positive")
    return value


def _parse_gib(raw: str) -> int:
    """Gibibytes (possibly fractional) to an exact byte count."""
    try:
        gib = Fraction(raw.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"cannot parse memory size {raw!r}") from e
    if gib <= 0:
        raise ConfigError("memory size must be positive")
    return round(gib * 2**30)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--run-log", default=None, help="provenance log path")


def _add_vocab_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--pad-id", type=int, default=None)
    sub.add_argument("--eos-id", type=int, default=None)
    sub.add_argument("--unk-id", type=int, default=None)
    sub.add_argument("--sentinel-count", type=int, default=None)
    sub.add_argument("--boundary-marker", default=None)


def _vocab_params(args, cfg) -> dict:
    return {
        "pad_id": resolve(args.pad_id, cfg, "pad_id", 0, int),
        "eos_id": resolve(args.eos_id, cfg, "eos_id", 1, int),
        "unk_id": resolve(args.unk_id, cfg, "unk_id", 2, int),
        "sentinel_count": resolve(args.sentinel_count, cfg, "sentinel_count", 100, int),
        "boundary_marker": resolve(
            args.boundary_marker, cfg, "boundary_marker", DEFAULT_BOUNDARY_MARKER
        ),
    }


def _load_config(args) -> dict[str, str]:
    if args.config is None:
        return {}
    return parse_config_file(args.config)


def _build_provider(args, cfg):
    name = resolve(args.provider, cfg, "provider", "identity")
    if name == "identity":
        return IdentityProvider()
    if name == "dict":
        path = _require(resolve(args.dict_file, cfg, "dict_file", None), "--dict-file")
        return DictionaryProvider.from_file(path)
    if name == "remote":
        url = _require(resolve(args.remote_url, cfg, "remote_url", None), "--remote-url")
        rate_raw = resolve(args.rate_limit, cfg, "rate_limit", None)
        return RemoteTranslationProvider(
            url=url,
            source_lang=resolve(args.source_lang, cfg, "source_lang", None),
            target_lang=resolve(args.target_lang, cfg, "target_lang", "en"),
            rate_limit_per_s=None if rate_raw is None else _parse_rate_limit(rate_raw),
            timeout_ms=resolve(args.timeout_ms, cfg, "timeout_ms", 10000, int),
        )
    raise ConfigError(f"unknown provider {name!r} (expected dict, remote or identity)")


def cmd_transplant(args) -> int:
    cfg = _load_config(args)
    seed = resolve_seed(args.seed, cfg)
    vp = _vocab_params(args, cfg)
    src_vocab_path = _require(resolve(args.src_vocab, cfg, "src_vocab", None), "--src-vocab")
    tgt_vocab_path = _require(resolve(args.tgt_vocab, cfg, "tgt_vocab", None), "--tgt-vocab")
    src_emb_path = _require(resolve(args.src_emb, cfg, "src_emb", None), "--src-emb")
    out_path = _require(resolve(args.out, cfg, "out", None), "--out")
    report_path = resolve(args.report, cfg, "report", None)
    cache_path = resolve(args.cache, cfg, "cache", None)
    retry_failed = resolve(args.retry_failed, cfg, "retry_failed", False, parse_bool)

    src = load_vocab(src_vocab_path, **vp)
    tgt = load_vocab(tgt_vocab_path, **vp)
    src_emb = read_embeddings(src_emb_path)
    provider = _build_provider(args, cfg)

    if cache_path is not None and Path(cache_path).exists():
        table = TranslationTable.load(cache_path, persist=True)
    else:
        table = TranslationTable(persist_path=cache_path)

    specials = tgt.special_ids()
    pending = [tok for i, tok in enumerate(tgt.tokens) if i not in specials]
    translate_all(
        table,
        provider,
        pending,
        boundary_marker=tgt.boundary_marker,
        retry_failed=retry_failed,
    )

    out_emb, report = transplant(src_emb, src, tgt, table)
    write_embeddings(out_emb, out_path)

    if report_path is not None:
        payload = {
            "report": report.as_dict(),
            "seed": seed,
            "provider": provider.name,
            "notes": [
                "special tokens copied by role (pad, eos, unk, sentinel k)",
                "unk-only rows inherit the unknown-token embedding",
            ],
        }
        with open(report_path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")

    r = report.as_dict()
    print(
        f"transplanted {r['total_tokens']} tokens: "
        f"{r['translated_count']} translated, {r['failed_count']} failed, "
        f"{r['bypassed_count']} bypassed, {r['specials_copied']} specials copied"
    )
    values = {"subcommand": "transplant", "src_emb": src_emb_path, "out": out_path}
    append_run_log("transplant", values, seed, path=args.run_log)
    return 0


def _read_documents(input_path, vocab: Vocabulary):
    """Directory: each *.txt file (name-sorted) is one document. Single
    file: blank-line-separated blocks are documents."""
    p = Path(input_path)
    if p.is_dir():
        files = sorted(p.glob("*.txt"))
        if not files:
            raise ConfigError(f"{input_path}: no *.txt files found")
        for path in files:
            text = path.read_text(encoding="utf-8")
            ids = tokenize_greedy(vocab, " ".join(text.split()))
            if ids:
                yield ids
    else:
        text = p.read_text(encoding="utf-8")
        for block in text.split("\n\n"):
            ids = tokenize_greedy(vocab, " ".join(block.split()))
            if ids:
                yield ids


def cmd_prepare_corpus(args) -> int:
    cfg = _load_config(args)
    seed = resolve_seed(args.seed, cfg)
    vp = _vocab_params(args, cfg)
    vocab_path = _require(resolve(args.vocab, cfg, "vocab", None), "--vocab")
    input_path = _require(resolve(args.input, cfg, "input", None), "--in")
    out_path = _require(resolve(args.out, cfg, "out", None), "--out")
    seq_len = resolve(args.seq_len, cfg, "seq_len", 512, int)
    min_tail = resolve(args.min_tail, cfg, "min_tail", 16, int)

    vocab = load_vocab(vocab_path, **vp)
    seqs = chunk_corpus(_read_documents(input_path, vocab), seq_len, min_tail)
    count = write_store(seqs, out_path)
    reader = SequenceStoreReader(out_path)
    total = sum(reader.lengths())
    print(f"sequences={count} tokens={total} seq_len={seq_len} min_tail={min_tail}")
    values = {"subcommand": "prepare-corpus", "input": input_path, "out": out_path}
    append_run_log("prepare-corpus", values, seed, path=args.run_log)
    return 0


def cmd_sample_batches(args) -> int:
    cfg = _load_config(args)
    seed = resolve_seed(args.seed, cfg)
    vp = _vocab_params(args, cfg)
    store_path = _require(resolve(args.store, cfg, "store", None), "--store")
    vocab_path = _require(resolve(args.vocab, cfg, "vocab", None), "--vocab")
    epoch = resolve(args.epoch, cfg, "epoch", 0, int)
    mode = MaskMode(resolve(args.mode, cfg, "mode", "span"))
    rate = resolve(args.rate, cfg, "rate", 0.15, float)
    mean_span = resolve(args.mean_span, cfg, "mean_span", 3.0, float)
    micro = resolve(args.micro_batch, cfg, "micro_batch", 16, int)
    effective = resolve(args.effective_batch, cfg, "effective_batch", 128, int)
    sort_by_length = resolve(args.sort_by_length, cfg, "sort_by_length", False, parse_bool)
    out_format = resolve(args.format, cfg, "format", "text")
    out_path = resolve(args.out, cfg, "out", None)
    report_path = resolve(args.report, cfg, "report", None)
    if out_format not in ("text", "binary"):
        raise ConfigError(f"unknown format {out_format!r} (expected text or binary)")
    if out_format == "binary" and out_path is None:
        raise ConfigError("--out is required with --format binary")

    vocab = load_vocab(vocab_path, **vp)
    spec = MaskSpec(rate=rate, mean_span=mean_span, mode=mode)
    plan = plan_accumulation(effective, micro)
    reader = SequenceStoreReader(store_path)

    order = list(range(reader.count))
    if sort_by_length:
        lengths = reader.lengths()
        order.sort(key=lambda i: lengths[i])  # stable: ties keep store order

    examples = []
    indices = []
    for i in order:
        seq = reader.read(i)
        key = MaskKey(seed=seed, epoch=epoch, seq_index=i)
        examples.append(make_example(seq, spec, key, vocab))
        indices.append(i)

    batches = [
        (indices[s : s + micro], examples[s : s + micro])
        for s in range(0, len(examples), micro)
    ]

    report_lines = []
    real_cells = 0
    total_cells = 0
    for b, (_, exs) in enumerate(batches):
        batch = assemble(exs, micro, vocab.pad_id)
        stats = padding_stats(batch)
        real = sum(batch.input_lengths) + sum(batch.target_lengths)
        cells = batch.rows * (batch.width_in + batch.width_tgt)
        real_cells += real
        total_cells += cells
        report_lines.append(
            f"batch={b} rows={batch.rows} width_in={batch.width_in} "
            f"width_tgt={batch.width_tgt} input_eff={stats.input_efficiency} "
            f"target_eff={stats.target_efficiency} combined={stats.combined}"
        )
    if report_path is not None:
        with open(report_path, "w", encoding="utf-8") as f:
            for line in report_lines:
                f.write(line + "\n")

    if out_format == "text":
        lines = (
            f"{i}\t{' '.join(map(str, ex.input_ids))}\t{' '.join(map(str, ex.target_ids))}\n"
            for i, ex in zip(indices, examples)
        )
        if out_path is None:
            for line in lines:
                sys.stdout.write(line)
        else:
            with open(out_path, "w", encoding="utf-8") as f:
                for line in lines:
                    f.write(line)
    else:
        write_store(
            (TokenSequence(ids=ex.input_ids, seq_index=i) for i, ex in zip(indices, examples)),
            f"{out_path}.inputs.seqs",
        )
        write_store(
            (TokenSequence(ids=ex.target_ids, seq_index=i) for i, ex in zip(indices, examples)),
            f"{out_path}.targets.seqs",
        )

    overall = Fraction(real_cells, total_cells) if total_cells else None
    print(
        f"plan: micro={plan.micro_batch_size} steps={plan.accumulation_steps} "
        f"effective={plan.effective_batch}"
    )
    print(
        f"batches={len(batches)} sequences={len(examples)} epoch={epoch} "
        f"mode={mode.value} seed={seed}"
        + ("" if overall is None else f" efficiency={float(overall):.4f}")
    )
    values = {
        "subcommand": "sample-batches",
        "store": store_path,
        "epoch": epoch,
        "mode": mode.value,
    }
    append_run_log("sample-batches", values, seed, path=args.run_log)
    return 0


def cmd_lr_curve(args) -> int:
    cfg = _load_config(args)
    seed = resolve_seed(args.seed, cfg)
    peak = resolve(args.peak, cfg, "peak", 4e-3, float)
    warmup = resolve(args.warmup, cfg, "warmup", 5000, int)
    total = resolve(args.total, cfg, "total", None, int)
    shape = resolve(args.shape, cfg, "shape", "linear")
    stride = resolve(args.stride, cfg, "stride", 1, int)
    out_path = resolve(args.out, cfg, "out", None)

    if total is None:
        store_path = resolve(args.store, cfg, "store", None)
        if store_path is None:
            raise ConfigError("need --total, or --store to derive it from")
        epochs = resolve(args.epochs, cfg, "epochs", 10, int)
        effective = resolve(args.effective_batch, cfg, "effective_batch", 128, int)
        count = SequenceStoreReader(store_path).count
        total = math.ceil(epochs * count / effective)
        print(f"derived total={total} from {count} sequences x {epochs} epochs / {effective}")

    sched = LrSchedule(total_steps=total, peak=peak, warmup_steps=warmup, shape=shape)
    rows = [f"step,lr\n"]
    rows.extend(f"{step},{rate:.17g}\n" for step, rate in iter_curve(sched, stride))
    if out_path is None:
        sys.stdout.writelines(rows)
    else:
        with open(out_path, "w", encoding="utf-8") as f:
            f.writelines(rows)
        print(f"wrote {len(rows) - 1} points to {out_path}")
    values = {"subcommand": "lr-curve", "peak": peak, "warmup": warmup, "total": total}
    append_run_log("lr-curve", values, seed, path=args.run_log)
    return 0


def _print_memory_report(title: str, rep: MemoryReport) -> None:
    print(f"{title}:")
    print(f"  weights      {rep.weights_bytes:,} B")
    print(f"  gradients    {rep.gradients_bytes:,} B")
    print(f"  optimizer    {rep.optimizer_bytes:,} B ({rep.optimizer_location.value})")
    print(f"  gpu total    {rep.gpu_total_bytes:,} B")
    if rep.cpu_total_bytes:
        print(f"  cpu total    {rep.cpu_total_bytes:,} B")
    if rep.fits is not None:
        print(f"  per gpu      {rep.per_gpu_bytes:,} B")
        print(f"  fits         {'yes' if rep.fits else 'no'}")
        print(f"  headroom     {float(rep.headroom_fraction):.4f}")


def cmd_memplan(args) -> int:
    cfg = _load_config(args)
    seed = resolve_seed(args.seed, cfg)
    params = _require(resolve(args.params, cfg, "params", None, int), "--params")
    precision = PrecisionMode.parse(resolve(args.precision, cfg, "precision", "fp32"))
    offload = resolve(args.offload, cfg, "offload", False, parse_bool)
    gpus = resolve(args.gpus, cfg, "gpus", 1, int)
    gpu_mem = resolve(args.gpu_mem, cfg, "gpu_mem", None)
    ram = resolve(args.ram, cfg, "ram", None)
    nvlink = resolve(args.nvlink, cfg, "nvlink", False, parse_bool)

    model = ModelSpec(param_count=params)
    hardware = None
    if gpu_mem is not None or ram is not None:
        if gpu_mem is None or ram is None:
            raise ConfigError("--gpu-mem and --ram must be given together")
        hardware = HardwareSpec(
            gpu_count=gpus,
            gpu_memory_bytes=_parse_gib(str(gpu_mem)),
            system_ram_bytes=_parse_gib(str(ram)),
            nvlink_pairs=nvlink,
        )

    rep = estimate(model, precision, offload, hardware)
    _print_memory_report(f"memory for {params:,} parameters ({precision.flag})", rep)
    for note in rep.notes:
        print(f"  note: {note}")

    kv = {
        "params": params,
        "precision": precision.flag,
        "offload": str(offload).lower(),
        "weights_bytes": rep.weights_bytes,
        "gradients_bytes": rep.gradients_bytes,
        "optimizer_bytes": rep.optimizer_bytes,
        "optimizer_location": rep.optimizer_location.value,
        "gpu_total_bytes": rep.gpu_total_bytes,
        "cpu_total_bytes": rep.cpu_total_bytes,
        "per_gpu_bytes": rep.per_gpu_bytes,
    }
    if rep.fits is not None:
        kv["fits"] = str(rep.fits).lower()
        kv["headroom"] = str(rep.headroom_fraction)

    if hardware is not None:
        inter = interconnect_compare(hardware)
        print("interconnect:")
        if not inter.applicable:
            print("  not applicable (single GPU)")
        else:
            print(f"  gpu-to-gpu path: {inter.gpu_to_gpu_path}")
            for note in inter.notes:
                print(f"  {note}")
        kv["nvlink_min_gb_s"] = inter.nvlink_min_gb_s
        kv["nvlink_max_gb_s"] = inter.nvlink_max_gb_s
        kv["pcie4_gb_s"] = inter.pcie4_gb_s

        rec = recommend(model, hardware)
        print("recommendation:")
        if not rec.actions:
            print("  fits as-is; no action required")
        for i, action in enumerate(rec.actions, start=1):
            print(f"  {i}. {action}")
        for note in rec.notes:
            print(f"  note: {note}")
        kv["recommend_fits"] = str(rec.fits).lower()
        kv["recommend_actions"] = "; ".join(rec.actions)

    print("---")
    for key, value in kv.items():
        print(f"{key}={value}")
    append_run_log("memplan", {"subcommand": "memplan", "params": params}, seed, path=args.run_log)
    return 0


def cmd_stats(args) -> int:
    cfg = _load_config(args)
    seed = resolve_seed(args.seed, cfg)
    store_path = _require(resolve(args.store, cfg, "store", None), "--store")
    reader = SequenceStoreReader(store_path)
    lengths = reader.lengths()
    print(f"sequences={reader.count}")
    print(f"tokens={sum(lengths)}")
    if lengths:
        mean = sum(lengths) / len(lengths)
        print(f"length_min={min(lengths)} length_max={max(lengths)} length_mean={mean:.2f}")
        hi = max(lengths)
        width = max(1, math.ceil(hi / 8))
        buckets: dict[int, int] = {}
        for n in lengths:
            buckets[(n - 1) // width] = buckets.get((n - 1) // width, 0) + 1
        for b in sorted(buckets):
            lo_edge = b * width + 1
            hi_edge = (b + 1) * width
            print(f"len[{lo_edge},{hi_edge}]={buckets[b]}")
    append_run_log("stats", {"subcommand": "stats", "store": store_path}, seed, path=args.run_log)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warmstart",
        description="warm-start preparation toolkit: embedding transplant, "
        "corpus chunking, span-corruption batching, schedules and memory plans",
    )
    parser.add_argument("--version", action="version", version=f"warmstart {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    p = subs.add_parser("transplant", help="build a warm-start embedding matrix")
    _add_common(p)
    _add_vocab_flags(p)
    p.add_argument("--src-emb", default=None)
    p.add_argument("--src-vocab", default=None)
    p.add_argument("--tgt-vocab", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None, help="write a JSON tally here")
    p.add_argument("--cache", default=None, help="persistent translation cache file")
    p.add_argument("--provider", choices=("dict", "remote", "identity"), default=None)
    p.add_argument("--dict-file", default=None)
    p.add_argument("--remote-url", default=None)
    p.add_argument("--source-lang", default=None)
    p.add_argument("--target-lang", default=None)
    p.add_argument("--retry-failed", action="store_true", default=None)
    p.add_argument("--rate-limit", default=None, help="requests per second, N or N/s")
    p.add_argument("--timeout-ms", type=int, default=None)
    p.set_defaults(func=cmd_transplant)

    p = subs.add_parser("prepare-corpus", help="chunk text into a sequence store")
    _add_common(p)
    _add_vocab_flags(p)
    p.add_argument("--vocab", default=None)
    p.add_argument("--in", dest="input", default=None, help="text file or directory of *.txt")
    p.add_argument("--out", default=None)
    p.add_argument("--seq-len", type=int, default=None)
    p.add_argument("--min-tail", type=int, default=None)
    p.set_defaults(func=cmd_prepare_corpus)

    p = subs.add_parser("sample-batches", help="draw masked batches for an epoch")
    _add_common(p)
    _add_vocab_flags(p)
    p.add_argument("--store", default=None)
    p.add_argument("--vocab", default=None)
    p.add_argument("--epoch", type=int, default=None)
    p.add_argument("--mode", choices=("span", "iid"), default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--mean-span", type=float, default=None)
    p.add_argument("--micro-batch", type=int, default=None)
    p.add_argument("--effective-batch", type=int, default=None)
    p.add_argument("--sort-by-length", action="store_true", default=None)
    p.add_argument("--format", choices=("text", "binary"), default=None)
    p.add_argument("--out", default=None, help="text path, or base path for binary stores")
    p.add_argument("--report", default=None, help="per-batch efficiency lines")
    p.set_defaults(func=cmd_sample_batches)

    p = subs.add_parser("lr-curve", help="emit the learning-rate schedule as CSV")
    _add_common(p)
    p.add_argument("--peak", type=float, default=None)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--total", type=int, default=None)
    p.add_argument("--shape", choices=("linear", "rsqrt"), default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--store", default=None, help="derive --total from this store")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--effective-batch", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lr_curve)

    p = subs.add_parser("memplan", help="training memory estimate and fit advice")
    _add_common(p)
    p.add_argument("--params", type=int, default=None)
    p.add_argument("--precision", choices=("fp32", "fp16", "bf16"), default=None)
    p.add_argument("--offload", action="store_true", default=None)
    p.add_argument("--gpus", type=int, default=None)
    p.add_argument("--gpu-mem", default=None, help="per-GPU memory, GiB")
    p.add_argument("--ram", default=None, help="system memory, GiB")
    p.add_argument("--nvlink", action="store_true", default=None)
    p.set_defaults(func=cmd_memplan)

    p = subs.add_parser("stats", help="sequence store statistics")
    _add_common(p)
    p.add_argument("--store", default=None)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WarmstartError as e:
        print(f"warmstart: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"warmstart: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
