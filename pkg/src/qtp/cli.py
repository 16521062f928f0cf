"""Command-line entry point: ``qtp {synth,train,transmit,sweep,detect,lengthscan}``.

Every command resolves a manifest (defaults, ``--manifest`` file, flags),
writes it to ``OUT/manifest.txt`` before doing anything else, and stamps its
sha256 into every output. Exit codes: 0 ok, 2 configuration, 3 data,
4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, corpus
from .codec import TextStage, ascii_encode, normalize_display, segment_text, split_units
from .errors import ConfigError, DataError, QTPError
from .manifest import Manifest, load_manifest
from .metrics import (
    MetricsReport,
    confusion_scores,
    rows_to_csv,
    sentence_detection_probability,
    ser_reduction_ratio,
    tally_confusion,
)
from .pipeline import Link, StageRecord, make_link, parse_channel_spec, run_unit
from .rng import RNG_ALGORITHM, substream
from .slrm.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .slrm.model import ModelConfig
from .trainer import (
    TrainConfig,
    generate_noisy_corpus,
    make_q_labels,
    split_dataset,
    train,
    train_config_dict,
    write_history,
)
from .wlrm import Dictionary

log = logging.getLogger("qtp")

SWEEP_COLUMNS = (
    "mode", "kind", "lambda", "replicate", "n_sentences",
    "ber_before", "wer_before", "ser_before",
    "ber_after", "wer_after", "ser_after", "ser_reduction",
)
LENGTH_COLUMNS = ("bucket", "n_sentences", "ser_before", "ser_after")
STAGES = ("received", "repaired", "final")


# --------------------------------------------------------------------------
# shared plumbing


def _threads() -> int:
    raw = os.environ.get("QTP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"QTP_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def _bits_hex(bits: np.ndarray) -> str:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


def _prepare_out(m: Manifest, out: Path) -> str:
    out.mkdir(parents=True, exist_ok=True)
    return m.write(out / "manifest.txt")


def _load_sentences(m: Manifest) -> list[TextStage]:
    path = m.path("corpus")
    if path is None:
        raise ConfigError("this command needs a corpus (manifest key 'corpus' or --corpus)")
    return [TextStage.from_string(s) for s in corpus.load_corpus(path)]


def _load_ckpt(m: Manifest) -> Optional[Checkpoint]:
    path = m.path("checkpoint")
    return None if path is None else load_checkpoint(path)


def _dictionary(m: Manifest, ckpt: Optional[Checkpoint], sentences: Sequence[TextStage]) -> Dictionary:
    """Manifest dictionary file, else the checkpoint vocabulary, else the corpus vocabulary."""
    path = m.path("dictionary")
    if path is not None:
        return Dictionary.load(path)
    if ckpt is not None:
        words = [w for w in ckpt.config.vocab if not w.startswith("[")]
        return Dictionary.from_words(words, source=f"checkpoint:{m['checkpoint']}")
    return Dictionary.from_words(corpus.vocabulary([s.text for s in sentences]), source="corpus")


def _model(m: Manifest, ckpt: Optional[Checkpoint], required: bool = False):
    mode = m["post_decode"]
    if mode == "auto":
        mode = "full" if ckpt is not None else "wlrm"
    if (mode == "full" or required) and ckpt is None:
        raise ConfigError("post-decoding with the language model needs a trained checkpoint")
    if mode != "full":
        return mode, None
    params = ckpt.ema if m["weights"] == "ema" else ckpt.params
    return mode, (params, ckpt.config)


def _link(mode: str, spec: str) -> Link:
    kind, lam = parse_channel_spec(spec)
    return make_link(mode, kind, lam)


def _units(t: TextStage, m: Manifest) -> list[TextStage]:
    if not m["segment"] or len(t) == 0:
        return [t]
    return split_units(t, segment_text(t, m["max_unit"]))


def process_sentence(
    t: TextStage, link: Link, m: Manifest, key: tuple, dictionary: Dictionary, model, post: str
) -> list[StageRecord]:
    """Transmit one sentence (unit by unit when segmenting); unit u draws from ``(seed, *key, u)``."""
    out = []
    for u, unit in enumerate(_units(t, m), start=1):
        rng = substream(m["seed"], *key, u)
        rec = run_unit(unit, link, rng, dictionary, model, m["threshold"])
        if post == "none":
            rec.repaired = rec.fused = rec.received
        out.append(rec)
    return out


@dataclass
class Tally:
    """Running counts for one evaluation condition."""

    bits: int = 0
    bit_errors: dict = field(default_factory=lambda: {s: 0 for s in STAGES})
    bits_comparable: dict = field(default_factory=lambda: {s: True for s in STAGES})
    words: int = 0
    word_errors: dict = field(default_factory=lambda: {s: 0 for s in STAGES})
    sentences: int = 0
    bad_sentences: dict = field(default_factory=lambda: {s: 0 for s in STAGES})
    flags: list = field(default_factory=list)
    truth: list = field(default_factory=list)

    def add(self, records: Sequence[StageRecord]) -> None:
        self.sentences += 1
        bad = {s: False for s in STAGES}
        for rec in records:
            self.bits += rec.sent_bits.size
            self.words += len(rec.ideal)
            for stage, text in zip(STAGES, (rec.received, rec.repaired, rec.fused)):
                errs = sum(a != b for a, b in zip(rec.ideal.words, text.words))
                self.word_errors[stage] += errs
                bad[stage] |= errs > 0
                if len(text.text) != len(rec.ideal.text):
                    self.bits_comparable[stage] = False
                elif stage == "received":
                    self.bit_errors[stage] += int(np.count_nonzero(rec.sent_bits != rec.received_bits))
                else:
                    got = ascii_encode(text.text) if text.text.isascii() else _latin1_bits(text.text)
                    self.bit_errors[stage] += int(np.count_nonzero(rec.sent_bits != got))
            if rec.confidence is not None:
                self.flags.append(rec.detected)
                self.truth.append(make_q_labels(rec.repaired, rec.ideal))
        for s in STAGES:
            self.bad_sentences[s] += bad[s]

    def rate(self, stage: str, what: str) -> Optional[float]:
        if what == "ber":
            if not self.bits or not self.bits_comparable[stage]:
                return None
            return self.bit_errors[stage] / self.bits
        if what == "wer":
            return self.word_errors[stage] / self.words if self.words else None
        return self.bad_sentences[stage] / self.sentences if self.sentences else None

    def report(self, stage: str) -> MetricsReport:
        rep = MetricsReport(
            ber=self.rate(stage, "ber"),
            wer=self.rate(stage, "wer"),
            ser=self.rate(stage, "ser"),
            n_sentences=self.sentences,
            n_words=self.words,
            n_bits=self.bits,
        )
        before = self.rate("received", "ser")
        if stage != "received" and before is not None:
            rep.ser_reduction = ser_reduction_ratio(before, rep.ser)
        if stage == "final" and self.truth:
            tp, fp, tn, fn = tally_confusion(self.flags, self.truth)
            rep.tp, rep.fp, rep.tn, rep.fn = tp, fp, tn, fn
            if tp + fp + tn + fn:
                rep.accuracy, rep.precision, rep.recall, rep.f1 = confusion_scores(tp, fp, tn, fn)
            rep.detection_probability = rep.recall
            rep.sentence_detection_probability = sentence_detection_probability(self.flags, self.truth)
        return rep


def _latin1_bits(text: str) -> np.ndarray:
    return np.unpackbits(np.frombuffer(text.encode("latin-1"), dtype=np.uint8))


def _write_report(path_stem: Path, fmt: str, payload: dict, rows: list[dict], columns: Sequence[str]) -> Path:
    if fmt == "json":
        path = path_stem.with_suffix(".json")
        path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    else:
        path = path_stem.with_suffix(".csv")
        path.write_text(rows_to_csv(rows, columns), encoding="utf-8")
    return path


REPORT_COLUMNS = tuple(MetricsReport().to_dict())


# --------------------------------------------------------------------------
# commands


def cmd_synth(m: Manifest, out: Path, fmt: str) -> int:
    sha = _prepare_out(m, out)
    sents = corpus.synthetic_corpus(m["synth_sentences"], substream(m["seed"], "synth"))
    corpus.save_corpus(out / "corpus.txt", sents)
    Dictionary.from_words(corpus.lexicon(), source="synthetic lexicon").save(out / "dictionary.txt")
    log.info("wrote %d sentences (manifest %s)", len(sents), sha[:12])
    return 0


def cmd_train(m: Manifest, out: Path, fmt: str) -> int:
    sentences = _load_sentences(m)
    n = len(sentences)
    if n * 10 // 100 < 1:
        raise ConfigError(f"corpus of {n} sentences is too small for an 80:10:10 split (need >= 10)")
    sha = _prepare_out(m, out)
    dictionary = _dictionary(m, None, sentences)
    tr, va, te = split_dataset(sentences, rng=substream(m["seed"], "split"))
    for name, part in (("train", tr), ("valid", va), ("test", te)):
        corpus.save_corpus(out / f"{name}.txt", [t.text for t in part])
    dictionary.save(out / "dictionary.txt")

    link = _link(m["mode"], m["channel"])
    units = [u for t in tr for u in _units(t, m)]
    pairs = []
    for c in range(m["train_copies"]):
        pairs += generate_noisy_corpus(units, link, dictionary, m["seed"], stream=f"train-{c}")

    vocab = set(dictionary.words) | corpus.vocabulary([t.text for t in sentences])
    cfg = ModelConfig.from_words(
        vocab,
        d_model=m["d_model"],
        heads=m["heads"],
        num_blocks=m["num_blocks"],
        ffn_dim=m["ffn_dim"] or None,
        max_len=m["max_len"],
    )
    tcfg = TrainConfig(
        theta=m["theta"], alpha=m["alpha"], gamma=m["gamma"], epsilon=m["epsilon"], lr=m["lr"],
        epochs=m["epochs"], outer_iterations=m["outer_iterations"], ema_decay=m["ema_decay"],
        batch_size=m["batch_size"], seed=m["seed"], channel=link.spec, mode=link.mode.value,
    )
    res = train(pairs, cfg, tcfg, progress=True)
    write_history(out / "history.csv", res.history)
    meta = {
        "manifest_sha256": sha,
        "train_config": train_config_dict(tcfg),
        "init": "uniform(+-1/sqrt(fan_in)), no pretrained weights",
        "rng": RNG_ALGORITHM,
        "dictionary_source": dictionary.source,
        "split_sizes": [len(tr), len(va), len(te)],
        "training_pairs": len(pairs),
        "steps": res.steps,
        "history": [{k: float(v) for k, v in h.items()} for h in res.history],
    }
    digest = save_checkpoint(out / "checkpoint.zip", Checkpoint(cfg, res.params, res.ema, m["seed"], meta))
    log.info("checkpoint sha256 %s", digest)
    return 0


def cmd_transmit(m: Manifest, out: Path, fmt: str) -> int:
    sentences = _load_sentences(m)
    ckpt = _load_ckpt(m)
    post, model = _model(m, ckpt)
    dictionary = _dictionary(m, ckpt, sentences)
    sha = _prepare_out(m, out)
    link = _link(m["mode"], m["channel"])
    tally = Tally()
    selected = m["metrics"]
    with open(out / "transcript.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        header = {
            "type": "header",
            "manifest_sha256": sha,
            "version": __version__,
            "rng": RNG_ALGORITHM,
            "mode": link.mode.value,
            "channel": link.spec,
            "post_decode": post,
            "dictionary_source": dictionary.source,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, t in enumerate(sentences, start=1):
            records = process_sentence(t, link, m, ("transmit", i), dictionary, model, post)
            tally.add(records)
            for u, rec in enumerate(records, start=1):
                fh.write(json.dumps(_unit_record(sha, i, u, len(records), rec, selected), sort_keys=True) + "\n")
    reports = {s: tally.report(s) for s in STAGES}
    payload = {"manifest_sha256": sha, "stages": {s: r.to_dict() for s, r in reports.items()}}
    rows = [{"stage": s, **r.to_dict()} for s, r in reports.items()]
    _write_report(out / "report", fmt, payload, rows, ("stage",) + REPORT_COLUMNS)
    return 0


def _unit_record(sha: str, i: int, u: int, k: int, rec: StageRecord, selected) -> dict:
    def wer(text):
        return sum(a != b for a, b in zip(rec.ideal.words, text.words)) / len(rec.ideal) if len(rec.ideal) else 0.0

    metrics = {}
    if "ber" in selected:
        metrics["ber"] = float(np.count_nonzero(rec.sent_bits != rec.received_bits)) / max(rec.sent_bits.size, 1)
    if "wer" in selected:
        metrics["wer"] = {"received": wer(rec.received), "repaired": wer(rec.repaired), "final": wer(rec.fused)}
    if "ser" in selected:
        metrics["sentence_error"] = {
            "received": rec.received.words != rec.ideal.words,
            "repaired": rec.repaired.words != rec.ideal.words,
            "final": rec.fused.words != rec.ideal.words,
        }
    return {
        "type": "unit",
        "manifest_sha256": sha,
        "sentence": i,
        "unit": u,
        "units": k,
        "stages": {
            "T": rec.ideal.text,
            "Tq": rec.received.text,
            "Tw": rec.repaired.text,
            "Tc": None if rec.corrected is None else rec.corrected.text,
            "Te": rec.fused.text,
        },
        "words": {
            "T": list(rec.ideal.words),
            "Tq": list(rec.received.words),
            "Tw": list(rec.repaired.words),
            "Tc": None if rec.corrected is None else list(rec.corrected.words),
            "Te": list(rec.fused.words),
        },
        "display": {"Tq": normalize_display(rec.received.text), "Te": normalize_display(rec.fused.text)},
        "word_count": len(rec.ideal),
        "confidence": None if rec.confidence is None else [float(c) for c in rec.confidence],
        "detected": sorted(rec.detected),
        "sent_bits": _bits_hex(rec.sent_bits),
        "received_bits": _bits_hex(rec.received_bits),
        "channel_uses": rec.channel_uses,
        "metrics": metrics,
    }


def _sweep_condition(job) -> dict:
    m, sentences, dictionary, model, post, mode, kind, lam, rep = job
    link = make_link(mode, kind, lam)
    tally = Tally()
    for i, t in enumerate(sentences, start=1):
        tally.add(process_sentence(t, link, m, ("sweep", mode, link.kind.value, repr(lam), rep, i), dictionary, model, post))
    return {
        "mode": mode,
        "kind": link.kind.value,
        "lambda": lam,
        "replicate": rep,
        "n_sentences": tally.sentences,
        "ber_before": tally.rate("received", "ber"),
        "wer_before": tally.rate("received", "wer"),
        "ser_before": tally.rate("received", "ser"),
        "ber_after": tally.rate("final", "ber"),
        "wer_after": tally.rate("final", "wer"),
        "ser_after": tally.rate("final", "ser"),
        "ser_reduction": ser_reduction_ratio(tally.rate("received", "ser"), tally.rate("final", "ser")),
    }


def _run_jobs(fn, jobs: list) -> list:
    workers = min(_threads(), len(jobs)) if jobs else 1
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _grid_lambdas(m: Manifest) -> list[float]:
    return m["lambdas"] or [parse_channel_spec(m["channel"])[1]]


def cmd_sweep(m: Manifest, out: Path, fmt: str) -> int:
    sentences = _load_sentences(m)
    ckpt = _load_ckpt(m)
    post, model = _model(m, ckpt)
    dictionary = _dictionary(m, ckpt, sentences)
    lambdas = _grid_lambdas(m)
    for mode in m["modes"]:
        for kind in m["kinds"]:
            make_link(mode, kind, lambdas[0])  # reject unsupported combinations before any work
    sha = _prepare_out(m, out)
    jobs = [
        (m, sentences, dictionary, model, post, mode, kind, lam, rep)
        for mode in m["modes"]
        for kind in m["kinds"]
        for lam in lambdas
        for rep in range(1, m["replicates"] + 1)
    ]
    rows = _run_jobs(_sweep_condition, jobs)
    rows.sort(key=lambda r: (m["modes"].index(r["mode"]), r["kind"], r["lambda"], r["replicate"]))
    payload = {"manifest_sha256": sha, "rows": [{k: r[k] for k in SWEEP_COLUMNS} for r in rows]}
    _write_report(out / "sweep", fmt if fmt == "json" else "csv", payload, rows, SWEEP_COLUMNS)
    return 0


def cmd_detect(m: Manifest, out: Path, fmt: str) -> int:
    sentences = _load_sentences(m)
    ckpt = _load_ckpt(m)
    if ckpt is None:
        raise ConfigError("detect needs a trained checkpoint")
    m.values["post_decode"] = "full"
    post, model = _model(m, ckpt, required=True)
    dictionary = _dictionary(m, ckpt, sentences)
    lambdas = _grid_lambdas(m)
    mode = m["mode"]
    links = [make_link(mode, kind, lam) for kind in m["kinds"] for lam in lambdas]
    sha = _prepare_out(m, out)
    conditions, rows = [], []
    for link in links:
        tally = Tally()
        for i, t in enumerate(sentences, start=1):
            key = ("detect", link.mode.value, link.kind.value, repr(link.lam), i)
            tally.add(process_sentence(t, link, m, key, dictionary, model, post))
        rep = tally.report("final")
        conditions.append({"mode": link.mode.value, "kind": link.kind.value, "lambda": link.lam, "report": rep.to_dict()})
        rows.append({"mode": link.mode.value, "kind": link.kind.value, "lambda": link.lam, **rep.to_dict()})
    payload = {
        "manifest_sha256": sha,
        "detection_definition": "recall over corrupted word positions; sentence variant requires every corrupted position flagged",
        "conditions": conditions,
    }
    _write_report(out / "detect", fmt, payload, rows, ("mode", "kind", "lambda") + REPORT_COLUMNS)
    return 0


def parse_buckets(specs: Sequence[str]) -> list[tuple[str, int, float]]:
    out = []
    for spec in specs:
        try:
            if spec.endswith("+"):
                lo, hi = int(spec[:-1]), float("inf")
            else:
                a, _, b = spec.partition("-")
                lo, hi = int(a), int(b or a)
        except ValueError as exc:
            raise ConfigError(f"bad length bucket {spec!r}; use forms like 1-4, 7 or 17+") from exc
        if lo < 1 or hi < lo:
            raise ConfigError(f"empty length bucket {spec!r}")
        out.append((spec, lo, hi))
    return out


def cmd_lengthscan(m: Manifest, out: Path, fmt: str) -> int:
    sentences = _load_sentences(m)
    ckpt = _load_ckpt(m)
    post, model = _model(m, ckpt)
    dictionary = _dictionary(m, ckpt, sentences)
    buckets = parse_buckets(m["buckets"])
    link = _link(m["mode"], m["channel"])
    sha = _prepare_out(m, out)
    tallies = {name: Tally() for name, _, _ in buckets}
    for i, t in enumerate(sentences, start=1):
        name = next((b for b, lo, hi in buckets if lo <= len(t) <= hi), None)
        if name is None:
            continue
        tallies[name].add(process_sentence(t, link, m, ("lengthscan", i), dictionary, model, post))
    rows = [
        {
            "bucket": name,
            "n_sentences": tallies[name].sentences,
            "ser_before": tallies[name].rate("received", "ser"),
            "ser_after": tallies[name].rate("final", "ser"),
        }
        for name, _, _ in buckets
    ]
    payload = {"manifest_sha256": sha, "rows": rows}
    _write_report(out / "lengthscan", fmt if fmt == "json" else "csv", payload, rows, LENGTH_COLUMNS)
    return 0


COMMANDS = {
    "synth": (cmd_synth, "write a synthetic caption-style corpus and its dictionary"),
    "train": (cmd_train, "split a corpus 80:10:10 and train the correction/evaluation model"),
    "transmit": (cmd_transmit, "send a corpus through the channel and write a five-stage transcript"),
    "sweep": (cmd_sweep, "error rates over a grid of modes, noise kinds, strengths and replicates"),
    "detect": (cmd_detect, "error-detection probability and confusion tallies per noise condition"),
    "lengthscan": (cmd_lengthscan, "sentence error rate bucketed by sentence length"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", type=Path, help="key = value run manifest")
    common.add_argument("--seed", type=int)
    common.add_argument("--channel", metavar="KIND:LAMBDA")
    common.add_argument("--mode", choices=("classical", "qubit", "qudit4"))
    common.add_argument("--segment", action=argparse.BooleanOptionalAction, default=None)
    common.add_argument("--max-unit", type=int)
    common.add_argument("--corpus", help="corpus file, one sentence per line")
    common.add_argument("--dictionary", help="word list for the dictionary repair stage")
    common.add_argument("--checkpoint", help="trained model checkpoint")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="any other manifest key")
    common.add_argument("--out", type=Path, default=Path("qtp-out"))
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qtp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qtp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _overrides(args) -> dict[str, str]:
    over = {}
    for flag, key in (("seed", "seed"), ("channel", "channel"), ("mode", "mode"), ("max_unit", "max_unit"),
                      ("corpus", "corpus"), ("dictionary", "dictionary"), ("checkpoint", "checkpoint")):
        v = getattr(args, flag)
        if v is not None:
            over[key] = str(v)
    if args.segment is not None:
        over["segment"] = "on" if args.segment else "off"
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        over[key.strip()] = value.strip()
    return over


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    fn = COMMANDS[args.command][0]
    try:
        m = load_manifest(args.manifest, _overrides(args))
        return fn(m, args.out, args.format)
    except QTPError as exc:
        print(f"qtp {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"qtp {args.command}: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
