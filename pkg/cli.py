#!/usr/bin/env python3
"""Command-line interface for turnstate."""
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click
import numpy as np

from checkpoint import CheckpointManager, read_checkpoint, resolve_checkpoint
from config import RunConfig, settings
from corpus.cache import ExampleCache
from corpus.dataset import SEEKER, SUPPORTER, Dialogue, Utterance, dataset_statistics, load_esconv, save_dialogues
from corpus.pipeline import annotate as annotate_dialogues
from corpus.pipeline import prepare_examples
from corpus.preprocessing import truncate_and_split
from corpus.vocab import Vocab
from corpus.windows import context_example
from errors import TurnStateError
from evaluation.generation import generate as generate_response
from evaluation.generation import generate_corpus, generation_record
from evaluation.report import evaluate_model
from exports.csv_export import CSVExporter
from exports.jsonl_export import export_generations
from modeling.model import TurnStateModel
from numerics import tensor as T
from trainer import Trainer

logger = logging.getLogger(__name__)

VOCAB_FILE = "vocab.json"


def _parse_floats(ctx, param, value):
    if value is None:
        return None
    try:
        parts = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")
    if len(parts) != 4:
        raise click.BadParameter(f"expected 4 loss weights, got {len(parts)}")
    return parts


def _parse_ratio(ctx, param, value):
    if value is None:
        return None
    try:
        parts = tuple(int(v) for v in value.split(":"))
    except ValueError:
        raise click.BadParameter(f"expected a ratio like 8:1:1, got {value!r}")
    if len(parts) != 3:
        raise click.BadParameter(f"expected 3 parts, got {len(parts)}")
    return parts


def _run_config(ctx, **sections) -> RunConfig:
    config = ctx.obj["config"]
    if sections:
        config = config.merged(sections)
    return config


def _echo_statistics(dialogues) -> None:
    stats = dataset_statistics(dialogues)
    click.echo(f"   {stats['dialogues']} dialogues, {stats['utterances']} utterances, "
               f"{stats['avg_turns_per_dialogue']} turns/dialogue, {stats['avg_words_per_utterance']} words/utterance")


def _load_model(checkpoint_path):
    """(model, vocab, run config) from a checkpoint file or run directory."""
    path = resolve_checkpoint(checkpoint_path)
    arrays, meta = read_checkpoint(path)
    if "config" not in meta:
        raise TurnStateError(f"Checkpoint {path} has no config sidecar")
    config = RunConfig.build(meta["config"])
    vocab = Vocab.load(path.parent / meta.get("vocab", VOCAB_FILE))
    model = TurnStateModel(config.model, len(vocab), vocab.special_ids, seed=config.train.seed)
    model.load_state_dict({k: v for k, v in arrays.items() if not k.startswith("optim.")})
    model.eval()
    logger.info(f"📦 Loaded {path} (step {meta.get('step', '?')})")
    return model, vocab, config


@click.group()
@click.option('--config', 'config_path', envvar='TURNSTATE_CONFIG', default=settings.turnstate_config,
              type=click.Path(dir_okay=False), help='JSON run config (defaults to $TURNSTATE_CONFIG)')
@click.option('--precision', type=click.Choice(['float32', 'float64']), default=settings.precision,
              help='Floating-point precision')
@click.pass_context
def cli(ctx, config_path, precision):
    """Emotional support response generation with turn-level state transitions."""
    logging.basicConfig(level=settings.log_level.upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    T.set_default_dtype(np.float32 if precision == "float32" else np.float64)
    ctx.ensure_object(dict)
    ctx.obj["config"] = RunConfig.from_file(config_path)


@cli.command()
@click.argument('input_path', type=click.Path(exists=True, dir_okay=False))
@click.argument('output_path', type=click.Path(dir_okay=False))
@click.option('--vocab', 'vocab_path', type=click.Path(dir_okay=False), help='Existing vocabulary to reuse')
@click.option('--keywords', '-k', type=int, help='Keywords per utterance')
@click.option('--min-df', type=int, help='Minimum document frequency for the vocabulary')
@click.pass_context
def annotate(ctx, input_path, output_path, vocab_path, keywords, min_df):
    """Add TF-IDF keywords and seeker emotions to a dataset."""
    config = _run_config(ctx, corpus={"keywords_k": keywords, "min_df": min_df})
    dialogues = load_esconv(input_path)

    if vocab_path and Path(vocab_path).exists():
        vocab = Vocab.load(vocab_path)
    else:
        vocab = Vocab.build((u.text for d in dialogues for u in d.utterances), config.corpus.min_df)
        vocab_path = vocab_path or str(Path(output_path).with_suffix(".vocab.json"))
        vocab.save(vocab_path)

    annotate_dialogues(dialogues, vocab, config.corpus.keywords_k)
    save_dialogues(dialogues, output_path, vocab)
    click.echo(f"\n✅ Annotated {len(dialogues)} dialogues -> {output_path}")
    _echo_statistics(dialogues)
    click.echo(f"   Vocabulary: {vocab_path} ({len(vocab)} tokens)")


@cli.command()
@click.argument('input_path', type=click.Path(exists=True, dir_okay=False))
@click.argument('output_dir', type=click.Path(file_okay=False))
@click.option('--ratio', callback=_parse_ratio, help='train:dev:test ratio, e.g. 8:1:1')
@click.option('--seed', type=int, help='Shuffle seed')
@click.option('--segment-length', type=int, help='Maximum turns per segment')
@click.pass_context
def split(ctx, input_path, output_dir, ratio, seed, segment_length):
    """Segment dialogues and write train/dev/test files."""
    config = _run_config(ctx, corpus={"split_ratio": ratio, "seed": seed, "segment_length": segment_length})
    dialogues = load_esconv(input_path)
    parts = truncate_and_split(dialogues, config.corpus.seed, config.corpus.segment_length,
                               config.corpus.split_ratio)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _echo_statistics(dialogues)
    for name, segments in parts.items():
        save_dialogues(segments, out / f"{name}.json")
        click.echo(f"   {name:6s} {len(segments):6d} -> {out / f'{name}.json'}")


@cli.command()
@click.option('--train', 'train_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--dev', 'dev_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--run-dir', required=True, type=click.Path(file_okay=False), help='Checkpoint directory')
@click.option('--gamma', callback=_parse_floats, help='Loss weights gen,sem,str,emo')
@click.option('--lr', type=float, help='Base learning rate')
@click.option('--warmup', type=int, help='Warmup steps')
@click.option('--batch', type=int, help='Batch size')
@click.option('--window', type=int, help='Transition window w')
@click.option('--max-steps', type=int, help='Optimizer steps')
@click.option('--seed', type=int, help='Training seed')
@click.option('--resume', is_flag=True, help='Resume from the latest checkpoint in --run-dir')
@click.pass_context
def train(ctx, train_path, dev_path, run_dir, gamma, lr, warmup, batch, window, max_steps, seed, resume):
    """Train a model and write checkpoints plus a loss CSV."""
    config = _run_config(ctx, train={"gamma": gamma, "base_lr": lr, "warmup_steps": warmup,
                                     "batch_size": batch, "window_w": window, "max_steps": max_steps,
                                     "seed": seed})
    tc, cc = config.train, config.corpus
    click.echo(f"\n🚀 Training: gamma={list(tc.gamma)} lr={tc.base_lr} warmup={tc.warmup_steps} "
               f"batch={tc.batch_size} window={tc.window_w}")

    run_path = Path(run_dir)
    run_path.mkdir(parents=True, exist_ok=True)
    train_dialogues = load_esconv(train_path)
    vocab_file = run_path / VOCAB_FILE
    if resume and vocab_file.exists():
        vocab = Vocab.load(vocab_file)
    else:
        vocab = Vocab.build((u.text for d in train_dialogues for u in d.utterances), cc.min_df)
        vocab.save(vocab_file)

    cache = ExampleCache()
    examples = prepare_examples(train_dialogues, vocab, cc.keywords_k, tc.window_w, tc.seed,
                                cc.segment_length, split="train", cache=cache)
    dev = None
    if dev_path:
        dev = prepare_examples(load_esconv(dev_path), vocab, cc.keywords_k, tc.window_w, tc.seed,
                               cc.segment_length, split="dev", cache=cache)

    model = TurnStateModel(config.model, len(vocab), vocab.special_ids, seed=tc.seed)
    click.echo(f"🧠 Model: {model.num_parameters():,} parameters, vocabulary {len(vocab)}")
    checkpoints = CheckpointManager(run_path)
    trainer = Trainer(model, tc, checkpoints, meta={"config": json.loads(config.to_json()), "vocab": VOCAB_FILE})
    if resume:
        trainer.resume()
    elif checkpoints.can_resume():
        checkpoints.clear()

    try:
        result = trainer.train(examples, dev)
    finally:
        exporter = CSVExporter()
        exporter.export_losses(trainer.stats.trace, run_path / "losses.csv", append=resume)
        if dev:
            exporter.export_dev_losses(trainer.stats.dev_losses, run_path / "dev_losses.csv")
        trainer.stats.print_summary()
    click.echo(f"\n✅ Trained {result.steps} steps -> {run_path}")


@cli.command(name='eval')
@click.option('--checkpoint', required=True, type=click.Path(exists=True), help='Checkpoint file or run directory')
@click.option('--data', 'data_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), help='MetricReport JSON output')
@click.option('--generations', 'generations_path', type=click.Path(dir_okay=False), help='Also write generations')
@click.option('--window', type=int, help='Transition window w used to build examples')
@click.option('--seed', type=int, help='Sampling seed')
@click.pass_context
def evaluate(ctx, checkpoint, data_path, out_path, generations_path, window, seed):
    """Compute PPL, BLEU, ROUGE-L, Distinct-n and strategy accuracy."""
    model, vocab, trained = _load_model(checkpoint)
    config = _run_config(ctx, generation={"seed": seed})
    w = window or trained.train.window_w
    cc = trained.corpus
    examples = prepare_examples(load_esconv(data_path), vocab, cc.keywords_k, w, trained.train.seed,
                                cc.segment_length, split="eval", cache=ExampleCache())
    report, generations = evaluate_model(model, examples, vocab, config.generation, window=w)
    report.print_report()
    if out_path:
        report.save(out_path)
        click.echo(f"\n✓ Wrote report to {out_path}")
    if generations_path:
        export_generations([generation_record(e, g, vocab) for e, g in zip(examples, generations)],
                           generations_path)


@cli.command()
@click.option('--checkpoint', required=True, type=click.Path(exists=True), help='Checkpoint file or run directory')
@click.option('--data', 'data_path', required=True, type=click.Path(exists=True, dir_okay=False))
@click.option('--out', 'out_path', required=True, type=click.Path(dir_okay=False), help='JSON-lines output')
@click.option('--top-p', type=float)
@click.option('--top-k', type=int, help='0 disables top-k')
@click.option('--temperature', type=float)
@click.option('--rep-penalty', type=float)
@click.option('--max-new-tokens', type=int)
@click.option('--seed', type=int)
@click.pass_context
def generate(ctx, checkpoint, data_path, out_path, top_p, top_k, temperature, rep_penalty, max_new_tokens, seed):
    """Generate a response for every example in a dataset."""
    config = _run_config(ctx, generation={"top_p": top_p, "top_k": top_k, "temperature": temperature,
                                          "repetition_penalty": rep_penalty, "max_new_tokens": max_new_tokens,
                                          "seed": seed})
    model, vocab, trained = _load_model(checkpoint)
    cc = trained.corpus
    examples = prepare_examples(load_esconv(data_path), vocab, cc.keywords_k, trained.train.window_w,
                                trained.train.seed, cc.segment_length, split="generate",
                                cache=ExampleCache(), require_labels=False)
    generations = generate_corpus(model, examples, config.generation, vocab)
    export_generations([generation_record(e, g, vocab) for e, g in zip(examples, generations)], out_path)


@cli.command()
@click.option('--checkpoint', required=True, type=click.Path(exists=True), help='Checkpoint file or run directory')
@click.option('--seed', type=int)
@click.pass_context
def chat(ctx, checkpoint, seed):
    """Interactive session: type seeker turns, read supporter responses. Empty line quits."""
    model, vocab, trained = _load_model(checkpoint)
    config = _run_config(ctx, generation={"seed": seed})
    rng = np.random.default_rng(config.generation.seed)
    history: List[Utterance] = []

    click.echo("💬 Chat started (empty line or 'quit' to stop)")
    while True:
        text = click.prompt("seeker", default="", show_default=False)
        if text.strip().lower() in ("", "quit", "exit"):
            break
        history.append(Utterance(speaker=SEEKER, text=text.strip()))
        annotate_dialogues([Dialogue(id="chat", utterances=history)], vocab, trained.corpus.keywords_k)
        example = context_example(history, trained.train.window_w, dialogue_id="chat")
        response = generate_response(model, example, config.generation, vocab, rng)
        click.echo(f"supporter [{response.predicted_strategy}]: {response.text}")
        history.append(Utterance(speaker=SUPPORTER, text=response.text, strategy=response.predicted_strategy))


def run(argv: Optional[List[str]] = None) -> int:
    """Invoke the CLI; returns 0 on success, 2 on usage errors and 1 on runtime errors."""
    try:
        cli.main(args=argv, prog_name="turnstate", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except (TurnStateError, OSError) as e:
        click.echo(f"❌ Error: {e}", err=True)
        return 1
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == '__main__':
    main()
