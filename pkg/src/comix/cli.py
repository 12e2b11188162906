"""``comix`` command-line interface."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import evalkit, recipes, textnorm
from .config import load_config


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Toolkit config JSON (or set COMIX_CONFIG).")
@click.pass_context
def main(ctx, config_path):
    """Code-mixed Hindi-English TTS toolkit."""
    ctx.obj = load_config(config_path)


# ---------------------------------------------------------------------------

@main.command("textnorm")
@click.option("--in", "in_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--lexicon", type=click.Path(exists=True), default=None)
@click.option("--provider-cmd", default=None, help="External transliteration command or URL.")
def textnorm_cmd(in_file, out_file, lexicon, provider_cmd):
    """Normalize a text file (one sentence per line) to Devanagari."""
    provider = textnorm.TransliterationProvider(
        lexicon=textnorm.load_lexicon(lexicon) if lexicon else {},
        endpoint=provider_cmd,
    )
    lines = Path(in_file).read_text(encoding="utf-8").splitlines()
    out_lines = [textnorm.normalize(line, provider).devanagari for line in lines]
    Path(out_file).write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    click.echo(f"normalized {len(lines)} lines -> {out_file}")


# ---------------------------------------------------------------------------

@main.group("corpus")
def corpus_group():
    """Manifest pooling, subsets, splits, and stats."""


@corpus_group.command("pool")
@click.option("--manifest", "manifests", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def corpus_pool(manifests, out):
    pooled = corpus_mod.pool([corpus_mod.load_manifest(m) for m in manifests])
    corpus_mod.save_manifest(pooled, out)
    click.echo(json.dumps(pooled.summary(), indent=2, ensure_ascii=False))


@corpus_group.command("subset")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--target-hours", type=float, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def corpus_subset(manifest, target_hours, seed, out):
    m = corpus_mod.load_manifest(manifest)
    sub = corpus_mod.subset_by_duration(m, target_hours * 3600.0, seed)
    corpus_mod.save_manifest(sub, out)
    click.echo(f"subset: {len(sub.records)} records, {sub.total_duration_s/3600:.2f} h")


@corpus_group.command("split")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--val-fraction", type=float, default=0.1)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def corpus_split(manifest, val_fraction, seed, out):
    m = corpus_mod.load_manifest(manifest)
    corpus_mod.save_manifest(corpus_mod.split(m, val_fraction, seed), out)
    click.echo(f"split written to {out}")


@corpus_group.command("stats")
@click.option("--manifest", required=True, type=click.Path(exists=True))
def corpus_stats(manifest):
    m = corpus_mod.load_manifest(manifest)
    click.echo(json.dumps(m.summary(), indent=2, ensure_ascii=False))


# ---------------------------------------------------------------------------

@main.group("speaker")
def speaker_group():
    """Speaker embedding tables."""


@speaker_group.command("build-table")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--extractor", "extractor_kind", type=click.Choice(["external", "stub"]),
              default="stub")
@click.option("--extractor-cmd", default=None)
@click.option("--out", required=True, type=click.Path())
def speaker_build_table(manifest, extractor_kind, extractor_cmd, out):
    from . import speaker as speaker_mod
    m = corpus_mod.load_manifest(manifest)
    if extractor_kind == "external":
        if not extractor_cmd:
            raise click.UsageError("--extractor-cmd required with --extractor external")
        extractor = speaker_mod.ExternalExtractor(extractor_cmd)
    else:
        extractor = speaker_mod.StubExtractor()
    table = speaker_mod.build_table(m, extractor)
    speaker_mod.save_table(table, out)
    click.echo(f"table with {len(table.entries)} speakers -> {out}")


# ---------------------------------------------------------------------------

@main.command("train")
@click.option("--recipe", required=True, type=click.Path(exists=True))
@click.pass_obj
def train_cmd(cfg, recipe):
    """Run one training recipe."""
    spec = recipes.load_recipe(recipe)
    report = recipes.run_recipe(spec, cfg)
    click.echo(json.dumps({
        "steps": len(report.step_losses),
        "final_loss": report.step_losses[-1] if report.step_losses else None,
        "checkpoints": report.checkpoint_paths,
        "wall_clock_s": report.wall_clock_s,
    }, indent=2))


@main.command("plan-matrix")
@click.option("--manifests", "manifests_file", required=True, type=click.Path(exists=True),
              help="JSON mapping of manifest roles to paths.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def plan_matrix_cmd(manifests_file, out_dir):
    """Emit the full experiment grid as recipe files."""
    manifests = json.loads(Path(manifests_file).read_text(encoding="utf-8"))
    specs = recipes.plan_paper_matrix(manifests, out_dir=out_dir)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    for spec in specs:
        recipes.save_recipe(spec, Path(out_dir) / f"{spec.name}.recipe.json")
    click.echo(f"wrote {len(specs)} recipes to {out_dir}")


# ---------------------------------------------------------------------------

@main.command("synth")
@click.option("--text", default=None)
@click.option("--manifest", type=click.Path(exists=True), default=None)
@click.option("--taco", required=True, type=click.Path(exists=True))
@click.option("--vocoder", required=True, type=click.Path(exists=True))
@click.option("--speaker-id", default=None)
@click.option("--ref-audio", type=click.Path(exists=True), default=None)
@click.option("--speaker-table", type=click.Path(exists=True), default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--max-steps", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
def synth_cmd(text, manifest, taco, vocoder, speaker_id, ref_audio, speaker_table,
              sigma, max_steps, out_dir):
    """Synthesize one sentence or a whole manifest of texts."""
    from . import synth as synth_mod
    if (text is None) == (manifest is None):
        raise click.UsageError("provide exactly one of --text or --manifest")
    kwargs = dict(speaker_id=speaker_id, ref_audio=ref_audio, table_path=speaker_table,
                  sigma=sigma, max_steps=max_steps)
    if text is not None:
        result = synth_mod.synthesize(text, taco, vocoder, out_dir=out_dir, **kwargs)
        click.echo(f"duration {result.clip.duration_s:.2f}s, truncated={result.truncated}")
        sys.exit(2 if result.truncated else 0)
    report = synth_mod.batch_synthesize(manifest, taco, vocoder, out_dir, **kwargs)
    click.echo(f"{len(report['items'])} ok, {len(report['errors'])} failed, "
               f"{len(report['truncated'])} truncated")


# ---------------------------------------------------------------------------

@main.group("eval")
def eval_group():
    """Listening-test sessions and aggregation."""


@eval_group.command("make-session")
@click.option("--in", "in_file", required=True, type=click.Path(exists=True),
              help="JSON-lines manifest of {id, text} items.")
@click.option("--systems", required=True, help="Comma-separated system names.")
@click.option("--kind", type=click.Choice(["mos", "cmos"]), default="cmos")
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def make_session_cmd(in_file, systems, kind, seed, out):
    ids = [json.loads(line)["id"]
           for line in Path(in_file).read_text(encoding="utf-8").splitlines()
           if line.strip()]
    session = evalkit.make_session(ids, systems.split(","), seed, kind.upper())
    evalkit.save_session(session, out)
    click.echo(f"session with {len(session['entries'])} entries -> {out}")


@eval_group.command("aggregate")
@click.option("--kind", type=click.Choice(["mos", "cmos"]), required=True)
@click.option("--in", "in_file", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path())
def aggregate_cmd(kind, in_file, out):
    records = evalkit.load_ratings(in_file)
    summary = (evalkit.aggregate_mos(records) if kind == "mos"
               else evalkit.aggregate_cmos(records))
    payload = {
        "kind": summary.kind,
        "mean": summary.mean,
        "std": summary.std,
        "std_convention": "sample (n-1)",
        "n": summary.n,
        "formatted": summary.formatted(),
        "per_system": summary.per_system,
        "rejected": [{"utterance": r.utterance_id, "reason": why}
                     for r, why in summary.rejected],
    }
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    click.echo(text)


if __name__ == "__main__":
    main()
