import json

import numpy as np
import pytest
from click.testing import CliRunner

from comix.audiofe import load_wav
from comix.checkpoints import CheckpointError
from comix.cli import main as cli_main
from comix.synth import (SynthError, batch_synthesize,
                         load_spectrogen_checkpoint, save_vocoder_checkpoint,
                         synthesize)
from comix.vocoder import Waveglow

from helpers import toy_config


@pytest.fixture(scope="module")
def toy_text(toy_corpus):
    return toy_corpus["texts"][0]


class TestSynthesize:
    def test_duration_law(self, overfit_run, toy_vocoder_ckpt, toy_cfg, toy_text):
        result = synthesize(toy_text, overfit_run["ckpt"], toy_vocoder_ckpt)
        assert not result.truncated
        assert result.clip.samples.size == result.mel.shape[0] * toy_cfg.audio.hop_length

    def test_reproducible_given_utterance_id(self, overfit_run, toy_vocoder_ckpt, toy_text):
        a = synthesize(toy_text, overfit_run["ckpt"], toy_vocoder_ckpt, utterance_id="fixed")
        b = synthesize(toy_text, overfit_run["ckpt"], toy_vocoder_ckpt, utterance_id="fixed")
        np.testing.assert_array_equal(a.clip.samples, b.clip.samples)
        np.testing.assert_array_equal(a.mel, b.mel)

    def test_different_utterance_ids_differ(self, overfit_run, toy_vocoder_ckpt, toy_text):
        a = synthesize(toy_text, overfit_run["ckpt"], toy_vocoder_ckpt, utterance_id="one")
        b = synthesize(toy_text, overfit_run["ckpt"], toy_vocoder_ckpt, utterance_id="two")
        assert not np.array_equal(a.clip.samples, b.clip.samples)

    def test_single_speaker_rejects_speaker_arg(self, overfit_run, toy_vocoder_ckpt, toy_text):
        with pytest.raises(SynthError, match="single-speaker"):
            synthesize(toy_text, overfit_run["ckpt"], toy_vocoder_ckpt,
                       speaker_id="someone")

    def test_audio_config_mismatch(self, overfit_run, toy_text, tmp_path):
        other_cfg = toy_config(audio={"sample_rate": 16000, "fmax": 7600})
        model = Waveglow(other_cfg.waveglow, other_cfg.audio)
        bad_ckpt = tmp_path / "bad_voc.ckpt"
        save_vocoder_checkpoint(model, other_cfg, bad_ckpt)
        with pytest.raises(CheckpointError):
            synthesize(toy_text, overfit_run["ckpt"], bad_ckpt)

    def test_diagnostics_written(self, overfit_run, toy_vocoder_ckpt, toy_text, tmp_path):
        synthesize(toy_text, overfit_run["ckpt"], toy_vocoder_ckpt,
                   utterance_id="diag", out_dir=tmp_path)
        for suffix in (".wav", ".mel.bin", ".attn.bin", ".png"):
            assert (tmp_path / f"diag{suffix}").exists()
        clip = load_wav(tmp_path / "diag.wav")
        assert clip.sample_rate_hz == 8000 and clip.samples.size > 0


class TestBatch:
    def test_error_isolation(self, overfit_run, toy_vocoder_ckpt, toy_corpus, tmp_path):
        manifest = tmp_path / "texts.jsonl"
        lines = [json.dumps({"id": "good", "text": toy_corpus["texts"][1]},
                            ensure_ascii=False),
                 json.dumps({"id": "bad", "text": "née"})]
        manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
        report = batch_synthesize(manifest, overfit_run["ckpt"], toy_vocoder_ckpt,
                                  tmp_path / "out")
        assert "good" in report["items"]
        assert "bad" in report["errors"]
        assert (tmp_path / "out" / "good.wav").exists()
        assert json.loads((tmp_path / "out" / "report.json").read_text())["errors"]

    def test_empty_manifest(self, overfit_run, toy_vocoder_ckpt, tmp_path):
        manifest = tmp_path / "empty.jsonl"
        manifest.write_text("", encoding="utf-8")
        report = batch_synthesize(manifest, overfit_run["ckpt"], toy_vocoder_ckpt,
                                  tmp_path / "out")
        assert report["items"] == {} and report["errors"] == {}


class TestCheckpointLoading:
    def test_loaded_model_matches_saved_vocab(self, overfit_run):
        model, meta = load_spectrogen_checkpoint(overfit_run["ckpt"])
        assert meta["vocab_kind"] == "devanagari"
        assert not model.training  # ready for inference out of the box


class TestCLI:
    def test_synth_text(self, overfit_run, toy_vocoder_ckpt, toy_text, tmp_path):
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "synth", "--text", toy_text, "--taco", overfit_run["ckpt"],
            "--vocoder", toy_vocoder_ckpt, "--out", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        assert "truncated=False" in result.output

    def test_synth_truncation_exit_code(self, overfit_run, toy_vocoder_ckpt,
                                        toy_text, tmp_path):
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "synth", "--text", toy_text, "--taco", overfit_run["ckpt"],
            "--vocoder", toy_vocoder_ckpt, "--out", str(tmp_path),
            "--max-steps", "4",
        ])
        assert result.exit_code == 2, result.output

    def test_synth_requires_exactly_one_input(self, overfit_run, toy_vocoder_ckpt,
                                              tmp_path):
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "synth", "--taco", overfit_run["ckpt"],
            "--vocoder", toy_vocoder_ckpt, "--out", str(tmp_path),
        ])
        assert result.exit_code != 0
        assert "exactly one" in result.output
