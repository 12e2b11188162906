import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from helpers import build_toy_corpus, toy_config  # noqa: E402

from comix.recipes import RecipeSpec, run_recipe  # noqa: E402
from comix.synth import save_vocoder_checkpoint  # noqa: E402
from comix.vocoder import Waveglow  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criteria pass/fail lines even under capture."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy_cfg():
    return toy_config()


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory, toy_cfg):
    root = tmp_path_factory.mktemp("toycorpus")
    manifest, texts = build_toy_corpus(root, toy_cfg, n_utterances=50, seed=0)
    return {"manifest": manifest, "texts": texts, "root": root}


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory, toy_cfg, toy_corpus):
    """The tiny-data overfit experiment; shared by several acceptance checks."""
    out_dir = tmp_path_factory.mktemp("overfit")
    spec = RecipeSpec(
        name="toy_overfit", stage="MIX_PRETRAIN", manifest=toy_corpus["manifest"],
        max_steps=1500, seed=3, lr=2e-3, out_dir=str(out_dir),
    )
    report = run_recipe(spec, toy_cfg)
    return {"report": report, "ckpt": report.checkpoint_paths[-1], "spec": spec}


@pytest.fixture(scope="session")
def toy_vocoder_ckpt(tmp_path_factory, toy_cfg):
    """Identity-initialized vocoder checkpoint matching the toy audio config."""
    torch.manual_seed(0)
    model = Waveglow(toy_cfg.waveglow, toy_cfg.audio)
    path = tmp_path_factory.mktemp("voc") / "vocoder.ckpt"
    save_vocoder_checkpoint(model, toy_cfg, path)
    return str(path)
