import pytest

from comix.corpus import (
    CorpusError,
    CorpusManifest,
    UtteranceRecord,
    filter_lang,
    load_manifest,
    pool,
    save_manifest,
    speaker_view,
    split,
    subset_by_duration,
)


def rec(i, dur=2.0, speaker="s1", lang="HI", text="नमस ते"):
    return UtteranceRecord(
        id=f"u{i}", audio_path=f"/data/u{i}.wav", text=text,
        source_lang=lang, speaker_id=speaker, duration_s=dur,
    )


def manifest(records):
    return CorpusManifest(tuple(records), 22050)


class TestPool:
    def test_identity_on_singleton(self):
        m = manifest([rec(1), rec(2)])
        assert pool([m]).records == m.records

    def test_language_fractions(self):
        hi = manifest([rec(i, dur=9.75 * 3600 / 10, lang="HI") for i in range(10)])
        en = manifest([rec(i + 100, dur=5.25 * 3600 / 10, lang="EN") for i in range(10)])
        fractions = pool([hi, en]).summary()["lang_fractions"]
        assert fractions["HI"] == pytest.approx(0.65)
        assert fractions["EN"] == pytest.approx(0.35)

    def test_id_collision(self):
        with pytest.raises(CorpusError, match="u1"):
            pool([manifest([rec(1)]), manifest([rec(1)])])

    def test_rate_mismatch(self):
        with pytest.raises(CorpusError, match="mismatch"):
            pool([manifest([rec(1)]), CorpusManifest((rec(2),), 16000)])

    def test_commutative_up_to_order(self):
        a, b = manifest([rec(1)]), manifest([rec(2)])
        assert set(r.id for r in pool([a, b]).records) == \
               set(r.id for r in pool([b, a]).records)


class TestSubset:
    def test_full_target_returns_everything(self):
        m = manifest([rec(i) for i in range(5)])
        assert len(subset_by_duration(m, m.total_duration_s, seed=1).records) == 5

    def test_forced_count(self):
        # 10 records of 2 s, target 5 s: greedy accumulation always takes 3
        m = manifest([rec(i, dur=2.0) for i in range(10)])
        sub = subset_by_duration(m, 5.0, seed=42)
        assert len(sub.records) == 3
        assert sub.total_duration_s == pytest.approx(6.0)

    def test_target_exceeds_total(self):
        m = manifest([rec(1)])
        with pytest.raises(CorpusError, match="exceeds"):
            subset_by_duration(m, 100.0, seed=0)

    def test_deterministic_per_seed(self):
        m = manifest([rec(i, dur=1 + i * 0.1) for i in range(20)])
        a = subset_by_duration(m, 10.0, seed=5)
        b = subset_by_duration(m, 10.0, seed=5)
        assert [r.id for r in a.records] == [r.id for r in b.records]

    def test_monotone_in_target(self):
        m = manifest([rec(i, dur=1 + i * 0.1) for i in range(20)])
        small = {r.id for r in subset_by_duration(m, 5.0, seed=9).records}
        large = {r.id for r in subset_by_duration(m, 12.0, seed=9).records}
        assert small <= large

    def test_duration_window(self):
        m = manifest([rec(i, dur=1 + i * 0.3) for i in range(20)])
        sub = subset_by_duration(m, 8.0, seed=3)
        max_dur = max(r.duration_s for r in m.records)
        assert 8.0 <= sub.total_duration_s < 8.0 + max_dur


class TestSplit:
    def test_single_speaker_fraction(self):
        m = manifest([rec(i) for i in range(100)])
        out = split(m, 0.1, seed=0)
        assert sum(r.split == "VAL" for r in out.records) == 10

    def test_stratified(self):
        records = [rec(i, speaker="a") for i in range(50)]
        records += [rec(i + 50, speaker="b") for i in range(50)]
        out = split(manifest(records), 0.1, seed=0)
        for spk in ("a", "b"):
            n_val = sum(r.split == "VAL" for r in out.records if r.speaker_id == spk)
            assert n_val == 5

    def test_deterministic(self):
        m = manifest([rec(i) for i in range(30)])
        a = split(m, 0.2, seed=11)
        b = split(m, 0.2, seed=11)
        assert [r.split for r in a.records] == [r.split for r in b.records]

    def test_small_speaker_gets_val(self):
        m = manifest([rec(1, speaker="tiny"), rec(2, speaker="tiny")])
        out = split(m, 0.1, seed=0)
        assert sum(r.split == "VAL" for r in out.records) >= 1

    def test_fraction_bounds(self):
        with pytest.raises(CorpusError):
            split(manifest([rec(1)]), 0.6, seed=0)


class TestSpeakerView:
    def test_single_speaker_identity(self):
        m = manifest([rec(i) for i in range(3)])
        assert speaker_view(m, "s1").records == m.records

    def test_multi_speaker_view(self):
        records = [rec(i, speaker=f"spk{i % 5}", dur=3600.0) for i in range(25)]
        view = speaker_view(manifest(records), "spk0")
        assert {r.speaker_id for r in view.records} == {"spk0"}
        assert len(view.records) == 5

    def test_unknown_speaker(self):
        with pytest.raises(CorpusError, match="s1"):
            speaker_view(manifest([rec(1)]), "nope")


def test_filter_lang():
    m = manifest([rec(1, lang="HI"), rec(2, lang="EN")])
    assert [r.id for r in filter_lang(m, "EN").records] == ["u2"]


def test_latin_text_rejected():
    with pytest.raises(CorpusError, match="Latin"):
        manifest([rec(1, text="hello")]).validate()


def test_manifest_roundtrip(tmp_path):
    m = split(manifest([rec(i, dur=1.5, lang="EN" if i % 2 else "HI") for i in range(6)]),
              0.2, seed=1)
    path = tmp_path / "m.jsonl"
    save_manifest(m, path)
    loaded = load_manifest(path)
    assert loaded.records == m.records
    assert loaded.sample_rate_hz == 22050
    assert (tmp_path / "m.jsonl.summary.json").exists()
