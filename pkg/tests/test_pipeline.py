"""Configuration, orchestration and report writing on the synthetic dataset."""

import json
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from causal_pulse.cli import main as cli_main
from causal_pulse.config import Parameters, load_config
from causal_pulse.errors import ConfigError
from causal_pulse.pipeline import run_impact, run_placebo, load_inputs
from causal_pulse.plots import ImpactPlotData, render_impact_svg


def _write_config(tmp_path, body) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(body), encoding="utf-8")
    return path


class TestConfig:
    def test_defaults_are_canonical_constants(self):
        p = Parameters()
        assert (p.p_max_daily, p.p_max_weekly) == (14, 6)
        assert (p.pre_weeks, p.post_days) == (11, 7)
        assert p.q == 0.05 and p.top_k == 100 and p.min_freq == 50
        assert p.max_sparsity == 0.25 and p.mc_draws == 10000
        assert p.placebo_shift_days == -21 and p.confidence == 0.99

    def test_unknown_top_level_key_rejected(self, tmp_path):
        path = _write_config(tmp_path, {"output_dir": "out", "bogus": 1})
        with pytest.raises(ConfigError, match="bogus"):
            load_config(path)

    def test_unknown_param_rejected(self, tmp_path):
        path = _write_config(tmp_path, {"output_dir": "out", "params": {"alpha_level": 0.1}})
        with pytest.raises(ConfigError, match="alpha_level"):
            load_config(path)

    def test_unknown_analysis_rejected(self, tmp_path):
        path = _write_config(tmp_path, {"output_dir": "out", "analyses": ["impact", "magic"]})
        with pytest.raises(ConfigError, match="magic"):
            load_config(path)

    def test_overrides_echoed(self, tmp_path):
        path = _write_config(
            tmp_path, {"output_dir": "out", "params": {"top_k": 25, "q": 0.05}}
        )
        config = load_config(path)
        assert config.overrides == {"top_k": 25}  # q matches the default: not an override
        assert config.param_header()["overridden"] == ["top_k"]
        assert config.param_header()["top_k"] == 25

    def test_cli_seed_override_recorded(self, tmp_path):
        path = _write_config(tmp_path, {"output_dir": "out"})
        config = load_config(path, seed_override=99)
        assert config.params.seed == 99
        assert "seed" in config.overrides

    def test_missing_output_dir(self, tmp_path):
        path = _write_config(tmp_path, {"analyses": ["impact"]})
        with pytest.raises(ConfigError, match="output_dir"):
            load_config(path)
        assert load_config(path, out_override=str(tmp_path / "o")).output_dir.name == "o"

    def test_relative_paths_resolve_against_config(self, tmp_path):
        path = _write_config(
            tmp_path, {"output_dir": "out", "data": {"news_volume": "vol.csv"}}
        )
        config = load_config(path)
        assert config.data.news_volume == tmp_path / "vol.csv"


class TestSyntheticRun:
    def test_every_section_present(self, synth_run):
        _, sections, _ = synth_run
        assert list(sections) == ["impact", "granger_news", "diffusion", "lexicon", "placebo"]

    def test_injected_event_drives_impact(self, synth_run):
        _, sections, _ = synth_run
        rows = sections["impact"].rows
        flagged = {(r["platform"], r["signal"], r["event"]) for r in rows if r["bh_significant"]}
        assert flagged == {
            ("alpha", "posters", "alpha spike"),
            ("alpha", "posts_per_poster", "alpha spike"),
        }
        spike = [r for r in rows if r["event"] == "alpha spike" and r["platform"] == "alpha"]
        assert all(r["significant_99"] for r in spike)
        assert all(r["effect_pct"] > 0 for r in spike)

    def test_granger_coupling_found_with_correct_direction(self, synth_run):
        _, sections, _ = synth_run
        hits = [r for r in sections["granger_news"].rows if r["significant_fdr"]]
        assert {(r["forum"], r["response"], r["direction"]) for r in hits} == {
            ("alpha", "posts_per_poster", "entity_one->posts_per_poster"),
        }

    @staticmethod
    def _expand_annotation(text):
        """'1+-5+,8- (6/12)' -> {(1,'+'),...,(5,'+'),(8,'-')}."""
        import re

        body = text.split(" ")[0]
        flagged = set()
        if body == "-":
            return flagged
        for part in body.split(","):
            ends = [(int(m.group(1)), m.group(2)) for m in re.finditer(r"(\d+)([+-])", part)]
            lo, sign = ends[0]
            hi = ends[-1][0]
            flagged.update((lag, sign) for lag in range(lo, hi + 1))
        return flagged

    def test_diffusion_term_found_lag_positive(self, synth_run):
        _, sections, _ = synth_run
        hits = [r for r in sections["diffusion"].rows if r["significant_fdr"]]
        assert len(hits) == 1
        hit = hits[0]
        assert hit["term"] == "glimmer"
        assert hit["direction"] == "alpha:glimmer->beta:glimmer"
        # the three-week transfer shows as a positive flagged lag 3
        assert (3, "+") in self._expand_annotation(hit["lag_annotation"])

    def test_results_plus_skips_account_for_all_tasks(self, synth_run):
        _, sections, _ = synth_run
        gn = sections["granger_news"]
        # 3 entities x 3 forums x 3 metrics, two directions per fitted pair
        assert len(gn.rows) / 2 + len(gn.skips) == 27
        imp = sections["impact"]
        assert len(imp.rows) + len(imp.skips) == 3 * 2 * 3  # events x signals x platforms

    def test_family_sizes_match_membership(self, synth_run):
        _, sections, _ = synth_run
        for section in sections.values():
            for family in section.families:
                assert family["size"] >= family["n_rejected"] >= 0
        gn = sections["granger_news"]
        sizes = {f["label"]: f["size"] for f in gn.families}
        for label, size in sizes.items():
            forum, metric = label.split(":")
            members = [r for r in gn.rows if r["forum"] == forum and r["response"] == metric]
            assert len(members) == size

    def test_every_pvalue_in_exactly_one_family(self, synth_run):
        _, sections, _ = synth_run
        gn = sections["granger_news"]
        total = sum(f["size"] for f in gn.families)
        assert total == len(gn.rows)

    def test_report_files_written(self, synth_run):
        _, _, outdir = synth_run
        for name in ("impact", "granger_news", "diffusion", "lexicon", "placebo"):
            assert (outdir / f"{name}.csv").exists()
            assert (outdir / f"{name}.json").exists()
        manifest = json.loads((outdir / "run_manifest.json").read_text())
        assert manifest["seed"] == 11
        assert len(manifest["config_hash"]) == 64
        svgs = list((outdir / "plots").glob("*.svg"))
        assert len(svgs) == 18  # one per analysed event x platform x signal

    def test_lexicon_csv_columns(self, synth_run):
        _, _, outdir = synth_run
        header = (outdir / "lexicon.csv").read_text().splitlines()[0]
        assert header == "community,partner,term,npmi,freq_target,freq_rest,sparsity_target,sparsity_rest"

    def test_placebo_rates_recorded(self, synth_run):
        _, sections, _ = synth_run
        rows = sections["placebo"].rows
        assert len(rows) == 6
        for row in rows:
            assert row["n_analysable"] == 3
            assert row["fpr_99"] <= row["fpr_95"] + 1e-12


class TestSectionEdgeCases:
    def test_empty_events_noted(self, synth_dataset, tmp_path):
        config = load_config(synth_dataset, out_override=str(tmp_path / "o"))
        empty = tmp_path / "no_events.csv"
        empty.write_text("date,name\n", encoding="utf-8")
        import dataclasses

        config = dataclasses.replace(
            config, data=dataclasses.replace(config.data, events=empty)
        )
        inputs = load_inputs(config)
        section, payload = run_impact(config, inputs, jobs=1)
        assert section.rows == [] and payload == []
        assert any("empty" in note for note in section.notes)

    def test_placebo_zero_shift_refused(self, synth_dataset, tmp_path):
        config = load_config(synth_dataset, out_override=str(tmp_path / "o"))
        import dataclasses

        config = dataclasses.replace(
            config, params=dataclasses.replace(config.params, placebo_shift_days=0)
        )
        inputs = load_inputs(config)
        with pytest.raises(ConfigError, match="coincide"):
            run_placebo(config, inputs, jobs=1)


class TestPlots:
    def _data(self, diff=0.0):
        n = 84
        observed = np.full(n, 10.0)
        observed[77:] += diff
        return ImpactPlotData(
            title="event - platform/signal",
            dates=[date(2020, 1, 1) for _ in range(n)],
            observed=observed,
            predicted=np.full(n, 10.0),
            lower=np.full(n, 9.0),
            upper=np.full(n, 11.0),
            post_start=77,
        )

    def test_byte_identical_for_identical_input(self):
        assert render_impact_svg(self._data()) == render_impact_svg(self._data())

    def test_zero_effect_difference_centred(self):
        svg = render_impact_svg(self._data(0.0))
        assert svg.startswith("<?xml")
        assert "pointwise difference" in svg

    def test_title_escaped(self):
        data = self._data()
        data = ImpactPlotData(
            title="a < b & c", dates=data.dates, observed=data.observed,
            predicted=data.predicted, lower=data.lower, upper=data.upper,
            post_start=data.post_start,
        )
        svg = render_impact_svg(data)
        assert "a &lt; b &amp; c" in svg


class TestCli:
    def test_synth_then_single_analysis(self, tmp_path, capsys):
        assert cli_main(["synth", "--out", str(tmp_path / "ds"), "--seed", "7"]) == 0
        config = tmp_path / "ds" / "config_synth.json"
        code = cli_main([
            "lexicon", "--config", str(config), "--out", str(tmp_path / "out"), "--jobs", "2",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "lexicon:" in out
        assert (tmp_path / "out" / "lexicon.csv").exists()

    def test_bad_config_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"nope": 1}', encoding="utf-8")
        assert cli_main(["all", "--config", str(bad)]) == 2
        assert "error:" in capsys.readouterr().err
