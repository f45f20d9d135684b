import csv
import json

import pytest

from artikit.config import PipelineConfig, load_config, parse_config
from artikit.errors import ValidationError
from artikit.eval import EvalReport
from artikit.report import eval_report, training_report, write_csv


def test_defaults():
    cfg = PipelineConfig()
    assert (cfg.k, cfg.n, cfg.alpha_kl, cfg.cfg_scale, cfg.steps, cfg.lam) == (8, 48, 0.001, 3.0, 50, 0.01)


def test_parse_and_coerce():
    cfg = parse_config("resolution = 16\ncfg_scale = 2\nvae = 'x.atns'\n")
    assert cfg.resolution == 16 and cfg.cfg_scale == 2.0 and isinstance(cfg.cfg_scale, float)


@pytest.mark.parametrize("text", ["bogus = 1", "steps = 'many'", "resolution = 10", "eps = -1.0", "k = true",
                                  "steps = [1"])
def test_rejects_bad_files(text):
    with pytest.raises(ValidationError):
        parse_config(text)


def test_precedence(tmp_path, monkeypatch):
    (tmp_path / "artikit.toml").write_text("seed = 5\nsteps = 20\n")
    monkeypatch.chdir(tmp_path)
    cfg = load_config().merged({"steps": 7, "seed": None})
    assert (cfg.seed, cfg.steps, cfg.k) == (5, 7, 8)


def test_reports_write_files(tmp_path):
    files = eval_report(EvalReport(rs_cd=0.1, as_cd=0.2), tmp_path, {"object": "x"})
    rows = list(csv.DictReader(open(files["csv"])))
    assert {"metric": "rs_cd", "value": "0.1"} in rows
    assert json.loads(open(files["json"]).read())["object"] == "x"
    assert open(files["figure"], "rb").read(4) == b"\x89PNG"
    out = training_report([{"a": 1.0, "total": 2.0}, {"a": 0.5, "total": 1.0}], tmp_path, "vae")
    assert open(out["csv"]).read().splitlines()[0] == "step,a,total"


def test_csv_float_format(tmp_path):
    write_csv([{"x": 1 / 3}], tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == "x\n0.3333333333\n"
