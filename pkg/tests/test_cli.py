import json

import pytest

from schemnet.cli import main


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    rc = main(["synth", "-o", str(root), "--seed-start", "0", "--count", "3"])
    assert rc == 0
    return root


class TestSynth:
    def test_layout(self, corpus):
        for seed in range(3):
            d = corpus / str(seed)
            for name in ("image.pgm", "detections.json", "texts.json",
                         "golden.cir"):
                assert (d / name).exists()

    def test_degraded_variant(self, tmp_path):
        rc = main(["synth", "-o", str(tmp_path), "--seed-start", "1",
                   "--count", "1", "--scale", "2", "--brightness", "-32",
                   "--flip", "--gaps", "2"])
        assert rc == 0
        clean = main(["synth", "-o", str(tmp_path / "clean"), "--seed-start",
                      "1", "--count", "1"])
        assert clean == 0
        deg = (tmp_path / "1" / "image.pgm").read_bytes()
        ref = (tmp_path / "clean" / "1" / "image.pgm").read_bytes()
        assert deg != ref
        # golden netlist is for the underlying circuit, not the degradation
        assert (tmp_path / "1" / "golden.cir").read_bytes() == \
            (tmp_path / "clean" / "1" / "golden.cir").read_bytes()


class TestConvert:
    def test_clean_image_exit_zero(self, corpus, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main(["convert", str(corpus / "0" / "image.pgm"),
                   "-o", str(out)])
        assert rc == 0
        cir = (out.parent / "out.cir").read_text()
        assert cir.endswith(".end\n")
        flags = json.loads((out.parent / "out.flags.json").read_text())
        assert flags["flags"] == []
        assert "config" in flags

    def test_missing_image_exit_one(self, tmp_path, capsys):
        rc = main(["convert", str(tmp_path / "nope.pgm")])
        assert rc == 1
        assert capsys.readouterr().err != ""

    def test_deterministic_outputs(self, corpus, tmp_path):
        img = str(corpus / "1" / "image.pgm")
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["convert", img, "-o", str(a)]) == 0
        assert main(["convert", img, "-o", str(b)]) == 0
        assert (tmp_path / "a.cir").read_bytes() == (tmp_path / "b.cir").read_bytes()
        assert (tmp_path / "a.flags.json").read_bytes() == \
            (tmp_path / "b.flags.json").read_bytes()

    def test_dump_stages(self, corpus, tmp_path):
        img = str(corpus / "0" / "image.pgm")
        out = tmp_path / "s"
        rc = main(["convert", img, "-o", str(out),
                   "--dump-stage", "binary", "--dump-stage", "detections",
                   "--dump-stage", "nets"])
        assert rc == 0
        assert (tmp_path / "s.binary.pgm").read_bytes().startswith(b"P5")
        dets = json.loads((tmp_path / "s.detections.json").read_text())
        assert dets["components"]
        assert json.loads((tmp_path / "s.nets.json").read_text())["nets"]

    def test_external_detections_route(self, corpus, tmp_path):
        img = str(corpus / "0" / "image.pgm")
        rc = main(["convert", img, "-o", str(tmp_path / "x"),
                   "--detections", str(corpus / "0" / "detections.json"),
                   "--ocr", str(corpus / "0" / "texts.json")])
        assert rc == 0

    def test_bad_config_file_exit_one(self, corpus, tmp_path, capsys):
        cfgf = tmp_path / "bad.cfg"
        cfgf.write_text("connectivity = 5\n")
        rc = main(["convert", str(corpus / "0" / "image.pgm"),
                   "--config", str(cfgf), "-o", str(tmp_path / "y")])
        assert rc == 1
        assert "connectivity" in capsys.readouterr().err

    def test_flag_overrides_config_file(self, corpus, tmp_path):
        cfgf = tmp_path / "ok.cfg"
        cfgf.write_text("connectivity = 4\ngap_radius = 2\n")
        out = tmp_path / "z"
        rc = main(["convert", str(corpus / "0" / "image.pgm"),
                   "--config", str(cfgf), "--connectivity", "8",
                   "-o", str(out)])
        assert rc == 0
        doc = json.loads((tmp_path / "z.flags.json").read_text())
        assert doc["config"]["connectivity"] == 8
        assert doc["config"]["gap_radius"] == 2

    def test_overrides_file_preapplied(self, corpus, tmp_path):
        ovf = tmp_path / "ov.json"
        ovf.write_text(json.dumps([
            {"action": "set_value", "component": 1,
             "payload": {"value": "123k"}},
        ]))
        out = tmp_path / "ov"
        rc = main(["convert", str(corpus / "0" / "image.pgm"),
                   "--overrides", str(ovf), "-o", str(out)])
        assert rc == 0
        assert "123k" in (tmp_path / "ov.cir").read_text()

    def test_bad_overrides_file_exit_one(self, corpus, tmp_path, capsys):
        ovf = tmp_path / "ov.json"
        ovf.write_text(json.dumps([{"action": "paint_it_blue"}]))
        rc = main(["convert", str(corpus / "0" / "image.pgm"),
                   "--overrides", str(ovf), "-o", str(tmp_path / "x")])
        assert rc == 1
        assert "overrides" in capsys.readouterr().err


class TestFlagGate:
    def test_cut_wire_exits_two_without_netlist(self, corpus, tmp_path, capsys):
        import numpy as np
        from schemnet import pipeline, raster
        img = raster.load_image((corpus / "2" / "image.pgm").read_bytes())
        base = pipeline.convert_image(img)
        data = img.data.copy()
        boxes = [c.bbox for c in base.components]
        ys, xs = np.nonzero(data < 128)
        for y, x in zip(ys, xs):
            if any(b.x - 4 <= x < b.x2 + 4 and b.y - 4 <= y < b.y2 + 4
                   for b in boxes):
                continue
            data[max(0, y - 4): y + 5, max(0, x - 4): x + 5] = 255
            break
        cut = tmp_path / "cut.pgm"
        cut.write_bytes(raster.write_pgm(raster.GrayImage(data)))
        out = tmp_path / "cut_out"
        rc = main(["convert", str(cut), "-o", str(out)])
        assert rc == 2
        err = capsys.readouterr().err
        assert "dangling_terminal" in err
        assert not (tmp_path / "cut_out.cir").exists()
        doc = json.loads((tmp_path / "cut_out.flags.json").read_text())
        assert any(f["kind"] == "dangling_terminal" for f in doc["flags"])
        # forced run emits despite the open flag
        rc2 = main(["convert", str(cut), "-o", str(tmp_path / "forced"),
                    "--force"])
        assert rc2 == 2
        assert (tmp_path / "forced.cir").exists()


class TestBatchEval:
    def test_round_trip_all_perfect(self, corpus, tmp_path, capsys):
        pred = tmp_path / "pred"
        rc = main(["batch", str(corpus), "-o", str(pred)])
        assert rc == 0
        summary = json.loads((pred / "summary.json").read_text())
        assert summary["complete"] == 3
        rc = main(["eval", str(corpus), str(pred), "-o", str(tmp_path)])
        assert rc == 0
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["netlist"]["structure_accuracy"] == 1.0
        assert rep["netlist"]["overall_accuracy"] == 1.0
        assert rep["detection"]["f1_pooled"] == 1.0
        assert "structure" in capsys.readouterr().out

    def test_empty_corpus_errors(self, tmp_path, capsys):
        empty = tmp_path / "none"
        empty.mkdir()
        rc = main(["batch", str(empty), "-o", str(tmp_path / "p")])
        assert rc == 1

    def test_parallel_jobs_match_serial(self, corpus, tmp_path):
        a, b = tmp_path / "serial", tmp_path / "par"
        assert main(["batch", str(corpus), "-o", str(a)]) == 0
        assert main(["batch", str(corpus), "-o", str(b), "--jobs", "2"]) == 0
        for d in sorted(p.name for p in a.iterdir() if p.is_dir()):
            assert (a / d / "out.cir").read_bytes() == \
                (b / d / "out.cir").read_bytes()


class TestUsage:
    def test_no_args_exit_nonzero(self, capsys):
        with pytest.raises(SystemExit):
            main([])

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit):
            main(["transmogrify"])
