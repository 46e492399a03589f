"""
Tests for pixel-level scoring, the sweep harness and overlays.
"""

import json

import numpy as np
import pytest

from app.core.errors import EmptyGroundTruth, InvalidImageError
from app.models.detection_models import DetectorConfig
from app.models.eval_models import SweepCell
from app.models.forgery_models import DegradeSpec
from app.services.degrade_forge import build_corpus, parse_grid
from app.services.evaluation import (
    AGGREGATE_FIELDS,
    aggregate,
    aggregate_tsv,
    cells_jsonl,
    render_overlay,
    score,
    sweep,
    write_sweep_report
)
from app.services.pixel_core import BinaryMask, RgbImage


def pick(mask: BinaryMask, n: int) -> BinaryMask:
    """The first n set pixels of a mask in row-major order."""
    bits = np.zeros(mask.shape, dtype=bool)
    bits.flat[np.flatnonzero(mask.bits)[:n]] = True
    return BinaryMask(bits)


@pytest.fixture
def truth():
    return (
        BinaryMask.from_rect(100, 100, 0, 0, 20, 40),
        BinaryMask.from_rect(100, 100, 50, 0, 20, 40),
    )


@pytest.fixture
def small_corpus():
    return build_corpus(count=2, rows=64, cols=64, region=20, kind="noise", seed=3)


@pytest.mark.unit
class TestScore:
    """ACC and FP."""

    def test_perfect_detection(self, truth):
        report = score(truth, truth)
        assert report.acc == 1.0
        assert report.fp == 0.0
        assert report.truth_pixels == 1600
        assert not report.swapped

    def test_empty_detection(self, truth):
        empty = BinaryMask.empty(100, 100)
        report = score((empty, empty), truth)
        assert report.acc == 0.0
        assert report.fp == 0.0
        assert report.detected_pixels == 0

    def test_partial_detection(self, truth):
        """700 + 686 hits and 100 + 118 spurious pixels over 1600."""
        r1, r2 = truth
        d1 = pick(r1, 700) | pick(BinaryMask.from_rect(100, 100, 80, 0, 20, 100), 100)
        d2 = pick(r2, 686) | pick(BinaryMask.from_rect(100, 100, 30, 0, 10, 100), 118)
        report = score((d1, d2), truth)
        assert report.acc == pytest.approx(0.86625)
        assert report.fp == pytest.approx(0.13625)
        assert report.true_positive_pixels == 1386
        assert report.false_positive_pixels == 218

    def test_swapped_masks(self, truth):
        """Detected source and destination may come in either order."""
        r1, r2 = truth
        report = score((r2, r1), truth)
        assert report.acc == 1.0
        assert report.fp == 0.0
        assert report.swapped

    def test_tie_keeps_identity(self):
        r1 = BinaryMask.from_rect(20, 20, 0, 0, 5, 5)
        r2 = BinaryMask.from_rect(20, 20, 10, 10, 5, 5)
        both = r1 | r2
        assert not score((both, both), (r1, r2)).swapped

    def test_empty_ground_truth(self):
        empty = BinaryMask.empty(8, 8)
        with pytest.raises(EmptyGroundTruth):
            score((empty, empty), (empty, empty))

    def test_shape_mismatch(self, truth):
        wrong = BinaryMask.empty(50, 50)
        with pytest.raises(InvalidImageError):
            score((wrong, wrong), truth)

    def test_random_masks(self, image_generator, rng):
        """0 <= ACC <= 1, FP >= 0 and ACC + FP = detected / truth."""
        for _ in range(100):
            d = (image_generator.random_mask(rng), image_generator.random_mask(rng))
            r = (image_generator.random_mask(rng, density=0.2), image_generator.random_mask(rng, density=0.2))
            report = score(d, r)
            assert 0.0 <= report.acc <= 1.0
            assert report.fp >= 0.0
            expected = (d[0].popcount() + d[1].popcount()) / (r[0].popcount() + r[1].popcount())
            assert report.acc + report.fp == pytest.approx(expected)

    def test_metadata_echoed(self, truth):
        report = score(truth, truth, timing_ms={"total": 1.5}, config={"block_size": 8}, degradation={"jpeg_qf": 75})
        assert report.timing_ms == {"total": 1.5}
        assert report.config["block_size"] == 8
        assert report.degradation["jpeg_qf"] == 75


@pytest.mark.unit
class TestAggregate:
    """Per-grid-point means."""

    def test_means_and_counts(self):
        grid = [DegradeSpec(), DegradeSpec(jpeg_qf=50)]
        cells = [
            SweepCell(image_id="a", grid_index=0, grid_label="identity", degradation={},
                      expected_shift=[20, 0], acc=1.0, fp=0.1, localized=True),
            SweepCell(image_id="b", grid_index=0, grid_label="identity", degradation={},
                      expected_shift=[20, 0], acc=0.5, fp=0.3),
            SweepCell(image_id="a", grid_index=1, grid_label="qf=50", degradation={},
                      expected_shift=[20, 0], failed=True, error="CodecError: boom"),
        ]
        rows = aggregate(cells, grid)
        assert [r.grid_label for r in rows] == ["identity", "qf=50"]
        assert rows[0].mean_acc == pytest.approx(0.75, abs=1e-12)
        assert rows[0].mean_fp == pytest.approx(0.2, abs=1e-12)
        assert rows[0].localized == 1
        assert rows[1].cells == 1
        assert rows[1].failed == 1
        assert rows[1].mean_acc == 0.0

    def test_grid_point_without_cells(self):
        rows = aggregate([], [DegradeSpec()])
        assert rows[0].cells == 0
        assert rows[0].mean_acc == 0.0


@pytest.mark.unit
class TestSweep:
    """Sweep harness."""

    def test_identity_localizes_clones(self, small_corpus):
        report = sweep(small_corpus, parse_grid("identity"), DetectorConfig(window=4))
        assert len(report.cells) == 2
        row = report.row("identity")
        assert row.failed == 0
        assert row.localized == 2
        assert row.mean_acc >= 0.95
        for cell in report.cells:
            assert cell.accepted_shift == cell.expected_shift

    def test_cells_are_corpus_major(self, small_corpus):
        report = sweep(small_corpus, parse_grid("identity;qf=90"))
        assert [(c.image_id, c.grid_index) for c in report.cells] == [
            ("img000", 0), ("img000", 1), ("img001", 0), ("img001", 1),
        ]
        assert report.cells[1].degradation["jpeg_qf"] == 90

    def test_empty_grid(self, small_corpus):
        report = sweep(small_corpus, [])
        assert report.cells == []
        assert report.aggregate == []

    def test_failed_cells_do_not_abort(self):
        """A block larger than the image fails every cell; the sweep still returns."""
        corpus = build_corpus(count=2, rows=32, cols=32, region=12, kind="noise")
        report = sweep(corpus, parse_grid("identity"), DetectorConfig(block_size=40))
        assert len(report.cells) == 2
        for cell in report.cells:
            assert cell.failed
            assert cell.acc == 0.0 and cell.fp == 0.0
            assert cell.error.startswith("BlockTooLarge")
        assert report.aggregate[0].failed == 2

    def test_threads_do_not_change_report(self, small_corpus):
        grid = parse_grid("identity;snr=30;qf=75")
        single = sweep(small_corpus, grid, seed=5)
        threaded = sweep(small_corpus, grid, seed=5, threads=3)
        assert cells_jsonl(single.cells) == cells_jsonl(threaded.cells)
        assert aggregate_tsv(single.aggregate) == aggregate_tsv(threaded.aggregate)

    def test_cell_seeds_differ_by_image(self, small_corpus):
        report = sweep(small_corpus, parse_grid("snr=30"))
        seeds = {c.degradation["seed"] for c in report.cells}
        assert len(seeds) == 2

    def test_config_echo(self, small_corpus):
        report = sweep(small_corpus, [], DetectorConfig(th2=50))
        assert report.config["th2"] == 50
        assert "threads" not in report.config


@pytest.mark.unit
class TestReportFiles:
    """Report serialization."""

    def test_aggregate_tsv_format(self, small_corpus):
        report = sweep(small_corpus, parse_grid("identity"), DetectorConfig(window=4))
        lines = aggregate_tsv(report.aggregate).splitlines()
        assert lines[0].split("\t") == AGGREGATE_FIELDS
        fields = lines[1].split("\t")
        assert fields[0] == "0"
        assert fields[1] == "identity"
        assert len(fields[5].split(".")[1]) == 6

    def test_write_sweep_report(self, small_corpus, tmp_path):
        report = sweep(small_corpus, parse_grid("identity;qf=75"))
        paths = write_sweep_report(report, tmp_path / "out")
        records = [json.loads(line) for line in paths["report"].read_text().splitlines()]
        assert len(records) == 4
        assert all("timing_ms" not in r for r in records)
        timings = [json.loads(line) for line in paths["timings"].read_text().splitlines()]
        assert "total" in timings[0]["timing_ms"]
        assert paths["aggregate"].read_text().startswith("grid_index\t")


@pytest.mark.unit
class TestRenderOverlay:
    """Detection overlays."""

    def test_tints_masked_pixels(self):
        img = RgbImage.from_gray(np.full((10, 10), 100))
        mask = BinaryMask.from_rect(10, 10, 2, 2, 3, 3)
        out = render_overlay(img, [mask])
        assert tuple(out.pixels[3, 3]) == (193, 124, 40)
        assert tuple(out.pixels[0, 0]) == (100, 100, 100)

    def test_union_of_masks(self):
        img = RgbImage.from_gray(np.full((10, 10), 0))
        out = render_overlay(img, [BinaryMask.from_rect(10, 10, 0, 0, 2, 2), BinaryMask.from_rect(10, 10, 5, 5, 2, 2)])
        assert int(np.sum(out.pixels[:, :, 0] > 0)) == 8

    def test_shape_mismatch(self):
        img = RgbImage.from_gray(np.zeros((10, 10)))
        with pytest.raises(InvalidImageError):
            render_overlay(img, [BinaryMask.empty(5, 5)])
