import filecmp
import numpy as np
import pytest

from canopy.dataset import (DatasetLayout, read_cluster_meta, read_labels,
                            read_tracks)

from conftest import run_cli


@pytest.fixture(scope="module")
def pipeline_dataset(tmp_path_factory):
    """One small dataset taken through every pipeline stage."""
    root = tmp_path_factory.mktemp("cli") / "ds"
    args = ["synth", "--dataset", root, "--seed", 13,
            "--n-trees", 6, "--frames", 25, "--pixel-stride", 4,
            "--trunk-diameter-min", 0.3, "--trunk-height-min", 3.0,
            "--area-x", 12]
    assert run_cli(*args) == 0
    assert run_cli("segment", "--dataset", root) == 0
    assert run_cli("sparsify", "--dataset", root) == 0
    assert run_cli("label", "--dataset", root) == 0
    assert run_cli("detect-baseline", "--dataset", root) == 0
    assert run_cli("track", "--dataset", root) == 0
    return DatasetLayout(root)


class TestPipeline:
    def test_all_stages_produce_files(self, pipeline_dataset):
        layout = pipeline_dataset
        for directory, suffix in [(layout.clouds, ".ply"), (layout.sparse, ".ply"),
                                  (layout.labels_dir, ".txt"),
                                  (layout.detections, ".txt"),
                                  (layout.tracks, ".txt")]:
            assert len(layout.frame_indices(directory, suffix)) == 25
        assert layout.clusters.is_file() and layout.clusters_meta.is_file()

    def test_segment_finds_all_trees(self, pipeline_dataset):
        meta, plane = read_cluster_meta(pipeline_dataset.clusters_meta)
        assert len(meta) == 6
        assert plane is not None
        normal = plane[0]
        assert abs(normal @ [0, 0, 1]) > 0.999

    def test_labels_parse_and_carry_score_one(self, pipeline_dataset):
        frames = pipeline_dataset.frame_indices(pipeline_dataset.labels_dir, ".txt")
        some = read_labels(pipeline_dataset.frame_file(
            pipeline_dataset.labels_dir, frames[len(frames) // 2], ".txt"))
        assert all(rec.score == 1.0 for rec in some)

    def test_tracks_have_stable_ids(self, pipeline_dataset):
        layout = pipeline_dataset
        seen = {}
        for k in layout.frame_indices(layout.tracks, ".txt"):
            for rec in read_tracks(layout.frame_file(layout.tracks, k, ".txt")):
                seen.setdefault(rec.track_id, []).append(rec.bev[:2])
        assert seen, "tracker produced no confirmed tracks"
        for track_id, positions in seen.items():
            drift = np.linalg.norm(np.ptp(np.array(positions), axis=0))
            assert drift < 1.0, f"track {track_id} wandered {drift:.2f} m"

    def test_evaluate_self_comparison_is_perfect(self, pipeline_dataset, capsys):
        root = pipeline_dataset.root
        assert run_cli("evaluate", "--dataset", root, "--estimates", "gt_labels",
                       "--gt", "gt_labels") == 0
        out = capsys.readouterr().out
        rows = [line.split(",") for line in out.splitlines()
                if line and line[0].isdigit()]
        assert all(int(r[3]) == 0 and int(r[4]) == 0 for r in rows)  # fp, fn
        mae = [float(r[5]) for r in rows if r[5]]
        assert all(v == 0.0 for v in mae)

    def test_evaluate_report_file(self, pipeline_dataset, tmp_path):
        report = tmp_path / "report.csv"
        assert run_cli("evaluate", "--dataset", pipeline_dataset.root,
                       "--estimates", "labels", "--gt", "gt_labels",
                       "--report", report) == 0
        assert report.read_text().startswith("bin_lo,bin_hi,tp,fp,fn")


class TestCliContract:
    def test_unknown_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("frobnicate")
        assert exc.value.code == 2

    def test_unknown_flag_exits_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("synth", "--dataset", tmp_path / "x", "--no-such-flag", 1)
        assert exc.value.code == 2

    def test_invalid_config_value_exits_1(self, tmp_path, capsys):
        code = run_cli("track", "--dataset", tmp_path / "x", "--min-hits", 0)
        assert code == 1
        assert "min_hits" in capsys.readouterr().err

    def test_missing_dataset_errors(self, tmp_path, capsys):
        code = run_cli("segment", "--dataset", tmp_path / "missing")
        assert code == 1

    def test_help_lists_config_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("track", "--help")
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "--min-hits" in out
        assert "--tracker.min_hits" in out
        assert "--dbscan.eps" in out

    def test_config_file_not_found_exits_1(self, tmp_path, capsys):
        code = run_cli("synth", "--dataset", tmp_path / "d",
                       "--config", tmp_path / "nope.txt")
        assert code == 1


class TestDeterminism:
    def test_synth_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run_cli("synth", "--dataset", d, "--seed", 3, "--n-trees", 4,
                           "--frames", 6, "--pixel-stride", 6) == 0
            assert run_cli("segment", "--dataset", d) == 0
        compared = filecmp.dircmp(a, b)
        assert not _tree_differs(compared)

    def test_threaded_stages_match_sequential(self, tmp_path):
        a, b = tmp_path / "t1", tmp_path / "t4"
        for d, threads in ((a, 1), (b, 4)):
            assert run_cli("synth", "--dataset", d, "--seed", 5, "--n-trees", 4,
                           "--frames", 8, "--pixel-stride", 6) == 0
            assert run_cli("sparsify", "--dataset", d, "--threads", threads) == 0
            assert run_cli("detect-baseline", "--dataset", d,
                           "--threads", threads) == 0
        assert not _tree_differs(filecmp.dircmp(a, b))


def _tree_differs(cmp: filecmp.dircmp) -> bool:
    if cmp.diff_files or cmp.left_only or cmp.right_only or cmp.funny_files:
        return True
    return any(_tree_differs(sub) for sub in cmp.subdirs.values())
