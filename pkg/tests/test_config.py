import pytest

from canopy.config import RunConfig, read_config, write_config
from canopy.errors import ConfigError


def test_defaults_match_reported_values():
    c = RunConfig()
    assert c.dbscan_eps == 0.1
    assert c.dbscan_min_samples == 10
    assert c.dbscan_min_cluster_points == 2000
    assert c.ransac_iterations == 1000
    assert c.ransac_distance_threshold == 0.5
    assert c.ground_margin == 0.5
    assert c.baseline_ransac_iterations == 50
    assert c.sparsifier_n_lines == 128
    assert c.sparsifier_elev_min_deg == -35.0
    assert c.sparsifier_elev_max_deg == 35.0
    assert c.sparsifier_max_range == 15.0
    assert c.tracker_min_hits == 3
    assert c.tracker_max_age == 100
    assert c.tracker_gate_prob == 0.95
    assert c.eval_cutoff == 1.0


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    assert read_config(path) == RunConfig()


def test_sections_and_dotted_keys_equivalent(tmp_path):
    a = tmp_path / "a.txt"
    a.write_text("dbscan.eps = 0.2\ntracker.min_hits = 5\n")
    b = tmp_path / "b.txt"
    b.write_text("[dbscan]\neps = 0.2\n[tracker]\nmin_hits = 5\n")
    assert read_config(a) == read_config(b)
    assert read_config(a).dbscan_eps == 0.2
    assert read_config(a).tracker_min_hits == 5


def test_unknown_key_fails_closed(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("dbscan.epsilon = 0.1\n")
    with pytest.raises(ConfigError):
        read_config(path)


def test_out_of_range_rejected(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("dbscan.eps = -1\n")
    with pytest.raises(ConfigError):
        read_config(path)


@pytest.mark.parametrize("key,value", [
    ("tracker.min_hits", 0),
    ("tracker.gate_prob", 1.0),
    ("noise.dropout", 1.0),
    ("dbscan.min_samples", 0),
    ("eval.cutoff", 0),
])
def test_set_rejects_bad_values(key, value):
    with pytest.raises(ConfigError):
        RunConfig().set(key, value)


def test_set_parses_strings():
    c = RunConfig()
    c.set("tracker.min_hits", "3")
    assert c.tracker_min_hits == 3
    c.set("synth.noisy_global_map", "true")
    assert c.synth_noisy_global_map is True
    with pytest.raises(ConfigError):
        c.set("tracker.min_hits", "three")


def test_comments_and_blank_lines(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("# comment\n\ndbscan.eps = 0.3  # trailing\n")
    assert read_config(path).dbscan_eps == 0.3


def test_write_read_round_trip(tmp_path):
    c = RunConfig()
    c.set("dbscan.eps", 0.25)
    c.set("tracker.max_age", 42)
    c.set("baseline.input", "dense")
    path = tmp_path / "rt.txt"
    write_config(c, path)
    assert read_config(path) == c


def test_cross_field_validation():
    c = RunConfig()
    c.set("sparsifier.elev_min_deg", 40.0)
    with pytest.raises(ConfigError):
        c.validate()


def test_derived_azimuth_resolution():
    c = RunConfig()
    # default: twice the mean per-pixel horizontal angle
    assert c.azimuth_res_deg() == pytest.approx(2 * 110.0 / 1280, rel=1e-3)
    c.set("sparsifier.azimuth_res_deg", 0.5)
    assert c.azimuth_res_deg() == 0.5
