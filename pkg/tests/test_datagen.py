import numpy as np
import pytest
from scipy.stats import ks_2samp

from zonewatch import datagen
from zonewatch.errors import InsufficientDataError, ValidationError
from zonewatch.rng import Rng

PROFILE = datagen.default_benign_profile()


def test_feature_groups_partition_115():
    all_idx = np.concatenate(list(datagen.FEATURE_GROUPS.values()))
    assert sorted(all_idx.tolist()) == list(range(115))
    assert set(datagen.FEATURE_GROUPS) == {
        "packet_rate", "packet_size", "inter_arrival", "conn_count"}


class TestGenBenign:
    def test_sample_means_match_profile(self):
        # per-feature sample mean within 3 standard errors of the mixture mean
        ds = datagen.gen_benign(PROFILE, 10_000, seed=1)
        se = ds.X.std(axis=0, ddof=1) / np.sqrt(len(ds))
        deviation = np.abs(ds.X.mean(axis=0) - PROFILE.mean)
        assert np.mean(deviation <= 3 * se) > 0.97  # allow a few 3-sigma tails

    def test_same_seed_identical(self):
        a = datagen.gen_benign(PROFILE, 100, seed=2)
        b = datagen.gen_benign(PROFILE, 100, seed=2)
        assert np.array_equal(a.X, b.X)

    def test_all_finite(self):
        ds = datagen.gen_benign(PROFILE, 5000, seed=3)
        assert np.all(np.isfinite(ds.X))
        assert np.all(ds.labels == 0)

    def test_n_validation(self):
        with pytest.raises(ValidationError):
            datagen.gen_benign(PROFILE, 0, seed=1)

    def test_drift_shifts_later_rows(self):
        drifting = datagen.BenignProfile(PROFILE.components,
                                         amplitude_sigma=PROFILE.amplitude_sigma,
                                         drift_rate=0.5)
        ds = datagen.gen_benign(drifting, 2000, seed=4)
        assert ds.X[-200:].mean() > ds.X[:200].mean() + 100


class TestGenAttack:
    def test_inflated_groups_scale_means(self):
        attack = datagen.default_attack_profile("mirai-flood")
        ds = datagen.gen_attack(attack, PROFILE, 10_000, seed=5)
        benign_mean = PROFILE.mean
        for group, factor in attack.inflation.items():
            idx = datagen.FEATURE_GROUPS[group]
            ratio = ds.X[:, idx].mean(axis=0) / benign_mean[idx]
            assert np.all(ratio >= factor * 0.9)

    def test_untouched_groups_indistinguishable(self):
        attack = datagen.default_attack_profile("mirai-flood")
        atk = datagen.gen_attack(attack, PROFILE, 4000, seed=6)
        ben = datagen.gen_benign(PROFILE, 4000, seed=7)
        # two-sample KS critical value at alpha=0.01
        critical = 1.628 * np.sqrt(2 / 4000)
        untouched = set(datagen.FEATURE_GROUPS) - attack.affected_groups
        for group in untouched:
            for col in datagen.FEATURE_GROUPS[group][:6]:
                stat = ks_2samp(atk.X[:, col], ben.X[:, col]).statistic
                assert stat < critical

    def test_scan_and_flood_differ_in_groups(self):
        flood = datagen.default_attack_profile("mirai-flood")
        scan = datagen.default_attack_profile("mirai-scan")
        assert flood.affected_groups != scan.affected_groups
        assert "packet_rate" in flood.inflation
        assert "conn_count" in scan.inflation and scan.jitter

    def test_labels_malicious(self):
        attack = datagen.default_attack_profile("mirai-scan")
        ds = datagen.gen_attack(attack, PROFILE, 10, seed=8)
        assert np.all(ds.labels == 1)

    def test_unknown_attack_name(self):
        with pytest.raises(ValidationError, match="mirai-flood"):
            datagen.default_attack_profile("teardrop")


class TestSampler:
    def test_matches_distribution_shape(self):
        sampler = datagen.TrafficSampler(PROFILE, Rng(9))
        rows = np.stack([sampler.draw() for _ in range(500)])
        assert rows.shape == (500, 115)
        assert np.all(np.isfinite(rows))

    def test_attack_switch(self):
        sampler = datagen.TrafficSampler(PROFILE, Rng(10))
        benign_rows = np.stack([sampler.draw() for _ in range(50)])
        sampler.set_attack(datagen.default_attack_profile("mirai-flood"))
        attack_rows = np.stack([sampler.draw() for _ in range(50)])
        idx = datagen.FEATURE_GROUPS["packet_rate"]
        assert attack_rows[:, idx].mean() > 5 * benign_rows[:, idx].mean()


class TestCsv:
    def test_roundtrip_exact(self, tmp_path):
        ds = datagen.gen_benign(PROFILE, 20, seed=11)
        path = tmp_path / "data.csv"
        datagen.save_csv(path, ds)
        loaded = datagen.load_csv(path)
        assert np.array_equal(loaded.X, ds.X)
        assert np.array_equal(loaded.labels, ds.labels)
        assert loaded.device_ids == ds.device_ids

    def test_two_row_file(self, tmp_path):
        path = tmp_path / "two.csv"
        header = ",".join(f"f{i}" for i in range(115))
        row = ",".join(["1.5"] * 115)
        row2 = ",".join(["2.5"] * 115)
        path.write_text(f"{header}\n{row}\n{row2}\n")
        ds = datagen.load_csv(path)
        assert len(ds) == 2
        assert ds.X[0, 0] == 1.5 and ds.X[1, 114] == 2.5
        assert np.all(ds.labels == 0)  # no label column -> benign

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "narrow.csv"
        header = ",".join(f"f{i}" for i in range(114))
        path.write_text(header + "\n" + ",".join(["1"] * 114) + "\n")
        with pytest.raises(ValidationError, match="expected 115"):
            datagen.load_csv(path)

    def test_label_column_parsed(self, tmp_path):
        ds = datagen.gen_attack(datagen.default_attack_profile("mirai-flood"),
                                PROFILE, 5, seed=12)
        path = tmp_path / "attack.csv"
        datagen.save_csv(path, ds)
        loaded = datagen.load_csv(path)
        assert np.all(loaded.labels == 1)

    def test_non_numeric_cell_names_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        header = ",".join(f"f{i}" for i in range(115))
        good = ",".join(["1"] * 115)
        bad = ",".join(["1"] * 60 + ["oops"] + ["1"] * 54)
        path.write_text(f"{header}\n{good}\n{bad}\n")
        with pytest.raises(ValidationError, match=r"row 2.*f60.*oops"):
            datagen.load_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValidationError, match="header"):
            datagen.load_csv(path)


class TestSplit:
    def test_floor_rule_99_rows(self):
        ds = datagen.gen_benign(PROFILE, 99, seed=13)
        t, o = datagen.split(ds, 2.0 / 3.0, seed=1)
        assert (len(t), len(o)) == (66, 33)

    def test_same_seed_same_split(self):
        ds = datagen.gen_benign(PROFILE, 50, seed=14)
        t1, _ = datagen.split(ds, 0.5, seed=2)
        t2, _ = datagen.split(ds, 0.5, seed=2)
        assert np.array_equal(t1.X, t2.X)

    def test_union_is_permutation(self):
        ds = datagen.gen_benign(PROFILE, 40, seed=15)
        t, o = datagen.split(ds, 0.7, seed=3)
        combined = np.vstack([t.X, o.X])
        key = lambda X: sorted(map(tuple, X.round(9)))
        assert key(combined) == key(ds.X)

    def test_ratio_validation(self):
        ds = datagen.gen_benign(PROFILE, 10, seed=16)
        with pytest.raises(ValidationError):
            datagen.split(ds, 0.0, seed=1)
        with pytest.raises(ValidationError):
            datagen.split(ds, 1.0, seed=1)


class TestProfileConfig:
    def test_roundtrip(self, tmp_path):
        config = datagen.default_profile_config()
        path = tmp_path / "profile.json"
        datagen.save_profile_config(path, config)
        benign, attacks = datagen.profile_from_config(
            datagen.load_profile_config(path))
        assert benign.amplitude_sigma == PROFILE.amplitude_sigma
        assert len(benign.components) == len(PROFILE.components)
        assert np.array_equal(benign.components[0].means,
                              PROFILE.components[0].means)
        assert set(attacks) == set(datagen.ATTACK_NAMES)

    def test_weights_must_sum_to_one(self):
        c = PROFILE.components[1]  # weight 0.3; doubled sums to 0.6
        with pytest.raises(ValidationError):
            datagen.BenignProfile((c, c))

    def test_unknown_group_rejected(self):
        with pytest.raises(ValidationError):
            datagen.AttackProfile("x", inflation={"bogus": 2.0})

    def test_attack_must_inflate(self):
        with pytest.raises(ValidationError):
            datagen.AttackProfile("x", inflation={"conn_count": 0.5})

    def test_malformed_config(self):
        with pytest.raises(ValidationError):
            datagen.profile_from_config({"benign": {}})
