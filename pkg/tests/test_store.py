import tempfile

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skymine import skygen, sphere, store
from skymine.errors import StoreIOError, ValidationError


def make_records(n, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    recs = np.zeros(n, dtype=store.DET_DTYPE)
    recs["det_id"] = np.arange(1, n + 1)
    recs["pass_id"] = rng.integers(0, 10, n)
    recs["mjd"] = 59000 + recs["pass_id"]
    recs["ra"] = rng.uniform(0, 360, n)
    recs["dec"] = np.degrees(np.arcsin(rng.uniform(-1, 1, n)))
    recs["flux"] = rng.uniform(10, 1000, n)
    recs["flux_err"] = rng.uniform(0.5, 5, n)
    recs["flags"] = rng.integers(0, 2, n)
    return recs


@pytest.fixture
def small_store(tmp_path):
    recs = make_records(500)
    store.ingest_detections(recs, 4, tmp_path)
    store.build_indexes(tmp_path, 1.0)
    return tmp_path, recs


class TestValidation:
    def test_zero_flux_err(self):
        recs = make_records(5)
        recs["flux_err"][3] = 0.0
        with pytest.raises(ValidationError, match="record 3"):
            store.validate_records(recs)

    def test_dec_out_of_range(self):
        recs = make_records(5)
        recs["dec"][1] = 90.5
        with pytest.raises(ValidationError, match="record 1"):
            store.validate_records(recs)

    def test_duplicate_det_id(self):
        recs = make_records(5)
        recs["det_id"][4] = recs["det_id"][2]
        with pytest.raises(ValidationError, match="duplicate det_id"):
            store.validate_records(recs)

    def test_nonfinite_position(self):
        recs = make_records(5)
        recs["ra"][0] = np.nan
        with pytest.raises(ValidationError, match="record 0"):
            store.validate_records(recs)

    def test_bad_partition_count(self, tmp_path):
        with pytest.raises(ValidationError):
            store.ingest_detections(make_records(5), 0, tmp_path)


class TestRoundTrip:
    def test_bit_identical_round_trip(self, tmp_path):
        recs = make_records(1000)
        store.ingest_detections(recs, 8, tmp_path)
        back = store.read_all(tmp_path, verify=True)
        assert len(back) == 1000
        # same multiset of records, compared bitwise after id sort
        a = np.sort(recs, order="det_id")
        b = np.sort(back, order="det_id")
        assert a.tobytes() == b.tobytes()

    def test_record_size_is_64(self):
        assert store.RECORD_SIZE == 64

    def test_partition_balance(self, tmp_path):
        manifest = store.ingest_detections(make_records(1002), 4, tmp_path)
        sizes = [p.records for p in manifest.partitions]
        assert sum(sizes) == 1002
        assert max(sizes) - min(sizes) <= 1

    def test_checksum_detects_corruption(self, small_store):
        path, _ = small_store
        target = path / "part-0002.det"
        data = bytearray(target.read_bytes())
        data[100] ^= 0xFF
        target.write_bytes(bytes(data))
        manifest = store.read_manifest(path)
        with pytest.raises(StoreIOError, match="checksum"):
            store.read_partition(path, manifest.partitions[2], verify=True)
        # unverified read still works (length is intact)
        store.read_partition(path, manifest.partitions[2])

    def test_truncation_detected_without_verify(self, small_store):
        path, _ = small_store
        target = path / "part-0001.det"
        target.write_bytes(target.read_bytes()[:-64])
        manifest = store.read_manifest(path)
        with pytest.raises(StoreIOError, match="expected"):
            store.read_partition(path, manifest.partitions[1])

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(StoreIOError, match="manifest"):
            store.read_manifest(tmp_path / "nowhere")

    def test_manifest_json_round_trip(self, small_store):
        path, _ = small_store
        m = store.read_manifest(path)
        again = store.StoreManifest.from_json(m.to_json())
        assert again == m

    @given(parts=st.integers(1, 16), n=st.integers(0, 50))
    @settings(max_examples=20, deadline=None)
    def test_any_partitioning_preserves_records(self, parts, n):
        with tempfile.TemporaryDirectory() as tmp:
            recs = make_records(n, seed=n)
            store.ingest_detections(recs, parts, tmp)
            back = store.read_all(tmp, verify=True)
            assert set(back["det_id"].tolist()) == set(recs["det_id"].tolist())


class TestIndexes:
    def test_zone_assignment(self, small_store):
        path, _ = small_store
        recs = store.read_all(path)
        assert np.all(recs["zone"] == sphere.zone_of(recs["dec"], 1.0))

    def test_equator_record_zone_90(self, tmp_path):
        recs = make_records(1)
        recs["dec"] = 0.25
        store.ingest_detections(recs, 1, tmp_path)
        store.build_indexes(tmp_path, 1.0)
        assert store.read_all(tmp_path)["zone"][0] == 90

    def test_zone_histogram_totals(self, small_store):
        path, recs = small_store
        manifest = store.read_manifest(path)
        total = sum(sum(p.zone_histogram.values()) for p in manifest.partitions)
        assert total == len(recs)
        assert manifest.zone_height_deg == 1.0
        assert manifest.index_overhead_fraction > 0

    def test_mjd_range(self, small_store):
        path, recs = small_store
        manifest = store.read_manifest(path)
        lo = min(p.mjd_min for p in manifest.partitions)
        hi = max(p.mjd_max for p in manifest.partitions)
        assert lo == recs["mjd"].min() and hi == recs["mjd"].max()

    def test_rejects_bad_zone_height(self, small_store):
        with pytest.raises(ValidationError):
            store.build_indexes(small_store[0], 0.0)


class TestPredicate:
    def test_literals(self):
        recs = make_records(10)
        assert store.Predicate("true").mask(recs).all()
        assert not store.Predicate("false").mask(recs).any()

    def test_single_clause_oracle(self):
        recs = make_records(300)
        mask = store.Predicate("flux>500").mask(recs)
        assert np.array_equal(mask, recs["flux"] > 500)

    def test_conjunction_oracle(self):
        recs = make_records(300)
        mask = store.Predicate("flux>=200 and pass_id<5 and flags==0").mask(recs)
        want = (recs["flux"] >= 200) & (recs["pass_id"] < 5) & (recs["flags"] == 0)
        assert np.array_equal(mask, want)

    def test_unknown_field(self):
        with pytest.raises(ValidationError, match="unknown field"):
            store.Predicate("magnitude>5")

    def test_garbage(self):
        with pytest.raises(ValidationError):
            store.Predicate("flux ~ 5")

    def test_bad_value(self):
        with pytest.raises(ValidationError):
            store.Predicate("flux>banana")


class TestScan:
    def test_worker_counts_agree(self, small_store):
        path, _ = small_store
        base, _ = store.scan(path, "flux>300")
        for w in (2, 4, 8):
            out, stats = store.scan(path, "flux>300", workers=w)
            assert out.tobytes() == base.tobytes()
            assert stats.workers == w

    def test_scan_reads_everything(self, small_store):
        path, recs = small_store
        out, stats = store.scan(path, "true")
        assert stats.records_scanned == len(recs)
        assert stats.bytes_read == len(recs) * store.RECORD_SIZE
        assert stats.records_matched == len(recs)
        assert len(out) == len(recs)

    def test_region_scan_matches_brute_force(self, small_store):
        path, recs = small_store
        cone = sphere.cone_from_radec(100.0, 30.0, 20.0)
        out, _ = store.scan(path, "true", region=cone)
        unit = sphere.radec_to_unit(recs["ra"], recs["dec"])
        want = set(recs["det_id"][cone.contains(unit)].tolist())
        assert set(out["det_id"].tolist()) == want
        assert len(want) > 0

    def test_region_plus_predicate(self, small_store):
        path, recs = small_store
        cone = sphere.cone_from_radec(200.0, -10.0, 40.0)
        out, _ = store.scan(path, "flux<400", region=cone, workers=2)
        unit = sphere.radec_to_unit(recs["ra"], recs["dec"])
        want = set(recs["det_id"][cone.contains(unit) & (recs["flux"] < 400)].tolist())
        assert set(out["det_id"].tolist()) == want

    def test_rejects_zero_workers(self, small_store):
        with pytest.raises(ValidationError):
            store.scan(small_store[0], "true", workers=0)

    def test_output_order_deterministic(self, small_store):
        path, _ = small_store
        a, _ = store.scan(path, "pass_id<=3", workers=4)
        b, _ = store.scan(path, "pass_id<=3", workers=4)
        assert a.tobytes() == b.tobytes()


class TestMaster:
    def test_static_objects_collapse_exactly(self, tmp_path):
        cfg = skygen.SurveyConfig(n_objects=200, passes=10, seed=5,
                                  position_noise_arcsec=0.1)
        truth, det, labels, _ = skygen.write_survey(cfg, tmp_path)
        store.build_indexes(tmp_path, 1.0)
        masters, assignment = store.build_master(tmp_path, 1.0)
        assert len(masters) == 200
        assert np.all(masters["n_detections"] == 10)
        # every master groups detections of exactly one truth object
        recs = store.read_all(tmp_path)
        table = skygen.read_labels(tmp_path)
        for mid in masters["master_id"]:
            tids = {table[int(d)] for d in recs["det_id"][recs["master_id"] == mid]}
            assert len(tids) == 1

    def test_master_positions_near_truth(self, tmp_path):
        cfg = skygen.SurveyConfig(n_objects=100, passes=20, seed=6,
                                  position_noise_arcsec=0.2)
        truth, _, _, _ = skygen.write_survey(cfg, tmp_path)
        masters, _ = store.build_master(tmp_path, 2.0)
        t_unit = sphere.radec_to_unit(truth["ra"], truth["dec"])
        m_unit = sphere.radec_to_unit(masters["ra"], masters["dec"])
        idx = sphere.SpatialIndex(np.arange(len(truth)), t_unit)
        for v in m_unit:
            row, _ = idx.nearest(v)
            # averaged position beats single-epoch noise
            assert float(sphere.angle_between(v, t_unit[row])) < np.radians(0.2 / 3600)

    def test_flux_statistics(self, tmp_path):
        recs = make_records(1)
        recs = np.concatenate([recs] * 4)
        recs["det_id"] = [1, 2, 3, 4]
        recs["mjd"] = [59000.0, 59001.0, 59002.0, 59003.0]
        recs["pass_id"] = [0, 1, 2, 3]
        recs["flux"] = [10.0, 20.0, 30.0, 40.0]
        store.ingest_detections(recs, 2, tmp_path)
        masters, _ = store.build_master(tmp_path, 1.0)
        assert len(masters) == 1
        m = masters[0]
        assert m["mean_flux"] == pytest.approx(25.0)
        assert m["flux_variance"] == pytest.approx(125.0)
        assert (m["first_mjd"], m["last_mjd"]) == (59000.0, 59003.0)

    def test_distinct_objects_stay_separate(self, tmp_path):
        recs = make_records(2)
        recs["ra"] = [10.0, 10.1]
        recs["dec"] = [0.0, 0.0]
        store.ingest_detections(recs, 1, tmp_path)
        masters, _ = store.build_master(tmp_path, 1.0)
        assert len(masters) == 2

    def test_masters_csv_round_trip(self, tmp_path):
        store.ingest_detections(make_records(50), 2, tmp_path)
        masters, _ = store.build_master(tmp_path, 1.0)
        back = store.read_masters(tmp_path)
        assert np.array_equal(back["master_id"], masters["master_id"])
        assert np.allclose(back["mean_flux"], masters["mean_flux"], atol=1e-6)

    def test_rejects_bad_radius(self, small_store):
        with pytest.raises(ValidationError):
            store.build_master(small_store[0], 0.0)

    def test_missing_masters_table(self, small_store):
        with pytest.raises(StoreIOError, match="master"):
            store.read_masters(small_store[0])
