"""Ingestion, basket construction, price binning and split tests."""

import numpy as np
import pytest

from bdhh import dataio
from bdhh.errors import EmptyInput, MalformedRow, MissingFile, SchemaMismatch
from conftest import planted_records, write_generic_csv

REC = dataio.TransactionRecord


class TestLoadTransactions:
    def test_three_row_synthetic_csv(self, tmp_path):
        path = write_generic_csv(
            tmp_path / "t.csv",
            [
                ("u1", 1, "", "a", 1.5, "food"),
                ("u1", 2, "", "b", 2.0, "food"),
                ("u2", 1, "", "a", 1.5, "food"),
            ],
        )
        records = dataio.load_transactions(path, fmt="generic")
        assert len(records) == 3
        assert records[0] == REC("u1", 1, "a", 1.5, "food", None)
        assert records[2].user_id == "u2"

    def test_empty_file_is_schema_mismatch(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(SchemaMismatch):
            dataio.load_transactions(path, fmt="generic")

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFile):
            dataio.load_transactions(tmp_path / "nope.csv")

    def test_missing_column_is_schema_mismatch(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("user_id,day,item_id\nu1,1,a\n")
        with pytest.raises(SchemaMismatch):
            dataio.load_transactions(path, fmt="generic")

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = write_generic_csv(
            tmp_path / "t.csv",
            [("u1", 1, "", "a", 1.0, "food"), ("u1", "bad-day", "", "a", 1.0, "food")],
        )
        with pytest.raises(MalformedRow) as err:
            dataio.load_transactions(path, fmt="generic")
        assert err.value.line_number == 3

    def test_negative_price_rejected(self, tmp_path):
        path = write_generic_csv(tmp_path / "t.csv", [("u1", 1, "", "a", -1.0, "food")])
        with pytest.raises(MalformedRow):
            dataio.load_transactions(path, fmt="generic")

    def test_missing_price_rows_are_dropped(self, tmp_path):
        path = write_generic_csv(
            tmp_path / "t.csv",
            [("u1", 1, "", "a", "", "food"), ("u1", 2, "", "a", 1.0, "food")],
        )
        records = dataio.load_transactions(path, fmt="generic")
        assert len(records) == 1 and records[0].day == 2

    def test_dunnhumby_schema_with_product_table(self, tmp_path):
        trans = tmp_path / "transactions.csv"
        trans.write_text(
            "household_key,BASKET_ID,DAY,PRODUCT_ID,SALES_VALUE\n"
            "h1,b1,1,p1,3.5\nh1,b1,1,p2,1.0\nh1,b2,4,p1,3.5\n"
        )
        products = tmp_path / "product.csv"
        products.write_text("PRODUCT_ID,COMMODITY_DESC\np1,SOFT DRINKS\np2,SNACKS\n")
        records = dataio.load_transactions(trans, fmt="dunnhumby", products_path=products)
        assert len(records) == 3
        assert records[0].category == "SOFT DRINKS"
        assert records[0].basket_key == "b1"

    def test_valuedshopper_dates_become_day_indices(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(
            "id,date,product_id,purchaseamount,category\n"
            "c1,2013-03-01,p1,2.49,snacks\nc1,2013-03-04,p1,2.49,snacks\n"
        )
        records = dataio.load_transactions(path, fmt="valuedshopper")
        assert records[1].day - records[0].day == 3


class TestBuildBaskets:
    def test_same_user_same_day_is_one_basket(self):
        records = [REC("u1", 5, "a", 1.0, "x"), REC("u1", 5, "b", 2.0, "x"),
                   REC("u1", 6, "a", 1.0, "x")]
        sequences, _ = dataio.build_baskets(records, grouping="day")
        assert len(sequences) == 1
        assert len(sequences[0].baskets[0].items) == 2

    def test_single_record_user_dropped(self):
        sequences, _ = dataio.build_baskets(
            [REC("u1", 5, "a", 1.0, "x"), REC("u2", 1, "b", 1.0, "x"), REC("u2", 2, "b", 1.0, "x")],
            grouping="day",
        )
        assert [s.user_id for s in sequences] == ["u2"]

    def test_baskets_sorted_by_day(self):
        records = [REC("u1", d, "a", 1.0, "x") for d in (3, 1, 7)]
        sequences, _ = dataio.build_baskets(records, grouping="day")
        assert [b.day for b in sequences[0].baskets] == [1, 3, 7]

    def test_duplicates_inside_basket_removed(self):
        records = [REC("u1", 1, "a", 1.0, "x"), REC("u1", 1, "a", 1.0, "x"),
                   REC("u1", 2, "a", 1.0, "x")]
        sequences, _ = dataio.build_baskets(records, grouping="day")
        assert len(sequences[0].baskets[0].items) == 1

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            dataio.build_baskets([], grouping="day")

    def test_record_order_invariance(self, rng):
        records = [
            REC(f"u{u}", int(d), f"i{i}", float(p), "x")
            for u, d, i, p in rng.integers(0, 5, size=(40, 4))
        ]
        shuffled = list(records)
        rng.shuffle(shuffled)
        a, _ = dataio.build_baskets(records, grouping="day")
        b, _ = dataio.build_baskets(shuffled, grouping="day")
        assert a == b

    def test_basket_grouping_splits_same_day_trips(self):
        records = [
            REC("u1", 1, "a", 1.0, "x", basket_key="t1"),
            REC("u1", 1, "b", 1.0, "x", basket_key="t2"),
        ]
        sequences, _ = dataio.build_baskets(records, grouping="basket")
        assert len(sequences[0].baskets) == 2


class TestDiscretizePrices:
    def test_twenty_items_ten_bins(self):
        records = [REC("u", 1, f"i{p:02d}", float(p), "cat") for p in range(1, 21)]
        levels = dataio.discretize_prices(records, n_levels=10)
        for p in range(1, 21):
            assert levels[f"i{p:02d}"] == (p - 1) // 2

    def test_single_shared_price(self):
        records = [REC("u", 1, f"i{k}", 4.0, "cat") for k in range(20)]
        levels = dataio.discretize_prices(records, n_levels=10)
        assert set(levels.values()) == {0}

    def test_level_count_never_exceeds_n_levels(self, rng):
        for _ in range(200):
            n_items = int(rng.integers(1, 30))
            n_levels = int(rng.integers(1, 12))
            records = [
                REC("u", 1, f"i{k}", float(rng.integers(1, 15)), f"c{int(rng.integers(0, 3))}")
                for k in range(n_items)
            ]
            levels = dataio.discretize_prices(records, n_levels=n_levels)
            assert all(0 <= lv < n_levels for lv in levels.values())

    def test_equal_frequency_bin_sizes(self, rng):
        # Distinct prices spread over bins in floor/ceil(n/k) group sizes.
        for _ in range(200):
            n = int(rng.integers(1, 40))
            k = int(rng.integers(1, 12))
            prices = rng.permutation(np.arange(1, n + 1)).astype(float)
            records = [REC("u", 1, f"i{j:03d}", float(p), "cat") for j, p in enumerate(prices)]
            levels = dataio.discretize_prices(records, n_levels=k)
            counts = {}
            for level in levels.values():
                counts[level] = counts.get(level, 0) + 1
            if n >= k:
                assert set(counts.values()) <= {n // k, -(-n // k)}
            # Monotone: a costlier item never has a lower level.
            by_price = sorted((records[j].price, levels[f"i{j:03d}"]) for j in range(n))
            assert all(b[1] >= a[1] for a, b in zip(by_price, by_price[1:]))

    def test_median_is_representative(self):
        records = [REC("u", 1, "a", 1.0, "c"), REC("u", 2, "a", 100.0, "c"),
                   REC("u", 3, "a", 1.5, "c"), REC("u", 1, "b", 50.0, "c"),
                   REC("u", 1, "e", 0.5, "c")]
        # medians: a -> 1.5, b -> 50, e -> 0.5; 3 distinct in 3 bins
        levels = dataio.discretize_prices(records, n_levels=3)
        assert levels["e"] < levels["a"] < levels["b"]

    def test_binning_is_per_category(self):
        records = [REC("u", 1, "cheap_x", 1.0, "x"), REC("u", 1, "dear_x", 9.0, "x"),
                   REC("u", 1, "cheap_y", 100.0, "y"), REC("u", 1, "dear_y", 900.0, "y")]
        levels = dataio.discretize_prices(records, n_levels=2)
        assert levels["cheap_x"] == levels["cheap_y"] == 0
        assert levels["dear_x"] == levels["dear_y"] == 1

    def test_vocab_price_size_is_configured_count(self):
        records = [REC("u", 1, "a", 1.0, "c"), REC("u", 2, "a", 1.0, "c")]
        vocab = dataio.build_vocabulary(records, n_levels=10)
        assert vocab.m_p == 10
        assert set(vocab.price_index) == set(range(10))


class TestSplitDataset:
    def test_three_basket_user(self, tiny_vocab):
        from conftest import make_sequence

        seq = make_sequence(tiny_vocab, 0, [[0], [1], [2]])
        split = dataio.split_dataset([seq])
        assert len(split.train_samples) == 0
        assert len(split.val_samples) == 1
        assert len(split.test_samples) == 1
        assert split.val_samples[0].target.seq_index == 1
        assert split.test_samples[0].target.seq_index == 2
        assert len(split.test_samples[0].inputs) == 2

    def test_two_basket_user_is_test_only(self, tiny_vocab):
        from conftest import make_sequence

        split = dataio.split_dataset([make_sequence(tiny_vocab, 0, [[0], [1]])])
        assert (len(split.train_samples), len(split.val_samples), len(split.test_samples)) == (0, 0, 1)

    def test_counts_for_lengths_2_3_4(self, tiny_vocab):
        from conftest import make_sequence

        seqs = [
            make_sequence(tiny_vocab, 0, [[0], [1]]),
            make_sequence(tiny_vocab, 1, [[0], [1], [2]]),
            make_sequence(tiny_vocab, 2, [[0], [1], [2], [3]]),
        ]
        split = dataio.split_dataset(seqs)
        assert len(split.test_samples) == 3
        assert len(split.val_samples) == 2
        assert len(split.train_samples) == 1

    def test_no_target_leaks_into_its_prefix(self, tiny_vocab, rng):
        from conftest import random_sequences

        for _ in range(50):
            seqs = random_sequences(rng, tiny_vocab)
            split = dataio.split_dataset(seqs)
            for sample in split.train_samples + split.val_samples + split.test_samples:
                assert all(b.seq_index < sample.target.seq_index for b in sample.inputs)

    def test_training_baskets_exclude_val_and_test_targets(self, tiny_vocab, rng):
        from conftest import random_sequences

        for _ in range(50):
            seqs = random_sequences(rng, tiny_vocab)
            split = dataio.split_dataset(seqs)
            held_out = {(s.target.user, s.target.seq_index)
                        for s in split.val_samples + split.test_samples}
            graph_pool = {(b.user, b.seq_index) for b in dataio.training_baskets(seqs)}
            assert not graph_pool & held_out
            all_baskets = {(b.user, b.seq_index) for s in seqs for b in s.baskets}
            assert graph_pool == all_baskets - held_out


class TestPreprocessAndRoundTrip:
    def test_round_trip_is_byte_identical(self, tmp_path):
        records = planted_records(n_users=4, n_items=10, set_size=3, n_baskets=4)
        dataset = dataio.preprocess(records, tag="toy")
        p1, p2 = tmp_path / "d1.jsonl", tmp_path / "d2.jsonl"
        dataio.save_dataset(dataset, p1)
        dataio.save_dataset(dataio.load_dataset(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_pipeline_deterministic_under_row_shuffle(self, tmp_path, rng):
        records = planted_records(n_users=4, n_items=10, set_size=3, n_baskets=4)
        shuffled = list(records)
        rng.shuffle(shuffled)
        d1 = dataio.preprocess(records, tag="toy")
        d2 = dataio.preprocess(shuffled, tag="toy")
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        dataio.save_dataset(d1, p1)
        dataio.save_dataset(d2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_min_item_support_filter(self):
        records = [REC("u1", d, "rare", 1.0, "c") for d in (1, 2)] + [
            REC("u1", d, "common", 1.0, "c") for d in (1, 2, 3)
        ] + [REC("u2", d, "common", 1.0, "c") for d in (1, 2)]
        dataset = dataio.preprocess(records, min_item_support=3)
        assert dataset.vocab.item_ids == ["common"]

    def test_max_baskets_per_user_keeps_most_recent(self):
        records = [REC("u1", d, f"i{d}", 1.0, "c") for d in range(6)]
        dataset = dataio.preprocess(records, max_baskets_per_user=3)
        days = [b.day for b in dataset.sequences[0].baskets]
        assert days == [3, 4, 5]

    def test_user_sampling_is_deterministic(self):
        records = planted_records(n_users=8, n_items=12, set_size=2, n_baskets=3)
        d1 = dataio.preprocess(records, user_sample=4, seed=3)
        d2 = dataio.preprocess(records, user_sample=4, seed=3)
        assert [s.user_id for s in d1.sequences] == [s.user_id for s in d2.sequences]
        assert len(d1.sequences) == 4

    def test_corrupt_dataset_files_rejected(self, tmp_path):
        from bdhh.errors import ArtifactError

        path = tmp_path / "bad.jsonl"
        path.write_text('{"format":"something-else","version":1}\n')
        with pytest.raises(ArtifactError):
            dataio.load_dataset(path)
        path.write_text(
            '{"format":"bdhh-dataset","n_levels":10,"version":99}\n'
        )
        with pytest.raises(ArtifactError):
            dataio.load_dataset(path)
        with pytest.raises(MissingFile):
            dataio.load_dataset(tmp_path / "absent.jsonl")

    def test_basket_grouping_without_keys_falls_back_to_day(self):
        # generic records without basket ids: grouping="basket" degrades to day
        records = [REC("u1", 1, "a", 1.0, "x"), REC("u1", 1, "b", 1.0, "x"),
                   REC("u1", 2, "a", 1.0, "x")]
        sequences, _ = dataio.build_baskets(records, grouping="basket")
        assert [len(b.items) for b in sequences[0].baskets] == [2, 1]

    def test_loaded_split_matches_original(self, tmp_path):
        records = planted_records(n_users=3, n_items=8, set_size=2, n_baskets=5)
        dataset = dataio.preprocess(records, tag="toy")
        path = tmp_path / "d.jsonl"
        dataio.save_dataset(dataset, path)
        loaded = dataio.load_dataset(path)
        s1, s2 = dataset.split(), loaded.split()
        assert len(s1.train_samples) == len(s2.train_samples)
        assert s1.test_samples[0].target.items == s2.test_samples[0].target.items
