use modelavg::data::{
    self, parse_libsvm, partition_even, partition_shuffled, to_least_squares, ParseErrorKind,
    SparseDataset, SparseRow,
};
use modelavg::core::Objective;
use proptest::prelude::*;

const FIXTURE: &str = include_str!("fixtures/sample.libsvm");

#[test]
fn parses_a_sparse_row() {
    let ds = parse_libsvm("1 3:4.5 7:-2\n").unwrap();
    assert_eq!(ds.row_count(), 1);
    assert_eq!(ds.max_feature_index(), 7);
    assert_eq!(
        ds.rows()[0],
        SparseRow {
            label: 1.0,
            features: vec![(3, 4.5), (7, -2.0)]
        }
    );
}

#[test]
fn label_without_features_is_an_empty_row() {
    let ds = parse_libsvm("-1\n").unwrap();
    assert_eq!(ds.rows()[0].label, -1.0);
    assert!(ds.rows()[0].features.is_empty());
}

#[test]
fn unsorted_indices_are_rejected_with_line() {
    let e = parse_libsvm("1 5:1 3:2").unwrap_err();
    assert_eq!(e.kind, ParseErrorKind::NonIncreasingIndex);
    assert_eq!(e.line, 1);
    assert!(e.to_string().contains("non-increasing feature index"), "{e}");
}

#[test]
fn fixture_round_trips_byte_identically() {
    let ds = parse_libsvm(FIXTURE).unwrap();
    assert_eq!(ds.row_count(), 20);
    assert_eq!(ds.max_feature_index(), 10);
    assert_eq!(ds.to_libsvm(), FIXTURE);
    assert_eq!(parse_libsvm(&ds.to_libsvm()).unwrap(), ds);
}

#[test]
fn comments_and_blank_lines_are_skipped() {
    let text = "# header\n\n1 1:2 # trailing\n   \n-1 2:3\n";
    let ds = parse_libsvm(text).unwrap();
    assert_eq!(ds.row_count(), 2);
    assert_eq!(ds.to_libsvm(), "1 1:2\n-1 2:3\n");
}

#[test]
fn error_kinds_and_positions() {
    let cases: [(&str, ParseErrorKind, usize, usize); 7] = [
        ("1 1:2\n1 2\n", ParseErrorKind::MalformedToken, 2, 3),
        ("1 1:2:3\n", ParseErrorKind::MalformedToken, 1, 3),
        ("1 x:2\n", ParseErrorKind::MalformedToken, 1, 3),
        ("1 1:1\n\n1 0:1\n", ParseErrorKind::IndexBelowOne, 3, 3),
        ("1 -4:1\n", ParseErrorKind::IndexBelowOne, 1, 3),
        ("yes 1:1\n", ParseErrorKind::NonNumericValue, 1, 1),
        ("1 1:1\n1 2:1 2:5\n", ParseErrorKind::NonIncreasingIndex, 2, 7),
    ];
    for (text, kind, line, column) in cases {
        let e = parse_libsvm(text).unwrap_err();
        assert_eq!((e.kind, e.line, e.column), (kind, line, column), "{text:?}");
    }
    let e = parse_libsvm("1 12:abc\n").unwrap_err();
    assert_eq!((e.kind, e.line, e.column), (ParseErrorKind::NonNumericValue, 1, 6));
}

#[test]
fn empty_input_is_an_empty_dataset_error() {
    for text in ["", "\n\n", "# only a comment\n"] {
        assert_eq!(parse_libsvm(text).unwrap_err().kind, ParseErrorKind::EmptyDataset);
    }
}

#[test]
fn partition_sizes() {
    let rows = |n: usize| {
        SparseDataset::new(
            (0..n)
                .map(|i| SparseRow {
                    label: i as f64,
                    features: vec![],
                })
                .collect(),
            1,
        )
        .unwrap()
    };
    assert_eq!(partition_even(&rows(62), 2).unwrap().sizes(), vec![31, 31]);
    assert_eq!(partition_even(&rows(5), 2).unwrap().sizes(), vec![3, 2]);
    assert_eq!(partition_even(&rows(4), 4).unwrap().sizes(), vec![1, 1, 1, 1]);
    assert_eq!(
        partition_even(&rows(5), 2).unwrap().assignments,
        vec![vec![0, 1, 2], vec![3, 4]]
    );
    assert!(partition_even(&rows(3), 4).is_err());
    assert!(partition_even(&rows(3), 0).is_err());
}

#[test]
fn single_row_least_squares() {
    let ds = parse_libsvm("1 1:2\n").unwrap();
    let part = partition_even(&ds, 1).unwrap();
    let ls = to_least_squares(&ds, &part, 0, 1, 2).unwrap();
    assert_eq!(ls.dimension(), 2);
    assert!((ls.value(&[0.0, 0.0]) - 0.5).abs() < 1e-15);
    assert_eq!(ls.value(&[0.5, 0.0]), 0.0);
    assert!(to_least_squares(&ds, &part, 1, 1, 2).is_err());
    let wide = parse_libsvm("1 3:1\n").unwrap();
    assert!(to_least_squares(&wide, &partition_even(&wide, 1).unwrap(), 0, 1, 2).is_err());
}

#[test]
fn planted_point_has_zero_loss_on_every_node() {
    let syn = data::synthetic_regression(20, 40, 3);
    for nodes in [1, 2, 3, 7] {
        let part = partition_even(&syn.dataset, nodes).unwrap();
        for i in 0..nodes {
            let ls = to_least_squares(&syn.dataset, &part, i, 1, 40).unwrap();
            assert!(ls.value(&syn.planted) < 1e-24, "node {i} of {nodes}");
        }
    }
}

fn sparse_row() -> impl Strategy<Value = SparseRow> {
    (
        prop::num::f64::NORMAL | prop::num::f64::ZERO,
        prop::collection::btree_map(1usize..500, prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL, 0..8),
    )
        .prop_map(|(label, map)| SparseRow {
            label,
            features: map.into_iter().collect(),
        })
}

proptest! {
    #[test]
    fn serialized_datasets_parse_back(rows in prop::collection::vec(sparse_row(), 1..20)) {
        let dim = rows.iter().filter_map(|r| r.features.last()).map(|f| f.0).max().unwrap_or(0);
        let ds = SparseDataset::new(rows, dim).unwrap();
        let text = ds.to_libsvm();
        let back = parse_libsvm(&text).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(back.to_libsvm(), text);
    }

    #[test]
    fn partitions_are_disjoint_covers(n in 1usize..300, m_seed in any::<usize>(), seed in any::<u64>()) {
        let m = 1 + m_seed % n;
        let ds = SparseDataset::new(
            (0..n).map(|i| SparseRow { label: i as f64, features: vec![] }).collect(),
            1,
        ).unwrap();
        for part in [partition_even(&ds, m).unwrap(), partition_shuffled(&ds, m, seed).unwrap()] {
            let mut all: Vec<usize> = part.assignments.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes = part.sizes();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
            prop_assert!(*lo >= 1);
        }
    }
}
