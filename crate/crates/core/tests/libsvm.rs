use std::path::PathBuf;

use accsonata::datagen::{load_libsvm, LibsvmOptions};
use accsonata::problems::{estimate_constants, LossKind};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/fixture_200.svm")
}

fn opts(m: usize, limit: Option<usize>, seed: u64) -> LibsvmOptions {
    LibsvmOptions { m, limit, seed, loss: LossKind::Logistic, lambda: 0.01 }
}

#[test]
fn shards_are_equal_and_remainder_dropped() {
    let p = load_libsvm(&fixture(), &opts(7, None, 0)).unwrap();
    assert_eq!(p.agents(), 7);
    assert_eq!(p.samples_per_agent(), 200 / 7);
    assert_eq!(p.dim(), 6);
    for i in 0..7 {
        let a = p.agent_data(i);
        assert_eq!(a.features.nrows(), 28);
        assert!(a.labels.iter().all(|&y| y == 1.0 || y == -1.0));
    }
}

#[test]
fn limit_truncates_before_sharding() {
    let p = load_libsvm(&fixture(), &opts(4, Some(40), 0)).unwrap();
    assert_eq!(p.samples_per_agent(), 10);
    let err = load_libsvm(&fixture(), &opts(4, Some(3), 0)).unwrap_err();
    assert!(err.to_string().contains('3'), "{err}");
}

#[test]
fn shuffle_is_seeded() {
    let a = load_libsvm(&fixture(), &opts(5, None, 9)).unwrap();
    let b = load_libsvm(&fixture(), &opts(5, None, 9)).unwrap();
    let c = load_libsvm(&fixture(), &opts(5, None, 10)).unwrap();
    for i in 0..5 {
        assert_eq!(a.agent_data(i), b.agent_data(i));
    }
    assert!((0..5).any(|i| a.agent_data(i) != c.agent_data(i)));
}

#[test]
fn constants_are_ordered() {
    let p = load_libsvm(&fixture(), &opts(4, None, 0)).unwrap();
    let c = estimate_constants(&p).unwrap();
    assert!(c.mu > 0.0 && c.mu <= c.l && c.l <= c.l_max + 1e-12);
    assert!(c.beta > 0.0);
}
