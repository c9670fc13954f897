mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use sharpjet_core::bundle::{read_bundle, write_bundle, BUNDLE_FILE, GRID_FILE};
use sharpjet_core::geometry::DEFAULT_RANK_TOL;
use sharpjet_core::jet::compute_y;
use sharpjet_core::pipeline::{extend, PipelineConfig};
use sharpjet_core::verify::{certify, VerifyConfig};
use sharpjet_core::Error;

fn quick() -> VerifyConfig {
    VerifyConfig { samples: 300, pairs: 300, ..VerifyConfig::default() }
}

fn assert_certified(name: &str, r: &sharpjet_core::pipeline::ExtensionResult) {
    let c = certify(r, &quick());
    let failed: Vec<_> = c.entries.iter().filter(|e| !e.pass).collect();
    assert!(failed.is_empty(), "{name}: {failed:#?}");
}

#[test]
fn oracle_certificates_pass() {
    let cfg = PipelineConfig::default();
    assert_certified("huber", &extend(&huber(), None, &cfg).unwrap());
    assert_certified("planar", &extend(&planar(), Some(&full_span(2)), &cfg).unwrap());
}

#[test]
fn random_certificates_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = PipelineConfig::default();
    let mut done = 0;
    let mut index = 0;
    while done < 12 {
        let (jet, span) = random_instance(&mut rng, index);
        index += 1;
        if compute_y(&jet, DEFAULT_RANK_TOL).unwrap().dim() == 0 {
            continue;
        }
        let r = extend(&jet, span.as_deref(), &cfg).unwrap();
        assert_certified(&format!("instance {index}"), &r);
        done += 1;
    }
}

#[test]
fn bundle_round_trip_preserves_everything() {
    let cfg = PipelineConfig::default();
    let r = extend(&planar(), Some(&full_span(2)), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path(), &cfg, &r).unwrap();
    assert!(dir.path().join(GRID_FILE).exists());
    let back = read_bundle(dir.path()).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(back.result.grid, r.grid);
    assert_eq!(back.result.augmented, r.augmented);
    assert_eq!(back.result.extension, r.extension);
    for x in [v(&[0.3, -2.0]), v(&[7.0, 11.0])] {
        assert_eq!(back.result.extension.eval_f(&x).unwrap(), r.extension.eval_f(&x).unwrap());
    }
}

#[test]
fn bundle_rejects_wrong_version_and_truncated_grid() {
    let cfg = PipelineConfig::default();
    let r = extend(&huber(), None, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(dir.path(), &cfg, &r).unwrap();

    let grid = std::fs::read(dir.path().join(GRID_FILE)).unwrap();
    std::fs::write(dir.path().join(GRID_FILE), &grid[..grid.len() - 8]).unwrap();
    assert!(matches!(read_bundle(dir.path()), Err(Error::Parse(_))));

    let text = std::fs::read_to_string(dir.path().join(BUNDLE_FILE)).unwrap();
    std::fs::write(dir.path().join(BUNDLE_FILE), text.replacen("\"version\": \"1\"", "\"version\": \"2\"", 1)).unwrap();
    assert!(matches!(read_bundle(dir.path()), Err(Error::Parse(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extension_interpolates_and_is_l_lipschitz(seed in 0u64..10_000, index in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (jet, span) = random_instance(&mut rng, index);
        prop_assume!(compute_y(&jet, DEFAULT_RANK_TOL).unwrap().dim() > 0);
        let r = extend(&jet, span.as_deref(), &PipelineConfig::default()).unwrap();
        let e = &r.extension;
        for p in jet.points() {
            let f = e.eval_f(&p.site).unwrap();
            prop_assert!((f.value - p.value).abs() <= 1e-7 * (1.0 + p.value.abs()));
            prop_assert!((&f.gradient - &p.gradient).norm() <= 1e-6);
        }
        let a = &jet.points()[0].site;
        for p in jet.points() {
            let b = (&p.site * 3.0) - a;
            let fa = e.eval_f(a).unwrap();
            let fb = e.eval_f(&b).unwrap();
            prop_assert!(fb.gradient.norm() <= r.lipschitz * (1.0 + 1e-9));
            prop_assert!((fa.value - fb.value).abs() <= r.lipschitz * (a - &b).norm() + 1e-8 * (1.0 + fa.value.abs()));
            prop_assert!(fb.value >= fa.value + fa.gradient.dot(&(&b - a)) - 1e-8 * (1.0 + fb.value.abs()));
        }
    }
}
