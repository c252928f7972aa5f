//! The acceptance gate: one test per shipping criterion, each printing a
//! single pass line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; a failed criterion fails its test.

use std::fs;
use std::path::PathBuf;

use lamplight_cli::{cmd_obstruction, ExperimentConfig};
use lamplight_core::boundary::CloneBall;
use lamplight_core::dlgraph::{folner_scan, Ambient, DLBox, DEFAULT_BUDGET};
use lamplight_core::lift::{pi, pi_bar, up_map};
use lamplight_core::qmaps::{
    check_prime_support, random_global_map, random_mixed_map, search_global_lambda, PiecewiseMap,
    Similarity,
};
use lamplight_core::rng::Stream;
use lamplight_core::ufh::{audit_stage, obstruction_stage, Verdict};
use lamplight_core::Rational;
use num_traits::One;

fn pass(n: u32, what: &str) {
    println!("criterion {n} ({what}): PASS");
}

#[test]
fn criterion_1_box_census() {
    for (n, top) in [(2u32, 10i64), (3, 8)] {
        for h in 0..=top {
            let b = DLBox::build(n, h, 0, DEFAULT_BUDGET).unwrap();
            let per_level = (n as u128).pow(h as u32);
            assert_eq!(b.vertex_count() as u128, (h as u128 + 1) * per_level);
            assert_eq!(b.level_count() as u128, per_level);
            assert_eq!(b.levels().count() as u128, h as u128 + 1);
        }
    }
    pass(1, "box census");
}

#[test]
fn criterion_2_folner_decay() {
    let hs: Vec<i64> = (2..=10).collect();
    let rows = folner_scan(2, &hs, 1, DEFAULT_BUDGET).unwrap();
    let products: Vec<Rational> = rows
        .iter()
        .map(|r| &r.ratio * Rational::from_integer((r.h + 1).into()))
        .collect();
    for pair in rows.windows(2) {
        assert!(pair[1].ratio <= pair[0].ratio, "ratio must not increase");
    }
    let min = products.iter().min().unwrap();
    let max = products.iter().max().unwrap();
    assert!(max <= &(Rational::from_integer(2.into()) * min));
    pass(2, "Folner decay");
}

#[test]
fn criterion_3_up_fiber_law() {
    for (n, k) in [(3u32, 2u32), (2, 3)] {
        let h = 3 * k as i64;
        let b = DLBox::build(n, h, 0, DEFAULT_BUDGET).unwrap();
        let mut fibers = vec![0u64; b.vertex_count()];
        for id in b.all_ids() {
            if let Some(wid) = b.index_of(&up_map(&b.vertex(id), k)) {
                fibers[wid] += 1;
            }
        }
        for t in b.levels() {
            // interior: on the sublattice with k - 1 full levels below
            if t.rem_euclid(k as i64) != 0 || t - (k as i64 - 1) < b.base_level() {
                continue;
            }
            let lo = (t - b.base_level()) as usize * b.level_count();
            for &f in &fibers[lo..lo + b.level_count()] {
                assert_eq!(f, k as u64);
            }
        }
    }
    pass(3, "up fiber law");
}

#[test]
fn criterion_4_prime_support_law() {
    let mut stream = Stream::new(2024);
    let mut checked = 0;
    while checked < 500 {
        for n in [2u32, 3, 6] {
            let shift = stream.below(5) as i64 - 2;
            let m = random_global_map(n, 3, shift, &mut stream);
            let report = m.measure_linear_report();
            assert!(report.global.is_some());
            assert!(check_prime_support(&report, n));
            checked += 1;
        }
    }
    let three = Rational::from_integer(3.into());
    assert!(search_global_lambda(2, 3, 3, &three).is_none());
    pass(4, "prime-support law");
}

#[test]
fn criterion_5_zoom_stabilization() {
    let mut stream = Stream::new(515);
    for case in 0..20 {
        let n = [2u32, 3][case % 2];
        let m = if case % 3 == 0 {
            random_mixed_map(n, 4, 2, &mut stream)
        } else {
            random_global_map(n, 4, stream.below(3) as i64 - 1, &mut stream)
        };
        let x = m.sample_domain_point(6, &mut stream);
        let piece = m
            .pieces()
            .iter()
            .find(|p| p.source().contains_point(&x))
            .unwrap();
        let window_height = m
            .pieces()
            .iter()
            .map(|p| p.source().height())
            .max()
            .unwrap()
            .max(0);
        let max_depth = m
            .pieces()
            .iter()
            .map(|p| window_height - p.source().height())
            .max()
            .unwrap() as u32;
        let z = m.zoom_limit(&x).unwrap();
        assert!(z.stabilization_depth <= max_depth);
        assert_eq!(z.limit.scale(), piece.scale());
    }
    pass(5, "zoom stabilization");
}

fn shift_maps(n: u32, s_l: i64, window_u: i64, s_u: i64) -> (PiecewiseMap, PiecewiseMap) {
    let phi_l = PiecewiseMap::new([Similarity::new(
        CloneBall::zero(n, 0),
        CloneBall::zero(n, s_l),
    )
    .unwrap()])
    .unwrap();
    let phi_u = PiecewiseMap::new([Similarity::new(
        CloneBall::zero(n, window_u),
        CloneBall::zero(n, window_u + s_u),
    )
    .unwrap()])
    .unwrap();
    (phi_l, phi_u)
}

#[test]
fn criterion_6_preimage_sandwich() {
    // (lambda_l, lambda_u) in {(2, 1), (2, 1/2)} on n = 2, H = 8
    for (s_u, expected_r) in [(0i64, 1u32), (-1, 2)] {
        let (phi_l, phi_u) = shift_maps(2, 1, 8, s_u);
        let stage = obstruction_stage(&phi_l, &phi_u, 1, 8, DEFAULT_BUDGET).unwrap();
        let k = phi_l.bilipschitz_bound() * phi_u.bilipschitz_bound();
        let audit = audit_stage(&stage, &k);
        assert_eq!(audit.r, expected_r, "r = log2 K");
        assert_eq!(audit.in_sandwich, Some(true));
        for row in &audit.rows {
            assert_eq!(row.in_sandwich, Some(true), "level {} out of sandwich", row.t);
        }
    }
    pass(6, "preimage sandwich");
}

fn write_map(dir: &PathBuf, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn criterion_7_obstruction_reproduction() {
    let dir = std::env::temp_dir().join(format!("lamplight-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    let phi_l = write_map(&dir, "phi_l.map", "2\n2@0: -> 2@1:\n");
    let phi_u = write_map(&dir, "phi_u.map", "2\n2@10: -> 2@10:\n");
    let phi_u_half = write_map(&dir, "phi_u_half.map", "2\n2@10: -> 2@9:\n");
    let base = ExperimentConfig {
        n: 2,
        k: 1,
        h_list: (4..=10).collect(),
        r: 1,
        phi_l: Some(phi_l),
        phi_u: Some(phi_u),
        outdir: dir.join("flagship"),
        ..ExperimentConfig::default()
    };

    let flagship = cmd_obstruction(&base).unwrap();
    assert_eq!(flagship.verdict, Verdict::Obstructed);
    let first = &flagship.report.rows.first().unwrap().ratio;
    let last = &flagship.report.rows.last().unwrap().ratio;
    assert!(last >= &(Rational::from_integer(2.into()) * first));

    let control = ExperimentConfig {
        phi_u: Some(phi_u_half.clone()),
        outdir: dir.join("control"),
        ..base.clone()
    };
    let outcome = cmd_obstruction(&control).unwrap();
    assert_eq!(outcome.verdict, Verdict::Consistent);
    let bound = outcome.report.rows.first().unwrap().ratio.clone();
    assert!(outcome.report.max_ratio <= bound, "control ratio stays bounded");

    let matched = ExperimentConfig {
        h_list: vec![8],
        match_radius: 2,
        outdir: dir.join("matching"),
        ..control
    };
    let outcome = cmd_obstruction(&matched).unwrap();
    let m = outcome.matching.unwrap();
    let s8 = DLBox::build(2, 8, 0, DEFAULT_BUDGET).unwrap();
    let boundary_2 = s8.r_boundary(&s8.all_ids(), 2, Ambient::Band).len();
    assert!(m.deficiency <= boundary_2, "{} vs {}", m.deficiency, boundary_2);
    let _ = fs::remove_dir_all(&dir);
    pass(7, "obstruction reproduction");
}

#[test]
fn criterion_8_round_trip_and_duality() {
    for n in [2u32, 3] {
        for h in 0..=6i64 {
            for a in [0, -h] {
                let b = DLBox::build(n, h, a, DEFAULT_BUDGET).unwrap();
                for id in b.all_ids() {
                    let v = b.vertex(id);
                    assert_eq!(pi(&pi_bar(&v)), v);
                    let product = v.lower_shadow().measure() * v.upper_shadow().measure();
                    assert!(product.is_one());
                }
            }
        }
    }
    pass(8, "round trip and duality");
}
