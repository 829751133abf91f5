mod common;

use assured_ddf::ddf::{ci_pairwise, ci_weighted};
use assured_ddf::assignment::{min_cost_assignment, solve_assignment};
use assured_ddf::metrics::{assignment_counts, assignment_metrics, ospa, trust_distance, OspaVariant};
use assured_ddf::network::{connectivity, decode_packet, encode_packet, TrackPacket, PACKET_BYTES};
use assured_ddf::trust::{propagate_trust, update_trust, BetaTrust, Psm, PsmTarget, TrustConfig};
use assured_ddf::{AgentId, TrackId};
use nalgebra::{DMatrix, SMatrix, SVector, Vector3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_packet(r: &mut ChaCha8Rng) -> TrackPacket {
    let mut f = || r.random_range(-1.0e6f32..1.0e6);
    let mut p = TrackPacket {
        ownship_state: SVector::from_fn(|_, _| f()),
        ownship_covariance: SMatrix::from_fn(|_, _| f()),
        camera_mount: SVector::from_fn(|_, _| f()),
        hfov: f(),
        vfov: f(),
        focal: f(),
        track_state: SVector::from_fn(|_, _| f()),
        track_covariance: SMatrix::from_fn(|_, _| f()),
        ..TrackPacket::default()
    };
    p.image_width = r.random();
    p.image_height = r.random();
    p.track_id = r.random();
    p
}

fn random_points(r: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::new(r.random_range(-spread..spread), r.random_range(-spread..spread), 0.0))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn packet_round_trip_is_exact(seed in any::<u64>()) {
        let p = random_packet(&mut rng(seed));
        let bytes = encode_packet(&p);
        prop_assert_eq!(bytes.len(), PACKET_BYTES);
        prop_assert_eq!(decode_packet(&bytes).unwrap(), p);
    }

    #[test]
    fn packet_prefixes_fail_to_decode(seed in any::<u64>(), cut in 0usize..PACKET_BYTES) {
        let bytes = encode_packet(&random_packet(&mut rng(seed)));
        prop_assert!(decode_packet(&bytes[..cut]).is_err());
    }

    #[test]
    fn ci_is_consistent_and_no_worse_than_inputs(seed in any::<u64>(), n in 2usize..=7) {
        let mut r = rng(seed);
        let (c1, c2) = (common::random_pd(&mut r, n), common::random_pd(&mut r, n));
        let (m1, m2) = (common::random_vector(&mut r, n), common::random_vector(&mut r, n));
        let ci = ci_pairwise(&m1, &c1, &m2, &c2, 1e-6).unwrap();
        prop_assert!((0.0..=1.0).contains(&ci.omega));
        let det = ci.covariance.determinant();
        let tol = 1e-9 * c1.determinant().max(c2.determinant());
        prop_assert!(det <= c1.determinant() + tol && det <= c2.determinant() + tol);
        // consistency: omega * I1 + (1 - omega) * I2 is dominated by the fused information
        let i_sum = c1.clone().try_inverse().unwrap() * ci.omega + c2.clone().try_inverse().unwrap() * (1.0 - ci.omega);
        let fused_info = ci.covariance.clone().try_inverse().unwrap();
        prop_assert!((&fused_info - &i_sum).norm() <= 1e-8 * i_sum.norm());
        prop_assert!(ci.covariance.clone().cholesky().is_some());
    }

    #[test]
    fn weighted_ci_of_one_source_is_identity(seed in any::<u64>(), n in 2usize..=7, w in 0.01f64..10.0) {
        let mut r = rng(seed);
        let c = common::random_pd(&mut r, n);
        let m = common::random_vector(&mut r, n);
        let (mean, cov, weights) = ci_weighted(&[(m.clone(), c.clone())], &[w]).unwrap();
        prop_assert!((mean - &m).norm() <= 1e-9 * (1.0 + m.norm()));
        prop_assert!((cov - &c).norm() <= 1e-9 * c.norm());
        prop_assert_eq!(weights, vec![1.0]);
    }

    #[test]
    fn trust_update_is_permutation_invariant(seed in any::<u64>(), k in 0usize..20) {
        let mut r = rng(seed);
        let cfg = TrustConfig::default();
        let prior = BetaTrust::new(r.random_range(0.1..20.0), r.random_range(0.1..20.0)).unwrap();
        let mut psms: Vec<Psm> = (0..k)
            .map(|_| Psm::new(PsmTarget::Agent(AgentId(1)), r.random_range(0.0..=1.0), r.random_range(0.0..=1.0)).unwrap())
            .collect();
        let a = update_trust(&prior, &psms, &cfg);
        psms.shuffle(&mut r);
        let b = update_trust(&prior, &psms, &cfg);
        prop_assert!((a.alpha - b.alpha).abs() <= 1e-12 * a.alpha);
        prop_assert!((a.beta - b.beta).abs() <= 1e-12 * a.beta);
    }

    #[test]
    fn trust_update_monotone_in_evidence(a in 0.1f64..50.0, b in 0.1f64..50.0, c in 0.0f64..=1.0) {
        let cfg = TrustConfig::default();
        let prior = BetaTrust::new(a, b).unwrap();
        let up = update_trust(&prior, &[Psm::new(PsmTarget::Track(TrackId(0)), 1.0, c).unwrap()], &cfg);
        let down = update_trust(&prior, &[Psm::new(PsmTarget::Track(TrackId(0)), 0.0, c).unwrap()], &cfg);
        prop_assert!(up.mean() >= prior.mean() - 1e-15);
        prop_assert!(down.mean() <= prior.mean() + 1e-15);
    }

    #[test]
    fn negativity_bias_outweighs_equal_positive_evidence(a in 0.1f64..50.0) {
        let cfg = TrustConfig::default();
        let prior = BetaTrust::new(a, a).unwrap();
        let up = update_trust(&prior, &[Psm::new(PsmTarget::Track(TrackId(0)), 1.0, 1.0).unwrap()], &cfg);
        let down = update_trust(&prior, &[Psm::new(PsmTarget::Track(TrackId(0)), 0.0, 1.0).unwrap()], &cfg);
        prop_assert!(prior.mean() - down.mean() > up.mean() - prior.mean());
    }

    #[test]
    fn propagation_contracts_toward_baseline(a in 0.1f64..100.0, b in 0.1f64..100.0) {
        let cfg = TrustConfig::default();
        let base = BetaTrust::uniform();
        let cur = BetaTrust::new(a, b).unwrap();
        let next = propagate_trust(&cur, &base, &cfg);
        prop_assert!((next.alpha - base.alpha).abs() <= (cur.alpha - base.alpha).abs());
        prop_assert!((next.beta - base.beta).abs() <= (cur.beta - base.beta).abs());
    }

    #[test]
    fn assignment_counts_match_brute_force(seed in any::<u64>(), n in 0usize..=5, m in 0usize..=5) {
        let mut r = rng(seed);
        let tracks = random_points(&mut r, n, 4.0);
        let truths = random_points(&mut r, m, 4.0);
        let counts = assignment_counts(&tracks, &truths, 2.0);
        let d = DMatrix::from_fn(n, m, |i, j| (tracks[i] - truths[j]).norm());
        let (k, _) = common::brute_force_assignment(&d, 2.0);
        prop_assert_eq!(counts.tp, k);
        prop_assert_eq!(counts.fp, n - k);
        prop_assert_eq!(counts.fn_, m - k);
    }

    #[test]
    fn assignment_cost_is_optimal_and_ties_resolve_lowest(seed in any::<u64>(), n in 0usize..=5, m in 0usize..=5, levels in 1u32..4) {
        let mut r = rng(seed);
        // few distinct integer costs make ties common
        let c = DMatrix::from_fn(n, m, |_, _| r.random_range(0..=levels) as f64);
        let gate = levels as f64 - 0.5;
        let res = solve_assignment(&c, gate);
        let (k, total) = common::brute_force_assignment(&c, gate);
        prop_assert_eq!(res.matches.len(), k);
        prop_assert!((res.total_cost() - total).abs() < 1e-9);
        let got: Vec<(usize, usize)> = res.matches.iter().map(|x| (x.0, x.1)).collect();
        prop_assert_eq!(got, common::brute_force_lex_optimum(&c, gate, 1e-9));
        let plain = min_cost_assignment(&c, gate);
        prop_assert_eq!(plain.matches.len(), k);
        prop_assert!((plain.total_cost() - total).abs() < 1e-9);
    }

    #[test]
    fn raising_the_gate_never_loses_matches(seed in any::<u64>(), n in 0usize..=6, m in 0usize..=6, g in 0.1f64..3.0) {
        let mut r = rng(seed);
        let c = DMatrix::from_fn(n, m, |_, _| r.random_range(0.0..4.0));
        prop_assert!(solve_assignment(&c, g * 1.5).matches.len() >= solve_assignment(&c, g).matches.len());
    }

    #[test]
    fn trust_distance_matches_cdf_area(a in 0.5f64..30.0, b in 0.5f64..30.0, target in any::<bool>()) {
        let t = BetaTrust::new(a, b).unwrap();
        prop_assert!((trust_distance(&t, target) - common::cdf_area_distance(&t, target)).abs() < 1e-6);
    }

    #[test]
    fn standard_ospa_is_a_metric(seed in any::<u64>(), nx in 0usize..=4, ny in 0usize..=4, nz in 0usize..=4) {
        let mut r = rng(seed);
        let x = random_points(&mut r, nx, 15.0);
        let y = random_points(&mut r, ny, 15.0);
        let z = random_points(&mut r, nz, 15.0);
        let d = |a: &[Vector3<f64>], b: &[Vector3<f64>]| ospa(a, b, 10.0, 1.0, OspaVariant::Standard).unwrap();
        prop_assert!(d(&x, &x).abs() < 1e-12);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() < 1e-9);
        prop_assert!(d(&x, &y) >= 0.0 && d(&x, &y) <= 10.0 + 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
        if nx != ny {
            prop_assert!(d(&x, &y) > 0.0);
        }
    }

    #[test]
    fn far_false_track_never_helps(seed in any::<u64>(), m in 1usize..=4, extra in 0usize..=2) {
        let mut r = rng(seed);
        let truths = random_points(&mut r, m, 20.0);
        let mut tracks: Vec<Vector3<f64>> = truths.iter().map(|t| t + Vector3::new(r.random_range(-1.0..1.0), 0.0, 0.0)).collect();
        tracks.extend(random_points(&mut r, extra, 20.0));
        let (p0, _, _) = assignment_metrics(&tracks, &truths, 2.0);
        let o0 = ospa(&tracks, &truths, 10.0, 1.0, OspaVariant::Paper).unwrap();
        let mut more = tracks.clone();
        more.push(Vector3::new(500.0, 500.0, 0.0));
        let (p1, _, _) = assignment_metrics(&more, &truths, 2.0);
        let o1 = ospa(&more, &truths, 10.0, 1.0, OspaVariant::Paper).unwrap();
        prop_assert!(p1 <= p0 + 1e-12);
        prop_assert!(o1 >= o0 - 1e-9);
    }

    #[test]
    fn connectivity_matches_pairwise_distances(seed in any::<u64>(), n in 0usize..12, range in 1.0f64..200.0) {
        let mut r = rng(seed);
        let pos: Vec<(AgentId, Vector3<f64>)> = (0..n)
            .map(|i| (AgentId(i as u32), Vector3::new(r.random_range(-150.0..150.0), r.random_range(-150.0..150.0), r.random_range(50.0..100.0))))
            .collect();
        let adj = connectivity(&pos, range).unwrap();
        let wider = connectivity(&pos, range * 1.5).unwrap();
        let mut edges = 0;
        for (i, (a, pa)) in pos.iter().enumerate() {
            for (b, pb) in pos.iter().skip(i + 1) {
                let expect = (pa - pb).norm() <= range;
                prop_assert_eq!(adj.connected(*a, *b), expect);
                prop_assert_eq!(adj.connected(*b, *a), expect);
                if expect {
                    edges += 1;
                    prop_assert!(wider.connected(*a, *b));
                }
            }
            prop_assert!(!adj.connected(*a, *a));
        }
        prop_assert_eq!(adj.edge_count(), edges);
    }
}
