use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::data::{DataMatrix, DenseMatrix, SparseMatrix};
use crate::linalg::norm2;
use crate::rng::rng_from_seed;

fn random_dense(n: usize, d: usize, seed: u64) -> DenseMatrix {
    let mut rng = rng_from_seed(seed);
    DenseMatrix::new(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn random_sparse(n: usize, d: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = rng_from_seed(seed);
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..d {
            if rng.random::<f64>() < density {
                trip.push((i, j, rng.sample::<f64, _>(StandardNormal)));
            }
        }
    }
    SparseMatrix::from_triplets(n, d, &trip).unwrap()
}

fn all_specs(m: usize, seed: u64) -> Vec<SketchSpec> {
    vec![
        SketchSpec::new(SketchFamily::Gaussian, m, seed),
        SketchSpec::new(SketchFamily::Srht, m, seed),
        SketchSpec::new(SketchFamily::CountSketch, m, seed),
        SketchSpec::sjlt(m, 4, seed),
    ]
}

#[test]
fn countsketch_construction() {
    let s = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 3, 1), 5).unwrap();
    let block = &s.hash_blocks().unwrap()[0];
    assert_eq!(block.buckets().len(), 5);
    assert!(block.buckets().iter().all(|&b| b < 3));
    assert!(block.signs().iter().all(|&v| v == 1.0 || v == -1.0));
}

#[test]
fn sjlt_with_one_block_is_countsketch() {
    let cs = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 16, 99), 200).unwrap();
    let sj = build_sketch(&SketchSpec::sjlt(16, 1, 99), 200).unwrap();
    assert_eq!(cs.hash_blocks(), sj.hash_blocks());
    assert_eq!(cs.densify(), sj.densify());
}

#[test]
fn determinism_and_fresh_seeds() {
    for spec in all_specs(8, 5) {
        let a = build_sketch(&spec, 40).unwrap();
        let b = build_sketch(&spec, 40).unwrap();
        assert_eq!(a, b);
        let c = build_sketch(&spec.with_seed(6), 40).unwrap();
        assert_ne!(a, c, "{:?}", spec.family);
    }
    let a = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 8, 1), 100).unwrap();
    let b = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 8, 2), 100).unwrap();
    assert_ne!(a.hash_blocks().unwrap()[0].buckets(), b.hash_blocks().unwrap()[0].buckets());
}

#[test]
fn explicit_countsketch_application() {
    let s = SketchOperator::count_sketch_from_parts(2, vec![0, 1, 0], vec![1.0, 1.0, -1.0]).unwrap();
    let a = DataMatrix::Sparse(SparseMatrix::identity(3));
    let sa = apply_sketch(&s, &a).unwrap();
    assert_eq!(sa, DenseMatrix::from_rows(&[vec![1.0, 0.0, -1.0], vec![0.0, 1.0, 0.0]]));
}

#[test]
fn apply_matches_dense_product() {
    let dense = random_dense(64, 8, 3);
    let sparse = random_sparse(64, 8, 0.3, 4);
    for spec in all_specs(16, 11) {
        let s = build_sketch(&spec, 64).unwrap();
        let sd = s.densify();
        for a in [DataMatrix::Dense(dense.clone()), DataMatrix::Sparse(sparse.clone())] {
            let expect = sd.matmul(&a.to_dense()).unwrap();
            let got = apply_sketch(&s, &a).unwrap();
            assert!(got.max_abs_diff(&expect) < 1e-10, "{:?}", spec.family);
        }
    }
}

#[test]
fn srht_pads_non_power_of_two() {
    let a = random_dense(50, 3, 8);
    let s = build_sketch(&SketchSpec::new(SketchFamily::Srht, 20, 2), 50).unwrap();
    assert_eq!(s.padded_len(), Some(64));
    let expect = s.densify().matmul(&a).unwrap();
    let got = apply_sketch(&s, &DataMatrix::Dense(a)).unwrap();
    assert!(got.max_abs_diff(&expect) < 1e-10);
}

#[test]
fn unit_column_norms() {
    for spec in [
        SketchSpec::new(SketchFamily::Srht, 12, 1),
        SketchSpec::new(SketchFamily::CountSketch, 12, 1),
        SketchSpec::sjlt(12, 3, 1),
        SketchSpec::sjlt(12, 12, 1),
    ] {
        let sd = build_sketch(&spec, 30).unwrap().densify();
        for i in 0..30 {
            let norm = norm2(&sd.column(i));
            assert!((norm - 1.0).abs() < 1e-12, "{:?} column {i}: {norm}", spec.family);
        }
    }
}

#[test]
fn hadamard_with_signs_is_an_isometry() {
    let mut rng = rng_from_seed(17);
    let n_pad = 128;
    let v: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
    let signs: Vec<f64> = (0..100).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let mut buf = vec![0.0; n_pad];
    for i in 0..100 {
        buf[i] = signs[i] * v[i];
    }
    fwht(&mut buf);
    let scaled: Vec<f64> = buf.iter().map(|x| x / (n_pad as f64).sqrt()).collect();
    assert!((norm2(&scaled) - norm2(&v)).abs() < 1e-10 * norm2(&v));
}

#[test]
fn linearity() {
    let a = DataMatrix::Sparse(random_sparse(80, 6, 0.4, 21));
    let x = [0.3, -1.0, 2.0, 0.0, 0.7, -0.2];
    for spec in all_specs(16, 2) {
        let s = build_sketch(&spec, 80).unwrap();
        let sa = apply_sketch(&s, &a).unwrap();
        let sax: Vec<f64> = (0..sa.n_rows()).map(|k| crate::linalg::dot(sa.row(k), &x)).collect();
        let s_ax = sketch_vector(&s, &a.matvec(&x).unwrap()).unwrap();
        let scale = norm2(&sax).max(1.0);
        for (p, q) in sax.iter().zip(&s_ax) {
            assert!((p - q).abs() <= 1e-12 * scale, "{:?}", spec.family);
        }
    }
}

#[test]
fn sketch_of_zero_is_zero() {
    let s = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 4, 0), 10).unwrap();
    assert_eq!(sketch_vector(&s, &[0.0; 10]).unwrap(), vec![0.0; 4]);
}

#[test]
fn output_independent_of_thread_count() {
    let sparse = DataMatrix::Sparse(random_sparse(300, 13, 0.2, 5));
    let dense = DataMatrix::Dense(random_dense(300, 13, 6));
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    for spec in all_specs(40, 3) {
        let s = build_sketch(&spec, 300).unwrap();
        for a in [&sparse, &dense] {
            let r1 = one.install(|| apply_sketch(&s, a).unwrap());
            let r4 = four.install(|| apply_sketch(&s, a).unwrap());
            assert_eq!(r1, r4, "{:?}", spec.family);
        }
    }
}

#[test]
fn gaussian_preserves_norm_in_expectation() {
    let mut rng = rng_from_seed(1);
    let v: Vec<f64> = (0..64).map(|_| rng.sample(StandardNormal)).collect();
    let v2 = norm2(&v).powi(2);
    let mean: f64 = (0..500u64)
        .map(|seed| {
            let s = build_sketch(&SketchSpec::new(SketchFamily::Gaussian, 16, seed), 64).unwrap();
            norm2(&sketch_vector(&s, &v).unwrap()).powi(2)
        })
        .sum::<f64>()
        / 500.0;
    assert!((mean / v2 - 1.0).abs() < 0.1, "ratio {}", mean / v2);
}

#[test]
fn sjlt_sparsity_does_not_change_expected_norm() {
    let mut rng = rng_from_seed(2);
    let v: Vec<f64> = (0..256).map(|_| rng.sample(StandardNormal)).collect();
    let v2 = norm2(&v).powi(2);
    let mean = |s: usize| -> f64 {
        (0..500u64)
            .map(|seed| {
                let op = build_sketch(&SketchSpec::sjlt(64, s, seed), 256).unwrap();
                norm2(&sketch_vector(&op, &v).unwrap()).powi(2) / v2
            })
            .sum::<f64>()
            / 500.0
    };
    let (m1, m4) = (mean(1), mean(4));
    assert!((m1 - m4).abs() < 0.05, "s=1: {m1}, s=4: {m4}");
    assert!((m1 - 1.0).abs() < 0.05 && (m4 - 1.0).abs() < 0.05);
}

#[test]
fn invalid_specs() {
    assert!(build_sketch(&SketchSpec::new(SketchFamily::Srht, 65, 0), 64).is_err());
    assert!(build_sketch(&SketchSpec::new(SketchFamily::Srht, 64, 0), 50).is_ok());
    assert!(build_sketch(&SketchSpec::sjlt(10, 3, 0), 50).is_err());
    assert!(build_sketch(&SketchSpec::sjlt(10, 11, 0), 50).is_err());
    assert!(build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 0, 0), 50).is_err());
    assert!(build_sketch(&SketchSpec { s: 2, ..SketchSpec::new(SketchFamily::Gaussian, 4, 0) }, 50).is_err());
    assert!(build_sketch(&SketchSpec::new(SketchFamily::Identity, 4, 0), 5).is_err());
    // legal but useless
    assert!(build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 60, 0), 50).is_ok());

    let s = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 4, 0), 10).unwrap();
    let a = DataMatrix::Dense(DenseMatrix::zeros(11, 2));
    assert!(matches!(apply_sketch(&s, &a), Err(Error::DimensionMismatch(_))));
}

#[test]
fn family_names_parse() {
    for f in SketchFamily::RANDOM {
        assert_eq!(f.to_string().parse::<SketchFamily>().unwrap(), f);
    }
    assert_eq!("count-sketch".parse::<SketchFamily>().unwrap(), SketchFamily::CountSketch);
    assert!("fourier".parse::<SketchFamily>().is_err());
}

proptest! {
    #[test]
    fn hashed_column_structure(n in 1usize..120, blocks in 1usize..5, per_block in 1usize..12, seed: u64) {
        let m = blocks * per_block;
        let spec = if blocks == 1 {
            SketchSpec::new(SketchFamily::CountSketch, m, seed)
        } else {
            SketchSpec::sjlt(m, blocks, seed)
        };
        let sd = build_sketch(&spec, n).unwrap().densify();
        let expect = 1.0 / (blocks as f64).sqrt();
        for i in 0..n {
            let col = sd.column(i);
            for k in 0..blocks {
                let seg = &col[k * per_block..(k + 1) * per_block];
                let nz: Vec<f64> = seg.iter().copied().filter(|v| *v != 0.0).collect();
                prop_assert_eq!(nz.len(), 1);
                prop_assert_eq!(nz[0].abs(), expect);
            }
        }
    }
}

// ---- diagnostics ----

/// Orthonormal basis of col(A) by Householder QR, independent of the
/// Cholesky route used in the library.
fn qr_basis(a: &DenseMatrix) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(a.n_rows(), a.n_cols(), a.values());
    m.qr().q()
}

fn oracle_distortion(a: &DenseMatrix, s: &SketchOperator) -> (f64, f64) {
    let u = qr_basis(a);
    let sd = s.densify();
    let sm = DMatrix::from_row_slice(sd.n_rows(), sd.n_cols(), sd.values());
    let sv = (sm * u).singular_values();
    let smax = sv.max();
    let smin = sv.min();
    (1.0 - smin * smin, smax * smax - 1.0)
}

#[test]
fn identity_sketch_has_no_error_or_distortion() {
    let a = DataMatrix::Dense(random_dense(40, 5, 1));
    let err = empirical_sketch_error(&a, &SketchSpec::new(SketchFamily::Identity, 40, 0), 2).unwrap();
    assert!(err < 1e-14);
    // a signed permutation is also an exact isometry
    let perm: Vec<usize> = (0..40).map(|i| (i * 7) % 40).collect();
    let signs: Vec<f64> = (0..40).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
    let s = SketchOperator::count_sketch_from_parts(40, perm, signs).unwrap();
    let d = subspace_distortion(&a, &s).unwrap();
    assert!(d.eps_low.abs() < 1e-12 && d.eps_high.abs() < 1e-12, "{d:?}");
    let sa = apply_sketch(&s, &a).unwrap();
    let ata = a.gram();
    assert!(diagnostics::relative_gram_error(&sa, &ata, ata.frobenius_norm()) < 1e-14);
}

#[test]
fn sketch_error_shrinks_with_m() {
    let a = DataMatrix::Dense(random_dense(2000, 30, 2));
    let e5 = empirical_sketch_error(&a, &SketchSpec::new(SketchFamily::CountSketch, 150, 1), 10).unwrap();
    let e10 = empirical_sketch_error(&a, &SketchSpec::new(SketchFamily::CountSketch, 300, 1), 10).unwrap();
    assert!(e10 < e5, "m=10d {e10} vs m=5d {e5}");
    let g10 = empirical_sketch_error(&a, &SketchSpec::new(SketchFamily::Gaussian, 300, 1), 10).unwrap();
    assert!(e10 / g10 < 2.0 && g10 / e10 < 2.0, "countsketch {e10} gaussian {g10}");
}

#[test]
fn sketch_error_undefined_for_zero_matrix() {
    let a = DataMatrix::Dense(DenseMatrix::zeros(10, 2));
    let r = empirical_sketch_error(&a, &SketchSpec::new(SketchFamily::CountSketch, 4, 0), 1);
    assert!(matches!(r, Err(Error::Numerical(_))));
}

#[test]
fn distortion_matches_qr_oracle() {
    let dense = random_dense(256, 6, 9);
    let a = DataMatrix::Dense(dense.clone());
    for spec in all_specs(48, 4) {
        let s = build_sketch(&spec, 256).unwrap();
        let got = subspace_distortion(&a, &s).unwrap();
        let (lo, hi) = oracle_distortion(&dense, &s);
        assert!((got.eps_low - lo).abs() < 1e-9 && (got.eps_high - hi).abs() < 1e-9, "{:?}", spec.family);
    }
}

#[test]
fn distortion_bounds_random_directions() {
    let dense = random_dense(512, 8, 10);
    let a = DataMatrix::Dense(dense.clone());
    let s = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 64, 3), 512).unwrap();
    let d = subspace_distortion(&a, &s).unwrap();
    let mut rng = rng_from_seed(4);
    let (mut worst_low, mut worst_high) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let ax = a.matvec(&x).unwrap();
        let ratio = norm2(&sketch_vector(&s, &ax).unwrap()).powi(2) / norm2(&ax).powi(2);
        worst_low = worst_low.max(1.0 - ratio);
        worst_high = worst_high.max(ratio - 1.0);
    }
    // sampling can only approach the spectral extremes from inside
    assert!(worst_low <= d.eps_low + 1e-12 && worst_high <= d.eps_high + 1e-12);
    assert!(worst_low > 0.5 * d.eps_low && worst_high > 0.5 * d.eps_high);
}

#[test]
fn distortion_improves_with_m() {
    let a = DataMatrix::Dense(random_dense(2048, 8, 12));
    let mean = |m: usize| -> f64 {
        (0..10u64)
            .map(|seed| {
                let s = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, m, seed), 2048).unwrap();
                subspace_distortion(&a, &s).unwrap().max()
            })
            .sum::<f64>()
            / 10.0
    };
    let (d5, d20) = (mean(40), mean(160));
    assert!(d20 < d5, "m=20d {d20} vs m=5d {d5}");
}

#[test]
fn rank_deficient_is_rejected() {
    let mut m = random_dense(30, 3, 1);
    for i in 0..30 {
        let v = m.get(i, 0);
        m.set(i, 2, 2.0 * v);
    }
    let a = DataMatrix::Dense(m);
    let s = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 10, 0), 30).unwrap();
    assert!(matches!(subspace_distortion(&a, &s), Err(Error::RankDeficient)));
    let v = vec![1.0 / 30f64.sqrt(); 30];
    assert!(matches!(estimate_z1_z2(&a, &s, &v), Err(Error::RankDeficient)));
}

#[test]
fn z_quantities() {
    let a = DataMatrix::Dense(random_dense(64, 4, 2));
    let mut v: Vec<f64> = (0..64).map(|i| ((i * 13 % 7) as f64) - 3.0).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let (z1, z2) = estimate_z1_z2(&a, &SketchOperator::identity(64), &v).unwrap();
    assert!((z1 - 1.0).abs() < 1e-12 && z2 < 1e-12);

    let s = build_sketch(&SketchSpec::new(SketchFamily::CountSketch, 20, 1), 64).unwrap();
    let (z1, _) = estimate_z1_z2(&a, &s, &v).unwrap();
    let d = subspace_distortion(&a, &s).unwrap();
    assert_eq!(z1, 1.0 - d.eps_low);

    assert!(estimate_z1_z2(&a, &s, &vec![1.0; 64]).is_err());
    assert!(estimate_z1_z2(&a, &s, &[1.0]).is_err());
}

#[test]
fn z2_matches_dense_oracle() {
    let dense = random_dense(128, 5, 31);
    let a = DataMatrix::Dense(dense.clone());
    let s = build_sketch(&SketchSpec::sjlt(40, 4, 2), 128).unwrap();
    let mut rng = rng_from_seed(8);
    let mut v: Vec<f64> = (0..128).map(|_| rng.sample(StandardNormal)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let (_, z2) = estimate_z1_z2(&a, &s, &v).unwrap();

    let u = qr_basis(&dense);
    let sd = s.densify();
    let sm = DMatrix::from_row_slice(sd.n_rows(), sd.n_cols(), sd.values());
    let vv = nalgebra::DVector::from_vec(v);
    let w = u.transpose() * (sm.transpose() * (&sm * &vv) - &vv);
    assert!((w.norm() - z2).abs() < 1e-10, "{} vs {z2}", w.norm());
}

#[test]
fn lemma_report_small() {
    let spec = SketchSpec::new(SketchFamily::CountSketch, 10, 3);
    let r = diagnose_lemmas(&spec, 100, 300).unwrap();
    assert_eq!(r.orthogonal_rows.violations, 0);
    assert_eq!(r.orthogonal_rows.column_violations, 0);
    assert!(r.all_passed(), "{r:?}");
    assert!(diagnose_lemmas(&SketchSpec::new(SketchFamily::Gaussian, 10, 3), 100, 3).is_err());
}
