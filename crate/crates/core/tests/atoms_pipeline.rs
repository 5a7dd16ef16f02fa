use faer::Mat;
use freeatoms::atoms::{self, LadderOptions};
use freeatoms::linalg::{self, cx};
use freeatoms::{CMat, FreeSumModel, NCPoly, SpectralMeasure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn at(x: f64) -> CMat {
    linalg::scaled_identity(1, cx(x, 0.0))
}

fn seven_three() -> SpectralMeasure {
    SpectralMeasure::atomic(&[(0.0, 0.7), (1.0, 0.3)]).unwrap()
}

fn six_four() -> SpectralMeasure {
    SpectralMeasure::atomic(&[(0.0, 0.6), (2.0, 0.4)]).unwrap()
}

fn sc() -> SpectralMeasure {
    SpectralMeasure::semicircle(0.0, 2.0).unwrap()
}

#[test]
fn emass_spec_examples() {
    let opts = LadderOptions::default();
    let m = FreeSumModel::scalar(sc(), sc());
    let e = atoms::boundary_emass(&m, at(0.0).as_ref(), &opts).unwrap();
    assert!(e.e[(0, 0)].re.abs() < 1e-6);
    assert!(e.monotone);
}

#[test]
fn scalar_beta_times_mass_is_component_trace() {
    let opts = LadderOptions::default();
    let m = FreeSumModel::scalar(seven_three(), six_four());
    for b in [0.0, 2.0] {
        let r = atoms::decompose_atom(&m, at(b).as_ref(), &opts).unwrap();
        let d = r.decomposition.unwrap();
        assert!((d.beta1[(0, 0)].re * r.mass - d.tau_p1).abs() < 1e-6);
        assert!((d.beta2[(0, 0)].re * r.mass - d.tau_p2).abs() < 1e-6);
        assert!(r.residuals["iv_1"] < 1e-6 && r.residuals["iv_2"] < 1e-6, "{:?}", r.residuals);
        assert!(r.integer_test.pass, "{:?}", r.integer_test);
    }
}

#[test]
fn constant_second_variable() {
    let opts = LadderOptions::default();
    let c = 1.5;
    let m = FreeSumModel::scalar(seven_three(), SpectralMeasure::dirac(c));
    let r = atoms::decompose_atom(&m, at(1.0 + c).as_ref(), &opts).unwrap();
    let d = r.decomposition.as_ref().unwrap();
    assert!((r.mass - 0.3).abs() < 1e-6);
    assert!((d.b1[(0, 0)].re - 1.0).abs() < 1e-6 && (d.b2[(0, 0)].re - c).abs() < 1e-6);
    assert!((d.beta2[(0, 0)].re - 1.0 / 0.3).abs() < 1e-4);
    assert!((d.tau_p2 - 1.0).abs() < 1e-12);
    for key in ["i", "v", "vii"] {
        assert!(r.residuals[key] < 1e-6, "{key}: {:?}", r.residuals);
    }
}

#[test]
fn decompose_rejects_singular_mass() {
    let opts = LadderOptions::default();
    let m = FreeSumModel::scalar(sc(), sc());
    assert!(atoms::decompose_atom(&m, at(0.0).as_ref(), &opts).is_err());
}

#[test]
fn pipeline_matches_direct_sum() {
    let opts = LadderOptions::default();
    let p = NCPoly::parse("Z1 + Z2").unwrap();
    let direct = FreeSumModel::scalar(seven_three(), six_four());
    for lambda in [0.0, 2.0, 1.0] {
        let r = atoms::eigenvalue_test(&p, lambda, &seven_three(), &six_four(), &opts).unwrap();
        let e = atoms::boundary_emass(&direct, at(lambda).as_ref(), &opts).unwrap();
        assert!((r.mass - e.e[(0, 0)].re).abs() < 1e-6, "λ = {lambda}: {} vs {}", r.mass, e.e[(0, 0)].re);
    }
}

#[test]
fn invertible_mass_regularizes_trivially() {
    let opts = LadderOptions::default();
    let m = FreeSumModel::scalar(seven_three(), six_four());
    let (pair, y) = atoms::support_regularize(&m, at(0.0).as_ref(), &opts).unwrap();
    assert_eq!((pair.rank_q1, pair.rank_q2), (1, 1));
    assert!(pair.offset.abs() < 1e-6, "{}", pair.offset);
    assert!(pair.doubled_invertible);
    assert!((y.mass - 0.3).abs() < 1e-6);
}

#[test]
fn synthetic_compression_reduces_dimension() {
    // a₂ = 0 and b = diag(1, 1): the kernel lives on the first coordinate only
    let opts = LadderOptions::default();
    let a1 = linalg::diag_real(&[1.0, 0.0]);
    let a2: CMat = Mat::zeros(2, 2);
    let m = FreeSumModel::new(a1, a2, seven_three(), sc()).unwrap();
    let b = linalg::diag_real(&[1.0, 1.0]);
    let lim = atoms::boundary_emass(&m, b.as_ref(), &opts).unwrap();
    assert!((lim.e[(0, 0)].re - 0.3).abs() < 1e-6 && lim.e[(1, 1)].re.abs() < 1e-6);
    let (pair, y) = atoms::support_regularize(&m, b.as_ref(), &opts).unwrap();
    assert_eq!(pair.rank_q1, 1);
    assert!((pair.offset - pair.predicted_offset).abs() < 1e-2, "{} vs {}", pair.offset, pair.predicted_offset);
    assert!((pair.offset - pair.offset.round()).abs() < 1e-2);
    assert!(pair.doubled_invertible, "{:?}", y.e_eigenvalues);
    for q in [&pair.q1, &pair.q2] {
        assert!((q * q - q).norm_max() < 1e-10);
    }
    let pen = pair.doubled_pencil().unwrap();
    assert_eq!(pen.n, 4);
}

#[test]
fn free_projection_anticommutator() {
    let opts = LadderOptions::default();
    let p = NCPoly::parse("Z1*Z2 + Z2*Z1").unwrap();
    let proj = SpectralMeasure::atomic(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
    let r = atoms::eigenvalue_test(&p, 0.0, &proj, &proj, &opts).unwrap();
    let (pair, y) = r.regularization.as_ref().expect("E(p) is singular");
    assert!(pair.doubled_invertible, "{:?}", y.e_eigenvalues);
    assert!(r.offset_distance.unwrap() < 1e-2);
    assert!(r.mass.abs() < 1e-3, "{}", r.mass);
}

#[test]
fn semicircle_anticommutator_trichotomy() {
    let opts = LadderOptions::default();
    let p = NCPoly::parse("Z1*Z2 + Z2*Z1").unwrap();
    let r = atoms::eigenvalue_test(&p, 0.37, &sc(), &sc(), &opts).unwrap();
    assert!(r.trichotomy_pass);
    assert!(r.mass.abs() < 1e-2);
}

#[test]
fn integer_test_semicircle_sums() {
    let opts = LadderOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for planted in [false, true] {
        let mut h = || {
            let mut m = linalg::random_hermitian(2, &mut rng);
            if planted {
                // shared null vector e₁
                for i in 0..2 {
                    m[(0, i)] = cx(0.0, 0.0);
                    m[(i, 0)] = cx(0.0, 0.0);
                }
            }
            m
        };
        let (a1, a2, b) = (h(), h(), h());
        let m = FreeSumModel::new(a1, a2, sc(), sc()).unwrap();
        let r = atoms::atom_mass(&m, b.as_ref(), &opts).unwrap();
        let (value, target, pass) = atoms::integer_test(&r);
        assert!(pass, "value {value}, target {target:?}");
        assert_eq!(target, Some(if planted { 1.0 } else { 0.0 }));
    }
}

#[test]
fn scan_runs_candidates() {
    let opts = LadderOptions::default();
    let m = FreeSumModel::scalar(seven_three(), six_four());
    let cands: Vec<CMat> = atoms::sum_atom_candidates(&seven_three(), &six_four()).iter().map(|c| at(c.0)).collect();
    let out = atoms::atom_scan(&m, &cands, &opts);
    let masses: Vec<f64> = out.into_iter().map(|r| r.unwrap().mass).collect();
    assert!((masses[0] - 0.3).abs() < 1e-6 && (masses[1] - 0.1).abs() < 1e-6);
}

#[test]
fn report_serializes() {
    let opts = LadderOptions::default();
    let m = FreeSumModel::scalar(seven_three(), six_four());
    let r = atoms::decompose_atom(&m, at(0.0).as_ref(), &opts).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    assert!(v["residuals"]["v"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["location"][0][0][0].as_f64().unwrap(), 0.0);
}
