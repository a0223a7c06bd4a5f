use doanet::acoustics::{BankPlan, RirBank, RoomConfig};
use doanet::baselines::{hermitian_eig, Band, BaselineMethod, ComplexMatrix};
use doanet::dataset::make_doa_grid;
use doanet::eval::{run_experiment, BaselineDoa, DoaMethod, ExperimentConfig, NoiseType, SourceKind};
use doanet::rng::CounterRng;
use doanet::signal::{white_noise, write_wav, WavFormat};
use doanet::{Complex, StftParams};

fn random_hermitian(n: usize, rng: &mut CounterRng) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n);
    for r in 0..n {
        m.set(r, r, Complex::new(rng.normal() * 3.0, 0.0));
        for c in r + 1..n {
            let z = Complex::new(rng.normal(), rng.normal());
            m.set(r, c, z);
            m.set(c, r, z.conj());
        }
    }
    m
}

/// Characteristic polynomial coefficients `[1, c1, ..., cn]` of
/// `det(λI − A)` by Faddeev–LeVerrier.
fn char_poly(a: &ComplexMatrix) -> Vec<Complex> {
    let n = a.size();
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    let mut m = ComplexMatrix::zeros(n);
    for k in 1..=n {
        // M_k = A·M_{k−1} + c_{k−1} I
        let mut next = a.mul(&m);
        for i in 0..n {
            next.set(i, i, next.get(i, i) + coeffs[k - 1]);
        }
        m = next;
        let c = -a.mul(&m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// All roots of a monic polynomial by Durand–Kerner iteration.
fn poly_roots(coeffs: &[Complex]) -> Vec<Complex> {
    let n = coeffs.len() - 1;
    let eval = |z: Complex| coeffs.iter().fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c);
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex> = (0..n).map(|i| seed.powu(i as u32) * 5.0).collect();
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let denom = (0..n).filter(|&j| j != i).fold(Complex::new(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 {
            break;
        }
    }
    roots
}

#[test]
fn jacobi_eigenvalues_match_characteristic_polynomial_roots() {
    let mut rng = CounterRng::new(404);
    for _ in 0..40 {
        let a = random_hermitian(4, &mut rng);
        let mut roots: Vec<f64> = poly_roots(&char_poly(&a)).iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        let eig = hermitian_eig(&a).unwrap();
        for (l, r) in eig.values.iter().zip(&roots) {
            assert!((l - r).abs() < 1e-7 * a.frobenius().max(1.0), "{:?} vs {roots:?}", eig.values);
        }
    }
}

fn anechoic_bank(resolution: f64) -> RirBank {
    let grid = make_doa_grid(resolution).unwrap();
    RirBank::generate(&BankPlan {
        rooms: vec![RoomConfig::new("free", [8.0, 7.0, 2.7], 0.0).unwrap()],
        mics: 4,
        spacing: 0.08,
        positions_per_room: 1,
        array_height: 1.5,
        distances: vec![2.0],
        doas: grid.angles().to_vec(),
        sample_rate: 16000,
        max_len: None,
        seed: 8,
    })
    .unwrap()
}

fn experiment(sources: usize, threshold: f64) -> ExperimentConfig {
    ExperimentConfig {
        rooms: vec!["free".into()],
        positions: 1,
        distances: vec![2.0],
        snrs_db: vec![30.0],
        noise_types: vec![NoiseType::White],
        sources,
        min_separation: 45.0,
        doas: None,
        max_combinations: Some(12),
        signals_per_combination: 1,
        block_frames: 50,
        threshold_deg: threshold,
        source: SourceKind::Bursts,
        band: Band::default(),
        seed: 3,
    }
}

#[test]
fn simulated_single_source_is_localized_on_a_fine_grid() {
    let grid = make_doa_grid(5.0).unwrap();
    let bank = anechoic_bank(5.0);
    let music = BaselineDoa { method: BaselineMethod::Music, band: Band::default() };
    let srp = BaselineDoa { method: BaselineMethod::SrpPhat, band: Band::default() };
    let methods: [&dyn DoaMethod; 2] = [&music, &srp];
    let mut config = experiment(1, 5.0);
    config.max_combinations = None;
    let (rows, trials) = run_experiment(&bank, &config, &grid, StftParams::half_overlap(256), &methods).unwrap();
    assert_eq!(trials.len(), 2 * 37);
    for r in &rows {
        // within one grid step everywhere, including endfire
        assert_eq!(r.acc_pct, 100.0, "{r:?}");
        assert!(r.mae_deg < 1.0, "{r:?}");
    }
}

/// Stationary white-noise sources keep both DOAs active in every frame, so
/// the signal subspace is always two-dimensional.
#[test]
fn simulated_stationary_source_pairs_are_resolved_by_music() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = (0..2)
        .map(|i| {
            let path = dir.path().join(format!("noise{i}.wav"));
            write_wav(&path, &white_noise(32000, 1, 16000, 90 + i), WavFormat::Float32).unwrap();
            path
        })
        .collect();
    let grid = make_doa_grid(15.0).unwrap();
    let bank = anechoic_bank(15.0);
    let music = BaselineDoa { method: BaselineMethod::Music, band: Band::default() };
    let methods: [&dyn DoaMethod; 1] = [&music];
    let mut config = experiment(2, 0.0);
    config.source = SourceKind::Wav { files };
    let (rows, trials) = run_experiment(&bank, &config, &grid, StftParams::half_overlap(256), &methods).unwrap();
    assert_eq!(trials.len(), 12);
    assert_eq!(rows[0].acc_pct, 100.0, "{:?}", rows[0]);
    assert_eq!(rows[0].mae_deg, 0.0);
}
