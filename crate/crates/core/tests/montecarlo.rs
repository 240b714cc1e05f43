use rangelab::exact::expected_range;
use rangelab::montecarlo::{make_sampler, run_trajectory, run_trials, TrialOptions};
use rangelab::DistributionSpec;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_passes(masses: Vec<f64>, seed: u64) {
    let draws = 1_000_000u64;
    let d = DistributionSpec::finite(masses.clone()).unwrap();
    let (mut s, _) = make_sampler(&d, seed, 0).unwrap();
    let mut counts = vec![0u64; masses.len()];
    for _ in 0..draws {
        counts[s.draw().1 as usize] += 1;
    }
    let stat: f64 = counts
        .iter()
        .zip(&masses)
        .map(|(&o, &p)| {
            let e = p * draws as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (masses.len() - 1).max(1) as f64;
    let critical = ChiSquared::new(dof).unwrap().inverse_cdf(1.0 - 1e-6);
    assert!(stat < critical, "chi-square {stat} >= {critical} for {masses:?}");
}

#[test]
fn finite_sampler_goodness_of_fit() {
    chi_square_passes(vec![0.25; 4], 1);
    chi_square_passes(vec![0.5, 0.25, 0.125, 0.0625, 0.0625], 2);
    let w: Vec<f64> = (1..=16).map(|i| 1.0 / i as f64).collect();
    let total: f64 = w.iter().sum();
    chi_square_passes(w.iter().map(|x| x / total).collect(), 3);
}

#[test]
fn geometric_inversion_frequency_of_first_atom() {
    let d = DistributionSpec::geometric(0.5).unwrap();
    let (mut s, _) = make_sampler(&d, 11, 0).unwrap();
    let ones = (0..1_000_000).filter(|_| s.draw().1 == 1).count();
    let f = ones as f64 / 1e6;
    assert!((f - 0.5).abs() < 0.002, "{f}");
}

#[test]
fn two_atoms_are_both_seen_within_fifty_draws() {
    let d = DistributionSpec::uniform(2).unwrap();
    for seed in 0..20 {
        assert_eq!(run_trajectory(&d, seed, 0, &[50]).unwrap().values, vec![2]);
    }
}

#[test]
fn first_draw_is_always_new() {
    for d in [
        DistributionSpec::uniform(10).unwrap(),
        DistributionSpec::geometric(0.3).unwrap(),
        DistributionSpec::zipflog(1.0).unwrap(),
    ] {
        assert_eq!(run_trajectory(&d, 5, 2, &[1]).unwrap().values, vec![1]);
    }
}

#[test]
fn trajectories_respect_basic_bounds() {
    let d = DistributionSpec::uniform(40).unwrap();
    let cps = [1, 2, 5, 20, 100, 1000];
    for t in 0..20 {
        let tr = run_trajectory(&d, 99, t, &cps).unwrap();
        assert!(tr.values.windows(2).all(|w| w[1] >= w[0]));
        assert!(tr.values.iter().zip(&cps).all(|(&v, &n)| v <= n && v <= 40));
    }
}

#[test]
fn uniform_four_mean_at_two_draws() {
    let d = DistributionSpec::uniform(4).unwrap();
    let run = run_trials(&d, &[2], 100_000, 7, &TrialOptions::default()).unwrap();
    let se = run.summary.std[0] / (1e5f64).sqrt();
    assert!((run.summary.mean[0] - 1.75).abs() <= 4.0 * se, "{:?}", run.summary);
}

fn assert_consistent(d: &DistributionSpec, cps: &[u64], trials: u64, seed: u64) {
    let run = run_trials(d, cps, trials, seed, &TrialOptions::default()).unwrap();
    for (i, &n) in cps.iter().enumerate() {
        let exact = expected_range(&run.effective, n, 1e-9).unwrap().bracket;
        let se = run.summary.std[i] / (trials as f64).sqrt();
        let dev = (run.summary.mean[i] - exact.mid()).abs();
        assert!(
            dev <= 4.0 * se + exact.width(),
            "{} n={n}: mean {} vs exact {exact} (se {se})",
            d.kind_name(),
            run.summary.mean[i]
        );
    }
}

#[test]
fn simulation_agrees_with_exact_values() {
    assert_consistent(&DistributionSpec::uniform(1000).unwrap(), &[10, 100, 1000, 5000], 200, 42);
    assert_consistent(&DistributionSpec::geometric(0.5).unwrap(), &[10, 1000, 100_000], 200, 1);
    assert_consistent(&DistributionSpec::geometric(0.99).unwrap(), &[10, 1000, 10_000], 200, 2);
}

#[test]
fn zipflog_simulation_agrees_with_its_surrogate() {
    assert_consistent(&DistributionSpec::zipflog(1.0).unwrap(), &[100, 10_000, 100_000], 100, 3);
    assert_consistent(&DistributionSpec::zipflog(0.5).unwrap(), &[1000, 50_000], 100, 4);
}

#[test]
fn surrogate_is_close_to_the_true_law() {
    // The stand-in only coarsens atoms beyond 2^16, which barely matter at n = 10^4.
    let d = DistributionSpec::zipflog(1.0).unwrap();
    let (_, eff) = make_sampler(&d, 0, 0).unwrap();
    let a = expected_range(&d, 10_000, 1e-9).unwrap().bracket.mid();
    let b = expected_range(&eff, 10_000, 1e-9).unwrap().bracket.mid();
    assert!((a - b).abs() / a < 1e-3, "{a} vs {b}");
}

#[test]
fn runs_are_bit_identical() {
    let d = DistributionSpec::zipflog(2.0).unwrap();
    let cps = [1, 10, 1000];
    let a = run_trials(&d, &cps, 16, 123, &TrialOptions::default()).unwrap();
    let b = run_trials(&d, &cps, 16, 123, &TrialOptions { threads: Some(3), ..Default::default() }).unwrap();
    assert_eq!(a.summary, b.summary);
}
