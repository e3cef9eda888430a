use statrs::distribution::{ContinuousCDF, Normal};

use fairpost::audit::equalized_odds_violation;
use fairpost::scenarios::{
    sample_scenario, score_distribution, unidentifiability_check, Scenario, ScenarioRecord, ScoreKind,
};

/// Largest gap between the empirical CDF of `values` and `cdf`.
fn ks_to(values: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = cdf(v);
            (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

fn conditional(records: &[ScenarioRecord], a: i8, y: i8, kind: ScoreKind) -> Vec<f64> {
    records.iter().filter(|r| r.a == a && r.y == y).map(|r| r.score(kind)).collect()
}

#[test]
fn conditionals_follow_their_gaussians() {
    for scenario in [Scenario::One, Scenario::Two] {
        let records = sample_scenario(scenario, 100_000, 21);
        for a in [-1i8, 1] {
            for y in [-1i8, 1] {
                let star = Normal::new(f64::from(a + y), 1.0).unwrap();
                let tilde = Normal::new(f64::from(y), 1.0).unwrap();
                for (kind, law) in [(ScoreKind::RStar, star), (ScoreKind::RTilde, tilde)] {
                    let mut values = conditional(&records, a, y, kind);
                    // One-sample band at the 1% level.
                    let band = 1.628 / (values.len() as f64).sqrt();
                    let d = ks_to(&mut values, |x| law.cdf(x));
                    assert!(d < band, "{scenario} a={a} y={y} {}: {d} vs {band}", kind.as_str());
                }
            }
        }
    }
}

#[test]
fn r_star_gap_approaches_the_closed_form() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let closed_form = 2.0 * normal.cdf(1.0) - 1.0;
    let mut errors = Vec::new();
    for n in [1_000, 100_000] {
        let records = sample_scenario(Scenario::One, n, 5);
        let gap = equalized_odds_violation(&score_distribution(&records, ScoreKind::RStar).unwrap());
        errors.push((gap - closed_form).abs());
    }
    assert!(errors[1] < errors[0] && errors[1] < 0.01, "{errors:?}");
}

#[test]
fn scenarios_are_indistinguishable_across_seeds() {
    for (s1, s2) in [(1, 2), (7, 8), (30, 31)] {
        let report = unidentifiability_check(50_000, s1, s2).unwrap();
        assert_eq!(report.ks.len(), 8);
        assert!(report.passed, "{report:?}");
    }
}

/// Within each group, the hull of the R* curve lies above every point of a
/// competitor's curve, up to sampling noise.
#[test]
fn r_star_curves_dominate_competitors() {
    use fairpost::geometry::{achievable_region, conditional_roc};
    use fairpost::joint::{estimate_score_distribution, ScoreSample};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for scenario in [Scenario::One, Scenario::Two] {
        let records = sample_scenario(scenario, 100_000, 17);
        let noise: Vec<f64> = records.iter().map(|_| rng.sample(StandardNormal)).collect();
        let competitors: [(&str, Box<dyn Fn(usize) -> f64>); 3] = [
            ("noisy", Box::new(|i| records[i].r_star + noise[i])),
            ("square", Box::new(|i| records[i].r_star * records[i].r_star)),
            ("clipped", Box::new(|i| records[i].r_star.clamp(-0.5, 1.5))),
        ];
        let star = conditional_regions(&records, |i| records[i].r_star);
        for (name, score) in &competitors {
            let dist = estimate_score_distribution(&samples(&records, score)).unwrap();
            for a in 0..2 {
                let roc = conditional_roc(&dist, a).unwrap();
                let shortfall = roc
                    .rates()
                    .map(|p| p.tpr - star[a].boundary(p.fpr))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(shortfall < 0.01, "{scenario} {name} group {a}: {shortfall}");
            }
        }
    }

    fn samples(records: &[ScenarioRecord], score: impl Fn(usize) -> f64) -> Vec<ScoreSample> {
        (0..records.len()).map(|i| ScoreSample::new(records[i].group(), score(i), records[i].outcome(), 1.0)).collect()
    }

    fn conditional_regions(
        records: &[ScenarioRecord],
        score: impl Fn(usize) -> f64,
    ) -> Vec<fairpost::geometry::FeasibleRegion> {
        let dist = estimate_score_distribution(&samples(records, score)).unwrap();
        (0..2).map(|a| achievable_region(&conditional_roc(&dist, a).unwrap())).collect()
    }
}
