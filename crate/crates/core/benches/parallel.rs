use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mushra_core::analysis::{sensitivity_grid, SensitivityConfig};
use mushra_core::par::Execution;
use mushra_core::protocol::{TestVariant, REFERENCE_LABEL};
use mushra_core::scale::Score;
use mushra_core::screening::lambda_sweep;
use mushra_core::store::RatingRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(raters: usize, utts: usize) -> Vec<RatingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let systems = [REFERENCE_LABEL, "ANC", "FS2", "ST2", "VITS"];
    let mut out = Vec::new();
    for r in 0..raters {
        for u in 0..utts {
            for (i, s) in systems.iter().enumerate() {
                let v: f64 = (90.0 - 12.0 * i as f64 + rng.random_range(-15.0..15.0)).clamp(0.0, 100.0);
                out.push(RatingRecord {
                    language: "hi".into(),
                    variant: TestVariant::Mushra,
                    campaign_id: "bench".into(),
                    rater_id: format!("r{r}"),
                    page_index: u,
                    utterance_id: format!("u{u}"),
                    system_id: s.to_string(),
                    slot_id: None,
                    score: Some(Score::quantized(v).unwrap()),
                    dg: None,
                    cmos: None,
                    submitted_at: None,
                });
            }
        }
    }
    out
}

fn bench(c: &mut Criterion) {
    let data = fixture(20, 20);
    let axis: Vec<usize> = (1..=20).step_by(4).collect();
    let mut g = c.benchmark_group("sensitivity_grid");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let cfg = SensitivityConfig { trials: 200, seed: 5, systems: None, exec };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| sensitivity_grid(&data, &axis, &axis, cfg).unwrap())
        });
    }
    g.finish();

    let big = fixture(120, 100);
    let lambdas: Vec<f64> = (0..=100).map(f64::from).collect();
    let mut g = c.benchmark_group("lambda_sweep");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_function(format!("{exec:?}"), |b| b.iter(|| lambda_sweep(&big, &lambdas, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
