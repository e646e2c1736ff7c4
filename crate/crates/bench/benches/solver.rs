use criterion::{criterion_group, criterion_main, Criterion};
use radial_blowup::{integrate, Params, StepControls};

fn bench(c: &mut Criterion) {
    let params = Params::power(2.0, 3.0, 2, 1.0).unwrap();
    c.bench_function("integrate_p2_q3", |b| {
        b.iter(|| integrate(&params, &StepControls::default()).unwrap())
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
