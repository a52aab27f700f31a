use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stegcnn::dataset::synth_cover;
use stegcnn::network::{forward_backward, STEGO};
use stegcnn::{
    build_network, conv2d, embed, forward, Algorithm, ConvGeometry, Kernel, KeyMode, NetworkSpec, StegoConfig,
};
use stegcnn_bench::normalized_cover;

fn convolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv2d");
    for (size, ks) in [(32, 3), (30, 27), (128, 3)] {
        let input = normalized_cover(1, size);
        let kernel = Kernel::new(ks, (0..ks * ks).map(|i| (i as f64).sin()).collect(), 0.0).unwrap();
        g.bench_with_input(
            BenchmarkId::from_parameter(format!("{size}x{size}*{ks}x{ks}")),
            &input,
            |b, x| b.iter(|| conv2d(black_box(x), &kernel, ConvGeometry::VALID).unwrap()),
        );
    }
    g.finish();
}

fn network(c: &mut Criterion) {
    let spec = NetworkSpec::desk();
    let params = build_network(&spec, 1).unwrap();
    let image = normalized_cover(2, spec.input_size);
    c.bench_function("desk forward", |b| {
        b.iter(|| forward(&params, &spec, black_box(&image)).unwrap())
    });
    c.bench_function("desk forward+backward", |b| {
        b.iter(|| forward_backward(&params, &spec, black_box(&image), STEGO).unwrap())
    });
}

fn embedding(c: &mut Criterion) {
    let cover = synth_cover(3, 0, 256);
    let mut g = c.benchmark_group("embed 256x256 at 0.4");
    for alg in [Algorithm::LsbMatching, Algorithm::AdaptiveCost, Algorithm::DctLsb] {
        let cfg = StegoConfig::new(alg, 0.4, KeyMode::Fixed { seed: 1 }, 2).unwrap();
        g.bench_function(alg.to_string(), |b| b.iter(|| embed(black_box(&cover), &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, convolution, network, embedding);
criterion_main!(benches);
