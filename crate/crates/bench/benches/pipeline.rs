use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use psyseg_bench::{clustered_points, desk_image, random_features, random_responses};
use psyseg_core::embedding::{loss_gradient, train, FEATURE_DIM};
use psyseg_core::evaluation::dendrogram_purity;
use psyseg_core::hierarchy::{build_hierarchy, choose_k, kmeans, silhouette};
use psyseg_core::imaging::slic;
use psyseg_core::query::{generate_candidates, select_queries, Neighborhoods};
use psyseg_core::{seed, ClusteringConfig, EmbeddingModel, QueryEngineConfig, TrainingConfig};

fn imaging(c: &mut Criterion) {
    let img = desk_image(0);
    let mut g = c.benchmark_group("imaging");
    g.sample_size(10);
    g.bench_function("slic desk 300", |b| b.iter(|| slic(black_box(&img), 300, 10.0, 0).unwrap()));
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let pts = clustered_points(300, 16, 9, 1);
    let cfg = ClusteringConfig::default();
    let mut g = c.benchmark_group("clustering");
    g.bench_function("kmeans k9 n300", |b| b.iter(|| kmeans(black_box(&pts), 9, 8, 0).unwrap()));
    let assignment = kmeans(&pts, 9, 8, 0).unwrap().assignment;
    g.bench_function("silhouette n300", |b| b.iter(|| silhouette(black_box(&pts), &assignment).unwrap()));
    g.bench_function("choose_k n300", |b| b.iter(|| choose_k(black_box(&pts), &cfg, 0).unwrap()));
    g.bench_function("build_hierarchy n300", |b| b.iter(|| build_hierarchy(black_box(&pts), &cfg).unwrap()));
    let tree = build_hierarchy(&pts, &cfg).unwrap();
    let labels: Vec<usize> = (0..pts.len()).map(|i| i % 9).collect();
    g.bench_function("dendrogram_purity n300", |b| b.iter(|| dendrogram_purity(black_box(&tree), &labels).unwrap()));
    g.finish();
}

fn embedding(c: &mut Criterion) {
    let feats = random_features(300, 2);
    let responses = random_responses(2500, 300, 3);
    let model = EmbeddingModel::new(&[FEATURE_DIM, 64, 32, 16], 4).unwrap();
    let mut g = c.benchmark_group("embedding");
    g.bench_function("loss_gradient batch 64", |b| {
        b.iter(|| loss_gradient(black_box(&model), &feats, &responses[..64], 0.2).unwrap())
    });
    g.sample_size(10);
    let cfg = TrainingConfig { epochs: 1, ..TrainingConfig::default() };
    g.bench_function("train epoch 2500", |b| {
        b.iter_batched(|| model.clone(), |mut m| train(&mut m, &feats, &responses, &cfg).unwrap(), BatchSize::LargeInput)
    });
    g.finish();
}

fn query(c: &mut Criterion) {
    let pts = clustered_points(300, 16, 9, 5);
    let tree = build_hierarchy(&pts, &ClusteringConfig::default()).unwrap();
    let patches: Vec<usize> = (0..pts.len()).collect();
    let answered = random_responses(2500, 300, 6);
    let config = QueryEngineConfig::default();
    let hoods = Neighborhoods::new(&pts, config.k);
    let candidates = generate_candidates(Some(&tree), &patches, 1250, &mut seed::rng(7)).unwrap();
    let mut g = c.benchmark_group("query");
    g.bench_function("generate_candidates 1250", |b| {
        b.iter(|| generate_candidates(Some(black_box(&tree)), &patches, 1250, &mut seed::rng(7)).unwrap())
    });
    g.bench_function("neighborhoods n300", |b| b.iter(|| Neighborhoods::new(black_box(&pts), config.k)));
    g.bench_function("select_queries 1250 vs 2500", |b| {
        b.iter(|| select_queries(black_box(&candidates), &answered, &hoods, &config).unwrap())
    });
    g.finish();
}

criterion_group!(benches, imaging, clustering, embedding, query);
criterion_main!(benches);
