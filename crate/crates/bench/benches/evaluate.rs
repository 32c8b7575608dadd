use anonymeval_bench::workload;
use anonymeval_core::{
    agreement_report, evaluate, tokenize, IcProvider, MaskPolicy, Masker, MaskerConfig, UnigramIc,
};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn bench_tokenize(c: &mut Criterion) {
    let (corpus, _) = workload(1, 200);
    let chars: usize = corpus.documents.iter().map(|d| d.text.chars().count()).sum();
    let mut group = c.benchmark_group("tokenize");
    group.throughput(Throughput::Elements(chars as u64));
    group.bench_function("corpus", |b| {
        b.iter(|| corpus.documents.iter().map(|d| tokenize(black_box(&d.text)).len()).sum::<usize>())
    });
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    for documents in [50, 500] {
        let (corpus, masks) = workload(2, documents);
        let unigram = IcProvider::Unigram(UnigramIc::from_corpus(&corpus));
        group.throughput(Throughput::Elements(corpus.len() as u64));
        group.bench_with_input(BenchmarkId::new("uniform", documents), &corpus, |b, corpus| {
            b.iter(|| evaluate(corpus, &masks, MaskPolicy::Lenient, &IcProvider::Uniform).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("unigram", documents), &corpus, |b, corpus| {
            b.iter(|| evaluate(corpus, &masks, MaskPolicy::Lenient, &unigram).unwrap())
        });
    }
    group.finish();
}

fn bench_agreement(c: &mut Criterion) {
    let (corpus, _) = workload(3, 200);
    c.bench_function("agreement/200", |b| b.iter(|| agreement_report(black_box(&corpus))));
}

fn bench_masker(c: &mut Criterion) {
    let (corpus, _) = workload(4, 200);
    let masker = Masker::new(&MaskerConfig::default()).unwrap();
    c.bench_function("masker/detect/200", |b| {
        b.iter(|| corpus.documents.iter().map(|d| masker.detect(black_box(&d.text)).len()).sum::<usize>())
    });
}

criterion_group!(benches, bench_tokenize, bench_evaluate, bench_agreement, bench_masker);
criterion_main!(benches);
