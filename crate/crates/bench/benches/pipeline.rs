//! Pipeline benchmarks: policy parsing, single-transaction reasoning,
//! ledger writes and whole-chain verification.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use linkshare_core::ledger::{execute_transaction, Chain};
use linkshare_core::ontology::parse_policy_document;
use linkshare_core::reasoner::verify_transaction;
use linkshare_core::simulator::BASE_POLICY;
use linkshare_core::testing::netflix_scenario;

fn bench_parse_policy(c: &mut Criterion) {
    c.bench_function("parse_policy_document/base", |b| {
        b.iter(|| parse_policy_document(std::hint::black_box(BASE_POLICY.as_bytes())).unwrap())
    });
}

fn bench_verify_transaction(c: &mut Criterion) {
    let s = netflix_scenario();
    c.bench_function("verify_transaction/3-field pass", |b| {
        b.iter(|| verify_transaction(std::hint::black_box(&s.tree), std::hint::black_box(&s.request)))
    });
}

fn bench_execute_transaction(c: &mut Criterion) {
    let s = netflix_scenario();
    c.bench_function("execute_transaction/3-field pass", |b| {
        b.iter_batched(
            Chain::new,
            |mut chain| {
                execute_transaction(&s.tree, &mut chain, &s.request, 1).unwrap();
                chain
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_chain_verify(c: &mut Criterion) {
    let s = netflix_scenario();
    let mut chain = Chain::new();
    for i in 1..=1_000u64 {
        let mut request = s.request.clone();
        request.tx_id = format!("T{i:05}");
        chain.branch_write(&request, "User1", i).unwrap();
    }
    c.bench_function("chain_verify/1000 blocks", |b| {
        b.iter(|| {
            let report = std::hint::black_box(&chain).verify();
            assert!(report.ok);
            report
        })
    });
}

criterion_group!(
    benches,
    bench_parse_policy,
    bench_verify_transaction,
    bench_execute_transaction,
    bench_chain_verify
);
criterion_main!(benches);
