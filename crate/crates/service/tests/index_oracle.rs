use msje_core::encoders::Side;
use msje_service::RetrievalIndex;
use proptest::prelude::*;

/// Full scan and full sort by (distance, id).
fn scan(items: &[(String, Vec<f64>)], q: &[f64], k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = items
        .iter()
        .map(|(id, e)| {
            let mut s = 0.0;
            for j in 0..q.len() {
                s += (q[j] - e[j]) * (q[j] - e[j]);
            }
            (id.clone(), s.sqrt())
        })
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn topk_matches_scan(
        dim in 1usize..8,
        n in 1usize..200,
        k in 1usize..250,
        coarse in any::<bool>(),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        // Coarse coordinates force many exact distance ties.
        let draw = |rng: &mut rand::rngs::StdRng| {
            if coarse { rng.random_range(-2..=2) as f64 } else { rng.random_range(-1.0..1.0) }
        };
        let items: Vec<(String, Vec<f64>)> = (0..n)
            .map(|i| (format!("item{:03}", (i * 37) % 1000), (0..dim).map(|_| draw(&mut rng)).collect()))
            .collect();
        let idx = RetrievalIndex::build(Side::Image, "fp", items.clone()).unwrap();
        for _ in 0..20 {
            let q: Vec<f64> = (0..dim).map(|_| draw(&mut rng)).collect();
            let got: Vec<(String, f64)> = idx.query_topk(&q, k).unwrap().into_iter().map(|h| (h.id, h.distance)).collect();
            prop_assert_eq!(got, scan(&items, &q, k));
        }
    }
}

#[test]
fn stored_item_comes_first_at_distance_zero() {
    let items: Vec<(String, Vec<f64>)> = (0..50).map(|i| (format!("r{i}"), vec![i as f64, (i * i) as f64 * 0.01])).collect();
    let idx = RetrievalIndex::build(Side::Recipe, "fp", items.clone()).unwrap();
    for (id, e) in &items {
        let top = &idx.query_topk(e, 3).unwrap()[0];
        assert_eq!((&top.id, top.distance), (id, 0.0));
    }
}
