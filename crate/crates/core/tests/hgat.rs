mod common;

use coguide::graph::{build_i2s_graph, build_s2i_graph, collapse_to_homogeneous};
use coguide::hgat::{GraphMasks, HgatLayer};
use coguide_autodiff::{ParamStore, Session, Tensor};
use common::{dense_hgat, dense_homogeneous_mha, max_abs_diff, permute_graph, random_hetero_graph, random_tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layer(relations: usize, heads: usize, dim: usize, seed: u64) -> (HgatLayer, ParamStore<f64>) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = HgatLayer::register(&mut store, "probe", relations, heads, dim, 0.2, &mut rng);
    (l, store)
}

fn run(l: &HgatLayer, store: &ParamStore<f64>, x: &Tensor<f64>, g: &coguide::graph::HeteroGraph) -> Tensor<f64> {
    let mut s = Session::new(store);
    let xv = s.tape.constant(x.clone());
    let out = l.forward(&mut s, xv, &GraphMasks::new(g).unwrap()).unwrap();
    s.tape.value(out).clone()
}

#[test]
fn matches_explicit_loops_on_random_six_node_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..25 {
        let g = random_hetero_graph(6, 0.4, &mut rng);
        let (l, store) = layer(4, 2, 8, trial);
        let x = random_tensor(6, 8, &mut rng);
        let diff = max_abs_diff(&run(&l, &store, &x, &g), &dense_hgat(&l, &store, &x, &g));
        assert!(diff <= 1e-6, "trial {trial}: {diff}");
    }
}

#[test]
fn attention_rows_are_normalized_per_relation_and_head() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (l, store) = layer(4, 4, 8, 1);
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let w = rng.random_range(0..=3);
        let g = if rng.random_bool(0.5) {
            build_s2i_graph(n, w).unwrap()
        } else {
            build_i2s_graph(n, w, rng.random_range(0..=4)).unwrap()
        };
        let masks = GraphMasks::new(&g).unwrap();
        let x = random_tensor(g.num_nodes(), 8, &mut rng);
        let mut s = Session::new(&store);
        let xv = s.tape.constant(x);
        let (_, maps) = l.forward_with_attention(&mut s, xv, &masks).unwrap();
        for map in maps {
            let a = s.tape.value(map.weights);
            let mask = masks.masks[map.relation].as_ref().unwrap();
            for i in 0..g.num_nodes() {
                let row = a.row_slice(i);
                let has = (0..g.num_nodes()).any(|j| mask[i * g.num_nodes() + j]);
                let sum: f64 = row.iter().sum();
                if has {
                    assert!((sum - 1.0).abs() <= 1e-6, "row {i} sums to {sum}");
                }
                for (j, &v) in row.iter().enumerate() {
                    if !mask[i * g.num_nodes() + j] {
                        assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn collapsed_graph_reduces_to_plain_multi_head_attention() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..10 {
        let g = collapse_to_homogeneous(&random_hetero_graph(7, 0.3, &mut rng));
        let (l, store) = layer(1, 4, 8, 100 + trial);
        let x = random_tensor(7, 8, &mut rng);
        let neighbors: Vec<Vec<usize>> = (0..7).map(|i| g.incoming(0, i).to_vec()).collect();
        let diff = max_abs_diff(&run(&l, &store, &x, &g), &dense_homogeneous_mha(&l, &store, &x, &neighbors));
        assert!(diff <= 1e-9, "{diff}");
    }
}

#[test]
fn tied_relation_weights_on_a_collapsed_graph_ignore_the_extra_relations() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let g = collapse_to_homogeneous(&build_i2s_graph(5, 1, 2).unwrap());
    let (single, store1) = layer(1, 2, 8, 3);
    let (tied, mut store4) = layer(4, 2, 8, 4);
    for r in 0..4 {
        for k in 0..2 {
            let (src, dst) = (&single.heads[0][k], &tied.heads[r][k]);
            for (a, b) in [(src.query, dst.query), (src.key, dst.key), (src.value, dst.value)] {
                store4.get_mut(b).value = store1.get(a).value.clone();
            }
        }
    }
    let x = random_tensor(7, 8, &mut rng);
    assert_eq!(run(&single, &store1, &x, &g), run(&tied, &store4, &x, &g));
}

#[test]
fn permuting_nodes_permutes_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (l, store) = layer(4, 2, 6, 7);
    for _ in 0..10 {
        let g = random_hetero_graph(6, 0.5, &mut rng);
        let x = random_tensor(6, 6, &mut rng);
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(&mut rng);
        let mut px = Tensor::zeros(6, 6);
        for (i, &to) in perm.iter().enumerate() {
            for c in 0..6 {
                px.data_mut()[to * 6 + c] = x.get(i, c);
            }
        }
        let out = run(&l, &store, &x, &g);
        let pout = run(&l, &store, &px, &permute_graph(&g, &perm));
        for (i, &to) in perm.iter().enumerate() {
            for c in 0..6 {
                assert!((out.get(i, c) - pout.get(to, c)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn node_count_mismatch_is_rejected() {
    let (l, store) = layer(4, 2, 4, 0);
    let g = build_s2i_graph(3, 1).unwrap();
    let mut s = Session::new(&store);
    let x = s.tape.constant(Tensor::zeros(5, 4));
    assert!(l.forward(&mut s, x, &GraphMasks::new(&g).unwrap()).is_err());
}
